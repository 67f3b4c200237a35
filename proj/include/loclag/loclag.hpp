#pragma once

#include "loclag/basis.hpp"
#include "loclag/dynamic.hpp"
#include "loclag/errors.hpp"
#include "loclag/graph.hpp"
#include "loclag/harness.hpp"
#include "loclag/interp.hpp"
#include "loclag/io.hpp"
