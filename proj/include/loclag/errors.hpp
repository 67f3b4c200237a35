#pragma once

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace loclag {

/// Raised when a constructed graph is not connected. Carries the size of
/// every connected component, largest first.
class DisconnectedGraphError : public std::runtime_error {
public:
    explicit DisconnectedGraphError(std::vector<std::size_t> sizes)
        : std::runtime_error(describe(sizes)), component_sizes_(std::move(sizes)) {}

    const std::vector<std::size_t>& component_sizes() const noexcept { return component_sizes_; }

private:
    static std::string describe(const std::vector<std::size_t>& sizes) {
        std::ostringstream os;
        os << "graph is disconnected: " << sizes.size() << " components (sizes";
        for (std::size_t i = 0; i < sizes.size() && i < 16; ++i) os << ' ' << sizes[i];
        if (sizes.size() > 16) os << " ...";
        os << ')';
        return os.str();
    }

    std::vector<std::size_t> component_sizes_;
};

class DuplicatePointError : public std::runtime_error {
public:
    DuplicatePointError(long long first, long long second)
        : std::runtime_error("points " + std::to_string(first) + " and " + std::to_string(second) +
                             " are at distance zero"),
          first_(first), second_(second) {}

    long long first() const noexcept { return first_; }
    long long second() const noexcept { return second_; }

private:
    long long first_;
    long long second_;
};

/// A new vertex has no neighbor within the inner radius.
class IsolatedVertexError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Least-squares solve did not reach the requested residual.
class SolverError : public std::runtime_error {
public:
    SolverError(long long center, double residual, const std::string& what)
        : std::runtime_error(what), center_(center), residual_(residual) {}

    long long center() const noexcept { return center_; }
    double residual() const noexcept { return residual_; }

private:
    long long center_;
    double residual_;
};

/// Aggregates per-column failures from a basis computation.
class BasisError : public std::runtime_error {
public:
    struct Failure {
        long long center;
        std::string message;
    };

    explicit BasisError(std::vector<Failure> failures)
        : std::runtime_error(describe(failures)), failures_(std::move(failures)) {}

    const std::vector<Failure>& failures() const noexcept { return failures_; }

private:
    static std::string describe(const std::vector<Failure>& failures) {
        std::ostringstream os;
        os << failures.size() << " basis column(s) failed";
        if (!failures.empty()) os << "; first: center " << failures.front().center << ": " << failures.front().message;
        return os.str();
    }

    std::vector<Failure> failures_;
};

} // namespace loclag
