#pragma once

#include "loclag/basis.hpp"
#include "loclag/graph.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>

namespace loclag {

/// Values f_v at the known vertices, ordered like Partition::known().
struct SignalData {
    Eigen::VectorXd known_values;
    std::optional<Eigen::VectorXd> truth; // full-length ground truth, if available

    void validate(Eigen::Index centers) const {
        if (known_values.size() != centers)
            throw std::invalid_argument("signal has " + std::to_string(known_values.size()) + " values for " +
                                        std::to_string(centers) + " known vertices");
        if (!known_values.allFinite()) throw std::invalid_argument("signal values must be finite");
    }
};

/// sum_v f_v chi_v over all centers.
inline Eigen::VectorXd quasi_interpolate(const BasisMatrix& b, const SignalData& d) {
    d.validate(b.cols());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(b.rows);
    for (Eigen::Index c = 0; c < b.cols(); ++c) {
        const double f = d.known_values[c];
        for (Eigen::SparseVector<double>::InnerIterator it(b.columns[static_cast<std::size_t>(c)]); it; ++it)
            out[it.index()] += f * it.value();
    }
    return out;
}

/// sum over centers v inside the ball of radius `outer_radius` around w.
inline double local_quasi_interpolate(const Graph& g, const BasisMatrix& b, const SignalData& d, Vertex w,
                                      double outer_radius) {
    d.validate(b.cols());
    if (g.size() != b.rows) throw std::invalid_argument("graph and basis sizes differ");
    double sum = 0.0;
    bool any = false;
    for (Vertex m : BallSearch(g).members(w, outer_radius)) {
        if (!b.has_center(m)) continue;
        const Eigen::Index c = b.column_of(m);
        sum += d.known_values[c] * b.columns[static_cast<std::size_t>(c)].coeff(w);
        any = true;
    }
    if (!any) throw std::domain_error("no basis center within the outer radius of vertex " + std::to_string(w));
    return sum;
}

inline double mse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth, std::span<const Vertex> mask) {
    if (mask.empty()) throw std::invalid_argument("mse: empty mask");
    if (predicted.size() != truth.size()) throw std::invalid_argument("mse: size mismatch");
    double acc = 0.0;
    for (Vertex v : mask) {
        const double e = predicted[v] - truth[v];
        acc += e * e;
    }
    return acc / static_cast<double>(mask.size());
}

} // namespace loclag
