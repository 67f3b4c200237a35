#pragma once

// Lagrange and local Lagrange bases as energy-minimizing interpolants.
//
// For a center v in V_k the Lagrange function takes the value 1 at v and 0 at
// every other known vertex; its unknown values minimize || L_u f + L_k delta_v ||_2.
// The local variant solves the same problem on the principal submatrix
// L_{Omega_v} and is zero outside Omega_v. Known values are assigned, never solved.

#include "loclag/errors.hpp"
#include "loclag/graph.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace loclag {

struct SolverConfig {
    enum class Method { normal_equations_direct, iterative_lsqr };

    Method method = Method::normal_equations_direct;
    /// Bound on || A^T (A f - b) ||_inf for the returned unknown values.
    double tolerance = 1e-10;
    /// Defaults to 10 x (number of unknowns in the system).
    std::optional<long> max_iterations;

    void validate() const {
        if (!(tolerance > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
        if (max_iterations && *max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
    }
};

inline std::string to_string(SolverConfig::Method m) {
    return m == SolverConfig::Method::normal_equations_direct ? "normal-equations-direct" : "iterative-lsqr";
}

inline SolverConfig::Method parse_solver_method(const std::string& s) {
    if (s == "normal-equations-direct" || s == "direct") return SolverConfig::Method::normal_equations_direct;
    if (s == "iterative-lsqr" || s == "lsqr" || s == "iterative") return SolverConfig::Method::iterative_lsqr;
    throw std::invalid_argument("unknown solver method '" + s + "'");
}

// ---------------------------------------------------------------------------
// Restricted least-squares system
// ---------------------------------------------------------------------------

/// min_f || L[rows, unknowns] f + L[rows, v] ||_2 for centers v, with a
/// factorization (or iterative operator) shared across centers.
class RestrictedSystem {
public:
    using SparseMatrix = Eigen::SparseMatrix<double>;

    /// `rows` empty means every row of L. `unknowns` must be a subset of rows.
    RestrictedSystem(const Laplacian& lap, std::span<const Vertex> rows, std::span<const Vertex> unknowns,
                     const SolverConfig& cfg)
        : lap_(&lap), cfg_(cfg), all_rows_(rows.empty()) {
        cfg_.validate();
        const Vertex n = lap.size();
        if (!all_rows_) {
            row_index_.assign(static_cast<std::size_t>(n), -1);
            for (std::size_t r = 0; r < rows.size(); ++r) row_index_[static_cast<std::size_t>(rows[r])] = static_cast<Eigen::Index>(r);
            row_count_ = static_cast<Eigen::Index>(rows.size());
        } else {
            row_count_ = n;
        }
        unknowns_.assign(unknowns.begin(), unknowns.end());

        std::vector<Eigen::Triplet<double>> trip;
        for (std::size_t c = 0; c < unknowns_.size(); ++c) {
            for (SparseMatrix::InnerIterator it(lap.matrix, unknowns_[c]); it; ++it) {
                const Eigen::Index r = local_row(it.row());
                if (r >= 0) trip.emplace_back(r, static_cast<Eigen::Index>(c), it.value());
            }
        }
        a_.resize(row_count_, static_cast<Eigen::Index>(unknowns_.size()));
        a_.setFromTriplets(trip.begin(), trip.end());
        a_.makeCompressed();

        if (unknowns_.empty()) return;
        if (cfg_.method == SolverConfig::Method::normal_equations_direct) {
            SparseMatrix normal = SparseMatrix(a_.transpose()) * a_;
            ldlt_.compute(normal);
            if (ldlt_.info() != Eigen::Success)
                throw SolverError(-1, std::nan(""), "normal-equation factorization failed");
        } else {
            lscg_.compute(a_);
            lscg_.setMaxIterations(cfg_.max_iterations.value_or(10L * static_cast<long>(unknowns_.size())));
        }
    }

    const std::vector<Vertex>& unknowns() const noexcept { return unknowns_; }
    Eigen::Index row_count() const noexcept { return row_count_; }

    /// Right-hand side b = -L[rows, v].
    Eigen::VectorXd rhs(Vertex v) const {
        Eigen::VectorXd b = Eigen::VectorXd::Zero(row_count_);
        for (SparseMatrix::InnerIterator it(lap_->matrix, v); it; ++it) {
            const Eigen::Index r = local_row(it.row());
            if (r >= 0) b[r] = -it.value();
        }
        return b;
    }

    /// || A^T (A f - b) ||_inf
    double normal_residual(const Eigen::VectorXd& f, const Eigen::VectorXd& b) const {
        if (f.size() == 0) return 0.0;
        return (a_.transpose() * (a_ * f - b)).lpNorm<Eigen::Infinity>();
    }

    /// Unknown values for the center v, ordered as unknowns().
    Eigen::VectorXd solve(Vertex v) const {
        if (unknowns_.empty()) return {};
        const Eigen::VectorXd b = rhs(v);
        const Eigen::VectorXd atb = a_.transpose() * b;
        Eigen::VectorXd f;
        double res = 0.0;
        if (cfg_.method == SolverConfig::Method::normal_equations_direct) {
            f = ldlt_.solve(atb);
            res = normal_residual(f, b);
            for (int step = 0; step < 3 && res > cfg_.tolerance; ++step) {
                f += ldlt_.solve(Eigen::VectorXd(a_.transpose() * (b - a_ * f)));
                res = normal_residual(f, b);
            }
        } else {
            const double scale = atb.norm();
            if (scale == 0.0) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(unknowns_.size()));
            auto& solver = lscg_;
            solver.setTolerance(std::min(1.0, 0.5 * cfg_.tolerance / scale));
            f = solver.solve(b);
            res = normal_residual(f, b);
            for (int restart = 0; restart < 2 && res > cfg_.tolerance; ++restart) {
                f = solver.solveWithGuess(b, f);
                res = normal_residual(f, b);
            }
        }
        if (!(res <= cfg_.tolerance))
            throw SolverError(v, res,
                              "least-squares solve for center " + std::to_string(v) + " stopped at residual " +
                                  std::to_string(res) + " > tolerance " + std::to_string(cfg_.tolerance));
        return f;
    }

private:
    Eigen::Index local_row(Eigen::Index global) const {
        return all_rows_ ? global : row_index_[static_cast<std::size_t>(global)];
    }

    const Laplacian* lap_;
    SolverConfig cfg_;
    bool all_rows_;
    std::vector<Eigen::Index> row_index_;
    Eigen::Index row_count_ = 0;
    std::vector<Vertex> unknowns_;
    SparseMatrix a_;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
    // Tolerance depends on the right-hand side, so it is reset per solve.
    mutable Eigen::LeastSquaresConjugateGradient<SparseMatrix> lscg_;
};

// ---------------------------------------------------------------------------
// Single columns
// ---------------------------------------------------------------------------

inline void require_center(const Partition& p, Vertex v) {
    if (v < 0 || v >= p.size() || !p.is_known(v))
        throw std::invalid_argument("basis center " + std::to_string(v) + " is not a known vertex");
}

inline Eigen::VectorXd lagrange_column(const Laplacian& lap, const Partition& p, Vertex v, const SolverConfig& cfg) {
    require_center(p, v);
    const Vertex n = lap.size();
    if (p.size() != n) throw std::invalid_argument("partition and Laplacian sizes differ");
    Eigen::VectorXd chi = Eigen::VectorXd::Zero(n);
    chi[v] = 1.0;
    if (p.unknown().empty()) return chi;
    RestrictedSystem sys(lap, {}, p.unknown(), cfg);
    const Eigen::VectorXd f = sys.solve(v);
    for (std::size_t c = 0; c < p.unknown().size(); ++c) chi[p.unknown()[c]] = f[static_cast<Eigen::Index>(c)];
    return chi;
}

namespace detail {

inline std::vector<Vertex> unknown_members(const Partition& p, std::span<const Vertex> members) {
    std::vector<Vertex> out;
    for (Vertex m : members)
        if (!p.is_known(m)) out.push_back(m);
    return out;
}

inline Eigen::SparseVector<double> assemble_column(Vertex n, Vertex center, std::span<const Vertex> unknowns,
                                                   const Eigen::VectorXd& values) {
    std::vector<std::pair<Vertex, double>> entries;
    entries.reserve(unknowns.size() + 1);
    entries.emplace_back(center, 1.0);
    for (std::size_t c = 0; c < unknowns.size(); ++c) {
        const double x = values[static_cast<Eigen::Index>(c)];
        if (x != 0.0) entries.emplace_back(unknowns[c], x);
    }
    std::sort(entries.begin(), entries.end());
    Eigen::SparseVector<double> col(n);
    col.reserve(static_cast<Eigen::Index>(entries.size()));
    for (const auto& [r, x] : entries) col.insertBack(r) = x;
    return col;
}

} // namespace detail

inline Eigen::SparseVector<double> local_lagrange_column(const Laplacian& lap, const Partition& p,
                                                         const Neighborhood& nb, const SolverConfig& cfg) {
    require_center(p, nb.center);
    if (!nb.contains(nb.center)) throw std::invalid_argument("neighborhood does not contain its center");
    const auto unknowns = detail::unknown_members(p, nb.members);
    Eigen::VectorXd f;
    if (!unknowns.empty()) {
        RestrictedSystem sys(lap, nb.members, unknowns, cfg);
        f = sys.solve(nb.center);
    }
    return detail::assemble_column(lap.size(), nb.center, unknowns, f);
}

// ---------------------------------------------------------------------------
// Basis matrices
// ---------------------------------------------------------------------------

enum class BasisMode { lagrange, local };

inline std::string to_string(BasisMode m) { return m == BasisMode::lagrange ? "lagrange" : "local"; }

/// n x |V_k| sparse basis, one column per known center in increasing order.
/// Entries that are exactly zero are never stored.
struct BasisMatrix {
    BasisMode mode = BasisMode::lagrange;
    Vertex rows = 0;
    std::vector<Vertex> centers;
    std::vector<Eigen::SparseVector<double>> columns;
    std::vector<double> radii;                 // local only
    std::vector<std::vector<Vertex>> supports; // local only: Omega_v per column
    SolverConfig solver;

    Eigen::Index cols() const noexcept { return static_cast<Eigen::Index>(columns.size()); }

    Eigen::Index column_of(Vertex center) const {
        auto it = std::lower_bound(centers.begin(), centers.end(), center);
        if (it == centers.end() || *it != center)
            throw std::out_of_range("vertex " + std::to_string(center) + " is not a basis center");
        return static_cast<Eigen::Index>(it - centers.begin());
    }

    bool has_center(Vertex center) const { return std::binary_search(centers.begin(), centers.end(), center); }

    Eigen::SparseMatrix<double> matrix() const {
        Eigen::SparseMatrix<double> m(rows, cols());
        Eigen::Index nnz = 0;
        for (const auto& c : columns) nnz += c.nonZeros();
        m.reserve(nnz);
        for (Eigen::Index j = 0; j < cols(); ++j) {
            m.startVec(j);
            for (Eigen::SparseVector<double>::InnerIterator it(columns[static_cast<std::size_t>(j)]); it; ++it)
                m.insertBack(it.index(), j) = it.value();
        }
        m.finalize();
        return m;
    }
};

inline BasisMatrix compute_basis(const Laplacian& lap, const Partition& p, const SolverConfig& cfg) {
    if (p.size() != lap.size()) throw std::invalid_argument("partition and Laplacian sizes differ");
    BasisMatrix b;
    b.mode = BasisMode::lagrange;
    b.rows = lap.size();
    b.centers = p.known();
    b.solver = cfg;
    b.columns.reserve(p.known().size());
    std::optional<RestrictedSystem> sys;
    if (!p.unknown().empty()) sys.emplace(lap, std::span<const Vertex>{}, p.unknown(), cfg);
    std::vector<BasisError::Failure> failures;
    for (Vertex v : p.known()) {
        try {
            Eigen::VectorXd f;
            if (sys) f = sys->solve(v);
            b.columns.push_back(detail::assemble_column(lap.size(), v, p.unknown(), f));
        } catch (const std::exception& e) {
            failures.push_back({v, e.what()});
            b.columns.emplace_back(lap.size());
        }
    }
    if (!failures.empty()) throw BasisError(std::move(failures));
    return b;
}

/// Local basis from one neighborhood per known vertex (in known() order).
inline BasisMatrix compute_basis(const Laplacian& lap, const Partition& p, std::span<const Neighborhood> neighborhoods,
                                 const SolverConfig& cfg) {
    if (p.size() != lap.size()) throw std::invalid_argument("partition and Laplacian sizes differ");
    if (neighborhoods.size() != p.known().size())
        throw std::invalid_argument("local basis needs one neighborhood per known vertex");
    BasisMatrix b;
    b.mode = BasisMode::local;
    b.rows = lap.size();
    b.centers = p.known();
    b.solver = cfg;
    b.columns.reserve(neighborhoods.size());
    std::vector<BasisError::Failure> failures;
    for (std::size_t c = 0; c < neighborhoods.size(); ++c) {
        const auto& nb = neighborhoods[c];
        if (nb.center != p.known()[c])
            throw std::invalid_argument("neighborhood " + std::to_string(c) + " is centered at " +
                                        std::to_string(nb.center) + ", expected " + std::to_string(p.known()[c]));
        b.radii.push_back(nb.radius);
        b.supports.push_back(nb.members);
        try {
            b.columns.push_back(local_lagrange_column(lap, p, nb, cfg));
        } catch (const std::exception& e) {
            failures.push_back({nb.center, e.what()});
            b.columns.emplace_back(lap.size());
        }
    }
    if (!failures.empty()) throw BasisError(std::move(failures));
    return b;
}

inline Eigen::VectorXd dense_column(const BasisMatrix& b, Eigen::Index c) {
    return Eigen::VectorXd(b.columns[static_cast<std::size_t>(c)]);
}

struct Discrepancy {
    double inside = 0.0;  // || (local - full) restricted to Omega_v ||_inf
    double outside = 0.0; // || full restricted to the complement ||_inf
};

inline Discrepancy basis_discrepancy(const BasisMatrix& full, const BasisMatrix& local, Vertex v) {
    if (full.rows != local.rows) throw std::invalid_argument("basis_discrepancy: row counts differ");
    const Eigen::VectorXd a = dense_column(full, full.column_of(v));
    const Eigen::Index lc = local.column_of(v);
    const Eigen::VectorXd b = dense_column(local, lc);
    Discrepancy d;
    if (local.mode == BasisMode::lagrange || local.supports.empty()) {
        d.inside = (a - b).lpNorm<Eigen::Infinity>();
        return d;
    }
    std::vector<char> in(static_cast<std::size_t>(full.rows), 0);
    for (Vertex m : local.supports[static_cast<std::size_t>(lc)]) in[static_cast<std::size_t>(m)] = 1;
    for (Vertex r = 0; r < full.rows; ++r) {
        if (in[static_cast<std::size_t>(r)])
            d.inside = std::max(d.inside, std::abs(b[r] - a[r]));
        else
            d.outside = std::max(d.outside, std::abs(a[r]));
    }
    return d;
}

/// Fraction of the n x |V_k| entries whose magnitude exceeds `threshold`.
/// With threshold 0 this counts stored entries.
inline double sparsity_ratio(const BasisMatrix& b, double threshold = 0.0) {
    if (threshold < 0.0) throw std::invalid_argument("sparsity threshold must be >= 0");
    if (b.rows == 0 || b.columns.empty()) return 0.0;
    double count = 0.0;
    for (const auto& c : b.columns)
        for (Eigen::SparseVector<double>::InnerIterator it(c); it; ++it)
            if (std::abs(it.value()) > threshold) count += 1.0;
    return count / (static_cast<double>(b.rows) * static_cast<double>(b.columns.size()));
}

// ---------------------------------------------------------------------------
// Infinity-norm bound for inverses of positive-definite matrices
// ---------------------------------------------------------------------------

struct InfNormBound {
    double lhs = 0.0;        // ||A^{-1}||_inf
    double rhs = 0.0;        // (sqrt(n) + 1) / (2 lambda_min)
    double lambda_min = 0.0;
    bool holds = false;
};

inline InfNormBound check_inf_norm_bound(const Eigen::MatrixXd& a, double slack = 1e-12) {
    if (a.rows() != a.cols() || a.rows() == 0) throw std::invalid_argument("matrix must be square and nonempty");
    const double asym = (a - a.transpose()).lpNorm<Eigen::Infinity>();
    if (asym > 1e-12 * std::max(1.0, a.lpNorm<Eigen::Infinity>()))
        throw std::invalid_argument("matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
    InfNormBound r;
    r.lambda_min = eig.eigenvalues().minCoeff();
    if (!(r.lambda_min > 0.0)) throw std::invalid_argument("matrix is not positive definite");
    const Eigen::MatrixXd inv = a.llt().solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
    r.lhs = inv.cwiseAbs().rowwise().sum().maxCoeff();
    r.rhs = (std::sqrt(static_cast<double>(a.rows())) + 1.0) / (2.0 * r.lambda_min);
    r.holds = r.lhs <= r.rhs + slack;
    return r;
}

} // namespace loclag
