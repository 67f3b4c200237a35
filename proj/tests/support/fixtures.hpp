#pragma once

// Shared generators and dense reference computations for the test suites.

#include "loclag/loclag.hpp"

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace fixtures {

using namespace loclag;

/// Uniform points in [0,1]^d, joined below the smallest radius (on a coarse grid)
/// that connects them.
inline Graph random_connected_graph(std::mt19937_64& rng, Vertex n, int dim = 2, double* radius = nullptr) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PointCloud pc;
    pc.points.resize(n, dim);
    for (Vertex i = 0; i < n; ++i)
        for (int k = 0; k < dim; ++k) pc.points(i, k) = u(rng);
    for (double r = 0.15;; r *= 1.15) {
        try {
            Graph g = build_graph(pc, Metric::euclidean(), r);
            if (radius) *radius = r;
            return g;
        } catch (const DisconnectedGraphError&) {
        }
    }
}

/// Each vertex known with probability `p_known`; at least one known and one unknown.
inline Partition random_partition(std::mt19937_64& rng, Vertex n, double p_known = 0.6) {
    std::bernoulli_distribution b(p_known);
    std::vector<bool> known(static_cast<std::size_t>(n));
    for (auto&& k : known) k = b(rng);
    std::uniform_int_distribution<Vertex> pick(0, n - 1);
    known[static_cast<std::size_t>(pick(rng))] = true;
    Vertex u = pick(rng);
    while (known[static_cast<std::size_t>(u)] && std::count(known.begin(), known.end(), true) == 1) u = pick(rng);
    known[static_cast<std::size_t>(u)] = false;
    if (std::count(known.begin(), known.end(), true) == 0) known[static_cast<std::size_t>((u + 1) % n)] = true;
    return Partition(known);
}

inline Eigen::MatrixXd dense(const Laplacian& lap) { return Eigen::MatrixXd(lap.matrix); }

/// Dense least-squares reference for a (local) Lagrange column. `members`
/// empty means the whole vertex set.
inline Eigen::VectorXd oracle_column(const Eigen::MatrixXd& L, const Partition& p, Vertex v,
                                     std::vector<Vertex> members = {}) {
    const Vertex n = L.rows();
    if (members.empty())
        for (Vertex i = 0; i < n; ++i) members.push_back(i);
    std::vector<Vertex> unk;
    for (Vertex m : members)
        if (!p.is_known(m)) unk.push_back(m);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    out[v] = 1.0;
    if (unk.empty()) return out;
    Eigen::MatrixXd A(members.size(), unk.size());
    Eigen::VectorXd b(members.size());
    for (std::size_t r = 0; r < members.size(); ++r) {
        b[static_cast<Eigen::Index>(r)] = -L(members[r], v);
        for (std::size_t c = 0; c < unk.size(); ++c)
            A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = L(members[r], unk[c]);
    }
    const Eigen::VectorXd x = A.completeOrthogonalDecomposition().solve(b);
    for (std::size_t c = 0; c < unk.size(); ++c) out[unk[c]] = x[static_cast<Eigen::Index>(c)];
    return out;
}

/// All-pairs shortest path lengths by Floyd-Warshall.
inline Eigen::MatrixXd all_pairs(const Graph& g) {
    const Vertex n = g.size();
    Eigen::MatrixXd d = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::infinity());
    for (Vertex i = 0; i < n; ++i) d(i, i) = 0.0;
    for (const auto& e : g.edges()) d(e.i, e.j) = d(e.j, e.i) = std::min(d(e.i, e.j), e.length);
    for (Vertex k = 0; k < n; ++k)
        for (Vertex i = 0; i < n; ++i)
            for (Vertex j = 0; j < n; ++j) d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
    return d;
}

/// Random SPD matrix G^T G + 0.01 I with standard normal G.
inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::MatrixXd G(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) G(i, j) = z(rng);
    Eigen::MatrixXd A = G.transpose() * G;
    A.diagonal().array() += 0.01;
    return 0.5 * (A + A.transpose());
}

inline bool identical(const Eigen::SparseVector<double>& a, const Eigen::SparseVector<double>& b) {
    if (a.size() != b.size() || a.nonZeros() != b.nonZeros()) return false;
    for (Eigen::Index k = 0; k < a.nonZeros(); ++k)
        if (a.innerIndexPtr()[k] != b.innerIndexPtr()[k] || a.valuePtr()[k] != b.valuePtr()[k]) return false;
    return true;
}

/// Outcome of one randomized insertion compared with a rebuild from scratch.
struct InsertionCheck {
    double max_column_diff = 0.0;    // inserted vs recomputed, l-infinity over all columns
    bool same_edges = true;          // inserted graph vs build_graph on the enlarged cloud
    bool untouched_identical = true; // columns outside affected_centers are bit-identical to before
    bool changes_covered = true;     // every column that changed lies in affected_centers
    std::size_t affected = 0;
    Vertex n = 0;
};

/// Random local basis on n points in the unit square, then one random insertion.
inline InsertionCheck random_insertion(std::mt19937_64& rng, Vertex n) {
    double r = 0.0;
    const Graph g = random_connected_graph(rng, n, 2, &r);
    const Partition p = random_partition(rng, n);
    std::uniform_real_distribution<double> u(0.0, 1.0), ro_dist(1.0, 3.0);
    std::bernoulli_distribution known(0.5);
    const double ro = ro_dist(rng) * r;
    const Laplacian lap = normalized_laplacian(g);
    const BasisMatrix before = compute_basis(lap, p, known_neighborhoods(g, p, ro), {});

    InsertOptions opt;
    opt.inner_radius = r;
    opt.outer_radius = ro;
    for (;;) {
        const Eigen::Vector2d x(u(rng), u(rng));
        try {
            const auto res = insert_vertex(g, p, before, x, known(rng), opt);
            InsertionCheck out;
            out.n = n;
            out.affected = res.delta.affected_centers.size();
            const Graph scratch = build_graph(res.graph.source().cloud, Metric::euclidean(), r);
            out.same_edges = scratch.edges().size() == res.graph.edges().size();
            for (std::size_t k = 0; out.same_edges && k < scratch.edges().size(); ++k) {
                const auto &a = scratch.edges()[k], &b = res.graph.edges()[k];
                out.same_edges = a.i == b.i && a.j == b.j && a.length == b.length;
            }
            const BasisMatrix fresh = compute_basis(normalized_laplacian(scratch), res.partition,
                                                    known_neighborhoods(scratch, res.partition, ro), {});
            const auto& aff = res.delta.affected_centers;
            for (std::size_t c = 0; c < fresh.centers.size(); ++c) {
                const Vertex v = fresh.centers[c];
                const Eigen::VectorXd a = Eigen::VectorXd(fresh.columns[c]);
                const Eigen::VectorXd b = Eigen::VectorXd(res.basis.columns[c]);
                out.max_column_diff = std::max(out.max_column_diff, (a - b).lpNorm<Eigen::Infinity>());
                const bool in_aff = std::binary_search(aff.begin(), aff.end(), v);
                if (v < n && !in_aff) {
                    Eigen::SparseVector<double> old = before.columns[static_cast<std::size_t>(before.column_of(v))];
                    old.conservativeResize(n + 1);
                    out.untouched_identical = out.untouched_identical && identical(old, res.basis.columns[c]);
                    const Eigen::VectorXd o = Eigen::VectorXd(old);
                    if ((o - a).lpNorm<Eigen::Infinity>() > 1e-10) out.changes_covered = false;
                }
                if (v == n && !in_aff) out.changes_covered = false;
            }
            return out;
        } catch (const IsolatedVertexError&) {
        }
    }
}

/// Synthetic stand-in for the building energy table: the full 768-row
/// factorial design (12 shapes x 4 orientations x 16 glazing settings) with
/// smooth synthetic loads plus small Gaussian noise. Column names follow the
/// UCI file (X1..X8, Y1, Y2).
inline harness::TabularDataset energy_surrogate(std::uint64_t seed = 7) {
    static const double shapes[12][5] = {
        {0.98, 514.5, 294.0, 110.25, 7.0}, {0.90, 563.5, 318.5, 122.5, 7.0}, {0.86, 588.0, 294.0, 147.0, 7.0},
        {0.82, 612.5, 318.5, 147.0, 7.0},  {0.79, 637.0, 343.0, 147.0, 7.0}, {0.76, 661.5, 416.5, 122.5, 7.0},
        {0.74, 686.0, 245.0, 220.5, 3.5},  {0.71, 710.5, 269.5, 220.5, 3.5}, {0.69, 735.0, 294.0, 220.5, 3.5},
        {0.66, 759.5, 318.5, 220.5, 3.5},  {0.64, 784.0, 343.0, 220.5, 3.5}, {0.62, 808.5, 367.5, 220.5, 3.5}};
    std::vector<std::pair<double, double>> glazing{{0.0, 0.0}};
    for (double area : {0.1, 0.25, 0.4})
        for (double dist = 1; dist <= 5; ++dist) glazing.emplace_back(area, dist);
    harness::TabularDataset ds;
    ds.feature_names = {"X1", "X2", "X3", "X4", "X5", "X6", "X7", "X8"};
    ds.features.resize(768, 8);
    Eigen::Index r = 0;
    for (const auto& [area, dist] : glazing)
        for (const auto& s : shapes)
            for (double orient = 2; orient <= 5; ++orient) {
                ds.features.row(r++) << s[0], s[1], s[2], s[3], s[4], orient, area, dist;
            }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.3);
    Eigen::VectorXd heat(768), cool(768);
    for (Eigen::Index i = 0; i < 768; ++i) {
        const auto x = ds.features.row(i);
        heat[i] = 6.0 + 3.0 * (x[4] - 3.5) + 20.0 * x[6] + 0.4 * x[7] + 4.0 * (x[0] - 0.6) + noise(rng);
        cool[i] = 12.0 + 2.5 * (x[4] - 3.5) + 15.0 * x[6] + 0.3 * x[5] + 0.2 * x[7] + noise(rng);
    }
    ds.targets = {{"Heating Load", heat}, {"Cooling Load", cool}};
    return ds;
}

} // namespace fixtures
