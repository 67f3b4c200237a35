#pragma once

// Incremental vertex insertion with a localized refresh of the basis.

#include "loclag/basis.hpp"
#include "loclag/graph.hpp"

#include <chrono>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace loclag {

struct UpdateDelta {
    Vertex new_vertex = 0;
    std::string id;
    Eigen::VectorXd coordinates;
    bool known = false;
    std::vector<Adjacent> new_edges;
    std::vector<Vertex> affected_centers; // centers whose columns were recomputed, sorted
    double seconds = 0.0;
};

struct InsertResult {
    Graph graph;
    Partition partition;
    Laplacian laplacian;
    BasisMatrix basis;
    UpdateDelta delta;
};

struct InsertOptions {
    double inner_radius = 0.0; // graph units, i.e. after the graph's scale is applied
    double outer_radius = 0.0;
    SolverConfig solver;
    std::string id;
};

/// Known centers whose local column depends on v0: those within `outer_radius`
/// of v0 or of any neighbor of v0. The second set covers centers whose
/// neighborhood holds a vertex whose degree (hence Laplacian row) changed.
inline std::vector<Vertex> affected_centers(const Graph& g_new, Vertex v0, std::span<const Vertex> centers,
                                            double outer_radius) {
    if (v0 < 0 || v0 >= g_new.size()) throw std::out_of_range("affected_centers: vertex not in graph");
    std::vector<char> is_center(static_cast<std::size_t>(g_new.size()), 0);
    for (Vertex c : centers) is_center[static_cast<std::size_t>(c)] = 1;
    BallSearch search(g_new);
    std::set<Vertex> out;
    auto scan = [&](Vertex from) {
        for (Vertex m : search.members(from, outer_radius))
            if (is_center[static_cast<std::size_t>(m)]) out.insert(m);
    };
    scan(v0);
    for (const auto& a : g_new.neighbors(v0)) scan(a.vertex);
    return {out.begin(), out.end()};
}

/// The graph with one extra vertex appended at index n. Edges to the new
/// vertex use the graph's metric divided by its scale.
inline std::pair<Graph, std::vector<Adjacent>> append_vertex(const Graph& g, const Eigen::VectorXd& point,
                                                             const std::string& id, double inner_radius) {
    const auto& src = g.source();
    if (point.size() != src.cloud.dimension()) throw std::invalid_argument("new point has the wrong dimension");
    const Vertex n = g.size();
    std::vector<Adjacent> added;
    double theta = g.theta();
    for (Vertex v = 0; v < n; ++v) {
        const double d = distance(point.transpose(), src.cloud.points.row(v), src.metric);
        if (d <= 0.0) throw DuplicatePointError(v, n);
        const double len = d / src.scale;
        theta = std::min(theta, len);
        if (len < inner_radius) added.push_back({v, len});
    }
    if (added.empty())
        throw IsolatedVertexError("new point has no neighbor within inner radius " + std::to_string(inner_radius));

    Graph::Source next = src;
    next.cloud.points.conservativeResize(n + 1, Eigen::NoChange);
    next.cloud.points.row(n) = point.transpose();
    if (!next.cloud.ids.empty()) next.cloud.ids.push_back(id.empty() ? std::to_string(n) : id);

    std::vector<Edge> edges = g.edges();
    for (const auto& a : added) edges.push_back({a.vertex, n, a.length});
    return {Graph(n + 1, std::move(edges), theta, std::move(next)), std::move(added)};
}

/// Inserts a point, rebuilds the Laplacian and recomputes only the affected
/// local columns. Columns of unaffected centers are copied unchanged. A
/// Lagrange basis is global, so it is recomputed in full.
inline InsertResult insert_vertex(const Graph& g, const Partition& p, const BasisMatrix& b,
                                  const Eigen::VectorXd& point, bool known, const InsertOptions& opt) {
    const auto start = std::chrono::steady_clock::now();
    if (b.rows != g.size() || p.size() != g.size()) throw std::invalid_argument("graph, partition and basis disagree");

    auto [graph, added] = append_vertex(g, point, opt.id, opt.inner_radius);
    const Vertex v0 = g.size();

    std::vector<bool> mask = p.mask();
    mask.push_back(known);
    Partition partition(mask);
    Laplacian lap = normalized_laplacian(graph);

    BasisMatrix basis;
    std::vector<Vertex> affected;
    if (b.mode == BasisMode::lagrange) {
        basis = compute_basis(lap, partition, opt.solver);
        affected = partition.known();
    } else {
        affected = affected_centers(graph, v0, partition.known(), opt.outer_radius);
        basis.mode = BasisMode::local;
        basis.rows = graph.size();
        basis.centers = partition.known();
        basis.solver = opt.solver;
        BallSearch search(graph);
        std::vector<BasisError::Failure> failures;
        for (Vertex c : basis.centers) {
            if (std::binary_search(affected.begin(), affected.end(), c)) {
                Neighborhood nb = search.ball(c, opt.outer_radius, &partition);
                basis.radii.push_back(nb.radius);
                basis.supports.push_back(nb.members);
                try {
                    basis.columns.push_back(local_lagrange_column(lap, partition, nb, opt.solver));
                } catch (const std::exception& e) {
                    failures.push_back({c, e.what()});
                    basis.columns.emplace_back(graph.size());
                }
            } else {
                const auto old = b.column_of(c);
                Eigen::SparseVector<double> col = b.columns[static_cast<std::size_t>(old)];
                col.conservativeResize(graph.size());
                basis.columns.push_back(std::move(col));
                basis.radii.push_back(b.radii[static_cast<std::size_t>(old)]);
                basis.supports.push_back(b.supports[static_cast<std::size_t>(old)]);
            }
        }
        if (!failures.empty()) throw BasisError(std::move(failures));
    }

    UpdateDelta delta;
    delta.new_vertex = v0;
    delta.id = graph.source().cloud.id(v0);
    delta.coordinates = point;
    delta.known = known;
    delta.new_edges = std::move(added);
    delta.affected_centers = std::move(affected);
    delta.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(graph), std::move(partition), std::move(lap), std::move(basis), std::move(delta)};
}

} // namespace loclag
