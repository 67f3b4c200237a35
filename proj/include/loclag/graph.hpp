#pragma once

// Weighted proximity graphs over point clouds, the normalized Laplacian,
// graph-distance balls and the structural checks used by the error analysis.

#include "loclag/errors.hpp"

#include <Eigen/Core>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace loclag {

using Vertex = Eigen::Index;

// ---------------------------------------------------------------------------
// Points and metrics
// ---------------------------------------------------------------------------

/// One feature vector per row. `ids` is either empty or one id per row.
struct PointCloud {
    Eigen::MatrixXd points;
    std::vector<std::string> ids;

    Vertex size() const noexcept { return points.rows(); }
    Eigen::Index dimension() const noexcept { return points.cols(); }

    std::string id(Vertex v) const { return ids.empty() ? std::to_string(v) : ids[static_cast<std::size_t>(v)]; }

    void validate() const {
        if (points.cols() < 1) throw std::invalid_argument("point cloud needs dimension >= 1");
        if (!ids.empty() && static_cast<Vertex>(ids.size()) != points.rows())
            throw std::invalid_argument("point cloud ids do not match the number of points");
        if (!points.allFinite()) throw std::invalid_argument("point cloud contains non-finite coordinates");
    }
};

struct Metric {
    enum class Kind { euclidean, weighted_minkowski };

    Kind kind = Kind::euclidean;
    double p = 2.0;
    Eigen::VectorXd weights; // weighted_minkowski only

    static Metric euclidean() { return {}; }

    static Metric weighted_minkowski(Eigen::VectorXd w, double order) {
        Metric m;
        m.kind = Kind::weighted_minkowski;
        m.p = order;
        m.weights = std::move(w);
        m.validate();
        return m;
    }

    void validate() const {
        if (kind == Kind::euclidean) return;
        if (!(p >= 1.0)) throw std::invalid_argument("Minkowski order p must be >= 1");
        if (weights.size() == 0 || (weights.array() < 0.0).any() || !(weights.array() > 0.0).any())
            throw std::invalid_argument("metric weights must be nonnegative with at least one positive entry");
    }

    void validate(Eigen::Index dim) const {
        validate();
        if (kind == Kind::weighted_minkowski && weights.size() != dim)
            throw std::invalid_argument("metric weights have length " + std::to_string(weights.size()) +
                                        ", points have dimension " + std::to_string(dim));
    }
};

/// (sum_i w_i |x_i - y_i|^p)^(1/p); the Euclidean metric has unit weights and p = 2.
template <typename A, typename B>
double distance(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y, const Metric& m) {
    if (x.size() != y.size()) throw std::invalid_argument("distance: dimension mismatch");
    if (m.kind == Metric::Kind::euclidean) return std::sqrt((x - y).squaredNorm());
    if (!(m.p >= 1.0)) throw std::invalid_argument("distance: p must be >= 1");
    if (m.weights.size() != x.size()) throw std::invalid_argument("distance: weight/dimension mismatch");
    double acc = 0.0;
    if (m.p == 1.0) {
        for (Eigen::Index i = 0; i < x.size(); ++i) acc += m.weights[i] * std::abs(x[i] - y[i]);
        return acc;
    }
    if (m.p == 2.0) {
        for (Eigen::Index i = 0; i < x.size(); ++i) acc += m.weights[i] * (x[i] - y[i]) * (x[i] - y[i]);
        return std::sqrt(acc);
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) acc += m.weights[i] * std::pow(std::abs(x[i] - y[i]), m.p);
    return std::pow(acc, 1.0 / m.p);
}

inline double distance(std::span<const double> x, std::span<const double> y, const Metric& m) {
    using Map = Eigen::Map<const Eigen::VectorXd>;
    return distance(Map(x.data(), static_cast<Eigen::Index>(x.size())),
                    Map(y.data(), static_cast<Eigen::Index>(y.size())), m);
}

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

struct Edge {
    Vertex i;
    Vertex j;
    double length;

    double weight() const noexcept { return 1.0 / length; }
    friend bool operator==(const Edge&, const Edge&) = default;
};

struct Adjacent {
    Vertex vertex;
    double length;
};

/// Finite, connected, undirected graph with edge weights 1/length.
///
/// Edges are stored once with i < j in lexicographic order. When the graph
/// was built from points the cloud and metric are retained, together with
/// `scale`: every edge length equals distance(x_i, x_j) / scale.
class Graph {
public:
    struct Source {
        PointCloud cloud;
        Metric metric;
        double scale = 1.0;
    };

    Graph(Vertex n, std::vector<Edge> edges, std::optional<double> theta = std::nullopt,
          std::optional<Source> source = std::nullopt)
        : n_(n), edges_(std::move(edges)), source_(std::move(source)) {
        if (n_ < 2) throw std::invalid_argument("graph needs at least two vertices");
        for (auto& e : edges_) {
            if (e.i == e.j || e.i < 0 || e.j < 0 || e.i >= n_ || e.j >= n_)
                throw std::invalid_argument("edge (" + std::to_string(e.i) + "," + std::to_string(e.j) +
                                            ") is invalid");
            if (!(e.length > 0.0) || !std::isfinite(e.length))
                throw std::invalid_argument("edge lengths must be positive and finite");
            if (e.i > e.j) std::swap(e.i, e.j);
        }
        std::sort(edges_.begin(), edges_.end(),
                  [](const Edge& a, const Edge& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
        for (std::size_t k = 1; k < edges_.size(); ++k)
            if (edges_[k].i == edges_[k - 1].i && edges_[k].j == edges_[k - 1].j)
                throw std::invalid_argument("duplicate edge (" + std::to_string(edges_[k].i) + "," +
                                            std::to_string(edges_[k].j) + ")");
        if (source_ && source_->cloud.size() != n_)
            throw std::invalid_argument("graph source cloud size does not match vertex count");

        build_adjacency();
        check_connected();

        rho_max_ = 0.0;
        double min_len = std::numeric_limits<double>::infinity();
        for (const auto& e : edges_) {
            rho_max_ = std::max(rho_max_, e.length);
            min_len = std::min(min_len, e.length);
        }
        theta_ = theta.value_or(min_len);
    }

    Vertex size() const noexcept { return n_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }

    std::span<const Adjacent> neighbors(Vertex v) const {
        const auto b = offsets_[static_cast<std::size_t>(v)];
        const auto e = offsets_[static_cast<std::size_t>(v) + 1];
        return {adjacency_.data() + b, e - b};
    }

    Eigen::Index degree_count(Vertex v) const { return static_cast<Eigen::Index>(neighbors(v).size()); }

    /// Smallest pairwise point distance (graph units).
    double theta() const noexcept { return theta_; }
    double rho_max() const noexcept { return rho_max_; }

    Eigen::Index max_degree() const {
        Eigen::Index m = 0;
        for (Vertex v = 0; v < n_; ++v) m = std::max(m, degree_count(v));
        return m;
    }

    bool has_source() const noexcept { return source_.has_value(); }
    const Source& source() const {
        if (!source_) throw std::logic_error("graph carries no point cloud");
        return *source_;
    }

private:
    void build_adjacency() {
        std::vector<std::size_t> count(static_cast<std::size_t>(n_) + 1, 0);
        for (const auto& e : edges_) {
            ++count[static_cast<std::size_t>(e.i) + 1];
            ++count[static_cast<std::size_t>(e.j) + 1];
        }
        std::partial_sum(count.begin(), count.end(), count.begin());
        offsets_ = count;
        adjacency_.resize(offsets_.back());
        auto fill = offsets_;
        for (const auto& e : edges_) {
            adjacency_[fill[static_cast<std::size_t>(e.i)]++] = {e.j, e.length};
            adjacency_[fill[static_cast<std::size_t>(e.j)]++] = {e.i, e.length};
        }
    }

    void check_connected() const {
        std::vector<int> comp(static_cast<std::size_t>(n_), -1);
        std::vector<std::size_t> sizes;
        std::vector<Vertex> stack;
        for (Vertex s = 0; s < n_; ++s) {
            if (comp[static_cast<std::size_t>(s)] >= 0) continue;
            const int id = static_cast<int>(sizes.size());
            sizes.push_back(0);
            stack.push_back(s);
            comp[static_cast<std::size_t>(s)] = id;
            while (!stack.empty()) {
                const Vertex v = stack.back();
                stack.pop_back();
                ++sizes.back();
                for (const auto& a : neighbors(v)) {
                    if (comp[static_cast<std::size_t>(a.vertex)] < 0) {
                        comp[static_cast<std::size_t>(a.vertex)] = id;
                        stack.push_back(a.vertex);
                    }
                }
            }
        }
        if (sizes.size() > 1) {
            std::sort(sizes.begin(), sizes.end(), std::greater<>());
            throw DisconnectedGraphError(std::move(sizes));
        }
    }

    Vertex n_;
    std::vector<Edge> edges_;
    std::vector<std::size_t> offsets_;
    std::vector<Adjacent> adjacency_;
    double theta_ = 0.0;
    double rho_max_ = 0.0;
    std::optional<Source> source_;
};

/// Joins every pair of points whose distance is strictly less than
/// `inner_radius`. Pairs at exactly `inner_radius` are not joined.
inline Graph build_graph(PointCloud cloud, const Metric& metric, double inner_radius) {
    cloud.validate();
    metric.validate(cloud.dimension());
    if (!(inner_radius > 0.0)) throw std::invalid_argument("inner radius must be positive");
    const Vertex n = cloud.size();
    if (n < 2) throw std::invalid_argument("graph needs at least two vertices");

    // O(n^2) scan; a spatial index would only speed this up.
    std::vector<Edge> edges;
    double theta = std::numeric_limits<double>::infinity();
    for (Vertex i = 0; i < n; ++i) {
        const auto xi = cloud.points.row(i);
        for (Vertex j = i + 1; j < n; ++j) {
            const double d = distance(xi, cloud.points.row(j), metric);
            if (d <= 0.0) throw DuplicatePointError(i, j);
            theta = std::min(theta, d);
            if (d < inner_radius) edges.push_back({i, j, d});
        }
    }
    return Graph(n, std::move(edges), theta, Graph::Source{std::move(cloud), metric, 1.0});
}

/// Smallest distance between two distinct points of the cloud.
inline double min_pairwise_distance(const PointCloud& cloud, const Metric& metric) {
    const Vertex n = cloud.size();
    if (n < 2) throw std::invalid_argument("need at least two points");
    double theta = std::numeric_limits<double>::infinity();
    for (Vertex i = 0; i < n; ++i)
        for (Vertex j = i + 1; j < n; ++j) {
            const double d = distance(cloud.points.row(i), cloud.points.row(j), metric);
            if (d <= 0.0) throw DuplicatePointError(i, j);
            theta = std::min(theta, d);
        }
    return theta;
}

/// Divides all lengths by the largest per-vertex nearest-edge length, so
/// every vertex has an incident edge of length <= 1.
inline Graph rescale_to_unit_neighbor(const Graph& g) {
    double s = 0.0;
    for (Vertex v = 0; v < g.size(); ++v) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& a : g.neighbors(v)) m = std::min(m, a.length);
        s = std::max(s, m);
    }
    std::vector<Edge> edges = g.edges();
    for (auto& e : edges) e.length /= s;
    std::optional<Graph::Source> src;
    if (g.has_source()) {
        src = g.source();
        src->scale *= s;
    }
    return Graph(g.size(), std::move(edges), g.theta() / s, std::move(src));
}

// ---------------------------------------------------------------------------
// Laplacian
// ---------------------------------------------------------------------------

/// L = D^{-1/2} (D - A) D^{-1/2}, stored as a symmetric compressed matrix.
struct Laplacian {
    Eigen::SparseMatrix<double> matrix;
    Eigen::VectorXd degree; // row sums of the weighted adjacency

    Vertex size() const noexcept { return matrix.rows(); }
};

inline Laplacian normalized_laplacian(const Graph& g) {
    const Vertex n = g.size();
    Laplacian lap;
    lap.degree = Eigen::VectorXd::Zero(n);
    for (const auto& e : g.edges()) {
        lap.degree[e.i] += e.weight();
        lap.degree[e.j] += e.weight();
    }
    for (Vertex v = 0; v < n; ++v)
        if (!(lap.degree[v] > 0.0)) throw std::invalid_argument("vertex " + std::to_string(v) + " is isolated");

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) + 2 * g.edges().size());
    for (Vertex v = 0; v < n; ++v) trip.emplace_back(v, v, 1.0);
    for (const auto& e : g.edges()) {
        const double value = -e.weight() / std::sqrt(lap.degree[e.i] * lap.degree[e.j]);
        trip.emplace_back(e.i, e.j, value);
        trip.emplace_back(e.j, e.i, value);
    }
    lap.matrix.resize(n, n);
    lap.matrix.setFromTriplets(trip.begin(), trip.end());
    lap.matrix.makeCompressed();
    return lap;
}

// ---------------------------------------------------------------------------
// Partition and neighborhoods
// ---------------------------------------------------------------------------

/// Splits the vertex set into known and unknown vertices, both sorted.
class Partition {
public:
    Partition() = default;

    explicit Partition(const std::vector<bool>& is_known) {
        const auto n = static_cast<Vertex>(is_known.size());
        position_.assign(is_known.size(), -1);
        known_mask_ = is_known;
        for (Vertex v = 0; v < n; ++v) {
            auto& list = is_known[static_cast<std::size_t>(v)] ? known_ : unknown_;
            position_[static_cast<std::size_t>(v)] = static_cast<Eigen::Index>(list.size());
            list.push_back(v);
        }
        if (known_.empty()) throw std::invalid_argument("partition needs at least one known vertex");
    }

    static Partition from_unknown(Vertex n, const std::vector<Vertex>& unknown) {
        std::vector<bool> mask(static_cast<std::size_t>(n), true);
        for (Vertex u : unknown) {
            if (u < 0 || u >= n) throw std::invalid_argument("unknown vertex out of range");
            mask[static_cast<std::size_t>(u)] = false;
        }
        return Partition(mask);
    }

    Vertex size() const noexcept { return static_cast<Vertex>(known_mask_.size()); }
    const std::vector<Vertex>& known() const noexcept { return known_; }
    const std::vector<Vertex>& unknown() const noexcept { return unknown_; }
    bool is_known(Vertex v) const { return known_mask_[static_cast<std::size_t>(v)]; }

    /// Index of v within known() or unknown(), whichever contains it.
    Eigen::Index position(Vertex v) const { return position_[static_cast<std::size_t>(v)]; }

    const std::vector<bool>& mask() const noexcept { return known_mask_; }

private:
    std::vector<Vertex> known_;
    std::vector<Vertex> unknown_;
    std::vector<bool> known_mask_;
    std::vector<Eigen::Index> position_;
};

/// Graph-distance ball around a center. All member lists are sorted.
struct Neighborhood {
    Vertex center = 0;
    double radius = 0.0;
    std::vector<Vertex> members;
    std::vector<Vertex> boundary; // members with a neighbor outside the ball
    std::vector<Vertex> interior;
    std::vector<Vertex> known_members;
    std::vector<Vertex> unknown_members;

    bool contains(Vertex v) const { return std::binary_search(members.begin(), members.end(), v); }
};

/// Reusable Dijkstra workspace for repeated ball queries on one graph.
class BallSearch {
public:
    explicit BallSearch(const Graph& g)
        : g_(&g), dist_(static_cast<std::size_t>(g.size()), std::numeric_limits<double>::infinity()),
          inside_(static_cast<std::size_t>(g.size()), 0) {}

    /// Vertices with shortest-path distance <= radius, sorted.
    std::vector<Vertex> members(Vertex center, double radius) {
        if (center < 0 || center >= g_->size()) throw std::out_of_range("ball center out of range");
        using Item = std::pair<double, Vertex>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        std::vector<Vertex> touched;
        std::vector<Vertex> out;
        dist_[static_cast<std::size_t>(center)] = 0.0;
        touched.push_back(center);
        heap.emplace(0.0, center);
        while (!heap.empty()) {
            const auto [d, v] = heap.top();
            heap.pop();
            if (d > dist_[static_cast<std::size_t>(v)]) continue;
            out.push_back(v);
            for (const auto& a : g_->neighbors(v)) {
                const double nd = d + a.length;
                if (nd > radius) continue;
                auto& cur = dist_[static_cast<std::size_t>(a.vertex)];
                if (nd < cur) {
                    if (std::isinf(cur)) touched.push_back(a.vertex);
                    cur = nd;
                    heap.emplace(nd, a.vertex);
                }
            }
        }
        for (Vertex t : touched) dist_[static_cast<std::size_t>(t)] = std::numeric_limits<double>::infinity();
        std::sort(out.begin(), out.end());
        return out;
    }

    Neighborhood ball(Vertex center, double radius, const Partition* partition = nullptr) {
        Neighborhood nb;
        nb.center = center;
        nb.radius = radius;
        nb.members = members(center, radius);
        for (Vertex m : nb.members) inside_[static_cast<std::size_t>(m)] = 1;
        for (Vertex m : nb.members) {
            bool edge_out = false;
            for (const auto& a : g_->neighbors(m))
                if (!inside_[static_cast<std::size_t>(a.vertex)]) {
                    edge_out = true;
                    break;
                }
            (edge_out ? nb.boundary : nb.interior).push_back(m);
            if (partition) (partition->is_known(m) ? nb.known_members : nb.unknown_members).push_back(m);
        }
        for (Vertex m : nb.members) inside_[static_cast<std::size_t>(m)] = 0;
        return nb;
    }

private:
    const Graph* g_;
    std::vector<double> dist_;
    std::vector<char> inside_;
};

inline Neighborhood graph_ball(const Graph& g, Vertex center, double radius) {
    return BallSearch(g).ball(center, radius);
}

inline Neighborhood graph_ball(const Graph& g, const Partition& p, Vertex center, double radius) {
    return BallSearch(g).ball(center, radius, &p);
}

/// One neighborhood per known vertex, all with the same radius.
inline std::vector<Neighborhood> known_neighborhoods(const Graph& g, const Partition& p, double radius) {
    BallSearch search(g);
    std::vector<Neighborhood> out;
    out.reserve(p.known().size());
    for (Vertex v : p.known()) out.push_back(search.ball(v, radius, &p));
    return out;
}

// ---------------------------------------------------------------------------
// Structural assumptions (advisory)
// ---------------------------------------------------------------------------

struct AssumptionReport {
    bool unknowns_only_touch_known = true;
    std::vector<std::pair<Vertex, Vertex>> unknown_unknown_edges;

    bool dirichlet_boundaries = true;
    std::vector<std::pair<Vertex, Vertex>> unknown_boundary_vertices; // (center, vertex)

    bool edge_length_bound = true; // every edge length >= rho_max / 2
    std::vector<Edge> short_edges;

    bool all() const noexcept { return unknowns_only_touch_known && dirichlet_boundaries && edge_length_bound; }
};

inline AssumptionReport validate_assumptions(const Graph& g, const Partition& p,
                                             std::span<const Neighborhood> neighborhoods) {
    AssumptionReport r;
    for (const auto& e : g.edges()) {
        if (!p.is_known(e.i) && !p.is_known(e.j)) r.unknown_unknown_edges.emplace_back(e.i, e.j);
        if (e.length < g.rho_max() / 2.0) r.short_edges.push_back(e);
    }
    for (const auto& nb : neighborhoods)
        for (Vertex b : nb.boundary)
            if (!p.is_known(b)) r.unknown_boundary_vertices.emplace_back(nb.center, b);
    r.unknowns_only_touch_known = r.unknown_unknown_edges.empty();
    r.dirichlet_boundaries = r.unknown_boundary_vertices.empty();
    r.edge_length_bound = r.short_edges.empty();
    return r;
}

/// Largest neighbor count among unknown (known) vertices.
inline std::pair<Eigen::Index, Eigen::Index> neighbor_count_bounds(const Graph& g, const Partition& p) {
    Eigen::Index mu = 0, mk = 0;
    for (Vertex v = 0; v < g.size(); ++v) {
        auto& bound = p.is_known(v) ? mk : mu;
        bound = std::max(bound, g.degree_count(v));
    }
    return {mu, mk};
}

} // namespace loclag
