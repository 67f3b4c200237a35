#include <catch_amalgamated.hpp>

#include "fixtures.hpp"

using namespace loclag;
using Catch::Matchers::WithinAbs;

namespace {

PointCloud cloud(std::initializer_list<std::initializer_list<double>> rows) {
    PointCloud pc;
    pc.points.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index r = 0;
    for (const auto& row : rows) {
        Eigen::Index c = 0;
        for (double x : row) pc.points(r, c++) = x;
        ++r;
    }
    return pc;
}

Graph path(std::vector<double> lengths) {
    std::vector<Edge> e;
    for (std::size_t k = 0; k < lengths.size(); ++k)
        e.push_back({static_cast<Vertex>(k), static_cast<Vertex>(k + 1), lengths[k]});
    return Graph(static_cast<Vertex>(lengths.size() + 1), e);
}

} // namespace

TEST_CASE("distance: identity, Pythagoras, weighted l1") {
    Eigen::Vector2d x(0.3, -1.7);
    CHECK(distance(x.transpose(), x.transpose(), Metric::euclidean()) == 0.0);
    CHECK(distance(Eigen::RowVector2d(0, 0), Eigen::RowVector2d(3, 4), Metric::euclidean()) == 5.0);
    const auto m = Metric::weighted_minkowski(Eigen::Vector2d(2, 1), 1.0);
    CHECK(distance(Eigen::RowVector2d(1, 0), Eigen::RowVector2d(0, 2), m) == 4.0);
}

TEST_CASE("distance: general p and error cases") {
    const auto m3 = Metric::weighted_minkowski(Eigen::Vector2d(1, 1), 3.0);
    CHECK_THAT(distance(Eigen::RowVector2d(0, 0), Eigen::RowVector2d(1, 2), m3), WithinAbs(std::cbrt(9.0), 1e-14));
    CHECK_THROWS(distance(Eigen::RowVectorXd::Zero(2), Eigen::RowVectorXd::Zero(3), Metric::euclidean()));
    CHECK_THROWS(Metric::weighted_minkowski(Eigen::Vector2d(1, 1), 0.5).validate());
    CHECK_THROWS(Metric::weighted_minkowski(Eigen::Vector2d(0, 0), 1.0).validate());
    CHECK_THROWS(Metric::weighted_minkowski(Eigen::Vector2d(-1, 2), 1.0).validate());
}

TEST_CASE("distance: symmetry and triangle inequality on random triples") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2, 2), w(0, 3), pp(1, 5);
    for (int t = 0; t < 500; ++t) {
        Eigen::VectorXd wt(4);
        for (int k = 0; k < 4; ++k) wt[k] = w(rng);
        wt[0] += 0.1;
        const auto m = Metric::weighted_minkowski(wt, pp(rng));
        Eigen::RowVector4d a, b, c;
        for (int k = 0; k < 4; ++k) a[k] = u(rng), b[k] = u(rng), c[k] = u(rng);
        const double ab = distance(a, b, m), ba = distance(b, a, m);
        CHECK(ab == ba);
        CHECK(distance(a, c, m) <= ab + distance(b, c, m) + 1e-12);
    }
}

TEST_CASE("build_graph: two points and collinear path") {
    const Graph g2 = build_graph(cloud({{0.0}, {0.5}}), Metric::euclidean(), 1.0);
    REQUIRE(g2.edges().size() == 1);
    CHECK(g2.edges()[0].length == 0.5);
    CHECK(g2.edges()[0].weight() == 2.0);
    CHECK(g2.theta() == 0.5);
    CHECK(g2.rho_max() == 0.5);

    const Graph g3 = build_graph(cloud({{0.0}, {1.0}, {2.0}}), Metric::euclidean(), 1.5);
    REQUIRE(g3.edges().size() == 2);
    CHECK(g3.edges()[0].i == 0);
    CHECK(g3.edges()[0].j == 1);
    CHECK(g3.edges()[1].i == 1);
    CHECK(g3.edges()[1].j == 2);
    CHECK(g3.max_degree() == 2);
}

TEST_CASE("build_graph: strict inequality at R_i") {
    CHECK_THROWS_AS(build_graph(cloud({{0.0}, {1.0}}), Metric::euclidean(), 1.0), DisconnectedGraphError);
}

TEST_CASE("build_graph: radius below theta reports every component") {
    try {
        build_graph(cloud({{0, 0}, {1, 0}, {0, 1}}), Metric::euclidean(), 0.5);
        FAIL("expected DisconnectedGraphError");
    } catch (const DisconnectedGraphError& e) {
        CHECK(e.component_sizes() == std::vector<std::size_t>{1, 1, 1});
    }
}

TEST_CASE("build_graph: component sizes sorted largest first") {
    try {
        build_graph(cloud({{0.0}, {0.1}, {5.0}, {0.2}, {5.1}}), Metric::euclidean(), 0.15);
        FAIL("expected DisconnectedGraphError");
    } catch (const DisconnectedGraphError& e) {
        CHECK(e.component_sizes() == std::vector<std::size_t>{3, 2});
    }
}

TEST_CASE("build_graph: duplicate points rejected") {
    CHECK_THROWS_AS(build_graph(cloud({{1.0, 2.0}, {0.0, 0.0}, {1.0, 2.0}}), Metric::euclidean(), 10.0),
                    DuplicatePointError);
}

TEST_CASE("build_graph: larger radius yields an edge superset") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
        const Graph g = fixtures::random_connected_graph(rng, 30);
        const Graph big = build_graph(g.source().cloud, Metric::euclidean(), 1.3 * g.rho_max() + 0.01);
        for (const auto& e : g.edges()) {
            const bool found = std::any_of(big.edges().begin(), big.edges().end(),
                                           [&](const Edge& f) { return f.i == e.i && f.j == e.j && f.length == e.length; });
            CHECK(found);
        }
    }
}

TEST_CASE("Graph constructor validation") {
    CHECK_THROWS(Graph(1, {}));
    CHECK_THROWS(Graph(2, {{0, 0, 1.0}}));
    CHECK_THROWS(Graph(2, {{0, 1, 0.0}}));
    CHECK_THROWS(Graph(2, {{0, 1, -1.0}}));
    CHECK_THROWS(Graph(2, {{0, 2, 1.0}}));
    CHECK_THROWS(Graph(2, {{0, 1, 1.0}, {1, 0, 2.0}}));
    const Graph g(2, {{1, 0, 3.0}});
    CHECK(g.edges()[0].i == 0);
    CHECK(g.edges()[0].j == 1);
}

TEST_CASE("rescale_to_unit_neighbor: hand examples") {
    const Graph g = rescale_to_unit_neighbor(path({2.0, 4.0}));
    CHECK(g.edges()[0].length == 0.5);
    CHECK(g.edges()[1].length == 1.0);

    const Graph unit = rescale_to_unit_neighbor(path({1.0, 0.5}));
    CHECK(unit.edges()[0].length == 1.0);
    CHECK(unit.edges()[1].length == 0.5);

    const Graph single = rescale_to_unit_neighbor(Graph(2, {{0, 1, 10.0}}));
    CHECK(single.edges()[0].length == 1.0);
}

TEST_CASE("rescale_to_unit_neighbor: property and idempotence") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
        const Graph g = rescale_to_unit_neighbor(fixtures::random_connected_graph(rng, 40));
        double worst = 0.0;
        for (Vertex v = 0; v < g.size(); ++v) {
            double m = std::numeric_limits<double>::infinity();
            for (const auto& a : g.neighbors(v)) m = std::min(m, a.length);
            CHECK(m <= 1.0);
            worst = std::max(worst, m);
        }
        CHECK(worst == 1.0);
        const Graph again = rescale_to_unit_neighbor(g);
        for (std::size_t k = 0; k < g.edges().size(); ++k)
            CHECK_THAT(again.edges()[k].length, WithinAbs(g.edges()[k].length, 1e-12));
        CHECK_THAT(g.source().scale * g.edges()[0].length,
                   WithinAbs(distance(g.source().cloud.points.row(g.edges()[0].i),
                                      g.source().cloud.points.row(g.edges()[0].j), g.source().metric),
                             1e-12));
    }
}

TEST_CASE("normalized_laplacian: two vertices and star") {
    const Laplacian l2 = normalized_laplacian(Graph(2, {{0, 1, 0.37}}));
    const Eigen::MatrixXd d2 = fixtures::dense(l2);
    CHECK(d2(0, 0) == 1.0);
    CHECK(d2(1, 1) == 1.0);
    CHECK(d2(0, 1) == -1.0);
    CHECK(d2(1, 0) == -1.0);

    const Laplacian ls = normalized_laplacian(Graph(4, {{0, 1, 1.0}, {0, 2, 1.0}, {0, 3, 1.0}}));
    const Eigen::MatrixXd ds = fixtures::dense(ls);
    for (int i = 0; i < 4; ++i) CHECK(ds(i, i) == 1.0);
    for (int j = 1; j < 4; ++j) {
        CHECK_THAT(ds(0, j), WithinAbs(-1.0 / std::sqrt(3.0), 1e-15));
        for (int k = 1; k < 4; ++k)
            if (j != k) CHECK(ds(j, k) == 0.0);
    }
    CHECK(ls.degree[0] == 3.0);
}

TEST_CASE("normalized_laplacian: invariants on random graphs") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 30; ++t) {
        const Graph g = fixtures::random_connected_graph(rng, 35);
        const Laplacian lap = normalized_laplacian(g);
        const Eigen::MatrixXd L = fixtures::dense(lap);
        CHECK(L == L.transpose());
        for (Vertex i = 0; i < g.size(); ++i) {
            CHECK(L(i, i) == 1.0);
            double rowsum = 0.0;
            for (const auto& a : g.neighbors(i)) rowsum += 1.0 / a.length;
            CHECK_THAT(lap.degree[i], WithinAbs(rowsum, 1e-12));
        }
        CHECK(L.cwiseAbs().maxCoeff() <= 1.0);
        for (const auto& e : g.edges())
            CHECK_THAT(L(e.i, e.j), WithinAbs(-e.weight() / std::sqrt(lap.degree[e.i] * lap.degree[e.j]), 1e-15));
        // D^{1/2} 1 spans the nullspace.
        const Eigen::VectorXd s = lap.degree.cwiseSqrt();
        CHECK((L * s).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("Partition") {
    const Partition p(std::vector<bool>{true, false, true, false});
    CHECK(p.known() == std::vector<Vertex>{0, 2});
    CHECK(p.unknown() == std::vector<Vertex>{1, 3});
    CHECK(p.is_known(2));
    CHECK_FALSE(p.is_known(3));
    CHECK(Partition::from_unknown(4, std::vector<Vertex>{1, 3}).known() == p.known());
    CHECK_THROWS(Partition(std::vector<bool>{false, false}));
}

TEST_CASE("graph_ball: hand examples") {
    const Graph g = path({1.0, 1.0, 1.0});
    const Partition p(std::vector<bool>{true, false, true, false});

    const Neighborhood tiny = graph_ball(g, p, 1, 0.5);
    CHECK(tiny.members == std::vector<Vertex>{1});

    const Neighborhood b = graph_ball(g, p, 0, 2.0);
    CHECK(b.members == std::vector<Vertex>{0, 1, 2});
    CHECK(b.boundary == std::vector<Vertex>{2});
    CHECK(b.interior == std::vector<Vertex>{0, 1});
    CHECK(b.known_members == std::vector<Vertex>{0, 2});
    CHECK(b.unknown_members == std::vector<Vertex>{1});
    CHECK(b.contains(2));
    CHECK_FALSE(b.contains(3));

    const Neighborhood all = graph_ball(g, 2, 10.0);
    CHECK(all.members.size() == 4);
    CHECK(all.boundary.empty());
}

TEST_CASE("graph_ball: radius equal to the path length is included") {
    const Graph g = path({0.5, 0.25});
    CHECK(graph_ball(g, 0, 0.75).members == std::vector<Vertex>{0, 1, 2});
}

TEST_CASE("graph_ball: matches Floyd-Warshall and is monotone in the radius") {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 15; ++t) {
        const Graph g = fixtures::random_connected_graph(rng, 40);
        const Eigen::MatrixXd d = fixtures::all_pairs(g);
        BallSearch search(g);
        for (Vertex c = 0; c < g.size(); c += 7) {
            std::vector<Vertex> prev;
            for (double r : {0.05, 0.1, 0.2, 0.4, 0.8}) {
                const auto m = search.members(c, r);
                std::vector<Vertex> expect;
                for (Vertex v = 0; v < g.size(); ++v)
                    if (d(c, v) <= r) expect.push_back(v);
                CHECK(m == expect);
                CHECK(std::includes(m.begin(), m.end(), prev.begin(), prev.end()));
                prev = m;
            }
        }
    }
}

TEST_CASE("validate_assumptions: the three findings") {
    // 4-cycle alternating known/unknown, unit lengths.
    const Graph ring(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {0, 3, 1.0}});
    const Partition alt(std::vector<bool>{true, false, true, false});
    const auto nb = known_neighborhoods(ring, alt, 1.0);
    const auto ok = validate_assumptions(ring, alt, nb);
    CHECK(ok.unknowns_only_touch_known);
    CHECK(ok.edge_length_bound);

    const Partition adj(std::vector<bool>{true, false, false, true});
    const auto bad = validate_assumptions(ring, adj, known_neighborhoods(ring, adj, 1.0));
    CHECK_FALSE(bad.unknowns_only_touch_known);
    REQUIRE(bad.unknown_unknown_edges.size() == 1);
    CHECK(bad.unknown_unknown_edges[0].first == 1);
    CHECK(bad.unknown_unknown_edges[0].second == 2);

    // Boundary vertex 1 of the ball around 0 with radius 1 is unknown.
    const Graph p4 = path({1.0, 1.0, 1.0});
    const Partition pp(std::vector<bool>{true, false, true, true});
    const auto rb = validate_assumptions(p4, pp, known_neighborhoods(p4, pp, 1.0));
    CHECK_FALSE(rb.dirichlet_boundaries);
    CHECK(std::find(rb.unknown_boundary_vertices.begin(), rb.unknown_boundary_vertices.end(), std::pair<Vertex, Vertex>{0, 1}) !=
          rb.unknown_boundary_vertices.end());

    const Graph skew = path({1.0, 0.4});
    const auto rs = validate_assumptions(skew, Partition(std::vector<bool>{true, false, true}), {});
    CHECK_FALSE(rs.edge_length_bound);
    CHECK(rs.short_edges.size() == 1);
}

TEST_CASE("neighbor_count_bounds") {
    const Graph star(4, {{0, 1, 1.0}, {0, 2, 1.0}, {0, 3, 1.0}});
    const auto [mu, mk] = neighbor_count_bounds(star, Partition(std::vector<bool>{false, true, true, true}));
    CHECK(mu == 3);
    CHECK(mk == 1);
}
