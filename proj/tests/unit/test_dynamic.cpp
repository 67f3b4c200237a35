#include <catch_amalgamated.hpp>

#include "fixtures.hpp"

using namespace loclag;

namespace {

/// Unit-spaced points on a line.
Graph line(Vertex n) {
    PointCloud pc;
    pc.points.resize(n, 1);
    for (Vertex i = 0; i < n; ++i) pc.points(i, 0) = static_cast<double>(i);
    return build_graph(pc, Metric::euclidean(), 1.5);
}

InsertOptions options(double ri, double ro) {
    InsertOptions o;
    o.inner_radius = ri;
    o.outer_radius = ro;
    return o;
}

} // namespace

TEST_CASE("append_vertex: edges, ids and errors") {
    const Graph g = line(5);
    const auto [g2, added] = append_vertex(g, Eigen::VectorXd::Constant(1, 4.5), "new", 1.6);
    CHECK(g2.size() == 6);
    REQUIRE(added.size() == 2);
    CHECK(added[0].vertex == 3);
    CHECK(added[0].length == 1.5);
    CHECK(added[1].vertex == 4);
    CHECK(added[1].length == 0.5);
    CHECK(g2.theta() == 0.5);

    CHECK_THROWS_AS(append_vertex(g, Eigen::VectorXd::Constant(1, 50.0), "", 1.5), IsolatedVertexError);
    CHECK_THROWS_AS(append_vertex(g, Eigen::VectorXd::Constant(1, 2.0), "", 1.5), DuplicatePointError);
    CHECK_THROWS(append_vertex(g, Eigen::VectorXd::Zero(2), "", 1.5));
}

TEST_CASE("append_vertex: strict inner radius") {
    const Graph g = line(3);
    CHECK_THROWS_AS(append_vertex(g, Eigen::VectorXd::Constant(1, 3.0), "", 1.0), IsolatedVertexError);
    const auto [g2, added] = append_vertex(g, Eigen::VectorXd::Constant(1, 3.0), "", 1.001);
    REQUIRE(added.size() == 1);
    CHECK(added[0].vertex == 2);
}

TEST_CASE("append_vertex: lengths honor the graph scale") {
    const Graph g = rescale_to_unit_neighbor(build_graph(line(4).source().cloud, Metric::euclidean(), 2.5));
    const auto [g2, added] = append_vertex(g, Eigen::VectorXd::Constant(1, 3.5), "", 1.0);
    REQUIRE(added.size() == 1);
    CHECK(added[0].vertex == 3);
    CHECK(added[0].length == 0.5);
}

TEST_CASE("insert_vertex: duplicate insertion is rejected") {
    const Graph g = line(6);
    const Partition p(std::vector<bool>{true, false, true, false, true, false});
    const BasisMatrix b = compute_basis(normalized_laplacian(g), p, known_neighborhoods(g, p, 2.0), {});
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 2.5);
    const auto once = insert_vertex(g, p, b, x, true, options(1.5, 2.0));
    CHECK_THROWS_AS(insert_vertex(once.graph, once.partition, once.basis, x, true, options(1.5, 2.0)),
                    DuplicatePointError);
}

TEST_CASE("insert_vertex: far point is isolated") {
    const Graph g = line(4);
    const Partition p(std::vector<bool>{true, false, true, false});
    const BasisMatrix b = compute_basis(normalized_laplacian(g), p, known_neighborhoods(g, p, 2.0), {});
    CHECK_THROWS_AS(insert_vertex(g, p, b, Eigen::VectorXd::Constant(1, 99.0), false, options(1.5, 2.0)),
                    IsolatedVertexError);
}

TEST_CASE("affected_centers: far insertion touches nothing") {
    const Graph g = line(10);
    const auto [g2, added] = append_vertex(g, Eigen::VectorXd::Constant(1, 9.5), "", 1.0);
    const std::vector<Vertex> centers{0, 1};
    CHECK(affected_centers(g2, 10, centers, 1.0).empty());
}

TEST_CASE("affected_centers: degree change outside the ball is included") {
    // New vertex 5 at x = 4.6 joins vertex 4 only. Center 2 with R_o = 2 holds
    // vertex 4 but not the new vertex (distance 2.6).
    const Graph g = line(5);
    const auto [g2, added] = append_vertex(g, Eigen::VectorXd::Constant(1, 4.6), "", 1.0);
    REQUIRE(added.size() == 1);
    CHECK_FALSE(graph_ball(g2, 2, 2.0).contains(5));
    const std::vector<Vertex> centers{0, 2};
    CHECK(affected_centers(g2, 5, centers, 2.0) == std::vector<Vertex>{2});
}

TEST_CASE("affected_centers: every center whose ball holds the new vertex") {
    std::mt19937_64 rng(31);
    for (int t = 0; t < 10; ++t) {
        double r = 0.0;
        const Graph g = fixtures::random_connected_graph(rng, 60, 2, &r);
        const Partition p = fixtures::random_partition(rng, g.size());
        std::uniform_real_distribution<double> u(0, 1);
        for (;;) {
            try {
                const auto [g2, added] = append_vertex(g, Eigen::Vector2d(u(rng), u(rng)), "", r);
                const Vertex v0 = g.size();
                const auto aff = affected_centers(g2, v0, p.known(), 2 * r);
                for (Vertex c : p.known()) {
                    if (graph_ball(g2, c, 2 * r).contains(v0)) CHECK(std::binary_search(aff.begin(), aff.end(), c));
                }
                break;
            } catch (const IsolatedVertexError&) {
            }
        }
    }
}

TEST_CASE("insert_vertex: known vertex becomes a center with its own neighborhood") {
    const Graph g = line(6);
    const Partition p(std::vector<bool>{true, false, true, false, true, false});
    const BasisMatrix b = compute_basis(normalized_laplacian(g), p, known_neighborhoods(g, p, 2.0), {});
    const auto res = insert_vertex(g, p, b, Eigen::VectorXd::Constant(1, 5.5), true, options(1.5, 2.0));
    CHECK(res.basis.centers == std::vector<Vertex>{0, 2, 4, 6});
    CHECK(res.basis.radii.back() == 2.0);
    CHECK(res.basis.columns.back().coeff(6) == 1.0);
    CHECK(res.delta.new_vertex == 6);
    CHECK(res.delta.known);
    CHECK(std::binary_search(res.delta.affected_centers.begin(), res.delta.affected_centers.end(), Vertex{6}));
    CHECK(res.delta.seconds >= 0.0);
}

TEST_CASE("insert_vertex: Lagrange basis is recomputed in full") {
    std::mt19937_64 rng(32);
    double r = 0.0;
    const Graph g = fixtures::random_connected_graph(rng, 40, 2, &r);
    const Partition p = fixtures::random_partition(rng, g.size());
    const BasisMatrix b = compute_basis(normalized_laplacian(g), p, {});
    std::uniform_real_distribution<double> u(0, 1);
    for (;;) {
        try {
            const auto res = insert_vertex(g, p, b, Eigen::Vector2d(u(rng), u(rng)), false, options(r, 0.0));
            const BasisMatrix fresh = compute_basis(res.laplacian, res.partition, {});
            CHECK(res.basis.mode == BasisMode::lagrange);
            CHECK(res.delta.affected_centers == res.partition.known());
            for (Eigen::Index c = 0; c < fresh.cols(); ++c)
                CHECK((dense_column(fresh, c) - dense_column(res.basis, c)).lpNorm<Eigen::Infinity>() == 0.0);
            break;
        } catch (const IsolatedVertexError&) {
        }
    }
}

TEST_CASE("insert_vertex: matches a rebuild from scratch on random instances") {
    std::mt19937_64 rng(33);
    std::uniform_int_distribution<Vertex> size(20, 120);
    for (int t = 0; t < 12; ++t) {
        const auto chk = fixtures::random_insertion(rng, size(rng));
        CHECK(chk.same_edges);
        CHECK(chk.max_column_diff <= 1e-10);
        CHECK(chk.untouched_identical);
        CHECK(chk.changes_covered);
    }
}
