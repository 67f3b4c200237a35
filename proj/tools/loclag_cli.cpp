#include "loclag/loclag.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace loclag;
namespace h = loclag::harness;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::optional<std::string> solver;
    std::optional<double> tol;
    std::string out;
    std::string config;
};

SolverConfig solver_config(const Globals& g, SolverConfig base = {}) {
    if (g.solver) base.method = parse_solver_method(*g.solver);
    if (g.tol) base.tolerance = *g.tol;
    base.validate();
    return base;
}

h::ExperimentConfig experiment_config(const Globals& g, h::ExperimentConfig::Kind kind, bool seed_given) {
    auto cfg = h::ExperimentConfig::defaults(kind);
    if (!g.config.empty()) {
        auto j = io::read_json(g.config);
        j["experiment"] = h::to_string(kind);
        cfg = h::config_from_json(j, cfg);
    }
    if (seed_given) cfg.seed = g.seed;
    cfg.solver = solver_config(g, cfg.solver);
    cfg.validate();
    return cfg;
}

std::string out_or(const Globals& g, const std::string& fallback) { return g.out.empty() ? fallback : g.out; }

std::vector<std::string> split_names(const std::string& s) {
    if (s.empty()) return {};
    return io::split_csv_line(s);
}

struct PointsArgs {
    std::string path;
    std::string features;
    std::string id;
    std::string passthrough;

    PointCloud load() const {
        io::PointColumns cols;
        cols.features = split_names(features);
        if (!id.empty()) cols.id = id;
        cols.passthrough = split_names(passthrough);
        return io::point_cloud(io::read_csv(path), cols);
    }

    void add(CLI::App* app, bool required) {
        auto* opt = app->add_option("--points", path, "Point-cloud CSV with a header row");
        if (required) opt->required();
        app->add_option("--features", features, "Comma-separated feature columns (default: all others)");
        app->add_option("--id", id, "Column holding vertex ids");
        app->add_option("--ignore", passthrough, "Comma-separated columns to exclude from the features");
    }
};

Graph load_graph(const std::string& stem, const std::optional<PointCloud>& cloud = std::nullopt) {
    return io::read_graph(stem + ".edges.csv", stem + ".graph.json", cloud);
}

BasisMatrix load_basis(const std::string& stem, const Graph& g) {
    return io::read_basis(stem + ".basis.csv", stem + ".basis.json", &g);
}

/// Reads `vertex,value` rows into a full-length vector; NaN where absent.
Eigen::VectorXd read_vertex_values(const std::string& path, Vertex n) {
    const auto t = io::read_csv(path);
    const auto cv = t.column("vertex"), cx = t.column("value");
    Eigen::VectorXd out = Eigen::VectorXd::Constant(n, std::nan(""));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto v = static_cast<Vertex>(t.number(r, cv));
        if (v < 0 || v >= n) throw std::invalid_argument("vertex " + std::to_string(v) + " out of range");
        out[v] = t.number(r, cx);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lagrange and local Lagrange bases on weighted graphs"};
    app.require_subcommand(1);
    Globals g;
    auto* seed_opt = app.add_option("--seed", g.seed, "Random seed for experiments");
    app.add_option("--solver", g.solver, "Least-squares backend: direct | lsqr");
    app.add_option("--tol", g.tol, "Normal-equation residual tolerance");
    app.add_option("--out", g.out, "Output path or file stem");
    app.add_option("--config", g.config, "Experiment configuration JSON")->check(CLI::ExistingFile);

    // graph build ------------------------------------------------------------
    auto* graph_cmd = app.add_subcommand("graph", "Graph construction")->require_subcommand(1);
    auto* build_cmd = graph_cmd->add_subcommand("build", "Build a graph from a point cloud");
    PointsArgs build_points;
    build_points.add(build_cmd, true);
    std::string metric_kind = "euclidean";
    std::vector<double> metric_weights;
    double metric_p = 2.0;
    std::optional<double> inner_radius, inner_theta;
    bool rescale = false;
    build_cmd->add_option("--metric", metric_kind, "euclidean | weighted-minkowski")
        ->check(CLI::IsMember({"euclidean", "weighted-minkowski"}));
    build_cmd->add_option("--weights", metric_weights, "Per-feature weights")->delimiter(',');
    build_cmd->add_option("--p", metric_p, "Minkowski order");
    auto* ri_abs = build_cmd->add_option("--inner-radius", inner_radius, "Join pairs closer than this distance");
    auto* ri_theta = build_cmd->add_option("--inner-theta", inner_theta, "Inner radius as a multiple of theta");
    ri_abs->excludes(ri_theta);
    build_cmd->add_flag("--rescale", rescale, "Rescale so every vertex has a neighbor within 1");

    // basis compute / diff ---------------------------------------------------
    auto* basis_cmd = app.add_subcommand("basis", "Basis computation")->require_subcommand(1);
    auto* compute_cmd = basis_cmd->add_subcommand("compute", "Compute a Lagrange or local Lagrange basis");
    std::string graph_stem, partition_path, mode = "lagrange";
    std::optional<double> outer_radius;
    compute_cmd->add_option("--graph", graph_stem, "Graph file stem")->required();
    compute_cmd->add_option("--partition", partition_path, "CSV vertex,known")->required();
    compute_cmd->add_option("--mode", mode, "lagrange | local")->check(CLI::IsMember({"lagrange", "local"}));
    compute_cmd->add_option("--outer-radius", outer_radius, "Neighborhood radius (local mode)");

    auto* diff_cmd = basis_cmd->add_subcommand("diff", "Per-center discrepancy between two bases");
    std::string full_stem, local_stem;
    diff_cmd->add_option("--graph", graph_stem, "Graph file stem")->required();
    diff_cmd->add_option("--full", full_stem, "Lagrange basis stem")->required();
    diff_cmd->add_option("--local", local_stem, "Local basis stem")->required();

    // interpolate ------------------------------------------------------------
    auto* interp_cmd = app.add_subcommand("interpolate", "Quasi-interpolate known values");
    std::string basis_stem, values_path, truth_path;
    bool unknown_only = false;
    interp_cmd->add_option("--graph", graph_stem, "Graph file stem")->required();
    interp_cmd->add_option("--partition", partition_path, "CSV vertex,known")->required();
    interp_cmd->add_option("--basis", basis_stem, "Basis file stem")->required();
    interp_cmd->add_option("--values", values_path, "CSV vertex,value covering every known vertex")->required();
    interp_cmd->add_option("--truth", truth_path, "CSV vertex,value with ground truth");
    interp_cmd->add_flag("--unknown-only", unknown_only, "Only emit unknown vertices");
    double local_sum_radius = 0.0;
    interp_cmd->add_option("--local-sum", local_sum_radius,
                           "Sum only centers within this graph distance of each output vertex")
        ->check(CLI::PositiveNumber);

    // insert -----------------------------------------------------------------
    auto* insert_cmd = app.add_subcommand("insert", "Insert one vertex and refresh the basis locally");
    PointsArgs insert_points;
    insert_points.add(insert_cmd, true);
    std::string point_path;
    bool insert_known = false;
    double insert_inner = 0.0;
    insert_cmd->add_option("--graph", graph_stem, "Graph file stem")->required();
    insert_cmd->add_option("--partition", partition_path, "CSV vertex,known")->required();
    insert_cmd->add_option("--basis", basis_stem, "Basis file stem")->required();
    insert_cmd->add_option("--point", point_path, "Single-row CSV with the new point's features")->required();
    insert_cmd->add_flag("--known", insert_known, "The new vertex is known (becomes a center)");
    insert_cmd->add_option("--inner-radius", insert_inner, "Inner radius in graph units")->required();
    insert_cmd->add_option("--outer-radius", outer_radius, "Outer radius (default: the basis radius)");

    // exp --------------------------------------------------------------------
    auto* exp_cmd = app.add_subcommand("exp", "Experiments")->require_subcommand(1);
    auto* sphere_cmd = exp_cmd->add_subcommand("sphere", "Sphere convergence sweep");
    auto* timing_cmd = exp_cmd->add_subcommand("timing", "Basis and update timings");
    auto* cv_cmd = exp_cmd->add_subcommand("energy-cv", "Repeated k-fold CV on the energy dataset");
    std::vector<Vertex> sizes;
    sphere_cmd->add_option("--N", sizes, "Lattice sizes")->delimiter(',');
    timing_cmd->add_option("--N", sizes, "Lattice sizes")->delimiter(',');
    std::string data_path;
    cv_cmd->add_option("--data", data_path, "Energy dataset CSV")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (build_cmd->parsed()) {
            PointCloud cloud = build_points.load();
            Metric metric = Metric::euclidean();
            if (metric_kind == "weighted-minkowski") {
                Eigen::VectorXd w = metric_weights.empty()
                                        ? Eigen::VectorXd::Ones(cloud.dimension())
                                        : Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(
                                              metric_weights.data(), static_cast<Eigen::Index>(metric_weights.size())));
                metric = Metric::weighted_minkowski(w, metric_p);
            }
            if (!inner_radius && !inner_theta) throw std::invalid_argument("one of --inner-radius, --inner-theta is required");
            const double r = inner_radius ? *inner_radius : *inner_theta * min_pairwise_distance(cloud, metric);
            Graph graph = build_graph(std::move(cloud), metric, r);
            if (rescale) graph = rescale_to_unit_neighbor(graph);
            const auto stem = out_or(g, "graph");
            io::write_graph(graph, stem + ".edges.csv", stem + ".graph.json");
            std::cout << io::graph_sidecar(graph).dump(2) << "\n";
        } else if (compute_cmd->parsed()) {
            const Graph graph = load_graph(graph_stem);
            const Partition part = io::read_partition(partition_path);
            if (part.size() != graph.size()) throw std::invalid_argument("partition and graph sizes differ");
            const Laplacian lap = normalized_laplacian(graph);
            const SolverConfig cfg = solver_config(g);
            BasisMatrix b;
            if (mode == "lagrange") {
                b = compute_basis(lap, part, cfg);
            } else {
                if (!outer_radius) throw std::invalid_argument("--outer-radius is required in local mode");
                b = compute_basis(lap, part, known_neighborhoods(graph, part, *outer_radius), cfg);
            }
            const auto stem = out_or(g, "basis");
            io::write_basis(b, io::graph_hash(graph), stem + ".basis.csv", stem + ".basis.json");
            std::cout << "centers " << b.cols() << " sparsity " << io::format_double(sparsity_ratio(b)) << "\n";
        } else if (diff_cmd->parsed()) {
            const Graph graph = load_graph(graph_stem);
            const BasisMatrix full = load_basis(full_stem, graph);
            const BasisMatrix local = load_basis(local_stem, graph);
            std::string csv = "center,inside,outside\n";
            double worst = 0.0;
            for (Vertex v : full.centers) {
                const auto d = basis_discrepancy(full, local, v);
                worst = std::max({worst, d.inside, d.outside});
                csv += std::to_string(v) + "," + io::format_double(d.inside) + "," + io::format_double(d.outside) + "\n";
            }
            if (g.out.empty()) std::cout << csv;
            else io::write_text(g.out, csv);
            std::cerr << "max discrepancy " << io::format_double(worst) << "\n";
        } else if (interp_cmd->parsed()) {
            const Graph graph = load_graph(graph_stem);
            const Partition part = io::read_partition(partition_path);
            const BasisMatrix b = load_basis(basis_stem, graph);
            if (b.centers != part.known()) throw std::invalid_argument("basis centers do not match the known vertices");
            const Eigen::VectorXd values = read_vertex_values(values_path, graph.size());
            SignalData data;
            data.known_values.resize(static_cast<Eigen::Index>(b.centers.size()));
            for (std::size_t c = 0; c < b.centers.size(); ++c) {
                const double x = values[b.centers[c]];
                if (std::isnan(x)) throw std::invalid_argument("no value for known vertex " + std::to_string(b.centers[c]));
                data.known_values[static_cast<Eigen::Index>(c)] = x;
            }
            std::optional<Eigen::VectorXd> truth;
            if (!truth_path.empty()) truth = read_vertex_values(truth_path, graph.size());
            Eigen::VectorXd pred = quasi_interpolate(b, data);
            if (local_sum_radius > 0.0)
                for (Vertex w = 0; w < graph.size(); ++w)
                    pred[w] = local_quasi_interpolate(graph, b, data, w, local_sum_radius);
            std::vector<Vertex> rows;
            if (unknown_only) rows = part.unknown();
            else
                for (Vertex v = 0; v < graph.size(); ++v) rows.push_back(v);
            const auto csv = io::predictions_csv(&graph, pred, rows, truth);
            if (g.out.empty()) std::cout << csv;
            else io::write_text(g.out, csv);
            if (truth && !part.unknown().empty() && truth->allFinite())
                std::cerr << "mse(unknown) " << io::format_double(mse(pred, *truth, part.unknown())) << "\n";
        } else if (insert_cmd->parsed()) {
            const Graph graph = load_graph(graph_stem, insert_points.load());
            const Partition part = io::read_partition(partition_path);
            const BasisMatrix b = load_basis(basis_stem, graph);
            io::PointColumns cols;
            cols.features = split_names(insert_points.features);
            if (!insert_points.id.empty()) cols.id = insert_points.id;
            cols.passthrough = split_names(insert_points.passthrough);
            const auto row = io::point_cloud(io::read_csv(point_path), cols);
            if (row.size() != 1) throw std::invalid_argument("--point must hold exactly one row");
            InsertOptions opt;
            opt.inner_radius = insert_inner;
            if (outer_radius) opt.outer_radius = *outer_radius;
            else if (!b.radii.empty()) opt.outer_radius = b.radii.front();
            else if (b.mode == BasisMode::local) throw std::invalid_argument("--outer-radius is required");
            opt.solver = solver_config(g, b.solver);
            if (!row.ids.empty()) opt.id = row.ids.front();
            const auto res = insert_vertex(graph, part, b, row.points.row(0).transpose(), insert_known, opt);
            const auto stem = out_or(g, "inserted");
            io::write_graph(res.graph, stem + ".edges.csv", stem + ".graph.json");
            io::write_basis(res.basis, io::graph_hash(res.graph), stem + ".basis.csv", stem + ".basis.json");
            io::write_text(stem + ".partition.csv", io::partition_csv(res.partition));
            const auto delta = io::to_json(res.delta).dump(2) + "\n";
            io::write_text(stem + ".delta.json", delta);
            std::cout << delta;
        } else if (sphere_cmd->parsed()) {
            auto cfg = experiment_config(g, h::ExperimentConfig::Kind::sphere_convergence, seed_opt->count() > 0);
            if (!sizes.empty()) cfg.sizes = sizes;
            const auto rep = h::run_sphere_convergence(cfg);
            const auto stem = out_or(g, "sphere");
            h::emit_report(rep, h::ReportFormat::csv, stem + ".csv");
            h::emit_report(rep, h::ReportFormat::json, stem + ".json");
            std::cout << h::to_csv(rep);
        } else if (timing_cmd->parsed()) {
            auto cfg = experiment_config(g, h::ExperimentConfig::Kind::sphere_timing, seed_opt->count() > 0);
            if (!sizes.empty()) cfg.sizes = sizes;
            const auto rep = h::run_timing(cfg);
            const auto stem = out_or(g, "timing");
            h::emit_report(rep, h::ReportFormat::csv, stem + ".csv");
            h::emit_report(rep, h::ReportFormat::json, stem + ".json");
            std::cout << h::to_csv(rep);
        } else if (cv_cmd->parsed()) {
            const auto cfg = experiment_config(g, h::ExperimentConfig::Kind::energy_cv, seed_opt->count() > 0);
            const auto ds = h::load_energy_dataset(data_path, cfg.columns);
            const auto rep = h::run_energy_cv(cfg, ds);
            const auto stem = out_or(g, "energy_cv");
            h::emit_report(rep, h::ReportFormat::csv, stem + ".csv");
            h::emit_report(rep, h::ReportFormat::json, stem + ".json");
            std::cout << h::to_csv(rep);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
