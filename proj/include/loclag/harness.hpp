#pragma once

// Experiment drivers: Fibonacci-sphere convergence and timing sweeps, and
// repeated k-fold cross-validation on tabular data with learned feature weights.

#include "loclag/basis.hpp"
#include "loclag/dynamic.hpp"
#include "loclag/graph.hpp"
#include "loclag/interp.hpp"
#include "loclag/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace loclag::harness {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Data generation
// ---------------------------------------------------------------------------

/// Golden-angle lattice: z_i = 1 - (2i+1)/N, azimuth i * pi (3 - sqrt 5).
inline PointCloud fibonacci_sphere(Vertex n) {
    if (n < 2) throw std::invalid_argument("fibonacci_sphere needs N >= 2");
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    PointCloud pc;
    pc.points.resize(n, 3);
    for (Vertex i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * static_cast<double>(i);
        pc.points.row(i) << r * std::cos(phi), r * std::sin(phi), z;
    }
    return pc;
}

/// Deterministic, evenly spread unknown set: i is unknown iff
/// floor((i+1) f) > floor(i f). For f = 1/3 this is every third index.
inline std::vector<bool> periodic_known_mask(Vertex n, double unknown_fraction) {
    if (!(unknown_fraction > 0.0 && unknown_fraction < 1.0))
        throw std::invalid_argument("unknown_fraction must lie in (0, 1)");
    std::vector<bool> known(static_cast<std::size_t>(n), true);
    for (Vertex i = 0; i < n; ++i) {
        const auto a = std::floor(static_cast<double>(i) * unknown_fraction + 1e-12);
        const auto b = std::floor(static_cast<double>(i + 1) * unknown_fraction + 1e-12);
        if (b > a) known[static_cast<std::size_t>(i)] = false;
    }
    return known;
}

// ---------------------------------------------------------------------------
// Feature importance
// ---------------------------------------------------------------------------

/// Leave-one-out MSE of a 1-nearest-neighbor regressor on one feature.
/// Equidistant nearest neighbors are averaged.
inline double loo_nearest_neighbor_mse(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const auto n = x.size();
    if (n < 2 || y.size() != n) throw std::invalid_argument("nearest-neighbor MSE needs >= 2 matching samples");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });

    struct Group {
        double value;
        double sum;
        double count;
        std::size_t begin;
        std::size_t end;
    };
    std::vector<Group> groups;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const double v = x[order[k]];
        if (groups.empty() || groups.back().value != v) groups.push_back({v, 0.0, 0.0, k, k});
        groups.back().sum += y[order[k]];
        groups.back().count += 1.0;
        groups.back().end = k + 1;
    }

    double sse = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& grp = groups[g];
        for (std::size_t k = grp.begin; k < grp.end; ++k) {
            const double yi = y[order[k]];
            double pred = 0.0;
            if (grp.count > 1.0) {
                pred = (grp.sum - yi) / (grp.count - 1.0);
            } else {
                const double dl = g > 0 ? grp.value - groups[g - 1].value : std::numeric_limits<double>::infinity();
                const double dr =
                    g + 1 < groups.size() ? groups[g + 1].value - grp.value : std::numeric_limits<double>::infinity();
                double s = 0.0, c = 0.0;
                if (dl <= dr) s += groups[g - 1].sum, c += groups[g - 1].count;
                if (dr <= dl) s += groups[g + 1].sum, c += groups[g + 1].count;
                pred = s / c;
            }
            sse += (pred - yi) * (pred - yi);
        }
    }
    return sse / static_cast<double>(n);
}

struct FeatureImportance {
    Eigen::VectorXd weights; // positive, sum 1
    Eigen::VectorXd mse;     // single-feature nearest-neighbor MSE
    std::vector<Eigen::Index> zero_variance;
};

/// Weight of feature i proportional to 1 / MSE_i (MSE floored at 1e-12).
/// Constant features get the smallest weight among the others.
inline FeatureImportance feature_importance(const Eigen::MatrixXd& features, const Eigen::VectorXd& target) {
    const auto d = features.cols();
    if (d < 2) throw std::invalid_argument("feature_importance needs at least two features");
    if (features.rows() != target.size()) throw std::invalid_argument("feature/target row mismatch");
    if (!target.allFinite()) throw std::invalid_argument("target must be numeric and finite");
    FeatureImportance fi;
    fi.mse.resize(d);
    fi.weights.resize(d);
    for (Eigen::Index c = 0; c < d; ++c) {
        const Eigen::VectorXd col = features.col(c);
        if (col.maxCoeff() == col.minCoeff()) fi.zero_variance.push_back(c);
        fi.mse[c] = loo_nearest_neighbor_mse(col, target);
        fi.weights[c] = 1.0 / std::max(fi.mse[c], 1e-12);
    }
    if (static_cast<Eigen::Index>(fi.zero_variance.size()) == d)
        throw std::invalid_argument("every feature is constant");
    double min_other = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < d; ++c)
        if (std::find(fi.zero_variance.begin(), fi.zero_variance.end(), c) == fi.zero_variance.end())
            min_other = std::min(min_other, fi.weights[c]);
    for (auto c : fi.zero_variance) fi.weights[c] = min_other;
    fi.weights /= fi.weights.sum();
    return fi;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Column names of the energy-performance table. The UCI file uses X1..X8
/// and Y1, Y2.
struct EnergyColumns {
    std::vector<std::string> features{"X1", "X2", "X3", "X4", "X5", "X6", "X7", "X8"};
    std::vector<std::pair<std::string, std::string>> targets{{"Heating Load", "Y1"}, {"Cooling Load", "Y2"}};
};

struct ExperimentConfig {
    enum class Kind { sphere_convergence, sphere_timing, energy_cv };

    Kind experiment = Kind::sphere_convergence;
    std::vector<Vertex> sizes{1000};
    double unknown_fraction = 1.0 / 3.0;
    std::vector<double> inner_multipliers{2.0, 3.0, 4.0}; // R_i in units of theta
    std::vector<double> outer_sweep{2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
    int folds = 10;
    int repetitions = 20;
    std::uint64_t seed = 0;
    SolverConfig solver;
    int timing_runs = 3;
    std::vector<double> epsilon_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    EnergyColumns columns;

    static ExperimentConfig defaults(Kind kind) {
        ExperimentConfig c;
        c.experiment = kind;
        if (kind == Kind::sphere_timing) {
            c.sizes = {500, 1000, 2000, 4000};
            c.unknown_fraction = 0.5;
            c.inner_multipliers = {3.0};
            c.outer_sweep = {8.0};
        } else if (kind == Kind::energy_cv) {
            c.outer_sweep = {3, 4, 5, 6, 7, 8};
        }
        return c;
    }

    void validate() const {
        if (sizes.empty() || std::any_of(sizes.begin(), sizes.end(), [](Vertex n) { return n < 2; }))
            throw std::invalid_argument("sizes must be nonempty with every N >= 2");
        if (!(unknown_fraction > 0.0 && unknown_fraction < 1.0))
            throw std::invalid_argument("unknown_fraction must lie in (0, 1)");
        if (outer_sweep.empty()) throw std::invalid_argument("outer-radius sweep must be nonempty");
        if (inner_multipliers.empty()) throw std::invalid_argument("inner-radius multipliers must be nonempty");
        for (double r : outer_sweep)
            if (!(r > 0.0)) throw std::invalid_argument("outer radii must be positive");
        for (double r : inner_multipliers)
            if (!(r > 0.0)) throw std::invalid_argument("inner radii must be positive");
        if (folds < 2 || repetitions < 1 || timing_runs < 1) throw std::invalid_argument("counts must be positive");
        solver.validate();
    }
};

inline std::string to_string(ExperimentConfig::Kind k) {
    switch (k) {
    case ExperimentConfig::Kind::sphere_convergence: return "sphere-convergence";
    case ExperimentConfig::Kind::sphere_timing: return "sphere-timing";
    case ExperimentConfig::Kind::energy_cv: return "energy-cv";
    }
    return "?";
}

inline ExperimentConfig::Kind parse_experiment(const std::string& s) {
    if (s == "sphere-convergence" || s == "sphere") return ExperimentConfig::Kind::sphere_convergence;
    if (s == "sphere-timing" || s == "timing") return ExperimentConfig::Kind::sphere_timing;
    if (s == "energy-cv") return ExperimentConfig::Kind::energy_cv;
    throw std::invalid_argument("unknown experiment '" + s + "'");
}

/// Overlays the keys present in `j` onto `base`.
inline ExperimentConfig config_from_json(const json& j, ExperimentConfig base) {
    static const std::set<std::string> keys{"experiment", "sizes",  "N",           "unknown_fraction",
                                            "inner_multipliers", "outer_sweep", "folds", "repetitions",
                                            "seed",       "solver", "timing_runs", "epsilon_grid", "columns"};
    if (!j.is_object()) throw std::invalid_argument("experiment config must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!keys.count(k)) throw std::invalid_argument("unknown experiment config key '" + k + "'");
    if (j.contains("experiment")) {
        const auto kind = parse_experiment(j.at("experiment").get<std::string>());
        if (kind != base.experiment) base = ExperimentConfig::defaults(kind);
    }
    if (j.contains("sizes")) base.sizes = j.at("sizes").get<std::vector<Vertex>>();
    if (j.contains("N"))
        base.sizes = j.at("N").is_array() ? j.at("N").get<std::vector<Vertex>>() : std::vector<Vertex>{j.at("N").get<Vertex>()};
    if (j.contains("unknown_fraction")) base.unknown_fraction = j.at("unknown_fraction").get<double>();
    if (j.contains("inner_multipliers")) base.inner_multipliers = j.at("inner_multipliers").get<std::vector<double>>();
    if (j.contains("outer_sweep")) base.outer_sweep = j.at("outer_sweep").get<std::vector<double>>();
    if (j.contains("folds")) base.folds = j.at("folds").get<int>();
    if (j.contains("repetitions")) base.repetitions = j.at("repetitions").get<int>();
    if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("solver")) base.solver = io::solver_from_json(j.at("solver"));
    if (j.contains("timing_runs")) base.timing_runs = j.at("timing_runs").get<int>();
    if (j.contains("epsilon_grid")) base.epsilon_grid = j.at("epsilon_grid").get<std::vector<double>>();
    if (j.contains("columns")) {
        const auto& c = j.at("columns");
        if (c.contains("features")) base.columns.features = c.at("features").get<std::vector<std::string>>();
        if (c.contains("targets")) {
            base.columns.targets.clear();
            for (const auto& [name, col] : c.at("targets").items())
                base.columns.targets.emplace_back(name, col.get<std::string>());
        }
    }
    base.validate();
    return base;
}

inline json to_json(const ExperimentConfig& c) {
    json targets = json::object();
    for (const auto& [name, col] : c.columns.targets) targets[name] = col;
    return {{"experiment", to_string(c.experiment)},
            {"sizes", c.sizes},
            {"unknown_fraction", c.unknown_fraction},
            {"inner_multipliers", c.inner_multipliers},
            {"outer_sweep", c.outer_sweep},
            {"folds", c.folds},
            {"repetitions", c.repetitions},
            {"seed", c.seed},
            {"solver", io::to_json(c.solver)},
            {"timing_runs", c.timing_runs},
            {"epsilon_grid", c.epsilon_grid},
            {"columns", {{"features", c.columns.features}, {"targets", targets}}}};
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

template <typename F>
double seconds_of(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    std::forward<F>(f)();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double mean(const std::vector<double>& v) {
    return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Population standard deviation.
inline double stddev(const std::vector<double>& v) {
    if (v.empty()) return std::nan("");
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

/// Least-squares slope of y against x.
inline double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

inline json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
inline double number_from(const json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

// ---------------------------------------------------------------------------
// Sphere convergence
// ---------------------------------------------------------------------------

struct SphereRow {
    Vertex n = 0;
    double inner = 0.0; // multiple of theta
    double outer = 0.0; // multiple of theta
    std::string status = "ok";
    double theta = std::nan("");
    double mse_lagrange = std::nan("");
    double mse_local = std::nan("");
    double discrepancy_inside = std::nan("");
    double discrepancy_outside = std::nan("");
    double sparsity_lagrange = std::nan("");
    double sparsity_local = std::nan("");

    double discrepancy() const { return std::max(discrepancy_inside, discrepancy_outside); }
    friend bool operator==(const SphereRow&, const SphereRow&) = default;
};

struct SphereReport {
    std::uint64_t seed = 0;
    std::vector<SphereRow> rows;
};

/// Constant-function MSE, largest basis discrepancy over all centers and
/// sparsity ratios, for every (N, R_i, R_o).
inline SphereReport run_sphere_convergence(const ExperimentConfig& cfg) {
    cfg.validate();
    SphereReport rep;
    rep.seed = cfg.seed;
    for (Vertex n : cfg.sizes) {
        PointCloud cloud = fibonacci_sphere(n);
        const Partition part(periodic_known_mask(n, cfg.unknown_fraction));
        SignalData ones;
        ones.known_values = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(part.known().size()));
        const Eigen::VectorXd truth = Eigen::VectorXd::Ones(n);
        double theta = std::nan("");
        for (double ri : cfg.inner_multipliers) {
            std::optional<Graph> g;
            std::string status = "ok";
            try {
                if (std::isnan(theta)) theta = min_pairwise_distance(cloud, Metric::euclidean());
                g.emplace(build_graph(cloud, Metric::euclidean(), ri * theta));
            } catch (const DisconnectedGraphError&) {
                status = "disconnected";
            }
            if (!g) {
                for (double ro : cfg.outer_sweep) {
                    SphereRow row;
                    row.n = n, row.inner = ri, row.outer = ro, row.status = status, row.theta = theta;
                    rep.rows.push_back(row);
                }
                continue;
            }
            const Laplacian lap = normalized_laplacian(*g);
            const BasisMatrix full = compute_basis(lap, part, cfg.solver);
            const double mse_full = mse(quasi_interpolate(full, ones), truth, part.unknown());
            const double sp_full = sparsity_ratio(full);
            for (double ro : cfg.outer_sweep) {
                SphereRow row;
                row.n = n, row.inner = ri, row.outer = ro, row.theta = theta;
                row.mse_lagrange = mse_full;
                row.sparsity_lagrange = sp_full;
                const auto nbhds = known_neighborhoods(*g, part, ro * theta);
                const BasisMatrix local = compute_basis(lap, part, nbhds, cfg.solver);
                row.mse_local = mse(quasi_interpolate(local, ones), truth, part.unknown());
                row.sparsity_local = sparsity_ratio(local);
                row.discrepancy_inside = row.discrepancy_outside = 0.0;
                for (Vertex v : part.known()) {
                    const auto d = basis_discrepancy(full, local, v);
                    row.discrepancy_inside = std::max(row.discrepancy_inside, d.inside);
                    row.discrepancy_outside = std::max(row.discrepancy_outside, d.outside);
                }
                rep.rows.push_back(row);
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Timing
// ---------------------------------------------------------------------------

struct TimingRow {
    Vertex n = 0;
    double t_lagrange = 0.0;
    double t_local = 0.0;
    double t_update = 0.0;
    Eigen::Index affected = 0;
    friend bool operator==(const TimingRow&, const TimingRow&) = default;
};

struct TimingReport {
    std::uint64_t seed = 0;
    std::vector<TimingRow> rows;
};

/// Wall-clock medians for the Lagrange basis, the serial local basis, and
/// one vertex insertion with local refresh. Uses the first inner multiplier
/// and the first outer radius of the config.
inline TimingReport run_timing(const ExperimentConfig& cfg) {
    cfg.validate();
    TimingReport rep;
    rep.seed = cfg.seed;
    const double ri = cfg.inner_multipliers.front();
    const double ro = cfg.outer_sweep.front();
    for (Vertex n : cfg.sizes) {
        PointCloud cloud = fibonacci_sphere(n);
        const Graph g = build_graph(cloud, Metric::euclidean(), ri * min_pairwise_distance(cloud, Metric::euclidean()));
        const double theta = g.theta();
        const Partition part(periodic_known_mask(n, cfg.unknown_fraction));

        // New point: normalized midpoint between a mid-lattice vertex and its closest neighbor.
        const Vertex anchor = n / 2;
        Adjacent closest{-1, std::numeric_limits<double>::infinity()};
        for (const auto& a : g.neighbors(anchor))
            if (a.length < closest.length) closest = a;
        Eigen::VectorXd point = (cloud.points.row(anchor) + cloud.points.row(closest.vertex)).transpose();
        point.normalize();

        std::vector<double> tl, tg, tu;
        TimingRow row;
        row.n = n;
        for (int run = 0; run < cfg.timing_runs; ++run) {
            tg.push_back(seconds_of([&] {
                const Laplacian lap = normalized_laplacian(g);
                (void)compute_basis(lap, part, cfg.solver);
            }));
            BasisMatrix local;
            tl.push_back(seconds_of([&] {
                const Laplacian lap = normalized_laplacian(g);
                local = compute_basis(lap, part, known_neighborhoods(g, part, ro * theta), cfg.solver);
            }));
            InsertOptions opt;
            opt.inner_radius = ri * theta;
            opt.outer_radius = ro * theta;
            opt.solver = cfg.solver;
            tu.push_back(seconds_of([&] {
                const auto res = insert_vertex(g, part, local, point, true, opt);
                row.affected = static_cast<Eigen::Index>(res.delta.affected_centers.size());
            }));
        }
        row.t_lagrange = median(tg);
        row.t_local = median(tl);
        row.t_update = median(tu);
        rep.rows.push_back(row);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Cross-validation on tabular data
// ---------------------------------------------------------------------------

struct TabularDataset {
    Eigen::MatrixXd features;
    std::vector<std::string> feature_names;
    std::vector<std::pair<std::string, Eigen::VectorXd>> targets;

    Vertex rows() const noexcept { return features.rows(); }
};

inline TabularDataset load_energy_dataset(const io::CsvTable& t, const EnergyColumns& cols) {
    TabularDataset ds;
    ds.feature_names = cols.features;
    ds.features.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(cols.features.size()));
    for (std::size_t c = 0; c < cols.features.size(); ++c)
        ds.features.col(static_cast<Eigen::Index>(c)) = io::numeric_column(t, cols.features[c]);
    for (const auto& [name, col] : cols.targets) ds.targets.emplace_back(name, io::numeric_column(t, col));
    if (ds.features.cols() < 2) throw std::invalid_argument("energy dataset needs at least two features");
    if (ds.targets.empty()) throw std::invalid_argument("energy dataset needs at least one target");
    return ds;
}

inline TabularDataset load_energy_dataset(const std::string& path, const EnergyColumns& cols) {
    return load_energy_dataset(io::read_csv(path), cols);
}

/// Features mapped to [0, 1] column-wise; constant columns become 0.
inline Eigen::MatrixXd unit_range(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double lo = x.col(c).minCoeff(), hi = x.col(c).maxCoeff();
        out.col(c) = hi > lo ? Eigen::VectorXd((x.col(c).array() - lo) / (hi - lo)) : Eigen::VectorXd::Zero(x.rows());
    }
    return out;
}

/// Row indices split into `folds` contiguous blocks of a seeded shuffle.
inline std::vector<std::vector<Vertex>> shuffled_folds(Vertex n, int folds, std::uint64_t seed, int repetition) {
    std::vector<Vertex> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(repetition)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<Vertex>> out(static_cast<std::size_t>(folds));
    const auto k = static_cast<std::size_t>(folds);
    const auto base = order.size() / k, extra = order.size() % k;
    std::size_t at = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const auto len = base + (f < extra ? 1 : 0);
        out[f].assign(order.begin() + static_cast<std::ptrdiff_t>(at), order.begin() + static_cast<std::ptrdiff_t>(at + len));
        std::sort(out[f].begin(), out[f].end());
        at += len;
    }
    return out;
}

struct FoldGraph {
    std::string target;
    int repetition = 0;
    int fold = 0;
    double epsilon = std::nan(""); // NaN: no connected graph found
    std::size_t edges = 0;
    std::vector<double> weights;
};

/// The transductive graph of one fold: all rows, weighted l1 metric, rescaled
/// so every vertex has a neighbor within 1, joined below 1 + epsilon for the
/// smallest epsilon on the grid that yields a connected graph. Past the grid,
/// epsilon keeps growing in 0.1 steps.
inline std::optional<Graph> fold_graph(const Eigen::MatrixXd& scaled, const Metric& metric,
                                       const std::vector<double>& epsilon_grid, double* epsilon_out) {
    const Vertex n = scaled.rows();
    double s = 0.0;
    for (Vertex i = 0; i < n; ++i) {
        double nn = std::numeric_limits<double>::infinity();
        for (Vertex j = 0; j < n; ++j)
            if (j != i) nn = std::min(nn, distance(scaled.row(i), scaled.row(j), metric));
        if (nn <= 0.0) throw DuplicatePointError(i, -1);
        s = std::max(s, nn);
    }
    PointCloud cloud;
    cloud.points = scaled;
    for (double eps : epsilon_grid) {
        try {
            Graph g = rescale_to_unit_neighbor(build_graph(cloud, metric, (1.0 + eps) * s));
            *epsilon_out = eps;
            return g;
        } catch (const DisconnectedGraphError&) {
        }
    }
    if (epsilon_grid.empty()) return std::nullopt;
    // Grid exhausted: continue in 0.1 steps starting at the first step past the
    // bottleneck edge of a minimum spanning tree (Prim, dense).
    std::vector<double> key(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    std::vector<bool> done(static_cast<std::size_t>(n), false);
    key[0] = 0.0;
    double bottleneck = 0.0;
    for (Vertex it = 0; it < n; ++it) {
        Vertex u = -1;
        for (Vertex v = 0; v < n; ++v)
            if (!done[v] && (u < 0 || key[v] < key[u])) u = v;
        done[u] = true;
        bottleneck = std::max(bottleneck, key[u]);
        for (Vertex v = 0; v < n; ++v)
            if (!done[v]) key[v] = std::min(key[v], distance(scaled.row(u), scaled.row(v), metric));
    }
    const double last = epsilon_grid.back();
    double eps = last + 0.1 * std::max(1.0, std::ceil((bottleneck / s - 1.0 - last) / 0.1));
    for (int tries = 0; tries < 100; ++tries, eps += 0.1) {
        try {
            Graph g = rescale_to_unit_neighbor(build_graph(cloud, metric, (1.0 + eps) * s));
            *epsilon_out = eps;
            return g;
        } catch (const DisconnectedGraphError&) {
        }
    }
    return std::nullopt;
}

struct CVCell {
    std::string target;
    double outer = 0.0;
    double lagrange_mean = std::nan("");
    double lagrange_std = std::nan("");
    double local_mean = std::nan("");
    double local_std = std::nan("");
    std::vector<double> lagrange_reps; // pooled MSE per repetition
    std::vector<double> local_reps;
    std::vector<std::vector<double>> lagrange_folds; // [rep][fold]
    std::vector<std::vector<double>> local_folds;
};

struct CVReport {
    std::uint64_t seed = 0;
    int folds = 0;
    int repetitions = 0;
    Vertex rows = 0;
    std::vector<CVCell> cells; // ordered by target, then outer radius
    std::vector<FoldGraph> graphs;
};

/// Repeated k-fold CV. In each fold the test rows are the unknown vertices
/// of a graph spanning all rows; feature weights come from the training rows.
/// The Lagrange and local bases of a fold share the same graph and shuffle.
/// Predictions use the full quasi-interpolation sum.
inline CVReport run_energy_cv(const ExperimentConfig& cfg, const TabularDataset& ds) {
    cfg.validate();
    const Vertex n = ds.rows();
    if (n < cfg.folds) throw std::invalid_argument("fewer rows than folds");
    const Eigen::MatrixXd scaled = unit_range(ds.features);

    CVReport rep;
    rep.seed = cfg.seed;
    rep.folds = cfg.folds;
    rep.repetitions = cfg.repetitions;
    rep.rows = n;
    const auto nro = cfg.outer_sweep.size();
    const auto nf = static_cast<std::size_t>(cfg.folds);
    const auto nr = static_cast<std::size_t>(cfg.repetitions);

    for (const auto& [tname, y] : ds.targets) {
        std::vector<CVCell> cells(nro);
        for (std::size_t k = 0; k < nro; ++k) {
            cells[k].target = tname;
            cells[k].outer = cfg.outer_sweep[k];
            cells[k].lagrange_folds.assign(nr, std::vector<double>(nf, std::nan("")));
            cells[k].local_folds.assign(nr, std::vector<double>(nf, std::nan("")));
        }
        for (std::size_t r = 0; r < nr; ++r) {
            const auto folds = shuffled_folds(n, cfg.folds, cfg.seed, static_cast<int>(r));
            double sse_lagrange = 0.0;
            std::vector<double> sse_local(nro, 0.0);
            bool failed = false;
            for (std::size_t f = 0; f < nf; ++f) {
                const auto& test = folds[f];
                std::vector<bool> known(static_cast<std::size_t>(n), true);
                for (Vertex v : test) known[static_cast<std::size_t>(v)] = false;
                const Partition part(known);

                Eigen::MatrixXd xtrain(static_cast<Eigen::Index>(part.known().size()), scaled.cols());
                Eigen::VectorXd ytrain(static_cast<Eigen::Index>(part.known().size()));
                for (std::size_t i = 0; i < part.known().size(); ++i) {
                    xtrain.row(static_cast<Eigen::Index>(i)) = scaled.row(part.known()[i]);
                    ytrain[static_cast<Eigen::Index>(i)] = y[part.known()[i]];
                }
                const auto fi = feature_importance(xtrain, ytrain);
                const Metric metric = Metric::weighted_minkowski(fi.weights, 1.0);

                FoldGraph diag;
                diag.target = tname;
                diag.repetition = static_cast<int>(r);
                diag.fold = static_cast<int>(f);
                diag.weights.assign(fi.weights.data(), fi.weights.data() + fi.weights.size());
                const auto g = fold_graph(scaled, metric, cfg.epsilon_grid, &diag.epsilon);
                if (g) diag.edges = g->edges().size();
                rep.graphs.push_back(diag);
                if (!g) {
                    failed = true;
                    continue;
                }

                const Laplacian lap = normalized_laplacian(*g);
                SignalData data;
                data.known_values = ytrain;
                const auto fold_mse = [&](const BasisMatrix& b, double& sse) {
                    const Eigen::VectorXd pred = quasi_interpolate(b, data);
                    const double m = mse(pred, y, test);
                    sse += m * static_cast<double>(test.size());
                    return m;
                };
                const BasisMatrix full = compute_basis(lap, part, cfg.solver);
                const double m_full = fold_mse(full, sse_lagrange);
                BallSearch search(*g);
                for (std::size_t k = 0; k < nro; ++k) {
                    std::vector<Neighborhood> nbhds;
                    nbhds.reserve(part.known().size());
                    for (Vertex v : part.known()) nbhds.push_back(search.ball(v, cfg.outer_sweep[k], &part));
                    const BasisMatrix local = compute_basis(lap, part, nbhds, cfg.solver);
                    cells[k].lagrange_folds[r][f] = m_full;
                    cells[k].local_folds[r][f] = fold_mse(local, sse_local[k]);
                }
            }
            for (std::size_t k = 0; k < nro; ++k) {
                cells[k].lagrange_reps.push_back(failed ? std::nan("") : sse_lagrange / static_cast<double>(n));
                cells[k].local_reps.push_back(failed ? std::nan("") : sse_local[k] / static_cast<double>(n));
            }
        }
        for (auto& c : cells) {
            c.lagrange_mean = mean(c.lagrange_reps);
            c.lagrange_std = stddev(c.lagrange_reps);
            c.local_mean = mean(c.local_reps);
            c.local_std = stddev(c.local_reps);
            rep.cells.push_back(std::move(c));
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

enum class ReportFormat { csv, json };

inline std::string to_csv(const SphereReport& r) {
    std::string s = "N,R_i_theta,R_o_theta,status,theta,mse_lagrange,mse_local,discrepancy_inside,"
                    "discrepancy_outside,sparsity_lagrange,sparsity_local\n";
    for (const auto& x : r.rows) {
        s += std::to_string(x.n) + "," + io::format_double(x.inner) + "," + io::format_double(x.outer) + "," +
             x.status + "," + io::format_double(x.theta) + "," + io::format_double(x.mse_lagrange) + "," +
             io::format_double(x.mse_local) + "," + io::format_double(x.discrepancy_inside) + "," +
             io::format_double(x.discrepancy_outside) + "," + io::format_double(x.sparsity_lagrange) + "," +
             io::format_double(x.sparsity_local) + "\n";
    }
    return s;
}

inline json to_json(const SphereReport& r) {
    json rows = json::array();
    for (const auto& x : r.rows)
        rows.push_back({{"N", x.n},
                        {"R_i_theta", x.inner},
                        {"R_o_theta", x.outer},
                        {"status", x.status},
                        {"theta", number_or_null(x.theta)},
                        {"mse_lagrange", number_or_null(x.mse_lagrange)},
                        {"mse_local", number_or_null(x.mse_local)},
                        {"discrepancy_inside", number_or_null(x.discrepancy_inside)},
                        {"discrepancy_outside", number_or_null(x.discrepancy_outside)},
                        {"sparsity_lagrange", number_or_null(x.sparsity_lagrange)},
                        {"sparsity_local", number_or_null(x.sparsity_local)}});
    return {{"experiment", "sphere-convergence"}, {"seed", r.seed}, {"rows", rows}};
}

inline SphereReport sphere_from_json(const json& j) {
    SphereReport r;
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& x : j.at("rows")) {
        SphereRow row;
        row.n = x.at("N").get<Vertex>();
        row.inner = x.at("R_i_theta").get<double>();
        row.outer = x.at("R_o_theta").get<double>();
        row.status = x.at("status").get<std::string>();
        row.theta = number_from(x.at("theta"));
        row.mse_lagrange = number_from(x.at("mse_lagrange"));
        row.mse_local = number_from(x.at("mse_local"));
        row.discrepancy_inside = number_from(x.at("discrepancy_inside"));
        row.discrepancy_outside = number_from(x.at("discrepancy_outside"));
        row.sparsity_lagrange = number_from(x.at("sparsity_lagrange"));
        row.sparsity_local = number_from(x.at("sparsity_local"));
        r.rows.push_back(row);
    }
    return r;
}

inline SphereReport sphere_from_csv(const io::CsvTable& t, std::uint64_t seed) {
    SphereReport r;
    r.seed = seed;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        SphereRow row;
        row.n = static_cast<Vertex>(t.number(i, t.column("N")));
        row.inner = t.number(i, t.column("R_i_theta"));
        row.outer = t.number(i, t.column("R_o_theta"));
        row.status = t.rows[i][t.column("status")];
        row.theta = t.number(i, t.column("theta"));
        row.mse_lagrange = t.number(i, t.column("mse_lagrange"));
        row.mse_local = t.number(i, t.column("mse_local"));
        row.discrepancy_inside = t.number(i, t.column("discrepancy_inside"));
        row.discrepancy_outside = t.number(i, t.column("discrepancy_outside"));
        row.sparsity_lagrange = t.number(i, t.column("sparsity_lagrange"));
        row.sparsity_local = t.number(i, t.column("sparsity_local"));
        r.rows.push_back(row);
    }
    return r;
}

inline std::string to_csv(const TimingReport& r) {
    std::string s = "N,t_lagrange,t_local,t_update,affected_centers\n";
    for (const auto& x : r.rows)
        s += std::to_string(x.n) + "," + io::format_double(x.t_lagrange) + "," + io::format_double(x.t_local) + "," +
             io::format_double(x.t_update) + "," + std::to_string(x.affected) + "\n";
    return s;
}

inline json to_json(const TimingReport& r) {
    json rows = json::array();
    for (const auto& x : r.rows)
        rows.push_back({{"N", x.n},
                        {"t_lagrange", x.t_lagrange},
                        {"t_local", x.t_local},
                        {"t_update", x.t_update},
                        {"affected_centers", x.affected}});
    return {{"experiment", "sphere-timing"}, {"seed", r.seed}, {"rows", rows}};
}

inline TimingReport timing_from_json(const json& j) {
    TimingReport r;
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& x : j.at("rows"))
        r.rows.push_back({x.at("N").get<Vertex>(), x.at("t_lagrange").get<double>(), x.at("t_local").get<double>(),
                          x.at("t_update").get<double>(), x.at("affected_centers").get<Eigen::Index>()});
    return r;
}

inline TimingReport timing_from_csv(const io::CsvTable& t, std::uint64_t seed) {
    TimingReport r;
    r.seed = seed;
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        r.rows.push_back({static_cast<Vertex>(t.number(i, t.column("N"))), t.number(i, t.column("t_lagrange")),
                          t.number(i, t.column("t_local")), t.number(i, t.column("t_update")),
                          static_cast<Eigen::Index>(t.number(i, t.column("affected_centers")))});
    return r;
}

inline std::string to_csv(const CVReport& r) {
    std::string s = "target,R_o,lagrange_mean,lagrange_std,local_mean,local_std\n";
    for (const auto& c : r.cells)
        s += c.target + "," + io::format_double(c.outer) + "," + io::format_double(c.lagrange_mean) + "," +
             io::format_double(c.lagrange_std) + "," + io::format_double(c.local_mean) + "," +
             io::format_double(c.local_std) + "\n";
    return s;
}

inline json to_json(const CVReport& r) {
    auto vec = [](const std::vector<double>& v) {
        json a = json::array();
        for (double x : v) a.push_back(number_or_null(x));
        return a;
    };
    auto mat = [&](const std::vector<std::vector<double>>& m) {
        json a = json::array();
        for (const auto& row : m) a.push_back(vec(row));
        return a;
    };
    json cells = json::array();
    for (const auto& c : r.cells)
        cells.push_back({{"target", c.target},
                         {"R_o", c.outer},
                         {"lagrange_mean", number_or_null(c.lagrange_mean)},
                         {"lagrange_std", number_or_null(c.lagrange_std)},
                         {"local_mean", number_or_null(c.local_mean)},
                         {"local_std", number_or_null(c.local_std)},
                         {"lagrange_reps", vec(c.lagrange_reps)},
                         {"local_reps", vec(c.local_reps)},
                         {"lagrange_folds", mat(c.lagrange_folds)},
                         {"local_folds", mat(c.local_folds)}});
    json graphs = json::array();
    for (const auto& g : r.graphs)
        graphs.push_back({{"target", g.target},
                          {"repetition", g.repetition},
                          {"fold", g.fold},
                          {"epsilon", number_or_null(g.epsilon)},
                          {"edges", g.edges},
                          {"weights", g.weights}});
    return {{"experiment", "energy-cv"}, {"seed", r.seed},   {"folds", r.folds}, {"repetitions", r.repetitions},
            {"rows", r.rows},            {"cells", cells},   {"graphs", graphs}};
}

inline CVReport cv_from_json(const json& j) {
    auto vec = [](const json& a) {
        std::vector<double> v;
        for (const auto& x : a) v.push_back(number_from(x));
        return v;
    };
    CVReport r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.folds = j.at("folds").get<int>();
    r.repetitions = j.at("repetitions").get<int>();
    r.rows = j.at("rows").get<Vertex>();
    for (const auto& x : j.at("cells")) {
        CVCell c;
        c.target = x.at("target").get<std::string>();
        c.outer = x.at("R_o").get<double>();
        c.lagrange_mean = number_from(x.at("lagrange_mean"));
        c.lagrange_std = number_from(x.at("lagrange_std"));
        c.local_mean = number_from(x.at("local_mean"));
        c.local_std = number_from(x.at("local_std"));
        c.lagrange_reps = vec(x.at("lagrange_reps"));
        c.local_reps = vec(x.at("local_reps"));
        for (const auto& row : x.at("lagrange_folds")) c.lagrange_folds.push_back(vec(row));
        for (const auto& row : x.at("local_folds")) c.local_folds.push_back(vec(row));
        r.cells.push_back(std::move(c));
    }
    for (const auto& x : j.at("graphs")) {
        FoldGraph g;
        g.target = x.at("target").get<std::string>();
        g.repetition = x.at("repetition").get<int>();
        g.fold = x.at("fold").get<int>();
        g.epsilon = number_from(x.at("epsilon"));
        g.edges = x.at("edges").get<std::size_t>();
        g.weights = x.at("weights").get<std::vector<double>>();
        r.graphs.push_back(std::move(g));
    }
    return r;
}

template <typename Report>
void emit_report(const Report& report, ReportFormat format, const std::string& path) {
    io::write_text(path, format == ReportFormat::csv ? to_csv(report) : to_json(report).dump(2) + "\n");
}

} // namespace loclag::harness
