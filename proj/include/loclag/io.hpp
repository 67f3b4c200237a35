#pragma once

// CSV and JSON persistence for point clouds, graphs, partitions and bases.
//
//   graph:     CSV "i,j,length"     + JSON {n, theta, rho_max, max_degree, edges, hash, scale, metric}
//   basis:     CSV "row,col,value"  + JSON {mode, n, centers, radii, solver, graph_hash}
//   partition: CSV "vertex,known" with known in {0,1}

#include "loclag/basis.hpp"
#include "loclag/dynamic.hpp"
#include "loclag/graph.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace loclag::io {

using nlohmann::json;

/// Shortest decimal form that round-trips exactly.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return {buf, end};
}

inline double parse_double(const std::string& s) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double x = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
    if (b < e && *b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, e, x);
    if (ec != std::errc{} || ptr != e || b == e) throw std::invalid_argument("non-numeric value '" + s + "'");
    return x;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == name) return c;
        throw std::invalid_argument("missing column '" + name + "'");
    }

    bool has_column(const std::string& name) const {
        for (const auto& h : header)
            if (h == name) return true;
        return false;
    }

    double number(std::size_t row, std::size_t col) const {
        try {
            return parse_double(rows[row][col]);
        } catch (const std::invalid_argument&) {
            throw std::invalid_argument("row " + std::to_string(row + 1) + ", column '" + header[col] +
                                        "': non-numeric cell '" + rows[row][col] + "'");
        }
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    }
    return out;
}

inline CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        if (first) {
            t.header = std::move(cells);
            first = false;
            continue;
        }
        if (cells.size() != t.header.size())
            throw std::invalid_argument("CSV row " + std::to_string(t.rows.size() + 1) + " has " +
                                        std::to_string(cells.size()) + " cells, header has " +
                                        std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    if (first) throw std::invalid_argument("CSV input is empty");
    return t;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return read_csv(in);
}

inline std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    return out;
}

inline void write_text(const std::string& path, const std::string& text) {
    auto out = open_for_write(path);
    out << text;
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

inline json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return json::parse(in);
}

// ---------------------------------------------------------------------------
// Point clouds
// ---------------------------------------------------------------------------

struct PointColumns {
    std::vector<std::string> features;    // empty: every column not listed below
    std::optional<std::string> id;
    std::vector<std::string> passthrough; // targets etc., left untouched
};

inline PointCloud point_cloud(const CsvTable& t, const PointColumns& cols) {
    std::vector<std::size_t> fidx;
    if (cols.features.empty()) {
        for (std::size_t c = 0; c < t.header.size(); ++c) {
            const auto& h = t.header[c];
            if (cols.id && h == *cols.id) continue;
            if (std::find(cols.passthrough.begin(), cols.passthrough.end(), h) != cols.passthrough.end()) continue;
            fidx.push_back(c);
        }
    } else {
        for (const auto& f : cols.features) fidx.push_back(t.column(f));
    }
    if (fidx.empty()) throw std::invalid_argument("no feature columns selected");
    PointCloud pc;
    pc.points.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(fidx.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        for (std::size_t c = 0; c < fidx.size(); ++c)
            pc.points(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t.number(r, fidx[c]);
    if (cols.id) {
        const auto ic = t.column(*cols.id);
        for (const auto& row : t.rows) pc.ids.push_back(row[ic]);
    }
    pc.validate();
    return pc;
}

inline Eigen::VectorXd numeric_column(const CsvTable& t, const std::string& name) {
    const auto c = t.column(name);
    Eigen::VectorXd v(static_cast<Eigen::Index>(t.rows.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) v[static_cast<Eigen::Index>(r)] = t.number(r, c);
    return v;
}

// ---------------------------------------------------------------------------
// Metric / graph
// ---------------------------------------------------------------------------

inline json to_json(const Metric& m) {
    if (m.kind == Metric::Kind::euclidean) return {{"kind", "euclidean"}, {"p", 2.0}};
    return {{"kind", "weighted-minkowski"},
            {"p", m.p},
            {"weights", std::vector<double>(m.weights.data(), m.weights.data() + m.weights.size())}};
}

inline Metric metric_from_json(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "euclidean") return Metric::euclidean();
    if (kind != "weighted-minkowski") throw std::invalid_argument("unknown metric kind '" + kind + "'");
    const auto w = j.at("weights").get<std::vector<double>>();
    return Metric::weighted_minkowski(Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())),
                                      j.at("p").get<double>());
}

/// FNV-1a over the canonical edge list; identifies the graph a basis was built on.
inline std::string graph_hash(const Graph& g) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](const std::string& s) {
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 1099511628211ULL;
        }
    };
    mix(std::to_string(g.size()) + "\n");
    for (const auto& e : g.edges())
        mix(std::to_string(e.i) + "," + std::to_string(e.j) + "," + format_double(e.length) + "\n");
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

inline std::string edges_csv(const Graph& g) {
    std::string s = "i,j,length\n";
    for (const auto& e : g.edges())
        s += std::to_string(e.i) + "," + std::to_string(e.j) + "," + format_double(e.length) + "\n";
    return s;
}

inline json graph_sidecar(const Graph& g) {
    json j = {{"n", g.size()},
              {"theta", g.theta()},
              {"rho_max", g.rho_max()},
              {"max_degree", g.max_degree()},
              {"edges", g.edges().size()},
              {"hash", graph_hash(g)}};
    if (g.has_source()) {
        j["metric"] = to_json(g.source().metric);
        j["scale"] = g.source().scale;
    } else {
        j["scale"] = 1.0;
    }
    return j;
}

inline void write_graph(const Graph& g, const std::string& csv_path, const std::string& json_path) {
    write_text(csv_path, edges_csv(g));
    write_text(json_path, graph_sidecar(g).dump(2) + "\n");
}

/// Reads an edge list and sidecar. When `cloud` is given it is attached as
/// the graph's source together with the sidecar's metric and scale.
inline Graph read_graph(const std::string& csv_path, const std::string& json_path,
                        std::optional<PointCloud> cloud = std::nullopt) {
    const json meta = read_json(json_path);
    const CsvTable t = read_csv(csv_path);
    const auto ci = t.column("i"), cj = t.column("j"), cl = t.column("length");
    std::vector<Edge> edges;
    edges.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        edges.push_back({static_cast<Vertex>(t.number(r, ci)), static_cast<Vertex>(t.number(r, cj)), t.number(r, cl)});
    std::optional<Graph::Source> src;
    if (cloud) {
        if (!meta.contains("metric")) throw std::invalid_argument("graph sidecar has no metric; cannot attach points");
        src = Graph::Source{std::move(*cloud), metric_from_json(meta.at("metric")), meta.value("scale", 1.0)};
    }
    return Graph(meta.at("n").get<Vertex>(), std::move(edges), meta.at("theta").get<double>(), std::move(src));
}

// ---------------------------------------------------------------------------
// Partition
// ---------------------------------------------------------------------------

inline std::string partition_csv(const Partition& p) {
    std::string s = "vertex,known\n";
    for (Vertex v = 0; v < p.size(); ++v) s += std::to_string(v) + (p.is_known(v) ? ",1\n" : ",0\n");
    return s;
}

inline Partition read_partition(const std::string& path) {
    const CsvTable t = read_csv(path);
    const auto cv = t.column("vertex"), ck = t.column("known");
    std::vector<bool> mask(t.rows.size(), true);
    std::vector<char> seen(t.rows.size(), 0);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto v = static_cast<std::size_t>(t.number(r, cv));
        if (v >= mask.size() || seen[v]) throw std::invalid_argument("partition vertex ids must be 0..n-1, each once");
        seen[v] = 1;
        mask[v] = t.number(r, ck) != 0.0;
    }
    return Partition(mask);
}

// ---------------------------------------------------------------------------
// Basis
// ---------------------------------------------------------------------------

inline json to_json(const SolverConfig& s) {
    json j = {{"method", to_string(s.method)}, {"tolerance", s.tolerance}};
    j["max_iterations"] = s.max_iterations ? json(*s.max_iterations) : json(nullptr);
    return j;
}

inline SolverConfig solver_from_json(const json& j) {
    SolverConfig s;
    if (j.contains("method")) s.method = parse_solver_method(j.at("method").get<std::string>());
    if (j.contains("tolerance")) s.tolerance = j.at("tolerance").get<double>();
    if (j.contains("max_iterations") && !j.at("max_iterations").is_null())
        s.max_iterations = j.at("max_iterations").get<long>();
    s.validate();
    return s;
}

inline std::string basis_csv(const BasisMatrix& b) {
    std::string s = "row,col,value\n";
    for (Eigen::Index c = 0; c < b.cols(); ++c)
        for (Eigen::SparseVector<double>::InnerIterator it(b.columns[static_cast<std::size_t>(c)]); it; ++it)
            s += std::to_string(it.index()) + "," + std::to_string(c) + "," + format_double(it.value()) + "\n";
    return s;
}

inline json basis_sidecar(const BasisMatrix& b, const std::string& hash) {
    json radii = json::array();
    for (double r : b.radii) radii.push_back(r);
    return {{"mode", to_string(b.mode)}, {"n", b.rows},       {"centers", b.centers},
            {"radii", radii},            {"solver", to_json(b.solver)}, {"graph_hash", hash}};
}

inline void write_basis(const BasisMatrix& b, const std::string& hash, const std::string& csv_path,
                        const std::string& json_path) {
    write_text(csv_path, basis_csv(b));
    write_text(json_path, basis_sidecar(b, hash).dump(2) + "\n");
}

/// Reads a basis. Local supports are recomputed from `graph` when given.
inline BasisMatrix read_basis(const std::string& csv_path, const std::string& json_path,
                              const Graph* graph = nullptr) {
    const json meta = read_json(json_path);
    BasisMatrix b;
    const auto mode = meta.at("mode").get<std::string>();
    if (mode != "lagrange" && mode != "local") throw std::invalid_argument("unknown basis mode '" + mode + "'");
    b.mode = mode == "lagrange" ? BasisMode::lagrange : BasisMode::local;
    b.rows = meta.at("n").get<Vertex>();
    b.centers = meta.at("centers").get<std::vector<Vertex>>();
    b.radii = meta.at("radii").get<std::vector<double>>();
    b.solver = solver_from_json(meta.at("solver"));
    if (graph) {
        if (graph->size() != b.rows) throw std::invalid_argument("basis and graph sizes differ");
        if (meta.contains("graph_hash") && meta.at("graph_hash").get<std::string>() != graph_hash(*graph))
            throw std::invalid_argument("basis was computed on a different graph");
    }

    const CsvTable t = read_csv(csv_path);
    const auto cr = t.column("row"), cc = t.column("col"), cv = t.column("value");
    std::vector<std::vector<std::pair<Vertex, double>>> entries(b.centers.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto col = static_cast<std::size_t>(t.number(r, cc));
        if (col >= entries.size()) throw std::invalid_argument("basis column index out of range");
        entries[col].emplace_back(static_cast<Vertex>(t.number(r, cr)), t.number(r, cv));
    }
    for (auto& e : entries) {
        std::sort(e.begin(), e.end());
        Eigen::SparseVector<double> col(b.rows);
        for (const auto& [row, x] : e) col.insertBack(row) = x;
        b.columns.push_back(std::move(col));
    }
    if (b.mode == BasisMode::local && graph) {
        BallSearch search(*graph);
        for (std::size_t c = 0; c < b.centers.size(); ++c) b.supports.push_back(search.members(b.centers[c], b.radii[c]));
    }
    return b;
}

// ---------------------------------------------------------------------------
// Update deltas and predictions
// ---------------------------------------------------------------------------

inline json to_json(const UpdateDelta& d) {
    json edges = json::array();
    for (const auto& a : d.new_edges) edges.push_back({{"neighbor", a.vertex}, {"length", a.length}});
    return {{"new_vertex", d.new_vertex},
            {"id", d.id},
            {"coordinates", std::vector<double>(d.coordinates.data(), d.coordinates.data() + d.coordinates.size())},
            {"status", d.known ? "known" : "unknown"},
            {"new_edges", edges},
            {"affected_centers", d.affected_centers},
            {"affected_center_count", d.affected_centers.size()},
            {"seconds", d.seconds}};
}

inline std::string predictions_csv(const Graph* g, const Eigen::VectorXd& predicted,
                                   std::span<const Vertex> vertices, const std::optional<Eigen::VectorXd>& truth) {
    std::string s = truth ? "vertex_id,predicted,truth,sq_error\n" : "vertex_id,predicted\n";
    for (Vertex v : vertices) {
        const std::string id = g && g->has_source() ? g->source().cloud.id(v) : std::to_string(v);
        s += id + "," + format_double(predicted[v]);
        if (truth) {
            const double e = predicted[v] - (*truth)[v];
            s += "," + format_double((*truth)[v]) + "," + format_double(e * e);
        }
        s += "\n";
    }
    return s;
}

} // namespace loclag::io
