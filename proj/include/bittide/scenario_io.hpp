#pragma once

// Scenario documents (JSON), trace tables (CSV), AFM/ODE comparison, reports.
//
// Scenario layout:
//
//   graph:       {"generator": "complete"|"path", "n": N}
//                {"generator": "mesh", "rows": R, "cols": C}
//                {"n": N, "edges": [[s, t], ...]}
//   frequencies: {"omega_u": [..]}
//                {"perturbation": {"i", "j", "alpha", "base"}}
//                {"random": {"base", "spread"}}         (uses run.seed)
//   controller:  {"k_p", "k_i", "omega_c" = 1}
//   afm:         {"p" = 1000, "d" = 100, "latency" = 0, "beta_max" = 128,
//                 "beta0" = beta_max / 2, "theta0" = 0.1,
//                 "omega_m1" = omega_u, "omega_m2" = omega_u,
//                 "omega_min" = 0.5, "omega_max" = 2, "epoch" = latest legal}
//   run:         {"t_end", "output_dt" = t_end / 1000, "ode_dt" (auto),
//                 "seed" = 0, "sample_events" = true}
//
// Per-node and per-link entries accept a scalar (broadcast) or a list.

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "bittide/afm.hpp"
#include "bittide/analysis.hpp"
#include "bittide/errors.hpp"
#include "bittide/graph.hpp"
#include "bittide/ode_model.hpp"

namespace bittide {

using json = nlohmann::json;

struct RunConfig {
    double t_end = 0.0;      // 0: not given (analysis-only scenarios)
    double output_dt = 0.0;
    double ode_dt = 0.0;     // 0: default_time_step
    std::uint64_t seed = 0;
    bool sample_events = true;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct Scenario {
    AfmScenario afm;
    Gains gains;
    RunConfig run;

    const OrientedGraph& graph() const { return afm.graph; }
    Vector omega_u() const { return Eigen::Map<const Vector>(afm.omega_u.data(), static_cast<Eigen::Index>(afm.omega_u.size())); }

    friend bool operator==(const Scenario& x, const Scenario& y)
    {
        const auto& a = x.afm;
        const auto& b = y.afm;
        return a.graph == b.graph && a.omega_u == b.omega_u && a.theta0 == b.theta0 &&
               a.omega_m1 == b.omega_m1 && a.omega_m2 == b.omega_m2 && a.beta0 == b.beta0 &&
               a.beta_max == b.beta_max && a.latency == b.latency && a.p == b.p && a.d == b.d &&
               a.k_p == b.k_p && a.k_i == b.k_i && a.omega_c == b.omega_c && a.omega_min == b.omega_min &&
               a.omega_max == b.omega_max && a.t_end == b.t_end && a.epoch == b.epoch &&
               a.output_dt == b.output_dt && a.sample_events == b.sample_events &&
               x.gains.k_p == y.gains.k_p && x.gains.k_i == y.gains.k_i &&
               x.gains.omega_c == y.gains.omega_c && x.run == y.run;
    }
};

namespace detail {

inline const json& require(const json& node, const std::string& key, const std::string& path)
{
    if (!node.is_object() || !node.contains(key))
        throw MissingField(path + (path.empty() ? "" : ".") + key + ": required field is missing");
    return node.at(key);
}

inline double number(const json& v, const std::string& path)
{
    if (!v.is_number())
        throw ValidationError(path, "expected a number");
    return v.get<double>();
}

inline std::int64_t integer(const json& v, const std::string& path)
{
    if (v.is_number_integer())
        return v.get<std::int64_t>();
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::floor(d) == d && std::abs(d) < 9e15)
            return static_cast<std::int64_t>(d);
    }
    throw ValidationError(path, "expected an integer");
}

inline double number_or(const json& node, const std::string& key, double fallback, const std::string& path)
{
    if (!node.is_object() || !node.contains(key))
        return fallback;
    return number(node.at(key), path + "." + key);
}

/// Scalar broadcast or an exact-length list.
inline std::vector<double> per_entry(const json& v, std::size_t count, const std::string& path)
{
    if (v.is_number())
        return std::vector<double>(count, v.get<double>());
    if (!v.is_array())
        throw ValidationError(path, "expected a number or a list of numbers");
    if (v.size() != count)
        throw ValidationError(path, "expected " + std::to_string(count) + " entries, got " +
                                        std::to_string(v.size()));
    std::vector<double> out;
    for (std::size_t k = 0; k < v.size(); ++k)
        out.push_back(number(v[k], path + "[" + std::to_string(k) + "]"));
    return out;
}

inline OrientedGraph parse_graph(const json& g)
{
    try {
        if (g.contains("generator")) {
            const auto kind = g.at("generator").get<std::string>();
            if (kind == "complete")
                return graphs::complete(static_cast<int>(integer(require(g, "n", "graph"), "graph.n")));
            if (kind == "path")
                return graphs::path(static_cast<int>(integer(require(g, "n", "graph"), "graph.n")));
            if (kind == "mesh")
                return graphs::mesh(static_cast<int>(integer(require(g, "rows", "graph"), "graph.rows")),
                                    static_cast<int>(integer(require(g, "cols", "graph"), "graph.cols")));
            throw ValidationError("graph.generator", "unknown generator '" + kind + "'");
        }
        const int n = static_cast<int>(integer(require(g, "n", "graph"), "graph.n"));
        const auto& list = require(g, "edges", "graph");
        if (!list.is_array())
            throw ValidationError("graph.edges", "expected a list of [source, target] pairs");
        std::vector<Edge> edges;
        for (std::size_t l = 0; l < list.size(); ++l) {
            const std::string path = "graph.edges[" + std::to_string(l) + "]";
            if (!list[l].is_array() || list[l].size() != 2)
                throw ValidationError(path, "expected a [source, target] pair");
            edges.push_back({static_cast<int>(integer(list[l][0], path)),
                             static_cast<int>(integer(list[l][1], path))});
        }
        return {n, std::move(edges)};
    } catch (const InvalidGraph& e) {
        throw ValidationError("graph", e.what());
    } catch (const json::exception& e) {
        throw ValidationError("graph", e.what());
    }
}

inline std::vector<double> parse_frequencies(const json& f, int n, std::uint64_t seed)
{
    const auto count = static_cast<std::size_t>(n);
    if (f.contains("omega_u"))
        return per_entry(f.at("omega_u"), count, "frequencies.omega_u");
    if (f.contains("perturbation")) {
        const auto& p = f.at("perturbation");
        const auto i = integer(require(p, "i", "frequencies.perturbation"), "frequencies.perturbation.i");
        const auto j = integer(require(p, "j", "frequencies.perturbation"), "frequencies.perturbation.j");
        const double alpha = number(require(p, "alpha", "frequencies.perturbation"), "frequencies.perturbation.alpha");
        const double base = number_or(p, "base", 1.0, "frequencies.perturbation");
        if (i < 0 || j < 0 || i >= n || j >= n || i == j)
            throw ValidationError("frequencies.perturbation", "i and j must be distinct valid node indices");
        std::vector<double> w(count, base);
        w[static_cast<std::size_t>(i)] += alpha;
        w[static_cast<std::size_t>(j)] -= alpha;
        return w;
    }
    if (f.contains("random")) {
        const auto& r = f.at("random");
        const double base = number_or(r, "base", 1.0, "frequencies.random");
        const double spread = number(require(r, "spread", "frequencies.random"), "frequencies.random.spread");
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> dist(-spread, spread);
        std::vector<double> w(count);
        for (auto& x : w)
            x = base + dist(rng);
        return w;
    }
    throw MissingField("frequencies: one of omega_u, perturbation or random is required");
}

} // namespace detail

/// Builds a validated scenario from a parsed document.
inline Scenario scenario_from_json(const json& doc)
{
    using namespace detail;
    if (!doc.is_object())
        throw ParseError("scenario document must be an object");

    const json empty = json::object();
    const auto& run_node = doc.contains("run") ? doc.at("run") : empty;
    RunConfig run;
    run.t_end = number_or(run_node, "t_end", 0.0, "run");
    run.output_dt = number_or(run_node, "output_dt", run.t_end > 0 ? run.t_end / 1000.0 : 0.0, "run");
    run.ode_dt = number_or(run_node, "ode_dt", 0.0, "run");
    if (run_node.contains("seed"))
        run.seed = static_cast<std::uint64_t>(integer(run_node.at("seed"), "run.seed"));
    if (run_node.contains("sample_events")) {
        if (!run_node.at("sample_events").is_boolean())
            throw ValidationError("run.sample_events", "expected true or false");
        run.sample_events = run_node.at("sample_events").get<bool>();
    }
    if (run.t_end < 0.0)
        throw ValidationError("run.t_end", "horizon must be positive");
    if (run.ode_dt < 0.0)
        throw ValidationError("run.ode_dt", "integration step must be positive");

    OrientedGraph graph = parse_graph(require(doc, "graph", ""));
    if (!graph.is_connected())
        throw ValidationError("graph", "graph must be connected");
    const int n = graph.node_count();
    const auto nodes = static_cast<std::size_t>(n);
    const auto omega_u = parse_frequencies(require(doc, "frequencies", ""), n, run.seed);

    const auto& ctrl = require(doc, "controller", "");
    Gains gains;
    gains.k_p = number(require(ctrl, "k_p", "controller"), "controller.k_p");
    gains.k_i = number(require(ctrl, "k_i", "controller"), "controller.k_i");
    gains.omega_c = number_or(ctrl, "omega_c", 1.0, "controller");
    gains.validate();

    AfmScenario sc = AfmScenario::with_defaults(std::move(graph), omega_u);
    const auto links = static_cast<std::size_t>(sc.link_count());
    const auto& afm = doc.contains("afm") ? doc.at("afm") : empty;
    sc.p = number_or(afm, "p", sc.p, "afm");
    sc.d = number_or(afm, "d", sc.d, "afm");
    sc.omega_min = number_or(afm, "omega_min", sc.omega_min, "afm");
    sc.omega_max = number_or(afm, "omega_max", sc.omega_max, "afm");
    if (afm.contains("beta_max"))
        sc.beta_max = integer(afm.at("beta_max"), "afm.beta_max");
    if (afm.contains("latency"))
        sc.latency = per_entry(afm.at("latency"), links, "afm.latency");
    if (afm.contains("theta0"))
        sc.theta0 = per_entry(afm.at("theta0"), nodes, "afm.theta0");
    for (auto [key, target] : {std::pair{"omega_m1", &sc.omega_m1}, std::pair{"omega_m2", &sc.omega_m2}}) {
        if (!afm.contains(key))
            continue;
        const auto& v = afm.at(key);
        if (v.is_string() && v.get<std::string>() == "omega_u")
            *target = omega_u;
        else
            *target = per_entry(v, nodes, std::string("afm.") + key);
    }
    if (afm.contains("beta0")) {
        sc.beta0.clear();
        const auto vals = per_entry(afm.at("beta0"), links, "afm.beta0");
        for (std::size_t k = 0; k < vals.size(); ++k)
            sc.beta0.push_back(integer(json(vals[k]), "afm.beta0[" + std::to_string(k) + "]"));
    } else {
        sc.beta0.assign(links, sc.beta_max / 2);
    }
    sc.epoch = afm.contains("epoch") ? number(afm.at("epoch"), "afm.epoch") : sc.latest_epoch();
    sc.k_p = gains.k_p;
    sc.k_i = gains.k_i;
    sc.omega_c = gains.omega_c;
    sc.t_end = run.t_end;
    sc.output_dt = run.output_dt > 0 ? run.output_dt : 1.0;
    sc.sample_events = run.sample_events;

    // A missing horizon is legal for analysis-only scenarios; check the rest.
    AfmScenario probe = sc;
    if (probe.t_end <= 0.0)
        probe.t_end = 1.0;
    probe.validate();
    return {std::move(sc), gains, run};
}

/// Canonical document: every field explicit, graph as an edge list.
inline json scenario_to_json(const Scenario& s)
{
    const auto& sc = s.afm;
    json edges = json::array();
    for (const auto& e : sc.graph.edges())
        edges.push_back({e.source, e.target});
    json doc;
    doc["graph"] = {{"n", sc.graph.node_count()}, {"edges", edges}};
    doc["frequencies"] = {{"omega_u", sc.omega_u}};
    doc["controller"] = {{"k_p", s.gains.k_p}, {"k_i", s.gains.k_i}, {"omega_c", s.gains.omega_c}};
    doc["afm"] = {{"p", sc.p},
                  {"d", sc.d},
                  {"latency", sc.latency},
                  {"beta_max", sc.beta_max},
                  {"beta0", sc.beta0},
                  {"theta0", sc.theta0},
                  {"omega_m1", sc.omega_m1},
                  {"omega_m2", sc.omega_m2},
                  {"omega_min", sc.omega_min},
                  {"omega_max", sc.omega_max},
                  {"epoch", sc.epoch}};
    doc["run"] = {{"t_end", s.run.t_end},
                  {"output_dt", s.run.output_dt},
                  {"ode_dt", s.run.ode_dt},
                  {"seed", s.run.seed},
                  {"sample_events", s.run.sample_events}};
    return doc;
}

/// Applies `path=value` onto the document; `path` is dot-separated and may
/// index arrays numerically. `value` is parsed as JSON, falling back to a string.
inline void apply_override(json& doc, std::string_view assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0)
        throw ValidationError(std::string(assignment), "override must look like key=value");
    const std::string path(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded())
        value = text;

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty())
            throw ValidationError(path, "empty path segment in override");
        json* child = nullptr;
        if (node->is_array()) {
            std::size_t idx = 0;
            const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), idx);
            if (ec != std::errc() || ptr != key.data() + key.size() || idx >= node->size())
                throw ValidationError(path, "array index '" + key + "' is invalid");
            child = &(*node)[idx];
        } else {
            if (!node->is_object())
                *node = json::object();
            child = &(*node)[key];
        }
        if (dot == std::string::npos) {
            *child = std::move(value);
            return;
        }
        node = child;
        start = dot + 1;
    }
}

inline json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open '" + path + "'");
    try {
        return json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides = {})
{
    json doc = read_json_file(path);
    for (const auto& o : overrides)
        apply_override(doc, o);
    try {
        return scenario_from_json(doc);
    } catch (const json::exception& e) {
        throw ValidationError(path, e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write '" + path + "'");
    out << text;
    if (!out)
        throw IoError("write to '" + path + "' failed");
}

inline void save_scenario(const Scenario& s, const std::string& path)
{
    write_text_file(path, scenario_to_json(s).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Trace tables

struct TraceTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    friend bool operator==(const TraceTable&, const TraceTable&) = default;
};

inline TraceTable to_table(const OdeTrace& trace, int n, int m)
{
    TraceTable t;
    t.header.emplace_back("t");
    for (int i = 0; i < n; ++i)
        t.header.push_back("omega_" + std::to_string(i));
    for (int l = 0; l < m; ++l)
        t.header.push_back("delta_edge" + std::to_string(l));
    for (std::size_t k = 0; k < trace.size(); ++k) {
        std::vector<double> row{trace.times[k]};
        row.insert(row.end(), trace.omega[k].data(), trace.omega[k].data() + trace.omega[k].size());
        row.insert(row.end(), trace.delta[k].data(), trace.delta[k].data() + trace.delta[k].size());
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline TraceTable to_table(const AfmTrace& trace, int n)
{
    TraceTable t;
    t.header.emplace_back("t");
    for (int i = 0; i < n; ++i)
        t.header.push_back("omega_" + std::to_string(i));
    for (std::size_t k = 0; k < trace.links.size(); ++k)
        t.header.push_back("beta_link" + std::to_string(k));
    for (std::size_t k = 0; k < trace.size(); ++k) {
        std::vector<double> row{trace.times[k]};
        row.insert(row.end(), trace.omega[k].begin(), trace.omega[k].end());
        for (auto b : trace.beta[k])
            row.push_back(static_cast<double>(b));
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline std::string table_to_csv(const TraceTable& t)
{
    std::string out;
    for (std::size_t c = 0; c < t.header.size(); ++c)
        out += (c ? "," : "") + t.header[c];
    out += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c)
                out += ',';
            out += format_double(row[c]);
        }
        out += '\n';
    }
    return out;
}

inline TraceTable table_from_csv(std::string_view text, const std::string& origin = "<memory>")
{
    TraceTable t;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    auto next_line = [&](std::string_view& line) {
        if (pos >= text.size())
            return false;
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        pos = end + 1;
        ++line_no;
        return true;
    };
    auto split = [](std::string_view line) {
        std::vector<std::string_view> cells;
        std::size_t s = 0;
        while (true) {
            const auto c = line.find(',', s);
            cells.push_back(line.substr(s, c == std::string_view::npos ? std::string_view::npos : c - s));
            if (c == std::string_view::npos)
                return cells;
            s = c + 1;
        }
    };

    std::string_view line;
    if (!next_line(line) || line.empty())
        throw ParseError(origin + ": missing header row");
    for (auto cell : split(line))
        t.header.emplace_back(cell);
    while (next_line(line)) {
        if (line.empty())
            continue;
        const auto cells = split(line);
        if (cells.size() != t.header.size())
            throw ParseError(origin + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(t.header.size()) + " columns");
        std::vector<double> row;
        for (auto cell : cells) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size())
                throw ParseError(origin + ":" + std::to_string(line_no) + ": bad number '" +
                                 std::string(cell) + "'");
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline void write_trace(const TraceTable& t, const std::string& path) { write_text_file(path, table_to_csv(t)); }

inline TraceTable read_trace(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return table_from_csv(ss.str(), path);
}

inline std::string event_log_csv(const std::vector<AfmEvent>& events)
{
    std::string out = "time,node,kind,value\n";
    for (const auto& e : events)
        out += format_double(e.time) + "," + std::to_string(e.node) + "," + to_string(e.kind) + "," +
               format_double(e.value) + "\n";
    return out;
}

inline void write_event_log(const std::vector<AfmEvent>& events, const std::string& path)
{
    write_text_file(path, event_log_csv(events));
}

// ---------------------------------------------------------------------------
// AFM / ODE comparison

struct ComparisonThresholds {
    double occupancy = 2.0; // frames
    double frequency = std::numeric_limits<double>::infinity();
};

struct ComparisonReport {
    std::vector<double> max_freq_dev;  // per node
    std::vector<double> max_freq_time;
    std::vector<double> max_occ_dev;   // per directed link, |beta - (beta0 + sign * delta)|
    std::vector<double> max_occ_time;
    std::vector<double> final_freq_dev; // at the last compared sample
    std::vector<double> final_occ_dev;
    double max_freq = 0.0;
    double max_occ = 0.0;
    std::size_t samples = 0;
    ComparisonThresholds thresholds;
    bool pass = false;
};

/// Compares the AFM output grid with the ODE trace linearly interpolated onto it.
inline ComparisonReport compare_traces(const AfmTrace& afm, const OdeTrace& ode,
                                       const std::vector<std::int64_t>& beta0,
                                       ComparisonThresholds thresholds = {})
{
    if (ode.size() == 0 || afm.size() == 0)
        throw GridMismatch("compare_traces: empty trace");
    if (beta0.size() != afm.links.size())
        throw DimensionMismatch("compare_traces: beta0 does not match the link count");
    const double lo = ode.times.front();
    const double hi = ode.times.back();
    const auto n = afm.omega.front().size();
    const auto nl = afm.links.size();

    ComparisonReport rep;
    rep.thresholds = thresholds;
    rep.max_freq_dev.assign(n, 0.0);
    rep.max_freq_time.assign(n, 0.0);
    rep.max_occ_dev.assign(nl, 0.0);
    rep.max_occ_time.assign(nl, 0.0);
    rep.final_freq_dev.assign(n, 0.0);
    rep.final_occ_dev.assign(nl, 0.0);

    const double slack = 1e-9 * std::max(1.0, std::abs(hi));
    for (std::size_t s = 0; s < afm.size(); ++s) {
        const double t = afm.times[s];
        if (!afm.on_grid[s] || t < lo - slack || t > hi + slack)
            continue;
        auto it = std::lower_bound(ode.times.begin(), ode.times.end(), t);
        std::size_t k1 = static_cast<std::size_t>(it - ode.times.begin());
        if (k1 >= ode.size())
            k1 = ode.size() - 1;
        const std::size_t k0 = k1 == 0 ? 0 : k1 - 1;
        double w = 0.0;
        if (k1 != k0 && ode.times[k1] > ode.times[k0])
            w = std::clamp((t - ode.times[k0]) / (ode.times[k1] - ode.times[k0]), 0.0, 1.0);
        else
            w = 1.0;
        const Vector omega = (1.0 - w) * ode.omega[k0] + w * ode.omega[k1];
        const Vector delta = (1.0 - w) * ode.delta[k0] + w * ode.delta[k1];

        for (std::size_t i = 0; i < n; ++i) {
            const double dev = std::abs(afm.omega[s][i] - omega(static_cast<Eigen::Index>(i)));
            if (dev > rep.max_freq_dev[i]) {
                rep.max_freq_dev[i] = dev;
                rep.max_freq_time[i] = t;
            }
            rep.final_freq_dev[i] = dev;
        }
        for (std::size_t k = 0; k < nl; ++k) {
            const auto& ln = afm.links[k];
            const double predicted = static_cast<double>(beta0[k]) + ln.sign * delta(ln.edge);
            const double dev = std::abs(static_cast<double>(afm.beta[s][k]) - predicted);
            if (dev > rep.max_occ_dev[k]) {
                rep.max_occ_dev[k] = dev;
                rep.max_occ_time[k] = t;
            }
            rep.final_occ_dev[k] = dev;
        }
        ++rep.samples;
    }
    if (rep.samples == 0)
        throw GridMismatch("compare_traces: AFM output grid does not overlap the ODE window");
    for (double v : rep.max_freq_dev)
        rep.max_freq = std::max(rep.max_freq, v);
    for (double v : rep.max_occ_dev)
        rep.max_occ = std::max(rep.max_occ, v);
    rep.pass = rep.max_occ <= thresholds.occupancy && rep.max_freq <= thresholds.frequency;
    return rep;
}

// ---------------------------------------------------------------------------
// Reports

struct ReportBundle {
    std::string title;
    std::vector<std::pair<std::string, PerformanceReport>> performance;
    std::vector<std::pair<std::string, EmpiricalNorms>> empirical; // matched to `performance` by name
    std::vector<std::pair<std::string, ComparisonReport>> comparisons;
    std::vector<std::pair<std::string, LyapunovCertificate>> certificates;
    std::vector<std::pair<std::string, double>> values;

    bool empty() const
    {
        return performance.empty() && empirical.empty() && comparisons.empty() && certificates.empty() &&
               values.empty();
    }
};

inline double percent_gap(double empirical, double predicted)
{
    return predicted != 0.0 ? 100.0 * (empirical - predicted) / predicted : 0.0;
}

inline json report_json(const ReportBundle& b)
{
    json doc = json::object();
    if (!b.title.empty())
        doc["title"] = b.title;
    for (const auto& [name, p] : b.performance) {
        doc["performance"][name] = {{"freq_dev_norm_sq", p.freq_dev_norm_sq},
                                    {"occupancy_norm_sq", p.occupancy_norm_sq},
                                    {"quadratic_form", p.quadratic_form},
                                    {"a", p.a},
                                    {"b", p.b}};
    }
    for (const auto& [name, e] : b.empirical) {
        json entry = {{"freq_dev_norm_sq", e.freq_dev_norm_sq},
                      {"occupancy_norm_sq", e.occupancy_norm_sq},
                      {"tail_estimate", e.tail_estimate},
                      {"insufficient_horizon", e.insufficient_horizon}};
        for (const auto& [pname, p] : b.performance) {
            if (pname == name) {
                entry["freq_gap_percent"] = percent_gap(e.freq_dev_norm_sq, p.freq_dev_norm_sq);
                entry["occupancy_gap_percent"] = percent_gap(e.occupancy_norm_sq, p.occupancy_norm_sq);
            }
        }
        doc["empirical"][name] = entry;
    }
    for (const auto& [name, c] : b.comparisons) {
        doc["comparison"][name] = {{"max_freq_dev", c.max_freq},
                                   {"max_occ_dev", c.max_occ},
                                   {"per_node_max_freq_dev", c.max_freq_dev},
                                   {"per_node_max_freq_time", c.max_freq_time},
                                   {"per_link_max_occ_dev", c.max_occ_dev},
                                   {"per_link_max_occ_time", c.max_occ_time},
                                   {"final_freq_dev", c.final_freq_dev},
                                   {"final_occ_dev", c.final_occ_dev},
                                   {"samples", c.samples},
                                   {"occupancy_threshold", c.thresholds.occupancy},
                                   {"pass", c.pass}};
        if (std::isfinite(c.thresholds.frequency))
            doc["comparison"][name]["frequency_threshold"] = c.thresholds.frequency;
    }
    for (const auto& [name, c] : b.certificates) {
        doc["lyapunov"][name] = {{"residual1", c.residual1},       {"residual2", c.residual2},
                                 {"residual_sum", c.residual_sum}, {"relative1", c.relative1()},
                                 {"relative2", c.relative2()},     {"relative_sum", c.relative_sum()},
                                 {"min_eig_x1", c.min_eig_x1},     {"min_eig_x2", c.min_eig_x2},
                                 {"min_eig_schur", c.min_eig_schur}};
    }
    for (const auto& [name, v] : b.values)
        doc["values"][name] = v;
    return doc;
}

inline std::string report_text(const ReportBundle& b)
{
    std::ostringstream os;
    os << std::setprecision(4); // summary precision; the structured file keeps every digit
    if (!b.title.empty())
        os << b.title << "\n";
    if (b.empty()) {
        os << "(no results)\n";
        return os.str();
    }
    for (const auto& [name, p] : b.performance) {
        os << "[performance " << name << "]\n"
           << "  a = " << p.a << ", b = " << p.b << "\n"
           << "  omega_u^T L^+ omega_u = " << p.quadratic_form << "\n"
           << "  predicted |omega - omega_ss|^2 = " << p.freq_dev_norm_sq << "\n"
           << "  predicted |delta|^2 = " << p.occupancy_norm_sq << "\n";
    }
    for (const auto& [name, e] : b.empirical) {
        os << "[empirical " << name << "]\n"
           << "  |omega - omega_ss|^2 = " << e.freq_dev_norm_sq;
        for (const auto& [pname, p] : b.performance)
            if (pname == name)
                os << " (" << std::showpos << percent_gap(e.freq_dev_norm_sq, p.freq_dev_norm_sq)
                   << std::noshowpos << "% vs predicted)";
        os << "\n  |delta|^2 = " << e.occupancy_norm_sq;
        for (const auto& [pname, p] : b.performance)
            if (pname == name)
                os << " (" << std::showpos << percent_gap(e.occupancy_norm_sq, p.occupancy_norm_sq)
                   << std::noshowpos << "% vs predicted)";
        os << "\n  tail estimate = " << e.tail_estimate
           << (e.insufficient_horizon ? "  WARNING: insufficient horizon" : "") << "\n";
    }
    for (const auto& [name, c] : b.comparisons) {
        os << "[comparison " << name << "]\n"
           << "  samples = " << c.samples << "\n"
           << "  max |omega_afm - omega_ode| = " << c.max_freq << "\n"
           << "  max |beta_afm - (beta0 + delta)| = " << c.max_occ << " frames\n"
           << "  result: " << (c.pass ? "PASS" : "FAIL") << " (occupancy threshold " << c.thresholds.occupancy
           << " frames)\n";
    }
    for (const auto& [name, c] : b.certificates) {
        os << "[lyapunov " << name << "]\n"
           << "  relative residual X1 = " << c.relative1() << "\n"
           << "  relative residual X2 = " << c.relative2() << "\n"
           << "  relative residual X1+X2 = " << c.relative_sum() << "\n"
           << "  min eig X1 = " << c.min_eig_x1 << ", X2 = " << c.min_eig_x2
           << ", Schur complement = " << c.min_eig_schur << "\n";
    }
    for (const auto& [name, v] : b.values)
        os << name << " = " << v << "\n";
    return os.str();
}

inline void emit_report(const ReportBundle& b, const std::string& text_path, const std::string& json_path)
{
    write_text_file(text_path, report_text(b));
    write_text_file(json_path, report_json(b).dump(2) + "\n");
}

} // namespace bittide
