#pragma once

// Event-driven simulation of the abstract frame model.
//
// Each node i owns a piecewise-linear clock phase theta_i(t). Frames leave on
// every integer crossing, so the occupancy of the elastic buffer at node i fed
// by node j is
//
//   beta_ji(t) = floor(theta_j(t - l_ji)) - floor(theta_i(t)) + lambda_ji.
//
// Node i measures its buffers whenever theta_i = theta0_i + k p and applies the
// resulting PI correction when theta_i = theta0_i + k p + d. Between hold
// events the phase advances at c_i^k + omega_u_i, so every event time follows
// from an exact linear inversion of the active segment.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <queue>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "bittide/errors.hpp"
#include "bittide/graph.hpp"

namespace bittide {

/// One direction of an undirected edge. The elastic buffer lives at `to` and
/// is filled by frames from `from`. `sign` is +1 when `to` is the source of
/// the oriented edge, so that beta - beta0 corresponds to +delta_edge.
struct DirectedLink {
    int from;
    int to;
    int edge;
    int sign;

    friend bool operator==(const DirectedLink&, const DirectedLink&) = default;
};

/// Link 2l buffers at the source of edge l, link 2l + 1 at its target.
inline std::vector<DirectedLink> directed_links(const OrientedGraph& g)
{
    std::vector<DirectedLink> links;
    links.reserve(static_cast<std::size_t>(2 * g.edge_count()));
    for (int l = 0; l < g.edge_count(); ++l) {
        const auto& e = g.edge(l);
        links.push_back({e.target, e.source, l, +1});
        links.push_back({e.source, e.target, l, -1});
    }
    return links;
}

struct AfmScenario {
    OrientedGraph graph;
    std::vector<double> omega_u;  // ticks / second
    std::vector<double> theta0;   // ticks, positive and non-integer
    std::vector<double> omega_m1; // frequency on [0, d / omega_m1]
    std::vector<double> omega_m2; // frequency on [epoch, 0]
    std::vector<std::int64_t> beta0; // frames, per directed link
    std::int64_t beta_max = 128;
    std::vector<double> latency; // seconds, per directed link
    double p = 1000.0;           // local ticks between measurements
    double d = 100.0;            // local ticks from measurement to actuation
    double k_p = 0.0;
    double k_i = 0.0;
    double omega_c = 1.0;
    double omega_min = 0.5;
    double omega_max = 2.0;
    double t_end = 0.0;
    double epoch = -1.0;
    double output_dt = 1.0;
    bool sample_events = true;
    bool record_history = false;

    /// Reference defaults around `omega_u`: theta0 = 0.1, omega_m1 = omega_m2 =
    /// omega_u, beta0 = beta_max / 2, zero latency, epoch at its latest legal value.
    static AfmScenario with_defaults(OrientedGraph g, std::vector<double> omega_u)
    {
        const auto n = omega_u.size();
        AfmScenario sc{std::move(g)};
        sc.omega_u = omega_u;
        sc.theta0.assign(n, 0.1);
        sc.omega_m1 = omega_u;
        sc.omega_m2 = omega_u;
        const auto links = static_cast<std::size_t>(2 * sc.graph.edge_count());
        sc.beta0.assign(links, sc.beta_max / 2);
        sc.latency.assign(links, 0.0);
        sc.epoch = sc.latest_epoch();
        return sc;
    }

    int node_count() const { return graph.node_count(); }
    int link_count() const { return 2 * graph.edge_count(); }
    double max_latency() const
    {
        return latency.empty() ? 0.0 : *std::max_element(latency.begin(), latency.end());
    }
    /// Largest epoch satisfying t_e <= -(l_ji + d / omega_min) on every link.
    double latest_epoch() const { return -(max_latency() + d / omega_min); }

    void validate() const
    {
        const auto n = static_cast<std::size_t>(node_count());
        const auto nl = static_cast<std::size_t>(link_count());
        auto sized = [](const auto& v, std::size_t want, const char* field) {
            if (v.size() != want)
                throw ValidationError(field, "expected " + std::to_string(want) + " entries, got " +
                                                 std::to_string(v.size()));
        };
        auto at = [](const char* field, std::size_t i) {
            return std::string(field) + "[" + std::to_string(i) + "]";
        };
        sized(omega_u, n, "frequencies.omega_u");
        sized(theta0, n, "afm.theta0");
        sized(omega_m1, n, "afm.omega_m1");
        sized(omega_m2, n, "afm.omega_m2");
        sized(beta0, nl, "afm.beta0");
        sized(latency, nl, "afm.latency");

        if (!graph.is_connected())
            throw ValidationError("graph", "graph must be connected");
        if (!(omega_min > 0.0))
            throw ValidationError("afm.omega_min", "omega_min must be positive");
        if (!(omega_max > omega_min))
            throw ValidationError("afm.omega_max", "omega_max must exceed omega_min");
        if (!(p > 0.0))
            throw ValidationError("afm.p", "measurement period must be positive");
        if (!(d >= 0.0))
            throw ValidationError("afm.d", "actuation delay must be nonnegative");
        if (beta_max <= 0 || beta_max % 2 != 0)
            throw ValidationError("afm.beta_max", "buffer capacity must be positive and even");
        if (!(t_end > 0.0))
            throw ValidationError("run.t_end", "horizon must be positive");
        if (!(output_dt > 0.0))
            throw ValidationError("run.output_dt", "output step must be positive");
        if (!std::isfinite(k_p) || !std::isfinite(k_i) || !std::isfinite(omega_c))
            throw ValidationError("controller", "gains must be finite");

        for (std::size_t i = 0; i < n; ++i) {
            const double th = theta0[i];
            if (!(th > 0.0) || std::floor(th) == th || !std::isfinite(th))
                throw ValidationError(at("afm.theta0", i),
                                      "initial phase must be positive and non-integer (theta0 not in Z)");
            if (!(omega_m1[i] > omega_min))
                throw ValidationError(at("afm.omega_m1", i), "initial frequency must exceed omega_min");
            if (!(omega_m2[i] > omega_min))
                throw ValidationError(at("afm.omega_m2", i), "initial frequency must exceed omega_min");
            if (!(omega_u[i] > omega_min && omega_u[i] < omega_max))
                throw ValidationError(at("frequencies.omega_u", i),
                                      "uncorrected frequency must lie in (omega_min, omega_max)");
        }
        for (std::size_t k = 0; k < nl; ++k) {
            if (!(latency[k] >= 0.0))
                throw ValidationError(at("afm.latency", k), "latency must be nonnegative");
            if (beta0[k] < 0 || beta0[k] > beta_max)
                throw ValidationError(at("afm.beta0", k), "initial occupancy must lie in [0, beta_max]");
        }
        if (!std::isfinite(epoch))
            throw ValidationError("afm.epoch", "epoch must be finite");
        for (std::size_t k = 0; k < nl; ++k) {
            if (epoch > -(latency[k] + d / omega_min))
                throw ValidationError("afm.epoch",
                                      "epoch must satisfy t_e <= -(l_ji + d / omega_min) on link " +
                                          std::to_string(k));
        }
    }
};

struct Breakpoint {
    double time;
    double phase;
    double slope;

    friend bool operator==(const Breakpoint&, const Breakpoint&) = default;
};

/// Piecewise-linear clock phase. Segment k covers [bp[k].time, bp[k+1].time);
/// the last segment extends forward until the owner appends a new breakpoint.
class PhaseHistory {
  public:
    PhaseHistory(double time, double phase, double slope) { bp_.push_back({time, phase, slope}); }

    /// Starts a new segment. A breakpoint at the same time as the last one
    /// replaces it (zero-length segment).
    void append(double time, double phase, double slope)
    {
        if (time < bp_.back().time)
            throw Error("PhaseHistory::append: breakpoint precedes the active segment");
        if (!(slope > 0.0))
            throw Error("PhaseHistory::append: slope must be positive");
        if (time == bp_.back().time)
            bp_.back() = {time, phase, slope};
        else
            bp_.push_back({time, phase, slope});
    }

    double phase_at(double t) const
    {
        const auto& s = segment(t);
        return s.phase + s.slope * (t - s.time);
    }

    double slope_at(double t) const { return segment(t).slope; }

    /// Time at which the active segment reaches `target`.
    double next_phase_crossing(double target) const
    {
        const auto& s = bp_.back();
        if (target < s.phase)
            throw TargetInPast("next_phase_crossing: target phase precedes the active segment");
        return s.time + (target - s.phase) / s.slope;
    }

    /// Drops segments that end at or before `t`; the segment covering `t` stays.
    void prune_before(double t)
    {
        while (bp_.size() >= 2 && bp_[1].time <= t)
            bp_.pop_front();
    }

    double earliest_time() const { return bp_.front().time; }
    const Breakpoint& active() const { return bp_.back(); }
    const std::deque<Breakpoint>& breakpoints() const { return bp_; }

  private:
    const Breakpoint& segment(double t) const
    {
        auto it = std::upper_bound(bp_.begin(), bp_.end(), t,
                                   [](double v, const Breakpoint& b) { return v < b.time; });
        if (it == bp_.begin()) {
            std::ostringstream os;
            os << "phase history does not cover t = " << t << " (earliest " << bp_.front().time << ")";
            throw HistoryGap(os.str());
        }
        return *std::prev(it);
    }

    std::deque<Breakpoint> bp_;
};

inline std::int64_t floor_ticks(double phase) { return static_cast<std::int64_t>(std::floor(phase)); }

/// Phase on [epoch, 0] at omega_m2 followed by the omega_m1 segment from t = 0.
inline PhaseHistory initial_history(const AfmScenario& sc, int i)
{
    const auto k = static_cast<std::size_t>(i);
    PhaseHistory h(sc.epoch, sc.theta0[k] + sc.omega_m2[k] * sc.epoch, sc.omega_m2[k]);
    h.append(0.0, sc.theta0[k], sc.omega_m1[k]);
    return h;
}

/// lambda_ji = beta0_ji - floor(theta_j(-l_ji)) + floor(theta_i(0)), so beta_ji(0) = beta0_ji.
inline std::vector<std::int64_t> compute_lambda(const AfmScenario& sc)
{
    const auto links = directed_links(sc.graph);
    std::vector<PhaseHistory> hist;
    for (int i = 0; i < sc.node_count(); ++i)
        hist.push_back(initial_history(sc, i));
    std::vector<std::int64_t> lambda;
    for (std::size_t k = 0; k < links.size(); ++k) {
        const auto& ln = links[k];
        lambda.push_back(sc.beta0[k] -
                         floor_ticks(hist[static_cast<std::size_t>(ln.from)].phase_at(-sc.latency[k])) +
                         floor_ticks(hist[static_cast<std::size_t>(ln.to)].phase_at(0.0)));
    }
    return lambda;
}

inline std::int64_t occupancy(const PhaseHistory& sender, const PhaseHistory& receiver, double latency,
                              std::int64_t lambda, double t)
{
    return floor_ticks(sender.phase_at(t - latency)) - floor_ticks(receiver.phase_at(t)) + lambda;
}

struct PendingCorrection {
    double hold_phase;
    double correction;
};

struct DiscreteControllerState {
    explicit DiscreteControllerState(int n)
        : xi(static_cast<std::size_t>(n), 0.0), k(static_cast<std::size_t>(n), 0),
          pending(static_cast<std::size_t>(n))
    {
    }

    std::vector<double> xi;         // integral of r over local ticks
    std::vector<std::int64_t> k;    // index of the next measurement
    std::vector<std::deque<PendingCorrection>> pending;
};

/// c = k_p r + k_i omega_c xi using the pre-update xi, then xi += p r.
/// Throws Inadmissible when omega_u + c leaves (omega_min, omega_max).
inline double pi_controller_step(DiscreteControllerState& state, int node, double r, const AfmScenario& sc,
                                 double time = std::numeric_limits<double>::quiet_NaN())
{
    const auto i = static_cast<std::size_t>(node);
    const double c = sc.k_p * r + sc.k_i * sc.omega_c * state.xi[i];
    const double freq = sc.omega_u[i] + c;
    if (!(freq > sc.omega_min && freq < sc.omega_max)) {
        std::ostringstream os;
        os << "inadmissible correction at node " << node << " (t = " << time << "): frequency " << freq
           << " outside (" << sc.omega_min << ", " << sc.omega_max << ")";
        throw Inadmissible(os.str(), node, time, freq);
    }
    state.xi[i] += sc.p * r;
    return c;
}

enum class EventKind { Measure, Hold, Overflow, Underflow };

inline const char* to_string(EventKind k)
{
    switch (k) {
    case EventKind::Measure: return "measure";
    case EventKind::Hold: return "hold";
    case EventKind::Overflow: return "overflow";
    case EventKind::Underflow: return "underflow";
    }
    return "?";
}

/// Measure: value = r. Hold: value = c. Overflow/underflow: node is the
/// receiving node, link the directed link, value the occupancy.
struct AfmEvent {
    double time;
    int node;
    EventKind kind;
    double value;
    int link = -1;

    friend bool operator==(const AfmEvent&, const AfmEvent&) = default;
};

struct AfmTrace {
    std::vector<DirectedLink> links;
    std::vector<std::int64_t> lambda;
    std::vector<double> times;
    std::vector<char> on_grid; // 1 for uniform output samples, 0 for event samples
    std::vector<std::vector<double>> omega;
    std::vector<std::vector<std::int64_t>> beta;
    std::vector<AfmEvent> events;
    std::vector<std::vector<Breakpoint>> histories; // filled when record_history is set

    std::size_t size() const { return times.size(); }
    bool overflowed() const
    {
        return std::any_of(events.begin(), events.end(), [](const AfmEvent& e) {
            return e.kind == EventKind::Overflow || e.kind == EventKind::Underflow;
        });
    }
};

inline AfmTrace simulate_afm(const AfmScenario& sc)
{
    sc.validate();
    const int n = sc.node_count();
    const auto nn = static_cast<std::size_t>(n);

    AfmTrace trace;
    trace.links = directed_links(sc.graph);
    trace.lambda = compute_lambda(sc);
    const auto& links = trace.links;

    std::vector<std::vector<std::size_t>> incoming(nn);
    for (std::size_t k = 0; k < links.size(); ++k)
        incoming[static_cast<std::size_t>(links[k].to)].push_back(k);

    std::vector<PhaseHistory> hist;
    for (int i = 0; i < n; ++i)
        hist.push_back(initial_history(sc, i));
    DiscreteControllerState ctrl(n);

    auto link_occupancy = [&](std::size_t k, double t) {
        const auto& ln = links[k];
        return occupancy(hist[static_cast<std::size_t>(ln.from)], hist[static_cast<std::size_t>(ln.to)],
                         sc.latency[k], trace.lambda[k], t);
    };

    std::vector<char> out_of_range(links.size(), 0);
    auto record = [&](double t, bool grid) {
        std::vector<double> w(nn);
        for (std::size_t i = 0; i < nn; ++i)
            w[i] = hist[i].slope_at(t);
        std::vector<std::int64_t> b(links.size());
        for (std::size_t k = 0; k < links.size(); ++k) {
            b[k] = link_occupancy(k, t);
            const bool bad = b[k] < 0 || b[k] > sc.beta_max;
            if (bad && !out_of_range[k]) {
                trace.events.push_back({t, links[k].to, b[k] < 0 ? EventKind::Underflow : EventKind::Overflow,
                                        static_cast<double>(b[k]), static_cast<int>(k)});
            }
            out_of_range[k] = bad;
        }
        trace.times.push_back(t);
        trace.on_grid.push_back(grid ? 1 : 0);
        trace.omega.push_back(std::move(w));
        trace.beta.push_back(std::move(b));
    };

    // Queue key: (time, kind, node) with measurements (0) before holds (1).
    struct Scheduled {
        double time;
        int kind;
        int node;
        double phase;
        bool operator>(const Scheduled& o) const
        {
            return std::tie(time, kind, node) > std::tie(o.time, o.kind, o.node);
        }
    };
    std::priority_queue<Scheduled, std::vector<Scheduled>, std::greater<>> queue;

    auto schedule = [&](int i) {
        const auto k = static_cast<std::size_t>(i);
        const double measure_phase = sc.theta0[k] + static_cast<double>(ctrl.k[k]) * sc.p;
        const auto& pend = ctrl.pending[k];
        const bool hold = !pend.empty() && pend.front().hold_phase < measure_phase;
        const double phase = hold ? pend.front().hold_phase : measure_phase;
        queue.push({hist[k].next_phase_crossing(phase), hold ? 1 : 0, i, phase});
    };
    for (int i = 0; i < n; ++i)
        schedule(i);

    const double horizon = sc.max_latency() + 2.0 * sc.d / sc.omega_min;
    const auto grid_count = static_cast<std::int64_t>(std::floor(sc.t_end / sc.output_dt + 1e-9));
    std::int64_t next_grid = 0;
    auto grid_time = [&](std::int64_t g) { return static_cast<double>(g) * sc.output_dt; };
    std::size_t processed = 0;

    while (!queue.empty() && queue.top().time <= sc.t_end) {
        const Scheduled ev = queue.top();
        queue.pop();
        while (next_grid <= grid_count && grid_time(next_grid) < ev.time)
            record(grid_time(next_grid++), true);

        const auto i = static_cast<std::size_t>(ev.node);
        if (ev.kind == 0) {
            double r = 0.0;
            for (std::size_t k : incoming[i])
                r += static_cast<double>(link_occupancy(k, ev.time) - sc.beta0[k]);
            const double c = pi_controller_step(ctrl, ev.node, r, sc, ev.time);
            ctrl.pending[i].push_back({ev.phase + sc.d, c});
            ++ctrl.k[i];
            trace.events.push_back({ev.time, ev.node, EventKind::Measure, r});
        } else {
            const auto pc = ctrl.pending[i].front();
            ctrl.pending[i].pop_front();
            hist[i].append(ev.time, pc.hold_phase, sc.omega_u[i] + pc.correction);
            trace.events.push_back({ev.time, ev.node, EventKind::Hold, pc.correction});
        }
        if (sc.sample_events)
            record(ev.time, false);
        schedule(ev.node);

        if (!sc.record_history && ++processed % 64 == 0) {
            for (auto& h : hist)
                h.prune_before(ev.time - horizon);
        }
    }
    while (next_grid <= grid_count)
        record(grid_time(next_grid++), true);

    if (sc.record_history) {
        for (const auto& h : hist)
            trace.histories.emplace_back(h.breakpoints().begin(), h.breakpoints().end());
    }
    return trace;
}

} // namespace bittide
