#pragma once

// Command-line front end. Exit codes: 0 success, 1 validation, 2 runtime
// (inadmissible correction, buffer overflow, failed sweep entries), 3 I/O.

#include "CLI11.hpp"

#include <atomic>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bittide/afm.hpp"
#include "bittide/analysis.hpp"
#include "bittide/graph.hpp"
#include "bittide/ode_model.hpp"
#include "bittide/scenario_io.hpp"

namespace bittide::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2, kIo = 3 };

struct CliConfig {
    std::string subcommand;
    std::string scenario;
    std::string out_dir = ".";
    std::vector<std::string> overrides;
    int verbosity = 0;
};

namespace detail {

inline std::string join(const std::string& dir, const std::string& name)
{
    return (std::filesystem::path(dir) / name).string();
}

inline void prepare_out_dir(const std::string& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw IoError("cannot create output directory '" + dir + "'");
}

inline double ode_step(const Scenario& s, const SpectralData& sd)
{
    return s.run.ode_dt > 0.0 ? s.run.ode_dt : default_time_step(sd, s.gains);
}

inline void require_horizon(const Scenario& s)
{
    if (!(s.run.t_end > 0.0))
        throw ValidationError("run.t_end", "a positive horizon is required for simulation");
}

inline void ode_notice(const Scenario& s, std::ostream& err)
{
    if (s.afm.max_latency() > 0.0 || s.afm.d > 0.0)
        err << "note: the ODE model ignores afm.latency, afm.d and afm.p (zero-delay, unsampled loop)\n";
}

template <class F>
int guarded(F&& body, std::ostream& err)
{
    try {
        return body();
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return kValidation;
    } catch (const MissingField& e) {
        err << "validation error: " << e.what() << "\n";
        return kValidation;
    } catch (const ParseError& e) {
        err << "validation error: " << e.what() << "\n";
        return kValidation;
    } catch (const NotConnected& e) {
        err << "validation error: " << e.what() << "\n";
        return kValidation;
    } catch (const InvalidGraph& e) {
        err << "validation error: " << e.what() << "\n";
        return kValidation;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const Inadmissible& e) {
        err << "runtime error: " << e.what() << "\n";
        return kRuntime;
    } catch (const Error& e) {
        err << "runtime error: " << e.what() << "\n";
        return kRuntime;
    }
}

} // namespace detail

inline int cmd_simulate(const CliConfig& cfg, const std::string& model, std::ostream& out, std::ostream& err)
{
    return detail::guarded([&] {
        const Scenario s = load_scenario(cfg.scenario, cfg.overrides);
        detail::require_horizon(s);
        detail::prepare_out_dir(cfg.out_dir);
        const int n = s.graph().node_count();
        ReportBundle bundle;
        bundle.title = "simulate (" + model + ")";

        if (model == "afm") {
            AfmScenario sc = s.afm;
            const AfmTrace trace = simulate_afm(sc);
            write_trace(to_table(trace, n), detail::join(cfg.out_dir, "trace.csv"));
            write_event_log(trace.events, detail::join(cfg.out_dir, "events.csv"));
            bundle.values.emplace_back("samples", static_cast<double>(trace.size()));
            bundle.values.emplace_back("events", static_cast<double>(trace.events.size()));
            for (int i = 0; i < n; ++i)
                bundle.values.emplace_back("final_omega_" + std::to_string(i),
                                           trace.omega.back()[static_cast<std::size_t>(i)]);
            for (std::size_t k = 0; k < trace.links.size(); ++k)
                bundle.values.emplace_back("final_beta_link" + std::to_string(k),
                                           static_cast<double>(trace.beta.back()[k]));
            emit_report(bundle, detail::join(cfg.out_dir, "summary.txt"), detail::join(cfg.out_dir, "summary.json"));
            out << report_text(bundle);
            for (const auto& e : trace.events) {
                if (e.kind == EventKind::Overflow || e.kind == EventKind::Underflow) {
                    err << "runtime error: buffer " << to_string(e.kind) << " on link " << e.link << " at node "
                        << e.node << ", t = " << e.time << " (occupancy " << e.value << ")\n";
                    return int(kRuntime);
                }
            }
            return int(kOk);
        }
        if (model != "ode")
            throw ValidationError("--model", "expected afm or ode");

        detail::ode_notice(s, err);
        const SpectralData sd = spectral_data(s.graph());
        const OdeSystem sys = build_full_system(sd, s.gains);
        const double dt = detail::ode_step(s, sd);
        const auto every = static_cast<std::size_t>(std::max(1.0, std::floor(s.run.output_dt / dt)));
        const OdeTrace trace = simulate_ode(sys, s.omega_u(), s.run.t_end, dt, every);
        write_trace(to_table(trace, n, s.graph().edge_count()), detail::join(cfg.out_dir, "trace.csv"));
        bundle.values.emplace_back("dt", dt);
        bundle.values.emplace_back("samples", static_cast<double>(trace.size()));
        bundle.values.emplace_back("omega_avg", s.omega_u().mean());
        for (int i = 0; i < n; ++i)
            bundle.values.emplace_back("final_omega_" + std::to_string(i), trace.omega.back()(i));
        bundle.values.emplace_back("final_max_abs_delta", trace.delta.back().cwiseAbs().maxCoeff());
        emit_report(bundle, detail::join(cfg.out_dir, "summary.txt"), detail::join(cfg.out_dir, "summary.json"));
        out << report_text(bundle);
        return int(kOk);
    }, err);
}

inline int cmd_compare(const CliConfig& cfg, double occupancy_threshold, std::ostream& out, std::ostream& err)
{
    return detail::guarded([&] {
        const Scenario s = load_scenario(cfg.scenario, cfg.overrides);
        detail::require_horizon(s);
        detail::prepare_out_dir(cfg.out_dir);
        const int n = s.graph().node_count();

        const AfmTrace afm = simulate_afm(s.afm);
        const SpectralData sd = spectral_data(s.graph());
        const OdeTrace ode = simulate_ode(build_full_system(sd, s.gains), s.omega_u(), s.run.t_end,
                                          detail::ode_step(s, sd));
        ComparisonThresholds th;
        th.occupancy = occupancy_threshold;
        const ComparisonReport rep = compare_traces(afm, ode, s.afm.beta0, th);

        write_trace(to_table(afm, n), detail::join(cfg.out_dir, "afm_trace.csv"));
        write_event_log(afm.events, detail::join(cfg.out_dir, "afm_events.csv"));
        write_trace(to_table(ode, n, s.graph().edge_count()), detail::join(cfg.out_dir, "ode_trace.csv"));
        ReportBundle bundle;
        bundle.title = "AFM vs ODE comparison";
        bundle.comparisons.emplace_back("afm_vs_ode", rep);
        bundle.values.emplace_back("afm_overflow_events", afm.overflowed() ? 1.0 : 0.0);
        emit_report(bundle, detail::join(cfg.out_dir, "comparison.txt"), detail::join(cfg.out_dir, "comparison.json"));
        out << report_text(bundle);
        return int(kOk);
    }, err);
}

struct AnalyzeFlags {
    bool resistance = false;
    bool worst_case = false;
    bool performance = false;
    bool simulate = false;
    bool lyapunov = false;
    double gamma = 1.0;
};

/// Predicted and (optionally) ODE-integrated norms for one scenario.
inline void performance_into(const Scenario& s, const SpectralData& sd, bool simulate, ReportBundle& bundle,
                             const std::string& name)
{
    const Vector w = s.omega_u();
    bundle.performance.emplace_back(name, predicted_performance(sd, s.gains, w));
    if (!simulate)
        return;
    const ReducedSystem rs = build_reduced_system(sd, s.gains);
    const auto h = hurwitz_check(rs.A_hat);
    const double horizon = 30.0 / std::abs(h.spectral_abscissa);
    const OdeTrace trace = simulate_ode(build_full_system(sd, s.gains), w, horizon, detail::ode_step(s, sd));
    const Vector omega_ss = Vector::Constant(w.size(), w.mean());
    bundle.empirical.emplace_back(name, empirical_norms(trace, omega_ss, h.spectral_abscissa));
    bundle.values.emplace_back("horizon", horizon);
}

inline int cmd_analyze(const CliConfig& cfg, const AnalyzeFlags& flags, std::ostream& out, std::ostream& err)
{
    return detail::guarded([&] {
        const Scenario s = load_scenario(cfg.scenario, cfg.overrides);
        detail::prepare_out_dir(cfg.out_dir);
        const SpectralData sd = spectral_data(s.graph());
        const int n = sd.node_count();
        ReportBundle bundle;
        bundle.title = "analysis";
        bundle.values.emplace_back("algebraic_connectivity", sd.algebraic_connectivity());

        if (flags.resistance) {
            const Matrix r = resistance_matrix(sd);
            TraceTable t;
            t.header.emplace_back("node");
            for (int j = 0; j < n; ++j)
                t.header.push_back("R_" + std::to_string(j));
            for (int i = 0; i < n; ++i) {
                std::vector<double> row{static_cast<double>(i)};
                for (int j = 0; j < n; ++j)
                    row.push_back(r(i, j));
                t.rows.push_back(std::move(row));
            }
            write_trace(t, detail::join(cfg.out_dir, "resistance.csv"));
            bundle.values.emplace_back("max_resistance", r.maxCoeff());
        }
        if (flags.worst_case) {
            const WorstCase wc = worst_case_frequency(sd, flags.gamma);
            TraceTable t{{"node", "omega_u"}, {}};
            for (int i = 0; i < n; ++i)
                t.rows.push_back({static_cast<double>(i), wc.omega_u(i)});
            write_trace(t, detail::join(cfg.out_dir, "worst_case.csv"));
            bundle.values.emplace_back("worst_case_attained", wc.attained);
            bundle.values.emplace_back("worst_case_degenerate", wc.degenerate ? 1.0 : 0.0);
        }
        if (flags.performance)
            performance_into(s, sd, flags.simulate, bundle, "scenario");
        if (flags.lyapunov) {
            const ReducedSystem rs = build_reduced_system(sd, s.gains);
            bundle.certificates.emplace_back("reduced", build_lyapunov_certificate(rs, sd));
            const auto h = hurwitz_check(rs.A_hat);
            bundle.values.emplace_back("spectral_abscissa", h.spectral_abscissa);
            bundle.values.emplace_back("hurwitz", h.is_hurwitz ? 1.0 : 0.0);
        }
        emit_report(bundle, detail::join(cfg.out_dir, "report.txt"), detail::join(cfg.out_dir, "report.json"));
        out << report_text(bundle);
        return int(kOk);
    }, err);
}

struct SweepResult {
    double value = 0.0;
    bool ok = false;
    std::string error;
    PerformanceReport predicted;
    std::optional<EmpiricalNorms> empirical;
};

/// One analysis per value of `param`; results ordered by input position and
/// independent of `jobs`.
inline std::vector<SweepResult> run_sweep(const json& base, const std::string& param, const std::vector<double>& values,
                                          int jobs, bool simulate)
{
    std::vector<SweepResult> results(values.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < values.size(); k = next++) {
            auto& r = results[k];
            r.value = values[k];
            try {
                json doc = base;
                apply_override(doc, param + "=" + format_double(values[k]));
                const Scenario s = scenario_from_json(doc);
                const SpectralData sd = spectral_data(s.graph());
                ReportBundle b;
                performance_into(s, sd, simulate, b, "run");
                r.predicted = b.performance.front().second;
                if (simulate)
                    r.empirical = b.empirical.front().second;
                r.ok = true;
            } catch (const std::exception& e) {
                r.error = e.what();
            }
        }
    };
    const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(values.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back(worker);
    }
    return results;
}

inline std::string sweep_csv(const std::string& param, const std::vector<SweepResult>& results, bool simulate)
{
    std::string csv = param + ",a,b,quadratic_form,freq_dev_norm_sq,occupancy_norm_sq";
    if (simulate)
        csv += ",empirical_freq_dev_norm_sq,empirical_occupancy_norm_sq";
    csv += ",status\n";
    for (const auto& r : results) {
        csv += format_double(r.value);
        if (r.ok) {
            for (double v : {r.predicted.a, r.predicted.b, r.predicted.quadratic_form, r.predicted.freq_dev_norm_sq,
                             r.predicted.occupancy_norm_sq})
                csv += "," + format_double(v);
            if (simulate)
                csv += "," + format_double(r.empirical->freq_dev_norm_sq) + "," +
                       format_double(r.empirical->occupancy_norm_sq);
            csv += ",ok\n";
        } else {
            csv += simulate ? ",,,,,,," : ",,,,,";
            std::string msg = r.error;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            csv += "error: " + msg + "\n";
        }
    }
    return csv;
}

inline int cmd_sweep(const CliConfig& cfg, const std::string& param, const std::vector<double>& values, int jobs,
                     bool simulate, std::ostream& out, std::ostream& err)
{
    return detail::guarded([&] {
        json base = read_json_file(cfg.scenario);
        for (const auto& o : cfg.overrides)
            apply_override(base, o);
        scenario_from_json(base); // the unswept scenario must be valid on its own
        detail::prepare_out_dir(cfg.out_dir);
        if (values.empty())
            throw ValidationError("--values", "at least one value is required");

        const auto results = run_sweep(base, param, values, jobs, simulate);
        write_text_file(detail::join(cfg.out_dir, "sweep.csv"), sweep_csv(param, results, simulate));

        json doc = json::array();
        bool all_ok = true;
        for (const auto& r : results) {
            json e = {{"value", r.value}, {"ok", r.ok}};
            if (r.ok) {
                e["freq_dev_norm_sq"] = r.predicted.freq_dev_norm_sq;
                e["occupancy_norm_sq"] = r.predicted.occupancy_norm_sq;
                e["quadratic_form"] = r.predicted.quadratic_form;
                if (r.empirical) {
                    e["empirical_freq_dev_norm_sq"] = r.empirical->freq_dev_norm_sq;
                    e["empirical_occupancy_norm_sq"] = r.empirical->occupancy_norm_sq;
                }
            } else {
                e["error"] = r.error;
                all_ok = false;
            }
            doc.push_back(e);
        }
        write_text_file(detail::join(cfg.out_dir, "sweep.json"), json{{"param", param}, {"runs", doc}}.dump(2) + "\n");
        out << sweep_csv(param, results, simulate);
        if (!all_ok)
            err << "runtime error: some sweep values failed (see sweep.csv)\n";
        return int(all_ok ? kOk : kRuntime);
    }, err);
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"bittide clock synchronization simulator and analysis toolkit"};
    app.require_subcommand(1);
    CliConfig cfg;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--scenario", cfg.scenario, "Scenario JSON file")->required();
        sub->add_option("--out", cfg.out_dir, "Output directory");
        sub->add_option("--set", cfg.overrides, "Override a scenario field, e.g. controller.k_p=4e-8");
        sub->add_flag("-v,--verbose", cfg.verbosity, "Verbose output");
    };

    std::string model = "afm";
    auto* sim = app.add_subcommand("simulate", "Run the frame model or the ODE model");
    common(sim);
    sim->add_option("--model", model, "afm or ode")->check(CLI::IsMember({"afm", "ode"}));

    double occ_threshold = 2.0;
    auto* cmp = app.add_subcommand("compare", "Run both models and compare their traces");
    common(cmp);
    cmp->add_option("--occupancy-threshold", occ_threshold, "Pass threshold in frames");

    AnalyzeFlags flags;
    auto* ana = app.add_subcommand("analyze", "Resistance, worst case, L2 performance, Lyapunov certificate");
    common(ana);
    ana->add_flag("--resistance", flags.resistance, "Write the resistance-distance matrix");
    ana->add_flag("--worst-case", flags.worst_case, "Worst-case uncorrected frequencies (Fiedler direction)");
    ana->add_flag("--performance", flags.performance, "Closed-form L2 norms");
    ana->add_flag("--simulate", flags.simulate, "With --performance: also integrate the ODE and compare");
    ana->add_flag("--lyapunov", flags.lyapunov, "Lyapunov certificate residuals");
    ana->add_option("--gamma", flags.gamma, "Norm bound for --worst-case");

    std::string param;
    std::vector<double> values;
    int jobs = 1;
    bool sweep_simulate = false;
    auto* swp = app.add_subcommand("sweep", "Vary one numeric scenario field");
    common(swp);
    swp->add_option("--param", param, "Dotted scenario field, e.g. controller.k_p")->required();
    swp->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
    swp->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    swp->add_flag("--simulate", sweep_simulate, "Also integrate the ODE for every value");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, eo;
        const int code = app.exit(e, o, eo);
        out << o.str();
        err << eo.str();
        return code == 0 ? kOk : kValidation;
    }

    if (*sim) {
        cfg.subcommand = "simulate";
        return cmd_simulate(cfg, model, out, err);
    }
    if (*cmp) {
        cfg.subcommand = "compare";
        return cmd_compare(cfg, occ_threshold, out, err);
    }
    if (*ana) {
        cfg.subcommand = "analyze";
        if (!(flags.resistance || flags.worst_case || flags.performance || flags.lyapunov)) {
            err << "validation error: analyze needs at least one of --resistance, --worst-case, --performance, "
                   "--lyapunov\n";
            return kValidation;
        }
        return cmd_analyze(cfg, flags, out, err);
    }
    cfg.subcommand = "sweep";
    return cmd_sweep(cfg, param, values, jobs, sweep_simulate, out, err);
}

} // namespace bittide::cli
