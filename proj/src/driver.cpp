#include "loopflow/driver.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "loopflow/csv.hpp"

namespace loopflow {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

int exit_code_for(StopReason reason) {
    switch (reason) {
        case StopReason::Converged: return kExitConverged;
        case StopReason::Stalled: return kExitStalled;
        case StopReason::MaxIterations: return kExitMaxIterations;
        case StopReason::NumericalFailure: return kExitNumericalFailure;
    }
    return kExitNumericalFailure;
}

std::vector<std::string> parameter_names(const DesignProblem& problem) {
    std::vector<std::string> names;
    const bool prefixed = problem.channel_count() > 1;
    for (int c = 0; c < problem.channel_count(); ++c) {
        const std::string prefix = prefixed ? "ch" + std::to_string(c + 1) + "_" : "";
        const auto& chain = problem.chains[static_cast<size_t>(c)];
        for (size_t k = 0; k < chain.sections.size(); ++k) {
            names.push_back(prefix + "z" + std::to_string(k + 1));
            names.push_back(prefix + "p" + std::to_string(k + 1));
        }
    }
    return names;
}

void write_trace_csv(const std::string& path, const DesignProblem& problem,
                     const FlowTrace& trace) {
    CsvWriter csv(path);
    csv.field(std::string("iteration"));
    for (const auto& name : parameter_names(problem)) csv.field(name);
    csv.field(std::string("lyapunov"));
    csv.field(std::string("max_force"));
    csv.field(std::string("eta"));
    csv.end_line();
    for (const auto& s : trace.snapshots) {
        csv.field(s.iteration);
        for (Eigen::Index i = 0; i < s.lambda.size(); ++i) csv.field(s.lambda[i]);
        csv.field(s.lyapunov);
        csv.field(s.max_force);
        csv.field(s.step);
        csv.end_line();
    }
}

void write_response_csv(const std::string& path, const FrequencyGrid& grid,
                        const Eigen::VectorXcd& initial, const Eigen::VectorXcd& final_samples) {
    CsvWriter csv(path);
    csv.raw_line("omega,re_initial,im_initial,re_final,im_final");
    for (int k = 0; k < grid.count(); ++k) {
        csv.field(grid.omegas[k]);
        csv.field(initial[k].real());
        csv.field(initial[k].imag());
        csv.field(final_samples[k].real());
        csv.field(final_samples[k].imag());
        csv.end_line();
    }
}

void write_step_csv(const std::string& path, const Eigen::VectorXd& t, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& u) {
    CsvWriter csv(path);
    csv.raw_line("t,y,u");
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        csv.field(t[i]);
        csv.field(y[i]);
        csv.field(u[i]);
        csv.end_line();
    }
}

double shape_clearance(const RegionShape& shape, const Eigen::VectorXcd& samples) {
    return std::visit(
        [&](const auto& sh) -> double {
            using T = std::decay_t<decltype(sh)>;
            if constexpr (std::is_same_v<T, DiskRegion>) {
                return min_distance(samples, sh.center);
            } else if constexpr (std::is_same_v<T, HalfPlaneRegion>) {
                double clearance = std::numeric_limits<double>::infinity();
                for (Eigen::Index i = 0; i < samples.size(); ++i) {
                    const Eigen::Vector2d rel(samples[i].real() - sh.anchor.real(),
                                              samples[i].imag() - sh.anchor.imag());
                    clearance = std::min(clearance, -rel.dot(sh.outward_normal));
                }
                return clearance;
            } else {
                double worst = 0.0;
                for (Eigen::Index i = 0; i < samples.size(); ++i) {
                    try {
                        worst = std::max(worst, grid_potential(sh.mask, sh.field, samples[i]).value);
                    } catch (const OutOfBounds&) {
                        // samples beyond the raster carry no potential
                    }
                }
                return worst;
            }
        },
        shape);
}

json metrics_to_json(const StepResponseMetrics& m) {
    return json{{"overshoot", m.overshoot},
                {"settling_time", m.settling_time},
                {"steady_state_error", m.steady_state_error},
                {"bounded", m.bounded},
                {"settled", m.settled}};
}

}  // namespace

RunReport cmd_design(const RunConfig& config) {
    FlowTrace trace;
    return cmd_design(config, trace);
}

RunReport cmd_design(const RunConfig& config, FlowTrace& trace_out) {
    const DesignProblem& problem = config.problem;
    problem.validate();

    trace_out = run(problem);
    const FlowTrace& trace = trace_out;

    RunReport report;
    report.stop_reason = trace.stop_reason;
    report.iterations = trace.final_state().iteration;
    report.lyapunov = trace.final_state().lyapunov;
    report.max_force = trace.final_state().max_force;
    report.exit_code = exit_code_for(trace.stop_reason);

    const Eigen::VectorXd lambda0 = trace.snapshots.front().lambda;
    const Eigen::VectorXd lambda1 = trace.final_state().lambda;
    const auto            initial_samples = sample_response(problem, lambda0);
    const auto            final_samples = sample_response(problem, lambda1);

    const int channels = problem.channel_count();
    for (int c = 0; c < channels; ++c) {
        ChannelReport ch;
        const int off = problem.channel_offset(c);
        const int len = problem.chains[static_cast<size_t>(c)].parameter_count();
        ch.initial_lambda = lambda0.segment(off, len);
        ch.final_lambda = lambda1.segment(off, len);
        for (const auto& shape : problem.regions[static_cast<size_t>(c)].shapes)
            ch.region_clearance.push_back(shape_clearance(shape, final_samples[static_cast<size_t>(c)]));
        report.channels.push_back(std::move(ch));
    }

    // Time-domain verification with the synthesized parameters.
    std::vector<CompensatorChain> final_chains(static_cast<size_t>(channels));
    for (int c = 0; c < channels; ++c) {
        const int off = problem.channel_offset(c);
        const int len = problem.chains[static_cast<size_t>(c)].parameter_count();
        final_chains[static_cast<size_t>(c)] =
            CompensatorChain::from_parameters(lambda1.segment(off, len));
    }
    Eigen::VectorXd t;
    Eigen::MatrixXd y, u;
    bool            bounded = true;
    bool            sim_failed = false;
    try {
        if (problem.is_mimo()) {
            const MimoTrajectory traj = simulate_mimo_closed_loop(
                std::get<TFMatrix>(problem.plant), final_chains, config.verify.references,
                config.verify.horizon, config.verify.step);
            t = traj.t;
            y = traj.y;
            u = traj.u;
            bounded = traj.bounded;
        } else {
            const Trajectory traj = simulate_closed_loop(
                std::get<RationalTF>(problem.plant), final_chains[0], config.verify.nonlinearity,
                config.verify.references[0], config.verify.horizon, config.verify.step);
            t = traj.t;
            y = traj.y;
            u = traj.u;
            bounded = traj.bounded;
        }
    } catch (const NonFiniteState&) {
        sim_failed = true;
    }
    for (int c = 0; c < channels; ++c) {
        if (sim_failed || t.size() == 0) {
            StepResponseMetrics m;
            m.bounded = false;
            m.settled = false;
            report.metrics.push_back(m);
        } else {
            report.metrics.push_back(
                step_metrics(t, y.col(std::min<int>(c, static_cast<int>(y.cols()) - 1)), bounded,
                             config.verify.references[c]));
        }
    }

    // Emit artifacts.
    const fs::path out_dir(config.output_dir);
    fs::create_directories(out_dir);
    auto emit = [&](const std::string& name) {
        report.files.push_back(name);
        return (out_dir / name).string();
    };

    write_trace_csv(emit("trace.csv"), problem, trace);
    for (int c = 0; c < channels; ++c) {
        const std::string name = "response_ch" + std::to_string(c + 1) + ".csv";
        write_response_csv(emit(name), problem.grid, initial_samples[static_cast<size_t>(c)],
                           final_samples[static_cast<size_t>(c)]);
    }
    for (int c = 0; c < channels; ++c) {
        const std::string name = "step_ch" + std::to_string(c + 1) + ".csv";
        if (sim_failed || t.size() == 0) {
            CsvWriter csv(emit(name));
            csv.raw_line("t,y,u");
        } else {
            write_step_csv(emit(name), t, y.col(c), u.col(c));
        }
    }

    json doc;
    doc["stop_reason"] = to_string(report.stop_reason);
    doc["exit_code"] = report.exit_code;
    doc["iterations"] = report.iterations;
    doc["lyapunov"] = report.lyapunov;
    doc["max_force"] = report.max_force;
    json jchannels = json::array();
    for (const auto& ch : report.channels) {
        json jc;
        jc["initial"] = std::vector<double>(ch.initial_lambda.data(),
                                            ch.initial_lambda.data() + ch.initial_lambda.size());
        jc["final"] = std::vector<double>(ch.final_lambda.data(),
                                          ch.final_lambda.data() + ch.final_lambda.size());
        jc["region_clearance"] = ch.region_clearance;
        jchannels.push_back(std::move(jc));
    }
    doc["channels"] = std::move(jchannels);
    json jmetrics = json::array();
    for (const auto& m : report.metrics) jmetrics.push_back(metrics_to_json(m));
    doc["step_metrics"] = std::move(jmetrics);

    if (report.stop_reason == StopReason::Stalled) {
        const StallDiagnosis diag = stall_diagnosis(problem, trace.final_state());
        json jstall = json::array();
        for (size_t c = 0; c < diag.actions.size(); ++c) {
            double max_action = 0.0;
            for (Eigen::Index i = 0; i < diag.actions[c].rows(); ++i)
                max_action = std::max(max_action, diag.actions[c].row(i).norm());
            jstall.push_back(json{{"total_action_norm", diag.total[c].norm()},
                                  {"max_single_action_norm", max_action}});
        }
        doc["stall_diagnosis"] = std::move(jstall);
    }

    report.files.push_back("report.json");
    doc["files"] = report.files;
    std::ofstream rep(out_dir / "report.json", std::ios::binary);
    rep << doc.dump(2) << "\n";

    return report;
}

namespace {

/// Applies a sweep value to a copy of the normalized config document.
json apply_sweep_value(const json& base, const std::string& parameter, double value) {
    json doc = base;
    if (parameter == "plant.delay") {
        if (doc["plant"].contains("matrix"))
            throw SchemaError("plant.delay", "delay sweep requires a scalar plant");
        doc["plant"]["delay"] = value;
        return doc;
    }
    if (parameter == "region.radius") {
        bool any = false;
        for (auto& ch : doc["channels"]) {
            for (auto& region : ch["regions"]) {
                if (region["type"] == "disk") {
                    region["radius"] = value;
                    any = true;
                }
            }
        }
        if (!any) throw SchemaError("region.radius", "no disk regions to sweep");
        return doc;
    }
    throw SchemaError("sweep", "unknown sweep parameter '" + parameter + "'");
}

std::string value_tag(double v) {
    std::string tag = format_number(v);
    for (auto& c : tag)
        if (c == '+' || c == '-') c = 'm';
    return tag;
}

}  // namespace

std::vector<SweepRow> cmd_sweep(const RunConfig& config, const std::string& parameter,
                                const std::vector<double>& values, bool warm_start, int workers) {
    if (values.empty()) throw SchemaError("sweep", "no sweep values given");
    const std::string short_name =
        parameter == "plant.delay" ? "delay" : (parameter == "region.radius" ? "radius" : "param");

    std::vector<json> docs;
    docs.reserve(values.size());
    for (const double v : values) {
        json doc = apply_sweep_value(config.normalized, parameter, v);
        doc["output_dir"] =
            (std::filesystem::path(config.output_dir) / ("sweep_" + short_name + "_" + value_tag(v)))
                .string();
        docs.push_back(std::move(doc));
    }

    std::vector<SweepRow> rows(values.size());
    auto run_one = [&](size_t i, const json& doc) {
        SweepRow row;
        row.value = values[i];
        try {
            const RunConfig sub = parse_config(doc.dump(), ".");
            const RunReport rep = cmd_design(sub);
            row.stop_reason = to_string(rep.stop_reason);
            row.exit_code = rep.exit_code;
            if (!rep.metrics.empty()) {
                row.overshoot = rep.metrics.front().overshoot;
                row.settling_time = rep.metrics.front().settling_time;
            }
        } catch (const SchemaError&) {
            row.stop_reason = "ConfigError";
            row.exit_code = kExitConfigError;
        } catch (const std::exception&) {
            row.stop_reason = "NumericalFailure";
            row.exit_code = kExitNumericalFailure;
        }
        rows[i] = std::move(row);
    };

    if (warm_start) {
        // Chain each run from the previous converged parameters.
        for (size_t i = 0; i < values.size(); ++i) {
            run_one(i, docs[i]);
            if (i + 1 < values.size() && rows[i].exit_code == kExitConverged) {
                const fs::path rep_path =
                    fs::path(docs[i]["output_dir"].get<std::string>()) / "report.json";
                std::ifstream in(rep_path);
                if (in) {
                    const json rep = json::parse(in);
                    const auto& jchannels = rep.at("channels");
                    for (size_t c = 0; c < jchannels.size(); ++c) {
                        const auto lambda = jchannels[c].at("final").get<std::vector<double>>();
                        auto& chain = docs[i + 1]["channels"][c]["chain"];
                        for (size_t k = 0; k < chain.size(); ++k) {
                            chain[k]["zero"] = lambda[2 * k];
                            chain[k]["pole"] = lambda[2 * k + 1];
                        }
                    }
                }
            }
        }
    } else if (workers <= 1) {
        for (size_t i = 0; i < values.size(); ++i) run_one(i, docs[i]);
    } else {
        std::vector<std::thread> pool;
        std::atomic<size_t>      next{0};
        const int                n = std::min<int>(workers, static_cast<int>(values.size()));
        for (int w = 0; w < n; ++w) {
            pool.emplace_back([&]() {
                for (size_t i = next.fetch_add(1); i < values.size(); i = next.fetch_add(1))
                    run_one(i, docs[i]);
            });
        }
        for (auto& th : pool) th.join();
    }

    fs::create_directories(config.output_dir);
    CsvWriter csv((fs::path(config.output_dir) / "sweep.csv").string());
    csv.raw_line("value,stop_reason,overshoot,settling_time");
    for (const auto& row : rows) {
        csv.field(row.value);
        csv.field(row.stop_reason);
        csv.field(row.overshoot);
        csv.field(row.settling_time);
        csv.end_line();
    }
    return rows;
}

double cmd_laplace_field(const std::string& mask_path, const std::string& out_path,
                         const SorSettings& settings) {
    const GridMaskRegion mask = load_mask(mask_path);
    const LaplaceField   field = solve_laplace(mask, settings);

    CsvWriter csv(out_path);
    for (int iy = 0; iy < mask.ny; ++iy) {
        for (int ix = 0; ix < mask.nx; ++ix) csv.field(field.value(iy, ix));
        csv.end_line();
    }
    return field.residual;
}

}  // namespace loopflow
