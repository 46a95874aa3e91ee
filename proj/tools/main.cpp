#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "loopflow/driver.hpp"

namespace {

using namespace loopflow;

int worker_count_from_env() {
    const char* env = std::getenv("LOOPFLOW_WORKERS");
    if (!env) return 1;
    const int n = std::atoi(env);
    return n > 0 ? n : 1;
}

void print_report(const RunReport& report) {
    std::cout << "stop reason: " << to_string(report.stop_reason) << "\n";
    std::cout << "iterations:  " << report.iterations << "\n";
    std::cout << "lyapunov:    " << report.lyapunov << "\n";
    std::cout << "max force:   " << report.max_force << "\n";
    for (size_t c = 0; c < report.channels.size(); ++c) {
        const auto& ch = report.channels[c];
        std::cout << "channel " << c + 1 << " parameters:";
        for (Eigen::Index i = 0; i < ch.final_lambda.size(); ++i)
            std::cout << " " << ch.final_lambda[i];
        std::cout << "\n  region clearance:";
        for (double v : ch.region_clearance) std::cout << " " << v;
        std::cout << "\n";
    }
    for (size_t c = 0; c < report.metrics.size(); ++c) {
        const auto& m = report.metrics[c];
        std::cout << "output " << c + 1 << ": overshoot " << m.overshoot << ", settling "
                  << m.settling_time << " s, steady-state error " << m.steady_state_error
                  << (m.bounded ? "" : ", UNBOUNDED") << (m.settled ? "" : ", unsettled") << "\n";
    }
}

int run_design(const std::string& config_path) {
    const RunConfig config = load_config(config_path);
    const RunReport report = cmd_design(config);
    print_report(report);
    return report.exit_code;
}

int run_sweep(const std::string& config_path, const std::string& parameter,
              const std::vector<double>& values, bool warm_start) {
    const RunConfig config = load_config(config_path);
    const auto rows = cmd_sweep(config, parameter, values, warm_start, worker_count_from_env());
    int        worst = 0;
    for (const auto& row : rows) {
        std::cout << parameter << " = " << row.value << ": " << row.stop_reason << ", overshoot "
                  << row.overshoot << ", settling " << row.settling_time << " s\n";
        worst = std::max(worst, row.exit_code);
    }
    return worst;
}

int run_laplace(const std::string& mask_path, const std::string& out_path) {
    const double residual = cmd_laplace_field(mask_path, out_path);
    std::cout << "max residual " << residual << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"frequency-response shaping by potential-driven parameter flow"};
    app.require_subcommand(1);

    std::string         config_path, parameter, mask_path, out_path;
    std::vector<double> values;
    bool                warm_start = false;

    auto* design = app.add_subcommand("design", "run one design from a config file");
    design->add_option("config", config_path, "JSON config file")->required();

    auto* sweep = app.add_subcommand("sweep", "rerun a design over a parameter range");
    sweep->add_option("config", config_path, "JSON config file")->required();
    sweep->add_option("--param", parameter, "region.radius or plant.delay")->required();
    sweep->add_option("--values", values, "sweep values")->required()->delimiter(',');
    sweep->add_flag("--warm-start", warm_start, "seed each run with the previous converged parameters");

    auto* laplace = app.add_subcommand("laplace-field", "solve a mask potential and dump the grid");
    laplace->add_option("mask", mask_path, "mask file")->required();
    laplace->add_option("out", out_path, "output CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (design->parsed()) return run_design(config_path);
        if (sweep->parsed()) return run_sweep(config_path, parameter, values, warm_start);
        return run_laplace(mask_path, out_path);
    } catch (const SchemaError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfigError;
    } catch (const FileNotFound& e) {
        std::cerr << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitNumericalFailure;
    }
}
