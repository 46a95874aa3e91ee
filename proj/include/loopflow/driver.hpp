#pragma once

#include <string>
#include <vector>

#include "loopflow/config.hpp"

namespace loopflow {

/// Exit codes of the batch front end.
enum ExitCode : int {
    kExitConverged = 0,
    kExitStalled = 2,
    kExitConfigError = 3,
    kExitNumericalFailure = 4,
    kExitMaxIterations = 5,
};

struct ChannelReport {
    Eigen::VectorXd     initial_lambda;
    Eigen::VectorXd     final_lambda;
    std::vector<double> region_clearance;  // per shape; see README for the metric per type
};

struct RunReport {
    StopReason                       stop_reason = StopReason::MaxIterations;
    long                             iterations = 0;
    double                           lyapunov = 0.0;
    double                           max_force = 0.0;
    std::vector<ChannelReport>       channels;
    std::vector<StepResponseMetrics> metrics;  // per output
    std::vector<std::string>         files;    // manifest of everything written
    int                              exit_code = kExitNumericalFailure;
};

/// Runs the flow, verifies the result in the time domain and writes
/// trace.csv, response_ch*.csv, step_ch*.csv and report.json under the
/// config's output directory.
RunReport cmd_design(const RunConfig& config);

/// Also hands back the trace, for callers that assert on it.
RunReport cmd_design(const RunConfig& config, FlowTrace& trace_out);

struct SweepRow {
    double      value = 0.0;
    std::string stop_reason;
    double      overshoot = 0.0;
    double      settling_time = 0.0;
    int         exit_code = 0;
};

/// One design sub-run per value of `region.radius` or `plant.delay`, each in
/// its own subdirectory, consolidated into sweep.csv. Failures are recorded
/// and the sweep continues. `workers` <= 1 runs sequentially; warm start
/// chains the previous converged parameters and forces sequential order.
std::vector<SweepRow> cmd_sweep(const RunConfig& config, const std::string& parameter,
                                const std::vector<double>& values, bool warm_start, int workers);

/// Solves the mask's potential and writes the nodal values as a CSV grid.
/// Returns the achieved residual.
double cmd_laplace_field(const std::string& mask_path, const std::string& out_path,
                         const SorSettings& settings = {});

}  // namespace loopflow
