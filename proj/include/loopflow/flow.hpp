#pragma once

#include <Eigen/Dense>
#include <variant>
#include <vector>

#include "loopflow/lti.hpp"
#include "loopflow/region.hpp"

namespace loopflow {

/// Componentwise box for one channel's flattened parameters; +-infinity
/// entries leave a parameter free.
struct ParameterBounds {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    static ParameterBounds unbounded(int n);
};

struct IntegratorSettings {
    double eta0 = 1e-2;
    double tol_force = 1e-6;
    double tol_stall = 1e-10;
    long   max_iterations = 200000;
};

/// A complete tuning problem: plant (scalar or square matrix), one
/// compensator chain / forbidden-region spec / parameter box per channel,
/// the sampling grid and the integrator settings.
struct DesignProblem {
    std::variant<RationalTF, TFMatrix> plant;
    std::vector<CompensatorChain>      chains;
    std::vector<RegionSpec>            regions;
    FrequencyGrid                      grid;
    std::vector<ParameterBounds>       bounds;
    IntegratorSettings                 settings;

    bool is_mimo() const { return std::holds_alternative<TFMatrix>(plant); }
    int  channel_count() const { return static_cast<int>(chains.size()); }

    /// Total tuning-parameter count over all channels.
    int parameter_count() const;

    /// Offset of channel `c` inside the concatenated parameter vector.
    int channel_offset(int c) const;

    Eigen::VectorXd initial_parameters() const;
    void            validate() const;
};

struct FlowState {
    Eigen::VectorXd lambda;     // all channels, concatenated
    long            iteration = 0;
    double          lyapunov = 0.0;
    double          max_force = 0.0;
    double          step = 0.0;  // current eta
};

enum class StopReason { Converged, Stalled, MaxIterations, NumericalFailure };

const char* to_string(StopReason reason);

struct FlowTrace {
    std::vector<FlowState> snapshots;
    StopReason             stop_reason = StopReason::MaxIterations;

    const FlowState& final_state() const { return snapshots.back(); }
};

/// Stacked repelling forces per channel plus the summed potential.
struct ForceAssembly {
    std::vector<Eigen::VectorXd> force;  // per channel, length 2N: (Fr, Fi) pairs in grid order
    double                       lyapunov = 0.0;
    double                       max_force = 0.0;  // max sample-force norm over channels
};

/// Compensated response samples per channel at the given parameters
/// (open-loop product for a scalar plant, EFTF per channel for a matrix one).
std::vector<Eigen::VectorXcd> sample_response(const DesignProblem& problem,
                                              const Eigen::VectorXd& lambda);

ForceAssembly assemble_force(const DesignProblem& problem, const Eigen::VectorXd& lambda);

/// Extended Jacobian per channel, (2N x L_c); row pair (2i, 2i+1) holds
/// d.Re Q(w_i)/dLambda and d.Im Q(w_i)/dLambda. Cross-channel partials are
/// omitted (the matrix Jacobian is block-diagonal by design).
std::vector<Eigen::MatrixXd> assemble_jacobian(const DesignProblem& problem,
                                               const Eigen::VectorXd& lambda);

/// Parameter velocity J_Omega^T * F_Omega, accumulated frequency by frequency
/// in grid order (channel-major), concatenated over channels.
Eigen::VectorXd flow_direction(const DesignProblem& problem, const Eigen::VectorXd& lambda);

/// One explicit Euler candidate: clamp(lambda + eta * J^T F, bounds), with the
/// potential and force recomputed at the candidate. Throws NonFiniteState.
FlowState step(const DesignProblem& problem, const FlowState& state, double eta);

/// Integrates the parameter flow with backtracking on any increase of the
/// summed potential. Works for scalar and matrix plants alike.
FlowTrace run(const DesignProblem& problem);

/// Per-frequency parameter-space actions of Eq-by-frequency force components;
/// their sum equals the flow direction. Used to exhibit stall cancellation.
struct StallDiagnosis {
    std::vector<Eigen::MatrixXd> actions;  // per channel: N x L_c, row i = action of sample i
    std::vector<Eigen::VectorXd> total;    // per channel: column sum of actions
};

StallDiagnosis stall_diagnosis(const DesignProblem& problem, const FlowState& state);

}  // namespace loopflow
