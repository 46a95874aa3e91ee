#include "loopflow/flow.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace loopflow {

ParameterBounds ParameterBounds::unbounded(int n) {
    ParameterBounds b;
    b.lower = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
    b.upper = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    return b;
}

const char* to_string(StopReason reason) {
    switch (reason) {
        case StopReason::Converged: return "Converged";
        case StopReason::Stalled: return "Stalled";
        case StopReason::MaxIterations: return "MaxIterations";
        case StopReason::NumericalFailure: return "NumericalFailure";
    }
    return "Unknown";
}

int DesignProblem::parameter_count() const {
    int n = 0;
    for (const auto& c : chains) n += c.parameter_count();
    return n;
}

int DesignProblem::channel_offset(int c) const {
    int off = 0;
    for (int i = 0; i < c; ++i) off += chains[static_cast<size_t>(i)].parameter_count();
    return off;
}

Eigen::VectorXd DesignProblem::initial_parameters() const {
    Eigen::VectorXd lambda(parameter_count());
    int off = 0;
    for (const auto& c : chains) {
        lambda.segment(off, c.parameter_count()) = c.to_parameters();
        off += c.parameter_count();
    }
    return lambda;
}

void DesignProblem::validate() const {
    const int channels = channel_count();
    if (channels < 1) throw std::invalid_argument("problem needs at least one channel");
    if (is_mimo()) {
        const auto& m = std::get<TFMatrix>(plant);
        if (m.size != channels)
            throw std::invalid_argument("matrix plant size must match the channel count");
    } else if (channels != 1) {
        throw std::invalid_argument("a scalar plant takes exactly one channel");
    }
    if (regions.size() != chains.size())
        throw std::invalid_argument("need one region spec per channel");
    if (bounds.size() != chains.size())
        throw std::invalid_argument("need one bounds set per channel");
    if (grid.count() < 1) throw std::invalid_argument("frequency grid is empty");
    for (size_t c = 0; c < chains.size(); ++c) {
        if (regions[c].shapes.empty()) throw std::invalid_argument("region spec has no shapes");
        const int n = chains[c].parameter_count();
        if (bounds[c].lower.size() != n || bounds[c].upper.size() != n)
            throw std::invalid_argument("bounds length does not match the parameter count");
        for (int k = 0; k < n; ++k)
            if (!(bounds[c].lower[k] <= bounds[c].upper[k]))
                throw std::invalid_argument("lower bound exceeds upper bound");
    }
    if (!(settings.eta0 > 0.0) || !(settings.tol_force > 0.0) || !(settings.tol_stall > 0.0) ||
        settings.max_iterations < 1)
        throw std::invalid_argument("integrator settings must be positive");
}

namespace {

/// Plant-side frequency samples; these never change while parameters flow.
struct PlantCache {
    bool             mimo = false;
    int              channels = 1;
    Eigen::VectorXcd siso;     // N
    Eigen::MatrixXcd entries;  // N x (M*M), column i*M+j holds g_ij samples
};

PlantCache build_cache(const DesignProblem& p) {
    PlantCache cache;
    const int n = p.grid.count();
    if (p.is_mimo()) {
        const auto& m = std::get<TFMatrix>(p.plant);
        cache.mimo = true;
        cache.channels = m.size;
        cache.entries.resize(n, m.size * m.size);
        for (int i = 0; i < m.size; ++i)
            for (int j = 0; j < m.size; ++j)
                for (int k = 0; k < n; ++k)
                    cache.entries(k, i * m.size + j) = eval_tf(m.entry(i, j), p.grid.omegas[k]);
    } else {
        cache.siso.resize(n);
        for (int k = 0; k < n; ++k)
            cache.siso[k] = eval_tf(std::get<RationalTF>(p.plant), p.grid.omegas[k]);
    }
    return cache;
}

std::vector<CompensatorChain> chains_at(const DesignProblem& p, const Eigen::VectorXd& lambda) {
    if (lambda.size() != p.parameter_count())
        throw std::invalid_argument("parameter vector length mismatch");
    std::vector<CompensatorChain> chains(p.chains.size());
    for (size_t c = 0; c < chains.size(); ++c) {
        const int off = p.channel_offset(static_cast<int>(c));
        const int len = p.chains[c].parameter_count();
        chains[c] = CompensatorChain::from_parameters(lambda.segment(off, len));
    }
    return chains;
}

/// The plant-side factor of channel c's response at sample k: Q = inner * Gc_c,
/// so dQ/dLambda_c = inner * dGc_c/dLambda_c for both the scalar and matrix case.
Complex inner_factor(const PlantCache& cache, const DesignProblem& p,
                     const std::vector<CompensatorChain>& chains, int c, int k) {
    if (!cache.mimo) return cache.siso[k];
    const int m = cache.channels;
    Complex   inner = cache.entries(k, c * m + c);
    for (int j = 0; j < m; ++j) {
        if (j == c) continue;
        inner -= eval_chain(chains[static_cast<size_t>(j)], p.grid.omegas[k]) *
                 cache.entries(k, c * m + j) * cache.entries(k, j * m + c);
    }
    return inner;
}

struct AssemblyOutputs {
    std::vector<Eigen::VectorXd>*  forces = nullptr;
    double*                        lyapunov = nullptr;
    double*                        max_force = nullptr;
    Eigen::VectorXd*               direction = nullptr;
    std::vector<Eigen::MatrixXd>*  jacobians = nullptr;
    std::vector<Eigen::MatrixXd>*  actions = nullptr;
    std::vector<Eigen::VectorXcd>* samples = nullptr;
};

/// Single channel-major, frequency-ordered pass shared by every assembly
/// operation; the fixed accumulation order keeps reruns bit-identical.
void assemble(const DesignProblem& p, const PlantCache& cache, const Eigen::VectorXd& lambda,
              const AssemblyOutputs& out) {
    const int  n = p.grid.count();
    const int  channels = p.channel_count();
    const auto chains = chains_at(p, lambda);

    if (out.lyapunov) *out.lyapunov = 0.0;
    if (out.max_force) *out.max_force = 0.0;
    if (out.direction) out.direction->setZero(p.parameter_count());
    if (out.forces) out.forces->assign(static_cast<size_t>(channels), Eigen::VectorXd());
    if (out.jacobians) out.jacobians->assign(static_cast<size_t>(channels), Eigen::MatrixXd());
    if (out.actions) out.actions->assign(static_cast<size_t>(channels), Eigen::MatrixXd());
    if (out.samples) out.samples->assign(static_cast<size_t>(channels), Eigen::VectorXcd());

    const bool need_partials = out.direction || out.jacobians || out.actions;
    for (int c = 0; c < channels; ++c) {
        const int len = p.chains[static_cast<size_t>(c)].parameter_count();
        const int off = p.channel_offset(c);
        if (out.forces) (*out.forces)[c] = Eigen::VectorXd::Zero(2 * n);
        if (out.jacobians) (*out.jacobians)[c] = Eigen::MatrixXd::Zero(2 * n, len);
        if (out.actions) (*out.actions)[c] = Eigen::MatrixXd::Zero(n, len);
        if (out.samples) (*out.samples)[c].resize(n);

        for (int k = 0; k < n; ++k) {
            const double  omega = p.grid.omegas[k];
            const Complex inner = inner_factor(cache, p, chains, c, k);
            const Complex q = inner * eval_chain(chains[static_cast<size_t>(c)], omega);
            if (out.samples) (*out.samples)[c][k] = q;

            PotentialSample ps;
            if (out.forces || out.lyapunov || out.max_force || out.direction || out.actions)
                ps = eval_region(p.regions[static_cast<size_t>(c)], q);
            if (out.lyapunov) *out.lyapunov += ps.value;
            if (out.max_force) *out.max_force = std::max(*out.max_force, ps.force.norm());
            if (out.forces) {
                (*out.forces)[c][2 * k] = ps.force[0];
                (*out.forces)[c][2 * k + 1] = ps.force[1];
            }

            if (!need_partials) continue;
            const bool force_zero = ps.force[0] == 0.0 && ps.force[1] == 0.0;
            if (!out.jacobians && force_zero) continue;  // zero force adds nothing

            const Eigen::VectorXcd dq =
                inner * chain_partials(chains[static_cast<size_t>(c)], omega);
            if (out.jacobians) {
                (*out.jacobians)[c].row(2 * k) = dq.real().transpose();
                (*out.jacobians)[c].row(2 * k + 1) = dq.imag().transpose();
            }
            if (force_zero) continue;
            const Eigen::VectorXd action = ps.force[0] * dq.real() + ps.force[1] * dq.imag();
            if (out.actions) (*out.actions)[c].row(k) = action.transpose();
            if (out.direction) out.direction->segment(off, len) += action;
        }
    }
}

struct EvalResult {
    double lyapunov = 0.0;
    double max_force = 0.0;
};

EvalResult evaluate(const DesignProblem& p, const PlantCache& cache, const Eigen::VectorXd& lambda) {
    EvalResult      ev;
    AssemblyOutputs out;
    out.lyapunov = &ev.lyapunov;
    out.max_force = &ev.max_force;
    assemble(p, cache, lambda, out);
    if (!std::isfinite(ev.lyapunov) || !std::isfinite(ev.max_force))
        throw NonFiniteState("potential evaluation produced a non-finite value");
    return ev;
}

Eigen::VectorXd concat_lower(const DesignProblem& p) {
    Eigen::VectorXd lo(p.parameter_count());
    for (int c = 0; c < p.channel_count(); ++c)
        lo.segment(p.channel_offset(c), p.chains[static_cast<size_t>(c)].parameter_count()) =
            p.bounds[static_cast<size_t>(c)].lower;
    return lo;
}

Eigen::VectorXd concat_upper(const DesignProblem& p) {
    Eigen::VectorXd hi(p.parameter_count());
    for (int c = 0; c < p.channel_count(); ++c)
        hi.segment(p.channel_offset(c), p.chains[static_cast<size_t>(c)].parameter_count()) =
            p.bounds[static_cast<size_t>(c)].upper;
    return hi;
}

bool compliant(const EvalResult& ev, const IntegratorSettings& s) {
    return ev.lyapunov == 0.0 && ev.max_force <= s.tol_force;
}

}  // namespace

std::vector<Eigen::VectorXcd> sample_response(const DesignProblem& problem,
                                              const Eigen::VectorXd& lambda) {
    const PlantCache              cache = build_cache(problem);
    std::vector<Eigen::VectorXcd> samples;
    AssemblyOutputs               out;
    out.samples = &samples;
    assemble(problem, cache, lambda, out);
    return samples;
}

ForceAssembly assemble_force(const DesignProblem& problem, const Eigen::VectorXd& lambda) {
    const PlantCache cache = build_cache(problem);
    ForceAssembly    fa;
    AssemblyOutputs  out;
    out.forces = &fa.force;
    out.lyapunov = &fa.lyapunov;
    out.max_force = &fa.max_force;
    assemble(problem, cache, lambda, out);
    return fa;
}

std::vector<Eigen::MatrixXd> assemble_jacobian(const DesignProblem& problem,
                                               const Eigen::VectorXd& lambda) {
    const PlantCache             cache = build_cache(problem);
    std::vector<Eigen::MatrixXd> jac;
    AssemblyOutputs              out;
    out.jacobians = &jac;
    assemble(problem, cache, lambda, out);
    return jac;
}

Eigen::VectorXd flow_direction(const DesignProblem& problem, const Eigen::VectorXd& lambda) {
    const PlantCache cache = build_cache(problem);
    Eigen::VectorXd  dir;
    AssemblyOutputs  out;
    out.direction = &dir;
    assemble(problem, cache, lambda, out);
    return dir;
}

FlowState step(const DesignProblem& problem, const FlowState& state, double eta) {
    problem.validate();
    const PlantCache      cache = build_cache(problem);
    const Eigen::VectorXd dir = flow_direction(problem, state.lambda);
    const Eigen::VectorXd lo = concat_lower(problem), hi = concat_upper(problem);

    FlowState candidate;
    candidate.lambda = (state.lambda + eta * dir).cwiseMax(lo).cwiseMin(hi);
    if (!candidate.lambda.allFinite())
        throw NonFiniteState("candidate parameters are not finite");
    const EvalResult ev = evaluate(problem, cache, candidate.lambda);
    candidate.iteration = state.iteration + 1;
    candidate.lyapunov = ev.lyapunov;
    candidate.max_force = ev.max_force;
    candidate.step = eta;
    return candidate;
}

FlowTrace run(const DesignProblem& problem) {
    problem.validate();
    const PlantCache      cache = build_cache(problem);
    const auto&           s = problem.settings;
    const Eigen::VectorXd lo = concat_lower(problem), hi = concat_upper(problem);

    // The initial point is projected into the box so every recorded state
    // satisfies the bound invariant.
    Eigen::VectorXd lambda = problem.initial_parameters().cwiseMax(lo).cwiseMin(hi);
    double          eta = s.eta0;

    FlowTrace trace;
    EvalResult ev;
    try {
        ev = evaluate(problem, cache, lambda);
    } catch (const NonFiniteState&) {
        trace.snapshots.push_back({lambda, 0, std::numeric_limits<double>::quiet_NaN(),
                                   std::numeric_limits<double>::quiet_NaN(), eta});
        trace.stop_reason = StopReason::NumericalFailure;
        return trace;
    }
    trace.snapshots.push_back({lambda, 0, ev.lyapunov, ev.max_force, eta});
    if (compliant(ev, s)) {
        trace.stop_reason = StopReason::Converged;
        return trace;
    }

    for (long iter = 1; iter <= s.max_iterations; ++iter) {
        Eigen::VectorXd dir;
        AssemblyOutputs out;
        out.direction = &dir;
        assemble(problem, cache, lambda, out);
        if (!dir.allFinite()) {
            trace.stop_reason = StopReason::NumericalFailure;
            return trace;
        }

        bool accepted = false;
        for (int attempt = 0; attempt < 200; ++attempt) {
            const Eigen::VectorXd candidate = (lambda + eta * dir).cwiseMax(lo).cwiseMin(hi);
            if (!candidate.allFinite()) {
                trace.stop_reason = StopReason::NumericalFailure;
                return trace;
            }
            // Equilibrium of the projected flow with the response still in
            // violation: the per-frequency actions cancel out.
            if ((candidate - lambda).norm() <= s.tol_stall * eta) {
                trace.stop_reason = StopReason::Stalled;
                return trace;
            }
            EvalResult next;
            try {
                next = evaluate(problem, cache, candidate);
            } catch (const NonFiniteState&) {
                trace.stop_reason = StopReason::NumericalFailure;
                return trace;
            }
            if (next.lyapunov <= ev.lyapunov) {
                lambda = candidate;
                ev = next;
                trace.snapshots.push_back({lambda, iter, ev.lyapunov, ev.max_force, eta});
                eta *= 1.2;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if (!accepted) {
            trace.stop_reason = StopReason::Stalled;
            return trace;
        }
        if (compliant(ev, s)) {
            trace.stop_reason = StopReason::Converged;
            return trace;
        }
    }
    trace.stop_reason = StopReason::MaxIterations;
    return trace;
}

StallDiagnosis stall_diagnosis(const DesignProblem& problem, const FlowState& state) {
    const PlantCache cache = build_cache(problem);
    StallDiagnosis   diag;
    AssemblyOutputs  out;
    out.actions = &diag.actions;
    assemble(problem, cache, state.lambda, out);
    diag.total.resize(diag.actions.size());
    for (size_t c = 0; c < diag.actions.size(); ++c) {
        diag.total[c] = Eigen::VectorXd::Zero(diag.actions[c].cols());
        for (Eigen::Index i = 0; i < diag.actions[c].rows(); ++i)
            diag.total[c] += diag.actions[c].row(i).transpose();
    }
    return diag;
}

}  // namespace loopflow
