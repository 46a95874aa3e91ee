#include "loopflow/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace loopflow {

namespace {

constexpr double kBlowUpThreshold = 1e6;

}  // namespace

StateSpaceModel realize(const RationalTF& tf) {
    if (!tf.is_proper()) throw ImproperTransferFunction("numerator degree exceeds denominator degree");
    const int n = tf.den.degree();
    const double lead = tf.den.coeffs[n];

    Eigen::VectorXd a = tf.den.coeffs / lead;  // monic denominator
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
    b.head(tf.num.coeffs.size()) = tf.num.coeffs / lead;

    StateSpaceModel model;
    model.D = b[n];
    model.A = Eigen::MatrixXd::Zero(n, n);
    model.B = Eigen::VectorXd::Zero(n);
    model.C = Eigen::RowVectorXd::Zero(n);
    if (n == 0) return model;

    model.A.topRightCorner(n - 1, n - 1).setIdentity();
    model.A.row(n - 1) = -a.head(n).transpose();
    model.B[n - 1] = 1.0;
    model.C = (b.head(n) - model.D * a.head(n)).transpose();
    return model;
}

Complex eval_model(const StateSpaceModel& model, Complex s) {
    const int n = model.order();
    if (n == 0) return Complex(model.D, 0.0);
    Eigen::MatrixXcd m = -model.A.cast<Complex>();
    m.diagonal().array() += s;
    const Eigen::VectorXcd x = m.partialPivLu().solve(model.B.cast<Complex>());
    return (model.C.cast<Complex>() * x).value() + model.D;
}

DelayLine::DelayLine(double delay_s, double step_s) {
    if (delay_s < 0.0 || !(step_s > 0.0)) throw std::invalid_argument("need delay >= 0 and step > 0");
    const long len = std::lround(delay_s / step_s);
    rounding_mismatch_ = std::abs(static_cast<double>(len) * step_s - delay_s) >
                         1e-9 * std::max(step_s, delay_s);
    buffer_.assign(static_cast<size_t>(len), 0.0);
}

void DelayLine::push(double in) {
    if (buffer_.empty()) return;
    buffer_[head_] = in;
    head_ = (head_ + 1) % buffer_.size();
}

double DelayLine::tick(double in) {
    if (buffer_.empty()) return in;
    const double out = peek();
    push(in);
    return out;
}

double apply(const Nonlinearity& nl, double x) {
    return std::visit(
        [x](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Identity>) {
                return x;
            } else if constexpr (std::is_same_v<T, Saturation>) {
                if (!(v.lo < v.hi)) throw std::invalid_argument("saturation needs lo < hi");
                return std::min(std::max(x, v.lo), v.hi);
            } else if constexpr (std::is_same_v<T, SinusoidalGain>) {
                return (3.0 * x + x * std::sin(5.0 * x)) / 4.0;
            } else {
                const auto& pts = v.points;
                if (pts.size() < 2) throw std::invalid_argument("sector table needs >= 2 points");
                size_t k = 1;
                while (k + 1 < pts.size() && x > pts[k][0]) ++k;
                const double x0 = pts[k - 1][0], y0 = pts[k - 1][1];
                const double x1 = pts[k][0], y1 = pts[k][1];
                if (!(x1 > x0)) throw std::invalid_argument("sector table abscissae must increase");
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            }
        },
        nl);
}

namespace {

/// Cascade of realized compensator sections: state per section, input chained
/// through the direct feedthroughs.
struct ChainSim {
    std::vector<StateSpaceModel> sections;
    int                          order = 0;

    explicit ChainSim(const CompensatorChain& chain) {
        sections.reserve(chain.sections.size());
        for (const auto& sec : chain.sections) {
            sections.push_back(realize(RationalTF({sec.zero, 1.0}, {sec.pole, 1.0})));
            order += 1;
        }
    }

    double output(const Eigen::VectorXd& x, double in) const {
        double signal = in;
        for (size_t k = 0; k < sections.size(); ++k)
            signal = sections[k].C(0) * x[static_cast<Eigen::Index>(k)] + sections[k].D * signal;
        return signal;
    }

    /// Feedthrough of the whole cascade (product of the section D terms).
    double feedthrough() const {
        double d = 1.0;
        for (const auto& s : sections) d *= s.D;
        return d;
    }

    void derivs(const Eigen::VectorXd& x, double in, Eigen::Ref<Eigen::VectorXd> dx) const {
        double signal = in;
        for (size_t k = 0; k < sections.size(); ++k) {
            const auto idx = static_cast<Eigen::Index>(k);
            dx[idx] = sections[k].A(0, 0) * x[idx] + sections[k].B(0) * signal;
            signal = sections[k].C(0) * x[idx] + sections[k].D * signal;
        }
    }
};

struct LoopSignals {
    double y = 0.0;
    double e = 0.0;
    double v = 0.0;  // plant input
};

}  // namespace

Trajectory simulate_closed_loop(const RationalTF& plant, const CompensatorChain& chain,
                                const Nonlinearity& nl, double reference, double horizon, double h) {
    if (!(h > 0.0) || !(horizon >= 0.0)) throw std::invalid_argument("need h > 0 and horizon >= 0");
    const StateSpaceModel p = realize(plant);
    const ChainSim        c(chain);
    DelayLine             line(plant.delay, h);
    if (line.rounding_mismatch())
        std::cerr << "warning: step " << h << " does not divide delay " << plant.delay
                  << "; tap rounded to " << line.length() << " samples\n";

    const int nc = c.order, np = p.order();
    const bool identity_nl = std::holds_alternative<Identity>(nl);

    // Closed-loop signals at a given state. `tap` carries the delayed
    // compensator output; ignored when the delay line is empty.
    auto signals = [&](const Eigen::VectorXd& x, double tap) -> LoopSignals {
        LoopSignals s;
        const auto xc = x.head(nc);
        const auto xp = x.tail(np);
        if (!line.empty()) {
            s.v = apply(nl, tap);
            s.y = p.C * xp + p.D * s.v;
            s.e = reference - s.y;
            return s;
        }
        if (p.D == 0.0) {
            s.y = np > 0 ? double(p.C * xp) : 0.0;
            s.e = reference - s.y;
            s.v = apply(nl, c.output(xc, s.e));
            return s;
        }
        if (!identity_nl)
            throw AlgebraicLoop("nonlinear algebraic loop: biproper plant with no delay");
        // Linear scalar solve of y = Cp xp + Dp (u0 + Dc (r - y)).
        const double u0 = c.output(xc, 0.0);
        const double dc = c.feedthrough();
        const double denom = 1.0 + p.D * dc;
        if (std::abs(denom) < 1e-12)
            throw AlgebraicLoop("feedthrough loop gain equals 1; loop is not well-posed");
        s.y = ((np > 0 ? double(p.C * xp) : 0.0) + p.D * u0 + p.D * dc * reference) / denom;
        s.e = reference - s.y;
        s.v = c.output(xc, s.e);
        return s;
    };

    auto derivs = [&](const Eigen::VectorXd& x, double tap) -> Eigen::VectorXd {
        const LoopSignals s = signals(x, tap);
        Eigen::VectorXd   dx(nc + np);
        c.derivs(x.head(nc), s.e, dx.head(nc));
        dx.tail(np) = p.A * x.tail(np) + p.B * s.v;
        return dx;
    };

    const long steps = std::lround(horizon / h);
    std::vector<double> ts, ys, us;
    ts.reserve(steps + 1);
    ys.reserve(steps + 1);
    us.reserve(steps + 1);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(nc + np);
    Trajectory      traj;
    for (long k = 0; k <= steps; ++k) {
        const double tap = line.empty() ? 0.0 : line.peek();
        const LoopSignals s = signals(x, tap);
        if (!std::isfinite(s.y) || !x.allFinite())
            throw NonFiniteState("closed-loop state is not finite");
        ts.push_back(k * h);
        ys.push_back(s.y);
        us.push_back(s.v);
        if (std::abs(s.y) > kBlowUpThreshold) {
            traj.bounded = false;
            break;
        }
        if (k == steps) break;

        if (!line.empty()) line.push(c.output(x.head(nc), s.e));
        const Eigen::VectorXd k1 = derivs(x, tap);
        const Eigen::VectorXd k2 = derivs(x + 0.5 * h * k1, tap);
        const Eigen::VectorXd k3 = derivs(x + 0.5 * h * k2, tap);
        const Eigen::VectorXd k4 = derivs(x + h * k3, tap);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    traj.t = Eigen::Map<const Eigen::VectorXd>(ts.data(), static_cast<Eigen::Index>(ts.size()));
    traj.y = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
    traj.u = Eigen::Map<const Eigen::VectorXd>(us.data(), static_cast<Eigen::Index>(us.size()));
    return traj;
}

MimoTrajectory simulate_mimo_closed_loop(const TFMatrix& plants,
                                         const std::vector<CompensatorChain>& chains,
                                         const Eigen::VectorXd& references, double horizon,
                                         double h) {
    const int m = plants.size;
    if (m < 1) throw std::invalid_argument("empty plant matrix");
    if (static_cast<int>(chains.size()) != m || references.size() != m)
        throw std::invalid_argument("need one chain and one reference per channel");
    if (!(h > 0.0) || !(horizon >= 0.0)) throw std::invalid_argument("need h > 0 and horizon >= 0");

    std::vector<ChainSim> comp;
    comp.reserve(chains.size());
    for (const auto& ch : chains) comp.emplace_back(ch);

    std::vector<StateSpaceModel> entry;
    std::vector<DelayLine>       lines;
    entry.reserve(static_cast<size_t>(m) * m);
    lines.reserve(static_cast<size_t>(m) * m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            entry.push_back(realize(plants.entry(i, j)));
            lines.emplace_back(plants.entry(i, j).delay, h);
        }
    }

    // State layout: compensator states per channel, then entry states row-major.
    std::vector<int> comp_off(m), entry_off(static_cast<size_t>(m) * m);
    int total = 0;
    for (int j = 0; j < m; ++j) {
        comp_off[j] = total;
        total += comp[static_cast<size_t>(j)].order;
    }
    for (size_t k = 0; k < entry.size(); ++k) {
        entry_off[k] = total;
        total += entry[k].order();
    }

    // Feedthrough coupling matrix for delay-free biproper entries.
    Eigen::MatrixXd d0 = Eigen::MatrixXd::Zero(m, m);
    bool            any_d = false;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            const size_t k = static_cast<size_t>(i) * m + j;
            if (entry[k].D != 0.0 && lines[k].empty()) {
                d0(i, j) = entry[k].D;
                any_d = true;
            }
        }
    }

    struct MimoSignals {
        Eigen::VectorXd y, e, u;
    };

    auto signals = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& taps) -> MimoSignals {
        MimoSignals s;
        Eigen::VectorXd known = Eigen::VectorXd::Zero(m);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                const size_t k = static_cast<size_t>(i) * m + j;
                if (entry[k].order() > 0)
                    known[i] += entry[k].C * x.segment(entry_off[k], entry[k].order());
                if (!lines[k].empty()) known[i] += entry[k].D * taps[static_cast<Eigen::Index>(k)];
            }
        }
        Eigen::VectorXd u0(m), dc(m);
        for (int j = 0; j < m; ++j) {
            const auto& c = comp[static_cast<size_t>(j)];
            u0[j] = c.output(x.segment(comp_off[j], c.order), 0.0);
            dc[j] = c.feedthrough();
        }
        if (!any_d) {
            s.y = known;
        } else {
            const Eigen::MatrixXd lhs =
                Eigen::MatrixXd::Identity(m, m) + d0 * dc.asDiagonal().toDenseMatrix();
            const Eigen::VectorXd rhs = known + d0 * (u0 + dc.cwiseProduct(references));
            Eigen::PartialPivLU<Eigen::MatrixXd> lu(lhs);
            s.y = lu.solve(rhs);
            if (!s.y.allFinite()) throw AlgebraicLoop("feedthrough loop is not well-posed");
        }
        s.e = references - s.y;
        s.u = u0 + dc.cwiseProduct(s.e);
        return s;
    };

    auto derivs = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& taps) -> Eigen::VectorXd {
        const MimoSignals s = signals(x, taps);
        Eigen::VectorXd   dx(total);
        for (int j = 0; j < m; ++j) {
            const auto& c = comp[static_cast<size_t>(j)];
            if (c.order > 0) c.derivs(x.segment(comp_off[j], c.order), s.e[j], dx.segment(comp_off[j], c.order));
        }
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                const size_t k = static_cast<size_t>(i) * m + j;
                const int    nk = entry[k].order();
                if (nk == 0) continue;
                const double in = lines[k].empty() ? s.u[j] : taps[static_cast<Eigen::Index>(k)];
                dx.segment(entry_off[k], nk) =
                    entry[k].A * x.segment(entry_off[k], nk) + entry[k].B * in;
            }
        }
        return dx;
    };

    const long steps = std::lround(horizon / h);
    MimoTrajectory traj;
    traj.t.resize(steps + 1);
    traj.y.resize(steps + 1, m);
    traj.u.resize(steps + 1, m);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(total);
    Eigen::VectorXd taps(static_cast<Eigen::Index>(entry.size()));
    long recorded = 0;
    for (long k = 0; k <= steps; ++k) {
        for (size_t q = 0; q < entry.size(); ++q)
            taps[static_cast<Eigen::Index>(q)] = lines[q].empty() ? 0.0 : lines[q].peek();
        const MimoSignals s = signals(x, taps);
        if (!s.y.allFinite() || !x.allFinite())
            throw NonFiniteState("closed-loop state is not finite");
        traj.t[recorded] = k * h;
        traj.y.row(recorded) = s.y.transpose();
        traj.u.row(recorded) = s.u.transpose();
        ++recorded;
        if (s.y.cwiseAbs().maxCoeff() > kBlowUpThreshold) {
            traj.bounded = false;
            break;
        }
        if (k == steps) break;

        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) lines[static_cast<size_t>(i) * m + j].push(s.u[j]);
        const Eigen::VectorXd k1 = derivs(x, taps);
        const Eigen::VectorXd k2 = derivs(x + 0.5 * h * k1, taps);
        const Eigen::VectorXd k3 = derivs(x + 0.5 * h * k2, taps);
        const Eigen::VectorXd k4 = derivs(x + h * k3, taps);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    traj.t.conservativeResize(recorded);
    traj.y.conservativeResize(recorded, m);
    traj.u.conservativeResize(recorded, m);
    return traj;
}

StepResponseMetrics step_metrics(const Eigen::VectorXd& t, const Eigen::VectorXd& y, bool bounded,
                                 double reference) {
    if (t.size() == 0 || t.size() != y.size())
        throw std::invalid_argument("trajectory must be nonempty and consistent");
    StepResponseMetrics metrics;
    metrics.bounded = bounded;

    // Steady-state estimate from the trailing tenth of the horizon; the final
    // sample alone would always sit inside its own band.
    const Eigen::Index n = y.size();
    const Eigen::Index tail = std::max<Eigen::Index>(1, n / 10);
    const double y_final = y.tail(tail).mean();
    metrics.steady_state_error = reference - y_final;

    const double scale = std::max(std::abs(y_final), 1e-12);
    metrics.overshoot = std::max(0.0, (y.maxCoeff() - y_final) / scale);

    const double band = 0.02 * scale;
    Eigen::Index last_outside = -1;
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(y[i] - y_final) > band) last_outside = i;
    // Band violations inside the tail window mean there is no steady state yet.
    if (!bounded || last_outside >= n - tail) {
        metrics.settled = false;
        metrics.settling_time = t[n - 1];
    } else {
        metrics.settling_time = last_outside < 0 ? 0.0 : t[last_outside + 1];
    }
    return metrics;
}

StepResponseMetrics step_metrics(const Trajectory& trajectory, double reference) {
    return step_metrics(trajectory.t, trajectory.y, trajectory.bounded, reference);
}

double min_distance(const Eigen::VectorXcd& samples, Complex point) {
    if (samples.size() == 0) throw std::invalid_argument("empty sample set");
    double best = std::abs(samples[0] - point);
    for (Eigen::Index i = 1; i < samples.size(); ++i)
        best = std::min(best, std::abs(samples[i] - point));
    return best;
}

}  // namespace loopflow
