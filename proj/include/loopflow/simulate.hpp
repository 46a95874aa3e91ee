#pragma once

#include <Eigen/Dense>
#include <variant>
#include <vector>

#include "loopflow/lti.hpp"

namespace loopflow {

/// Controllable canonical realization of a delay-free rational part.
struct StateSpaceModel {
    Eigen::MatrixXd    A;
    Eigen::VectorXd    B;
    Eigen::RowVectorXd C;
    double             D = 0.0;

    int order() const { return static_cast<int>(A.rows()); }
};

/// Realizes num/den (delay handled separately by the caller).
/// Throws ImproperTransferFunction when deg(num) > deg(den).
StateSpaceModel realize(const RationalTF& tf);

/// C (sI - A)^-1 B + D; used to cross-check realizations against eval_tf.
Complex eval_model(const StateSpaceModel& model, Complex s);

/// Circular tap buffer holding round(T/h) past samples, initialized to zero.
/// T = 0 is an exact pass-through.
class DelayLine {
   public:
    DelayLine(double delay_s, double step_s);

    bool   empty() const { return buffer_.empty(); }
    size_t length() const { return buffer_.size(); }
    bool   rounding_mismatch() const { return rounding_mismatch_; }

    /// Oldest buffered sample (the tap for the current step).
    double peek() const { return buffer_[head_]; }
    void   push(double in);
    double tick(double in);

   private:
    std::vector<double> buffer_;
    size_t              head_ = 0;
    bool                rounding_mismatch_ = false;
};

struct Identity {};
struct Saturation {
    double lo = -1.0, hi = 1.0;
};
struct SinusoidalGain {};  // x * (3 + sin(5x)) / 4, inside the [0.5, 1] sector
struct SectorTable {
    // Piecewise-linear x -> phi(x); must pass through the origin. Inputs
    // beyond the table extend the end segments.
    std::vector<std::array<double, 2>> points;
};

using Nonlinearity = std::variant<Identity, Saturation, SinusoidalGain, SectorTable>;

double apply(const Nonlinearity& nl, double x);

struct Trajectory {
    Eigen::VectorXd t;
    Eigen::VectorXd y;
    Eigen::VectorXd u;  // plant input (after delay and nonlinearity)
    bool            bounded = true;
};

struct MimoTrajectory {
    Eigen::VectorXd t;
    Eigen::MatrixXd y;  // column per output
    Eigen::MatrixXd u;  // column per channel, compensator outputs
    bool            bounded = true;
};

/// Unity-feedback loop e = r - y, u = Gc(e), plant input = phi(delayed u),
/// integrated with fixed-step RK4. The delay tap is held over each step;
/// the delay-free loop is evaluated per stage.
Trajectory simulate_closed_loop(const RationalTF& plant, const CompensatorChain& chain,
                                const Nonlinearity& nl, double reference, double horizon, double h);

/// Decentralized unity-feedback MIMO loop: u_i = Gc_i(r_i - y_i), every matrix
/// entry realized independently with its own delay line, outputs summed per row.
MimoTrajectory simulate_mimo_closed_loop(const TFMatrix& plants,
                                         const std::vector<CompensatorChain>& chains,
                                         const Eigen::VectorXd& references, double horizon,
                                         double h);

struct StepResponseMetrics {
    double overshoot = 0.0;           // fraction of the final value
    double settling_time = 0.0;       // time to stay inside the +-2% band
    double steady_state_error = 0.0;  // reference minus final value
    bool   bounded = true;
    bool   settled = true;
};

StepResponseMetrics step_metrics(const Trajectory& trajectory, double reference);
StepResponseMetrics step_metrics(const Eigen::VectorXd& t, const Eigen::VectorXd& y, bool bounded,
                                 double reference);

/// Minimum modulus |q_i - point| over a nonempty sample set.
double min_distance(const Eigen::VectorXcd& samples, Complex point);

}  // namespace loopflow
