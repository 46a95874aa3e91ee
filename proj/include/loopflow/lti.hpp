#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "loopflow/errors.hpp"

namespace loopflow {

using Complex = std::complex<double>;

/// Denominator magnitudes below this floor count as an imaginary-axis pole.
inline constexpr double kMagnitudeFloor = 1e-12;

/// Real polynomial in ascending powers: coeffs[k] multiplies s^k.
/// Normalized form strips trailing zero coefficients; the zero polynomial
/// is stored as the single coefficient {0}.
struct Polynomial {
    Eigen::VectorXd coeffs;

    Polynomial() : coeffs(Eigen::VectorXd::Zero(1)) {}
    explicit Polynomial(std::vector<double> c);

    int  degree() const { return static_cast<int>(coeffs.size()) - 1; }
    bool is_zero() const { return coeffs.size() == 1 && coeffs[0] == 0.0; }

    /// Horner evaluation at an arbitrary complex point.
    Complex eval(Complex s) const;
};

/// Rational transfer function num/den with a transport delay e^(-Ts).
struct RationalTF {
    Polynomial num;
    Polynomial den;
    double     delay = 0.0;

    RationalTF() : num({1.0}), den({1.0}) {}
    RationalTF(std::vector<double> num_coeffs, std::vector<double> den_coeffs, double delay_s = 0.0);

    bool is_proper() const { return num.degree() <= den.degree(); }
};

/// One biproper compensator section (s+zero)/(s+pole); unity gain at high frequency.
struct FirstOrderSection {
    double zero = 0.0;
    double pole = 0.0;
};

/// Cascade of first-order sections. The flattened tuning vector is
/// [z1, p1, z2, p2, ...] in section order; all Jacobian and force code
/// relies on this layout.
struct CompensatorChain {
    std::vector<FirstOrderSection> sections;

    CompensatorChain() = default;
    explicit CompensatorChain(std::vector<FirstOrderSection> s) : sections(std::move(s)) {}

    int parameter_count() const { return 2 * static_cast<int>(sections.size()); }

    Eigen::VectorXd to_parameters() const;
    static CompensatorChain from_parameters(const Eigen::VectorXd& lambda);
};

/// Square grid of transfer functions; entry(i, j) maps input j to output i.
struct TFMatrix {
    int                     size = 0;
    std::vector<RationalTF> entries;  // row-major

    TFMatrix() = default;
    explicit TFMatrix(int m) : size(m), entries(static_cast<size_t>(m) * m) {}

    RationalTF&       entry(int i, int j) { return entries[static_cast<size_t>(i) * size + j]; }
    const RationalTF& entry(int i, int j) const { return entries[static_cast<size_t>(i) * size + j]; }
};

/// Strictly increasing positive frequency samples (rad/s).
struct FrequencyGrid {
    Eigen::VectorXd omegas;

    FrequencyGrid() = default;
    explicit FrequencyGrid(Eigen::VectorXd w);

    int count() const { return static_cast<int>(omegas.size()); }

    /// N logarithmically spaced samples over [omega_min, omega_max].
    static FrequencyGrid log_spaced(double omega_min, double omega_max, int count);
};

/// num(s)/den(s)*e^(-Ts) at an arbitrary complex point (delay uses exp(-Ts)).
Complex eval_tf_at(const RationalTF& tf, Complex s, double floor = kMagnitudeFloor);

/// Frequency response G(jw). Throws PoleOnGrid when |den(jw)| is below the floor.
Complex eval_tf(const RationalTF& tf, double omega, double floor = kMagnitudeFloor);

/// Product of section responses at s = jw; the empty chain is the identity.
Complex eval_chain(const CompensatorChain& chain, double omega, double floor = kMagnitudeFloor);

/// Partial derivatives of the chain response with respect to the flattened
/// parameters, ordered [dGc/dz1, dGc/dp1, dGc/dz2, dGc/dp2, ...].
Eigen::VectorXcd chain_partials(const CompensatorChain& chain, double omega,
                                double floor = kMagnitudeFloor);

/// Compensated open-loop samples Q(w_i) = G(jw_i) * Gc(jw_i) over the grid.
Eigen::VectorXcd open_loop_samples(const RationalTF& plant, const CompensatorChain& chain,
                                   const FrequencyGrid& grid, double floor = kMagnitudeFloor);

/// Equivalent forward transfer function of channel i in a decentralized loop:
/// Q_i = [g_ii - sum_{j != i} Gc_j * g_ij * g_ji] * Gc_i.
Complex eftf(const TFMatrix& plants, const std::vector<CompensatorChain>& chains, int channel,
             double omega, double floor = kMagnitudeFloor);

/// The bracketed factor of the EFTF (everything except the channel's own
/// compensator); Q_i = eftf_inner * Gc_i and dQ_i/dLambda_i = eftf_inner * dGc_i.
Complex eftf_inner(const TFMatrix& plants, const std::vector<CompensatorChain>& chains, int channel,
                   double omega, double floor = kMagnitudeFloor);

}  // namespace loopflow
