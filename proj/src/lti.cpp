#include "loopflow/lti.hpp"

#include <cmath>
#include <stdexcept>

namespace loopflow {

Polynomial::Polynomial(std::vector<double> c) {
    if (c.empty()) throw std::invalid_argument("polynomial needs at least one coefficient");
    size_t n = c.size();
    while (n > 1 && c[n - 1] == 0.0) --n;
    coeffs = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(n));
}

Complex Polynomial::eval(Complex s) const {
    Complex acc = coeffs[coeffs.size() - 1];
    for (Eigen::Index k = coeffs.size() - 2; k >= 0; --k) acc = acc * s + coeffs[k];
    return acc;
}

RationalTF::RationalTF(std::vector<double> num_coeffs, std::vector<double> den_coeffs, double delay_s)
    : num(std::move(num_coeffs)), den(std::move(den_coeffs)), delay(delay_s) {
    if (den.is_zero()) throw std::invalid_argument("denominator is identically zero");
    if (delay < 0.0) throw std::invalid_argument("delay must be non-negative");
}

Eigen::VectorXd CompensatorChain::to_parameters() const {
    Eigen::VectorXd lambda(parameter_count());
    for (size_t k = 0; k < sections.size(); ++k) {
        lambda[2 * k]     = sections[k].zero;
        lambda[2 * k + 1] = sections[k].pole;
    }
    return lambda;
}

CompensatorChain CompensatorChain::from_parameters(const Eigen::VectorXd& lambda) {
    if (lambda.size() % 2 != 0) throw std::invalid_argument("parameter vector length must be even");
    CompensatorChain chain;
    chain.sections.resize(static_cast<size_t>(lambda.size() / 2));
    for (size_t k = 0; k < chain.sections.size(); ++k) {
        chain.sections[k].zero = lambda[2 * k];
        chain.sections[k].pole = lambda[2 * k + 1];
    }
    return chain;
}

FrequencyGrid::FrequencyGrid(Eigen::VectorXd w) : omegas(std::move(w)) {
    for (Eigen::Index i = 0; i < omegas.size(); ++i) {
        if (!(omegas[i] > 0.0)) throw std::invalid_argument("grid frequencies must be positive");
        if (i > 0 && !(omegas[i] > omegas[i - 1]))
            throw std::invalid_argument("grid frequencies must be strictly increasing");
    }
}

FrequencyGrid FrequencyGrid::log_spaced(double omega_min, double omega_max, int count) {
    if (count < 1) throw std::invalid_argument("grid needs at least one sample");
    if (!(omega_min > 0.0) || !(omega_max > omega_min))
        throw std::invalid_argument("need 0 < omega_min < omega_max");
    Eigen::VectorXd w(count);
    if (count == 1) {
        w[0] = omega_min;
        return FrequencyGrid(std::move(w));
    }
    const double lo = std::log(omega_min), hi = std::log(omega_max);
    for (int i = 0; i < count; ++i)
        w[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / (count - 1));
    w[count - 1] = omega_max;  // pin the endpoint against rounding
    return FrequencyGrid(std::move(w));
}

Complex eval_tf_at(const RationalTF& tf, Complex s, double floor) {
    const Complex d = tf.den.eval(s);
    if (std::abs(d) < floor) throw PoleOnGrid(s.imag());
    Complex value = tf.num.eval(s) / d;
    if (tf.delay > 0.0) value *= std::exp(-tf.delay * s);
    return value;
}

Complex eval_tf(const RationalTF& tf, double omega, double floor) {
    return eval_tf_at(tf, Complex(0.0, omega), floor);
}

Complex eval_chain(const CompensatorChain& chain, double omega, double floor) {
    const Complex s(0.0, omega);
    Complex       value(1.0, 0.0);
    for (const auto& sec : chain.sections) {
        const Complex d = s + Complex(sec.pole, 0.0);
        if (std::abs(d) < floor) throw PoleOnGrid(omega);
        value *= (s + Complex(sec.zero, 0.0)) / d;
    }
    return value;
}

Eigen::VectorXcd chain_partials(const CompensatorChain& chain, double omega, double floor) {
    const Complex s(0.0, omega);
    const size_t  n = chain.sections.size();

    // Product of all sections except section k. O(L^2), which keeps the
    // z-partial finite even when jw + z_k vanishes (Gc/(jw+z_k) does not).
    Eigen::VectorXcd partials(2 * n);
    for (size_t k = 0; k < n; ++k) {
        Complex others(1.0, 0.0);
        for (size_t i = 0; i < n; ++i) {
            if (i == k) continue;
            const Complex d = s + Complex(chain.sections[i].pole, 0.0);
            if (std::abs(d) < floor) throw PoleOnGrid(omega);
            others *= (s + Complex(chain.sections[i].zero, 0.0)) / d;
        }
        const Complex dk = s + Complex(chain.sections[k].pole, 0.0);
        if (std::abs(dk) < floor) throw PoleOnGrid(omega);
        const Complex zk = s + Complex(chain.sections[k].zero, 0.0);
        partials[2 * k]     = others / dk;             // dGc/dz_k
        partials[2 * k + 1] = -others * zk / (dk * dk);  // dGc/dp_k
    }
    return partials;
}

Eigen::VectorXcd open_loop_samples(const RationalTF& plant, const CompensatorChain& chain,
                                   const FrequencyGrid& grid, double floor) {
    Eigen::VectorXcd q(grid.count());
    for (int i = 0; i < grid.count(); ++i)
        q[i] = eval_tf(plant, grid.omegas[i], floor) * eval_chain(chain, grid.omegas[i], floor);
    return q;
}

Complex eftf_inner(const TFMatrix& plants, const std::vector<CompensatorChain>& chains, int channel,
                   double omega, double floor) {
    if (plants.size < 1) throw std::invalid_argument("empty plant matrix");
    if (static_cast<int>(chains.size()) != plants.size)
        throw std::invalid_argument("need one chain per channel");
    Complex inner = eval_tf(plants.entry(channel, channel), omega, floor);
    for (int j = 0; j < plants.size; ++j) {
        if (j == channel) continue;
        inner -= eval_chain(chains[static_cast<size_t>(j)], omega, floor) *
                 eval_tf(plants.entry(channel, j), omega, floor) *
                 eval_tf(plants.entry(j, channel), omega, floor);
    }
    return inner;
}

Complex eftf(const TFMatrix& plants, const std::vector<CompensatorChain>& chains, int channel,
             double omega, double floor) {
    return eftf_inner(plants, chains, channel, omega, floor) *
           eval_chain(chains[static_cast<size_t>(channel)], omega, floor);
}

}  // namespace loopflow
