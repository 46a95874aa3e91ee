#include <doctest.h>

#include <random>

#include "loopflow/lti.hpp"
#include "oracles.hpp"

using namespace loopflow;

namespace {

const RationalTF kTripleIntegrator({1.0}, {0.0, 0.0, 0.0, 1.0});

CompensatorChain make_chain(std::initializer_list<double> zp) {
    CompensatorChain chain;
    auto it = zp.begin();
    while (it != zp.end()) {
        FirstOrderSection sec;
        sec.zero = *it++;
        sec.pole = *it++;
        chain.sections.push_back(sec);
    }
    return chain;
}

}  // namespace

TEST_CASE("polynomial normalization and evaluation") {
    Polynomial p({1.0, 2.0, 3.0, 0.0, 0.0});
    CHECK(p.degree() == 2);
    CHECK(p.coeffs[2] == 3.0);

    Polynomial zero({0.0, 0.0});
    CHECK(zero.is_zero());
    CHECK(zero.degree() == 0);

    // Horner against the naive power-sum oracle on random polynomials.
    std::mt19937                     rng(12345);
    std::uniform_real_distribution<> coef(-5.0, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> c(1 + trial % 6);
        for (auto& v : c) v = coef(rng);
        c.back() = c.back() == 0.0 ? 1.0 : c.back();
        Polynomial    poly(c);
        const Complex s(coef(rng), coef(rng));
        const Complex expected = oracle::eval_poly_naive(poly.coeffs, s);
        CHECK(std::abs(poly.eval(s) - expected) <= 1e-9 * std::max(1.0, std::abs(expected)));
    }
}

TEST_CASE("eval_tf basics") {
    // 1/(jw)^3 at w = 1 is exactly +j.
    const Complex q = eval_tf(kTripleIntegrator, 1.0);
    CHECK(q.real() == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(q.imag() == doctest::Approx(1.0).epsilon(1e-15));

    const RationalTF unity({1.0}, {1.0});
    CHECK(eval_tf(unity, 0.37) == Complex(1.0, 0.0));

    // Transport delay only rotates the phase.
    const RationalTF double_integrator({1.0}, {0.0, 0.0, 1.0}, 0.1);
    const RationalTF no_delay({1.0}, {0.0, 0.0, 1.0});
    CHECK(std::abs(eval_tf(double_integrator, 2.0)) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(std::abs(eval_tf(no_delay, 2.0)) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("delay isometry for random frequencies") {
    const RationalTF with_delay({1.0, 2.0}, {3.0, 1.0, 1.0}, 0.7);
    const RationalTF without({1.0, 2.0}, {3.0, 1.0, 1.0});
    std::mt19937     rng(7);
    std::uniform_real_distribution<> w(0.01, 100.0);
    for (int i = 0; i < 25; ++i) {
        const double omega = w(rng);
        CHECK(std::abs(eval_tf(with_delay, omega)) ==
              doctest::Approx(std::abs(eval_tf(without, omega))).epsilon(1e-13));
    }
}

TEST_CASE("conjugate symmetry of delay-free responses") {
    const RationalTF tf({2.0, 1.0}, {5.0, 3.0, 1.0});
    std::mt19937     rng(11);
    std::uniform_real_distribution<> w(0.01, 50.0);
    for (int i = 0; i < 25; ++i) {
        const double  omega = w(rng);
        const Complex pos = eval_tf_at(tf, Complex(0.0, omega));
        const Complex neg = eval_tf_at(tf, Complex(0.0, -omega));
        CHECK(std::abs(neg - std::conj(pos)) <= 1e-13 * std::max(1.0, std::abs(pos)));
    }
}

TEST_CASE("pole on the grid is reported") {
    const RationalTF integrator({1.0}, {0.0, 1.0});
    CHECK_THROWS_AS(eval_tf(integrator, 1e-13), PoleOnGrid);
    CHECK_NOTHROW(eval_tf(integrator, 1e-3));
}

TEST_CASE("eval_chain basics") {
    CHECK(eval_chain(CompensatorChain{}, 3.0) == Complex(1.0, 0.0));
    CHECK(eval_chain(make_chain({0.8, 0.8}), 2.5) == Complex(1.0, 0.0));

    // z = 0, p = 1 at w = 1: j/(1+j) = 0.5 + 0.5j by hand arithmetic.
    const Complex q = eval_chain(make_chain({0.0, 1.0}), 1.0);
    CHECK(q.real() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(q.imag() == doctest::Approx(0.5).epsilon(1e-15));

    // z = 0, p = 1.67 against direct complex arithmetic.
    const Complex direct = Complex(0.0, 1.0) / Complex(1.67, 1.0);
    CHECK(std::abs(eval_chain(make_chain({0.0, 1.67}), 1.0) - direct) <= 1e-15);
}

TEST_CASE("chain composition is multiplicative") {
    const CompensatorChain a = make_chain({0.3, 1.2, 2.0, 0.4});
    const CompensatorChain b = make_chain({1.1, 0.9});
    CompensatorChain       ab = a;
    ab.sections.insert(ab.sections.end(), b.sections.begin(), b.sections.end());
    std::mt19937                     rng(3);
    std::uniform_real_distribution<> w(0.01, 100.0);
    for (int i = 0; i < 20; ++i) {
        const double  omega = w(rng);
        const Complex lhs = eval_chain(ab, omega);
        const Complex rhs = eval_chain(a, omega) * eval_chain(b, omega);
        CHECK(std::abs(lhs - rhs) <= 1e-13 * std::max(1.0, std::abs(rhs)));
    }
}

TEST_CASE("chain parameter flattening order") {
    const CompensatorChain chain = make_chain({0.1, 0.2, 0.3, 0.4});
    const Eigen::VectorXd  lambda = chain.to_parameters();
    REQUIRE(lambda.size() == 4);
    CHECK(lambda[0] == 0.1);  // z1
    CHECK(lambda[1] == 0.2);  // p1
    CHECK(lambda[2] == 0.3);  // z2
    CHECK(lambda[3] == 0.4);  // p2
    const CompensatorChain back = CompensatorChain::from_parameters(lambda);
    CHECK(back.sections[1].zero == 0.3);
    CHECK(back.sections[1].pole == 0.4);
}

TEST_CASE("chain partials: analytic values at a removable point") {
    // Section z = p = 1 at w = 0: Gc = 1, dGc/dz = 1, dGc/dp = -1.
    const Eigen::VectorXcd d = chain_partials(make_chain({1.0, 1.0}), 0.0);
    REQUIRE(d.size() == 2);
    CHECK(std::abs(d[0] - Complex(1.0, 0.0)) <= 1e-15);
    CHECK(std::abs(d[1] - Complex(-1.0, 0.0)) <= 1e-15);

    CHECK(chain_partials(CompensatorChain{}, 1.0).size() == 0);
}

TEST_CASE("chain partials match central finite differences") {
    std::mt19937                     rng(99);
    std::uniform_real_distribution<> mag(0.01, 10.0);
    std::uniform_real_distribution<> w(0.01, 100.0);
    std::bernoulli_distribution      sign(0.5);
    for (int trial = 0; trial < 40; ++trial) {
        CompensatorChain chain;
        const int        sections = 1 + trial % 3;
        for (int k = 0; k < sections; ++k) {
            FirstOrderSection sec;
            sec.zero = (sign(rng) ? 1.0 : -1.0) * mag(rng);
            sec.pole = (sign(rng) ? 1.0 : -1.0) * mag(rng);
            chain.sections.push_back(sec);
        }
        const double           omega = w(rng);
        const Eigen::VectorXcd analytic = chain_partials(chain, omega);
        for (int k = 0; k < chain.parameter_count(); ++k) {
            auto perturbed = [&](double value) {
                CompensatorChain c = chain;
                if (k % 2 == 0)
                    c.sections[static_cast<size_t>(k / 2)].zero = value;
                else
                    c.sections[static_cast<size_t>(k / 2)].pole = value;
                return c;
            };
            const double base = k % 2 == 0 ? chain.sections[static_cast<size_t>(k / 2)].zero
                                           : chain.sections[static_cast<size_t>(k / 2)].pole;
            const Complex fd = oracle::central_diff(
                [&](double v) { return eval_chain(perturbed(v), omega); }, base, 1e-6);
            CHECK(std::abs(analytic[k] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("open_loop_samples composes plant and chain") {
    const FrequencyGrid grid = FrequencyGrid::log_spaced(0.1, 10.0, 17);

    const RationalTF unity({1.0}, {1.0});
    Eigen::VectorXcd q = open_loop_samples(unity, CompensatorChain{}, grid);
    for (int i = 0; i < grid.count(); ++i) CHECK(q[i] == Complex(1.0, 0.0));

    const CompensatorChain chain = make_chain({0.45, 0.55});
    q = open_loop_samples(kTripleIntegrator, chain, grid);
    for (int i = 0; i < grid.count(); ++i) {
        const Complex expected =
            eval_tf(kTripleIntegrator, grid.omegas[i]) * eval_chain(chain, grid.omegas[i]);
        CHECK(q[i] == expected);
    }

    // 1/s^3 alone at w = 1 is +j.
    Eigen::VectorXd w(1);
    w << 1.0;
    q = open_loop_samples(kTripleIntegrator, CompensatorChain{}, FrequencyGrid(w));
    CHECK(std::abs(q[0] - Complex(0.0, 1.0)) <= 1e-15);
}

TEST_CASE("frequency grid invariants") {
    CHECK_THROWS(FrequencyGrid::log_spaced(0.0, 1.0, 8));
    CHECK_THROWS(FrequencyGrid::log_spaced(2.0, 1.0, 8));
    Eigen::VectorXd bad(2);
    bad << 1.0, 1.0;
    CHECK_THROWS(FrequencyGrid(bad));

    const FrequencyGrid grid = FrequencyGrid::log_spaced(1e-2, 1e2, 256);
    CHECK(grid.count() == 256);
    CHECK(grid.omegas[0] == doctest::Approx(1e-2));
    CHECK(grid.omegas[255] == 1e2);
    for (int i = 1; i < 256; ++i) CHECK(grid.omegas[i] > grid.omegas[i - 1]);
}

namespace {

/// Independent evaluation of the two-channel EFTF closed forms for the plant
/// [[1/s^3, 1/s^2], [1/s, e^(-0.2s)/s^2]], written out by hand.
Complex eftf_closed_form(int channel, const CompensatorChain& c1, const CompensatorChain& c2,
                         double omega) {
    const Complex s(0.0, omega);
    const Complex gc1 = eval_chain(c1, omega);
    const Complex gc2 = eval_chain(c2, omega);
    const Complex s3 = s * s * s;
    if (channel == 0) return (1.0 / s3 - gc2 / s3) * gc1;
    return (std::exp(-0.2 * s) / (s * s) - gc1 / s3) * gc2;
}

}  // namespace

TEST_CASE("eftf reductions and closed form") {
    TFMatrix diag(2);
    diag.entry(0, 0) = RationalTF({1.0}, {0.0, 0.0, 0.0, 1.0});
    diag.entry(0, 1) = RationalTF({0.0}, {1.0});
    diag.entry(1, 0) = RationalTF({0.0}, {1.0});
    diag.entry(1, 1) = RationalTF({1.0}, {0.0, 0.0, 1.0});
    const std::vector<CompensatorChain> chains = {make_chain({0.4, 0.6}), make_chain({0.2, 0.9})};

    // Diagonal plant: the EFTF collapses to the SISO product per channel.
    for (double omega : {0.1, 1.0, 7.3}) {
        for (int c = 0; c < 2; ++c) {
            const Complex expected =
                eval_tf(diag.entry(c, c), omega) * eval_chain(chains[static_cast<size_t>(c)], omega);
            CHECK(std::abs(eftf(diag, chains, c, omega) - expected) <= 1e-15);
        }
    }

    // M = 1 reduces to the open-loop product.
    TFMatrix single(1);
    single.entry(0, 0) = kTripleIntegrator;
    const std::vector<CompensatorChain> one = {make_chain({0.45, 0.55})};
    CHECK(eftf(single, one, 0, 2.0) ==
          eval_tf(kTripleIntegrator, 2.0) * eval_chain(one[0], 2.0));

    // The coupled 2x2 plant against the hand-written closed form.
    TFMatrix coupled(2);
    coupled.entry(0, 0) = RationalTF({1.0}, {0.0, 0.0, 0.0, 1.0});
    coupled.entry(0, 1) = RationalTF({1.0}, {0.0, 0.0, 1.0});
    coupled.entry(1, 0) = RationalTF({1.0}, {0.0, 1.0});
    coupled.entry(1, 1) = RationalTF({1.0}, {0.0, 0.0, 1.0}, 0.2);
    const std::vector<CompensatorChain> paper_chains = {
        make_chain({0.05, 1.272, 0.05, 1.302}), make_chain({0.05, 1.34, 0.05, 1.35})};
    for (double omega : {0.3, 1.0, 4.0}) {
        for (int c = 0; c < 2; ++c) {
            const Complex expected =
                eftf_closed_form(c, paper_chains[0], paper_chains[1], omega);
            const Complex got = eftf(coupled, paper_chains, c, omega);
            CHECK(std::abs(got - expected) <= 1e-12 * std::max(1.0, std::abs(expected)));
        }
    }
}
