#include <doctest.h>

#include <random>

#include "loopflow/simulate.hpp"
#include "oracles.hpp"

using namespace loopflow;

namespace {

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

TEST_CASE("controllable canonical realization") {
    // 1/(s+1)
    StateSpaceModel m = realize(RationalTF({1.0}, {1.0, 1.0}));
    REQUIRE(m.order() == 1);
    CHECK(m.A(0, 0) == -1.0);
    CHECK(m.B(0) == 1.0);
    CHECK(m.C(0) == 1.0);
    CHECK(m.D == 0.0);

    // A constant has no state.
    m = realize(RationalTF({3.0}, {2.0}));
    CHECK(m.order() == 0);
    CHECK(m.D == 1.5);

    // 1/s^3: companion form with zero characteristic coefficients.
    m = realize(RationalTF({1.0}, {0.0, 0.0, 0.0, 1.0}));
    REQUIRE(m.order() == 3);
    CHECK(m.A.row(2).norm() == 0.0);
    CHECK(m.A(0, 1) == 1.0);
    CHECK(m.A(1, 2) == 1.0);
    CHECK(m.C(0) == 1.0);

    CHECK_THROWS_AS(realize(RationalTF({1.0, 2.0, 1.0}, {1.0, 1.0})), ImproperTransferFunction);
}

TEST_CASE("realization matches the frequency response at random frequencies") {
    const std::vector<RationalTF> plants = {
        RationalTF({1.0}, {0.0, 0.0, 0.0, 1.0}),      // 1/s^3
        RationalTF({1.0}, {0.0, 0.0, 1.0}),           // 1/s^2
        RationalTF({2.0, 1.0}, {5.0, 3.0, 1.0}),      // (s+2)/(s^2+3s+5)
        RationalTF({1.0, 1.0}, {2.0, 1.0}),           // biproper (s+1)/(s+2)
        RationalTF({0.45, 1.0}, {0.55, 1.0}),         // compensator section
    };
    std::mt19937                     rng(2024);
    std::uniform_real_distribution<> w(0.01, 100.0);
    for (const auto& tf : plants) {
        const StateSpaceModel m = realize(tf);
        const RationalTF      delay_free(
            std::vector<double>(tf.num.coeffs.data(), tf.num.coeffs.data() + tf.num.coeffs.size()),
            std::vector<double>(tf.den.coeffs.data(), tf.den.coeffs.data() + tf.den.coeffs.size()));
        for (int i = 0; i < 16; ++i) {
            const double  omega = w(rng);
            const Complex expected = eval_tf(delay_free, omega);
            const Complex got = eval_model(m, Complex(0.0, omega));
            CHECK(std::abs(got - expected) <= 1e-8 * std::max(1.0, std::abs(expected)));
        }
    }
}

TEST_CASE("delay line buffering") {
    DelayLine pass(0.0, 1e-3);
    CHECK(pass.empty());
    for (double x : {1.0, -2.0, 3.5}) CHECK(pass.tick(x) == x);

    DelayLine line(0.05, 1e-2);  // five taps
    CHECK(line.length() == 5);
    CHECK_FALSE(line.rounding_mismatch());
    for (int i = 0; i < 5; ++i) CHECK(line.tick(static_cast<double>(i + 1)) == 0.0);
    CHECK(line.tick(99.0) == 1.0);
    CHECK(line.tick(99.0) == 2.0);

    DelayLine odd(0.0105, 1e-2);
    CHECK(odd.rounding_mismatch());
    CHECK(odd.length() == 1);
}

TEST_CASE("nonlinearities") {
    CHECK(apply(Identity{}, 0.7) == 0.7);

    const Saturation sat{-0.2, 0.2};
    CHECK(apply(sat, 10.0) == 0.2);
    CHECK(apply(sat, -10.0) == -0.2);
    CHECK(apply(sat, 0.1) == 0.1);

    // The sinusoidal gain stays inside the [0.5, 1] sector.
    for (int i = 1; i <= 2000; ++i) {
        const double x = -10.0 + 20.0 * i / 2000.0;
        if (x == 0.0) continue;
        const double ratio = apply(SinusoidalGain{}, x) / x;
        CHECK(ratio >= 0.5 - 1e-12);
        CHECK(ratio <= 1.0 + 1e-12);
    }

    SectorTable table;
    table.points = {{-1.0, -0.5}, {0.0, 0.0}, {1.0, 0.8}};
    CHECK(apply(table, 0.0) == 0.0);
    CHECK(apply(table, 0.5) == doctest::Approx(0.4));
    CHECK(apply(table, -0.5) == doctest::Approx(-0.25));
    CHECK(apply(table, 2.0) == doctest::Approx(1.6));  // end segment extended
}

TEST_CASE("closed loop matches the analytic first-order solution") {
    const RationalTF plant({1.0}, {1.0, 1.0});
    const Trajectory traj =
        simulate_closed_loop(plant, CompensatorChain{}, Identity{}, 1.0, 5.0, 1e-3);
    REQUIRE(traj.t.size() == 5001);
    CHECK(traj.bounded);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < traj.t.size(); ++i)
        worst = std::max(worst, std::abs(traj.y[i] - oracle::first_order_closed_loop(traj.t[i])));
    CHECK(worst <= 1e-4);
}

TEST_CASE("RK4 converges at fourth order on the delay-free loop") {
    const RationalTF plant({1.0}, {1.0, 1.0});
    auto worst_error = [&](double h) {
        const Trajectory traj =
            simulate_closed_loop(plant, CompensatorChain{}, Identity{}, 1.0, 2.0, h);
        double worst = 0.0;
        for (Eigen::Index i = 0; i < traj.t.size(); ++i)
            worst = std::max(worst, std::abs(traj.y[i] - oracle::first_order_closed_loop(traj.t[i])));
        return worst;
    };
    const double coarse = worst_error(4e-2);
    const double fine = worst_error(2e-2);
    CHECK(coarse / fine >= 8.0);
}

TEST_CASE("zero reference keeps the loop at rest") {
    const RationalTF plant({1.0}, {2.0, 3.0, 1.0});
    const Trajectory traj =
        simulate_closed_loop(plant, make_chain({0.5, 1.5}), Identity{}, 0.0, 1.0, 1e-3);
    CHECK(traj.y.cwiseAbs().maxCoeff() == 0.0);
    CHECK(traj.u.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("saturation bounds the plant input") {
    const RationalTF plant({1.0}, {1.0, 1.0});
    const Trajectory traj = simulate_closed_loop(plant, make_chain({2.0, 0.5}),
                                                 Saturation{-0.2, 0.2}, 1000.0, 2.0, 1e-3);
    CHECK(traj.u.cwiseAbs().maxCoeff() <= 0.2);
}

TEST_CASE("unstable loop aborts as unbounded") {
    // 1/s^3 under plain unity feedback is unstable.
    const RationalTF plant({1.0}, {0.0, 0.0, 0.0, 1.0});
    const Trajectory traj =
        simulate_closed_loop(plant, CompensatorChain{}, Identity{}, 1.0, 200.0, 1e-2);
    CHECK_FALSE(traj.bounded);
    CHECK(traj.t.size() < 20001);  // aborted before the horizon

    const StepResponseMetrics m = step_metrics(traj, 1.0);
    CHECK_FALSE(m.bounded);
    CHECK_FALSE(m.settled);
}

TEST_CASE("biproper plant with delay-free identity loop uses the scalar solve") {
    // (s+1)/(s+2) in unity feedback gives T(s) = (s+1)/(2s+3), dc gain 1/3.
    const RationalTF plant({1.0, 1.0}, {2.0, 1.0});
    const Trajectory traj =
        simulate_closed_loop(plant, CompensatorChain{}, Identity{}, 1.0, 10.0, 1e-3);
    CHECK(traj.bounded);
    CHECK(traj.y[traj.y.size() - 1] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("step metrics") {
    // Analytic monotone trajectory toward 0.5.
    Eigen::VectorXd t(6001), y(6001);
    for (int i = 0; i <= 6000; ++i) {
        t[i] = i * 1e-2;
        y[i] = oracle::first_order_closed_loop(t[i]);
    }
    StepResponseMetrics m = step_metrics(t, y, true, 1.0);
    CHECK(m.overshoot == 0.0);
    CHECK(m.steady_state_error == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(m.settled);
    // 2% band around 0.5 entered when e^(-2t) = 0.02: t ~ 1.956.
    CHECK(m.settling_time == doctest::Approx(1.956).epsilon(0.01));

    // Constant at the reference settles immediately with no overshoot.
    Eigen::VectorXd flat = Eigen::VectorXd::Constant(100, 2.0);
    Eigen::VectorXd tf_ = Eigen::VectorXd::LinSpaced(100, 0.0, 9.9);
    m = step_metrics(tf_, flat, true, 2.0);
    CHECK(m.overshoot == 0.0);
    CHECK(m.settling_time == 0.0);
    CHECK(m.steady_state_error == 0.0);
    CHECK(m.settled);

    // A sustained oscillation never settles.
    Eigen::VectorXd osc(1000);
    for (int i = 0; i < 1000; ++i) osc[i] = 1.0 + 0.5 * std::sin(0.1 * i);
    m = step_metrics(Eigen::VectorXd::LinSpaced(1000, 0.0, 99.9), osc, true, 1.0);
    CHECK_FALSE(m.settled);
}

TEST_CASE("min distance") {
    Eigen::VectorXcd samples(3);
    samples << Complex(0.0, 0.0), Complex(0.0, 0.0), Complex(0.0, 0.0);
    CHECK(min_distance(samples, Complex(-1.0, 0.0)) == 1.0);

    Eigen::VectorXcd one(1);
    one << Complex(-1.0, 0.0);
    CHECK(min_distance(one, Complex(-1.0, 0.0)) == 0.0);
}

TEST_CASE("diagonal MIMO simulation equals per-channel SISO simulation") {
    TFMatrix plants(2);
    plants.entry(0, 0) = RationalTF({1.0}, {1.0, 1.0});
    plants.entry(0, 1) = RationalTF({0.0}, {1.0});
    plants.entry(1, 0) = RationalTF({0.0}, {1.0});
    plants.entry(1, 1) = RationalTF({2.0}, {3.0, 2.0, 1.0});
    const std::vector<CompensatorChain> chains = {make_chain({0.5, 1.0}),
                                                  make_chain({0.3, 0.8, 1.2, 2.0})};
    Eigen::VectorXd refs(2);
    refs << 1.0, -0.5;

    const MimoTrajectory mimo = simulate_mimo_closed_loop(plants, chains, refs, 4.0, 1e-3);
    CHECK(mimo.bounded);
    for (int c = 0; c < 2; ++c) {
        const Trajectory siso = simulate_closed_loop(plants.entry(c, c), chains[static_cast<size_t>(c)],
                                                     Identity{}, refs[c], 4.0, 1e-3);
        REQUIRE(siso.t.size() == mimo.t.size());
        double worst = 0.0;
        for (Eigen::Index i = 0; i < siso.t.size(); ++i)
            worst = std::max(worst, std::abs(siso.y[i] - mimo.y(i, c)));
        CHECK(worst <= 1e-12);
    }

    const MimoTrajectory rest =
        simulate_mimo_closed_loop(plants, chains, Eigen::VectorXd::Zero(2), 1.0, 1e-3);
    CHECK(rest.y.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("delayed entries shift the MIMO response") {
    TFMatrix plants(1);
    plants.entry(0, 0) = RationalTF({1.0}, {1.0, 1.0}, 0.5);
    const std::vector<CompensatorChain> chains = {CompensatorChain{}};
    const MimoTrajectory traj =
        simulate_mimo_closed_loop(plants, chains, Eigen::VectorXd::Ones(1), 3.0, 1e-3);
    // Nothing reaches the output before the transport delay elapses.
    for (Eigen::Index i = 0; i < traj.t.size(); ++i) {
        if (traj.t[i] < 0.5 - 1e-9) CHECK(traj.y(i, 0) == 0.0);
    }
    CHECK(traj.y(traj.t.size() - 1, 0) > 0.1);
}
