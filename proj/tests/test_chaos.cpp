#include <catch2/catch_amalgamated.hpp>

#include <complex>

#include "ultrakin/chaos.hpp"

using namespace ultrakin;

namespace {

StepControl loose_control() {
    StepControl c;
    c.rel_tol = 1e-8;
    c.abs_tol = 1e-10;
    return c;
}

} // namespace

TEST_CASE("surface samples satisfy the energy constraint and are reproducible") {
    NondimParams params{1.0, 1.0, 2e-2, 1.1};
    auto pts = sample_energy_surface(100.0, params, 200, 42);
    auto again = sample_energy_surface(100.0, params, 200, 42);
    REQUIRE(pts.size() == 200);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        Eigen::VectorXd y = pts[i].to_vector();
        REQUIRE(std::abs(nondim_energy(y, params.c1, params.c2) - 100.0) < 1e-10);
        REQUIRE(pts[i].x_m == 0.0);
        REQUIRE(pts[i].x_a == again[i].x_a);
        REQUIRE(pts[i].p_a == again[i].p_a);
        REQUIRE(pts[i].p_m == again[i].p_m);
    }
}

TEST_CASE("decoupled sampling solves the explicit quadratic") {
    NondimParams params{1.0, 1.0, 0.0, 1.1};
    for (const auto& pt : sample_energy_surface(100.0, params, 50, 7)) {
        double expected_sq = (100.0 - pt.x_a * pt.x_a - pt.p_a * pt.p_a - 2.0 * pt.x_a) / 1.1;
        REQUIRE(pt.p_m * pt.p_m == Catch::Approx(expected_sq).margin(1e-10));
    }
}

TEST_CASE("unreachable energies are rejected after bounded redraws") {
    NondimParams params{1.0, 1.0, 0.0, 1.1};
    REQUIRE_THROWS_AS(sample_energy_surface(-5.0, params, 1, 3), NumericError);
    REQUIRE_THROWS_AS(sample_energy_surface(100.0, params, 0, 3), std::invalid_argument);
}

TEST_CASE("decoupled molecular rotation pins the section map fixed point") {
    NondimField field{0.0, 1.1, true};
    auto section = poincare_section(field, {{1.0, 0.5, 0.0, 2.0}}, 200.0);
    const auto& traj = section.trajectories.at(0);
    REQUIRE_FALSE(traj.degenerate);
    // molecular angle advances by c2 per unit time, so positive crossings sit
    // at multiples of 2 pi / c2 with P_M back at its initial value
    REQUIRE(traj.crossings.size() == 35);
    const std::complex<double> a0{1.0, 0.5};
    for (std::size_t k = 0; k < traj.crossings.size(); ++k) {
        const auto& c = traj.crossings[k];
        REQUIRE(c.p_m == Catch::Approx(2.0).margin(1e-8));
        REQUIRE(c.tau ==
                Catch::Approx(2.0 * std::numbers::pi * (double)(k + 1) / 1.1).margin(1e-9));
        auto a = (a0 + 1.0) * std::exp(std::complex<double>(0.0, -c.tau)) - 1.0;
        REQUIRE(c.x_a == Catch::Approx(a.real()).margin(1e-8));
        REQUIRE(c.p_a == Catch::Approx(a.imag()).margin(1e-8));
    }
}

TEST_CASE("motion inside the section surface is marked degenerate") {
    NondimField field{0.0, 1.1, true};
    auto section = poincare_section(field, {{1.0, 0.5, 0.0, 0.0}}, 50.0);
    REQUIRE(section.trajectories.at(0).degenerate);
    REQUIRE(section.trajectories.at(0).crossings.empty());
}

TEST_CASE("crossing refinement preserves the energy constraint") {
    NondimParams params{1.0, 1.0, 2e-2, 1.1};
    NondimField field{params.c1, params.c2, true};
    auto pts = sample_energy_surface(100.0, params, 5, 7);
    auto section = poincare_section(field, pts, 250.0);
    std::size_t total = 0;
    for (const auto& traj : section.trajectories) {
        total += traj.crossings.size();
        for (const auto& c : traj.crossings) {
            Eigen::VectorXd y(4);
            y << c.x_a, c.p_a, 0.0, c.p_m;
            REQUIRE(std::abs(nondim_energy(y, params.c1, params.c2) - 100.0) < 1e-8);
        }
    }
    REQUIRE(total > 100);
}

TEST_CASE("restarting from a crossing reproduces the subsequent crossings") {
    NondimParams params{1.0, 1.0, 2e-2, 1.1};
    NondimField field{params.c1, params.c2, true};
    auto pts = sample_energy_surface(100.0, params, 1, 7);
    auto section = poincare_section(field, pts, 500.0);
    const auto& first = section.trajectories.at(0).crossings;
    REQUIRE(first.size() > 21);

    auto rerun = poincare_section(field, {{first[0].x_a, first[0].p_a, 0.0, first[0].p_m}}, 500.0);
    const auto& replay = rerun.trajectories.at(0).crossings;
    REQUIRE(replay.size() >= 20);
    for (std::size_t k = 0; k < 20; ++k) {
        REQUIRE(replay[k].x_a == Catch::Approx(first[k + 1].x_a).margin(1e-6));
        REQUIRE(replay[k].p_a == Catch::Approx(first[k + 1].p_a).margin(1e-6));
        REQUIRE(replay[k].p_m == Catch::Approx(first[k + 1].p_m).margin(1e-6));
    }
}

TEST_CASE("poincare section rejects a non-positive horizon") {
    NondimField field{0.0, 1.1, true};
    REQUIRE_THROWS_AS(poincare_section(field, {{1.0, 0.0, 0.0, 1.0}}, 0.0),
                      std::invalid_argument);
}

TEST_CASE("filling fraction of a repeated point is one cell") {
    PoincareSection section;
    section.trajectories.resize(1);
    for (int i = 0; i < 5; ++i)
        section.trajectories[0].crossings.push_back({1.0, 2.0, 0.5, (double)i});
    REQUIRE(filling_fraction(section, 32) == Catch::Approx(1.0 / 1024.0));
}

TEST_CASE("filling fraction validates its inputs") {
    PoincareSection empty;
    REQUIRE_THROWS_AS(filling_fraction(empty, 32), std::invalid_argument);
    empty.trajectories.resize(1);
    empty.trajectories[0].degenerate = true;
    REQUIRE_THROWS_AS(filling_fraction(empty, 32), std::invalid_argument);
    PoincareSection one;
    one.trajectories.resize(1);
    one.trajectories[0].crossings.push_back({0.0, 0.0, 0.0, 0.0});
    REQUIRE_THROWS_AS(filling_fraction(one, 7), std::invalid_argument);
}

TEST_CASE("curve-like sections occupy a strip of cells that shrinks with resolution") {
    NondimParams params{1.0, 1.0, 0.0, std::numbers::sqrt2};
    NondimField field{params.c1, params.c2, true};
    auto pts = sample_energy_surface(100.0, params, 5, 11);
    auto section = poincare_section(field, pts, 3000.0, loose_control());
    double f16 = filling_fraction(section, 16);
    double f64 = filling_fraction(section, 64);
    REQUIRE(f64 < f16);
    double per_row16 = f16 * 16.0, per_row64 = f64 * 64.0;
    REQUIRE(per_row64 < 3.0 * per_row16);
    REQUIRE(per_row64 > per_row16 / 3.0);
}

TEST_CASE("chaotic sections cover several times more cells than integrable ones") {
    auto control = loose_control();
    double fractions[2];
    int i = 0;
    for (double c1 : {1e-4, 2e-2}) {
        NondimParams params{1.0, 1.0, c1, 1.1};
        NondimField field{c1, 1.1, true};
        auto pts = sample_energy_surface(100.0, params, 25, 2026);
        auto section = poincare_section(field, pts, 2000.0, control);
        fractions[i++] = filling_fraction(section, 32);
    }
    REQUIRE(fractions[1] >= 5.0 * fractions[0]);
}

TEST_CASE("linear flow has a vanishing stretching rate") {
    NondimParams params{1.0, 1.0, 0.0, 1.1};
    auto pts = sample_energy_surface(100.0, params, 1, 123);
    NondimField field{0.0, 1.1, true};
    auto est = lyapunov_max(field, pts[0], 5e3, 1.0, 1e-7, loose_control());
    REQUIRE(std::abs(est.lambda_max) < 1e-4);
    REQUIRE(est.horizon == Catch::Approx(5e3));
    REQUIRE(est.convergence.size() == 5000);
    REQUIRE(est.convergence.back() == est.lambda_max);
}

TEST_CASE("intermediate pairing produces strong exponential separation") {
    NondimParams params{1.0, 1.0, 1e-1, 1.1};
    auto pts = sample_energy_surface(100.0, params, 1, 123);
    NondimField field{1e-1, 1.1, true};
    auto est = lyapunov_max(field, pts[0], 5e3, 1.0, 1e-7, loose_control());
    REQUIRE(est.lambda_max > 1e-2);
}

TEST_CASE("pairing-dominated flow is nearly integrable at long horizon") {
    NondimParams params{1.0, 1.0, 1.0, 1.1};
    auto pts = sample_energy_surface(100.0, params, 1, 123);
    NondimField field{1.0, 1.1, true};
    auto est = lyapunov_max(field, pts[0], 2e4, 1.0, 1e-7, loose_control());
    REQUIRE(est.lambda_max < 1e-3);
}

TEST_CASE("lyapunov estimation validates horizon and interval") {
    NondimField field{0.0, 1.1, true};
    REQUIRE_THROWS_AS(lyapunov_max(field, {1.0, 0.0, 0.0, 1.0}, 1.0, 2.0),
                      std::invalid_argument);
}

TEST_CASE("synthetic sinusoid is recovered to one percent") {
    ObservableSeries series;
    for (int i = 0; i <= 1280; ++i) {
        double tau = 0.25 * i;
        series.times.push_back(tau);
        series.values.push_back(100.0 + 7.0 * std::sin(0.1 * tau));
    }
    auto fit = measure_modulation(series);
    REQUIRE(fit.amplitude == Catch::Approx(7.0).epsilon(0.01));
    REQUIRE(fit.frequency == Catch::Approx(0.1).epsilon(0.01));
    REQUIRE(fit.carrier_mean == Catch::Approx(100.0).epsilon(0.01));
    REQUIRE(fit.residual < 0.07);
}

TEST_CASE("weak pairing modulation matches the perturbative prediction") {
    const double c1 = 8e-5, c2 = 1.1, a0 = 200.0;
    NondimField field{c1, c2, true};
    MeanFieldState init;
    init.alpha = {Complex(a0, 0.0), 0.0};
    auto traj = integrate_meanfield(field, init, 400.0, 0.05);
    ObservableSeries intensity;
    intensity.times = traj.times;
    for (const auto& state : traj.states)
        intensity.values.push_back(std::norm(state.alpha[0]));
    auto fit = measure_modulation(intensity);
    auto pred = perturbative_modulation(c1, c2, a0);
    REQUIRE(pred.valid);
    REQUIRE(fit.amplitude == Catch::Approx(pred.amplitude).epsilon(0.10));
    REQUIRE(fit.frequency == Catch::Approx(pred.frequency).epsilon(0.05));
}

TEST_CASE("constant series yields zero modulation") {
    ObservableSeries series;
    for (int i = 0; i < 64; ++i) {
        series.times.push_back(0.5 * i);
        series.values.push_back(42.0);
    }
    auto fit = measure_modulation(series);
    REQUIRE(fit.amplitude == 0.0);
    REQUIRE(fit.frequency == 0.0);
    REQUIRE(fit.carrier_mean == Catch::Approx(42.0));
}

TEST_CASE("series covering too few periods are rejected") {
    ObservableSeries series;
    for (int i = 0; i <= 400; ++i) {
        double tau = 0.25 * i; // 100 time units: 1.6 periods at omega = 0.1
        series.times.push_back(tau);
        series.values.push_back(100.0 + 7.0 * std::sin(0.1 * tau));
    }
    REQUIRE_THROWS_AS(measure_modulation(series), NumericError);
    ObservableSeries tiny;
    tiny.times = {0, 1, 2};
    tiny.values = {1, 2, 3};
    REQUIRE_THROWS_AS(measure_modulation(tiny), std::invalid_argument);
}
