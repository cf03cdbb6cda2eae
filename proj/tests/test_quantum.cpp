#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "ultrakin/quantum.hpp"

using namespace ultrakin;
using Catch::Approx;

namespace {

const char* kDiatomic = "A + A <k=1.0> A2";

std::vector<double> uniform_grid(double t0, double t1, int n) {
    std::vector<double> g(n + 1);
    for (int i = 0; i <= n; ++i) g[i] = t0 + (t1 - t0) * i / n;
    return g;
}

// State |2,0> in the charge-2 sector of the diatomic network.
QuantumState two_atom_state() {
    auto net = parse_network(kDiatomic);
    QuantumState state;
    state.blocks.push_back(sector_basis(net, ChargeVector{{1, 2}}, 2, FockCutoff{{2, 1}}));
    Eigen::VectorXcd amp(2);
    amp << 1.0, 0.0;
    state.amplitudes.push_back(amp);
    return state;
}

} // namespace

TEST_CASE("coherent product states have the right moments and layout") {
    auto net = parse_network(kDiatomic);

    SECTION("vacuum") {
        auto state = coherent_product_state(net, {0.0, 0.0}, FockCutoff{{0, 0}});
        CHECK(state.dim() == 1);
        CHECK(state.norm() == Approx(1.0).margin(1e-14));
        CHECK(number_expectation(state, 0) == 0.0);
    }
    SECTION("atomic coherent state over charge sectors") {
        auto state = coherent_product_state(net, {2.0, 0.0}, FockCutoff{{32, 0}});
        CHECK(state.blocks.size() == 33);
        CHECK(state.blocks[4].charge_value == 4);
        CHECK(state.norm() == Approx(1.0).margin(1e-12));
        CHECK(number_expectation(state, 0) == Approx(4.0).margin(1e-10));
        CHECK(number_expectation(state, 1) == 0.0);
        // renormalization is a no-op up to the truncated tail
        CHECK(std::abs(state.amplitudes[0][0]) ==
              Approx(std::exp(-2.0)).epsilon(1e-12));
    }
    SECTION("tail-mass violation is rejected") {
        CHECK_THROWS_AS(coherent_product_state(net, {2.0, 0.0}, FockCutoff{{3, 0}}),
                        std::invalid_argument);
    }
    SECTION("chargeless networks fall back to the product layout") {
        auto src = parse_network("0 <k=1> A");
        auto state = coherent_product_state(src, {2.0}, FockCutoff{{32}});
        CHECK(state.blocks.size() == 1);
        CHECK_FALSE(state.blocks[0].charge.has_value());
        CHECK(number_expectation(state, 0) == Approx(4.0).margin(1e-10));
    }
    SECTION("two coherent modes") {
        auto swap = parse_network("A <k=1> B");
        auto state = coherent_product_state(swap, {1.5, Complex{0.0, 1.0}},
                                            FockCutoff{{24, 16}});
        CHECK(number_expectation(state, 0) + number_expectation(state, 1) ==
              Approx(2.25 + 1.0).margin(1e-10));
    }
}

TEST_CASE("block diagonalization satisfies its reconstruction contract") {
    SECTION("analytic 2x2") {
        auto net = parse_network(kDiatomic);
        auto blocks = hamiltonian_blocks(
            net, {sector_basis(net, ChargeVector{{1, 2}}, 2, FockCutoff{{2, 1}})});
        auto eig = diagonalize(blocks);
        CHECK(eig.values[0][0] == Approx(-std::sqrt(2.0)).margin(1e-14));
        CHECK(eig.values[0][1] == Approx(std::sqrt(2.0)).margin(1e-14));
    }
    SECTION("random symmetric reconstruction") {
        std::mt19937 rng(321);
        std::normal_distribution<double> gauss;
        Eigen::MatrixXd A(50, 50);
        for (int i = 0; i < 50; ++i)
            for (int j = 0; j < 50; ++j) A(i, j) = gauss(rng);
        HamiltonianBlock block;
        block.matrix = 0.5 * (A + A.transpose());
        auto eig = diagonalize({block});
        const auto& V = eig.vectors[0];
        Eigen::MatrixXd rebuilt = V * eig.values[0].asDiagonal() * V.transpose();
        double scale = block.matrix.cwiseAbs().maxCoeff();
        CHECK((rebuilt - block.matrix).cwiseAbs().maxCoeff() < 1e-9 * scale);
        CHECK((V.transpose() * V - Eigen::MatrixXd::Identity(50, 50)).cwiseAbs().maxCoeff() <
              1e-10);
    }
}

TEST_CASE("evolution is unitary, charge conserving and exact at tau=0") {
    auto net = parse_network(kDiatomic);
    auto psi0 = coherent_product_state(net, {2.0, 0.0}, FockCutoff{{32, 0}});
    auto eig = diagonalize(hamiltonian_blocks(net, psi0.blocks));
    auto grid = uniform_grid(0.0, 3.0, 60);
    double charge0 = number_expectation(psi0, 0) + 2.0 * number_expectation(psi0, 1);
    bool first = true;
    evolve_visit(eig, psi0, grid, [&](double tau, const QuantumState& psi) {
        CHECK(std::abs(psi.norm() - 1.0) < 1e-10);
        double charge = number_expectation(psi, 0) + 2.0 * number_expectation(psi, 1);
        CHECK(std::abs(charge - charge0) < 1e-9);
        if (first) {
            REQUIRE(tau == 0.0);
            CHECK(std::abs(overlap(psi0, psi)) == Approx(1.0).margin(1e-12));
            first = false;
        }
    });
}

TEST_CASE("driven mode grows quadratically from the vacuum") {
    auto net = parse_network("0 <k=1> A");
    QuantumState psi0;
    psi0.blocks.push_back(product_basis(net, FockCutoff{{64}}));
    Eigen::VectorXcd amp = Eigen::VectorXcd::Zero(65);
    amp[0] = 1.0;
    psi0.amplitudes.push_back(amp);
    auto eig = diagonalize(hamiltonian_blocks(net, psi0.blocks));
    double worst = 0.0;
    evolve_visit(eig, psi0, uniform_grid(0.0, 2.0, 80), [&](double tau, const QuantumState& psi) {
        worst = std::max(worst, std::abs(number_expectation(psi, 0) - tau * tau));
    });
    CHECK(worst < 1e-6);
}

TEST_CASE("two-mode exchange oscillates as 9 cos^2 tau") {
    auto net = parse_network("A <k=1> B");
    auto psi0 = coherent_product_state(net, {3.0, 0.0}, FockCutoff{{40, 0}});
    auto eig = diagonalize(hamiltonian_blocks(net, psi0.blocks));
    double worst = 0.0;
    evolve_visit(eig, psi0, uniform_grid(0.0, 6.0, 120), [&](double tau, const QuantumState& psi) {
        double expect = 9.0 * std::cos(tau) * std::cos(tau);
        worst = std::max(worst, std::abs(number_expectation(psi, 0) - expect));
    });
    CHECK(worst < 1e-6);
}

TEST_CASE("evolution matches a direct matrix-exponential oracle") {
    auto net = parse_network(kDiatomic);
    net.set_ground_energy("A", 0.2);
    net.set_ground_energy("A2", 0.1);
    QuantumState psi0;
    psi0.blocks.push_back(product_basis(net, FockCutoff{{8, 4}}));
    const auto dim = psi0.blocks[0].dim();
    std::mt19937 rng(991);
    std::normal_distribution<double> gauss;
    Eigen::VectorXcd amp(dim);
    for (Eigen::Index i = 0; i < dim; ++i) amp[i] = Complex{gauss(rng), gauss(rng)};
    amp /= amp.norm();
    psi0.amplitudes.push_back(amp);

    auto blocks = hamiltonian_blocks(net, psi0.blocks);
    auto eig = diagonalize(blocks);
    const double tau = 0.7;
    std::vector<double> times{tau};
    auto snap = evolve(eig, psi0, times);
    REQUIRE(snap.size() == 1);

    Eigen::MatrixXcd U =
        test_oracles::expm(Complex{0.0, -tau} * blocks[0].matrix.cast<Complex>());
    Eigen::VectorXcd expect = U * amp;
    CHECK((snap[0].amplitudes[0] - expect).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("reduced density operators and entropies") {
    SECTION("coherent product state is unentangled") {
        auto net = parse_network(kDiatomic);
        auto psi = coherent_product_state(net, {1.5, 0.5}, FockCutoff{{24, 12}});
        auto rho = reduced_density(psi, 0);
        CHECK(std::abs(rho.trace() - Complex{1.0}) < 1e-12);
        CHECK(von_neumann_entropy(rho) < 1e-10);
    }
    SECTION("maximally entangled two-level case") {
        auto psi = two_atom_state();
        psi.amplitudes[0] << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
        auto rho = reduced_density(psi, 0);
        CHECK(std::abs(rho(2, 2) - Complex{0.5}) < 1e-12);
        CHECK(std::abs(rho(0, 0) - Complex{0.5}) < 1e-12);
        CHECK(von_neumann_entropy(rho) == Approx(std::log(2.0)).margin(1e-12));
        auto rho_m = reduced_density(psi, 1);
        CHECK(von_neumann_entropy(rho_m) == Approx(std::log(2.0)).margin(1e-12));
    }
    SECTION("entropy respects the subsystem bound along a trajectory") {
        auto net = parse_network(kDiatomic);
        auto psi0 = coherent_product_state(net, {2.0, 0.0}, FockCutoff{{32, 0}});
        auto eig = diagonalize(hamiltonian_blocks(net, psi0.blocks));
        int d_m = 0;
        for (const auto& b : psi0.blocks)
            for (const auto& occ : b.states) d_m = std::max(d_m, occ[1] + 1);
        evolve_visit(eig, psi0, uniform_grid(0.0, 2.0, 20),
                     [&](double tau, const QuantumState& psi) {
                         auto rho = reduced_density(psi, 0);
                         CHECK(std::abs(rho.trace() - Complex{1.0}) < 1e-12);
                         double s = von_neumann_entropy(rho);
                         CHECK(s <= std::log((double)d_m) + 1e-10);
                         if (tau == 0.0) CHECK(s < 1e-10);
                     });
    }
    SECTION("bad density matrices are rejected") {
        Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(2, 2);
        rho(0, 0) = 1.5;
        rho(1, 1) = -0.5;
        CHECK_THROWS_AS(von_neumann_entropy(rho), NumericError);
    }
}

TEST_CASE("diagonal ensemble of the two-atom sector") {
    auto net = parse_network(kDiatomic);
    auto psi = two_atom_state();
    auto eig = diagonalize(hamiltonian_blocks(net, psi.blocks));
    auto obs = occupation_diagonals(psi.blocks, 0);

    auto report = diagonal_ensemble(eig, psi, obs);
    CHECK(report.mean_diag == Approx(1.0).margin(1e-12));
    CHECK(report.fluct_sq == Approx(0.5).margin(1e-12));

    SECTION("an eigenstate has no temporal fluctuations") {
        psi.amplitudes[0] = eig.vectors[0].col(0).cast<Complex>();
        auto r = diagonal_ensemble(eig, psi, obs);
        CHECK(r.fluct_sq == Approx(0.0).margin(1e-12));
        CHECK(r.mean_diag == Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("degenerate populated sectors are rejected, unpopulated ones ignored") {
    auto net = parse_network("A + A <k=0> A2");
    ChargeVector charge{{1, 2}};
    QuantumState psi;
    psi.blocks.push_back(sector_basis(net, charge, 2, FockCutoff{{2, 1}}));
    psi.blocks.push_back(sector_basis(net, charge, 1, FockCutoff{{2, 1}}));
    Eigen::VectorXcd degenerate(2), single(1);
    degenerate << 1.0, 0.0;
    single << 1.0;
    psi.amplitudes = {degenerate, single};
    auto eig = diagonalize(hamiltonian_blocks(net, psi.blocks));
    auto obs = occupation_diagonals(psi.blocks, 0);

    CHECK_THROWS_AS(diagonal_ensemble(eig, psi, obs), NumericError);

    psi.amplitudes[0] << 0.0, 0.0; // depopulate the degenerate block
    auto report = diagonal_ensemble(eig, psi, obs);
    CHECK(report.mean_diag == Approx(1.0).margin(1e-12));
}

TEST_CASE("microcanonical averages over the two-atom sector") {
    auto net = parse_network(kDiatomic);
    auto psi = two_atom_state();
    auto eig = diagonalize(hamiltonian_blocks(net, psi.blocks));
    auto obs = occupation_diagonals(psi.blocks, 0);

    CHECK(microcanonical_average(eig, 0.0, 2.0, obs) == Approx(1.0).margin(1e-12));
    CHECK(microcanonical_average(eig, std::sqrt(2.0), 0.1, obs) == Approx(1.0).margin(1e-12));
    CHECK_THROWS_AS(microcanonical_average(eig, 10.0, 0.1, obs), NumericError);

    auto [center, halfwidth] = microcanonical_default_window(eig, psi);
    CHECK(center == Approx(0.0).margin(1e-12));
    CHECK(halfwidth == Approx(0.05 * 2.0 * std::sqrt(2.0)).margin(1e-12));
}

TEST_CASE("time averages against the diagonal-ensemble prediction") {
    auto net = parse_network(kDiatomic);
    auto psi = two_atom_state();
    auto eig = diagonalize(hamiltonian_blocks(net, psi.blocks));

    ObservableSeries series;
    evolve_visit(eig, psi, uniform_grid(0.0, 200.0, 4000),
                 [&](double tau, const QuantumState& s) {
                     series.times.push_back(tau);
                     series.values.push_back(number_expectation(s, 0));
                 });
    auto [mean, var] = time_average(series, 0.0, 200.0);
    CHECK(mean == Approx(1.0).epsilon(0.01));
    CHECK(var == Approx(0.5).epsilon(0.05));
}

TEST_CASE("time-average handles constants, sines and window errors") {
    ObservableSeries constant;
    constant.times = uniform_grid(0.0, 10.0, 100);
    constant.values.assign(101, 3.25);
    auto [m, v] = time_average(constant, 0.0, 10.0);
    CHECK(m == Approx(3.25).margin(1e-14));
    CHECK(v == Approx(0.0).margin(1e-14));

    ObservableSeries sine;
    sine.times = uniform_grid(0.0, 10.0 * std::numbers::pi, 2000);
    for (double t : sine.times) sine.values.push_back(std::sin(t));
    CHECK(std::abs(time_average(sine, 0.0, 10.0 * std::numbers::pi).first) < 1e-8);

    CHECK_THROWS_AS(time_average(constant, -1.0, 5.0), std::invalid_argument);
    CHECK_THROWS_AS(time_average(constant, 5.0, 11.0), std::invalid_argument);
    CHECK_THROWS_AS(time_average(constant, 5.0, 5.0), std::invalid_argument);
}

TEST_CASE("breakdown time finds the first departure") {
    ObservableSeries q, m;
    q.times = m.times = uniform_grid(0.0, 10.0, 1000);
    for (double t : q.times) {
        q.values.push_back(10.0 * std::exp(-t));
        m.values.push_back(10.0 * std::exp(-t) + (t > 3.0 ? 0.8 * (t - 3.0) : 0.0));
    }
    CHECK_FALSE(breakdown_time(q, q).has_value());
    auto tau = breakdown_time(q, m);
    REQUIRE(tau.has_value());
    CHECK(*tau == Approx(3.0 + 0.05 * 10.0 / 0.8).margin(0.02));

    ObservableSeries other = q;
    other.times[5] += 1e-3;
    CHECK_THROWS_AS(breakdown_time(q, other), std::invalid_argument);
}

TEST_CASE("two-photon rate reproduces the caesium estimate") {
    const double two_pi = 2.0 * std::numbers::pi;
    double enhancement = std::sqrt(4000.0);
    double k1 = two_pi * 1.17e6 * enhancement;
    double k2 = two_pi * 0.4e3 * enhancement;
    double delta = two_pi * 750e6;
    double k = raman_rate(k1, k2, delta);
    CHECK(k / two_pi == Approx(1250.0).epsilon(0.05));
    CHECK(raman_rate(k1, k2, 2.0 * delta) == Approx(0.5 * k).margin(1e-12));
    CHECK(raman_rate(0.0, k2, delta) == 0.0);
    CHECK_THROWS_AS(raman_rate(k1, k2, 0.0), std::invalid_argument);
}
