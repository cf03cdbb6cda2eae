#include <catch2/catch_amalgamated.hpp>

#include "ultrakin/protocols.hpp"

using namespace ultrakin;

TEST_CASE("diatomic network carries the requested rate convention") {
    auto raw = diatomic_network();
    REQUIRE(raw.n_species() == 2);
    REQUIRE(raw.reactions().size() == 1);
    REQUIRE(raw.reactions()[0].rate == 1.0);
    auto scaled = diatomic_network(100.0, RateScale::per_particle);
    REQUIRE(scaled.reactions()[0].rate == Catch::Approx(0.1).margin(1e-15));
    REQUIRE_THROWS_AS(diatomic_network(0.0, RateScale::per_particle), std::invalid_argument);
}

TEST_CASE("rate scaling copies the network and multiplies every rate") {
    auto net = parse_network("A + A <k=2> A2\n0 <k2=0.5> A");
    auto scaled = scale_rates(net, 0.25);
    REQUIRE(scaled.n_species() == net.n_species());
    REQUIRE(scaled.reactions()[0].rate == 0.5);
    REQUIRE(scaled.reactions()[1].rate == 0.125);
    REQUIRE(net.reactions()[0].rate == 2.0);
}

TEST_CASE("uniform grids span the requested window") {
    auto times = uniform_times(2.0, 0.5);
    REQUIRE(times == std::vector<double>{0.0, 0.5, 1.0, 1.5, 2.0});
    REQUIRE_THROWS_AS(uniform_times(0.0, 0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(uniform_times(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("relaxation run tracks the condensate and finds the breakdown time") {
    RelaxationOptions opt;
    opt.n_atoms = 25.0;
    opt.tau_max = 3.0;
    opt.with_entropy = true;
    opt.entropy_stride = 10;
    auto run = relaxation_run(opt);

    REQUIRE(run.atoms.values.front() == Catch::Approx(25.0).margin(1e-6));
    REQUIRE(run.fidelity.values.front() == Catch::Approx(1.0).margin(1e-12));
    for (std::size_t i = 0; i < run.atoms.values.size(); ++i)
        REQUIRE(run.atoms.values[i] + 2.0 * run.molecules.values[i] ==
                Catch::Approx(25.0).margin(1e-8));
    REQUIRE(run.entropy.values.front() == Catch::Approx(0.0).margin(1e-6));
    REQUIRE(run.entropy.times.size() ==
            (run.atoms.times.size() + opt.entropy_stride - 1) / opt.entropy_stride);

    REQUIRE(run.mf_atoms.values.size() == run.atoms.values.size());
    REQUIRE(run.tau_mf.has_value());
    REQUIRE(*run.tau_mf == Catch::Approx(1.35).margin(0.1));
}

TEST_CASE("ensemble statistics reproduce the frozen diatomic values") {
    auto report = relaxation_ensemble(20.0);
    REQUIRE(report.mean_diag == Catch::Approx(9.1871).epsilon(1e-3));
    REQUIRE(std::sqrt(report.fluct_sq) == Catch::Approx(0.56364).epsilon(1e-3));
    REQUIRE(report.mean_micro == Catch::Approx(10.8745).epsilon(1e-3));
    REQUIRE(report.window_halfwidth > 0.0);
}

TEST_CASE("relative fluctuations fall with particle number") {
    auto rows = ensemble_sweep({20.0, 50.0});
    REQUIRE(rows.size() == 2);
    double r0 = std::sqrt(rows[0].report.fluct_sq) / rows[0].report.mean_diag;
    double r1 = std::sqrt(rows[1].report.fluct_sq) / rows[1].report.mean_diag;
    REQUIRE(r1 < r0);
}

TEST_CASE("modulation scan measures the slow envelope of the atom intensity") {
    auto rows = modulation_scan({1e-3}, 1.1, 10.0);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].fit.amplitude == Catch::Approx(0.0363).epsilon(0.05));
    REQUIRE(rows[0].fit.frequency == Catch::Approx(0.1).epsilon(0.02));
    REQUIRE(rows[0].prediction.valid);
}
