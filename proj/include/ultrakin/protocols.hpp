#pragma once

// Reusable experiment drivers shared by the command-line tool, the test suite
// and downstream users: the depleted-molecule relaxation protocol for the
// diatomic reaction, ensemble sweeps over particle number, chaos scans over
// the pairing strength and modulation scans in the perturbative regime.

#include <cstdio>
#include <optional>
#include <vector>

#include "ultrakin/chaos.hpp"
#include "ultrakin/fock.hpp"
#include "ultrakin/meanfield.hpp"
#include "ultrakin/quantum.hpp"
#include "ultrakin/reaction.hpp"

namespace ultrakin {

enum class RateScale {
    per_particle, // k = 1 / sqrt(N): mean-field dynamics independent of N
    raw           // k exactly as written in the reaction
};

// Diatomic pair-formation network 2A <-> A2 with ground energies zero, so the
// dynamics is purely interaction-driven.
inline ReactionNetwork diatomic_network(double n_atoms = 0.0,
                                        RateScale scale = RateScale::raw) {
    double k = 1.0;
    if (scale == RateScale::per_particle) {
        if (!(n_atoms > 0.0))
            throw std::invalid_argument("per-particle rate scaling needs a positive atom number");
        k = 1.0 / std::sqrt(n_atoms);
    }
    char text[64];
    std::snprintf(text, sizeof text, "A + A <k=%.17g> A2", k);
    return parse_network(text);
}

// Copy of the network with every reaction rate multiplied by the same factor,
// e.g. 1/sqrt(N) for the per-particle convention on a user-supplied network.
inline ReactionNetwork scale_rates(const ReactionNetwork& net, double factor) {
    ReactionNetwork scaled;
    for (const auto& sp : net.species()) {
        scaled.intern_species(sp.name);
        scaled.set_ground_energy(sp.name, sp.ground_energy);
    }
    for (Reaction rx : net.reactions()) {
        rx.rate *= factor;
        scaled.add_reaction(std::move(rx));
    }
    return scaled;
}

inline std::vector<double> uniform_times(double tau_max, double dtau) {
    if (!(tau_max > 0.0) || !(dtau > 0.0))
        throw std::invalid_argument("time grid needs positive duration and spacing");
    const int n = (int)std::llround(tau_max / dtau);
    std::vector<double> times(std::max(n, 1) + 1);
    for (std::size_t i = 0; i < times.size(); ++i)
        times[i] = tau_max * (double)i / (times.size() - 1);
    return times;
}

struct RelaxationOptions {
    double n_atoms = 100.0;
    double tau_max = 20.0;
    double dtau = 0.01;
    RateScale scale = RateScale::per_particle;
    bool with_entropy = false;
    int entropy_stride = 1;
    bool with_meanfield = true;
};

struct RelaxationRun {
    ObservableSeries atoms, molecules, fidelity;
    ObservableSeries entropy;               // stride-sampled when requested
    ObservableSeries mf_atoms, mf_molecules;
    std::optional<double> tau_mf;           // first departure from mean field
    std::optional<double> revival_tau;      // fidelity recovery after the first collapse
    double window_end = 0.0;                // usable end for long-time averages
    int cutoff = 0;
};

// Coherent atoms at |alpha|^2 = N with no molecules, evolved under the pure
// interaction Hamiltonian, alongside the matching mean-field trajectory.
inline RelaxationRun relaxation_run(const RelaxationOptions& opt) {
    auto net = diatomic_network(opt.n_atoms, opt.scale);
    const int cutoff_atoms = coherent_cutoff(opt.n_atoms);
    FockCutoff cutoff{{cutoff_atoms, 0}};
    auto psi0 = coherent_product_state(net, {Complex(std::sqrt(opt.n_atoms), 0.0), 0.0}, cutoff);
    auto eig = diagonalize(hamiltonian_blocks(net, psi0.blocks));
    auto times = uniform_times(opt.tau_max, opt.dtau);

    RelaxationRun run;
    run.cutoff = cutoff_atoms;
    std::size_t index = 0;
    evolve_visit(eig, psi0, times, [&](double tau, const QuantumState& psi) {
        run.atoms.times.push_back(tau);
        run.atoms.values.push_back(number_expectation(psi, 0));
        run.molecules.times.push_back(tau);
        run.molecules.values.push_back(number_expectation(psi, 1));
        run.fidelity.times.push_back(tau);
        run.fidelity.values.push_back(std::norm(overlap(psi0, psi)));
        if (opt.with_entropy && index % (std::size_t)std::max(opt.entropy_stride, 1) == 0) {
            run.entropy.times.push_back(tau);
            // pure bipartite state: both reduced operators share a spectrum,
            // so use the smaller (molecular) one
            run.entropy.values.push_back(von_neumann_entropy(reduced_density(psi, 1)));
        }
        ++index;
    });

    run.window_end = opt.tau_max;
    bool collapsed = false;
    for (std::size_t i = 0; i < run.fidelity.values.size(); ++i) {
        if (!collapsed && run.fidelity.values[i] < 0.5) collapsed = true;
        if (collapsed && run.fidelity.values[i] > 0.5) {
            run.revival_tau = run.fidelity.times[i];
            run.window_end = run.fidelity.times[i];
            break;
        }
    }

    if (opt.with_meanfield) {
        auto field = meanfield_vector_field(net);
        MeanFieldState mf0;
        mf0.alpha = {Complex(std::sqrt(opt.n_atoms), 0.0), 0.0};
        auto traj = integrate_meanfield(field, mf0, opt.tau_max, opt.dtau);
        for (std::size_t i = 0; i < traj.times.size(); ++i) {
            run.mf_atoms.times.push_back(traj.times[i]);
            run.mf_atoms.values.push_back(std::norm(traj.states[i].alpha[0]));
            run.mf_molecules.times.push_back(traj.times[i]);
            run.mf_molecules.values.push_back(std::norm(traj.states[i].alpha[1]));
        }
        run.tau_mf = breakdown_time(run.atoms, run.mf_atoms);
    }
    return run;
}

// Diagonal-ensemble and microcanonical predictions for the atom number in the
// relaxation protocol, using the default microcanonical window.
inline EnsembleReport relaxation_ensemble(double n_atoms,
                                          RateScale scale = RateScale::per_particle) {
    auto net = diatomic_network(n_atoms, scale);
    FockCutoff cutoff{{coherent_cutoff(n_atoms), 0}};
    auto psi0 = coherent_product_state(net, {Complex(std::sqrt(n_atoms), 0.0), 0.0}, cutoff);
    auto eig = diagonalize(hamiltonian_blocks(net, psi0.blocks));
    auto obs = occupation_diagonals(psi0.blocks, 0);
    auto report = diagonal_ensemble(eig, psi0, obs);
    auto [center, halfwidth] = microcanonical_default_window(eig, psi0);
    report.window_center = center;
    report.window_halfwidth = halfwidth;
    report.mean_micro = microcanonical_average(eig, center, halfwidth, obs);
    return report;
}

struct EnsembleSweepRow {
    double n_atoms = 0.0;
    EnsembleReport report;
};

inline std::vector<EnsembleSweepRow> ensemble_sweep(const std::vector<double>& n_list,
                                                    RateScale scale = RateScale::per_particle) {
    std::vector<EnsembleSweepRow> rows;
    rows.reserve(n_list.size());
    for (double n : n_list) rows.push_back({n, relaxation_ensemble(n, scale)});
    return rows;
}

struct ChaosScanOptions {
    double energy = 100.0;
    double c2 = 1.1;
    std::vector<double> c1_grid = {1e-4, 1e-3, 5e-3, 2e-2, 1e-1, 1.0};
    int trajectories = 25;
    double section_tau = 4000.0;
    // Longer than the single-trajectory default: sticky near-integrable orbits
    // shed their transient stretching slower than 1/t, and the settled rate
    // needs the second half of the horizon clear of it to resolve the regime.
    double lyapunov_horizon = 4e4;
    int grid_cells = 32;
    std::uint64_t seed = 1;
    StepControl control{1e-8, 1e-10};
};

struct ChaosScanRow {
    double c1 = 0.0;
    double lambda_max = 0.0;
    double filling = 0.0;
};

// Largest Lyapunov exponent and section filling fraction across the pairing
// strength grid at fixed energy and detuning.
inline std::vector<ChaosScanRow> chaos_scan(const ChaosScanOptions& opt) {
    std::vector<ChaosScanRow> rows;
    rows.reserve(opt.c1_grid.size());
    for (double c1 : opt.c1_grid) {
        NondimParams params{1.0, 1.0, c1, opt.c2};
        NondimField field{c1, opt.c2, true};
        auto points = sample_energy_surface(opt.energy, params, opt.trajectories, opt.seed);
        auto section = poincare_section(field, points, opt.section_tau, opt.control);
        // The surface is generally mixed, so a single trajectory may land on a
        // regular island; the maximal settled rate over the whole sample is
        // the regime indicator and is stable against the sampling seed.
        double lambda = std::numeric_limits<double>::lowest();
        for (const auto& pt : points) {
            auto lyap = lyapunov_max(field, pt, opt.lyapunov_horizon, 1.0, 1e-7, opt.control);
            lambda = std::max(lambda, settled_rate(lyap));
        }
        rows.push_back({c1, lambda, filling_fraction(section, opt.grid_cells)});
    }
    return rows;
}

struct ModulationScanRow {
    double c1 = 0.0;
    ModulationFit fit;
    ModulationPrediction prediction;
};

// Drives the weakly paired condensate and measures the slow modulation of the
// atomic intensity against the perturbative prediction.
inline std::vector<ModulationScanRow> modulation_scan(const std::vector<double>& c1_list,
                                                      double c2, double a0,
                                                      double tau_max = 400.0, double dtau = 0.05) {
    std::vector<ModulationScanRow> rows;
    rows.reserve(c1_list.size());
    for (double c1 : c1_list) {
        NondimField field{c1, c2, true};
        MeanFieldState init;
        init.alpha = {Complex(a0, 0.0), 0.0};
        auto traj = integrate_meanfield(field, init, tau_max, dtau);
        ObservableSeries intensity;
        intensity.times = traj.times;
        intensity.values.reserve(traj.times.size());
        for (const auto& state : traj.states)
            intensity.values.push_back(std::norm(state.alpha[0]));
        rows.push_back({c1, measure_modulation(intensity), perturbative_modulation(c1, c2, a0)});
    }
    return rows;
}

} // namespace ultrakin
