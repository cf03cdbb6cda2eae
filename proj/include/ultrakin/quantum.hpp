#pragma once

// Exact quantum dynamics on truncated Fock layouts: coherent product initial
// states, per-block diagonalization, unitary evolution, entanglement entropy
// and equilibration diagnostics.
//
// A QuantumState stores one amplitude vector per basis block. Networks with a
// strictly positive conserved charge use one block per charge value, which
// keeps every block complete (no occupation clipping inside a block);
// everything else falls back to a single product-basis block.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ultrakin/errors.hpp"
#include "ultrakin/fock.hpp"
#include "ultrakin/reaction.hpp"

namespace ultrakin {

using Complex = std::complex<double>;

inline constexpr double kCoherentTailTol = 1e-12;

struct QuantumState {
    std::vector<SectorBasis> blocks;
    std::vector<Eigen::VectorXcd> amplitudes;

    double norm_sq() const {
        double s = 0.0;
        for (const auto& a : amplitudes) s += a.squaredNorm();
        return s;
    }
    double norm() const { return std::sqrt(norm_sq()); }
    Eigen::Index dim() const {
        Eigen::Index d = 0;
        for (const auto& a : amplitudes) d += a.size();
        return d;
    }
};

struct ObservableSeries {
    std::vector<double> times;
    std::vector<double> values;
};

struct EigenSystem {
    std::vector<Eigen::VectorXd> values;  // ascending within each block
    std::vector<Eigen::MatrixXd> vectors; // orthonormal columns
};

struct EnsembleReport {
    double mean_diag = 0.0;
    double fluct_sq = 0.0;
    double mean_micro = 0.0;
    double window_center = 0.0;
    double window_halfwidth = 0.0;
};

namespace detail {

// c_n = e^{-|a|^2/2} a^n / sqrt(n!), by upward recurrence.
inline Eigen::VectorXcd coherent_amplitudes(Complex alpha, int count) {
    Eigen::VectorXcd c(count + 1);
    c[0] = std::exp(-0.5 * std::norm(alpha));
    for (int n = 1; n <= count; ++n) c[n] = c[n - 1] * alpha / std::sqrt((double)n);
    return c;
}

inline std::optional<ChargeVector> positive_charge(const ReactionNetwork& net) {
    for (const auto& charge : conserved_charges(net)) {
        bool positive = true;
        for (long long w : charge.weights) positive = positive && w > 0;
        if (positive) return charge;
    }
    return std::nullopt;
}

} // namespace detail

// Coherent product state |alpha_1> x ... x |alpha_S>, truncated to the given
// per-species cutoffs and renormalized. With a strictly positive conserved
// charge the state is laid out over complete charge sectors with values
// 0..sum_s w_s*cutoff_s; otherwise a single product block is used.
inline QuantumState coherent_product_state(const ReactionNetwork& net,
                                           const std::vector<Complex>& alphas,
                                           const FockCutoff& cutoff) {
    const auto n_species = net.n_species();
    if (alphas.size() != n_species || cutoff.max_occupation.size() != n_species)
        throw std::invalid_argument("coherent state needs one amplitude and one cutoff per species");
    for (std::size_t s = 0; s < n_species; ++s) {
        double mean = std::norm(alphas[s]);
        if (coherent_cutoff(mean, kCoherentTailTol) > cutoff.max_occupation[s])
            throw std::invalid_argument(
                "coherent-state tail mass beyond the cutoff of species " +
                net.species()[s].name + " exceeds " + detail::format_double(kCoherentTailTol));
    }

    QuantumState state;
    auto charge = detail::positive_charge(net);
    if (charge) {
        long long q_max = 0;
        for (std::size_t s = 0; s < n_species; ++s)
            q_max += charge->weights[s] * cutoff.max_occupation[s];
        auto sector_cut = sector_cutoff_for(*charge, q_max);
        for (long long q = 0; q <= q_max; ++q)
            state.blocks.push_back(sector_basis(net, *charge, q, sector_cut));
    } else {
        state.blocks.push_back(product_basis(net, cutoff));
    }

    std::vector<Eigen::VectorXcd> mode_amp(n_species);
    for (std::size_t s = 0; s < n_species; ++s) {
        int count = 0;
        for (const auto& block : state.blocks)
            for (const auto& occ : block.states) count = std::max(count, occ[s]);
        mode_amp[s] = detail::coherent_amplitudes(alphas[s], count);
    }

    for (const auto& block : state.blocks) {
        Eigen::VectorXcd amp(block.dim());
        for (Eigen::Index i = 0; i < block.dim(); ++i) {
            Complex c = 1.0;
            for (std::size_t s = 0; s < n_species; ++s) {
                int n = block.states[i][s];
                c = n <= cutoff.max_occupation[s] ? c * mode_amp[s][n] : Complex{0.0};
            }
            amp[i] = c;
        }
        state.amplitudes.push_back(std::move(amp));
    }
    double nrm = state.norm();
    for (auto& a : state.amplitudes) a /= nrm;
    return state;
}

inline std::vector<HamiltonianBlock> hamiltonian_blocks(const ReactionNetwork& net,
                                                        const std::vector<SectorBasis>& bases) {
    std::vector<HamiltonianBlock> blocks;
    blocks.reserve(bases.size());
    for (const auto& basis : bases) blocks.push_back(build_hamiltonian(net, basis));
    return blocks;
}

inline EigenSystem diagonalize(const std::vector<HamiltonianBlock>& blocks) {
    EigenSystem eig;
    for (const auto& block : blocks) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(block.matrix);
        if (solver.info() != Eigen::Success)
            throw NumericError("eigensolver failed to converge on a Hamiltonian block");
        eig.values.push_back(solver.eigenvalues());
        eig.vectors.push_back(solver.eigenvectors());
    }
    return eig;
}

// Calls visit(tau, state) for each requested time, reusing one state buffer.
template <class Visitor>
void evolve_visit(const EigenSystem& eig, const QuantumState& psi0,
                  std::span<const double> times, Visitor&& visit) {
    const auto n_blocks = psi0.blocks.size();
    if (eig.values.size() != n_blocks)
        throw std::invalid_argument("eigensystem and state have different block layouts");

    std::vector<Eigen::VectorXd> phi_re(n_blocks), phi_im(n_blocks);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        phi_re[b] = eig.vectors[b].transpose() * psi0.amplitudes[b].real().matrix();
        phi_im[b] = eig.vectors[b].transpose() * psi0.amplitudes[b].imag().matrix();
    }

    QuantumState out = psi0;
    Eigen::VectorXd rot_re, rot_im, amp_re, amp_im;
    for (double tau : times) {
        for (std::size_t b = 0; b < n_blocks; ++b) {
            const auto& lam = eig.values[b];
            const auto d = lam.size();
            rot_re.resize(d);
            rot_im.resize(d);
            for (Eigen::Index a = 0; a < d; ++a) {
                double c = std::cos(lam[a] * tau), s = std::sin(lam[a] * tau);
                rot_re[a] = c * phi_re[b][a] + s * phi_im[b][a];
                rot_im[a] = c * phi_im[b][a] - s * phi_re[b][a];
            }
            amp_re.noalias() = eig.vectors[b] * rot_re;
            amp_im.noalias() = eig.vectors[b] * rot_im;
            out.amplitudes[b].real() = amp_re;
            out.amplitudes[b].imag() = amp_im;
        }
        visit(tau, out);
    }
}

inline std::vector<QuantumState> evolve(const EigenSystem& eig, const QuantumState& psi0,
                                        std::span<const double> times) {
    std::vector<QuantumState> snapshots;
    snapshots.reserve(times.size());
    evolve_visit(eig, psi0, times,
                 [&](double, const QuantumState& s) { snapshots.push_back(s); });
    return snapshots;
}

inline double number_expectation(const QuantumState& state, std::size_t species) {
    double total = 0.0;
    for (std::size_t b = 0; b < state.blocks.size(); ++b) {
        const auto& amp = state.amplitudes[b];
        for (Eigen::Index i = 0; i < amp.size(); ++i)
            total += std::norm(amp[i]) * state.blocks[b].states[i][species];
    }
    return total;
}

inline Complex overlap(const QuantumState& a, const QuantumState& b) {
    if (a.blocks.size() != b.blocks.size())
        throw std::invalid_argument("overlap requires matching block layouts");
    Complex s = 0.0;
    for (std::size_t i = 0; i < a.amplitudes.size(); ++i) {
        if (a.amplitudes[i].size() != b.amplitudes[i].size())
            throw std::invalid_argument("overlap requires matching block layouts");
        s += a.amplitudes[i].dot(b.amplitudes[i]); // conjugates the left factor
    }
    return s;
}

inline std::vector<Eigen::VectorXd> occupation_diagonals(const std::vector<SectorBasis>& bases,
                                                         std::size_t species) {
    std::vector<Eigen::VectorXd> diag;
    diag.reserve(bases.size());
    for (const auto& basis : bases) diag.push_back(occupation_vector(basis, species));
    return diag;
}

// Two-species amplitude matrix Psi(n_first, n_second) in product layout.
inline Eigen::MatrixXcd amplitude_matrix(const QuantumState& state) {
    int d0 = 0, d1 = 0;
    for (const auto& block : state.blocks) {
        if (block.n_species() != 2)
            throw std::invalid_argument("amplitude matrix requires a two-species network");
        for (const auto& occ : block.states) {
            d0 = std::max(d0, occ[0] + 1);
            d1 = std::max(d1, occ[1] + 1);
        }
    }
    Eigen::MatrixXcd psi = Eigen::MatrixXcd::Zero(d0, d1);
    for (std::size_t b = 0; b < state.blocks.size(); ++b)
        for (Eigen::Index i = 0; i < state.amplitudes[b].size(); ++i) {
            const auto& occ = state.blocks[b].states[i];
            psi(occ[0], occ[1]) = state.amplitudes[b][i];
        }
    return psi;
}

inline Eigen::MatrixXcd reduced_density(const QuantumState& state, std::size_t species) {
    if (species > 1) throw std::invalid_argument("reduced density takes species index 0 or 1");
    Eigen::MatrixXcd psi = amplitude_matrix(state);
    if (species == 0) return psi * psi.adjoint();
    return (psi.adjoint() * psi).transpose();
}

inline double von_neumann_entropy(const Eigen::MatrixXcd& rho) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(rho, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw NumericError("eigensolver failed to converge on a density matrix");
    double s = 0.0;
    for (double lam : solver.eigenvalues()) {
        if (lam < -1e-10)
            throw NumericError("density matrix has a negative eigenvalue: " +
                               detail::format_double(lam));
        if (lam > 1e-14) s -= lam * std::log(lam);
    }
    return s;
}

inline constexpr double kPopulatedBlockTol = 1e-12;

namespace detail {

inline void require_simple_spectrum(const Eigen::VectorXd& lam) {
    if (lam.size() < 2) return;
    double range = lam[lam.size() - 1] - lam[0];
    if (!(range > 0.0))
        throw NumericError("degenerate spectrum in a populated sector");
    for (Eigen::Index i = 0; i + 1 < lam.size(); ++i)
        if (lam[i + 1] - lam[i] < 1e-9 * range)
            throw NumericError("degenerate spectrum in a populated sector");
}

} // namespace detail

// Infinite-time-average prediction for a charge-diagonal observable given by
// its per-block diagonal in the Fock basis: mean over |c_a|^2 weights and the
// time-averaged squared fluctuation around it. Populated blocks must have
// simple spectra for the underlying dephasing argument to hold.
inline EnsembleReport diagonal_ensemble(const EigenSystem& eig, const QuantumState& state,
                                        const std::vector<Eigen::VectorXd>& obs_diagonal) {
    if (eig.values.size() != state.blocks.size() || obs_diagonal.size() != state.blocks.size())
        throw std::invalid_argument("diagonal ensemble requires matching block layouts");
    EnsembleReport report;
    for (std::size_t b = 0; b < eig.values.size(); ++b) {
        const auto& amp = state.amplitudes[b];
        double pop = amp.squaredNorm();
        if (pop > kPopulatedBlockTol) detail::require_simple_spectrum(eig.values[b]);
        if (pop == 0.0) continue;
        const auto& V = eig.vectors[b];
        Eigen::VectorXcd c = V.transpose() * amp;
        Eigen::VectorXd p = c.cwiseAbs2();
        Eigen::MatrixXd N = V.transpose() * obs_diagonal[b].asDiagonal() * V;
        report.mean_diag += p.dot(N.diagonal());
        Eigen::MatrixXd M = N.cwiseAbs2();
        report.fluct_sq += p.dot(M * p) - p.cwiseAbs2().dot(M.diagonal());
    }
    return report;
}

inline double microcanonical_average(const EigenSystem& eig, double center, double halfwidth,
                                     const std::vector<Eigen::VectorXd>& obs_diagonal) {
    if (obs_diagonal.size() != eig.values.size())
        throw std::invalid_argument("microcanonical average requires matching block layouts");
    double sum = 0.0;
    long long count = 0;
    for (std::size_t b = 0; b < eig.values.size(); ++b) {
        const auto& lam = eig.values[b];
        const auto& V = eig.vectors[b];
        for (Eigen::Index a = 0; a < lam.size(); ++a) {
            if (std::abs(lam[a] - center) > halfwidth) continue;
            sum += V.col(a).cwiseAbs2().dot(obs_diagonal[b]);
            ++count;
        }
    }
    if (count == 0) throw NumericError("no eigenstates inside the microcanonical window");
    return sum / (double)count;
}

// Default window: centered on the state's mean energy, halfwidth 5% of the
// spectral range of the populated blocks.
inline std::pair<double, double> microcanonical_default_window(const EigenSystem& eig,
                                                               const QuantumState& state) {
    double center = 0.0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    bool any = false;
    for (std::size_t b = 0; b < eig.values.size(); ++b) {
        const auto& amp = state.amplitudes[b];
        double pop = amp.squaredNorm();
        if (pop <= kPopulatedBlockTol) continue;
        Eigen::VectorXcd c = eig.vectors[b].transpose() * amp;
        center += c.cwiseAbs2().dot(eig.values[b]);
        lo = std::min(lo, eig.values[b].minCoeff());
        hi = std::max(hi, eig.values[b].maxCoeff());
        any = true;
    }
    if (!any) throw NumericError("state populates no block above tolerance");
    return {center, 0.05 * (hi - lo)};
}

// Trapezoidal mean and variance of a sampled series over [t1, t2].
inline std::pair<double, double> time_average(const ObservableSeries& series, double t1,
                                              double t2) {
    if (!(t2 > t1)) throw std::invalid_argument("time-average window must have positive width");
    const auto& t = series.times;
    const auto& v = series.values;
    if (t.size() != v.size() || t.size() < 2)
        throw std::invalid_argument("series must hold at least two samples");
    if (t1 < t.front() - 1e-12 || t2 > t.back() + 1e-12)
        throw std::invalid_argument("time-average window extends beyond the series");
    double wsum = 0.0, mean = 0.0;
    auto weight = [&](std::size_t i) {
        double w = 0.0;
        if (i + 1 < t.size() && t[i] >= t1 && t[i + 1] <= t2) w += 0.5 * (t[i + 1] - t[i]);
        if (i > 0 && t[i - 1] >= t1 && t[i] <= t2) w += 0.5 * (t[i] - t[i - 1]);
        return w;
    };
    for (std::size_t i = 0; i < t.size(); ++i) {
        double w = weight(i);
        wsum += w;
        mean += w * v[i];
    }
    if (wsum <= 0.0) throw std::invalid_argument("time-average window contains no full segment");
    mean /= wsum;
    double var = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) var += weight(i) * (v[i] - mean) * (v[i] - mean);
    return {mean, var / wsum};
}

// First time the two series separate by more than rel_threshold, relative to
// max(|first quantum value|, 1).
inline std::optional<double> breakdown_time(const ObservableSeries& quantum,
                                            const ObservableSeries& meanfield,
                                            double rel_threshold = 0.05) {
    if (quantum.times.size() != meanfield.times.size())
        throw std::invalid_argument("series time grids differ");
    for (std::size_t i = 0; i < quantum.times.size(); ++i)
        if (std::abs(quantum.times[i] - meanfield.times[i]) >
            1e-12 * std::max(1.0, std::abs(quantum.times[i])))
            throw std::invalid_argument("series time grids differ");
    double scale = std::max(std::abs(quantum.values.empty() ? 0.0 : quantum.values[0]), 1.0);
    for (std::size_t i = 0; i < quantum.values.size(); ++i)
        if (std::abs(quantum.values[i] - meanfield.values[i]) > rel_threshold * scale)
            return quantum.times[i];
    return std::nullopt;
}

// Effective two-photon rate of a far-detuned two-leg drive.
inline double raman_rate(double k1, double k2, double detuning) {
    if (detuning == 0.0) throw std::invalid_argument("raman rate undefined at zero detuning");
    return k1 * k2 / (2.0 * detuning);
}

} // namespace ultrakin
