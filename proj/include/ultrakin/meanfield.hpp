#pragma once

// Coherent-state (mean-field) dynamics derived from the network Hamiltonian,
// its nondimensional two-mode form, classical rate-equation dynamics and the
// leading-order modulation prediction.
//
// Real state layout throughout: y[2s] = Re alpha_s, y[2s+1] = Im alpha_s.
// The equations of motion are i d(alpha_s)/dt = dH/d(conj alpha_s).

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ultrakin/errors.hpp"
#include "ultrakin/ode.hpp"
#include "ultrakin/reaction.hpp"

namespace ultrakin {

using Complex = std::complex<double>;

struct MeanFieldState {
    std::vector<Complex> alpha;
};

inline Eigen::VectorXd to_vector(const MeanFieldState& state) {
    Eigen::VectorXd y(2 * state.alpha.size());
    for (std::size_t s = 0; s < state.alpha.size(); ++s) {
        y[2 * s] = state.alpha[s].real();
        y[2 * s + 1] = state.alpha[s].imag();
    }
    return y;
}

inline MeanFieldState from_vector(const Eigen::VectorXd& y) {
    MeanFieldState state;
    state.alpha.resize(y.size() / 2);
    for (std::size_t s = 0; s < state.alpha.size(); ++s)
        state.alpha[s] = Complex{y[2 * s], y[2 * s + 1]};
    return state;
}

namespace detail {

inline Complex ipow(Complex base, int n) {
    Complex r = 1.0;
    for (int i = 0; i < n; ++i) r *= base;
    return r;
}

} // namespace detail

// Classical energy function H(alpha, conj alpha) of the network.
inline double mf_energy(const ReactionNetwork& net, const MeanFieldState& state) {
    if (state.alpha.size() != net.n_species())
        throw std::invalid_argument("state size does not match the network");
    double h = 0.0;
    for (std::size_t s = 0; s < net.n_species(); ++s)
        h += net.species()[s].ground_energy * std::norm(state.alpha[s]);
    for (const auto& mono : interaction_terms(net)) {
        Complex p = 1.0;
        for (std::size_t s = 0; s < net.n_species(); ++s)
            p *= detail::ipow(std::conj(state.alpha[s]), mono.factors[s].create) *
                 detail::ipow(state.alpha[s], mono.factors[s].annihilate);
        h += 2.0 * mono.rate * p.real();
    }
    return h;
}

// Equations of motion generated from the network Hamiltonian.
class MeanFieldField {
public:
    explicit MeanFieldField(const ReactionNetwork& net)
        : monomials_(interaction_terms(net)) {
        energies_.reserve(net.n_species());
        for (const auto& sp : net.species()) energies_.push_back(sp.ground_energy);
    }

    void operator()(double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) const {
        const std::size_t S = energies_.size();
        std::vector<Complex> alpha(S), g(S);
        for (std::size_t s = 0; s < S; ++s) {
            alpha[s] = Complex{y[2 * s], y[2 * s + 1]};
            g[s] = energies_[s] * alpha[s];
        }
        for (const auto& mono : monomials_) {
            for (std::size_t t = 0; t < S; ++t) {
                const int mu = mono.factors[t].create, nu = mono.factors[t].annihilate;
                if (mu > 0) {
                    Complex p = (double)mu * detail::ipow(std::conj(alpha[t]), mu - 1) *
                                detail::ipow(alpha[t], nu);
                    for (std::size_t s = 0; s < S; ++s) {
                        if (s == t) continue;
                        p *= detail::ipow(std::conj(alpha[s]), mono.factors[s].create) *
                             detail::ipow(alpha[s], mono.factors[s].annihilate);
                    }
                    g[t] += mono.rate * p;
                }
                if (nu > 0) {
                    Complex p = (double)nu * detail::ipow(std::conj(alpha[t]), nu - 1) *
                                detail::ipow(alpha[t], mu);
                    for (std::size_t s = 0; s < S; ++s) {
                        if (s == t) continue;
                        p *= detail::ipow(std::conj(alpha[s]), mono.factors[s].annihilate) *
                             detail::ipow(alpha[s], mono.factors[s].create);
                    }
                    g[t] += mono.rate * p;
                }
            }
        }
        dy.resize(y.size());
        for (std::size_t s = 0; s < S; ++s) {
            dy[2 * s] = g[s].imag();
            dy[2 * s + 1] = -g[s].real();
        }
    }

private:
    std::vector<double> energies_;
    std::vector<LadderMonomial> monomials_;
};

inline MeanFieldField meanfield_vector_field(const ReactionNetwork& net) {
    return MeanFieldField(net);
}

struct NondimParams {
    double t0 = 1.0;
    double alpha0 = 1.0;
    double c1 = 0.0;
    double c2 = 1.0;
};

inline NondimParams nondimensionalize(double e_atom, double e_molecule, double k1, double k2) {
    if (e_atom == 0.0 || k2 == 0.0)
        throw std::invalid_argument("nondimensional scaling requires e_atom != 0 and k2 != 0");
    NondimParams p;
    p.t0 = 1.0 / e_atom;
    p.alpha0 = k2 / e_atom;
    p.c1 = k1 * k2 / (e_atom * e_atom);
    p.c2 = e_molecule / e_atom;
    return p;
}

// Nondimensional two-mode field:
//   i a' = a + 1 + 2 c1 conj(a) m,   i m' = c2 m + c1 a^2
// with the constant bath drive removable for particle-number checks.
struct NondimField {
    double c1 = 0.0;
    double c2 = 1.0;
    bool include_bath = true;

    void operator()(double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) const {
        const double a = y[0], b = y[1], m = y[2], n = y[3];
        const double bath = include_bath ? 1.0 : 0.0;
        dy.resize(4);
        dy[0] = b + 2.0 * c1 * (a * n - b * m);
        dy[1] = -(a + bath + 2.0 * c1 * (a * m + b * n));
        dy[2] = c2 * n + 2.0 * c1 * a * b;
        dy[3] = -(c2 * m + c1 * (a * a - b * b));
    }
};

inline double nondim_energy(const Eigen::VectorXd& y, double c1, double c2) {
    const Complex a{y[0], y[1]}, m{y[2], y[3]};
    return std::norm(a) + c2 * std::norm(m) + 2.0 * c1 * (std::conj(a) * std::conj(a) * m).real() +
           2.0 * a.real();
}

inline double nondim_energy(const MeanFieldState& state, const NondimParams& params) {
    return nondim_energy(to_vector(state), params.c1, params.c2);
}

inline double nondim_particle_number(const Eigen::VectorXd& y) {
    return y[0] * y[0] + y[1] * y[1] + 2.0 * (y[2] * y[2] + y[3] * y[3]);
}

struct Trajectory {
    std::vector<double> times;
    std::vector<MeanFieldState> states;
    std::vector<double> energy; // empty unless an energy function was supplied
};

template <class Field>
Trajectory integrate_meanfield(Field field, const MeanFieldState& initial, double tau_end,
                               double dtau = 0.01, StepControl control = {},
                               std::function<double(const MeanFieldState&)> energy = {}) {
    if (!(tau_end > 0.0) || !(dtau > 0.0))
        throw std::invalid_argument("trajectory needs positive duration and grid step");
    const int n = (int)std::llround(tau_end / dtau);
    std::vector<double> grid(n + 1);
    for (int i = 0; i <= n; ++i) grid[i] = tau_end * i / n;
    Trajectory traj;
    traj.times.reserve(grid.size());
    traj.states.reserve(grid.size());
    integrate_sampled(std::move(field), 0.0, to_vector(initial), grid, control,
                      [&](double t, const Eigen::VectorXd& y) {
                          traj.times.push_back(t);
                          traj.states.push_back(from_vector(y));
                          if (energy) traj.energy.push_back(energy(traj.states.back()));
                      });
    return traj;
}

// Polynomial rate equations: each reaction carries the net flux
//   k * (prod_reactants c^mu - prod_products c^nu)
// which drains reactants and feeds products with their multiplicities.
class ClassicalRateField {
public:
    explicit ClassicalRateField(const ReactionNetwork& net)
        : n_species_(net.n_species()), reactions_(net.reactions()) {}

    void operator()(double, const Eigen::VectorXd& c, Eigen::VectorXd& dc) const {
        dc = Eigen::VectorXd::Zero(n_species_);
        for (const auto& rx : reactions_) {
            double forward = 1.0, backward = 1.0;
            for (const auto& t : rx.reactants) forward *= std::pow(c[t.species], t.coeff);
            for (const auto& t : rx.products) backward *= std::pow(c[t.species], t.coeff);
            double flux = rx.rate * (forward - backward);
            for (const auto& t : rx.reactants) dc[t.species] -= t.coeff * flux;
            for (const auto& t : rx.products) dc[t.species] += t.coeff * flux;
        }
    }

private:
    std::size_t n_species_;
    std::vector<Reaction> reactions_;
};

inline ClassicalRateField classical_rate_field(const ReactionNetwork& net) {
    return ClassicalRateField(net);
}

inline double arrhenius_rate(double prefactor, double activation_energy, double temperature,
                             double kappa = 1.0) {
    if (!(temperature > 0.0))
        throw std::invalid_argument("arrhenius rate requires a positive temperature");
    return prefactor * std::exp(-activation_energy / (kappa * temperature));
}

struct ModulationPrediction {
    double amplitude = 0.0;
    double frequency = 0.0;
    bool valid = false;
};

// Leading-order amplitude and frequency of the slow modulation of |a|^2 for
// an initially molecule-depleted state a(0) = A0.
inline ModulationPrediction perturbative_modulation(double c1, double c2, double a0) {
    if (c2 == 2.0)
        throw std::invalid_argument("modulation amplitude has a pole at c2 = 2");
    ModulationPrediction p;
    p.amplitude = 4.0 * (a0 + 1.0) * a0 * a0 * a0 * c1 * c1 / ((c2 - 2.0) * (c2 - 2.0));
    p.frequency = c2 - 1.0;
    p.valid = (c1 * c1 * a0 * a0 <= 1e-2) && (a0 >= 10.0) && (c2 > 1.0) && (c2 < 2.0);
    return p;
}

} // namespace ultrakin
