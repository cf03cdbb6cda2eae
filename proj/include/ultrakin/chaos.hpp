#pragma once

// Phase-space diagnostics for the nondimensional two-mode flow: seeded
// energy-surface sampling, Poincare sections through X_M = 0 with crossing
// refinement in the section coordinate, a gridded filling-fraction indicator,
// a two-trajectory largest-Lyapunov estimate and sinusoidal modulation fits.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "ultrakin/errors.hpp"
#include "ultrakin/meanfield.hpp"
#include "ultrakin/ode.hpp"
#include "ultrakin/quantum.hpp"

namespace ultrakin {

struct QuadraturePoint {
    double x_a = 0.0, p_a = 0.0, x_m = 0.0, p_m = 0.0;

    Eigen::VectorXd to_vector() const {
        Eigen::VectorXd y(4);
        y << x_a, p_a, x_m, p_m;
        return y;
    }
};

struct CrossingRecord {
    double x_a = 0.0, p_a = 0.0, p_m = 0.0, tau = 0.0;
};

struct TrajectorySection {
    std::vector<CrossingRecord> crossings;
    bool degenerate = false; // motion stayed on the section surface
};

struct PoincareSection {
    std::vector<TrajectorySection> trajectories;
};

struct LyapunovEstimate {
    double lambda_max = 0.0;
    double horizon = 0.0;
    std::vector<double> convergence; // running estimate after each renormalization
};

struct ModulationFit {
    double carrier_mean = 0.0;
    double amplitude = 0.0;
    double frequency = 0.0;
    double residual = 0.0;
};

// Draws points on the X_M = 0 slice of the energy surface: (X_A, P_A) uniform
// on the disk of radius sqrt(E), P_M from the resulting quadratic with a
// seeded sign coin; draws without a real root are rejected and redrawn.
inline std::vector<QuadraturePoint> sample_energy_surface(double energy,
                                                          const NondimParams& params, int count,
                                                          std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("sample count must be at least 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    const double radius = std::sqrt(std::max(energy, 0.0));
    // At large c1 the quadratic grows a second solution sheet with huge |P_M|
    // whose fast dynamics is outside the regime of interest; draws landing on
    // it are rejected like draws with no real root.
    const double p_m_cap = 3.0 * std::sqrt(std::max(energy, 1.0) / params.c2);
    constexpr int kMaxRejections = 10000;

    std::vector<QuadraturePoint> points;
    points.reserve(count);
    while ((int)points.size() < count) {
        bool found = false;
        for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
            double r = radius * std::sqrt(uni(rng));
            double phi = 2.0 * std::numbers::pi * uni(rng);
            double x_a = r * std::cos(phi), p_a = r * std::sin(phi);
            double b = 4.0 * params.c1 * x_a * p_a;
            double c = x_a * x_a + p_a * p_a + 2.0 * x_a - energy;
            double disc = b * b - 4.0 * params.c2 * c;
            bool sign = coin(rng);
            if (disc < 0.0) continue;
            double p_m = (-b + (sign ? 1.0 : -1.0) * std::sqrt(disc)) / (2.0 * params.c2);
            if (std::abs(p_m) > p_m_cap) continue;
            points.push_back({x_a, p_a, 0.0, p_m});
            found = true;
            break;
        }
        if (!found)
            throw NumericError("energy surface unreachable after 10000 rejected draws");
    }
    return points;
}

namespace detail {

// Flow with the section coordinate X_M as the independent variable, for the
// final partial step onto the section. State: (X_A, P_A, P_M, tau).
template <class Field>
class SectionParamField {
public:
    explicit SectionParamField(const Field& field) : field_(field), y_(4), f_(4) {}
    void operator()(double x_m, const Eigen::VectorXd& z, Eigen::VectorXd& dz) {
        y_[0] = z[0];
        y_[1] = z[1];
        y_[2] = x_m;
        y_[3] = z[2];
        field_(z[3], y_, f_);
        dz.resize(4);
        dz[0] = f_[0] / f_[2];
        dz[1] = f_[1] / f_[2];
        dz[2] = f_[3] / f_[2];
        dz[3] = 1.0 / f_[2];
    }

private:
    const Field& field_;
    Eigen::VectorXd y_, f_;
};

} // namespace detail

// Positive-direction crossings of X_M = 0. Crossings are bracketed on the
// dense output, bisected to the section and finished with one fixed
// Runge-Kutta step in the section coordinate, so recorded points carry
// X_M = 0 exactly along with their crossing time.
template <class Field>
PoincareSection poincare_section(const Field& field, const std::vector<QuadraturePoint>& initials,
                                 double tau_max, StepControl control = {}) {
    if (!(tau_max > 0.0)) throw std::invalid_argument("section horizon must be positive");
    constexpr int kSubdivisions = 8;
    PoincareSection section;
    section.trajectories.resize(initials.size());

    for (std::size_t id = 0; id < initials.size(); ++id) {
        auto& out = section.trajectories[id];
        AdaptiveIntegrator<const Field&> integ(field, control);
        integ.start(0.0, initials[id].to_vector());
        double max_excursion = std::abs(initials[id].x_m);
        Eigen::VectorXd sample(4), fval(4);

        while (integ.time() < tau_max) {
            integ.advance(tau_max);
            const double ta = integ.previous_time(), tb = integ.time();
            double prev_t = ta;
            integ.interpolate(prev_t, sample);
            double prev_v = sample[2];
            for (int j = 1; j <= kSubdivisions; ++j) {
                double cur_t = ta + (tb - ta) * j / kSubdivisions;
                integ.interpolate(cur_t, sample);
                double cur_v = sample[2];
                max_excursion = std::max({max_excursion, std::abs(prev_v), std::abs(cur_v)});
                if (prev_v < 0.0 && cur_v >= 0.0) {
                    double lo = prev_t, hi = cur_t;
                    for (int it = 0; it < 80 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
                        double mid = 0.5 * (lo + hi);
                        integ.interpolate(mid, sample);
                        (sample[2] < 0.0 ? lo : hi) = mid;
                    }
                    integ.interpolate(hi, sample);
                    field(hi, sample, fval);
                    if (fval[2] > 1e-12) {
                        Eigen::VectorXd z(4);
                        z << sample[0], sample[1], sample[3], hi;
                        detail::SectionParamField<Field> param(field);
                        rk4_step(param, sample[2], z, -sample[2]);
                        out.crossings.push_back({z[0], z[1], z[2], z[3]});
                    }
                }
                prev_t = cur_t;
                prev_v = cur_v;
            }
        }
        out.degenerate = out.crossings.empty() && max_excursion < 1e-12;
    }
    return section;
}

// Mean over trajectories of the fraction of occupied G x G cells, gridded
// over the (X_A, P_A) bounding box of all section points.
inline double filling_fraction(const PoincareSection& section, int grid) {
    if (grid < 8) throw std::invalid_argument("filling-fraction grid must be at least 8");
    double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x;
    double lo_p = lo_x, hi_p = -lo_x;
    bool any = false;
    for (const auto& traj : section.trajectories)
        for (const auto& c : traj.crossings) {
            lo_x = std::min(lo_x, c.x_a);
            hi_x = std::max(hi_x, c.x_a);
            lo_p = std::min(lo_p, c.p_a);
            hi_p = std::max(hi_p, c.p_a);
            any = true;
        }
    if (!any) throw std::invalid_argument("section holds no crossing points");

    const double wx = hi_x - lo_x, wp = hi_p - lo_p;
    auto cell = [&](double v, double lo, double w) {
        if (w <= 0.0) return 0;
        return std::clamp((int)((v - lo) / w * grid), 0, grid - 1);
    };
    double sum = 0.0;
    int counted = 0;
    std::vector<char> occupied((std::size_t)grid * grid);
    for (const auto& traj : section.trajectories) {
        if (traj.crossings.empty()) continue;
        std::fill(occupied.begin(), occupied.end(), 0);
        int cells = 0;
        for (const auto& c : traj.crossings) {
            auto& slot = occupied[(std::size_t)cell(c.x_a, lo_x, wx) * grid +
                                  cell(c.p_a, lo_p, wp)];
            cells += 1 - slot;
            slot = 1;
        }
        sum += (double)cells / ((double)grid * grid);
        ++counted;
    }
    return sum / counted;
}

// Benettin two-trajectory estimate: a reference and a displaced copy are
// integrated as one system (shared adaptive steps), with the displacement
// renormalized to its initial size at fixed intervals.
template <class Field>
LyapunovEstimate lyapunov_max(const Field& field, const QuadraturePoint& start,
                              double horizon = 5e3, double renorm_interval = 1.0,
                              double separation = 1e-7, StepControl control = {}) {
    if (!(horizon > renorm_interval) || !(renorm_interval > 0.0))
        throw std::invalid_argument("lyapunov horizon must exceed the renormalization interval");

    Eigen::VectorXd ya(4), yb(4), da(4), db(4);
    auto rhs = [&field, ya, yb, da, db](double t, const Eigen::VectorXd& z,
                                        Eigen::VectorXd& dz) mutable {
        ya = z.head(4);
        yb = z.tail(4);
        field(t, ya, da);
        field(t, yb, db);
        dz.resize(8);
        dz.head(4) = da;
        dz.tail(4) = db;
    };

    Eigen::VectorXd z(8);
    z.head(4) = start.to_vector();
    Eigen::VectorXd offset = Eigen::VectorXd::Constant(4, 0.5 * separation);
    z.tail(4) = z.head(4) + offset;

    const long long renorms = (long long)std::floor(horizon / renorm_interval);
    LyapunovEstimate est;
    est.convergence.reserve(renorms);
    AdaptiveIntegrator<decltype(rhs)> integ(rhs, control);
    integ.start(0.0, z);
    double log_sum = 0.0;
    for (long long k = 1; k <= renorms; ++k) {
        const double target = k * renorm_interval;
        while (integ.time() < target) integ.advance(target);
        z = integ.state();
        Eigen::VectorXd delta = z.tail(4) - z.head(4);
        double stretch = std::max(delta.norm() / separation, 1e-300);
        log_sum += std::log(stretch);
        est.convergence.push_back(log_sum / (k * renorm_interval));
        z.tail(4) = z.head(4) + delta * (separation / delta.norm());
        integ.start(target, z);
    }
    est.lambda_max = est.convergence.back();
    est.horizon = renorms * renorm_interval;
    return est;
}

// Stretching rate averaged over the second half of the horizon, computed as
// 2 lambda(T) - lambda(T/2) from the running estimates. The full-horizon
// average carries an O(1/T) bias from the initial alignment transient and
// the ln(T)/T floor of sheared regular orbits; the half-difference cancels
// any bias of that form and leaves the steady rate.
inline double settled_rate(const LyapunovEstimate& est) {
    const auto& conv = est.convergence;
    if (conv.size() < 2) return est.lambda_max;
    return 2.0 * conv.back() - conv[conv.size() / 2 - 1];
}

namespace detail {

struct SinusoidFit {
    double mean = 0.0, a = 0.0, b = 0.0, sse = 0.0;
};

inline SinusoidFit fit_sinusoid(std::span<const double> t, std::span<const double> v,
                                double omega) {
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d atv = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < t.size(); ++i) {
        Eigen::Vector3d row{1.0, std::sin(omega * t[i]), std::cos(omega * t[i])};
        ata += row * row.transpose();
        atv += row * v[i];
    }
    Eigen::Vector3d coef = ata.ldlt().solve(atv);
    SinusoidFit fit{coef[0], coef[1], coef[2], 0.0};
    for (std::size_t i = 0; i < t.size(); ++i) {
        double r = v[i] - fit.mean - fit.a * std::sin(omega * t[i]) -
                   fit.b * std::cos(omega * t[i]);
        fit.sse += r * r;
    }
    return fit;
}

inline int count_interior_maxima(std::span<const double> v) {
    int count = 0;
    for (std::size_t i = 1; i + 1 < v.size(); ++i)
        if (v[i] > v[i - 1] && v[i] >= v[i + 1]) ++count;
    return count;
}

} // namespace detail

// Fits mean + A sin(w tau + phase) to the slow modulation of a series. Fast
// carriers are first reduced to their parabola-interpolated peak envelope;
// a series with few maxima is fitted directly. The frequency comes from a
// least-squares scan refined by golden-section search.
inline ModulationFit measure_modulation(const ObservableSeries& series) {
    const auto& t = series.times;
    const auto& v = series.values;
    if (t.size() != v.size() || t.size() < 8)
        throw std::invalid_argument("modulation fit needs at least 8 samples");

    const double vmax = *std::max_element(v.begin(), v.end());
    const double vmin = *std::min_element(v.begin(), v.end());
    double mean0 = 0.0;
    for (double x : v) mean0 += x;
    mean0 /= v.size();
    if (vmax - vmin <= 1e-12 * std::max(1.0, std::abs(vmax) + std::abs(vmin)))
        return {mean0, 0.0, 0.0, 0.0};

    std::vector<double> ft, fv;
    if (detail::count_interior_maxima(v) >= 10) {
        for (std::size_t i = 1; i + 1 < v.size(); ++i) {
            if (!(v[i] > v[i - 1] && v[i] >= v[i + 1])) continue;
            double denom = v[i - 1] - 2.0 * v[i] + v[i + 1];
            if (std::abs(denom) > 1e-300) {
                double shift = 0.5 * (v[i - 1] - v[i + 1]) / denom;
                ft.push_back(t[i] + shift * 0.5 * (t[i + 1] - t[i - 1]));
                fv.push_back(v[i] - 0.25 * (v[i - 1] - v[i + 1]) * shift);
            } else {
                ft.push_back(t[i]);
                fv.push_back(v[i]);
            }
        }
    } else {
        ft = t;
        fv = v;
    }
    if (ft.size() < 8) throw NumericError("too few envelope points for a modulation fit");
    const double span = ft.back() - ft.front();
    if (!(span > 0.0)) throw std::invalid_argument("series times must increase");

    std::vector<double> gaps(ft.size() - 1);
    for (std::size_t i = 0; i + 1 < ft.size(); ++i) gaps[i] = ft[i + 1] - ft[i];
    std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
    const double median_gap = gaps[gaps.size() / 2];

    const double pi = std::numbers::pi;
    int bumps = detail::count_interior_maxima(fv) + 2;
    double omega_min = pi / span;
    double omega_max = std::min(pi / median_gap, 3.0 * pi * bumps / span);
    omega_max = std::max(omega_max, omega_min * 4.0);
    const double step = 0.5 * pi / span;

    double best_omega = omega_min, best_sse = std::numeric_limits<double>::infinity();
    for (double w = omega_min; w <= omega_max; w += step) {
        double sse = detail::fit_sinusoid(ft, fv, w).sse;
        if (sse < best_sse) {
            best_sse = sse;
            best_omega = w;
        }
    }
    double lo = std::max(omega_min, best_omega - step), hi = best_omega + step;
    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - golden * (hi - lo), x2 = lo + golden * (hi - lo);
    double f1 = detail::fit_sinusoid(ft, fv, x1).sse, f2 = detail::fit_sinusoid(ft, fv, x2).sse;
    for (int it = 0; it < 80; ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = detail::fit_sinusoid(ft, fv, x1).sse;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = detail::fit_sinusoid(ft, fv, x2).sse;
        }
    }
    best_omega = 0.5 * (lo + hi);
    auto fit = detail::fit_sinusoid(ft, fv, best_omega);

    if (best_omega * span < 2.0 * pi * 5.0 * (1.0 - 1e-9))
        throw NumericError("series covers fewer than five modulation periods");

    ModulationFit out;
    out.carrier_mean = fit.mean;
    out.amplitude = std::hypot(fit.a, fit.b);
    out.frequency = best_omega;
    out.residual = std::sqrt(fit.sse / ft.size());
    return out;
}

} // namespace ultrakin
