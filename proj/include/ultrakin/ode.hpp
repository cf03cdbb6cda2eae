#pragma once

// Embedded Dormand-Prince 5(4) pair with FSAL, PI step-size control and
// quartic dense output. The local error is controlled per unit step: a step
// of size h is accepted when the weighted error estimate of the embedded
// pair is at most h. This keeps the accumulated error over a fixed interval
// near the tolerance instead of letting it grow with the number of steps.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>

#include "ultrakin/errors.hpp"

namespace ultrakin {

struct StepControl {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double max_step = std::numeric_limits<double>::infinity();
    double first_step = 0.0; // 0 = choose automatically
    std::int64_t max_steps = 200'000'000;
};

namespace detail {

struct DormandPrinceTableau {
    static constexpr double a21 = 1.0 / 5.0;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                            a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                            a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                            a65 = -5103.0 / 18656.0;
    static constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0,
                            a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                            a76 = 11.0 / 84.0;
    static constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0,
                            c5 = 8.0 / 9.0;
    // Difference between the 5th- and 4th-order weights.
    static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0,
                            e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                            e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
    // Dense-output weights for the quartic interpolant.
    static constexpr double d1 = -12715105075.0 / 11282082432.0;
    static constexpr double d3 = 87487479700.0 / 32700410799.0;
    static constexpr double d4 = -10690763975.0 / 1880347072.0;
    static constexpr double d5 = 701980252875.0 / 199316789632.0;
    static constexpr double d6 = -1453857185.0 / 822651844.0;
    static constexpr double d7 = 69997945.0 / 29380423.0;
};

} // namespace detail

template <class F>
class AdaptiveIntegrator {
public:
    explicit AdaptiveIntegrator(F rhs, StepControl control = {})
        : rhs_(std::move(rhs)), ctrl_(control) {
        if (!(ctrl_.rel_tol > 0) || !(ctrl_.abs_tol > 0))
            throw std::invalid_argument("tolerances must be positive");
    }

    void start(double t0, Eigen::VectorXd y0) {
        const auto n = y0.size();
        t_ = t0;
        t_prev_ = t0;
        y_ = std::move(y0);
        for (auto* v : {&ynew_, &ytmp_, &k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_,
                        &r1_, &r2_, &r3_, &r4_, &r5_})
            v->resize(n);
        rhs_(t_, y_, k1_);
        if (!k1_.allFinite()) throw NumericError("non-finite derivative at the initial state");
        h_prop_ = ctrl_.first_step > 0 ? ctrl_.first_step : guess_first_step();
        h_prop_ = std::min(h_prop_, ctrl_.max_step);
        q_old_ = 1e-4;
        accepted_ = 0;
        attempts_ = 0;
        has_step_ = false;
        last_rejected_ = false;
    }

    // Takes one accepted step, never moving past t_limit.
    void advance(double t_limit = std::numeric_limits<double>::infinity()) {
        using T = detail::DormandPrinceTableau;
        if (!(t_limit > t_))
            throw std::invalid_argument("integration limit must lie ahead of the current time");
        int bad = 0;
        for (;;) {
            if (++attempts_ > ctrl_.max_steps)
                throw NumericError("step limit exceeded during integration");
            double h = std::min(h_prop_, ctrl_.max_step);
            bool clipped = false;
            if (t_ + h >= t_limit) {
                h = t_limit - t_;
                clipped = true;
            }
            if (!(h > 16.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t_), 1.0)))
                throw NumericError("step size underflow during integration");

            const double t = t_;
            ytmp_ = y_ + h * (T::a21 * k1_);
            rhs_(t + T::c2 * h, ytmp_, k2_);
            ytmp_ = y_ + h * (T::a31 * k1_ + T::a32 * k2_);
            rhs_(t + T::c3 * h, ytmp_, k3_);
            ytmp_ = y_ + h * (T::a41 * k1_ + T::a42 * k2_ + T::a43 * k3_);
            rhs_(t + T::c4 * h, ytmp_, k4_);
            ytmp_ = y_ + h * (T::a51 * k1_ + T::a52 * k2_ + T::a53 * k3_ + T::a54 * k4_);
            rhs_(t + T::c5 * h, ytmp_, k5_);
            ytmp_ = y_ + h * (T::a61 * k1_ + T::a62 * k2_ + T::a63 * k3_ + T::a64 * k4_ +
                              T::a65 * k5_);
            rhs_(t + h, ytmp_, k6_);
            ynew_ = y_ + h * (T::a71 * k1_ + T::a73 * k3_ + T::a74 * k4_ + T::a75 * k5_ +
                              T::a76 * k6_);
            rhs_(t + h, ynew_, k7_);

            double q = 0.0;
            bool finite = ynew_.allFinite() && k7_.allFinite();
            if (finite) {
                double sum = 0.0;
                for (Eigen::Index i = 0; i < y_.size(); ++i) {
                    double e = T::e1 * k1_[i] + T::e3 * k3_[i] + T::e4 * k4_[i] +
                               T::e5 * k5_[i] + T::e6 * k6_[i] + T::e7 * k7_[i];
                    double sc = ctrl_.abs_tol +
                                ctrl_.rel_tol * std::max(std::abs(y_[i]), std::abs(ynew_[i]));
                    sum += (e / sc) * (e / sc);
                }
                q = std::sqrt(sum / (double)y_.size());
                finite = std::isfinite(q);
            }
            if (!finite) {
                if (++bad > 40) throw NumericError("non-finite state during integration");
                h_prop_ = 0.25 * h;
                last_rejected_ = true;
                continue;
            }

            if (q <= 1.0) {
                r1_ = y_;
                r2_ = ynew_ - y_;
                r3_ = h * k1_ - r2_;
                r4_ = r2_ - h * k7_ - r3_;
                r5_ = h * (T::d1 * k1_ + T::d3 * k3_ + T::d4 * k4_ + T::d5 * k5_ +
                           T::d6 * k6_ + T::d7 * k7_);
                t_prev_ = t_;
                h_last_ = h;
                t_ = clipped ? t_limit : t_ + h;
                y_.swap(ynew_);
                k1_.swap(k7_);
                has_step_ = true;
                ++accepted_;

                const double qq = std::max(q, 1e-16);
                double grow = 0.9 * std::pow(qq, -0.2125) * std::pow(q_old_, 0.05);
                grow = std::clamp(grow, 0.2, last_rejected_ ? 1.0 : 5.0);
                const double cand = h * grow;
                h_prop_ = clipped ? std::max(h_prop_, cand) : cand;
                q_old_ = std::max(q, 1e-4);
                last_rejected_ = false;
                return;
            }
            h_prop_ = h * std::max(0.2, 0.9 * std::pow(q, -0.25));
            last_rejected_ = true;
        }
    }

    double time() const { return t_; }
    double previous_time() const { return t_prev_; }
    const Eigen::VectorXd& state() const { return y_; }
    const Eigen::VectorXd& derivative() const { return k1_; }
    std::int64_t steps() const { return accepted_; }

    // Valid over the last accepted step [previous_time(), time()].
    void interpolate(double t, Eigen::VectorXd& out) const {
        if (!has_step_) throw std::logic_error("interpolation requested before any step");
        const double th = (t - t_prev_) / h_last_;
        const double th1 = 1.0 - th;
        out = r1_ + th * (r2_ + th1 * (r3_ + th * (r4_ + th1 * r5_)));
    }
    Eigen::VectorXd interpolate(double t) const {
        Eigen::VectorXd out;
        interpolate(t, out);
        return out;
    }

private:
    double guess_first_step() {
        double d0 = 0.0, d1 = 0.0;
        const auto n = y_.size();
        for (Eigen::Index i = 0; i < n; ++i) {
            double sc = ctrl_.abs_tol + ctrl_.rel_tol * std::abs(y_[i]);
            d0 += (y_[i] / sc) * (y_[i] / sc);
            d1 += (k1_[i] / sc) * (k1_[i] / sc);
        }
        d0 = std::sqrt(d0 / (double)n);
        d1 = std::sqrt(d1 / (double)n);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        ytmp_ = y_ + h0 * k1_;
        rhs_(t_ + h0, ytmp_, k2_);
        double d2 = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double sc = ctrl_.abs_tol + ctrl_.rel_tol * std::abs(y_[i]);
            double dd = (k2_[i] - k1_[i]) / sc;
            d2 += dd * dd;
        }
        d2 = std::sqrt(d2 / (double)n) / h0;
        double dmax = std::max(d1, d2);
        double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
        return 0.5 * std::min(100.0 * h0, h1);
    }

    F rhs_;
    StepControl ctrl_;
    double t_ = 0.0, t_prev_ = 0.0, h_prop_ = 0.0, h_last_ = 0.0, q_old_ = 1e-4;
    std::int64_t accepted_ = 0, attempts_ = 0;
    bool has_step_ = false, last_rejected_ = false;
    Eigen::VectorXd y_, ynew_, ytmp_;
    Eigen::VectorXd k1_, k2_, k3_, k4_, k5_, k6_, k7_;
    Eigen::VectorXd r1_, r2_, r3_, r4_, r5_;
};

template <class F>
Eigen::VectorXd integrate_to(F rhs, double t0, Eigen::VectorXd y0, double t1,
                             StepControl control = {}) {
    if (t1 == t0) return y0;
    if (t1 < t0) throw std::invalid_argument("backward integration is not supported");
    AdaptiveIntegrator<F> integ(std::move(rhs), control);
    integ.start(t0, std::move(y0));
    while (integ.time() < t1) integ.advance(t1);
    return integ.state();
}

// Calls observe(t, y) at every requested time, in order. Times must be
// nondecreasing; entries at or before t0 observe the initial state.
template <class F, class Observer>
void integrate_sampled(F rhs, double t0, Eigen::VectorXd y0, std::span<const double> times,
                       StepControl control, Observer&& observe) {
    if (times.empty()) return;
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] < times[i - 1])
            throw std::invalid_argument("sample times must be nondecreasing");
    std::size_t i = 0;
    while (i < times.size() && times[i] <= t0) {
        observe(times[i], y0);
        ++i;
    }
    if (i == times.size()) return;
    const double t_end = times.back();
    AdaptiveIntegrator<F> integ(std::move(rhs), control);
    integ.start(t0, std::move(y0));
    Eigen::VectorXd sample;
    while (i < times.size()) {
        integ.advance(t_end);
        while (i < times.size() && times[i] <= integ.time()) {
            integ.interpolate(times[i], sample);
            observe(times[i], sample);
            ++i;
        }
    }
}

// One classic fourth-order Runge-Kutta step, in place.
template <class F>
void rk4_step(F&& rhs, double t, Eigen::VectorXd& y, double h) {
    Eigen::VectorXd k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size());
    rhs(t, y, k1);
    Eigen::VectorXd tmp = y + 0.5 * h * k1;
    rhs(t + 0.5 * h, tmp, k2);
    tmp = y + 0.5 * h * k2;
    rhs(t + 0.5 * h, tmp, k3);
    tmp = y + h * k3;
    rhs(t + h, tmp, k4);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

} // namespace ultrakin
