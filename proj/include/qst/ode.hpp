// ode.hpp — adaptive Dormand-Prince 5(4) for complex-vector ODEs.
//
// Workhorse for the small reduced models and the lab-frame cross-check of
// the exponential engine. The oscillatory fiber diagonal is handled by
// capping the step at max_step (callers set dt * N * FSR < 0.5).
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "qst/errors.hpp"

namespace qst {

using ComplexVec = Eigen::VectorXcd;

struct OdeOptions {
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    double max_step = std::numeric_limits<double>::infinity();
    double init_step = 0.0; // 0 = auto
    long max_steps = 200'000'000L;
};

struct OdeStats {
    long n_accepted = 0;
    long n_rejected = 0;
};

// rhs(t, y, dydt); observer(t, y) fires at every accepted step (and at t0).
template <class Rhs, class Observer>
OdeStats integrate_dp5(Rhs&& rhs, ComplexVec& y, double t0, double t1, const OdeOptions& opt,
                       Observer&& observer)
{
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // embedded 4th-order weights
    static constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                            e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;

    OdeStats stats;
    if (t1 <= t0)
        return stats;

    const auto n = y.size();
    ComplexVec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), y5(n);

    double t = t0;
    rhs(t, y, k1);
    observer(t, y);

    double h = opt.init_step > 0.0 ? opt.init_step
                                   : std::min(opt.max_step, (t1 - t0) * 1e-4);
    h = std::min(h, t1 - t0);
    const double h_floor = (t1 - t0) * 1e-15;

    long iter = 0;
    while (t < t1) {
        if (++iter > opt.max_steps)
            throw NumericError("integrate_dp5: step budget exhausted");
        h = std::min({h, opt.max_step, t1 - t});
        if (h < h_floor)
            throw NumericError("integrate_dp5: step underflow at t = " + std::to_string(t));

        ytmp = y + h * a21 * k1;
        rhs(t + c2 * h, ytmp, k2);
        ytmp = y + h * (a31 * k1 + a32 * k2);
        rhs(t + c3 * h, ytmp, k3);
        ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        rhs(t + c4 * h, ytmp, k4);
        ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rhs(t + c5 * h, ytmp, k5);
        ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        rhs(t + h, ytmp, k6);
        y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        rhs(t + h, y5, k7);

        double err = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto y4i = y[i] + h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                         e6 * k6[i] + e7 * k7[i]);
            const double sc = opt.abs_tol +
                              opt.rel_tol * std::max(std::abs(y[i]), std::abs(y5[i]));
            err = std::max(err, std::abs(y5[i] - y4i) / sc);
        }

        if (err <= 1.0) {
            t += h;
            y.swap(y5);
            k1.swap(k7); // FSAL
            observer(t, y);
            ++stats.n_accepted;
        } else {
            ++stats.n_rejected;
        }
        const double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
        h *= std::clamp(fac, 0.2, 5.0);
    }
    return stats;
}

template <class Rhs>
OdeStats integrate_dp5(Rhs&& rhs, ComplexVec& y, double t0, double t1, const OdeOptions& opt)
{
    return integrate_dp5(std::forward<Rhs>(rhs), y, t0, t1, opt,
                         [](double, const ComplexVec&) {});
}

} // namespace qst
