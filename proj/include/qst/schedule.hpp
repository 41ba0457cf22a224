// schedule.hpp — time-dependent classical drive schedules Omega_{A/B}(t)
// for the transfer protocols: wave-packet shaping (WPS), adiabatic passage
// with Gaussian pulses (AP), and the sine/cosine sequence used by the
// analytic reduced models.
//
// Schedules are closed-form evaluators, not sampled arrays, so integrators
// pick their own step sizes. Outside [t_start, t_end] every drive is zero.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "qst/errors.hpp"
#include "qst/params.hpp"

namespace qst {

enum class Protocol { WPS, AP_GAUSS, SINCOS, PHOTONIC };

struct DriveSchedule {
    std::function<double(double)> omega_a; // rad/s Rabi frequency, node A
    std::function<double(double)> omega_b; // rad/s, node B
    double t_start = 0.0;
    double t_end = 0.0;
    Protocol tag = Protocol::AP_GAUSS;

    // integrator hints
    std::vector<double> breakpoints; // kinks the stepper must land on
    double char_time = 0.0;          // slowest-feature timescale

    double omega_at(double t, bool node_a) const
    {
        if (t < t_start || t > t_end)
            return 0.0;
        return node_a ? omega_a(t) : omega_b(t);
    }
};

namespace detail {

// gamma_A(t) of the wave-packet-shaping sequence: exponential turn-on that
// produces a time-symmetric two-sided exponential packet, then a plateau.
inline double wps_gamma_profile(double t, double gamma_max)
{
    if (t >= 0.0)
        return gamma_max;
    const double e = std::exp(gamma_max * t);
    return gamma_max * e / (2.0 - e);
}

} // namespace detail

// Wave-packet shaping. gamma_A ramps up as gamma_max e^{gm t}/(2 - e^{gm t})
// and holds gamma_max from t = 0; gamma_B(t) = gamma_A(tau - t) with
// tau = L/c_f (plus an optional extra shift, see below). Emission is
// truncated at t_off = 6 ln10 / gamma_max where the un-emitted population
// bound exp(-gamma_max t_off) has fallen below 1e-6; the onset is placed
// where the ramp has decayed to 1e-12 gamma_max. The mirrored profile is
// built from the un-truncated ramp.
//
// Requires the elimination regime G_max < kappa/5. The drive amplitude
// follows Omega = (Delta_at kappa / (g_atc sqrt(kappa_cav))) sqrt(gamma(t)).
inline DriveSchedule wps_schedule(const DerivedRates& rates, const AtomSpec& atom,
                                  double g_max, double tau, double b_shift = 0.0)
{
    if (!(g_max > 0.0))
        throw NumericError("wps_schedule: g_max must be positive");
    if (g_max >= rates.kappa / 5.0)
        throw RegimeError("wps_schedule: G_max >= kappa/5, cavity elimination regime violated",
                          g_max / rates.kappa);

    const double gamma_max = rates.kappa_cav * (g_max / rates.kappa) * (g_max / rates.kappa);
    const double t_off = 6.0 * std::numbers::ln10 / gamma_max;
    const double t_on = std::log(2e-12) / gamma_max; // ramp at 1e-12 gamma_max

    const double omega_scale =
        atom.delta_at * rates.kappa / (atom.g_atc * std::sqrt(rates.kappa_cav));

    auto gamma_a = [gamma_max, t_off](double t) {
        if (t > t_off)
            return 0.0;
        return detail::wps_gamma_profile(t, gamma_max);
    };
    auto gamma_b = [gamma_max, tau, b_shift](double t) {
        return detail::wps_gamma_profile(tau + b_shift - t, gamma_max);
    };

    DriveSchedule s;
    s.omega_a = [gamma_a, omega_scale](double t) { return omega_scale * std::sqrt(gamma_a(t)); };
    s.omega_b = [gamma_b, omega_scale](double t) { return omega_scale * std::sqrt(gamma_b(t)); };
    s.t_start = t_on;
    s.t_end = tau + b_shift - t_on;
    s.tag = Protocol::WPS;
    s.breakpoints = {0.0, std::min(t_off, tau + b_shift), std::max(t_off, tau + b_shift)};
    s.char_time = 1.0 / gamma_max;
    return s;
}

// Adiabatic passage: Gaussian pulses of equal height, receiver first.
//   Omega_B(t) = Omega_max exp(-t^2/T^2)
//   Omega_A(t) = Omega_max exp(-(t - tau_spl)^2/T^2),  tau_spl = x_spl T.
// The support window is [-W T, tau_spl + W T]; W defaults to 5 (amplitude
// e^-25 at the edges) and stays configurable because the timing-robustness
// sweeps perturb x_spl.
inline DriveSchedule ap_gaussian_schedule(double omega_max, double T, double x_spl,
                                          double window = 5.0)
{
    if (!(T > 0.0))
        throw NumericError("ap_gaussian_schedule: T must be positive");
    if (!(x_spl > 0.0))
        throw NumericError("ap_gaussian_schedule: x_spl must be positive");
    const double tau_spl = x_spl * T;
    DriveSchedule s;
    s.omega_a = [omega_max, T, tau_spl](double t) {
        const double u = (t - tau_spl) / T;
        return omega_max * std::exp(-u * u);
    };
    s.omega_b = [omega_max, T](double t) {
        const double u = t / T;
        return omega_max * std::exp(-u * u);
    };
    s.t_start = -window * T;
    s.t_end = tau_spl + window * T;
    s.tag = Protocol::AP_GAUSS;
    s.char_time = T;
    return s;
}

// Sine/cosine sequence of the analytic treatment, expressed back at the
// Omega level through the elimination relations: realizing the effective
// atom-fiber couplings g~_A = g0 sin(t/T), g~_B = g0 cos(t/T) on
// [0, pi T/2] needs G_{A/B}(t) = (kappa/g_ab) g~_{A/B}(t), i.e.
// Omega_{A/B} = Delta_at G_{A/B} / g_atc.
inline DriveSchedule sincos_schedule(double g0_eff, double T, const DerivedRates& rates,
                                     const AtomSpec& atom)
{
    if (!(T > 0.0))
        throw NumericError("sincos_schedule: T must be positive");
    if (!(g0_eff > 0.0))
        throw NumericError("sincos_schedule: g0_eff must be positive");
    const double scale = atom.delta_at * rates.kappa * g0_eff / (atom.g_atc * rates.g_ab);
    DriveSchedule s;
    s.omega_a = [scale, T](double t) { return scale * std::sin(t / T); };
    s.omega_b = [scale, T](double t) { return scale * std::cos(t / T); };
    s.t_start = 0.0;
    s.t_end = 0.5 * pi * T;
    s.tag = Protocol::SINCOS;
    s.char_time = T;
    return s;
}

// Effective atom-cavity coupling G(t) = g_atc Omega(t) / Delta_at belonging
// to a schedule; this is what the equations of motion consume.
inline double effective_coupling(const DriveSchedule& s, const AtomSpec& atom, double t,
                                 bool node_a)
{
    return atom.g_atc * s.omega_at(t, node_a) / atom.delta_at;
}

} // namespace qst
