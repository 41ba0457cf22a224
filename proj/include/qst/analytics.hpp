// analytics.hpp — closed-form success probabilities for the two transfer
// protocols, the optimal-pulse-width formula, the L_max crossover curve and
// the cooperativity corrections.
//
// Conventions: g0 is the maximal effective atom-fiber coupling
// max(g~_A) = max(g~_B), T the drive pulse width, gamma_cav_eff the
// (constant) effective cavity decay acting on the qubits after cavity
// elimination. Every exponent is assembled before a single call to exp so
// long-fiber cases underflow gracefully instead of losing digits.
#pragma once

#include <cmath>
#include <limits>

#include "qst/constants.hpp"
#include "qst/errors.hpp"

namespace qst {

// Bundle of the quantities the closed forms depend on. Convenience only;
// the free functions below are the interface.
struct AnalyticInputs {
    double g0;            // rad/s
    double T;             // s
    double gamma_fib;     // rad/s
    double fsr_fib;       // rad/s
    double gamma_cav_eff; // rad/s
    double p_out;         // probability
    double L;             // m
    double cf;            // m/s
};

// Single-fiber-mode STIRAP limit: exp(-(gamma_fib / g0^2 T) pi/2).
// Reaches unity in the adiabatic limit; this is the truncation the
// three-mode treatment refutes.
inline double f_stirap(double g0, double T, double gamma_fib)
{
    if (!(g0 > 0.0 && T > 0.0))
        throw NumericError("f_stirap: g0 and T must be positive");
    return std::exp(-0.5 * pi * gamma_fib / (g0 * g0 * T));
}

// Three-mode result: the non-adiabaticity term trades off against the
// coupling to the first pair of detuned fiber modes.
inline double f_fib(double g0, double T, double gamma_fib, double fsr_fib)
{
    if (!(g0 > 0.0 && T > 0.0 && fsr_fib > 0.0))
        throw NumericError("f_fib: g0, T and FSR must be positive");
    const double u = g0 * g0 * T;
    return std::exp(-0.5 * pi * gamma_fib * (1.0 / u + u / (fsr_fib * fsr_fib)));
}

// f_fib at its optimum g0^2 T = FSR_fib; identical to the one-pass fiber
// transmission P_fib (bit-for-bit with derive_rates).
inline double f_fib_opt(double gamma_fib, double L, double cf)
{
    return fiber_transmission(gamma_fib, L, cf);
}

// Unoptimized adiabatic-passage success probability with both loss channels.
inline double f1(double g0, double T, double gamma_fib, double fsr_fib, double gamma_cav_eff)
{
    if (!(g0 > 0.0 && T > 0.0 && fsr_fib > 0.0))
        throw NumericError("f1: g0, T and FSR must be positive");
    const double u = g0 * g0 * T;
    return std::exp(-0.5 * pi * (gamma_fib / u + gamma_fib * u / (fsr_fib * fsr_fib) +
                                 0.25 * gamma_cav_eff * T));
}

// f1 optimized over the pulse width. Written as
//   exp(-sqrt(P^2 + (pi^2/2) P (1-p)/p)),  P = gamma_fib L / c_f,
// which is algebraically identical to the textbook form
//   exp(-P sqrt(1 + pi^2 (1-p) / (2 P p)))
// but stays finite at P -> 0 and reduces exactly to exp(-P) at p_out = 1
// without ever evaluating 0/0.
inline double f_ap(double p_out, double gamma_fib, double L, double cf)
{
    if (!(p_out > 0.0 && p_out <= 1.0))
        throw NumericError("f_ap: p_out must lie in (0, 1]");
    const double p_loss = gamma_fib * L / cf;
    const double cavity_term = 0.5 * pi * pi * (1.0 - p_out) / p_out;
    return std::exp(-std::sqrt(p_loss * (p_loss + cavity_term)));
}

// Pulse width minimizing the exponent of f1. The exponent is
// (pi/2)(a/T + b T) with a = gamma_fib/g0^2 and
// b = gamma_fib g0^2 / FSR^2 + gamma_cav_eff/4, so T* = sqrt(a/b).
// The unit tests hold this closed form against a dense numeric argmin.
inline double optimal_pulse_width(double gamma_fib, double fsr_fib, double gamma_cav_eff, double g0)
{
    if (!(g0 > 0.0 && fsr_fib > 0.0))
        throw NumericError("optimal_pulse_width: g0 and FSR must be positive");
    const double a = gamma_fib / (g0 * g0);
    const double b = gamma_fib * g0 * g0 / (fsr_fib * fsr_fib) + 0.25 * gamma_cav_eff;
    if (!(a > 0.0) || !(b > 0.0))
        throw NumericError("optimal_pulse_width: unbounded optimum (losses must be positive)");
    return std::sqrt(a / b);
}

inline double f1(const AnalyticInputs& in)
{
    return f1(in.g0, in.T, in.gamma_fib, in.fsr_fib, in.gamma_cav_eff);
}

inline double f_ap(const AnalyticInputs& in)
{
    return f_ap(in.p_out, in.gamma_fib, in.L, in.cf);
}

// Longest fiber for which adiabatic passage still beats the wave-packet
// shaping benchmark by the given margin: root of
// F_AP(L) - P_out^2 P_fib(L) - margin. Bracketing bisection on [0, 1e6 m];
// the bracket is tightened far below 0.1 m so the root also satisfies
// |F_AP - P1 - margin| < 1e-6.
inline double l_max(double p_out, double gamma_fib, double cf, double margin = 0.05)
{
    if (!(p_out > 0.0 && p_out <= 1.0))
        throw NumericError("l_max: p_out must lie in (0, 1]");
    if (!(gamma_fib > 0.0))
        throw NumericError("l_max: gamma_fib must be positive");
    auto gap = [&](double L) {
        return f_ap(p_out, gamma_fib, L, cf) -
               p_out * p_out * fiber_transmission(gamma_fib, L, cf) - margin;
    };
    double lo = 0.0, hi = 1e6;
    if (!(gap(lo) > 0.0) || !(gap(hi) < 0.0))
        throw NumericError("l_max: no crossing of F_AP = P1 + margin on [0, 1e6 m]");
    for (int i = 0; i < 200 && hi - lo > 1e-6; ++i) {
        const double mid = 0.5 * (lo + hi);
        (gap(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Cooperativity C = g_at-c^2 / ((2 kappa) Gamma). Gamma = 0 switches atomic
// losses off entirely; that is reported as an infinite C.
inline double cooperativity(double g_atc, double kappa, double gamma_sp)
{
    if (!(g_atc > 0.0 && kappa > 0.0))
        throw NumericError("cooperativity: g_atc and kappa must be positive");
    if (gamma_sp == 0.0)
        return std::numeric_limits<double>::infinity();
    return g_atc * g_atc / (2.0 * kappa * gamma_sp);
}

// Retrieval-limited benchmark: P1 degraded by (C/(1/4+C))^2.
inline double p1_tilde(double C, double p1)
{
    if (!(C > 0.0))
        throw NumericError("p1_tilde: cooperativity must be positive");
    if (std::isinf(C))
        return p1;
    const double eta = C / (0.25 + C);
    return eta * eta * p1;
}

} // namespace qst
