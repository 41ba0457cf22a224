// constants.hpp — physical constants and angular-frequency conventions.
//
// All rates in this library are stored as angular frequencies (rad/s).
// The experimental literature quotes rates as nu = omega/2pi; conversion
// happens only at the I/O boundary (config parsing, CLI printing).
#pragma once

#include <cmath>
#include <numbers>

namespace qst {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// speed of light in vacuum, m/s (exact by definition)
inline constexpr double speed_of_light = 299'792'458.0;

// default speed of light in the fiber, c_f = 2c/3
inline constexpr double default_fiber_speed = 2.0 * speed_of_light / 3.0;

constexpr double hz_to_angular(double nu) { return two_pi * nu; }
constexpr double angular_to_hz(double omega) { return omega / two_pi; }

// Probability that a photon survives propagation through a fiber of
// length L (m) with loss rate gamma_fib (rad/s) at speed cf (m/s).
// This is the single canonical definition; every module that needs
// P_fib = exp(-gamma_fib L / c_f) must call it.
inline double fiber_transmission(double gamma_fib, double length, double cf)
{
    return std::exp(-gamma_fib * length / cf);
}

} // namespace qst
