// params.hpp — physical configuration of the two-node link and every
// algebraically derived quantity the rest of the library consumes.
//
// Model: two identical Fabry-Perot cavities of length l, each holding a
// driven three-level emitter, joined by a fiber of length L. The fiber-facing
// mirrors have per-round-trip transmission |t|^2 = t2; everything undesired
// per round trip (outer-mirror transmission + absorption/scattering) is
// lumped into |l|^2 = loss2.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "qst/constants.hpp"
#include "qst/errors.hpp"

namespace qst {

struct CavitySpec {
    double length_l; // m
    double t2;       // |t|^2, dimensionless per round trip
    double loss2;    // |l|^2 = T1 + Labs, dimensionless per round trip

    void validate() const
    {
        if (!(length_l > 0.0))
            throw ConfigError("cavity.length_l must be positive");
        if (!(t2 > 0.0 && t2 < 1.0))
            throw ConfigError("cavity.t2 must lie in (0, 1)");
        if (!(loss2 >= 0.0 && loss2 < 1.0))
            throw ConfigError("cavity.loss2 must lie in [0, 1)");
        if (!(t2 + loss2 < 1.0))
            throw ConfigError("cavity.t2 + cavity.loss2 must stay below 1");
    }
};

struct FiberSpec {
    double length_L;                      // m
    double attenuation = 0.2;             // dB/km
    double speed_cf = default_fiber_speed; // m/s

    void validate() const
    {
        if (!(length_L > 0.0))
            throw ConfigError("fiber.length_L must be positive");
        if (!(attenuation >= 0.0))
            throw ConfigError("fiber.attenuation must be non-negative");
        if (!(speed_cf > 0.0 && speed_cf <= speed_of_light))
            throw ConfigError("fiber.speed_cf must lie in (0, c]");
    }
};

struct AtomSpec {
    double g_atc;          // rad/s, atom-cavity coupling g_at-c
    double delta_at;       // rad/s, detuning of drive and cavity from |E>
    double gamma_sp = 0.0; // rad/s, spontaneous decay of |E>

    void validate() const
    {
        if (!(g_atc > 0.0))
            throw ConfigError("atom.g_atc must be positive");
        if (!(std::abs(delta_at) > 0.0))
            throw ConfigError("atom.delta_at must be nonzero");
        if (!(gamma_sp >= 0.0))
            throw ConfigError("atom.gamma_sp must be non-negative");
    }
};

struct SetupConfig {
    CavitySpec cavity; // identical for nodes A and B
    FiberSpec fiber;
    AtomSpec atom;

    void validate() const
    {
        cavity.validate();
        fiber.validate();
        atom.validate();
    }

    // Advisory only: the single-cavity-mode description needs l << L.
    std::vector<std::string> warnings() const
    {
        std::vector<std::string> w;
        if (cavity.length_l / fiber.length_L > 0.01)
            w.push_back("cavity.length_l / fiber.length_L = " +
                        std::to_string(cavity.length_l / fiber.length_L) +
                        " > 0.01; the single-cavity-mode assumption is strained");
        return w;
    }
};

struct DerivedRates {
    double kappa_cav; // rad/s, emission rate into the fiber, c t2 / (2l)
    double gamma_cav; // rad/s, undesired cavity loss rate, c loss2 / (2l)
    double kappa;     // rad/s, half linewidth: 2 kappa = kappa_cav + gamma_cav
    double fsr_fib;   // rad/s, fiber free spectral range, pi c_f / L
    double g_ab;      // rad/s, cavity-fiber coupling per mode
    double gamma_fib; // rad/s, fiber loss rate
    double p_out;     // probability of leaving through the fiber mirror
    double p_fib;     // fiber survival probability
    double p1;        // p_out^2 * p_fib, the wave-packet-shaping benchmark
    double sm_param;  // single-mode parameter 2 kappa / FSR
    double l_eff;     // m, natural photon length c_f / kappa
};

// gamma_fib = alpha * c_f with alpha = X ln(10) 1e-4 per meter,
// X the attenuation in dB/km.
inline double attenuation_to_rate(double X_db_per_km, double cf)
{
    if (X_db_per_km < 0.0)
        throw NumericError("attenuation must be non-negative");
    if (!(cf > 0.0))
        throw NumericError("fiber speed must be positive");
    const double alpha = X_db_per_km * std::numbers::ln10 * 1e-4;
    return alpha * cf;
}

inline DerivedRates derive_rates(const SetupConfig& cfg)
{
    cfg.validate();
    DerivedRates r{};
    const double l = cfg.cavity.length_l;
    r.kappa_cav = speed_of_light * cfg.cavity.t2 / (2.0 * l);
    r.gamma_cav = speed_of_light * cfg.cavity.loss2 / (2.0 * l);
    r.kappa = 0.5 * (r.kappa_cav + r.gamma_cav);
    r.fsr_fib = pi * cfg.fiber.speed_cf / cfg.fiber.length_L;
    r.g_ab = std::sqrt(r.kappa_cav * r.fsr_fib / two_pi);
    r.gamma_fib = attenuation_to_rate(cfg.fiber.attenuation, cfg.fiber.speed_cf);
    r.p_out = r.kappa_cav / (r.kappa_cav + r.gamma_cav);
    r.p_fib = fiber_transmission(r.gamma_fib, cfg.fiber.length_L, cfg.fiber.speed_cf);
    r.p1 = r.p_out * r.p_out * r.p_fib;
    r.sm_param = 2.0 * r.kappa / r.fsr_fib;
    r.l_eff = cfg.fiber.speed_cf / r.kappa;
    return r;
}

struct PhotonLengths {
    double l_eff; // m, fixed by the cavity: c_f / kappa
    double l_ph;  // m, set by the drive: c_f / gamma_eff
};

// Valid only while the cavity can be eliminated, i.e. G_max < kappa.
// gamma_eff = kappa_cav (G_max / kappa)^2 is the effective emission rate of
// the driven atom into the fiber. The fiber speed is recovered from
// l_eff = c_f / kappa so both lengths use the same c_f as derive_rates.
inline PhotonLengths photon_lengths(const DerivedRates& rates, double g_max)
{
    if (!(g_max > 0.0))
        throw NumericError("photon_lengths: g_max must be positive");
    if (g_max >= rates.kappa)
        throw RegimeError("photon_lengths: G_max >= kappa, cavity elimination invalid",
                          g_max / rates.kappa);
    const double cf = rates.l_eff * rates.kappa;
    const double gamma_eff = rates.kappa_cav * (g_max / rates.kappa) * (g_max / rates.kappa);
    return {rates.l_eff, cf / gamma_eff};
}

} // namespace qst
