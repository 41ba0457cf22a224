#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "qst/params.hpp"

using namespace qst;
using Catch::Approx;

namespace {

SetupConfig stute_like_config(double loss2_ppm = 2.0, double length_L = 400.0,
                              double attenuation = 0.2)
{
    SetupConfig cfg;
    cfg.cavity = {0.02, 13e-6, loss2_ppm * 1e-6};
    cfg.fiber = {length_L, attenuation};
    cfg.atom = {5e4, two_pi * 100e6, 0.0};
    return cfg;
}

} // namespace

TEST_CASE("attenuation_to_rate reproduces the quoted fiber loss rates")
{
    // telecom: 0.2 dB/km -> gamma_fib/2pi ~= 1.5 kHz
    const double g02 = attenuation_to_rate(0.2, default_fiber_speed);
    CHECK(angular_to_hz(g02) == Approx(1500.0).epsilon(0.05));
    CHECK(g02 == Approx(9203.96859710458).epsilon(1e-12));

    // optical: 3 dB/km -> ~= 22 kHz
    const double g3 = attenuation_to_rate(3.0, default_fiber_speed);
    CHECK(angular_to_hz(g3) == Approx(22000.0).epsilon(0.05));

    CHECK(attenuation_to_rate(0.0, default_fiber_speed) == 0.0);
    CHECK_THROWS_AS(attenuation_to_rate(-0.1, default_fiber_speed), NumericError);
}

TEST_CASE("derive_rates matches the quoted cavity decay rates")
{
    SetupConfig cfg = stute_like_config();

    SECTION("kappa_cav for a 2 cm cavity with 5 ppm transmission is ~6 kHz")
    {
        cfg.cavity.t2 = 5e-6;
        const auto r = derive_rates(cfg);
        CHECK(angular_to_hz(r.kappa_cav) == Approx(6000.0).epsilon(0.02));
        CHECK(r.kappa_cav == Approx(speed_of_light * 5e-6 / 0.04).epsilon(1e-14));
    }
    SECTION("kappa_cav for a 0.5 mm cavity with 5 ppm transmission is ~240 kHz")
    {
        cfg.cavity.length_l = 0.0005;
        cfg.cavity.t2 = 5e-6;
        const auto r = derive_rates(cfg);
        CHECK(angular_to_hz(r.kappa_cav) == Approx(240e3).epsilon(0.01));
    }
    SECTION("gamma_cav for 5 ppm undesired losses is ~6 kHz")
    {
        cfg.cavity.loss2 = 5e-6;
        const auto r = derive_rates(cfg);
        CHECK(angular_to_hz(r.gamma_cav) == Approx(6000.0).epsilon(0.02));
    }
    SECTION("P_out^2 for t2 = 5 ppm, loss2 = 2 ppm is ~51%")
    {
        cfg.cavity.t2 = 5e-6;
        cfg.cavity.loss2 = 2e-6;
        const auto r = derive_rates(cfg);
        CHECK(r.p_out * r.p_out == Approx(25.0 / 49.0).epsilon(1e-14));
        CHECK(r.p_out * r.p_out == Approx(0.51).epsilon(0.01));
    }
}

TEST_CASE("derive_rates internal identities")
{
    const auto r = derive_rates(stute_like_config());
    CHECK(2.0 * r.kappa == Approx(r.kappa_cav + r.gamma_cav).epsilon(1e-15));
    CHECK(r.p_out + r.gamma_cav / (r.kappa_cav + r.gamma_cav) == Approx(1.0).margin(1e-15));
    CHECK(r.p1 == Approx(r.p_out * r.p_out * r.p_fib).epsilon(1e-15));
    CHECK(r.sm_param == Approx(2.0 * r.kappa / r.fsr_fib).epsilon(1e-15));
    CHECK(r.g_ab == Approx(std::sqrt(r.kappa_cav * r.fsr_fib / two_pi)).epsilon(1e-15));
    // zero-length fiber transmits perfectly, for any attenuation
    CHECK(fiber_transmission(r.gamma_fib, 0.0, default_fiber_speed) == 1.0);
}

TEST_CASE("monotonicity of the loss budget factors")
{
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        SetupConfig cfg = stute_like_config(1.0 + 9.0 * u(rng), 50.0 + 900.0 * u(rng),
                                            0.1 + 2.9 * u(rng));
        const auto r = derive_rates(cfg);

        SetupConfig longer = cfg;
        longer.fiber.length_L *= 1.0 + u(rng);
        CHECK(derive_rates(longer).p_fib < r.p_fib);

        SetupConfig lossier = cfg;
        lossier.fiber.attenuation *= 1.0 + u(rng);
        CHECK(derive_rates(lossier).p_fib < r.p_fib);

        SetupConfig better_mirror = cfg;
        better_mirror.cavity.t2 *= 1.0 + u(rng);
        CHECK(derive_rates(better_mirror).p_out > r.p_out);

        // scale consistency: doubling both coefficients leaves P_out alone
        SetupConfig scaled = cfg;
        scaled.cavity.t2 *= 2.0;
        scaled.cavity.loss2 *= 2.0;
        CHECK(derive_rates(scaled).p_out == Approx(r.p_out).epsilon(1e-14));
    }
}

TEST_CASE("photon lengths")
{
    SECTION("Innsbruck-like rates give L_eff ~= 636 m")
    {
        // kappa_cav/2pi = 0.02 MHz, gamma_cav/2pi = 0.08 MHz; pick l = 2 cm
        SetupConfig cfg = stute_like_config();
        cfg.cavity.t2 = 2.0 * cfg.cavity.length_l * hz_to_angular(0.02e6) / speed_of_light;
        cfg.cavity.loss2 = 4.0 * cfg.cavity.t2;
        const auto r = derive_rates(cfg);
        CHECK(r.l_eff == Approx(636.18).epsilon(0.002));
        CHECK(photon_lengths(r, r.kappa / 10.0).l_eff == Approx(r.l_eff).epsilon(1e-15));
    }
    SECTION("gamma_eff = kappa makes both lengths coincide")
    {
        SetupConfig cfg = stute_like_config(0.0); // lossless cavity: 2 kappa = kappa_cav
        const auto r = derive_rates(cfg);
        const auto pl = photon_lengths(r, r.kappa / std::sqrt(2.0));
        CHECK(pl.l_ph == Approx(pl.l_eff).epsilon(1e-12));
    }
    SECTION("direct evaluation, frozen cross-check")
    {
        // l = 2 cm, t2 = 13 ppm, loss2 = 2 ppm, g_max = kappa/10:
        // l_ph = 100 c_f / kappa_cav = 205128.205... m (computed from first
        // principles in an independent script)
        const auto r = derive_rates(stute_like_config());
        const auto pl = photon_lengths(r, r.kappa / 10.0);
        CHECK(pl.l_ph == Approx(205128.205128205).epsilon(1e-12));
    }
    SECTION("regime guard")
    {
        const auto r = derive_rates(stute_like_config());
        CHECK_THROWS_AS(photon_lengths(r, r.kappa), RegimeError);
        CHECK_THROWS_AS(photon_lengths(r, 1.5 * r.kappa), RegimeError);
        try {
            photon_lengths(r, 1.5 * r.kappa);
        } catch (const RegimeError& e) {
            CHECK(e.ratio == Approx(1.5));
        }
    }
}

TEST_CASE("config validation")
{
    SetupConfig cfg = stute_like_config();
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.warnings().empty());

    SECTION("cavity invariants")
    {
        cfg.cavity.t2 = 0.0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg.cavity.t2 = 0.6;
        cfg.cavity.loss2 = 0.5;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg.cavity = {-0.01, 13e-6, 2e-6};
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SECTION("fiber invariants")
    {
        cfg.fiber.length_L = 0.0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg.fiber = {100.0, -1.0};
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg.fiber = {100.0, 0.2, 2.0 * speed_of_light};
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SECTION("short-fiber warning")
    {
        cfg.fiber.length_L = 1.0; // l/L = 0.02 > 0.01
        CHECK(cfg.warnings().size() == 1);
    }
}
