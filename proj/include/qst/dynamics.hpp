// dynamics.hpp — integration of the full single-excitation equations of
// motion: two driven emitters, two cavities, 2N+1 fiber modes and the loss
// channels, with per-channel loss bookkeeping and fiber-mode convergence.
//
// Equations (amplitudes c_A, c_a, c_{n=-N..N}, c_b, c_B):
//   i c_A' = G_A(t) c_a                      (- i Gamma~_A(t)/2 c_A)
//   i c_a' = -i gamma_cav/2 c_a + G_A c_A + g sum_n c_n
//   i c_n' = (n FSR - i gamma_fib/2) c_n + g c_a + (-1)^n g c_b
//   i c_b' = -i gamma_cav/2 c_b + G_B c_B + g sum_n (-1)^n c_n
//   i c_B' = G_B(t) c_b                      (- i Gamma~_B(t)/2 c_B)
// with F = |c_B|^2 at the settled end of the run.
#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qst/exp_engine.hpp"
#include "qst/ode.hpp"
#include "qst/params.hpp"
#include "qst/schedule.hpp"

namespace qst {

enum class IntegratorMethod {
    Auto,        // exponential collocation for any N
    Exponential, // force the collocation engine
    LabFrameRK,  // Dormand-Prince in the lab frame, dt capped by N*FSR
};

struct SimConfig {
    int n_modes = 4;         // N; fiber modes run -N..N
    double rel_tol = 1e-7;
    double abs_tol = 1e-11;
    double t_margin = 0.0;   // settle window after drive end; 0 = auto
    double settle_eps = 1e-6;
    int n_samples = 0;       // time-series resolution; 0 = no series
    bool track_all_modes = false;
    IntegratorMethod method = IntegratorMethod::Auto;

    void validate() const
    {
        if (n_modes < 1)
            throw ConfigError("sim.n_modes must be >= 1");
        if (!(rel_tol > 0.0 && abs_tol > 0.0))
            throw ConfigError("sim.tolerances must be positive");
        if (!(settle_eps > 0.0))
            throw ConfigError("sim.settle_eps must be positive");
    }
};

struct LossLedger {
    double cavity_a = 0.0;
    double cavity_b = 0.0;
    double fiber = 0.0;
    double atom_a = 0.0;
    double atom_b = 0.0;

    double total() const { return cavity_a + cavity_b + fiber + atom_a + atom_b; }
};

struct AmplitudeState {
    cplx c_A{}, c_a{}, c_b{}, c_B{};
    Eigen::VectorXcd c_fiber; // n = -N..N

    double norm2() const
    {
        return std::norm(c_A) + std::norm(c_a) + std::norm(c_b) + std::norm(c_B) +
               c_fiber.squaredNorm();
    }
};

struct SamplePoint {
    double t;
    cplx c_A, c_a, c_b, c_B;
    std::vector<cplx> modes; // tracked fiber modes (default n = -3..3)
    double norm2;
    LossLedger cum_loss;
};

struct SimResult {
    double fidelity = 0.0;
    std::vector<SamplePoint> series;
    LossLedger loss;
    int n_modes_used = 0;
    bool converged = false; // settle criterion met
    AmplitudeState final_state;
    double final_norm2 = 0.0;
    double t_final = 0.0;
    long n_steps = 0;
};

// ---------------------------------------------------------------------------
// field-sector construction

// Coupling matrix of (c_a, c_{-N..N}, c_b) with losses as anti-Hermitian
// diagonal terms. flip_sign_b replaces the physical (-1)^n coupling of
// cavity B by +1 for every mode (test hook for the dark-state structure).
inline FieldModel make_full_field_model(const DerivedRates& r, int n_modes,
                                        bool flip_sign_b = false)
{
    const int N = n_modes;
    const int F = 2 * N + 3;
    const int ia = 0, ib = F - 1;

    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(F, F);
    for (int n = -N; n <= N; ++n) {
        const int col = 1 + n + N;
        const double sgn = flip_sign_b ? 1.0 : ((n % 2 != 0) ? -1.0 : 1.0);
        H(ia, col) = H(col, ia) = r.g_ab;
        H(ib, col) = H(col, ib) = sgn * r.g_ab;
        H(col, col) = n * r.fsr_fib;
    }

    Eigen::VectorXd loss(F);
    loss.setConstant(0.5 * r.gamma_fib);
    loss[ia] = loss[ib] = 0.5 * r.gamma_cav;

    FieldModel fm;
    if (r.gamma_cav == r.gamma_fib) {
        // uniform damping commutes with everything: real orthogonal basis
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
        if (es.info() != Eigen::Success)
            throw NumericError("field diagonalization failed");
        fm.V = es.eigenvectors().cast<cplx>();
        fm.Vinv = es.eigenvectors().transpose().cast<cplx>();
        fm.orthonormal = true;
        fm.mu = (-cplx(0, 1) * es.eigenvalues().array()).matrix();
        fm.mu.array() -= 0.5 * r.gamma_cav;
    } else {
        Eigen::MatrixXcd M = cplx(0, -1) * H.cast<cplx>();
        M.diagonal() -= loss.cast<cplx>();
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ces(M);
        if (ces.info() != Eigen::Success)
            throw NumericError("field diagonalization failed");
        fm.V = ces.eigenvectors();
        fm.Vinv = fm.V.partialPivLu().inverse();
        fm.orthonormal = false;
        fm.gram = fm.V.adjoint() * fm.V;
        fm.mu = ces.eigenvalues();
    }
    fm.inj_a = fm.Vinv.col(ia);
    fm.inj_b = fm.Vinv.col(ib);
    fm.read_a = fm.V.row(ia).transpose();
    fm.read_b = fm.V.row(ib).transpose();
    return fm;
}

namespace detail {

inline double auto_margin(const DerivedRates& r, const SetupConfig& cfg)
{
    const double tau = cfg.fiber.length_L / cfg.fiber.speed_cf;
    return std::max(6.0 / (2.0 * r.kappa), 2.0 * tau);
}

struct FullRun {
    const SetupConfig* cfg;
    const DriveSchedule* sched;
    const SimConfig* sim;
    DerivedRates rates;
    bool atomic_decay = false;
    bool flip_sign_b = false;
    std::optional<std::pair<cplx, cplx>> initial_atoms; // test hook
};

inline SimResult run_exponential(const FullRun& run, const FieldModel& fm)
{
    const auto& cfg = *run.cfg;
    const auto& sched = *run.sched;
    const auto& sim = *run.sim;
    const int N = sim.n_modes;
    const int F = 2 * N + 3;
    const int ia = 0, ib = F - 1;

    EngineProblem pr;
    pr.field = &fm;
    const AtomSpec atom = cfg.atom;
    pr.coupling_a = [&sched, atom](double t) { return effective_coupling(sched, atom, t, true); };
    pr.coupling_b = [&sched, atom](double t) { return effective_coupling(sched, atom, t, false); };
    if (run.atomic_decay && cfg.atom.gamma_sp > 0.0) {
        const double gsp = cfg.atom.gamma_sp, dat = cfg.atom.delta_at;
        pr.decay_a = [&sched, gsp, dat](double t) {
            const double x = sched.omega_at(t, true) / dat;
            return gsp * x * x;
        };
        pr.decay_b = [&sched, gsp, dat](double t) {
            const double x = sched.omega_at(t, false) / dat;
            return gsp * x * x;
        };
    }
    pr.t0 = sched.t_start;
    const double margin = sim.t_margin > 0.0 ? sim.t_margin : auto_margin(run.rates, cfg);
    pr.t1 = sched.t_end + margin;
    pr.breakpoints = sched.breakpoints;
    pr.breakpoints.push_back(sched.t_end);
    pr.char_time = sched.char_time;
    double peak = 0.0;
    {
        // coarse scan for the coupling peak (schedules are smooth envelopes)
        const int M = 200;
        for (int i = 0; i <= M; ++i) {
            const double t = sched.t_start + (sched.t_end - sched.t_start) * i / M;
            peak = std::max({peak, pr.coupling_a(t), pr.coupling_b(t)});
        }
    }
    pr.coupling_peak = peak;
    if (run.initial_atoms) {
        pr.sA0 = run.initial_atoms->first;
        pr.sB0 = run.initial_atoms->second;
    }

    // sampling grid (must be step landings so ledger snapshots are exact)
    std::vector<double> samples;
    if (sim.n_samples > 0) {
        samples.reserve(sim.n_samples + 1);
        for (int i = 0; i <= sim.n_samples; ++i)
            samples.push_back(pr.t0 + (pr.t1 - pr.t0) * i / sim.n_samples);
        pr.breakpoints.insert(pr.breakpoints.end(), samples.begin(), samples.end());
    }

    EngineOptions opt;
    opt.rel_tol = sim.rel_tol;
    opt.abs_tol = sim.abs_tol;

    LedgerRequest lr;
    lr.rows = {fm.V.row(ia), fm.V.row(ib)};
    lr.want_norm2 = true;

    SimResult out;
    out.n_modes_used = N;

    auto ledger_from = [&](const LedgerIntegrals& li) {
        LossLedger l;
        l.cavity_a = run.rates.gamma_cav * li.rows[0];
        l.cavity_b = run.rates.gamma_cav * li.rows[1];
        l.fiber = run.rates.gamma_fib * (li.norm2 - li.rows[0] - li.rows[1]);
        l.atom_a = li.atom_a;
        l.atom_b = li.atom_b;
        return l;
    };

    LossLedger base; // losses accumulated before the current engine call
    std::function<void(double, cplx, cplx, const Eigen::VectorXcd&,
                       const LedgerIntegrals&)> cb;
    if (sim.n_samples > 0) {
        cb = [&](double t, cplx sA, cplx sB, const Eigen::VectorXcd& h,
                 const LedgerIntegrals& li) {
            SamplePoint p;
            p.t = t;
            p.c_A = sA;
            p.c_B = sB;
            const Eigen::VectorXcd f = fm.V * h;
            p.c_a = f[ia];
            p.c_b = f[ib];
            const int lo = sim.track_all_modes ? -N : std::max(-3, -N);
            const int hi = sim.track_all_modes ? N : std::min(3, N);
            for (int n = lo; n <= hi; ++n)
                p.modes.push_back(f[1 + n + N]);
            p.norm2 = std::norm(sA) + std::norm(sB) + f.squaredNorm();
            LossLedger cum = ledger_from(li);
            cum.cavity_a += base.cavity_a;
            cum.cavity_b += base.cavity_b;
            cum.fiber += base.fiber;
            cum.atom_a += base.atom_a;
            cum.atom_b += base.atom_b;
            p.cum_loss = cum;
            out.series.push_back(std::move(p));
        };
    }

    EngineResult er = engine_run(pr, opt, lr, samples, cb);
    out.n_steps += er.n_steps;
    LossLedger led = ledger_from(er.ledger);

    // settle: extend while the photonic population can still drain
    double pop = fm.norm2(er.h);
    const bool lossless = run.rates.gamma_cav == 0.0 && run.rates.gamma_fib == 0.0;
    double ext = margin;
    for (int k = 0; k < 3 && pop > sim.settle_eps && !lossless; ++k) {
        ext *= 2.0;
        EngineProblem pe = pr;
        pe.t0 = er.t_final;
        pe.t1 = er.t_final + ext;
        pe.breakpoints.clear();
        pe.sA0 = er.sA;
        pe.sB0 = er.sB;
        pe.h0 = er.h;
        base.cavity_a += led.cavity_a;
        base.cavity_b += led.cavity_b;
        base.fiber += led.fiber;
        base.atom_a += led.atom_a;
        base.atom_b += led.atom_b;
        EngineResult e2 = engine_run(pe, opt, lr, {}, nullptr);
        out.n_steps += e2.n_steps;
        LossLedger l2 = ledger_from(e2.ledger);
        led.cavity_a += l2.cavity_a;
        led.cavity_b += l2.cavity_b;
        led.fiber += l2.fiber;
        led.atom_a += l2.atom_a;
        led.atom_b += l2.atom_b;
        er = std::move(e2);
        pop = fm.norm2(er.h);
    }
    led.cavity_a += base.cavity_a;
    led.cavity_b += base.cavity_b;
    led.fiber += base.fiber;
    led.atom_a += base.atom_a;
    led.atom_b += base.atom_b;

    out.fidelity = std::norm(er.sB);
    out.loss = led;
    out.converged = pop <= sim.settle_eps;
    out.t_final = er.t_final;

    const Eigen::VectorXcd f = fm.V * er.h;
    out.final_state.c_A = er.sA;
    out.final_state.c_B = er.sB;
    out.final_state.c_a = f[ia];
    out.final_state.c_b = f[ib];
    out.final_state.c_fiber = f.segment(1, 2 * N + 1);
    out.final_norm2 = out.final_state.norm2();
    return out;
}

// Reference path: Dormand-Prince on the lab-frame amplitudes with the step
// capped below the fastest fiber-mode phase. State layout:
// [c_A, c_a, c_{-N..N}, c_b, c_B, 5 cumulative loss integrals].
inline SimResult run_lab_frame(const FullRun& run)
{
    const auto& cfg = *run.cfg;
    const auto& sched = *run.sched;
    const auto& sim = *run.sim;
    const auto& r = run.rates;
    const int N = sim.n_modes;
    const int F = 2 * N + 3;
    const int iA = 0, ia = 1, ib = F, iB = F + 1;
    const int dim = F + 2;

    const AtomSpec atom = cfg.atom;
    auto GA = [&](double t) { return effective_coupling(sched, atom, t, true); };
    auto GB = [&](double t) { return effective_coupling(sched, atom, t, false); };
    const bool adec = run.atomic_decay && cfg.atom.gamma_sp > 0.0;

    auto rhs = [&](double t, const ComplexVec& y, ComplexVec& dy) {
        const cplx mi(0.0, -1.0);
        const double ga = GA(t), gb = GB(t);
        cplx sum_p = 0, sum_m = 0; // plain and sign-weighted fiber sums
        for (int n = -N; n <= N; ++n) {
            const cplx cn = y[ia + 1 + n + N];
            sum_p += cn;
            sum_m += (run.flip_sign_b || n % 2 == 0) ? cn : -cn;
        }
        double dA = 0.0, dB = 0.0;
        if (adec) {
            const double xA = sched.omega_at(t, true) / atom.delta_at;
            const double xB = sched.omega_at(t, false) / atom.delta_at;
            dA = cfg.atom.gamma_sp * xA * xA;
            dB = cfg.atom.gamma_sp * xB * xB;
        }
        dy[iA] = mi * ga * y[ia] - 0.5 * dA * y[iA];
        dy[ia] = -0.5 * r.gamma_cav * y[ia] + mi * (ga * y[iA] + r.g_ab * sum_p);
        for (int n = -N; n <= N; ++n) {
            const int i = ia + 1 + n + N;
            const double sgn = (run.flip_sign_b || n % 2 == 0) ? 1.0 : -1.0;
            dy[i] = (-0.5 * r.gamma_fib - cplx(0, 1) * (n * r.fsr_fib)) * y[i] +
                    mi * r.g_ab * (y[ia] + sgn * y[ib]);
        }
        dy[ib] = -0.5 * r.gamma_cav * y[ib] + mi * (gb * y[iB] + r.g_ab * sum_m);
        dy[iB] = mi * gb * y[ib] - 0.5 * dB * y[iB];

        // loss quadratures ride along as extra states
        double fib2 = 0.0;
        for (int n = -N; n <= N; ++n)
            fib2 += std::norm(y[ia + 1 + n + N]);
        dy[dim + 0] = r.gamma_cav * std::norm(y[ia]);
        dy[dim + 1] = r.gamma_cav * std::norm(y[ib]);
        dy[dim + 2] = r.gamma_fib * fib2;
        dy[dim + 3] = dA * std::norm(y[iA]);
        dy[dim + 4] = dB * std::norm(y[iB]);
    };

    ComplexVec y = ComplexVec::Zero(dim + 5);
    y[iA] = run.initial_atoms ? run.initial_atoms->first : cplx(1.0, 0.0);
    y[iB] = run.initial_atoms ? run.initial_atoms->second : cplx(0.0, 0.0);

    OdeOptions opt;
    opt.rel_tol = sim.rel_tol;
    opt.abs_tol = sim.abs_tol;
    opt.max_step = 0.45 / (N * r.fsr_fib + 2.0 * r.kappa + 1.0 / sched.char_time);

    const double margin = sim.t_margin > 0.0 ? sim.t_margin : auto_margin(r, cfg);
    double t0 = sched.t_start, t1 = sched.t_end + margin;
    std::vector<double> cuts{sched.t_end};
    for (double b : sched.breakpoints)
        if (b > t0 && b < t1)
            cuts.push_back(b);
    cuts.push_back(t1);
    std::sort(cuts.begin(), cuts.end());

    SimResult out;
    out.n_modes_used = N;
    double t = t0;
    for (double c : cuts) {
        if (c <= t)
            continue;
        auto st = integrate_dp5(rhs, y, t, c, opt);
        out.n_steps += st.n_accepted;
        t = c;
    }

    auto photonic = [&]() {
        double p = std::norm(y[ia]) + std::norm(y[ib]);
        for (int n = -N; n <= N; ++n)
            p += std::norm(y[ia + 1 + n + N]);
        return p;
    };
    const bool lossless = r.gamma_cav == 0.0 && r.gamma_fib == 0.0;
    double ext = margin;
    for (int k = 0; k < 3 && photonic() > sim.settle_eps && !lossless; ++k) {
        ext *= 2.0;
        auto st = integrate_dp5(rhs, y, t, t + ext, opt);
        out.n_steps += st.n_accepted;
        t += ext;
    }

    out.fidelity = std::norm(y[iB]);
    out.loss.cavity_a = y[dim + 0].real();
    out.loss.cavity_b = y[dim + 1].real();
    out.loss.fiber = y[dim + 2].real();
    out.loss.atom_a = y[dim + 3].real();
    out.loss.atom_b = y[dim + 4].real();
    out.converged = photonic() <= sim.settle_eps;
    out.t_final = t;
    out.final_state.c_A = y[iA];
    out.final_state.c_a = y[ia];
    out.final_state.c_b = y[ib];
    out.final_state.c_B = y[iB];
    out.final_state.c_fiber = y.segment(ia + 1, 2 * N + 1);
    out.final_norm2 = out.final_state.norm2();
    return out;
}

inline SimResult run_full(const FullRun& run)
{
    run.cfg->validate();
    run.sim->validate();
    if (run.sim->method == IntegratorMethod::LabFrameRK)
        return run_lab_frame(run);
    const FieldModel fm = make_full_field_model(run.rates, run.sim->n_modes, run.flip_sign_b);
    return run_exponential(run, fm);
}

} // namespace detail

// Transfer with photon losses only (atomic decay off regardless of Gamma).
inline SimResult integrate_full(const SetupConfig& cfg, const DriveSchedule& sched,
                                const SimConfig& sim)
{
    detail::FullRun run{&cfg, &sched, &sim, derive_rates(cfg), false, false, std::nullopt};
    return detail::run_full(run);
}

// Same system plus the drive-induced atomic decay Gamma~(t) = Gamma (Omega/Delta)^2.
// Gamma = 0 reduces bit-identically to integrate_full.
inline SimResult integrate_full_with_atomic_decay(const SetupConfig& cfg,
                                                  const DriveSchedule& sched,
                                                  const SimConfig& sim)
{
    detail::FullRun run{&cfg, &sched, &sim, derive_rates(cfg), true, false, std::nullopt};
    return detail::run_full(run);
}

// Test hook: flipped B-coupling signs and/or a custom initial atom state.
inline SimResult integrate_full_custom(const SetupConfig& cfg, const DriveSchedule& sched,
                                       const SimConfig& sim, bool flip_sign_b,
                                       cplx cA0, cplx cB0, bool atomic_decay = false)
{
    detail::FullRun run{&cfg, &sched, &sim, derive_rates(cfg), atomic_decay, flip_sign_b,
                        std::make_pair(cA0, cB0)};
    return detail::run_full(run);
}

// Double the fiber-mode count until F stabilizes to delta_tol.
inline SimResult converge_modes(const SetupConfig& cfg, const DriveSchedule& sched,
                                const SimConfig& sim, double delta_tol = 1e-4,
                                int n_cap = 4096, bool atomic_decay = false)
{
    if (!(delta_tol > 0.0))
        throw ConfigError("converge_modes: delta_tol must be positive");
    SimConfig s = sim;
    auto eval = [&](int n) {
        s.n_modes = n;
        return atomic_decay ? integrate_full_with_atomic_decay(cfg, sched, s)
                            : integrate_full(cfg, sched, s);
    };
    SimResult prev = eval(s.n_modes);
    for (int n = 2 * sim.n_modes; n <= n_cap; n *= 2) {
        SimResult next = eval(n);
        if (std::abs(next.fidelity - prev.fidelity) < delta_tol) {
            next.n_modes_used = n;
            return next;
        }
        prev = std::move(next);
    }
    throw ConvergenceError("converge_modes: no convergence below N = " + std::to_string(n_cap));
}

} // namespace qst
