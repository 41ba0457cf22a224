// exp_engine.hpp — adaptive exponential-collocation integrator for the
// single-excitation atom/field systems used throughout this library.
//
// Structure exploited: two slow amplitudes s_A, s_B (the driven emitters)
// couple through scalar envelopes G_A(t), G_B(t) into a *constant* linear
// field sector f' = M f. Diagonalizing M once per (config, mode count)
// turns every field mode into h_k' = mu_k h_k + (slow source), which is
// solved by variation of constants: within a step the slow sources are
// represented by quadratic collocation polynomials on the Lobatto nodes
// {0, 1/2, 1} and all oscillatory integrals are evaluated in closed form.
// Step cost is therefore independent of how fast the n*FSR diagonal spins;
// accuracy is controlled by step doubling (4th order in the slow motion,
// exact in the field phases).
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "qst/errors.hpp"

namespace qst {

using cplx = std::complex<double>;

namespace osc {

// Oscillatory step integrals for one z = mu*delta at normalized time theta:
//   E        = e^{z theta}
//   T[j]     = int_0^theta x^j e^{z x} dx
//   Phi[m]   = int_0^theta e^{z(theta-x)} x^m dx
//   Psi[j][m]= int_0^theta x^j Phi_m(z, x) dx
// Small |z theta| goes through series (the recurrences divide by z);
// large |z theta| uses the recurrences, where residual cancellation only
// costs absolute accuracy on integrals that are themselves tiny.
struct Weights {
    cplx E;
    cplx T[3];
    cplx Phi[3];
    cplx Psi[3][3];
};

// theta^{j+1}/(j+1)
inline double th_over(int j, double t1, double t2, double t3)
{
    switch (j) {
    case 0: return t1;
    case 1: return t2 / 2.0;
    default: return t3 / 3.0;
    }
}

// theta^p / p
inline double pow_div(int p, double theta)
{
    double v = 1.0;
    for (int i = 0; i < p; ++i)
        v *= theta;
    return v / double(p);
}

inline void compute_weights(cplx z, double theta, Weights& w)
{
    const double zt = std::abs(z) * theta;
    if (zt < 1.5) {
        // series in z*theta; assemble with explicit theta powers
        double th_pow[12];
        th_pow[0] = 1.0;
        for (int i = 1; i < 12; ++i)
            th_pow[i] = th_pow[i - 1] * theta;

        cplx T[3] = {0, 0, 0}, Phi[3] = {0, 0, 0}, Psi[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
        cplx E = 0.0;
        cplx pw = 1.0; // z^n theta^n / n!
        double B[3] = {1.0, 0.5, 1.0 / 3.0};
        for (int n = 0; n < 24; ++n) {
            E += pw;
            for (int j = 0; j < 3; ++j)
                T[j] += pw / double(j + n + 1) * th_pow[j + 1];
            for (int m = 0; m < 3; ++m) {
                Phi[m] += pw * B[m] * th_pow[m + 1];
                for (int j = 0; j < 3; ++j)
                    Psi[j][m] += pw * B[m] / double(j + m + n + 2) * th_pow[j + m + 2];
            }
            pw *= z * theta / double(n + 1);
            for (int m = 0; m < 3; ++m)
                B[m] *= double(n + 1) / double(m + n + 2);
        }
        w.E = E;
        for (int j = 0; j < 3; ++j)
            w.T[j] = T[j];
        for (int m = 0; m < 3; ++m)
            w.Phi[m] = Phi[m];
        for (int j = 0; j < 3; ++j)
            for (int m = 0; m < 3; ++m)
                w.Psi[j][m] = Psi[j][m];
        return;
    }

    const cplx E = std::exp(z * theta);
    const double t1 = theta, t2 = theta * theta, t3 = t2 * theta;
    w.E = E;
    w.T[0] = (E - 1.0) / z;
    w.T[1] = (t1 * E - w.T[0]) / z;
    w.T[2] = (t2 * E - 2.0 * w.T[1]) / z;
    w.Phi[0] = w.T[0];
    w.Phi[1] = (w.Phi[0] - t1) / z;
    w.Phi[2] = (2.0 * w.Phi[1] - t2) / z;
    for (int j = 0; j < 3; ++j)
        w.Psi[j][0] = (w.T[j] - th_over(j, t1, t2, t3)) / z;
    for (int m = 1; m < 3; ++m)
        for (int j = 0; j < 3; ++j)
            w.Psi[j][m] = (double(m) * w.Psi[j][m - 1] - pow_div(j + m + 1, theta)) / z;
}

} // namespace osc

// Field sector in its eigenbasis plus the coupling pattern of both emitters.
struct FieldModel {
    Eigen::VectorXcd mu;   // eigenvalues of M = -iH - diag(loss/2)
    Eigen::MatrixXcd V;    // f = V h
    Eigen::MatrixXcd Vinv; // h = Vinv f
    bool orthonormal = false; // V unitary => Gram = 1
    Eigen::MatrixXcd gram;    // V^H V when !orthonormal

    Eigen::VectorXcd inj_a, inj_b;   // Vinv * w_X  (source patterns)
    Eigen::VectorXcd read_a, read_b; // V^T w_X     (what the emitter sees)

    int dim() const { return static_cast<int>(mu.size()); }

    double norm2(const Eigen::VectorXcd& h) const
    {
        if (orthonormal)
            return h.squaredNorm();
        return std::real(h.dot(gram * h)); // dot conjugates the left argument
    }
};

struct EngineOptions {
    double rel_tol = 1e-8;
    double abs_tol = 1e-12;
    double max_step = std::numeric_limits<double>::infinity();
    long max_steps = 50'000'000L;
};

struct EngineProblem {
    const FieldModel* field = nullptr;
    std::function<double(double)> coupling_a, coupling_b; // G_X(t), rad/s
    std::function<double(double)> decay_a, decay_b;       // Gamma~_X(t), rad/s (optional)
    double t0 = 0.0, t1 = 0.0;
    std::vector<double> breakpoints; // interior stepper landings
    double char_time = 0.0;          // slowest drive feature, > 0
    double coupling_peak = 0.0;      // max over t of the couplings
    cplx sA0{1.0, 0.0}, sB0{0.0, 0.0};
    Eigen::VectorXcd h0; // eigenbasis; empty = vacuum field
};

// Ledger: time integrals of |row . h|^2 per requested readout row,
// of sum_i wt_i |h_i|^2 per weight vector (sensible when V is trivial),
// of the field norm, and of Gamma~_X(t) |s_X|^2 for both emitters.
struct LedgerRequest {
    std::vector<Eigen::RowVectorXcd> rows;
    std::vector<Eigen::VectorXd> weights;
    bool want_norm2 = false;
};

struct LedgerIntegrals {
    std::vector<double> rows;
    std::vector<double> weights;
    double norm2 = 0.0;
    double atom_a = 0.0, atom_b = 0.0;
};

struct EngineResult {
    cplx sA{}, sB{};
    Eigen::VectorXcd h;
    LedgerIntegrals ledger;
    long n_steps = 0, n_rejected = 0;
    double t_final = 0.0;
};

namespace detail {

// One collocation substep of size d. Returns false if the fixed-point
// iteration refused to converge (caller halves the step).
struct SubstepRecord {
    double t0 = 0.0, d = 0.0;
    cplx sA[3], sB[3]; // values at nodes 0, 1/2, 1
    cplx alphaA[3], alphaB[3]; // monomial coeffs of u_X(x) = -i G_X s_X
    double gA[3], gB[3];       // monomial coeffs of G_X(x)
    double dA[3], dB[3];       // node values of Gamma~_X(t)/2
    Eigen::VectorXcd h0, h_half, h_full;
};

struct WeightPack {
    // per field mode: weights at theta = 1/2 and theta = 1
    std::vector<osc::Weights> w_half, w_full;
};

inline void monomial_from_nodes(const cplx q0, const cplx qh, const cplx q1, cplx out[3])
{
    out[0] = q0;
    out[1] = -3.0 * q0 + 4.0 * qh - q1;
    out[2] = 2.0 * q0 - 4.0 * qh + 2.0 * q1;
}

inline void monomial_from_nodes(const double q0, const double qh, const double q1, double out[3])
{
    out[0] = q0;
    out[1] = -3.0 * q0 + 4.0 * qh - q1;
    out[2] = 2.0 * q0 - 4.0 * qh + 2.0 * q1;
}

class Stepper {
public:
    Stepper(const EngineProblem& pr, const EngineOptions& opt)
        : pr_(pr), F_(pr.field->dim())
    {
        iter_tol_ = 0.02 * (opt.abs_tol + opt.rel_tol * 0.1);
        if (iter_tol_ < 1e-16)
            iter_tol_ = 1e-16;
    }

    // Advance (sA, sB, h) across [t, t+d]; fills rec and the per-mode packs.
    bool substep(double t, double d, cplx sA_in, cplx sB_in, const Eigen::VectorXcd& h_in,
                 SubstepRecord& rec, WeightPack& wp) const
    {
        const auto& fm = *pr_.field;
        rec.t0 = t;
        rec.d = d;
        rec.h0 = h_in;

        const double tn[3] = {t, t + 0.5 * d, t + d};
        double GA[3], GB[3];
        for (int j = 0; j < 3; ++j) {
            GA[j] = pr_.coupling_a ? pr_.coupling_a(tn[j]) : 0.0;
            GB[j] = pr_.coupling_b ? pr_.coupling_b(tn[j]) : 0.0;
            rec.dA[j] = pr_.decay_a ? 0.5 * pr_.decay_a(tn[j]) : 0.0;
            rec.dB[j] = pr_.decay_b ? 0.5 * pr_.decay_b(tn[j]) : 0.0;
        }
        monomial_from_nodes(GA[0], GA[1], GA[2], rec.gA);
        monomial_from_nodes(GB[0], GB[1], GB[2], rec.gB);

        wp.w_half.resize(F_);
        wp.w_full.resize(F_);
        for (int k = 0; k < F_; ++k) {
            const cplx z = fm.mu[k] * d;
            osc::compute_weights(z, 0.5, wp.w_half[k]);
            osc::compute_weights(z, 1.0, wp.w_full[k]);
        }

        // iteration-independent pieces of the emitter integrals:
        //   I_X(theta) = sum_k read_X[k] ( h0_k TT_X[k] + d sum_m P_m[k] U_X[m][k] )
        fixed_.resize(F_);
        for (int k = 0; k < F_; ++k) {
            auto& fx = fixed_[k];
            const auto& wh = wp.w_half[k];
            const auto& wf = wp.w_full[k];
            fx.TT_A_h = rec.gA[0] * wh.T[0] + rec.gA[1] * wh.T[1] + rec.gA[2] * wh.T[2];
            fx.TT_A_f = rec.gA[0] * wf.T[0] + rec.gA[1] * wf.T[1] + rec.gA[2] * wf.T[2];
            fx.TT_B_h = rec.gB[0] * wh.T[0] + rec.gB[1] * wh.T[1] + rec.gB[2] * wh.T[2];
            fx.TT_B_f = rec.gB[0] * wf.T[0] + rec.gB[1] * wf.T[1] + rec.gB[2] * wf.T[2];
            for (int m = 0; m < 3; ++m) {
                fx.UA_h[m] = rec.gA[0] * wh.Psi[0][m] + rec.gA[1] * wh.Psi[1][m] +
                             rec.gA[2] * wh.Psi[2][m];
                fx.UA_f[m] = rec.gA[0] * wf.Psi[0][m] + rec.gA[1] * wf.Psi[1][m] +
                             rec.gA[2] * wf.Psi[2][m];
                fx.UB_h[m] = rec.gB[0] * wh.Psi[0][m] + rec.gB[1] * wh.Psi[1][m] +
                             rec.gB[2] * wh.Psi[2][m];
                fx.UB_f[m] = rec.gB[0] * wf.Psi[0][m] + rec.gB[1] * wf.Psi[1][m] +
                             rec.gB[2] * wf.Psi[2][m];
            }
        }

        rec.sA[0] = sA_in;
        rec.sB[0] = sB_in;
        rec.sA[1] = rec.sA[2] = sA_in;
        rec.sB[1] = rec.sB[2] = sB_in;

        const cplx mi(0.0, -1.0);
        bool converged = false;
        for (int it = 0; it < 25; ++it) {
            // slow source polynomials
            cplx uA[3], uB[3];
            for (int j = 0; j < 3; ++j) {
                uA[j] = mi * GA[j] * rec.sA[j];
                uB[j] = mi * GB[j] * rec.sB[j];
            }
            monomial_from_nodes(uA[0], uA[1], uA[2], rec.alphaA);
            monomial_from_nodes(uB[0], uB[1], uB[2], rec.alphaB);

            // emitter field integrals at both nodes
            cplx IA_h = 0, IA_f = 0, IB_h = 0, IB_f = 0;
            for (int k = 0; k < F_; ++k) {
                const auto& fx = fixed_[k];
                cplx P[3];
                for (int m = 0; m < 3; ++m)
                    P[m] = fm.inj_a[k] * rec.alphaA[m] + fm.inj_b[k] * rec.alphaB[m];
                const cplx h0k = rec.h0[k];
                IA_h += fm.read_a[k] * (h0k * fx.TT_A_h +
                                        d * (P[0] * fx.UA_h[0] + P[1] * fx.UA_h[1] + P[2] * fx.UA_h[2]));
                IA_f += fm.read_a[k] * (h0k * fx.TT_A_f +
                                        d * (P[0] * fx.UA_f[0] + P[1] * fx.UA_f[1] + P[2] * fx.UA_f[2]));
                IB_h += fm.read_b[k] * (h0k * fx.TT_B_h +
                                        d * (P[0] * fx.UB_h[0] + P[1] * fx.UB_h[1] + P[2] * fx.UB_h[2]));
                IB_f += fm.read_b[k] * (h0k * fx.TT_B_f +
                                        d * (P[0] * fx.UB_f[0] + P[1] * fx.UB_f[1] + P[2] * fx.UB_f[2]));
            }

            // slow decay terms, integrated as quadratics
            cplx qA[3], qB[3], bA[3], bB[3];
            for (int j = 0; j < 3; ++j) {
                qA[j] = rec.dA[j] * rec.sA[j];
                qB[j] = rec.dB[j] * rec.sB[j];
            }
            monomial_from_nodes(qA[0], qA[1], qA[2], bA);
            monomial_from_nodes(qB[0], qB[1], qB[2], bB);
            auto poly_int = [](const cplx b[3], double th) {
                return b[0] * th + 0.5 * b[1] * th * th + b[2] * th * th * th / 3.0;
            };

            const cplx nA_h = sA_in + mi * d * IA_h - d * poly_int(bA, 0.5);
            const cplx nA_f = sA_in + mi * d * IA_f - d * poly_int(bA, 1.0);
            const cplx nB_h = sB_in + mi * d * IB_h - d * poly_int(bB, 0.5);
            const cplx nB_f = sB_in + mi * d * IB_f - d * poly_int(bB, 1.0);

            const double delta = std::max(
                std::max(std::abs(nA_h - rec.sA[1]), std::abs(nA_f - rec.sA[2])),
                std::max(std::abs(nB_h - rec.sB[1]), std::abs(nB_f - rec.sB[2])));
            rec.sA[1] = nA_h;
            rec.sA[2] = nA_f;
            rec.sB[1] = nB_h;
            rec.sB[2] = nB_f;
            if (delta < iter_tol_) {
                converged = true;
                break;
            }
        }
        if (!converged)
            return false;

        // materialize the field at both nodes
        rec.h_half.resize(F_);
        rec.h_full.resize(F_);
        for (int k = 0; k < F_; ++k) {
            cplx P[3];
            for (int m = 0; m < 3; ++m)
                P[m] = fm.inj_a[k] * rec.alphaA[m] + fm.inj_b[k] * rec.alphaB[m];
            const auto& wh = wp.w_half[k];
            const auto& wf = wp.w_full[k];
            rec.h_half[k] = wh.E * rec.h0[k] +
                            d * (P[0] * wh.Phi[0] + P[1] * wh.Phi[1] + P[2] * wh.Phi[2]);
            rec.h_full[k] = wf.E * rec.h0[k] +
                            d * (P[0] * wf.Phi[0] + P[1] * wf.Phi[1] + P[2] * wf.Phi[2]);
        }
        return true;
    }

    // Dense evaluation inside a converged substep at normalized time theta.
    void dense_eval(const SubstepRecord& rec, double theta, cplx& sA, cplx& sB,
                    Eigen::VectorXcd& h) const
    {
        const auto& fm = *pr_.field;
        const double d = rec.d;
        h.resize(F_);
        cplx IA = 0, IB = 0;
        osc::Weights w;
        for (int k = 0; k < F_; ++k) {
            osc::compute_weights(fm.mu[k] * d, theta, w);
            cplx P[3];
            for (int m = 0; m < 3; ++m)
                P[m] = fm.inj_a[k] * rec.alphaA[m] + fm.inj_b[k] * rec.alphaB[m];
            h[k] = w.E * rec.h0[k] + d * (P[0] * w.Phi[0] + P[1] * w.Phi[1] + P[2] * w.Phi[2]);
            cplx TT_A = 0, TT_B = 0, SA = 0, SB = 0;
            for (int j = 0; j < 3; ++j) {
                TT_A += rec.gA[j] * w.T[j];
                TT_B += rec.gB[j] * w.T[j];
            }
            for (int m = 0; m < 3; ++m) {
                cplx psA = 0, psB = 0;
                for (int j = 0; j < 3; ++j) {
                    psA += rec.gA[j] * w.Psi[j][m];
                    psB += rec.gB[j] * w.Psi[j][m];
                }
                SA += P[m] * psA;
                SB += P[m] * psB;
            }
            IA += fm.read_a[k] * (rec.h0[k] * TT_A + d * SA);
            IB += fm.read_b[k] * (rec.h0[k] * TT_B + d * SB);
        }
        cplx bA[3], bB[3];
        cplx qA[3], qB[3];
        for (int j = 0; j < 3; ++j) {
            qA[j] = rec.dA[j] * rec.sA[j];
            qB[j] = rec.dB[j] * rec.sB[j];
        }
        monomial_from_nodes(qA[0], qA[1], qA[2], bA);
        monomial_from_nodes(qB[0], qB[1], qB[2], bB);
        auto poly_int = [](const cplx b[3], double th) {
            return b[0] * th + 0.5 * b[1] * th * th + b[2] * th * th * th / 3.0;
        };
        const cplx mi(0.0, -1.0);
        sA = rec.sA[0] + mi * d * IA - d * poly_int(bA, theta);
        sB = rec.sB[0] + mi * d * IB - d * poly_int(bB, theta);
    }

private:
    const EngineProblem& pr_;
    int F_;
    double iter_tol_;

    struct FixedEntry {
        cplx TT_A_h, TT_A_f, TT_B_h, TT_B_f;
        cplx UA_h[3], UA_f[3], UB_h[3], UB_f[3];
    };
    mutable std::vector<FixedEntry> fixed_;
};

} // namespace detail

// Full engine run with step doubling, ledger accumulation (Simpson on the
// substep nodes plus Richardson across the doubling pair) and optional
// dense sampling. The callback receives the loss integrals accumulated up
// to the enclosing accepted step; samples that sit on step boundaries (the
// usual case, since callers list them as breakpoints) see exact totals.
using SampleCallback =
    std::function<void(double, cplx, cplx, const Eigen::VectorXcd&, const LedgerIntegrals&)>;

inline EngineResult engine_run(const EngineProblem& pr, const EngineOptions& opt,
                               const LedgerRequest& ledger_req = {},
                               const std::vector<double>& sample_times = {},
                               const SampleCallback& sample_cb = nullptr)
{
    const auto& fm = *pr.field;
    const int F = fm.dim();
    if (!(pr.char_time > 0.0))
        throw NumericError("engine_run: char_time must be positive");

    EngineResult res;
    res.sA = pr.sA0;
    res.sB = pr.sB0;
    res.h = pr.h0.size() ? pr.h0 : Eigen::VectorXcd::Zero(F).eval();
    res.ledger.rows.assign(ledger_req.rows.size(), 0.0);
    res.ledger.weights.assign(ledger_req.weights.size(), 0.0);

    if (pr.t1 <= pr.t0) {
        res.t_final = pr.t0;
        return res;
    }

    // segment boundaries: t0, t1 and interior breakpoints
    std::vector<double> seg{pr.t0, pr.t1};
    for (double b : pr.breakpoints)
        if (b > pr.t0 && b < pr.t1)
            seg.push_back(b);
    std::sort(seg.begin(), seg.end());
    seg.erase(std::unique(seg.begin(), seg.end()), seg.end());

    detail::Stepper stepper(pr, opt);
    detail::SubstepRecord big, half1, half2;
    detail::WeightPack wp_big, wp_half;

    // per-node ledger integrand
    auto channel_rates = [&](double t, const cplx& sA, const cplx& sB, const Eigen::VectorXcd& h,
                             std::vector<double>& out) {
        size_t idx = 0;
        for (const auto& row : ledger_req.rows)
            out[idx++] = std::norm((row * h)(0, 0));
        for (const auto& wt : ledger_req.weights) {
            double s = 0.0;
            for (int i = 0; i < F; ++i)
                s += wt[i] * std::norm(h[i]);
            out[idx++] = s;
        }
        if (ledger_req.want_norm2)
            out[idx++] = fm.norm2(h);
        out[idx++] = (pr.decay_a ? pr.decay_a(t) : 0.0) * std::norm(sA);
        out[idx++] = (pr.decay_b ? pr.decay_b(t) : 0.0) * std::norm(sB);
    };
    const size_t n_ch = ledger_req.rows.size() + ledger_req.weights.size() +
                        (ledger_req.want_norm2 ? 1 : 0) + 2;
    std::vector<double> q0(n_ch), qh(n_ch), q1(n_ch), acc_big(n_ch), acc_half(n_ch),
        led(n_ch, 0.0);

    auto snapshot_ledger = [&]() {
        LedgerIntegrals li;
        size_t idx = 0;
        li.rows.resize(ledger_req.rows.size());
        li.weights.resize(ledger_req.weights.size());
        for (auto& v : li.rows)
            v = led[idx++];
        for (auto& v : li.weights)
            v = led[idx++];
        if (ledger_req.want_norm2)
            li.norm2 = led[idx++];
        li.atom_a = led[idx++];
        li.atom_b = led[idx++];
        return li;
    };

    auto simpson = [&](const detail::SubstepRecord& rec, std::vector<double>& acc, bool reset) {
        channel_rates(rec.t0, rec.sA[0], rec.sB[0], rec.h0, q0);
        channel_rates(rec.t0 + 0.5 * rec.d, rec.sA[1], rec.sB[1], rec.h_half, qh);
        channel_rates(rec.t0 + rec.d, rec.sA[2], rec.sB[2], rec.h_full, q1);
        for (size_t i = 0; i < n_ch; ++i) {
            const double v = rec.d / 6.0 * (q0[i] + 4.0 * qh[i] + q1[i]);
            acc[i] = reset ? v : acc[i] + v;
        }
    };

    size_t next_sample = 0;
    while (next_sample < sample_times.size() && sample_times[next_sample] < pr.t0)
        ++next_sample;
    if (sample_cb && next_sample < sample_times.size() &&
        sample_times[next_sample] == pr.t0) {
        sample_cb(pr.t0, res.sA, res.sB, res.h, snapshot_ledger());
        ++next_sample;
    }

    const double gpk = std::max(pr.coupling_peak, 0.0);
    const double cap = std::min(0.2 * pr.char_time, gpk > 0.0 ? 0.35 / gpk
                                                              : std::numeric_limits<double>::infinity());

    for (size_t is = 0; is + 1 < seg.size(); ++is) {
        double t = seg[is];
        const double t_stop = seg[is + 1];
        double d = std::min({cap, opt.max_step, t_stop - t});

        while (t < t_stop) {
            if (res.n_steps + res.n_rejected > opt.max_steps)
                throw NumericError("engine_run: step budget exhausted");
            d = std::min({d, opt.max_step, cap, t_stop - t});
            if (d < 1e-13 * pr.char_time)
                throw NumericError("engine_run: step underflow at t = " + std::to_string(t));

            const bool ok_big = stepper.substep(t, d, res.sA, res.sB, res.h, big, wp_big);
            bool ok = ok_big &&
                      stepper.substep(t, 0.5 * d, res.sA, res.sB, res.h, half1, wp_half) &&
                      stepper.substep(t + 0.5 * d, 0.5 * d, half1.sA[2], half1.sB[2],
                                      half1.h_full, half2, wp_half);
            double err = 0.0;
            if (ok) {
                auto comp_err = [&](const cplx& a, const cplx& b) {
                    const double sc = opt.abs_tol +
                                      opt.rel_tol * std::max(std::abs(a), std::abs(b));
                    return std::abs(a - b) / sc;
                };
                err = std::max(comp_err(big.sA[2], half2.sA[2]),
                               comp_err(big.sB[2], half2.sB[2]));
                for (int k = 0; k < F; ++k)
                    err = std::max(err, comp_err(big.h_full[k], half2.h_full[k]));
            }

            if (ok && err <= 1.0) {
                // local extrapolation (the pair is 4th order in the slow motion)
                res.sA = half2.sA[2] + (half2.sA[2] - big.sA[2]) / 15.0;
                res.sB = half2.sB[2] + (half2.sB[2] - big.sB[2]) / 15.0;
                res.h = half2.h_full + (half2.h_full - big.h_full) / 15.0;

                if (n_ch > 0) {
                    simpson(big, acc_big, true);
                    simpson(half1, acc_half, true);
                    simpson(half2, acc_half, false);
                    for (size_t i = 0; i < n_ch; ++i)
                        led[i] += acc_half[i] + (acc_half[i] - acc_big[i]) / 15.0;
                }

                if (sample_cb) {
                    const double slack = 1e-9 * d;
                    while (next_sample < sample_times.size() &&
                           sample_times[next_sample] <= t + d + slack) {
                        const double ts = sample_times[next_sample];
                        cplx a, b;
                        Eigen::VectorXcd hs;
                        if (ts <= t + 0.5 * d)
                            stepper.dense_eval(half1, std::clamp((ts - t) / (0.5 * d), 0.0, 1.0),
                                               a, b, hs);
                        else
                            stepper.dense_eval(half2,
                                               std::clamp((ts - t - 0.5 * d) / (0.5 * d), 0.0, 1.0),
                                               a, b, hs);
                        sample_cb(ts, a, b, hs, snapshot_ledger());
                        ++next_sample;
                    }
                }

                t += d;
                ++res.n_steps;
                const double fac = err > 1e-10 ? 0.9 * std::pow(err, -0.2) : 2.5;
                d *= std::clamp(fac, 0.3, 2.5);
            } else {
                ++res.n_rejected;
                d *= ok ? std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.7) : 0.5;
            }
        }
    }

    // flush samples that round onto the final time
    if (sample_cb) {
        const double slack = 1e-9 * pr.char_time;
        while (next_sample < sample_times.size() &&
               sample_times[next_sample] <= pr.t1 + slack) {
            sample_cb(sample_times[next_sample], res.sA, res.sB, res.h, snapshot_ledger());
            ++next_sample;
        }
    }

    res.ledger = snapshot_ledger();
    res.t_final = pr.t1;
    return res;
}

} // namespace qst
