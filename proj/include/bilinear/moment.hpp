#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "bilinear/dynamics.hpp"
#include "bilinear/error.hpp"
#include "bilinear/multiprecision.hpp"
#include "bilinear/profiles.hpp"
#include "bilinear/quadrature.hpp"
#include "bilinear/schedule.hpp"
#include "bilinear/trig_field.hpp"

namespace bilinear {

// sigma(m) = m/2 for even m, (1 - m)/2 for odd m: 1, 2, 3, 4, 5 -> 0, 1, -1, 2, -2.
inline int sigma(int m) { return m % 2 == 0 ? m / 2 : (1 - m) / 2; }

// Shifted exponent family Lambda_1..Lambda_n (stored at 0..n-1) with the
// Fourier mode each one belongs to, plus the sector / counting / gap data.
struct ExpSpectrum {
    LinearKind model = LinearKind::CH_lin;
    double Phi = 1.0;
    std::vector<cplx> Lambda;
    std::vector<int> mode;
    double theta = 0.0;    // |Im L| < sinh(theta) Re L
    double kappa = 0.0;    // #{|L| <= r} <= kappa r^{1/4}
    double rho = 0.0;      // required gap
    double min_gap = 0.0;  // observed gap

    int count() const { return static_cast<int>(Lambda.size()); }
    int position_of_mode(int k) const {
        for (int i = 0; i < count(); ++i)
            if (mode[i] == k) return i;
        return -1;
    }
};

inline void certify(ExpSpectrum& s) {
    const int n = s.count();
    double ratio = 0.0;
    for (const auto& L : s.Lambda) {
        if (!(L.real() > 0.0)) throw CertificateFailed("spectrum: Re Lambda must be positive");
        ratio = std::max(ratio, std::abs(L.imag()) / L.real());
    }
    s.theta = std::asinh(ratio) + 1e-12;
    std::vector<double> mods;
    for (const auto& L : s.Lambda) mods.push_back(std::abs(L));
    std::sort(mods.begin(), mods.end());
    s.kappa = 0.0;
    for (int i = 0; i < n; ++i) {
        int cnt = i + 1;
        while (cnt < n && mods[cnt] == mods[i]) ++cnt;
        s.kappa = std::max(s.kappa, cnt / std::pow(mods[i], 0.25));
    }
    s.min_gap = INFINITY;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) s.min_gap = std::min(s.min_gap, std::abs(s.Lambda[i] - s.Lambda[j]));
    if (n > 1 && s.rho > 0.0 && s.min_gap < s.rho * (1.0 - 1e-12))
        throw CertificateFailed("spectrum: gap " + std::to_string(s.min_gap) + " below rho = " + std::to_string(s.rho));
}

// CH: Lambda_k = -lambda_{k-1} + 1 over modes 0..n-1.
// KS: Lambda_k = -lambda_{sigma(k)} + 1 over modes sigma(1..n); n must be
// odd so that the family is closed under conjugation.
inline ExpSpectrum build_spectrum(LinearKind model, double Phi, int count) {
    if (Phi == 0.0) throw ConfigError("build_spectrum: Phi must be nonzero");
    if (count < 2) throw ConfigError("build_spectrum: count must be at least 2");
    if (model == LinearKind::KS_lin && count % 2 == 0)
        throw ConfigError("build_spectrum: KS family needs an odd count (conjugate pairs plus mode 0)");
    ExpSpectrum s;
    s.model = model;
    s.Phi = Phi;
    const LinearModel lm{model, Phi, {}};
    for (int k = 1; k <= count; ++k) {
        const int m = model == LinearKind::CH_lin ? k - 1 : sigma(k);
        s.mode.push_back(m);
        s.Lambda.push_back(-lm.lambda(m) + 1.0);
    }
    s.rho = model == LinearKind::CH_lin ? 3.0 * Phi * Phi : std::abs(Phi);
    certify(s);
    return s;
}

inline ExpSpectrum custom_spectrum(const std::vector<cplx>& Lambda) {
    ExpSpectrum s;
    s.Lambda = Lambda;
    for (std::size_t i = 0; i < Lambda.size(); ++i) s.mode.push_back(static_cast<int>(i));
    certify(s);
    return s;
}

struct PrecisionPolicy {
    unsigned bits = 256;
    unsigned max_bits = 1024;
    double tolerance = 1e-8;
};

// e_k(t) = sum_j C[k][j] e^{-Lambda_j t} on [0, T] with
// int_0^T e_k(t) e^{-Lambda_j t} dt = delta_kj.
struct BiorthFamily {
    std::vector<cplx> Lambda;
    double T = 0.0;
    unsigned bits = 0;
    mp::Matrix C;
    double defect = 0.0;
    std::vector<double> norms;  // L2(0, T) norms of e_k

    int count() const { return static_cast<int>(Lambda.size()); }

    mp::ExpSum function(int k) const {
        mp::ExpSum f;
        f.bits = bits;
        f.coef = C[k];
        mp::PrecisionScope ps(bits);
        for (const auto& L : Lambda) f.rate.push_back(mp::Complex(L));
        return f;
    }
};

namespace detail {

// G_ij = int_0^T e^{-(Lambda_i + conj Lambda_j) t} dt.
inline mp::Matrix gram(const std::vector<cplx>& Lambda, double T) {
    const std::size_t n = Lambda.size();
    mp::Matrix G(n, std::vector<mp::Complex>(n));
    const mp::Real TT(T);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            G[i][j] = mp::one_minus_exp_over(mp::Complex(Lambda[i]) + mp::conj(mp::Complex(Lambda[j])), TT);
    return G;
}

}  // namespace detail

// Minimum-norm biorthogonal family by an extended-precision Gram solve. The
// minimizer lies in span{e^{-conj(Lambda_l) t}}; since the family is closed
// under conjugation this is span{e^{-Lambda_j t}} and the coefficients are
// re-indexed accordingly.
inline BiorthFamily biorthogonal_family(const std::vector<cplx>& Lambda, double T, PrecisionPolicy policy = {}) {
    if (!(T > 0.0)) throw ConfigError("biorthogonal_family: T must be positive");
    const std::size_t n = Lambda.size();
    if (n == 0) throw ConfigError("biorthogonal_family: empty family");
    std::vector<std::size_t> partner(n);
    for (std::size_t l = 0; l < n; ++l) {
        std::size_t j = 0;
        while (j < n && Lambda[j] != std::conj(Lambda[l])) ++j;
        if (j == n) throw ConfigError("biorthogonal_family: family is not closed under conjugation");
        partner[l] = j;
    }
    double last_defect = INFINITY;
    for (unsigned bits = policy.bits; bits <= policy.max_bits; bits *= 2) {
        BiorthFamily fam;
        fam.Lambda = Lambda;
        fam.T = T;
        fam.bits = bits;
        mp::Matrix X;
        {
            mp::PrecisionScope ps(bits);
            const auto G = detail::gram(Lambda, T);
            mp::Matrix I(n, std::vector<mp::Complex>(n));
            for (std::size_t i = 0; i < n; ++i) I[i][i] = mp::Complex(mp::Real(1));
            X = mp::solve(G, I);  // column k: coefficients of e_k over e^{-conj(Lambda_l) t}
            fam.C.assign(n, std::vector<mp::Complex>(n));
            for (std::size_t k = 0; k < n; ++k)
                for (std::size_t l = 0; l < n; ++l) fam.C[k][partner[l]] = X[l][k];
        }
        // int e_k e^{-Lambda_j t} = sum_l C_kl G[l][partner j], replayed with
        // a Gram matrix built at higher precision.
        {
            mp::PrecisionScope ps(bits + 64);
            const auto Gh = detail::gram(Lambda, T);
            double worst = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                for (std::size_t j = 0; j < n; ++j) {
                    mp::Complex acc;
                    for (std::size_t l = 0; l < n; ++l) acc += Gh[l][partner[j]] * fam.C[k][l];
                    if (j == k) acc -= mp::Complex(mp::Real(1));
                    worst = std::max(worst, mp::abs(acc).convert_to<double>());
                }
                mp::Complex nn;  // ||e_k||^2 = sum_{j,l} C_kj conj(C_kl) G_jl
                for (std::size_t j = 0; j < n; ++j)
                    for (std::size_t l = 0; l < n; ++l)
                        nn += fam.C[k][j] * mp::conj(fam.C[k][l]) * Gh[j][l];
                fam.norms.push_back(std::sqrt(std::max(0.0, nn.re.convert_to<double>())));
            }
            fam.defect = worst;
        }
        last_defect = fam.defect;
        if (fam.defect <= policy.tolerance) return fam;
    }
    throw IllConditioned("biorthogonal_family: defect " + std::to_string(last_defect) +
                             " above tolerance at maximum precision",
                         last_defect);
}

// ---- controls --------------------------------------------------------------

struct MomentOptions {
    PrecisionPolicy precision;
    int degree = 7;            // polynomial degree of the sampled control
    double layer_factor = 0.1;  // first panel = layer_factor / max |rate|
    double ratio = 1.2;
    int panels_min = 16;
    int quad_points = 10;
};

// Control signals for the linearized problem together with diagnostics.
struct LinearControl {
    LinearKind model = LinearKind::CH_lin;
    double Phi = 1.0, T = 0.0;
    int count = 0;
    std::vector<mp::ExpSum> h;   // h_i(t); the applied control is p_i(s) = h_i(T - s)
    ControlSchedule schedule;     // p sampled as piecewise polynomials
    std::vector<double> mesh;
    std::vector<double> channel_norms;
    double l2_norm = 0.0;
    double max_imag = 0.0;        // largest |Im h| seen on the sample nodes
    double replay_error = 0.0;    // moment identities replayed by quadrature
    double defect = 0.0;
    unsigned bits = 0;
    ExpSpectrum spectrum;
};

namespace detail {

inline std::vector<double> control_mesh(double T, double fastest, const MomentOptions& o) {
    const double h0 = o.layer_factor / std::max(fastest, 1.0);
    return graded_mesh(T, h0, h0, T / o.panels_min, o.ratio);
}

// Samples the channels (real parts) and measures norms and imaginary parts.
inline void finish_control(LinearControl& c, double fastest, const MomentOptions& o) {
    c.mesh = control_mesh(c.T, fastest, o);
    const int m = static_cast<int>(c.h.size());
    double max_imag = 0.0;
    c.schedule = ControlSchedule::sampled(
        m, c.mesh,
        [&](double s) {
            Vec v(m, 0.0);
            for (int i = 0; i < m; ++i) {
                if (c.h[i].empty()) continue;
                const auto z = c.h[i](c.T - s);
                v[i] = z.real();
                max_imag = std::max(max_imag, std::abs(z.imag()));
            }
            return v;
        },
        o.degree);
    c.max_imag = max_imag;
    const auto rule = composite_rule(c.mesh, o.quad_points);
    c.channel_norms.assign(m, 0.0);
    for (std::size_t q = 0; q < rule.t.size(); ++q)
        for (int i = 0; i < m; ++i) {
            if (c.h[i].empty()) continue;
            const double x = c.h[i](rule.t[q]).real();
            c.channel_norms[i] += rule.w[q] * x * x;
        }
    double tot = 0.0;
    for (double& x : c.channel_norms) {
        tot += x;
        x = std::sqrt(x);
    }
    c.l2_norm = std::sqrt(tot);
}

inline double replay(const mp::ExpSum& h, const CompositeRule& rule, cplx rate, cplx target, double T) {
    cplx acc = 0.0;
    double hn = 0.0;
    for (std::size_t q = 0; q < rule.t.size(); ++q) {
        const double x = h(rule.t[q]).real();
        acc += rule.w[q] * x * std::exp(rate * rule.t[q]);
        hn += rule.w[q] * x * x;
    }
    // ||e^{rate t}||_{L2(0,T)}
    const double a = 2.0 * rate.real();
    const double en = std::sqrt(std::abs(a) < 1e-14 ? T : std::expm1(a * T) / a);
    const double scale = std::max(std::abs(target), std::sqrt(hn) * en);
    return scale > 0.0 ? std::abs(acc - target) / scale : 0.0;
}

}  // namespace detail

// Moment-method control that cancels the terminal free state d, i.e. the
// solution of v_t = A v + Phi sum_i p_i mu_i with v_free(T) = d reaches 0 in
// the controlled modes. For CH the cosine channel (mu_4, real pairings)
// takes Re d_k and the sine channel (mu_5, imaginary pairings) takes Im d_k:
//   int_0^T h(t) e^{lambda_k t} dt = -d_k / (Phi <mu, e_k>),
//   h = sum_k m_k e^{-t} e_{k+1}(t).
// For KS the rates are conj(lambda_k) = lambda_{-k}, so mode k is paired
// with the biorthogonal function of index sigma^{-1}(-k).
inline LinearControl moment_solve(const LinearModel& lm, double T, int count, const FourierField& d,
                                  const MomentOptions& o = {}) {
    const bool ch = lm.kind == LinearKind::CH_lin;
    if (static_cast<int>(lm.inputs.size()) != (ch ? 2 : 1))
        throw ConfigError("moment_solve: CH needs two input profiles, KS one");
    LinearControl c;
    c.model = lm.kind;
    c.Phi = lm.Phi;
    c.T = T;
    c.count = count;
    c.spectrum = build_spectrum(lm.kind, lm.Phi, count);
    const auto fam = biorthogonal_family(c.spectrum.Lambda, T, o.precision);
    c.defect = fam.defect;
    c.bits = fam.bits;
    const int n = count;
    double fastest = 0.0;
    for (const auto& L : c.spectrum.Lambda) fastest = std::max(fastest, std::abs(L + 1.0));

    // channel coefficients m_k attached to biorthogonal index b(k)
    auto assemble = [&](const std::vector<std::pair<int, cplx>>& weights) {
        mp::ExpSum h;
        h.bits = fam.bits;
        mp::PrecisionScope ps(fam.bits);
        h.coef.assign(n, mp::Complex());
        for (int j = 0; j < n; ++j) h.rate.push_back(mp::Complex(c.spectrum.Lambda[j] + 1.0));
        bool any = false;
        for (const auto& [b, m] : weights) {
            if (m == cplx{}) continue;
            any = true;
            const mp::Complex mm(m);
            for (int j = 0; j < n; ++j) h.coef[j] += mm * fam.C[b][j];
        }
        if (!any) return mp::ExpSum{};
        return h;
    };

    std::vector<std::vector<std::pair<int, cplx>>> channels(ch ? 2 : 1);
    std::vector<std::vector<std::pair<cplx, cplx>>> identities(channels.size());  // (rate, target)
    if (ch) {
        const auto& m4 = lm.inputs[0];
        const auto& m5 = lm.inputs[1];
        for (int i = 0; i < n; ++i) {
            const int k = c.spectrum.mode[i];
            const double lam = lm.lambda(k).real();
            const double t4 = -d[k].real() / (lm.Phi * m4[k].real());
            channels[0].push_back({i, t4});
            identities[0].push_back({lam, t4});
            if (k >= 1) {
                const double t5 = -d[k].imag() / (lm.Phi * m5[k].imag());
                channels[1].push_back({i, t5});
                identities[1].push_back({lam, t5});
            }
        }
    } else {
        const auto& m4 = lm.inputs[0];
        for (int i = 0; i < n; ++i) {
            const int k = c.spectrum.mode[i];
            const cplx target = -d[k] / (lm.Phi * m4[k]);
            const int b = c.spectrum.position_of_mode(-k);
            channels[0].push_back({b, target});
            identities[0].push_back({lm.rate(k), target});
        }
    }
    for (const auto& w : channels) c.h.push_back(assemble(w));
    detail::finish_control(c, fastest, o);
    const auto rule = composite_rule(c.mesh, o.quad_points);
    for (std::size_t ch_i = 0; ch_i < c.h.size(); ++ch_i) {
        if (c.h[ch_i].empty()) continue;
        for (const auto& [rate, target] : identities[ch_i])
            c.replay_error = std::max(c.replay_error, detail::replay(c.h[ch_i], rule, rate, target, T));
    }
    return c;
}

// Minimum-L2-norm control of the truncated system from its controllability
// Gramian. Each controlled real quantity (Re / Im of a mode, per channel)
// gives a constraint int_0^T p(s) f_i(s) ds = r_i with f_i a real
// combination of exponentials; p = sum_i c_i f_i with W c = r.
inline LinearControl gramian_oracle(const LinearModel& lm, double T, int count, const FourierField& d,
                                    const MomentOptions& o = {}) {
    const bool ch = lm.kind == LinearKind::CH_lin;
    if (static_cast<int>(lm.inputs.size()) != (ch ? 2 : 1))
        throw ConfigError("gramian_oracle: CH needs two input profiles, KS one");
    LinearControl c;
    c.model = lm.kind;
    c.Phi = lm.Phi;
    c.T = T;
    c.count = count;
    c.spectrum = build_spectrum(lm.kind, lm.Phi, count);
    c.bits = o.precision.bits;

    // f(s) = sum_t beta_t e^{z_t (T - s)}
    struct Constraint {
        int channel;
        std::vector<std::pair<cplx, cplx>> terms;  // (beta, z)
        double rhs;
    };
    std::vector<Constraint> cons;
    auto re_part = [](cplx alpha, cplx z) {
        return std::vector<std::pair<cplx, cplx>>{{alpha / 2.0, z}, {std::conj(alpha) / 2.0, std::conj(z)}};
    };
    auto im_part = [](cplx alpha, cplx z) {
        const cplx i2(0.0, 2.0);
        return std::vector<std::pair<cplx, cplx>>{{alpha / i2, z}, {-std::conj(alpha) / i2, std::conj(z)}};
    };
    double fastest = 1.0;
    for (int i = 0; i < count; ++i) {
        const int k = c.spectrum.mode[i];
        if (k < 0) continue;
        const cplx z = lm.rate(k);
        fastest = std::max(fastest, std::abs(z));
        if (ch) {
            const double a4 = lm.Phi * lm.inputs[0][k].real();
            const double a5 = lm.Phi * lm.inputs[1][k].imag();
            if (a4 == 0.0 || (k > 0 && a5 == 0.0)) throw SingularGramian("gramian_oracle: vanishing pairing");
            cons.push_back({0, re_part(a4, z), -d[k].real()});
            if (k > 0) cons.push_back({1, re_part(a5, z), -d[k].imag()});
        } else {
            const cplx a = lm.Phi * lm.inputs[0][k];
            if (a == cplx{}) throw SingularGramian("gramian_oracle: vanishing pairing");
            cons.push_back({0, re_part(a, z), -d[k].real()});
            if (k > 0) cons.push_back({0, im_part(a, z), -d[k].imag()});
        }
    }
    const int m = ch ? 2 : 1;
    c.h.assign(m, mp::ExpSum{});
    {
        mp::PrecisionScope ps(c.bits);
        const mp::Real TT(T);
        for (int chn = 0; chn < m; ++chn) {
            std::vector<const Constraint*> cs;
            for (const auto& x : cons)
                if (x.channel == chn) cs.push_back(&x);
            const std::size_t q = cs.size();
            if (q == 0) continue;
            mp::Matrix W(q, std::vector<mp::Complex>(q)), r(q, std::vector<mp::Complex>(1));
            for (std::size_t i = 0; i < q; ++i) {
                r[i][0] = mp::Complex(mp::Real(cs[i]->rhs));
                for (std::size_t j = 0; j < q; ++j) {
                    mp::Complex acc;
                    for (const auto& [b1, z1] : cs[i]->terms)
                        for (const auto& [b2, z2] : cs[j]->terms) {
                            // int_0^T e^{(z1 + z2) u} du
                            const mp::Complex zz = mp::Complex(z1) + mp::Complex(z2);
                            acc += mp::Complex(b1) * mp::Complex(b2) * mp::one_minus_exp_over(-zz, TT);
                        }
                    W[i][j] = mp::Complex(acc.re);
                }
            }
            const auto coef = mp::solve(W, r);
            // stored as h(t) = p(T - t) = sum_i c_i sum_t beta_t e^{z_t t}
            mp::ExpSum h;
            h.bits = c.bits;
            for (std::size_t i = 0; i < q; ++i)
                for (const auto& [b, z] : cs[i]->terms) {
                    h.coef.push_back(coef[i][0].re * mp::Complex(b));
                    h.rate.push_back(-mp::Complex(z));
                }
            c.h[chn] = h;
        }
    }
    detail::finish_control(c, fastest, o);
    // residual of the constraints by quadrature, as terminal mode values
    const auto rule = composite_rule(c.mesh, o.quad_points);
    for (const auto& x : cons) {
        double acc = 0.0, fn = 0.0;
        for (std::size_t qn = 0; qn < rule.t.size(); ++qn) {
            const double t = rule.t[qn];  // t = T - s
            double f = 0.0;
            for (const auto& [b, z] : x.terms) f += (b * std::exp(z * t)).real();
            acc += rule.w[qn] * c.h[x.channel](t).real() * f;
            fn += rule.w[qn] * f * f;
        }
        const double scale = std::max(std::abs(x.rhs), c.channel_norms[x.channel] * std::sqrt(fn));
        if (scale > 0.0) c.replay_error = std::max(c.replay_error, std::abs(acc - x.rhs) / scale);
    }
    return c;
}

// Report of a verified linear null-control run.
struct NullControlReport {
    LinearControl control;
    FourierField terminal;
    double terminal_residual = 0.0;  // controlled modes, relative to ||v0||
    double tail_residual = 0.0;      // modes outside the family, relative
};

inline bool controlled_mode(const ExpSpectrum& s, int k) {
    return s.position_of_mode(k) >= 0 || s.position_of_mode(-k) >= 0;
}

inline NullControlReport verify_null_control(const LinearModel& lm, const FourierField& v0, LinearControl control) {
    NullControlReport r;
    r.terminal = flow_linearized(lm, v0, control.schedule, control.T).v;
    double in = 0.0, out = 0.0;
    for (int k = 0; k <= r.terminal.K(); ++k) {
        const double e = (k ? 2.0 : 1.0) * std::norm(r.terminal[k]);
        (controlled_mode(control.spectrum, k) ? in : out) += e;
    }
    const double n0 = l2_norm(v0);
    r.terminal_residual = n0 > 0 ? std::sqrt(in) / n0 : std::sqrt(in);
    r.tail_residual = n0 > 0 ? std::sqrt(out) / n0 : std::sqrt(out);
    r.control = std::move(control);
    return r;
}

inline FourierField free_terminal_state(const LinearModel& lm, const FourierField& v0, double T) {
    return flow_linearized(lm, v0, ControlSchedule(), T).v;
}

inline NullControlReport moment_control_CH(const FourierField& v0, double Phi, const FourierField& mu4,
                                           const FourierField& mu5, double T, int count,
                                           const MomentOptions& o = {}) {
    const ControlProfileSet set(v0.K(), v0.N(), {mu4.resized(v0.K()), mu5.resized(v0.K())});
    const auto hyp = set.check_decoupled();
    if (!hyp.ok) throw HypothesisViolated("moment_control_CH: " + hyp.failure);
    if (count > v0.K() + 1) throw ConfigError("moment_control_CH: count exceeds the truncation");
    const LinearModel lm{LinearKind::CH_lin, Phi, {set[3], set[4]}};
    return verify_null_control(lm, v0, moment_solve(lm, T, count, free_terminal_state(lm, v0, T), o));
}

inline NullControlReport moment_control_KS(const FourierField& v0, double Phi, const FourierField& mu4, double T,
                                           int count, const MomentOptions& o = {}) {
    const ControlProfileSet set(v0.K(), v0.N(), {mu4.resized(v0.K())});
    const auto hyp = set.check_single();
    if (!hyp.ok) throw HypothesisViolated("moment_control_KS: " + hyp.failure);
    if ((count - 1) / 2 > v0.K()) throw ConfigError("moment_control_KS: count exceeds the truncation");
    const LinearModel lm{LinearKind::KS_lin, Phi, {set[3]}};
    return verify_null_control(lm, v0, moment_solve(lm, T, count, free_terminal_state(lm, v0, T), o));
}

inline NullControlReport gramian_null_control(const LinearModel& lm, const FourierField& v0, double T, int count,
                                              const MomentOptions& o = {}) {
    return verify_null_control(lm, v0, gramian_oracle(lm, T, count, free_terminal_state(lm, v0, T), o));
}

// log ||p|| = a + M / T by least squares.
struct CostFit {
    double a = 0.0, M = 0.0;
};

inline CostFit fit_cost_law(const std::vector<double>& T, const std::vector<double>& norms) {
    if (T.size() != norms.size() || T.size() < 2) throw ConfigError("fit_cost_law: need at least two points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(T.size());
    for (std::size_t i = 0; i < T.size(); ++i) {
        const double x = 1.0 / T[i], y = std::log(norms[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    CostFit f;
    f.M = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    f.a = (sy - f.M * sx) / n;
    return f;
}

}  // namespace bilinear
