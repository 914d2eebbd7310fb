#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bilinear/error.hpp"
#include "bilinear/fft.hpp"
#include "bilinear/profiles.hpp"
#include "bilinear/schedule.hpp"
#include "bilinear/trig_field.hpp"

namespace bilinear {

// phi_0..phi_n at z, phi_j(z) = sum_m z^m / (m + j)!.
inline void phi_functions(cplx z, int n, cplx* out) {
    if (std::abs(z) < 2.0) {
        for (int j = 0; j <= n; ++j) {
            double fact = 1.0;
            for (int i = 2; i <= j; ++i) fact *= i;
            cplx term = 1.0 / fact, sum = term;
            for (int m = 1; m < 80; ++m) {
                term *= z / double(m + j);
                sum += term;
                if (std::abs(term) < 1e-18 * std::abs(sum)) break;
            }
            out[j] = sum;
        }
        return;
    }
    out[0] = std::exp(z);
    double inv_fact = 1.0;
    for (int j = 0; j < n; ++j) {
        out[j + 1] = (out[j] - inv_fact) / z;
        inv_fact /= double(j + 1);
    }
}

struct FlowOptions {
    double s = 1.0;              // Sobolev index for the guard and the report
    double guard = 1e8;          // blowup threshold on ||u||_s
    double h_max = 1e-3;         // substep ceiling
    double safety_control = 0.05;  // h * sup|Q| stays below this
    double safety_nonlinear = 0.5;
    double sample_dt = 0.0;      // 0 records only the endpoints
    long max_steps = 200'000'000;
};

struct SolveReport {
    std::vector<double> times;
    std::vector<FourierField> samples;
    double sup_norm = 0.0;
    bool blowup = false;
    long steps = 0;
    double h_min = std::numeric_limits<double>::infinity();
    double h_max = 0.0;
};

class BlowupDetected : public NumericError {
public:
    BlowupDetected(double time, double norm, SolveReport report)
        : NumericError("blowup detected at t = " + std::to_string(time) + " (norm " +
                       std::to_string(norm) + ")"),
          time(time), report(std::move(report)) {}
    double time;
    SolveReport report;
};

struct FlowResult {
    FourierField u;
    SolveReport report;
};

// Nonlinear remainder N(u): u u_x for KS, -(u^3)_xx for CH.
inline FourierField nonlinearity(Model model, const FourierField& u) {
    const int K = u.K();
    if (model == Model::KS) {
        const int M = std::max(u.N(), fft::good_size(3 * K + 2));
        auto a = u.to_grid(M);
        const auto b = derivative(u, 1).to_grid(M);
        for (int j = 0; j < M; ++j) a[j] *= b[j];
        return FourierField::from_grid(a, K, u.N());
    }
    const int M = std::max(u.N(), fft::good_size(4 * K + 2));
    auto a = u.to_grid(M);
    for (double& x : a) x = x * x * x;
    auto cube = FourierField::from_grid(a, K, u.N());
    return -derivative(cube, 2);
}

// ETDRK4 (Cox-Matthews) for u_t = L u + G(u, t) with L_k = -k^4 + k^2 taken
// exactly and G = -N(u) + Q(t) u evaluated on a dealiased grid.
class Integrator {
public:
    Integrator(Model model, ControlProfileSet profiles, FlowOptions options = {})
        : model_(model), prof_(std::move(profiles)), opt_(options) {
        K_ = prof_.K();
        N_ = prof_.size() ? prof_[0].N() : 2 * K_ + 2;
        M_ = std::max(N_, fft::good_size((model_ == Model::CH ? 4 : 3) * K_ + 2));
        for (const auto& mu : prof_.all()) {
            mu_grid_.push_back(mu.to_grid(M_));
            mu_sup_.push_back(max_abs(mu_grid_.back()));
        }
    }

    Model model() const { return model_; }
    const ControlProfileSet& profiles() const { return prof_; }
    const FlowOptions& options() const { return opt_; }
    FlowOptions& options() { return opt_; }
    int K() const { return K_; }
    int N() const { return N_; }

    FlowResult flow(const FourierField& u0, const ControlSchedule& sched, double t) const {
        if (t < 0.0) throw ConfigError("flow: negative time");
        if (!sched.empty() && t > sched.total_duration() * (1.0 + 1e-12))
            throw ConfigError("flow: horizon exceeds the schedule");
        if (!sched.empty() && sched.channels() > prof_.size())
            throw ConfigError("flow: schedule has more channels than profiles");
        FourierField u = u0.resized(K_);
        SolveReport rep;
        record(rep, 0.0, u);
        rep.sup_norm = sobolev_norm(u, opt_.s);
        double clock = 0.0;
        double next_sample = opt_.sample_dt > 0 ? opt_.sample_dt : INFINITY;
        auto run_piece = [&](const std::vector<Vec>* coeffs, double duration) {
            // coeffs == nullptr means zero control
            double local = 0.0;
            while (local < duration) {
                double h_goal = step_goal(u, coeffs);
                double remaining = duration - local;
                double stop = remaining;
                if (clock + remaining > next_sample) stop = std::max(next_sample - clock, 0.0);
                if (stop <= 0.0) stop = remaining;
                const double n = std::ceil(stop / h_goal - 1e-9);
                const double h = n <= 1.0 ? stop : stop / n;
                step(u, coeffs, duration, local, h);
                local = (h == remaining) ? duration : local + h;
                clock += h;
                ++rep.steps;
                rep.h_min = std::min(rep.h_min, h);
                rep.h_max = std::max(rep.h_max, h);
                const double nu = sobolev_norm(u, opt_.s);
                rep.sup_norm = std::max(rep.sup_norm, nu);
                if (!std::isfinite(nu) || nu > opt_.guard) {
                    rep.blowup = true;
                    record(rep, clock, u);
                    throw BlowupDetected(clock, nu, rep);
                }
                if (rep.steps > opt_.max_steps) throw BudgetExceeded("flow: step budget exhausted");
                if (clock >= next_sample - 1e-14) {
                    record(rep, clock, u);
                    next_sample += opt_.sample_dt;
                }
            }
        };
        if (sched.empty()) {
            if (t > 0.0) run_piece(nullptr, t);
        } else {
            double acc = 0.0;
            for (const auto& seg : sched.pieces().segments()) {
                if (acc >= t) break;
                const double d = (acc + seg.duration > t) ? t - acc : seg.duration;
                if (d > 0.0) {
                    if (d == seg.duration) run_piece(&seg.coeffs, d);
                    else {
                        // partial segment: restrict the polynomial to [0, d]
                        auto c = poly::rescale(seg.coeffs, 0.0, d / seg.duration);
                        run_piece(&c, d);
                    }
                }
                acc += seg.duration;
            }
        }
        if (rep.times.back() != clock) record(rep, clock, u);
        return {u, rep};
    }

    // G(u, t) = -N(u) + Q u in Fourier space.
    FourierField rhs(const FourierField& u, const Vec& p) const {
        const bool has_q = std::any_of(p.begin(), p.end(), [](double x) { return x != 0.0; });
        auto ug = u.to_grid(M_);
        std::vector<double> g(M_, 0.0);
        if (model_ == Model::KS) {
            const auto ux = derivative(u, 1).to_grid(M_);
            for (int j = 0; j < M_; ++j) g[j] = -ug[j] * ux[j];
            if (has_q) add_control(g, ug, p);
            return FourierField::from_grid(g, K_, N_);
        }
        for (int j = 0; j < M_; ++j) g[j] = ug[j] * ug[j] * ug[j];
        auto c = fft::forward(g);
        FourierField out(K_, N_);
        for (int k = 1; k <= K_; ++k) out.set(k, -double(k) * k * c[k]);
        if (has_q) {
            std::fill(g.begin(), g.end(), 0.0);
            add_control(g, ug, p);
            out += FourierField::from_grid(g, K_, N_);
        }
        return out;
    }

private:
    void add_control(std::vector<double>& g, const std::vector<double>& ug, const Vec& p) const {
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p[i] == 0.0) continue;
            const auto& mg = mu_grid_[i];
            for (int j = 0; j < M_; ++j) g[j] += p[i] * mg[j] * ug[j];
        }
    }

    static void record(SolveReport& rep, double t, const FourierField& u) {
        rep.times.push_back(t);
        rep.samples.push_back(u);
    }

    // A time-constant value on the constant profile (index 0) shifts every
    // mode by the same rate; it is folded into the exact linear part.
    static bool folds_constant(const std::vector<Vec>* coeffs) {
        return coeffs && coeffs->size() == 1 && !(*coeffs)[0].empty();
    }

    double step_goal(const FourierField& u, const std::vector<Vec>* coeffs) const {
        double h = opt_.h_max;
        if (coeffs) {
            double q = 0.0;
            const std::size_t first = folds_constant(coeffs) ? 1 : 0;
            for (const auto& c : *coeffs)
                for (std::size_t i = first; i < c.size(); ++i) q += std::abs(c[i]) * mu_sup_[i];
            if (q > 0.0) h = std::min(h, opt_.safety_control / q);
        }
        const double umax = max_abs(u.to_grid(M_));
        if (umax > 0.0) {
            if (model_ == Model::KS) h = std::min(h, std::pow(opt_.safety_nonlinear / umax, 4.0 / 3.0));
            else h = std::min(h, std::pow(opt_.safety_nonlinear / (3.0 * umax * umax), 2.0));
        }
        return h;
    }

    Vec control_at(const std::vector<Vec>* coeffs, double s) const {
        if (!coeffs) return {};
        return poly::evaluate(*coeffs, std::clamp(s, 0.0, 1.0));
    }

    void prepare(double h, double shift) const {
        if (h == cached_h_ && shift == cached_shift_) return;
        cached_h_ = h;
        cached_shift_ = shift;
        E_.assign(K_ + 1, 0.0);
        E2_.assign(K_ + 1, 0.0);
        Qc_.assign(K_ + 1, 0.0);
        f1_.assign(K_ + 1, 0.0);
        f2_.assign(K_ + 1, 0.0);
        f3_.assign(K_ + 1, 0.0);
        cplx ph[4], ph2[2];
        for (int k = 0; k <= K_; ++k) {
            const double L = -std::pow(double(k), 4) + double(k) * k + shift;
            const double z = h * L;
            phi_functions(z, 3, ph);
            phi_functions(z / 2.0, 1, ph2);
            E_[k] = std::exp(z);
            E2_[k] = std::exp(z / 2.0);
            Qc_[k] = 0.5 * h * ph2[1].real();
            f1_[k] = h * (ph[1] - 3.0 * ph[2] + 4.0 * ph[3]).real();
            f2_[k] = h * (ph[2] - 2.0 * ph[3]).real();
            f3_[k] = h * (4.0 * ph[3] - ph[2]).real();
        }
    }

    void step(FourierField& u, const std::vector<Vec>* coeffs, double duration, double local,
              double h) const {
        const bool fold = folds_constant(coeffs);
        prepare(h, fold ? (*coeffs)[0][0] * prof_[0][0].real() : 0.0);
        Vec p0 = control_at(coeffs, local / duration);
        Vec ph = control_at(coeffs, (local + 0.5 * h) / duration);
        Vec p1 = control_at(coeffs, (local + h) / duration);
        if (fold) p0[0] = ph[0] = p1[0] = 0.0;
        const FourierField Nu = rhs(u, p0);
        FourierField a(K_, N_), b(K_, N_), c(K_, N_), out(K_, N_);
        for (int k = 0; k <= K_; ++k) a.set(k, E2_[k] * u[k] + Qc_[k] * Nu[k]);
        const FourierField Na = rhs(a, ph);
        for (int k = 0; k <= K_; ++k) b.set(k, E2_[k] * u[k] + Qc_[k] * Na[k]);
        const FourierField Nb = rhs(b, ph);
        for (int k = 0; k <= K_; ++k) c.set(k, E2_[k] * a[k] + Qc_[k] * (2.0 * Nb[k] - Nu[k]));
        const FourierField Nc = rhs(c, p1);
        for (int k = 0; k <= K_; ++k)
            out.set(k, E_[k] * u[k] + f1_[k] * Nu[k] + 2.0 * f2_[k] * (Na[k] + Nb[k]) + f3_[k] * Nc[k]);
        u = std::move(out);
    }

    Model model_;
    ControlProfileSet prof_;
    FlowOptions opt_;
    int K_ = 0, N_ = 0, M_ = 0;
    std::vector<std::vector<double>> mu_grid_;
    std::vector<double> mu_sup_;

    mutable double cached_h_ = -1.0, cached_shift_ = 0.0;
    mutable std::vector<double> E_, E2_, Qc_, f1_, f2_, f3_;
};

// ||R_t(u0) - R_t(v0)||_s / ||u0 - v0||_s under a common control.
inline double stability_probe(const Integrator& integ, const FourierField& u0, const FourierField& v0,
                              const ControlSchedule& sched, double t) {
    const double s = integ.options().s;
    const double d0 = sobolev_norm(u0 - v0, s);
    if (!(d0 > 0.0)) throw ConfigError("stability_probe: initial states coincide");
    const auto a = integ.flow(u0, sched, t).u;
    const auto b = integ.flow(v0, sched, t).u;
    return sobolev_norm(a - b, s) / d0;
}

// ---- linearized dynamics around a constant state ---------------------------

enum class LinearKind { CH_lin, KS_lin };

inline std::string to_string(LinearKind k) { return k == LinearKind::CH_lin ? "CH_lin" : "KS_lin"; }

// Linearization of the controlled equation around the constant Phi. The
// inputs are the profiles that carry the control (mu_4, mu_5 for CH, mu_4 for
// KS); they enter as Phi * p_i * mu_i.
struct LinearModel {
    LinearKind kind = LinearKind::CH_lin;
    double Phi = 1.0;
    std::vector<FourierField> inputs;

    // Adjoint eigenvalue attached to e^{ikx}: -k^4 + (1 - 3 Phi^2) k^2 for CH,
    // -k^4 + k^2 + i k Phi for KS.
    cplx lambda(int k) const {
        const double kk = double(k) * k;
        if (kind == LinearKind::CH_lin) return {-kk * kk + (1.0 - 3.0 * Phi * Phi) * kk, 0.0};
        return {-kk * kk + kk, double(k) * Phi};
    }

    // Rate of the coefficient of e^{ikx} in the forward equation. For KS the
    // transport term Phi v_x contributes -ik Phi, i.e. the conjugate of the
    // adjoint eigenvalue; for CH the two coincide.
    cplx rate(int k) const { return std::conj(lambda(k)); }
};

struct LinearFlowResult {
    FourierField v;
    std::vector<double> times;
    std::vector<FourierField> samples;
};

// Exact variation of constants, mode by mode. Controls and sources are
// piecewise polynomials in time, whose convolution with e^{a(t-s)} is
// written through phi functions:
//   int_0^d e^{a(d-s)} (s/d)^j ds = j! d phi_{j+1}(a d).
inline LinearFlowResult flow_linearized(const LinearModel& model, const FourierField& v0,
                                        const ControlSchedule& sched, double t,
                                        const FieldPath* source = nullptr,
                                        const std::vector<double>& sample_times = {}) {
    if (model.Phi == 0.0) throw ConfigError("flow_linearized: Phi must be nonzero");
    if (!sched.empty() && sched.channels() != static_cast<int>(model.inputs.size()))
        throw ConfigError("flow_linearized: schedule channels do not match the input profiles");
    if (!sched.empty() && t > sched.total_duration() * (1.0 + 1e-12))
        throw ConfigError("flow_linearized: horizon exceeds the schedule");
    if (source && !source->empty() && t > source->total_duration() * (1.0 + 1e-12))
        throw ConfigError("flow_linearized: horizon exceeds the source");
    const int K = v0.K();
    const int N = v0.N();
    std::vector<double> cuts{0.0, t};
    if (!sched.empty())
        for (std::size_t i = 0; i < sched.size(); ++i) cuts.push_back(sched.pieces().start(i));
    if (source)
        for (std::size_t i = 0; i < source->segments().size(); ++i) cuts.push_back(source->start(i));
    for (double s : sample_times) cuts.push_back(s);
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> pts;
    for (double c : cuts)
        if (c >= 0.0 && c <= t && (pts.empty() || c > pts.back())) pts.push_back(c);

    std::vector<cplx> v(K + 1);
    for (int k = 0; k <= K; ++k) v[k] = v0[k];
    std::vector<std::vector<cplx>> b(model.inputs.size(), std::vector<cplx>(K + 1));
    for (std::size_t i = 0; i < model.inputs.size(); ++i)
        for (int k = 0; k <= K; ++k) b[i][k] = model.Phi * model.inputs[i][k];

    LinearFlowResult res;
    auto emit = [&](double time) {
        FourierField f(K, N);
        for (int k = 0; k <= K; ++k) f.set(k, v[k]);
        res.times.push_back(time);
        res.samples.push_back(f);
    };
    std::size_t next_sample = 0;
    auto maybe_emit = [&](double time) {
        while (next_sample < sample_times.size() && sample_times[next_sample] <= time) {
            if (sample_times[next_sample] == time) emit(time);
            ++next_sample;
        }
    };
    maybe_emit(0.0);

    std::vector<cplx> ph(16);
    for (std::size_t iv = 0; iv + 1 < pts.size(); ++iv) {
        const double t0 = pts[iv], t1 = pts[iv + 1], d = t1 - t0;
        const double mid = 0.5 * (t0 + t1);
        std::vector<Vec> pc;
        if (!sched.empty()) {
            const std::size_t si = sched.pieces().locate(mid);
            pc = sched.pieces().local(si, t0, t1);
        }
        std::vector<FourierField> fc;
        if (source && !source->empty()) {
            const std::size_t si = source->locate(mid);
            fc = source->local(si, t0, t1);
        }
        const int deg = static_cast<int>(std::max(pc.size(), fc.size()));
        if (deg + 1 >= static_cast<int>(ph.size())) ph.resize(deg + 2);
        for (int k = 0; k <= K; ++k) {
            const cplx a = model.rate(k);
            phi_functions(a * d, deg, ph.data());
            cplx acc = ph[0] * v[k];
            double jfact = 1.0;
            for (int j = 0; j < deg; ++j) {
                if (j > 0) jfact *= j;
                cplx forcing = 0.0;
                if (j < static_cast<int>(pc.size()))
                    for (std::size_t i = 0; i < b.size(); ++i) forcing += b[i][k] * pc[j][i];
                if (j < static_cast<int>(fc.size())) forcing += fc[j][k];
                if (forcing != cplx{}) acc += forcing * jfact * d * ph[j + 1];
            }
            v[k] = (k == 0) ? cplx{acc.real(), 0.0} : acc;
        }
        maybe_emit(t1);
    }
    FourierField out(K, N);
    for (int k = 0; k <= K; ++k) out.set(k, v[k]);
    res.v = out;
    return res;
}

}  // namespace bilinear
