#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "bilinear/dynamics.hpp"
#include "bilinear/error.hpp"
#include "bilinear/phase_tree.hpp"
#include "bilinear/saturation.hpp"
#include "bilinear/schedule.hpp"
#include "bilinear/trig_field.hpp"

namespace bilinear {

// ---- conjugated dynamics ---------------------------------------------------

struct ProbeRow {
    double delta = 0.0;
    double error = 0.0;
    long steps = 0;
};

// exp(g) * v on an oversampled grid.
inline FourierField exp_times(const FourierField& g, const FourierField& v, int K, double budget = 1e-6) {
    return pointwise_combine(g, v, [](double a, double b) { return std::exp(a) * b; }, K, budget);
}

inline FourierField generator_field(const std::array<double, 3>& lambda, int K, int N = 0) {
    return FourierField::constant(lambda[0], K, N) + cos_mode(1, K, lambda[1], N) + sin_mode(1, K, lambda[2], N);
}

// The limit e^{-(phi')^4 + <p, mu>} u0.
inline FourierField conjugated_limit_target(const FourierField& u0, const FourierField& phi,
                                            const std::array<double, 3>& p, int K) {
    const auto d = derivative(phi.resized(K), 1);
    const auto q = pointwise_map(d, [](double x) { return -x * x * x * x; }, K, -1.0);
    return exp_times(q + generator_field(p, K, u0.N()), u0.resized(K), K);
}

// For each delta: start from e^{-delta^{-1/4} phi} u0, run the constant
// control p / delta for time delta, multiply back by e^{delta^{-1/4} phi} and
// compare with the limit in H^s.
inline std::vector<ProbeRow> conjugated_limit_probe(const Integrator& integ, const FourierField& u0,
                                                    const FourierField& phi, const std::array<double, 3>& p,
                                                    const std::vector<double>& deltas, double s) {
    const int K = integ.K();
    const auto grid = phi.to_grid(detail::oversampled_size(phi.N(), K));
    for (double x : grid)
        if (!(x > 0.0)) throw ConfigError("conjugated_limit_probe: phi must be positive");
    if (integ.profiles().size() < 3) throw ConfigError("conjugated_limit_probe: needs the three base profiles");
    const auto target = conjugated_limit_target(u0, phi, p, K);
    const auto phiK = phi.resized(K);
    std::vector<ProbeRow> rows;
    for (double delta : deltas) {
        if (!(delta > 0.0)) throw ConfigError("conjugated_limit_probe: delta must be positive");
        const double a = std::pow(delta, -0.25);
        const auto v0 = exp_times(-a * phiK, u0.resized(K), K);
        Vec c(integ.profiles().size(), 0.0);
        for (int i = 0; i < 3; ++i) c[i] = p[i] / delta;
        ControlSchedule sched(integ.profiles().size());
        sched.constant(delta, c);
        const auto res = integ.flow(v0, sched, delta);
        const auto back = exp_times(a * phiK, res.u, K);
        rows.push_back({delta, sobolev_norm(back - target, s), res.report.steps});
    }
    return rows;
}

// ---- plans -----------------------------------------------------------------

struct PlanStage {
    std::string kind;  // "constant" (control lambda / tau) or "free"
    std::string role;
    int unit = 0;
    std::array<double, 3> lambda{0, 0, 0};
    double tau = 0.0;
    double error = 0.0;  // stage error measured when the stage was accepted
};

struct SteeringPlan {
    std::vector<PlanStage> stages;
    ControlSchedule schedule;
    double total_duration = 0.0;
    double achieved_error = 0.0;
    std::string error_norm;  // "L2" or "H^s"
    FourierField terminal;

    nlohmann::json to_json() const {
        nlohmann::json st = nlohmann::json::array();
        for (const auto& s : stages)
            st.push_back({{"kind", s.kind},
                          {"role", s.role},
                          {"unit", s.unit},
                          {"tau", s.tau},
                          {"lambda", s.lambda},
                          {"stage_error", s.error}});
        return {{"stages", st},
                {"total_duration", total_duration},
                {"achieved_error", achieved_error},
                {"error_norm", error_norm},
                {"schedule", schedule.to_json()}};
    }
};

inline ControlSchedule compile_stages(const std::vector<PlanStage>& stages, int channels) {
    ControlSchedule out(channels);
    for (const auto& s : stages) {
        if (s.tau <= 0.0) continue;
        Vec v(channels, 0.0);
        if (s.kind == "constant")
            for (int i = 0; i < 3; ++i) v[i] = s.lambda[i] / s.tau;
        out.constant(s.tau, v);
    }
    return out;
}

struct SynthesisOptions {
    double s = 1.0;
    double tau2_start = 1e-2;   // first trial of the free stage inside a quartic unit
    double tau_floor = 1e-13;
    int max_halvings = 48;
    double inner_ratio = 0.25;  // generator tolerance inside a unit, relative to the unit's
    int eps_retries = 4;
    bool antithetic = true;     // split each quartic child into (w/2, psi) and (w/2, -psi)
};

namespace detail {

class PlanBuilder {
public:
    PlanBuilder(const Integrator& integ, const SynthesisOptions& o, double T) : in_(integ), o_(o), T_(T) {}

    std::vector<PlanStage> stages;
    double spent = 0.0;
    struct Trial {
        int unit;
        double tau2, error;
        std::string failure;  // empty when the trial ran through
    };
    std::vector<Trial> trials;  // every free-stage length tried, with the unit error

    double remaining() const { return T_ - spent; }

    FourierField run(const FourierField& u, const std::vector<PlanStage>& st) const {
        const auto sched = compile_stages(st, in_.profiles().size());
        if (sched.empty()) return u;
        return in_.flow(u, sched, sched.total_duration()).u;
    }

    // Constant control lambda / tau over tau, halving tau until the
    // multiplicative error is below eps (relative, in whichever of the start
    // or target frames is of unit size).
    FourierField reach_generator(const FourierField& u, const std::array<double, 3>& lambda, double eps,
                                 const std::string& role, int unit, double tau_max, double* hint = nullptr) {
        if (lambda[0] == 0.0 && lambda[1] == 0.0 && lambda[2] == 0.0) return u;
        const int K = in_.K();
        const auto g = generator_field(lambda, K, u.N());
        const auto target = exp_times(g, u, K, -1.0);
        const bool start_frame = sobolev_norm(u, o_.s) >= sobolev_norm(target, o_.s);
        const double scale = start_frame ? sobolev_norm(u, o_.s) : sobolev_norm(target, o_.s);
        double tau = std::min(tau_max, remaining());
        if (hint && *hint > 0.0) tau = std::min(tau, 4.0 * *hint);
        double best = INFINITY;
        for (int it = 0; it < o_.max_halvings && tau >= o_.tau_floor; ++it, tau *= 0.5) {
            PlanStage st{"constant", role, unit, lambda, tau, 0.0};
            double err = INFINITY;
            FourierField out;
            try {
                out = run(u, {st});
                const double diff = start_frame ? sobolev_norm(exp_times(-1.0 * g, out, K, -1.0) - u, o_.s)
                                                : sobolev_norm(out - target, o_.s);
                err = scale > 0.0 ? diff / scale : diff;
            } catch (const BlowupDetected&) {
            } catch (const AliasingBudgetExceeded&) {
            }
            best = std::min(best, err);
            if (err < eps) {
                st.error = err;
                stages.push_back(st);
                spent += tau;
                if (hint) *hint = tau;
                return out;
            }
        }
        throw ToleranceNotMet("reach_exponential: generator stage '" + role + "' above tolerance", best);
    }

    // e^{-w (psi')^4} by conjugating a free evolution of length tau2 with
    // e^{-+tau2^{-1/4} chi}, chi = w^{1/4} psi + c.
    FourierField reach_quartic(const FourierField& u, double w, const std::array<double, 3>& psi, double eps,
                               int unit) {
        const int K = in_.K();
        const double amp = std::hypot(psi[1], psi[2]);
        const auto psi_field = generator_field(psi, K, u.N());
        const auto d = derivative(psi_field, 1);
        const auto q = pointwise_map(d, [w](double x) { return -w * x * x * x * x; }, K, -1.0);
        const auto target = exp_times(q, u, K);
        const double scale = sobolev_norm(target, o_.s);
        std::vector<double> signs{1.0};
        if (o_.antithetic) signs.push_back(-1.0);
        const double wpart = w / signs.size();
        const double r = std::pow(wpart, 0.25);
        const double c = 1.0 + r * amp;  // 1 + |min r psi| for the non-constant part

        double tau2 = std::min(o_.tau2_start, remaining() / 4.0);
        double best = INFINITY;
        int worse = 0;
        std::vector<double> hints(2 * signs.size(), 0.0);
        const std::size_t mark = stages.size();
        const double spent0 = spent;
        for (int it = 0; it < o_.max_halvings && tau2 >= o_.tau_floor; ++it, tau2 *= 0.5) {
            stages.resize(mark);
            spent = spent0;
            FourierField v = u;
            double err = INFINITY;
            std::string failure;
            try {
                const double a = std::pow(tau2, -0.25);
                for (std::size_t j = 0; j < signs.size(); ++j) {
                    const double sg = signs[j];
                    // chi = sg r (psi1 cos + psi2 sin) + c
                    const std::array<double, 3> chi{c, sg * r * psi[1], sg * r * psi[2]};
                    const std::array<double, 3> in{-a * chi[0], -a * chi[1], -a * chi[2]};
                    const std::array<double, 3> out{a * chi[0], a * chi[1], a * chi[2]};
                    const double eps1 = o_.inner_ratio * eps;
                    v = reach_generator(v, in, eps1, "conjugate-in", unit, tau2, &hints[2 * j]);
                    PlanStage fr{"free", "free", unit, {0, 0, 0}, tau2, 0.0};
                    if (tau2 > remaining()) throw ToleranceNotMet("reach_exponential: horizon exhausted", INFINITY);
                    v = run(v, {fr});
                    stages.push_back(fr);
                    spent += tau2;
                    v = reach_generator(v, out, eps1, "conjugate-out", unit, tau2, &hints[2 * j + 1]);
                }
                err = sobolev_norm(v - target, o_.s) / scale;
            } catch (const ToleranceNotMet& e) {
                failure = e.what();
            } catch (const BlowupDetected& e) {
                failure = e.what();
            } catch (const AliasingBudgetExceeded& e) {
                failure = e.what();
            }
            trials.push_back({unit, tau2, err, failure});
            if (err < eps) {
                stages.back().error = err;
                return v;
            }
            if (err < best) {
                best = err;
                worse = 0;
            } else if (std::isfinite(best) && ++worse >= 3) {
                break;  // below the round-off floor of the conjugation
            }
        }
        stages.resize(mark);
        spent = spent0;
        throw ToleranceNotMet("reach_exponential: quartic unit above tolerance", best);
    }

    FourierField build(const FourierField& u, const PhaseTree& tree, double eps, int& unit) {
        if (tree.kind() == PhaseTree::Kind::Generator) {
            const auto& l = tree.lambda();
            return reach_generator(u, {l[0].convert_to<double>(), l[1].convert_to<double>(), l[2].convert_to<double>()},
                                   eps, "generator", unit++, remaining());
        }
        FourierField v = u;
        for (const auto& ch : tree.children()) {
            if (ch.tree->kind() != PhaseTree::Kind::Generator)
                throw BudgetExceeded("reach_exponential: quartic children must be generators");
            const double w = ch.weight.convert_to<double>();
            if (w < 0.0)
                throw BudgetExceeded("reach_exponential: negative quartic weight cannot be steered directly");
            const auto& l = ch.tree->lambda();
            v = reach_quartic(v, w, {0.0, l[1].convert_to<double>(), l[2].convert_to<double>()}, eps, unit++);
        }
        return build(v, tree.affine(), eps, unit);
    }

private:
    const Integrator& in_;
    SynthesisOptions o_;
    double T_;
};

inline int count_units(const PhaseTree& t) {
    if (t.kind() == PhaseTree::Kind::Generator) return t.is_zero_generator() ? 0 : 1;
    return static_cast<int>(t.children().size()) + count_units(t.affine());
}

}  // namespace detail

// Target e^{phi} u0 for a phase tree.
inline FourierField exponential_target(const FourierField& u0, const PhaseTree& phi, int K) {
    const auto pf = phi.evaluate().to_field(std::max(K, phi.evaluate().max_frequency()), u0.N()).resized(K);
    return exp_times(pf, u0.resized(K), K);
}

// Staged plan whose simulated endpoint is within eps of e^{phi} u0 in H^s.
// Each quartic child is a conjugated free evolution between two generator
// stages; the affine part goes last. Unit tolerances are halved until the
// whole plan, re-simulated from u0, meets eps.
inline SteeringPlan reach_exponential(const Integrator& integ, const FourierField& u0, const PhaseTree& phi,
                                      double eps, double T, const SynthesisOptions& o = {}) {
    if (!(eps > 0.0) || !(T > 0.0)) throw ConfigError("reach_exponential: eps and T must be positive");
    const int K = integ.K();
    const auto u = u0.resized(K);
    const auto target = exponential_target(u, phi, K);
    SteeringPlan plan;
    plan.error_norm = "H^s";
    const int units = detail::count_units(phi);
    if (units == 0) {
        plan.schedule = ControlSchedule(integ.profiles().size());
        plan.terminal = u;
        plan.achieved_error = sobolev_norm(u - target, o.s);
        return plan;
    }
    double unit_eps = eps / (units * std::max(sobolev_norm(target, o.s), 1e-300));
    double best = INFINITY;
    for (int attempt = 0; attempt <= o.eps_retries; ++attempt, unit_eps *= 0.5) {
        detail::PlanBuilder b(integ, o, T);
        int unit = 0;
        try {
            b.build(u, phi, unit_eps, unit);
        } catch (const ToleranceNotMet& e) {
            best = std::min(best, e.achieved);
            continue;
        }
        SteeringPlan p;
        p.error_norm = "H^s";
        p.stages = b.stages;
        p.schedule = compile_stages(p.stages, integ.profiles().size());
        p.total_duration = p.schedule.total_duration();
        p.terminal = integ.flow(u, p.schedule, p.total_duration).u;
        p.achieved_error = sobolev_norm(p.terminal - target, o.s);
        if (p.achieved_error < eps) return p;
        best = std::min(best, p.achieved_error);
    }
    throw ToleranceNotMet("reach_exponential: no plan within eps", best);
}

// ---- sign-based steering ---------------------------------------------------

struct SteerOptions {
    SynthesisOptions synthesis;
    int cap = 2;               // highest frequency of the realized phase
    double zero_tol = 1e-12;   // |u| below this on both fields marks the zero set
    int theta_halvings = 12;
    int polish_passes = 4;     // generator nudges toward the hub, each after a settling hold
    double settle_fraction = 0.1;  // of the horizon, per settling hold
    double coarse_factor = 16.0;   // first pass tolerance growth when eps is out of direct reach
};

// Phase log(u1/u0) with a smooth cutoff of width theta around the zero set.
inline FourierField log_ratio_phase(const FourierField& u0, const FourierField& u1, int K, double zero_tol,
                                    double theta) {
    const int M = detail::oversampled_size(std::max(u0.N(), u1.N()), K);
    const auto a = u0.to_grid(M), b = u1.to_grid(M);
    std::vector<int> zero;
    for (int j = 0; j < M; ++j) {
        const bool za = std::abs(a[j]) <= zero_tol, zb = std::abs(b[j]) <= zero_tol;
        if (za && zb) zero.push_back(j);
        else if (za || zb || a[j] * b[j] < 0.0)
            throw SignMismatch("steer: u0 and u1 do not share a strict sign at x = " +
                               std::to_string(two_pi * j / M));
    }
    std::vector<double> phi(M, 0.0);
    for (int j = 0; j < M; ++j) {
        if (std::abs(a[j]) <= zero_tol) continue;
        double cut = 1.0;
        if (!zero.empty()) {
            double dist = INFINITY;
            for (int z : zero) {
                const double dx = std::abs(j - z) * two_pi / M;
                dist = std::min(dist, std::min(dx, two_pi - dx));
            }
            const double r = std::min(dist / theta, 1.0);
            cut = r * r * (3.0 - 2.0 * r);
        }
        phi[j] = cut * std::log(b[j] / a[j]);
    }
    return FourierField::from_grid(phi, K, u0.N());
}

// Steers u0 to u1 of the same strict sign: phase log(u1/u0), cut to
// frequency `cap`, realized with nonnegative quartic weights and reached by
// reach_exponential. The error is measured in L2.
inline SteeringPlan steer_same_sign(const Integrator& integ, const FourierField& u0, const FourierField& u1,
                                    double eps, double T, const SteerOptions& o = {}) {
    const int K = integ.K();
    const auto a = u0.resized(K), b = u1.resized(K);
    // eps is an L2 tolerance here, so the whole construction is run in L2
    SynthesisOptions so = o.synthesis;
    so.s = 0.0;
    FourierField phi;
    double theta = 0.5;
    for (int it = 0;; ++it, theta *= 0.5) {
        phi = log_ratio_phase(a, b, K, o.zero_tol, theta);
        FourierField capped(K, a.N());
        for (int k = 0; k <= std::min(o.cap, K); ++k) capped.set(k, phi[k]);
        if (l2_norm(exp_times(capped, a, K) - b) < 2.0 * eps / 3.0) break;
        if (it >= o.theta_halvings)
            throw ToleranceNotMet("steer_same_sign: band-limited phase misses u1 by more than 2 eps / 3",
                                  l2_norm(exp_times(capped, a, K) - b));
    }
    FourierField capped(K, a.N());
    for (int k = 0; k <= std::min(o.cap, K); ++k) capped.set(k, phi[k]);
    const double residual = l2_norm(phi - capped);
    if (residual >= eps / 10.0)
        throw ToleranceNotMet("steer_same_sign: phase content above the frequency cap", residual);
    // whatever the band-limited phase leaves of the budget goes to the stages
    const double miss = l2_norm(exp_times(capped, a, K) - b);
    const auto tree = realize(from_field(capped, o.cap));
    auto plan = reach_exponential(integ, a, tree, 0.9 * (eps - miss), T, so);
    plan.error_norm = "L2";
    plan.achieved_error = l2_norm(plan.terminal - b);
    return plan;
}

inline bool near_constant(const FourierField& u, double c) {
    if (std::abs(u[0].real() - c) > 1e-14 * std::max(1.0, std::abs(c))) return false;
    for (int k = 1; k <= u.K(); ++k)
        if (std::abs(u[k]) > 1e-14) return false;
    return true;
}

namespace detail {

// Steers a to the constant hub within Tp: a first steer_same_sign pass
// (loosened by coarse_factor until it goes through), then polish rounds. Each
// round holds for a while, so that the dynamics linearized at the hub damp
// the modes k >= 2, and then applies the frequency <= 1 part of the phase
// log(hub / w) as a single generator stage. What that leaves behind is
// quadratic in the deviation and decays in the next hold.
inline SteeringPlan steer_to_hub(const Integrator& integ, const FourierField& a, const FourierField& hub, double eps,
                                 double Tp, const SteerOptions& o) {
    SteeringPlan p;
    double e = eps;
    for (int j = 0;; ++j, e *= o.coarse_factor) {
        try {
            p = steer_same_sign(integ, a, hub, e, Tp, o);
            break;
        } catch (const ToleranceNotMet&) {
            if (j >= 3) throw;
        }
    }
    const int K = integ.K();
    FourierField w = p.terminal;
    double used = p.total_duration;
    const double settle = o.settle_fraction * Tp;
    SynthesisOptions so = o.synthesis;
    so.s = 0.0;
    for (int k = 0; k < o.polish_passes; ++k) {
        if (used + settle >= Tp) break;
        ControlSchedule hold(integ.profiles().size());
        hold.zero(settle);
        w = integ.flow(w, hold, settle).u;
        p.stages.push_back({"free", "settle", -1, {0, 0, 0}, settle, 0.0});
        used += settle;
        if (l2_norm(w - hub) < 0.1 * eps) break;
        const auto phi = log_ratio_phase(w, hub, K, o.zero_tol, 0.5);
        const std::array<double, 3> lambda{phi[0].real(), 2.0 * phi[1].real(), -2.0 * phi[1].imag()};
        PlanBuilder b(integ, so, Tp - used);
        try {
            w = b.reach_generator(w, lambda, 0.01 * eps / std::max(l2_norm(w), 1e-300), "nudge", 100 + k,
                                  b.remaining());
        } catch (const ToleranceNotMet&) {
            break;
        }
        p.stages.insert(p.stages.end(), b.stages.begin(), b.stages.end());
        used += b.spent;
    }
    p.terminal = w;
    p.total_duration = used;
    p.achieved_error = l2_norm(w - hub);
    return p;
}

}  // namespace detail

// u0 to u1 of one strict sign sg at exact horizon T: steer to sg within T/2,
// hold (constants are stationary), then steer from sg to u1 at the end. The
// error is measured in H^s.
inline SteeringPlan steer_with_hold(const Integrator& integ, const FourierField& u0, const FourierField& u1,
                                    double eps, double T, const SteerOptions& o = {}) {
    const int K = integ.K();
    const auto a = u0.resized(K), b = u1.resized(K);
    const double sg = a[0].real() < 0.0 ? -1.0 : 1.0;
    for (const auto* f : {&a, &b})
        for (double x : f->to_grid(detail::oversampled_size(f->N(), K)))
            if (!(sg * x > 0.0)) throw SignMismatch("steer_with_hold: u0 and u1 must share one strict sign");
    const auto one = FourierField::constant(sg, K, a.N());
    const int m = integ.profiles().size();
    // deviations from a constant do not grow during the hold, so the budget
    // is split only between the phases that are actually needed
    const int phases = int(!near_constant(a, sg)) + int(!near_constant(b, sg));
    double inner = 0.9 * eps / std::max(phases, 1);
    double best = INFINITY;
    for (int attempt = 0; attempt <= o.synthesis.eps_retries; ++attempt, inner *= 0.5) {
        try {
            SteeringPlan p1, p3;
            if (!near_constant(a, sg)) p1 = detail::steer_to_hub(integ, a, one, inner, T / 2, o);
            if (!near_constant(b, sg)) p3 = steer_same_sign(integ, one, b, inner, T / 2, o);
            const double hold = T - p1.total_duration - p3.total_duration;
            if (hold < 0.0) throw ToleranceNotMet("steer_with_hold: phases exceed the horizon", INFINITY);
            SteeringPlan plan;
            plan.error_norm = "H^s";
            plan.stages = p1.stages;
            if (hold > 0.0) plan.stages.push_back({"free", "hold", -1, {0, 0, 0}, hold, 0.0});
            for (auto st : p3.stages) {
                st.unit += 1000;
                plan.stages.push_back(st);
            }
            plan.schedule = compile_stages(plan.stages, m);
            plan.total_duration = T;
            plan.terminal = integ.flow(a, plan.schedule, T).u;
            plan.achieved_error = sobolev_norm(plan.terminal - b, o.synthesis.s);
            if (plan.achieved_error < eps) return plan;
            best = std::min(best, plan.achieved_error);
        } catch (const ToleranceNotMet& e) {
            best = std::min(best, e.achieved);
        }
    }
    throw ToleranceNotMet("steer_with_hold: no plan within eps", best);
}

}  // namespace bilinear
