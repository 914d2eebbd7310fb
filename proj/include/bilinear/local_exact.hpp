#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "bilinear/dynamics.hpp"
#include "bilinear/error.hpp"
#include "bilinear/moment.hpp"
#include "bilinear/profiles.hpp"
#include "bilinear/quadrature.hpp"
#include "bilinear/schedule.hpp"
#include "bilinear/synthesis.hpp"
#include "bilinear/trig_field.hpp"
#include "json.hpp"

namespace bilinear {

// rho_0(t) = exp(-p M / ((q-1)(T-t))), rho_F(t) = exp(-(1+p) q^2 M / ((q-1)(T-t))).
struct WeightPair {
    double q = 1.2, p = 3.0, M = 1.0, T = 1.0;

    bool admissible() const {
        return q > 1.0 && q * q < 2.0 && p > q * q / (2.0 - q * q) && M > 0.0 && T > 0.0;
    }
    double a0() const { return p * M / (q - 1.0); }
    double aF() const { return (1.0 + p) * q * q * M / (q - 1.0); }
    double rho0(double t) const { return t >= T ? 0.0 : std::exp(-a0() / (T - t)); }
    double rhoF(double t) const { return t >= T ? 0.0 : std::exp(-aF() / (T - t)); }

    // rho_0^j / rho_F = exp(-(j a0 - aF) / (T - t)); with j a0 > aF this
    // decreases in t, so the maximum sits at t = 0.
    double max_ratio(int j) const {
        const double e = j * a0() - aF();
        return e >= 0.0 ? std::exp(-e / T) : std::numeric_limits<double>::infinity();
    }
    // Last time at which rho_F is still above 1e-150; weighted norms are
    // evaluated on [0, window()] since dividing by rho_F overflows near T.
    double window() const { return std::max(0.0, T - aF() / (150.0 * std::log(10.0))); }
};

// Nonlinear remainder of the equation written around Phi, v = u - Phi:
// d^2(3 Phi v^2 + v^3) for CH and -v v_x for KS.
inline FourierField nonlinear_source(Model model, const FourierField& v, double Phi) {
    const int K = v.K();
    if (model == Model::KS) return -0.5 * derivative(product(v, v), 1);
    const int M = std::max(v.N(), fft::good_size(4 * K + 2));
    auto a = v.to_grid(M);
    for (double& x : a) x = x * x * (3.0 * Phi + x);
    return derivative(FourierField::from_grid(a, K, v.N()), 2);
}

// Adds the bilinear remainder (sum_i p_i mu_i) v.
inline FourierField nonlinear_source(Model model, const FourierField& v, double Phi,
                                     const std::vector<FourierField>& inputs, const Vec& p) {
    FourierField f = nonlinear_source(model, v, Phi);
    FourierField q(v.K(), v.N());
    for (std::size_t i = 0; i < inputs.size() && i < p.size(); ++i)
        if (p[i] != 0.0) q += p[i] * inputs[i].resized(v.K());
    if (l2_norm(q) > 0.0) f += product(q, v);
    return f;
}

struct SweepLog {
    int sweep = 0;
    double update = 0.0;
    double ratio = std::numeric_limits<double>::quiet_NaN();
    double source_norm = 0.0;
    double weighted_v = 0.0, weighted_f = 0.0;
    double terminal_residual = 0.0;
    double control_norm = 0.0;
};

struct LocalOptions {
    MomentOptions moment;
    int count = 0;             // 0: 8 for CH, 9 for KS
    WeightPair weights{1.2, 3.0, 0.0};  // M <= 0 asks for a fit from moment-control costs
    double tolerance = 1e-9;   // on the update, relative to the source size
    int max_sweeps = 30;
    int bad_ratio_limit = 3;
    FlowOptions flow;
    std::function<void(const SweepLog&)> on_sweep;  // called after every sweep
};

inline int default_count(Model m) { return m == Model::CH ? 8 : 9; }
inline LinearKind linear_kind(Model m) { return m == Model::CH ? LinearKind::CH_lin : LinearKind::KS_lin; }

// Linearized inputs: mu_4, mu_5 for CH and mu_4 for KS, taken from the full set.
inline LinearModel linear_model(Model model, double Phi, const ControlProfileSet& set) {
    LinearModel lm{linear_kind(model), Phi, {set[3]}};
    if (model == Model::CH) lm.inputs.push_back(set[4]);
    return lm;
}

struct SourceSolve {
    LinearControl control;
    FourierField terminal;
    std::vector<double> times;        // node times, sorted
    std::vector<FourierField> states; // v at those times
    double terminal_residual = 0.0;   // controlled modes, relative to peak ||v||
    double tail_residual = 0.0;
    double peak = 0.0;
};

namespace detail {

inline std::vector<double> node_times(const std::vector<double>& mesh, int degree) {
    const auto s = poly::lobatto_nodes(degree);
    std::vector<double> t;
    for (std::size_t i = 0; i + 1 < mesh.size(); ++i) {
        const double a = mesh[i], h = mesh[i + 1] - mesh[i];
        for (double si : s) t.push_back(a + h * si);
    }
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

// Nearest recorded sample; panel ends computed as a + h may differ from the
// next mesh point in the last bit.
inline const FourierField& nearest(const std::vector<double>& t, const std::vector<FourierField>& v, double x) {
    auto it = std::lower_bound(t.begin(), t.end(), x);
    std::size_t i = static_cast<std::size_t>(it - t.begin());
    if (i == t.size()) --i;
    else if (i > 0 && std::abs(t[i - 1] - x) < std::abs(t[i] - x)) --i;
    return v[i];
}

inline std::vector<double> source_mesh(const LinearModel& lm, double T, int count, const MomentOptions& o) {
    const auto s = build_spectrum(lm.kind, lm.Phi, count);
    double fastest = 0.0;
    for (const auto& L : s.Lambda) fastest = std::max(fastest, std::abs(L + 1.0));
    return control_mesh(T, fastest, o);
}

inline double path_l2(const FieldPath* a, const FieldPath* b, const CompositeRule& rule) {
    double acc = 0.0;
    for (std::size_t q = 0; q < rule.t.size(); ++q) {
        const bool ha = a && !a->empty(), hb = b && !b->empty();
        if (!ha && !hb) continue;
        const double n = !hb ? l2_norm(a->value(rule.t[q]))
                       : !ha ? l2_norm(b->value(rule.t[q]))
                             : l2_norm(a->value(rule.t[q]) - b->value(rule.t[q]));
        acc += rule.w[q] * n * n;
    }
    return std::sqrt(acc);
}

inline double weighted_l2(const FieldPath& f, const CompositeRule& rule, const std::function<double(double)>& rho,
                          double window) {
    double acc = 0.0;
    for (std::size_t q = 0; q < rule.t.size(); ++q) {
        if (rule.t[q] > window) continue;
        const double n = l2_norm(f.value(rule.t[q])) / rho(rule.t[q]);
        acc += rule.w[q] * n * n;
    }
    return std::sqrt(acc);
}

// Places the linearized channels (mu_4[, mu_5]) at positions 3[, 4] of a
// schedule over the full profile set.
inline ControlSchedule embed_channels(const ControlSchedule& s, int channels, int offset) {
    ControlSchedule out(channels);
    for (const auto& seg : s.pieces().segments()) {
        std::vector<Vec> c;
        for (const auto& v : seg.coeffs) {
            Vec w(channels, 0.0);
            for (std::size_t i = 0; i < v.size(); ++i) w[offset + i] = v[i];
            c.push_back(w);
        }
        out.polynomial(seg.duration, c);
    }
    return out;
}

}  // namespace detail

// v' = A v + Phi (p . mu) + f with v(T) = 0 on the controlled modes. The free
// terminal state of the source-driven problem is computed once, then a
// single moment control cancels it.
inline SourceSolve controlled_solve_with_source(const LinearModel& lm, const FourierField& v0, const FieldPath& f,
                                                double T, int count, const MomentOptions& o = {}) {
    const FieldPath* src = f.empty() ? nullptr : &f;
    const FourierField d = flow_linearized(lm, v0, ControlSchedule(), T, src).v;
    SourceSolve r;
    r.control = moment_solve(lm, T, count, d, o);
    r.times = detail::node_times(r.control.mesh, o.degree);
    auto run = flow_linearized(lm, v0, r.control.schedule, T, src, r.times);
    r.terminal = run.v;
    r.states = std::move(run.samples);
    if (r.states.size() != r.times.size()) throw NumericError("controlled_solve_with_source: sampling mismatch");
    for (const auto& s : r.states) r.peak = std::max(r.peak, l2_norm(s));
    double in = 0.0, out = 0.0;
    for (int k = 0; k <= r.terminal.K(); ++k) {
        const double e = (k == 0 ? 1.0 : 2.0) * std::norm(r.terminal[k]) / two_pi;
        (controlled_mode(r.control.spectrum, k) ? in : out) += e;
    }
    const double scale = r.peak > 0.0 ? r.peak : 1.0;
    r.terminal_residual = std::sqrt(in) / scale;
    r.tail_residual = std::sqrt(out) / scale;
    return r;
}


struct LocalExactResult {
    Model model = Model::CH;
    double Phi = 1.0, T = 0.0;
    int count = 0;
    ControlSchedule schedule;   // over the full profile set
    LinearControl control;
    WeightPair weights;
    bool M_fitted = false;
    std::vector<SweepLog> log;
    int sweeps = 0;
    double internal_estimate = 0.0;  // ||v(T)|| of the last linear solve
    double tail_residual = 0.0;
    FourierField terminal;
    double terminal_error = 0.0;     // ||u(T) - Phi|| from the nonlinear re-simulation

    nlohmann::json to_json() const {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& s : log)
            rows.push_back({{"sweep", s.sweep}, {"update", s.update},
                            {"ratio", std::isfinite(s.ratio) ? nlohmann::json(s.ratio) : nlohmann::json(nullptr)},
                            {"source_norm", s.source_norm}, {"weighted_v", s.weighted_v},
                            {"weighted_f", s.weighted_f}, {"terminal_residual", s.terminal_residual},
                            {"control_norm", s.control_norm}});
        return {{"model", to_string(model)}, {"Phi", Phi}, {"T", T}, {"count", count}, {"sweeps", sweeps},
                {"internal_estimate", internal_estimate}, {"tail_residual", tail_residual},
                {"terminal_error", terminal_error},
                {"weights", {{"q", weights.q}, {"p", weights.p}, {"M", weights.M}, {"M_fitted", M_fitted},
                             {"max_rho0_sq_over_rhoF", weights.max_ratio(2)},
                             {"max_rho0_cube_over_rhoF", weights.max_ratio(3)}, {"window", weights.window()}}},
                {"iterations", rows}};
    }
};

// Fits log ||p|| = a + M / T from the homogeneous problem at T, 0.7T, 0.4T.
inline double fit_cost_constant(const LinearModel& lm, const FourierField& v0, double T, int count,
                                const MomentOptions& o) {
    std::vector<double> Ts{T, 0.7 * T, 0.4 * T}, norms;
    for (double t : Ts) norms.push_back(moment_solve(lm, t, count, free_terminal_state(lm, v0, t), o).l2_norm);
    return fit_cost_law(Ts, norms).M;
}

inline LocalExactResult local_exact_to_constant(Model model, const FourierField& u0, double Phi, double T,
                                                LocalOptions o = {}) {
    if (Phi == 0.0) throw ConfigError("local_exact: Phi must be nonzero");
    if (!(T > 0.0)) throw ConfigError("local_exact: T must be positive");
    const int K = u0.K();
    const auto set = standard_profiles(model, K, u0.N());
    const LinearModel lm = linear_model(model, Phi, set);
    LocalExactResult r;
    r.model = model;
    r.Phi = Phi;
    r.T = T;
    r.count = o.count > 0 ? o.count : default_count(model);
    r.schedule = ControlSchedule(set.size());
    const FourierField v0 = u0 - FourierField::constant(Phi, K, u0.N());
    r.weights = o.weights;
    r.weights.T = T;

    if (near_constant(u0, Phi)) {
        r.schedule.zero(T);
        r.terminal = u0;
        if (!(r.weights.M > 0.0)) r.weights.M = 1.0;
        return r;
    }
    if (!(r.weights.M > 0.0)) {
        r.weights.M = std::max(fit_cost_constant(lm, v0, T, r.count, o.moment), 1e-3);
        r.M_fitted = true;
    }
    if (!r.weights.admissible()) throw ConfigError("local_exact: inadmissible weight parameters");

    const auto mesh = detail::source_mesh(lm, T, r.count, o.moment);
    const auto rule = composite_rule(mesh, o.moment.quad_points);
    const auto rho0 = [&](double t) { return r.weights.rho0(t); };
    const auto rhoF = [&](double t) { return r.weights.rhoF(t); };
    const double window = r.weights.window();

    FieldPath f;
    double prev_update = std::numeric_limits<double>::quiet_NaN();
    int bad = 0;
    bool converged = false;
    SourceSolve sol;
    for (int n = 1; n <= o.max_sweeps; ++n) {
        sol = controlled_solve_with_source(lm, v0, f, T, r.count, o.moment);
        const auto& times = sol.times;
        const auto& states = sol.states;
        const auto& sched = sol.control.schedule;
        FieldPath next = sample_field_path(
            mesh,
            [&](double t) {
                return nonlinear_source(model, detail::nearest(times, states, t), Phi, lm.inputs, sched.value(t));
            },
            o.moment.degree);
        const FieldPath vpath = sample_field_path(
            mesh, [&](double t) { return detail::nearest(times, states, t); }, o.moment.degree);

        SweepLog row;
        row.sweep = n;
        row.update = detail::path_l2(&next, &f, rule);
        row.source_norm = detail::path_l2(&next, nullptr, rule);
        row.ratio = n > 1 ? row.update / prev_update : std::numeric_limits<double>::quiet_NaN();
        row.weighted_v = detail::weighted_l2(vpath, rule, rho0, window);
        row.weighted_f = detail::weighted_l2(next, rule, rhoF, window);
        row.terminal_residual = sol.terminal_residual;
        row.control_norm = sol.control.l2_norm;
        r.log.push_back(row);
        r.sweeps = n;
        if (o.on_sweep) o.on_sweep(row);

        if (!std::isfinite(row.update))
            throw NoContraction("local_exact: source update is not finite", n);
        if (n > 1 && !(row.ratio < 1.0)) {
            if (++bad >= o.bad_ratio_limit)
                throw NoContraction("local_exact: update ratio >= 1 for " + std::to_string(bad) + " sweeps", n);
        } else {
            bad = 0;
        }
        f = std::move(next);
        prev_update = row.update;
        if (row.update <= o.tolerance * std::max(row.source_norm, std::numeric_limits<double>::min())) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NoContraction("local_exact: no convergence within the sweep limit", r.sweeps);

    // controls consistent with the converged source
    sol = controlled_solve_with_source(lm, v0, f, T, r.count, o.moment);
    r.control = sol.control;
    r.internal_estimate = l2_norm(sol.terminal);
    r.tail_residual = sol.tail_residual;
    r.schedule = detail::embed_channels(sol.control.schedule, set.size(), 3);

    const Integrator integ(model, set, o.flow);
    r.terminal = integ.flow(u0, r.schedule, T).u;
    r.terminal_error = l2_norm(r.terminal - FourierField::constant(Phi, K, u0.N()));
    return r;
}

// ---- global pipeline --------------------------------------------------------

inline double default_radius(Model m) { return m == Model::CH ? 1e-2 : 5e-4; }

struct GlobalOptions {
    // L2 distance to Phi at which the local phase takes over; 0 picks the
    // model default (empirical basins at Phi = 1 over a local horizon of 0.5)
    double radius = 0.0;
    int radius_retries = 3;
    SteerOptions steer;
    LocalOptions local;
};

struct GlobalResult {
    ControlSchedule schedule;
    SteeringPlan phase1;
    LocalExactResult phase2;
    double phase1_distance = 0.0;
    FourierField terminal;
    double terminal_error = 0.0;

    nlohmann::json to_json() const {
        return {{"phase1", phase1.to_json()}, {"phase1_distance", phase1_distance}, {"phase2", phase2.to_json()},
                {"schedule", schedule.to_json()}, {"terminal_error", terminal_error}};
    }
};

// Steer to a neighbourhood of Phi on [0, T/2], then close exactly on [T/2, T].
inline GlobalResult global_to_constant(Model model, const FourierField& u0, double Phi, double T,
                                       const GlobalOptions& o = {}) {
    if (Phi == 0.0) throw ConfigError("global_to_constant: Phi must be nonzero");
    const int K = u0.K();
    const auto set = standard_profiles(model, K, u0.N());
    const Integrator integ(model, set, o.local.flow);
    const auto target = FourierField::constant(Phi, K, u0.N());
    for (double x : u0.to_grid(detail::oversampled_size(u0.N(), K)))
        if (!(x * Phi > 0.0)) throw SignMismatch("global_to_constant: u0 and Phi must share one strict sign");

    GlobalResult g;
    if (near_constant(u0, Phi)) {
        g.schedule = ControlSchedule(set.size());
        g.schedule.zero(T);
        g.terminal = u0;
        return g;
    }
    const double radius = o.radius > 0.0 ? o.radius : default_radius(model);
    double eps = radius;
    double best = std::numeric_limits<double>::infinity();
    bool inside = false;
    for (int a = 0; a <= o.radius_retries && !inside; ++a, eps *= 0.5) {
        try {
            g.phase1 = steer_with_hold(integ, u0, target, eps, T / 2, o.steer);
        } catch (const ToleranceNotMet& e) {
            best = std::min(best, e.achieved);
            continue;
        }
        g.phase1_distance = l2_norm(g.phase1.terminal - target);
        best = std::min(best, g.phase1_distance);
        inside = g.phase1_distance < radius;
    }
    if (!inside) throw RadiusNotReached("global_to_constant: phase 1 stays outside the local radius", best);

    g.phase2 = local_exact_to_constant(model, g.phase1.terminal, Phi, T / 2, o.local);
    g.schedule = concatenate(g.phase1.schedule, g.phase2.schedule);
    g.terminal = integ.flow(u0, g.schedule, T).u;
    g.terminal_error = l2_norm(g.terminal - target);
    return g;
}

struct BasinRow {
    double amplitude = 0.0;
    bool converged = false;
    int sweeps = 0;
    double terminal_error = std::numeric_limits<double>::quiet_NaN();
    std::string failure;
};

// Doubles the amplitude of Phi + a * direction from `start` until the local
// loop stops converging (or misses `accept`). The last converged amplitude
// is the empirical radius.
inline std::vector<BasinRow> probe_basin(Model model, double Phi, double T, const FourierField& direction,
                                         const LocalOptions& o = {}, double start = 1e-3, int max_doublings = 12,
                                         double accept = 1e-5) {
    std::vector<BasinRow> rows;
    double a = start;
    for (int i = 0; i <= max_doublings; ++i, a *= 2.0) {
        BasinRow row;
        row.amplitude = a;
        try {
            const auto u0 = FourierField::constant(Phi, direction.K(), direction.N()) + a * direction;
            const auto res = local_exact_to_constant(model, u0, Phi, T, o);
            row.sweeps = res.sweeps;
            row.terminal_error = res.terminal_error;
            row.converged = res.terminal_error < accept;
            if (!row.converged) row.failure = "terminal error above acceptance";
        } catch (const Error& e) {
            row.failure = e.what();
        }
        rows.push_back(row);
        if (!row.converged) break;
    }
    return rows;
}

// Symmetries used for negative targets. CH: u -> -u with the same control.
// KS: u(x) -> -u(-x), which flips the sin x channel.
inline FourierField mirror_field(Model model, const FourierField& u) {
    if (model == Model::CH) return -u;
    FourierField w(u.K(), u.N());
    for (int k = 0; k <= u.K(); ++k) w.set(k, -std::conj(u[k]));
    return w;
}

inline ControlSchedule mirror_schedule(Model model, const ControlSchedule& s) {
    if (model == Model::CH) return s;
    ControlSchedule out(s.channels());
    for (const auto& seg : s.pieces().segments()) {
        std::vector<Vec> c = seg.coeffs;
        for (auto& v : c)
            if (v.size() > 2) v[2] = -v[2];
        out.polynomial(seg.duration, c);
    }
    return out;
}

}  // namespace bilinear
