// Acceptance suite: runs criteria 1 to 10, prints one PASS/FAIL line each and
// exits nonzero when any of them fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bilinear/bilinear.hpp"

using namespace bilinear;

namespace {

const double pi = std::acos(-1.0);

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [FAILED]");
    }
};

std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", x);
    return buf;
}

FourierField constant(double c, int K) { return FourierField::constant(c, K); }

// normalized real basis used by the linearized instances
FourierField c_(int k, int K) {
    if (k == 0) return constant(1.0 / std::sqrt(2 * pi), K);
    return cos_mode(k, K, 1.0 / std::sqrt(pi));
}
FourierField s_(int k, int K) { return sin_mode(k, K, 1.0 / std::sqrt(pi)); }

void criterion1(Outcome& o) {
    const int K = 64;
    const auto u0 = constant(1.0, K) + cos_mode(1, K, 0.1);
    const auto phi = constant(1.2, K) + sin_mode(1, K, 0.2);
    for (Model m : {Model::KS, Model::CH}) {
        const Integrator integ(m, standard_profiles(m, K));
        const auto rows = conjugated_limit_probe(integ, u0, phi, {0.3, 0, 0}, {1e-2, 5e-3, 2.5e-3}, 1.0);
        const std::string name = to_string(m);
        o.require(rows[1].error < rows[0].error && rows[2].error < rows[1].error,
                  name + " errors " + sci(rows[0].error) + " " + sci(rows[1].error) + " " + sci(rows[2].error) +
                      " monotone");
        o.require(rows[2].error < 0.5 * rows[0].error,
                  name + " ratio " + sci(rows[2].error / rows[0].error) + " < 0.5");
    }
}

void criterion2(Outcome& o) {
    ModeLadder ladder(5);
    int certified = 0;
    for (int n = 1; n <= 5; ++n) {
        const auto& w = ladder.get(n);
        for (const auto& [tree, target] : {std::pair{&w.cos_tree, TrigPolynomial::cos_k(n)},
                                           std::pair{&w.sin_tree, TrigPolynomial::sin_k(n)}}) {
            const auto c = certify_witness(*tree, target);
            if (c.exact && c.member && c.residual.is_zero()) ++certified;
        }
    }
    o.require(certified == 10, std::to_string(certified) + "/10 witnesses exact with certified membership");
}

void criterion3(Outcome& o) {
    const int K = 64;
    const auto u0 = constant(1.0, K) + sin_mode(1, K, 0.3);
    const auto u1 = constant(1.5, K) - cos_mode(1, K, 0.2);
    for (Model m : {Model::KS, Model::CH}) {
        const Integrator integ(m, standard_profiles(m, K));
        const auto plan = steer_same_sign(integ, u0, u1, 1e-1, 0.5);
        // replay the compiled schedule from scratch rather than trusting the plan's own figure
        const auto end = integ.flow(u0, plan.schedule, plan.schedule.total_duration()).u;
        const double err = l2_norm(end - u1);
        o.require(err < 1e-1, to_string(m) + " L2 error " + sci(err) + " < 1e-1");
        o.require(plan.schedule.total_duration() <= 0.5,
                  to_string(m) + " duration " + sci(plan.schedule.total_duration()) + " <= 0.5");
    }
}

void criterion4(Outcome& o) {
    const int K = 64;
    const double eps = 5e-2, T = 0.5;
    const auto u0 = constant(2.0, K), u1 = constant(0.5, K);
    for (Model m : {Model::KS, Model::CH}) {
        const Integrator integ(m, standard_profiles(m, K));
        const auto plan = steer_with_hold(integ, u0, u1, eps, T);
        const auto end = integ.flow(u0, plan.schedule, T).u;
        const double err = sobolev_norm(end - u1, 1.0);
        o.require(err < eps, to_string(m) + " H1 error " + sci(err) + " < " + sci(eps));
        o.require(plan.schedule.total_duration() == T, to_string(m) + " duration exactly " + sci(T));
    }
}

void criterion5(Outcome& o) {
    const auto sp = build_spectrum(LinearKind::CH_lin, 1.0, 10);
    const auto fam = biorthogonal_family(sp.Lambda, 0.5);
    o.require(fam.defect < 1e-8, "CH count 10 defect " + sci(fam.defect) + " < 1e-8");

    // 2x2 oracle: Lambda = 1, 2 on T = 1, inverse of the Gram matrix in long double
    const long double g11 = (1 - std::exp(-2.0L)) / 2, g12 = (1 - std::exp(-3.0L)) / 3,
                      g22 = (1 - std::exp(-4.0L)) / 4;
    const long double det = g11 * g22 - g12 * g12;
    const long double inv[2][2] = {{g22 / det, -g12 / det}, {-g12 / det, g11 / det}};
    const auto two = biorthogonal_family({{1.0, 0.0}, {2.0, 0.0}}, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 2; ++j) {
            const double got = two.C[k][j].re.convert_to<double>();
            worst = std::max(worst, std::abs(got - double(inv[k][j])) / std::abs(double(inv[k][j])));
        }
    o.require(worst < 1e-12, "2x2 closed form relative mismatch " + sci(worst) + " < 1e-12");
}

void criterion6(Outcome& o) {
    const int K = 16;
    const auto mu4 = quartic_bump_profile(K), mu5 = cubic_odd_profile(K);
    const auto v0 = c_(0, K) + 0.5 * c_(1, K) + 0.3 * s_(2, K);
    const auto m = moment_control_CH(v0, 1.0, mu4, mu5, 0.5, 8);
    o.require(m.terminal_residual < 1e-3, "CH moment terminal residual " + sci(m.terminal_residual) + " < 1e-3");
    const LinearModel lm{LinearKind::CH_lin, 1.0, {mu4, mu5}};
    const auto g = gramian_null_control(lm, v0, 0.5, 8);
    o.require(g.control.replay_error < 1e-10, "oracle residual " + sci(g.control.replay_error) + " < 1e-10");
    o.require(g.control.l2_norm <= m.control.l2_norm * (1 + 1e-9),
              "oracle norm " + sci(g.control.l2_norm) + " <= moment norm " + sci(m.control.l2_norm));

    // KS pairings of mu4 = x^2 (x - 2pi)^2 by composite Gauss quadrature
    const auto rule = composite_rule(graded_mesh(2 * pi, 0.05, 0.05, 0.05, 1.0), 16);
    const auto field = quartic_bump_profile(K);
    double worst = 0.0, worst_stored = 0.0;
    for (int k = 1; k <= 8; ++k) {
        cplx acc = 0.0;
        for (std::size_t q = 0; q < rule.t.size(); ++q) {
            const double x = rule.t[q];
            acc += rule.w[q] * x * x * (x - 2 * pi) * (x - 2 * pi) * std::exp(cplx(0.0, -k * x));
        }
        acc /= std::sqrt(2 * pi);
        const cplx expect(-24.0 * std::sqrt(2 * pi) / std::pow(k, 4), 0.0);
        worst = std::max(worst, std::abs(acc - expect));
        worst_stored = std::max(worst_stored, std::abs(std::sqrt(2 * pi) * field[k] - expect));
    }
    o.require(worst < 1e-8, "KS mu4 pairings vs -24 sqrt(2pi)/k^4 " + sci(worst) + " < 1e-8");
    o.require(worst_stored < 1e-8, "stored mu4 coefficients " + sci(worst_stored) + " < 1e-8");
    const auto ks = moment_control_KS(cos_mode(1, K, 0.1), 1.0, mu4, 0.5, 9);
    o.require(ks.terminal_residual < 1e-3, "KS moment terminal residual " + sci(ks.terminal_residual) + " < 1e-3");
}

void criterion7(Outcome& o) {
    const int K = 16;
    const auto mu4 = quartic_bump_profile(K), mu5 = cubic_odd_profile(K);
    const auto v0 = c_(0, K) + 0.5 * c_(1, K) + 0.3 * s_(2, K);
    const std::vector<double> Ts{0.5, 0.35, 0.2};
    for (Model m : {Model::CH, Model::KS}) {
        std::vector<double> n;
        for (double T : Ts)
            n.push_back(m == Model::CH ? moment_control_CH(v0, 1.0, mu4, mu5, T, 8).control.l2_norm
                                       : moment_control_KS(v0, 1.0, mu4, T, 9).control.l2_norm);
        const std::string name = to_string(m);
        o.require(n[0] < n[1] && n[1] < n[2],
                  name + " norms " + sci(n[0]) + " " + sci(n[1]) + " " + sci(n[2]) + " increasing");
        // slopes of log norm against 1/T over the two consecutive pairs
        const double s1 = (std::log(n[1]) - std::log(n[0])) / (1 / Ts[1] - 1 / Ts[0]);
        const double s2 = (std::log(n[2]) - std::log(n[1])) / (1 / Ts[2] - 1 / Ts[1]);
        o.require(s1 > 0 && s2 >= s1, name + " log-norm slopes " + sci(s1) + " " + sci(s2) + " convex increasing");
    }
}

void criterion8(Outcome& o) {
    const int K = 32;
    const auto u0 = constant(1.0, K) + cos_mode(1, K, 1e-3);
    const auto r = local_exact_to_constant(Model::CH, u0, 1.0, 0.5);
    double worst = 0.0;
    for (std::size_t i = 1; i < r.log.size(); ++i) worst = std::max(worst, r.log[i].ratio);
    o.require(r.log.size() >= 2 && worst < 0.5,
              std::to_string(r.sweeps) + " sweeps, largest ratio from sweep 2 " + sci(worst) + " < 0.5");
    // independent re-simulation of the returned schedule
    const Integrator integ(Model::CH, standard_profiles(Model::CH, K));
    const auto end = integ.flow(u0, r.schedule, 0.5).u;
    const double err = l2_norm(end - constant(1.0, K));
    o.require(err < 1e-5, "terminal L2 error " + sci(err) + " < 1e-5");
}

void criterion9(Outcome& o) {
    const int K = 32;
    const auto u0 = constant(2.0, K) + sin_mode(1, K, 0.5);
    for (Model m : {Model::CH, Model::KS}) {
        const auto set = standard_profiles(m, K);
        const auto g = global_to_constant(m, u0, 1.0, 1.0);
        const Integrator integ(m, set);
        const auto end = integ.flow(u0, g.schedule, 1.0).u;
        const double err = l2_norm(end - constant(1.0, K));
        const std::string name = to_string(m) + " (" + std::to_string(set.size()) + " profiles)";
        o.require(std::abs(g.schedule.total_duration() - 1.0) < 1e-12, name + " horizon 1");
        o.require(err < 1e-4, name + " terminal L2 error " + sci(err) + " < 1e-4, uncontrolled tail " +
                                  sci(g.phase2.tail_residual));
    }
}

void criterion10(Outcome& o) {
    const int K = 24;
    double mean_drift = 0.0;
    for (Model m : {Model::KS, Model::CH}) {
        FlowOptions fo;
        fo.sample_dt = 0.05;
        const Integrator integ(m, standard_profiles(m, K), fo);
        const auto u0 = constant(0.7, K) + cos_mode(1, K, 0.8) + sin_mode(3, K, 0.3);
        for (const auto& s : integ.flow(u0, ControlSchedule(), 0.5).report.samples)
            mean_drift = std::max(mean_drift, std::abs(s[0].real() - 0.7));
    }
    o.require(mean_drift < 1e-10, "mean drift " + sci(mean_drift) + " < 1e-10");

    std::mt19937 gen(7);
    std::uniform_real_distribution<double> dur(0.005, 0.03), val(-1.0, 1.0);
    auto random_schedule = [&](int channels, int segments) {
        ControlSchedule s(channels);
        for (int i = 0; i < segments; ++i) {
            Vec v(channels);
            for (double& x : v) x = val(gen);
            s.constant(dur(gen), v);
        }
        return s;
    };
    double semigroup = 0.0;
    for (Model m : {Model::KS, Model::CH}) {
        const auto set = standard_profiles(m, K);
        const Integrator integ(m, set);
        const auto u0 = constant(1.0, K) + sin_mode(1, K, 0.1);
        for (int trial = 0; trial < 20; ++trial) {
            const auto p = random_schedule(set.size(), 1 + trial % 3);
            const auto q = random_schedule(set.size(), 1 + trial % 2);
            const auto pq = concatenate(p, q);
            const auto one = integ.flow(u0, pq, pq.total_duration()).u;
            const auto two = integ.flow(integ.flow(u0, p, p.total_duration()).u, q, q.total_duration()).u;
            semigroup = std::max(semigroup, l2_norm(one - two));
        }
    }
    o.require(semigroup < 1e-8, "concatenation defect over 20 schedules per model " + sci(semigroup) + " < 1e-8");

    double decay = 0.0;
    for (LinearKind kind : {LinearKind::CH_lin, LinearKind::KS_lin}) {
        const LinearModel lm{kind, 1.0, {}};
        FourierField v0(10);
        for (int k = 0; k <= 10; ++k) v0.set(k, {1.0 / (k + 1), 0.5 - 0.1 * k});
        const double t = 0.37;
        const auto v = flow_linearized(lm, v0, ControlSchedule(), t).v;
        for (int k = 0; k <= 10; ++k) {
            const cplx expect = std::exp(lm.rate(k) * t) * v0[k];
            if (std::abs(expect) < 1e-300) continue;
            decay = std::max(decay, std::abs(v[k] - expect) / std::abs(expect));
        }
    }
    o.require(decay < 1e-12, "per-mode decay relative error " + sci(decay) + " < 1e-12");

    for (Model m : {Model::KS, Model::CH}) {
        const Integrator integ(m, standard_profiles(m, K));
        const auto u0 = constant(1.0, K);
        std::vector<double> r;
        for (double eps : {1e-4, 5e-5, 2.5e-5})
            r.push_back(stability_probe(integ, u0, u0 + sin_mode(1, K, eps), ControlSchedule(), 0.05));
        const double spread = *std::max_element(r.begin(), r.end()) / *std::min_element(r.begin(), r.end());
        o.require(std::isfinite(spread) && spread < 2.0,
                  to_string(m) + " stability ratios " + sci(r[0]) + " " + sci(r[1]) + " " + sci(r[2]) + " bounded");
    }
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double limit_s;  // 0: no runtime bound
        std::function<void(Outcome&)> run;
    };
    const std::vector<Criterion> all{
        {1, "conjugated-limit convergence", 60, criterion1},
        {2, "saturation witnesses", 10, criterion2},
        {3, "staged synthesis", 300, criterion3},
        {4, "hold-at-1 pipeline", 0, criterion4},
        {5, "biorthogonality", 0, criterion5},
        {6, "linearized null control", 0, criterion6},
        {7, "cost law", 0, criterion7},
        {8, "local exact fixed point", 0, criterion8},
        {9, "global pipeline", 900, criterion9},
        {10, "dynamics invariants", 0, criterion10},
    };
    int failed = 0;
    for (const auto& c : all) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(o);
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.limit_s > 0) o.require(secs < c.limit_s, "runtime " + sci(secs) + " s < " + sci(c.limit_s) + " s");
        std::printf("criterion %2d %-30s %s  (%.1f s) %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", secs,
                    o.detail.str().c_str());
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    std::printf("%d of %zu criteria passed\n", int(all.size()) - failed, all.size());
    return failed == 0 ? 0 : 1;
}
