// Scenario runner: one subcommand per experiment, every run writes its
// tables, a manifest.json and a scenario.ini that replays it.
//
// Exit codes: 0 pass, 2 configuration error, 3 numeric failure, 4 a
// declared check failed.

#include <CLI11.hpp>
#include <fftw3.h>
#include <gmp.h>
#include <mpfr.h>

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "bilinear/bilinear.hpp"

#ifndef BILINEAR_VERSION
#define BILINEAR_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bilinear;

namespace {

constexpr int exit_config = 2, exit_numeric = 3, exit_check = 4;

// ---- run context -----------------------------------------------------------

class Run {
public:
    Run(std::string subcommand, fs::path dir) : sub_(std::move(subcommand)), dir_(std::move(dir)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw ConfigError("cannot create output directory " + dir_.string() + ": " + ec.message());
    }

    void write(const std::string& name, const std::string& content) {
        std::ofstream os(dir_ / name, std::ios::binary);
        if (!os) throw ConfigError("cannot write " + (dir_ / name).string());
        os << content;
        if (std::find(outputs_.begin(), outputs_.end(), name) == outputs_.end()) outputs_.push_back(name);
    }
    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

    void check(const std::string& name, bool ok, json detail = json::object()) {
        detail["pass"] = ok;
        checks_[name] = std::move(detail);
        if (!ok) failed_ = true;
    }
    bool failed() const { return failed_; }

    void finish(const std::string& scenario_ini, const json& options, const std::string& status,
                const std::string& message) {
        write("scenario.ini", scenario_ini);
        json m;
        m["tool"] = "bilinear_cli";
        m["subcommand"] = sub_;
        m["versions"] = {{"bilinear", BILINEAR_VERSION},
                         {"compiler", __VERSION__},
                         {"fftw", std::string(fftw_version)},
                         {"mpfr", std::string(mpfr_get_version())},
                         {"gmp", std::string(gmp_version)}};
        m["options"] = options;
        m["scenario"] = scenario_ini;
        m["checks"] = checks_;
        m["status"] = status;
        if (!message.empty()) m["message"] = message;
        m["outputs"] = outputs_;
        std::ofstream os(dir_ / "manifest.json", std::ios::binary);
        os << m.dump(2) << "\n";
    }

private:
    std::string sub_;
    fs::path dir_;
    std::vector<std::string> outputs_;
    json checks_ = json::object();
    bool failed_ = false;
};

// ---- parsing helpers ---------------------------------------------------------

std::vector<double> number_list(const std::string& text, const std::string& what) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item.substr(b, e - b + 1), &used));
            if (used != e - b + 1) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError(what + ": '" + item + "' is not a number");
        }
    }
    return v;
}

std::array<double, 3> triple(const std::string& text, const std::string& what) {
    const auto v = number_list(text, what);
    if (v.size() != 3) throw ConfigError(what + " needs three comma separated values");
    return {v[0], v[1], v[2]};
}

std::vector<Model> models(const std::string& text) {
    if (text == "both") return {Model::KS, Model::CH};
    return {parse_model(text)};
}

std::string csv_row(std::initializer_list<std::string> cells) {
    std::string s;
    for (const auto& c : cells) s += (s.empty() ? "" : ",") + c;
    return s + "\n";
}
std::string num(double x) { return fmt17(x); }

std::string field_csv(const FourierField& f) {
    std::ostringstream os;
    write_field_csv(os, f);
    return os.str();
}

// rows t,k,re,im for k = 0..K at the recorded sample times
std::string trajectory_csv(const SolveReport& rep) {
    std::string s = "t,k,re,im\n";
    for (std::size_t i = 0; i < rep.times.size(); ++i)
        for (int k = 0; k <= rep.samples[i].K(); ++k) {
            const cplx z = rep.samples[i][k];
            s += csv_row({num(rep.times[i]), std::to_string(k), num(z.real()), num(z.imag())});
        }
    return s;
}

std::string stages_csv(const SteeringPlan& p) {
    std::string s = "index,kind,role,unit,tau,lambda0,lambda1,lambda2,stage_error\n";
    for (std::size_t i = 0; i < p.stages.size(); ++i) {
        const auto& st = p.stages[i];
        s += csv_row({std::to_string(i), st.kind, st.role, std::to_string(st.unit), num(st.tau), num(st.lambda[0]),
                      num(st.lambda[1]), num(st.lambda[2]), num(st.error)});
    }
    return s;
}

std::string iterations_csv(const std::vector<SweepLog>& log) {
    std::string s = "sweep,update,ratio,source_norm,weighted_v,weighted_f,terminal_residual,control_norm\n";
    for (const auto& r : log)
        s += csv_row({std::to_string(r.sweep), num(r.update), std::isfinite(r.ratio) ? num(r.ratio) : "",
                      num(r.source_norm), num(r.weighted_v), num(r.weighted_f), num(r.terminal_residual),
                      num(r.control_norm)});
    return s;
}

// Order-stable parallel map: results land at their index whatever the
// scheduling; the first exception in index order is rethrown.
template <class R, class F>
std::vector<R> parallel_map(std::size_t n, int threads, F f) {
    std::vector<R> out(n);
    std::vector<std::exception_ptr> err(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next++) < n;) {
            try {
                out[i] = f(i);
            } catch (...) {
                err[i] = std::current_exception();
            }
        }
    };
    const int t = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    std::vector<std::thread> pool;
    for (int i = 1; i < t; ++i) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    for (auto& e : err)
        if (e) std::rethrow_exception(e);
    return out;
}

// ---- options -----------------------------------------------------------------

struct Common {
    std::string model = "KS";
    int K = 64;
    int N = 0;
    double s = 1.0;
    std::string out = "out";
    int threads = 1;
};

void add_common(CLI::App* app, Common& c, const std::string& model_default) {
    c.model = model_default;
    app->add_option("--model", c.model, "KS or CH")->capture_default_str();
    app->add_option("--K", c.K, "Fourier truncation |k| <= K")->capture_default_str()->check(CLI::Range(1, 4096));
    app->add_option("--N", c.N, "physical grid size (0: 2K + 2)")->capture_default_str();
    app->add_option("--s", c.s, "Sobolev index of reported errors")->capture_default_str();
    app->add_option("--out", c.out, "output directory")->capture_default_str();
    app->add_option("--threads", c.threads, "worker threads for sweep points")->capture_default_str();
}

FlowOptions flow_options(const Common& c, double h_max, double guard) {
    FlowOptions o;
    o.s = c.s;
    o.h_max = h_max;
    o.guard = guard;
    return o;
}

// ---- subcommands -------------------------------------------------------------

struct SimulateArgs {
    Common c;
    double T = 1.0, h_max = 1e-3, guard = 1e8, sample_dt = 0.0;
    std::string u0 = "1", schedule, control;
};

void simulate(Run& run, const SimulateArgs& a) {
    const Model m = parse_model(a.c.model);
    const auto set = standard_profiles(m, a.c.K, a.c.N);
    FlowOptions fo = flow_options(a.c, a.h_max, a.guard);
    fo.sample_dt = a.sample_dt > 0.0 ? a.sample_dt : a.T / 20.0;
    const Integrator in(m, set, fo);
    const auto u0 = parse_field(a.u0, a.c.K, a.c.N);
    ControlSchedule sched(set.size());
    if (!a.schedule.empty()) {
        std::ifstream is(a.schedule);
        if (!is) throw ConfigError("cannot read schedule " + a.schedule);
        sched = ControlSchedule::from_json(json::parse(is));
        if (sched.channels() > set.size()) throw ConfigError("schedule has more channels than profiles");
        sched = sched.widened(set.size());
    } else {
        Vec v = number_list(a.control, "control");
        if (static_cast<int>(v.size()) > set.size()) throw ConfigError("control has more entries than profiles");
        v.resize(set.size(), 0.0);
        sched.constant(a.T, v);
    }
    const auto res = in.flow(u0, sched, a.T);
    run.write("trajectory.csv", trajectory_csv(res.report));
    run.write("terminal.csv", field_csv(res.u));
    run.write_json("schedule.json", sched.to_json());
    json norms = json::array();
    for (std::size_t i = 0; i < res.report.times.size(); ++i)
        norms.push_back({{"t", res.report.times[i]},
                         {"l2", l2_norm(res.report.samples[i])},
                         {"hs", sobolev_norm(res.report.samples[i], a.c.s)},
                         {"mean", res.report.samples[i][0].real()}});
    run.write_json("summary.json", {{"model", to_string(m)},
                                    {"T", a.T},
                                    {"norms", norms},
                                    {"sup_norm", res.report.sup_norm},
                                    {"blowup", res.report.blowup},
                                    {"steps", res.report.steps},
                                    {"h_min", res.report.h_min},
                                    {"h_max", res.report.h_max},
                                    {"mean_drift", std::abs(res.u[0].real() - u0[0].real())}});
}

struct ConjugateArgs {
    Common c;
    std::string u0 = "1 + 0.1*cos(x)", phi = "1.2 + 0.2*sin(x)", p = "0.3,0,0", deltas = "1e-2,5e-3,2.5e-3";
    double h_max = 1e-3;
    bool check_monotone = true, check_halving = false;
};

void conjugate_limit(Run& run, const ConjugateArgs& a) {
    const auto ms = models(a.c.model);
    const auto u0 = parse_field(a.u0, a.c.K, a.c.N);
    const auto phi = parse_field(a.phi, a.c.K, a.c.N);
    const auto p = triple(a.p, "p");
    const auto deltas = number_list(a.deltas, "deltas");
    if (deltas.empty()) throw ConfigError("deltas: empty grid");
    for (std::size_t i = 1; i < deltas.size(); ++i)
        if (!(deltas[i] < deltas[i - 1])) throw ConfigError("deltas must be decreasing");

    struct Point {
        ProbeRow row;
        std::string status = "ok";
    };
    const std::size_t n = ms.size() * deltas.size();
    // each point builds its own integrator: the stepper caches are per object
    const auto pts = parallel_map<Point>(n, a.c.threads, [&](std::size_t i) {
        const Model m = ms[i / deltas.size()];
        const double d = deltas[i % deltas.size()];
        const Integrator in(m, standard_profiles(m, a.c.K, a.c.N), flow_options(a.c, a.h_max, 1e8));
        Point pt;
        try {
            pt.row = conjugated_limit_probe(in, u0, phi, p, {d}, a.c.s).front();
        } catch (const BlowupDetected&) {
            pt.row.delta = d;
            pt.row.error = std::numeric_limits<double>::quiet_NaN();
            pt.status = "blowup";
        }
        return pt;
    });

    std::string csv = "model,delta,error,steps,status\n";
    json summary = json::object();
    for (std::size_t mi = 0; mi < ms.size(); ++mi) {
        const std::string name = to_string(ms[mi]);
        std::vector<double> err;
        for (std::size_t j = 0; j < deltas.size(); ++j) {
            const auto& pt = pts[mi * deltas.size() + j];
            csv += csv_row({name, num(deltas[j]), std::isfinite(pt.row.error) ? num(pt.row.error) : "",
                            std::to_string(pt.row.steps), pt.status});
            err.push_back(pt.row.error);
        }
        bool monotone = true;
        for (std::size_t j = 1; j < err.size(); ++j) monotone = monotone && err[j] < err[j - 1];
        // delta_0: start of the decreasing tail of the grid
        std::size_t from = err.size() - 1;
        while (from > 0 && err[from] < err[from - 1]) --from;
        const double ratio = err.back() / err.front();
        summary[name] = {{"errors", err}, {"monotone", monotone}, {"ratio_last_first", ratio},
                         {"delta0", deltas[from]}};
        if (a.check_monotone) run.check(name + ".monotone", monotone);
        if (a.check_halving) run.check(name + ".halving", ratio < 0.5, {{"ratio", ratio}});
    }
    run.write("conjugate_limit.csv", csv);
    run.write_json("summary.json",
                   {{"u0", a.u0}, {"phi", a.phi}, {"p", p}, {"deltas", deltas}, {"s", a.c.s}, {"models", summary}});
}

struct SynthesizeArgs {
    Common c;
    std::string u0 = "1 + 0.1*cos(x)", tree = "(quartic (gen 0 0 0) (1 (gen 0 0 1)))", phase;
    double eps = 5e-2, T = 0.5, tau2_start = 1e-2;
    int cap = 2;
};

void write_plan(Run& run, const SteeringPlan& p, json extra) {
    run.write_json("plan.json", p.to_json());
    run.write("stages.csv", stages_csv(p));
    run.write("terminal.csv", field_csv(p.terminal));
    extra["achieved_error"] = p.achieved_error;
    extra["error_norm"] = p.error_norm;
    extra["total_duration"] = p.total_duration;
    extra["stages"] = p.stages.size();
    run.write_json("summary.json", extra);
}

void synthesize(Run& run, const SynthesizeArgs& a) {
    const Model m = parse_model(a.c.model);
    const Integrator in(m, standard_profiles(m, a.c.K, a.c.N), flow_options(a.c, 1e-3, 1e8));
    const auto u0 = parse_field(a.u0, a.c.K, a.c.N);
    const PhaseTree tree =
        a.phase.empty() ? PhaseTree::parse(a.tree) : realize(from_field(parse_field(a.phase, a.c.K, a.c.N), a.cap));
    SynthesisOptions so;
    so.s = a.c.s;
    so.tau2_start = a.tau2_start;
    const auto p = reach_exponential(in, u0, tree, a.eps, a.T, so);
    run.check("tolerance", p.achieved_error < a.eps, {{"achieved", p.achieved_error}, {"eps", a.eps}});
    write_plan(run, p, {{"model", to_string(m)}, {"tree", tree.to_sexpr()}, {"eps", a.eps}, {"T", a.T}});
}

struct SteerArgs {
    Common c;
    std::string u0 = "1 + 0.3*sin(x)", u1 = "1.5 - 0.2*cos(x)", mode = "same-sign";
    double eps = 1e-1, T = 0.5;
};

void steer(Run& run, const SteerArgs& a) {
    const Model m = parse_model(a.c.model);
    const Integrator in(m, standard_profiles(m, a.c.K, a.c.N), flow_options(a.c, 1e-3, 1e8));
    const auto u0 = parse_field(a.u0, a.c.K, a.c.N);
    const auto u1 = parse_field(a.u1, a.c.K, a.c.N);
    SteerOptions so;
    so.synthesis.s = a.c.s;
    SteeringPlan p;
    if (a.mode == "same-sign") p = steer_same_sign(in, u0, u1, a.eps, a.T, so);
    else if (a.mode == "hold") p = steer_with_hold(in, u0, u1, a.eps, a.T, so);
    else throw ConfigError("steer: mode must be same-sign or hold");
    run.check("tolerance", p.achieved_error < a.eps, {{"achieved", p.achieved_error}, {"eps", a.eps}});
    if (a.mode == "hold") run.check("exact_horizon", p.schedule.total_duration() == a.T);
    else run.check("within_horizon", p.total_duration <= a.T);
    write_plan(run, p, {{"model", to_string(m)}, {"mode", a.mode}, {"eps", a.eps}, {"T", a.T}});
}

struct MomentArgs {
    Common c;
    double Phi = 1.0;
    std::string T = "0.5", v0 = "1 + 0.5*cos(x) + 0.3*sin(2x)", mu4, mu5;
    int count = 0;
    unsigned bits = 256;
    bool oracle = true;
    int samples = 401;
    double residual_tol = 1e-3;
};

void moment_control(Run& run, const MomentArgs& a) {
    const Model m = parse_model(a.c.model);
    const int K = a.c.K;
    const auto Ts = number_list(a.T, "T");
    if (Ts.empty()) throw ConfigError("T: empty list");
    const auto v0 = parse_field(a.v0, K, a.c.N);
    const auto std_set = standard_profiles(m, K, a.c.N);
    const auto mu4 = a.mu4.empty() ? std_set[3] : load_field(a.mu4).resized(K);
    const auto mu5 = m == Model::CH ? (a.mu5.empty() ? std_set[4] : load_field(a.mu5).resized(K)) : FourierField(K);
    const int count = a.count > 0 ? a.count : default_count(m);
    MomentOptions mo;
    mo.precision.bits = a.bits;
    mo.precision.max_bits = std::max(a.bits, mo.precision.max_bits);

    std::string cost = "T,inv_T,control_l2,log_control,oracle_l2,terminal_residual\n";
    json rows = json::array();
    std::vector<double> norms;
    for (std::size_t i = 0; i < Ts.size(); ++i) {
        const double T = Ts[i];
        const auto r = m == Model::CH ? moment_control_CH(v0, a.Phi, mu4, mu5, T, count, mo)
                                      : moment_control_KS(v0, a.Phi, mu4, T, count, mo);
        std::string sig = m == Model::CH ? "t,p4,p5\n" : "t,p4\n";
        for (int j = 0; j < a.samples; ++j) {
            const double t = T * j / (a.samples - 1);
            const Vec p = r.control.schedule.value(std::min(t, T * (1 - 1e-15)));
            sig += num(t) + "," + num(p[0]) + (p.size() > 1 ? "," + num(p[1]) : "") + "\n";
        }
        run.write("control_" + std::to_string(i) + ".csv", sig);
        json row = {{"T", T},
                    {"control_l2", r.control.l2_norm},
                    {"channel_norms", r.control.channel_norms},
                    {"defect", r.control.defect},
                    {"replay_error", r.control.replay_error},
                    {"bits", r.control.bits},
                    {"terminal_residual", r.terminal_residual},
                    {"tail_residual", r.tail_residual},
                    {"theta", r.control.spectrum.theta},
                    {"kappa", r.control.spectrum.kappa},
                    {"rho", r.control.spectrum.rho},
                    {"min_gap", r.control.spectrum.min_gap},
                    {"control_file", "control_" + std::to_string(i) + ".csv"}};
        double oracle = std::numeric_limits<double>::quiet_NaN();
        if (a.oracle) {
            LinearModel lm{linear_kind(m), a.Phi, {mu4}};
            if (m == Model::CH) lm.inputs.push_back(mu5);
            const auto g = gramian_null_control(lm, v0, T, count, mo);
            oracle = g.control.l2_norm;
            row["oracle_l2"] = oracle;
            row["oracle_terminal_residual"] = g.terminal_residual;
            run.check("oracle_not_larger_" + std::to_string(i), oracle <= r.control.l2_norm * (1 + 1e-9),
                      {{"oracle", oracle}, {"moment", r.control.l2_norm}});
        }
        run.check("terminal_residual_" + std::to_string(i), r.terminal_residual < a.residual_tol,
                  {{"residual", r.terminal_residual}, {"tolerance", a.residual_tol}});
        cost += csv_row({num(T), num(1 / T), num(r.control.l2_norm), num(std::log(r.control.l2_norm)),
                         std::isfinite(oracle) ? num(oracle) : "", num(r.terminal_residual)});
        norms.push_back(r.control.l2_norm);
        rows.push_back(row);
    }
    run.write("cost.csv", cost);
    json summary = {{"model", to_string(m)}, {"Phi", a.Phi}, {"count", count}, {"runs", rows}};
    if (Ts.size() >= 2) {
        const auto fit = fit_cost_law(Ts, norms);
        summary["cost_fit"] = {{"a", fit.a}, {"M", fit.M}};
    }
    if (Ts.size() >= 3) {
        // order by decreasing T, then: norms increase and log-norm is convex in 1/T
        std::vector<std::size_t> idx(Ts.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return Ts[i] > Ts[j]; });
        bool increasing = true, convex = true;
        for (std::size_t j = 1; j < idx.size(); ++j) increasing = increasing && norms[idx[j]] > norms[idx[j - 1]];
        for (std::size_t j = 1; j + 1 < idx.size(); ++j) {
            const double x0 = 1 / Ts[idx[j - 1]], x1 = 1 / Ts[idx[j]], x2 = 1 / Ts[idx[j + 1]];
            const double s1 = (std::log(norms[idx[j]]) - std::log(norms[idx[j - 1]])) / (x1 - x0);
            const double s2 = (std::log(norms[idx[j + 1]]) - std::log(norms[idx[j]])) / (x2 - x1);
            convex = convex && s2 >= s1;
        }
        run.check("cost_increasing", increasing);
        run.check("cost_convex", convex);
    }
    run.write_json("summary.json", summary);
}

struct LocalArgs {
    Common c;
    double Phi = 1.0, T = 0.5, q = 1.2, p = 3.0, M = 0.0, tolerance = 1e-9, sample_dt = 0.0;
    double check_ratio = 0.0, check_error = 0.0;
    int count = 0, max_sweeps = 30;
    std::string u0 = "1 + 0.001*cos(x)";
};

LocalOptions local_options(const LocalArgs& a, std::vector<SweepLog>* log) {
    LocalOptions o;
    o.count = a.count;
    o.weights = {a.q, a.p, a.M, 0.0};
    o.tolerance = a.tolerance;
    o.max_sweeps = a.max_sweeps;
    o.flow.s = a.c.s;
    if (log) o.on_sweep = [log](const SweepLog& r) { log->push_back(r); };
    return o;
}

void local_checks(Run& run, const std::vector<SweepLog>& log, double error, double check_ratio,
                  double check_error) {
    if (check_ratio > 0.0) {
        double worst = 0.0;
        for (std::size_t i = 1; i < log.size(); ++i) worst = std::max(worst, log[i].ratio);
        run.check("contraction_ratio", log.size() >= 2 && worst < check_ratio,
                  {{"max_ratio_from_sweep_2", worst}, {"bound", check_ratio}});
    }
    if (check_error > 0.0)
        run.check("terminal_error", error < check_error, {{"error", error}, {"bound", check_error}});
}

std::string sampled_trajectory(Model m, const Common& c, const FourierField& u0, const ControlSchedule& s,
                               double T, double dt) {
    FlowOptions fo;
    fo.s = c.s;
    fo.sample_dt = dt > 0.0 ? dt : T / 50.0;
    const Integrator in(m, standard_profiles(m, c.K, c.N), fo);
    return trajectory_csv(in.flow(u0, s, T).report);
}

void local_exact(Run& run, const LocalArgs& a) {
    const Model m = parse_model(a.c.model);
    const auto u0 = parse_field(a.u0, a.c.K, a.c.N);
    std::vector<SweepLog> log;
    LocalExactResult r;
    try {
        r = local_exact_to_constant(m, u0, a.Phi, a.T, local_options(a, &log));
    } catch (const NumericError&) {
        run.write("iterations.csv", iterations_csv(log));
        throw;
    }
    run.write("iterations.csv", iterations_csv(r.log));
    run.write_json("schedule.json", r.schedule.to_json());
    run.write_json("report.json", r.to_json());
    run.write("terminal.csv", field_csv(r.terminal));
    run.write("trajectory.csv", sampled_trajectory(m, a.c, u0, r.schedule, a.T, a.sample_dt));
    local_checks(run, r.log, r.terminal_error, a.check_ratio, a.check_error);
}

struct GlobalArgs {
    LocalArgs l;
    double radius = 0.0;
};

void global_pipeline(Run& run, const GlobalArgs& g) {
    const auto& a = g.l;
    const Model m = parse_model(a.c.model);
    const auto u0 = parse_field(a.u0, a.c.K, a.c.N);
    GlobalOptions o;
    o.radius = g.radius;
    o.local = local_options(a, nullptr);
    o.steer.synthesis.s = a.c.s;
    const auto r = global_to_constant(m, u0, a.Phi, a.T, o);
    run.write_json("phase1_plan.json", r.phase1.to_json());
    run.write("stages.csv", stages_csv(r.phase1));
    run.write("iterations.csv", iterations_csv(r.phase2.log));
    run.write_json("schedule.json", r.schedule.to_json());
    run.write("terminal.csv", field_csv(r.terminal));
    run.write("trajectory.csv", sampled_trajectory(m, a.c, u0, r.schedule, a.T, a.sample_dt));
    json rep = r.to_json();
    rep["model"] = to_string(m);
    rep["Phi"] = a.Phi;
    rep["T"] = a.T;
    // modes outside the linear family are not steered: they decay freely
    // over the local window, and what is left is part of terminal_error
    rep["tail"] = {{"relative_to_peak", r.phase2.tail_residual}, {"in_terminal_error", true}};
    run.write_json("report.json", rep);
    local_checks(run, r.phase2.log, r.terminal_error, a.check_ratio, a.check_error);
}

struct SaturationArgs {
    Common c;
    int n_max = 5, table_max = 8;
};

void saturation_check(Run& run, const SaturationArgs& a) {
    if (a.n_max < 1) throw ConfigError("n_max must be positive");
    const int top = std::max(a.n_max, a.table_max);
    ModeLadder ladder(top);
    std::string csv = "n,mode,depth,node_count,exact,member\n", trees;
    bool all = true;
    for (int n = 1; n <= top; ++n) {
        const auto& w = ladder.get(n);
        for (int sn = 0; sn < 2; ++sn) {
            const auto& t = sn ? w.sin_tree : w.cos_tree;
            const auto target = sn ? TrigPolynomial::sin_k(n) : TrigPolynomial::cos_k(n);
            const auto cert = certify_witness(t, target);
            const std::string mode = sn ? "sin" : "cos";
            csv += csv_row({std::to_string(n), mode, std::to_string(t.depth()), std::to_string(t.node_count()),
                            cert.exact ? "1" : "0", cert.member ? "1" : "0"});
            if (n <= a.n_max) {
                all = all && cert.exact && cert.member;
                trees += std::to_string(n) + " " + mode + " " + t.to_sexpr() + "\n";
            }
        }
    }
    run.write("derivation.csv", csv);
    run.write("witnesses.txt", trees);
    run.check("witnesses_exact", all, {{"n_max", a.n_max}});
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bilinear control experiments for Kuramoto-Sivashinsky and Cahn-Hilliard equations"};
    app.fallthrough();
    app.set_config("--config", "", "INI file; [subcommand] sections hold key = value pairs");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.set_version_flag("--version", BILINEAR_VERSION);
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* s_sim = app.add_subcommand("simulate", "integrate one controlled trajectory.\n"
                                                 "  trajectory.csv: t,k,re,im   summary.json, terminal.csv");
    add_common(s_sim, sim.c, "KS");
    s_sim->add_option("--T", sim.T, "horizon")->capture_default_str();
    s_sim->add_option("--u0", sim.u0, "initial condition expression")->capture_default_str();
    s_sim->add_option("--schedule", sim.schedule, "control schedule JSON (overrides --control)");
    s_sim->add_option("--control", sim.control, "constant control, comma separated per profile");
    s_sim->add_option("--h-max", sim.h_max, "substep ceiling")->capture_default_str();
    s_sim->add_option("--guard", sim.guard, "blowup threshold on the H^s norm")->capture_default_str();
    s_sim->add_option("--sample-dt", sim.sample_dt, "sampling interval (0: T / 20)")->capture_default_str();

    ConjugateArgs con;
    auto* s_con = app.add_subcommand("conjugate-limit", "conjugated short-time limit probe.\n"
                                                        "  conjugate_limit.csv: model,delta,error,steps,status");
    add_common(s_con, con.c, "both");
    s_con->add_option("--u0", con.u0)->capture_default_str();
    s_con->add_option("--phi", con.phi, "positive conjugating phase")->capture_default_str();
    s_con->add_option("--p", con.p, "three base controls")->capture_default_str();
    s_con->add_option("--deltas", con.deltas, "decreasing delta grid")->capture_default_str();
    s_con->add_option("--h-max", con.h_max)->capture_default_str();
    s_con->add_option("--check-monotone", con.check_monotone)->capture_default_str();
    s_con->add_option("--check-halving", con.check_halving, "last error below half the first")
        ->capture_default_str();

    SynthesizeArgs syn;
    auto* s_syn = app.add_subcommand("synthesize", "staged plan for a target e^phi u0.\n"
                                                   "  stages.csv: index,kind,role,unit,tau,lambda0,lambda1,"
                                                   "lambda2,stage_error   plan.json, summary.json");
    add_common(s_syn, syn.c, "KS");
    s_syn->add_option("--u0", syn.u0)->capture_default_str();
    s_syn->add_option("--tree", syn.tree, "phase tree s-expression")->capture_default_str();
    s_syn->add_option("--phase", syn.phase, "phase expression, realized up to --cap (overrides --tree)");
    s_syn->add_option("--cap", syn.cap)->capture_default_str();
    s_syn->add_option("--eps", syn.eps)->capture_default_str();
    s_syn->add_option("--T", syn.T)->capture_default_str();
    s_syn->add_option("--tau2-start", syn.tau2_start)->capture_default_str();

    SteerArgs ste;
    auto* s_ste = app.add_subcommand("steer", "steer u0 to u1 of the same sign (stages.csv, plan.json)");
    add_common(s_ste, ste.c, "KS");
    s_ste->add_option("--u0", ste.u0)->capture_default_str();
    s_ste->add_option("--u1", ste.u1)->capture_default_str();
    s_ste->add_option("--mode", ste.mode, "same-sign (L2 error) or hold (exact horizon, H^s error)")
        ->capture_default_str();
    s_ste->add_option("--eps", ste.eps)->capture_default_str();
    s_ste->add_option("--T", ste.T)->capture_default_str();

    MomentArgs mom;
    auto* s_mom = app.add_subcommand("moment-control", "linearized null control by the moment method.\n"
                                                       "  control_<i>.csv: t,p4[,p5]   cost.csv: T,inv_T,"
                                                       "control_l2,log_control,oracle_l2,terminal_residual");
    add_common(s_mom, mom.c, "CH");
    s_mom->add_option("--phi", mom.Phi, "constant state")->capture_default_str();
    s_mom->add_option("--T", mom.T, "horizon or comma separated sweep")->capture_default_str();
    s_mom->add_option("--v0", mom.v0)->capture_default_str();
    s_mom->add_option("--count", mom.count, "family size (0: model default)")->capture_default_str();
    s_mom->add_option("--mu4", mom.mu4, "profile field CSV (k,re,im)");
    s_mom->add_option("--mu5", mom.mu5, "second profile field CSV, CH only");
    s_mom->add_option("--bits", mom.bits, "starting MPFR precision")->capture_default_str();
    s_mom->add_option("--oracle", mom.oracle, "cross-check with the Gramian minimum-norm control")
        ->capture_default_str();
    s_mom->add_option("--samples", mom.samples)->capture_default_str()->check(CLI::Range(2, 1000000));
    s_mom->add_option("--residual-tol", mom.residual_tol)->capture_default_str();

    auto add_local = [](CLI::App* sc, LocalArgs& l) {
        sc->add_option("--phi", l.Phi, "target constant")->capture_default_str();
        sc->add_option("--T", l.T)->capture_default_str();
        sc->add_option("--u0", l.u0)->capture_default_str();
        sc->add_option("--count", l.count, "family size (0: model default)")->capture_default_str();
        sc->add_option("--q", l.q)->capture_default_str();
        sc->add_option("--p", l.p)->capture_default_str();
        sc->add_option("--M", l.M, "weight constant (0: fitted)")->capture_default_str();
        sc->add_option("--tolerance", l.tolerance, "update tolerance relative to the source")
            ->capture_default_str();
        sc->add_option("--max-sweeps", l.max_sweeps)->capture_default_str();
        sc->add_option("--sample-dt", l.sample_dt, "trajectory sampling (0: T / 50)")->capture_default_str();
        sc->add_option("--check-ratio", l.check_ratio, "contraction bound from sweep 2 (0: off)")
            ->capture_default_str();
        sc->add_option("--check-error", l.check_error, "terminal L2 error bound (0: off)")->capture_default_str();
    };
    LocalArgs loc;
    auto* s_loc = app.add_subcommand("local-exact", "exact local control to a constant.\n"
                                                    "  iterations.csv: sweep,update,ratio,source_norm,"
                                                    "weighted_v,weighted_f,terminal_residual,control_norm");
    add_common(s_loc, loc.c, "CH");
    add_local(s_loc, loc);

    GlobalArgs glo;
    glo.l.T = 1.0;
    glo.l.u0 = "2 + 0.5*sin(x)";
    auto* s_glo = app.add_subcommand("global-pipeline", "steer near the constant, then close exactly.\n"
                                                        "  stages.csv, iterations.csv, report.json");
    add_common(s_glo, glo.l.c, "CH");
    add_local(s_glo, glo.l);
    s_glo->add_option("--radius", glo.radius, "local radius (0: model default)")->capture_default_str();

    SaturationArgs sat;
    auto* s_sat = app.add_subcommand("saturation-check", "exact ladder witnesses for cos nx and sin nx.\n"
                                                         "  derivation.csv: n,mode,depth,node_count,exact,member");
    add_common(s_sat, sat.c, "KS");
    s_sat->add_option("--n-max", sat.n_max, "certify every n up to this")->capture_default_str();
    s_sat->add_option("--table-max", sat.table_max, "depth table range")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    CLI::App* sc = app.get_subcommands().front();
    const std::string name = sc->get_name();
    const std::string ini = "[" + name + "]\n" + sc->config_to_str(true, false);
    json options = json::object();
    for (const auto* o : sc->get_options()) {
        if (o->get_lnames().empty() || o->get_lnames().front() == "help") continue;
        const auto r = o->results();
        options[o->get_lnames().front()] = r.empty() ? o->get_default_str() : r.front();
    }

    const std::map<std::string, const Common*> commons{
        {"simulate", &sim.c},         {"conjugate-limit", &con.c}, {"synthesize", &syn.c},
        {"steer", &ste.c},            {"moment-control", &mom.c},  {"local-exact", &loc.c},
        {"global-pipeline", &glo.l.c}, {"saturation-check", &sat.c}};
    std::unique_ptr<Run> run;
    int code = 0;
    std::string status = "pass", message;
    try {
        run = std::make_unique<Run>(name, commons.at(name)->out);
        if (name == "simulate") simulate(*run, sim);
        else if (name == "conjugate-limit") conjugate_limit(*run, con);
        else if (name == "synthesize") synthesize(*run, syn);
        else if (name == "steer") steer(*run, ste);
        else if (name == "moment-control") moment_control(*run, mom);
        else if (name == "local-exact") local_exact(*run, loc);
        else if (name == "global-pipeline") global_pipeline(*run, glo);
        else saturation_check(*run, sat);
        if (run->failed()) {
            code = exit_check;
            status = "check failed";
        }
    } catch (const ConfigError& e) {
        code = exit_config, status = "config error", message = e.what();
    } catch (const SignMismatch& e) {
        code = exit_config, status = "config error", message = e.what();
    } catch (const HypothesisViolated& e) {
        code = exit_config, status = "config error", message = e.what();
    } catch (const std::exception& e) {
        code = exit_numeric, status = "numeric failure", message = e.what();
    }
    if (!message.empty()) std::cerr << name << ": " << message << "\n";
    if (run) {
        try {
            run->finish(ini, options, status, message);
        } catch (const std::exception& e) {
            std::cerr << name << ": " << e.what() << "\n";
            if (code == 0) code = exit_config;
        }
    }
    if (code == exit_check) std::cerr << name << ": a declared check failed (see manifest.json)\n";
    return code;
}
