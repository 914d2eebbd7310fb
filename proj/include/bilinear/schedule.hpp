#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bilinear/error.hpp"
#include "bilinear/trig_field.hpp"
#include "json.hpp"

namespace bilinear {

using Vec = std::vector<double>;

inline void add_scaled(Vec& acc, double a, const Vec& x) {
    if (acc.size() < x.size()) acc.resize(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) acc[i] += a * x[i];
}
inline void add_scaled(FourierField& acc, double a, const FourierField& x) { acc += a * x; }
inline Vec zero_like(const Vec& v) { return Vec(v.size(), 0.0); }
inline FourierField zero_like(const FourierField& f) { return FourierField(f.K(), f.N()); }

namespace poly {

inline Vec& operator*=(Vec& v, double a) {
    for (double& x : v) x *= a;
    return v;
}

// Coefficients of q(s) = p(alpha + beta s) where p(t) = sum_j c_j t^j.
template <class V>
std::vector<V> rescale(const std::vector<V>& c, double alpha, double beta) {
    const std::size_t n = c.size();
    std::vector<V> out(n, zero_like(c[0]));
    for (std::size_t j = 0; j < n; ++j) {
        // (alpha + beta s)^j = sum_i binom(j,i) alpha^(j-i) beta^i s^i
        double binom = 1.0;
        for (std::size_t i = 0; i <= j; ++i) {
            const double f = binom * std::pow(alpha, double(j - i)) * std::pow(beta, double(i));
            if (f != 0.0) add_scaled(out[i], f, c[j]);
            binom = binom * double(j - i) / double(i + 1);
        }
    }
    return out;
}

template <class V>
V evaluate(const std::vector<V>& c, double s) {
    V acc = c.back();
    for (std::size_t j = c.size() - 1; j-- > 0;) {
        acc *= s;
        add_scaled(acc, 1.0, c[j]);
    }
    return acc;
}

// Chebyshev-Lobatto nodes on [0, 1] for a degree-d interpolant.
inline std::vector<double> lobatto_nodes(int d) {
    std::vector<double> s(d + 1);
    const double pi = 3.14159265358979323846;
    for (int i = 0; i <= d; ++i) s[i] = 0.5 * (1.0 - std::cos(pi * i / d));
    s[0] = 0.0;
    s[d] = 1.0;
    return s;
}

// Inverse Vandermonde for monomials at the Lobatto nodes, row j gives the
// weights producing coefficient c_j from the samples.
inline std::vector<std::vector<double>> lobatto_inverse(int d) {
    const auto s = lobatto_nodes(d);
    const int n = d + 1;
    std::vector<std::vector<double>> a(n, std::vector<double>(2 * n, 0.0));
    for (int i = 0; i < n; ++i) {
        double p = 1.0;
        for (int j = 0; j < n; ++j) {
            a[i][j] = p;
            p *= s[i];
        }
        a[i][n + i] = 1.0;
    }
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        const double d0 = a[col][col];
        for (double& x : a[col]) x /= d0;
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r][col];
            if (f == 0.0) continue;
            for (int c = 0; c < 2 * n; ++c) a[r][c] -= f * a[col][c];
        }
    }
    // a now holds [I | V^{-1}] with V_{ij} = s_i^j; coefficients c = V^{-1} y
    std::vector<std::vector<double>> inv(n, std::vector<double>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) inv[i][j] = a[i][n + j];
    return inv;
}

template <class V>
std::vector<V> fit(const std::vector<V>& samples) {
    const int d = static_cast<int>(samples.size()) - 1;
    if (d == 0) return samples;
    const auto inv = lobatto_inverse(d);
    std::vector<V> c(samples.size(), zero_like(samples[0]));
    for (int j = 0; j <= d; ++j)
        for (int i = 0; i <= d; ++i) add_scaled(c[j], inv[j][i], samples[i]);
    return c;
}

}  // namespace poly

using poly::operator*=;

// Piecewise polynomial in time. On segment i the value is
// sum_j coeffs[i][j] * s^j with local time s in [0, 1].
template <class V>
class PiecewisePolynomial {
public:
    struct Segment {
        double duration;
        std::vector<V> coeffs;
    };

    PiecewisePolynomial() = default;

    void push(double duration, std::vector<V> coeffs) {
        if (!(duration > 0.0)) throw ConfigError("segment duration must be positive");
        if (coeffs.empty()) throw ConfigError("segment needs at least one coefficient");
        start_.push_back(total_);
        total_ += duration;
        segs_.push_back({duration, std::move(coeffs)});
    }

    const std::vector<Segment>& segments() const { return segs_; }
    double start(std::size_t i) const { return start_[i]; }
    double total_duration() const { return total_; }
    bool empty() const { return segs_.empty(); }

    // Index of the segment containing t, right-continuous; t == total maps to
    // the last segment.
    std::size_t locate(double t) const {
        if (segs_.empty()) throw ConfigError("empty piecewise polynomial");
        auto it = std::upper_bound(start_.begin(), start_.end(), t);
        std::size_t i = (it == start_.begin()) ? 0 : static_cast<std::size_t>(it - start_.begin()) - 1;
        return std::min(i, segs_.size() - 1);
    }

    V value(double t) const {
        const std::size_t i = locate(t);
        const double s = std::clamp((t - start_[i]) / segs_[i].duration, 0.0, 1.0);
        return poly::evaluate(segs_[i].coeffs, s);
    }

    // Polynomial of segment i restricted to [t0, t1] (absolute times inside
    // the segment), in a fresh local variable on [0, 1].
    std::vector<V> local(std::size_t i, double t0, double t1) const {
        const auto& sg = segs_[i];
        const double alpha = (t0 - start_[i]) / sg.duration;
        const double beta = (t1 - t0) / sg.duration;
        if (alpha == 0.0 && beta == 1.0) return sg.coeffs;
        return poly::rescale(sg.coeffs, alpha, beta);
    }

    void append(const PiecewisePolynomial& q) {
        for (const auto& s : q.segs_) push(s.duration, s.coeffs);
    }

private:
    std::vector<Segment> segs_;
    std::vector<double> start_;
    double total_ = 0.0;
};

// Vector control p(t) in R^m. Constant segments carry one coefficient;
// smooth controls (moment method) are stored as piecewise polynomials.
class ControlSchedule {
public:
    ControlSchedule() = default;
    explicit ControlSchedule(int channels) : m_(channels) {}

    int channels() const { return m_; }
    double total_duration() const { return pp_.total_duration(); }
    bool empty() const { return pp_.empty(); }
    const PiecewisePolynomial<Vec>& pieces() const { return pp_; }
    std::size_t size() const { return pp_.segments().size(); }

    ControlSchedule& constant(double duration, Vec value) {
        check(value);
        pp_.push(duration, {std::move(value)});
        return *this;
    }
    ControlSchedule& zero(double duration) { return constant(duration, Vec(m_, 0.0)); }
    ControlSchedule& polynomial(double duration, std::vector<Vec> coeffs) {
        for (auto& c : coeffs) check(c);
        pp_.push(duration, std::move(coeffs));
        return *this;
    }

    Vec value(double t) const {
        if (pp_.empty()) return Vec(m_, 0.0);
        return pp_.value(t);
    }

    // Same control with extra zero channels appended.
    ControlSchedule widened(int channels) const {
        if (channels < m_) throw ConfigError("cannot narrow a control schedule");
        ControlSchedule out(channels);
        for (const auto& s : pp_.segments()) {
            std::vector<Vec> c = s.coeffs;
            for (auto& v : c) v.resize(channels, 0.0);
            out.pp_.push(s.duration, std::move(c));
        }
        return out;
    }

    double sup_norm_bound(std::size_t seg) const {
        double m = 0.0;
        for (const auto& c : pp_.segments()[seg].coeffs)
            for (double x : c) m += std::abs(x);
        return m;
    }

    friend ControlSchedule concatenate(const ControlSchedule& p, const ControlSchedule& q) {
        if (p.empty()) return q.m_ >= p.m_ ? q : q.widened(p.m_);
        if (q.empty()) return p.m_ >= q.m_ ? p : p.widened(q.m_);
        const int m = std::max(p.m_, q.m_);
        ControlSchedule out = p.widened(m);
        out.pp_.append(q.widened(m).pp_);
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json segs = nlohmann::json::array();
        for (const auto& s : pp_.segments()) {
            nlohmann::json js;
            js["duration"] = s.duration;
            if (s.coeffs.size() == 1) js["value"] = s.coeffs[0];
            else js["poly"] = s.coeffs;
            segs.push_back(js);
        }
        return {{"channels", m_}, {"total_duration", total_duration()}, {"segments", segs}};
    }

    static ControlSchedule from_json(const nlohmann::json& j) {
        ControlSchedule out(j.at("channels").get<int>());
        for (const auto& s : j.at("segments")) {
            const double d = s.at("duration").get<double>();
            if (s.contains("value")) out.constant(d, s.at("value").get<Vec>());
            else out.polynomial(d, s.at("poly").get<std::vector<Vec>>());
        }
        return out;
    }

    // Samples f on each panel of `mesh` at Lobatto nodes and stores the
    // degree-d interpolant.
    static ControlSchedule sampled(int channels, const std::vector<double>& mesh,
                                   const std::function<Vec(double)>& f, int degree = 5) {
        ControlSchedule out(channels);
        const auto s = poly::lobatto_nodes(degree);
        for (std::size_t i = 0; i + 1 < mesh.size(); ++i) {
            const double a = mesh[i], h = mesh[i + 1] - mesh[i];
            std::vector<Vec> ys;
            for (double si : s) ys.push_back(f(a + h * si));
            out.polynomial(h, poly::fit(ys));
        }
        return out;
    }

private:
    void check(const Vec& v) const {
        if (static_cast<int>(v.size()) != m_)
            throw ConfigError("control value has " + std::to_string(v.size()) + " channels, expected " +
                              std::to_string(m_));
    }

    int m_ = 0;
    PiecewisePolynomial<Vec> pp_;
};

// Time-indexed field (source terms of the linearized problems).
using FieldPath = PiecewisePolynomial<FourierField>;

inline FieldPath sample_field_path(const std::vector<double>& mesh,
                                   const std::function<FourierField(double)>& f, int degree = 5) {
    FieldPath out;
    const auto s = poly::lobatto_nodes(degree);
    for (std::size_t i = 0; i + 1 < mesh.size(); ++i) {
        const double a = mesh[i], h = mesh[i + 1] - mesh[i];
        std::vector<FourierField> ys;
        for (double si : s) ys.push_back(f(a + h * si));
        out.push(h, poly::fit(ys));
    }
    return out;
}

}  // namespace bilinear
