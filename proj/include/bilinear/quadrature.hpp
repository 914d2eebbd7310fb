#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "bilinear/error.hpp"

namespace bilinear {

struct GaussRule {
    std::vector<double> x;  // nodes on [0, 1]
    std::vector<double> w;  // weights summing to 1
};

// Gauss-Legendre rule with n points mapped to [0, 1]; Newton iteration on
// the Legendre recurrence, cached per n.
inline const GaussRule& gauss_legendre(int n) {
    static std::mutex mu;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    GaussRule r;
    r.x.resize(n);
    r.w.resize(n);
    const double pi = 3.14159265358979323846;
    for (int i = 0; i < n; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0, p1 = z;
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        double p0 = 1.0, p1 = z;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (z * p1 - p0) / (z * z - 1.0);
        r.x[n - 1 - i] = 0.5 * (1.0 + z);
        r.w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    return cache.emplace(n, std::move(r)).first->second;
}

// Breakpoints 0 = t_0 < ... < t_n = T. Panels start at width h_left near 0
// (and h_right near T) and grow geometrically by `ratio` up to h_max.
inline std::vector<double> graded_mesh(double T, double h_left, double h_right, double h_max,
                                       double ratio = 1.25) {
    if (!(T > 0.0)) throw ConfigError("graded_mesh: T must be positive");
    h_max = std::min(h_max, T);
    h_left = std::min(h_left, h_max);
    h_right = std::min(h_right, h_max);
    auto ramp = [&](double h0) {
        std::vector<double> w;
        double h = h0, acc = 0.0;
        while (h < h_max && acc + h < 0.5 * T) {
            w.push_back(h);
            acc += h;
            h *= ratio;
        }
        return w;
    };
    const auto left = ramp(h_left);
    const auto right = ramp(h_right);
    std::vector<double> pts{0.0};
    double a = 0.0;
    for (double w : left) pts.push_back(a += w);
    std::vector<double> tail{T};
    double b = T;
    for (double w : right) tail.push_back(b -= w);
    const double gap = b - a;
    const int n = std::max(1, static_cast<int>(std::ceil(gap / h_max - 1e-12)));
    for (int i = 1; i < n; ++i) pts.push_back(a + gap * i / n);
    pts.insert(pts.end(), tail.rbegin(), tail.rend());
    std::vector<double> out;
    for (double t : pts)
        if (out.empty() || t > out.back() + 1e-14 * T) out.push_back(t);
    out.back() = T;
    return out;
}

// Composite Gauss rule over the panels of a mesh.
struct CompositeRule {
    std::vector<double> t;
    std::vector<double> w;
};

inline CompositeRule composite_rule(const std::vector<double>& mesh, int points_per_panel) {
    const auto& g = gauss_legendre(points_per_panel);
    CompositeRule r;
    for (std::size_t i = 0; i + 1 < mesh.size(); ++i) {
        const double a = mesh[i], h = mesh[i + 1] - mesh[i];
        for (int j = 0; j < points_per_panel; ++j) {
            r.t.push_back(a + h * g.x[j]);
            r.w.push_back(h * g.w[j]);
        }
    }
    return r;
}

}  // namespace bilinear
