#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "bilinear/error.hpp"
#include "bilinear/trig_field.hpp"

namespace bilinear {

// Fourier coefficients of the periodic extension of x^2 (x - 2pi)^2:
// mean 8 pi^4 / 15 and c_k = -24 / k^4 for k != 0.
inline FourierField quartic_bump_profile(int K, int N = 0) {
    const double pi = two_pi / 2.0;
    FourierField f(K, N);
    f.set(0, 8.0 * std::pow(pi, 4) / 15.0);
    for (int k = 1; k <= K; ++k) f.set(k, -24.0 / std::pow(double(k), 4));
    return f;
}

// x (x - pi)(x - 2pi) on [0, 2pi]: an odd profile equal to
// sum_k 12 sin(kx) / k^3, so c_k = -6i / k^3.
inline FourierField cubic_odd_profile(int K, int N = 0) {
    FourierField f(K, N);
    for (int k = 1; k <= K; ++k) f.set(k, {0.0, -6.0 / std::pow(double(k), 3)});
    return f;
}

struct HypothesisReport {
    bool ok = true;
    std::string failure;
    double theta4 = 2.0, C4 = 0.0;  // min_k k^theta |<mu4, c_k>| over the truncation
    double theta5 = 2.0, C5 = 0.0;
};

// The control profiles mu_1..mu_m with mu_1 = 1, mu_2 = cos x, mu_3 = sin x.
class ControlProfileSet {
public:
    ControlProfileSet() = default;
    ControlProfileSet(int K, int N, std::vector<FourierField> extra = {}) : K_(K) {
        mu_.push_back(FourierField::constant(1.0, K, N));
        mu_.push_back(cos_mode(1, K, 1.0, N));
        mu_.push_back(sin_mode(1, K, 1.0, N));
        for (auto& f : extra) {
            if (!std::isfinite(sobolev_norm(f, 1.0)))
                throw ConfigError("control profile without finite H1 norm");
            mu_.push_back(f.resized(K));
        }
        if (mu_.size() > 5) throw ConfigError("at most five control profiles are supported");
    }

    int size() const { return static_cast<int>(mu_.size()); }
    int K() const { return K_; }
    const FourierField& operator[](int i) const { return mu_.at(i); }
    const std::vector<FourierField>& all() const { return mu_; }

    // Q = sum_i p_i mu_i.
    FourierField combine(const std::vector<double>& p) const {
        FourierField q(K_, mu_.empty() ? 0 : mu_[0].N());
        for (std::size_t i = 0; i < mu_.size() && i < p.size(); ++i)
            if (p[i] != 0.0) q += p[i] * mu_[i];
        return q;
    }

    // Checks the decoupling and lower-bound hypotheses used by the moment
    // method on the cosine/sine channels (mu_4 on cosines, mu_5 on sines).
    HypothesisReport check_decoupled(double theta4 = 2.0, double theta5 = 2.0, double tol = 1e-12) const {
        HypothesisReport r;
        r.theta4 = theta4;
        r.theta5 = theta5;
        if (size() < 5) {
            r.ok = false;
            r.failure = "five profiles required";
            return r;
        }
        const auto& m4 = mu_[3];
        const auto& m5 = mu_[4];
        double scale4 = 0.0, scale5 = 0.0;
        for (int k = 0; k <= K_; ++k) {
            scale4 = std::max(scale4, std::abs(m4[k]));
            scale5 = std::max(scale5, std::abs(m5[k]));
        }
        auto fail = [&](const std::string& why) {
            if (r.ok) r.failure = why;
            r.ok = false;
        };
        if (std::abs(m4[0]) <= tol * scale4) fail("<mu4, c0> vanishes");
        if (std::abs(m5[0]) > tol * std::max(scale5, 1.0)) fail("<mu5, c0> is nonzero");
        r.C4 = std::abs(m4[0].real());
        r.C5 = INFINITY;
        for (int k = 1; k <= K_; ++k) {
            // cosine content is Re c_k, sine content is -Im c_k
            if (std::abs(m4[k].imag()) > tol * scale4) fail("mu4 has sine content at k = " + std::to_string(k));
            if (std::abs(m5[k].real()) > tol * std::max(scale5, 1.0))
                fail("mu5 has cosine content at k = " + std::to_string(k));
            r.C4 = std::min(r.C4, std::pow(double(k), theta4) * 2.0 * std::abs(m4[k].real()));
            r.C5 = std::min(r.C5, std::pow(double(k), theta5) * 2.0 * std::abs(m5[k].imag()));
        }
        if (!(r.C4 > 0.0)) fail("mu4 lower bound fails");
        if (!(r.C5 > 0.0)) fail("mu5 lower bound fails");
        return r;
    }

    // Lower bound (1 + |k|^theta) |c_k(mu_4)| over the truncation for the
    // single-control (KS) moment problem; every exponential needs a nonzero
    // pairing.
    HypothesisReport check_single(double theta = 2.0) const {
        HypothesisReport r;
        r.theta4 = theta;
        if (size() < 4) {
            r.ok = false;
            r.failure = "four profiles required";
            return r;
        }
        const auto& m4 = mu_[3];
        r.C4 = INFINITY;
        for (int k = 0; k <= K_; ++k)
            r.C4 = std::min(r.C4, (1.0 + std::pow(double(k), theta)) * std::abs(m4[k]));
        if (!(r.C4 > 0.0)) {
            r.ok = false;
            r.failure = "mu4 pairing vanishes";
        }
        return r;
    }

private:
    int K_ = 0;
    std::vector<FourierField> mu_;
};

enum class Model { KS, CH };

inline std::string to_string(Model m) { return m == Model::KS ? "KS" : "CH"; }

inline Model parse_model(const std::string& s) {
    if (s == "KS" || s == "ks") return Model::KS;
    if (s == "CH" || s == "ch") return Model::CH;
    throw ConfigError("unknown model '" + s + "' (expected KS or CH)");
}

// Five profiles for CH, four for KS.
inline ControlProfileSet standard_profiles(Model model, int K, int N = 0) {
    std::vector<FourierField> extra{quartic_bump_profile(K, N)};
    if (model == Model::CH) extra.push_back(cubic_odd_profile(K, N));
    return ControlProfileSet(K, N, extra);
}

}  // namespace bilinear
