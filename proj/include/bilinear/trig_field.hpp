#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "bilinear/error.hpp"
#include "bilinear/fft.hpp"

namespace bilinear {

using cplx = std::complex<double>;

constexpr double two_pi = 6.283185307179586476925286766559;

// Real function on the torus [0, 2pi) kept as Fourier coefficients c_k for
// 0 <= k <= K. Negative modes are implied by c_{-k} = conj(c_k), so realness
// holds by construction and never has to be repaired.
class FourierField {
public:
    FourierField() : FourierField(0, 2) {}
    explicit FourierField(int K, int N = 0)
        : K_(K), N_(std::max(N, 2 * K + 2)), c_(static_cast<std::size_t>(K) + 1, cplx{}) {
        if (K < 0) throw ConfigError("FourierField: negative truncation");
        if (N_ % 2) ++N_;
    }

    static FourierField constant(double value, int K, int N = 0) {
        FourierField f(K, N);
        f.c_[0] = value;
        return f;
    }

    // Samples on the uniform grid x_j = 2 pi j / M, any even M >= 2K + 2.
    static FourierField from_grid(const std::vector<double>& values, int K, int N = 0) {
        const int M = static_cast<int>(values.size());
        if (M < 2 * K + 2 || M % 2)
            throw ConfigError("from_grid: grid of size " + std::to_string(M) +
                              " cannot carry K = " + std::to_string(K));
        auto c = fft::forward(values);
        FourierField f(K, N == 0 ? M : N);
        for (int k = 0; k <= K; ++k) f.c_[k] = c[k];
        f.c_[0] = {f.c_[0].real(), 0.0};
        return f;
    }

    static FourierField from_function(const std::function<double(double)>& fn, int K, int N = 0) {
        const int M = std::max(N, 2 * K + 2) + (std::max(N, 2 * K + 2) % 2);
        std::vector<double> v(M);
        for (int j = 0; j < M; ++j) v[j] = fn(two_pi * j / M);
        return from_grid(v, K, M);
    }

    int K() const { return K_; }
    int N() const { return N_; }

    cplx operator[](int k) const {
        const int a = k < 0 ? -k : k;
        if (a > K_) return {};
        return k < 0 ? std::conj(c_[a]) : c_[a];
    }

    void set(int k, cplx value) {
        if (k < 0 || k > K_) throw ConfigError("FourierField::set: mode out of range");
        c_[k] = (k == 0) ? cplx{value.real(), 0.0} : value;
    }

    const std::vector<cplx>& half() const { return c_; }

    // Values on a uniform grid of M points (M even, M >= 2K + 2 not required:
    // modes above M/2 are dropped).
    std::vector<double> to_grid(int M) const {
        std::vector<cplx> c(c_.begin(), c_.begin() + std::min<std::size_t>(c_.size(), M / 2));
        return fft::backward(c, M);
    }
    std::vector<double> to_grid() const { return to_grid(N_); }

    double value_at(double x) const {
        double v = c_[0].real();
        for (int k = 1; k <= K_; ++k) v += 2.0 * (c_[k] * std::polar(1.0, k * x)).real();
        return v;
    }

    FourierField resized(int K) const {
        FourierField f(K, std::max(N_, 2 * K + 2));
        for (int k = 0; k <= std::min(K, K_); ++k) f.c_[k] = c_[k];
        return f;
    }

    bool is_constant() const {
        for (int k = 1; k <= K_; ++k)
            if (c_[k] != cplx{}) return false;
        return true;
    }

    FourierField& operator+=(const FourierField& o) {
        grow(o);
        for (int k = 0; k <= o.K_; ++k) c_[k] += o.c_[k];
        return *this;
    }
    FourierField& operator-=(const FourierField& o) {
        grow(o);
        for (int k = 0; k <= o.K_; ++k) c_[k] -= o.c_[k];
        return *this;
    }
    FourierField& operator*=(double a) {
        for (auto& z : c_) z *= a;
        return *this;
    }

    friend FourierField operator+(FourierField a, const FourierField& b) { return a += b; }
    friend FourierField operator-(FourierField a, const FourierField& b) { return a -= b; }
    friend FourierField operator*(double s, FourierField a) { return a *= s; }
    friend FourierField operator*(FourierField a, double s) { return a *= s; }
    friend FourierField operator-(FourierField a) { return a *= -1.0; }

    friend bool operator==(const FourierField& a, const FourierField& b) {
        return a.K_ == b.K_ && a.c_ == b.c_;
    }

private:
    void grow(const FourierField& o) {
        if (o.K_ > K_) {
            c_.resize(static_cast<std::size_t>(o.K_) + 1, cplx{});
            K_ = o.K_;
        }
        N_ = std::max(N_, o.N_);
    }

    int K_;
    int N_;
    std::vector<cplx> c_;
};

// Builders for the fixed low modes.
inline FourierField cos_mode(int n, int K, double amplitude = 1.0, int N = 0) {
    FourierField f(K, N);
    if (n == 0) f.set(0, amplitude);
    else f.set(n, {amplitude / 2.0, 0.0});
    return f;
}

inline FourierField sin_mode(int n, int K, double amplitude = 1.0, int N = 0) {
    FourierField f(K, N);
    if (n > 0) f.set(n, {0.0, -amplitude / 2.0});
    return f;
}

// Integer-order derivative: mode k is multiplied by (ik)^order. Higher
// orders are built by repeating the first-order step, so composing
// derivatives reproduces the direct result bit for bit.
inline FourierField derivative(const FourierField& f, int order) {
    if (order < 1) throw ConfigError("derivative: order must be positive");
    FourierField g = f;
    for (int r = 0; r < order; ++r) {
        FourierField h(g.K(), g.N());
        for (int k = 1; k <= g.K(); ++k) {
            const cplx z = g[k];
            h.set(k, {-k * z.imag(), k * z.real()});
        }
        g = std::move(h);
    }
    return g;
}

inline double sobolev_norm(const FourierField& f, double s) {
    double acc = std::norm(f[0]);
    for (int k = 1; k <= f.K(); ++k) acc += 2.0 * std::pow(1.0 + double(k) * k, s) * std::norm(f[k]);
    return std::sqrt(acc);
}

inline double l2_norm(const FourierField& f) { return sobolev_norm(f, 0.0); }

// Root mean square of grid values; equals l2_norm for band-limited fields.
inline double grid_l2_norm(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc / static_cast<double>(v.size()));
}

inline double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

constexpr double default_aliasing_budget = 1e-8;

namespace detail {

// Truncates a fine-grid spectrum to K' and measures what was cut off.
inline FourierField truncate_checked(const std::vector<cplx>& c, int Kout, int N, double budget) {
    double total = std::norm(c[0]);
    double tail = 0.0;
    for (std::size_t k = 1; k < c.size(); ++k) {
        const double e = 2.0 * std::norm(c[k]);
        total += e;
        if (static_cast<int>(k) > Kout) tail += e;
    }
    if (total > 0.0 && budget >= 0.0) {
        const double frac = std::sqrt(tail / total);
        if (frac > budget) throw AliasingBudgetExceeded(frac, budget);
    }
    FourierField f(Kout, N);
    for (int k = 0; k <= Kout && k < static_cast<int>(c.size()); ++k) f.set(k, c[k]);
    return f;
}

inline int oversampled_size(int N, int K) { return fft::good_size(std::max(N, 4 * K)); }

}  // namespace detail

// Applies map on a grid of at least 4K points; the part of the result above
// K' is measured and compared against the aliasing budget (a fraction of
// the L2 norm of the result).
inline FourierField pointwise_map(const FourierField& f, const std::function<double(double)>& map,
                                  int Kout = -1, double budget = default_aliasing_budget) {
    if (Kout < 0) Kout = f.K();
    const int M = detail::oversampled_size(f.N(), std::max(f.K(), Kout));
    auto v = f.to_grid(M);
    for (double& x : v) x = map(x);
    return detail::truncate_checked(fft::forward(v), Kout, f.N(), budget);
}

inline FourierField pointwise_combine(const FourierField& f, const FourierField& g,
                                      const std::function<double(double, double)>& map,
                                      int Kout = -1, double budget = default_aliasing_budget) {
    if (Kout < 0) Kout = std::max(f.K(), g.K());
    const int M = detail::oversampled_size(std::max(f.N(), g.N()), std::max({f.K(), g.K(), Kout}));
    auto a = f.to_grid(M);
    const auto b = g.to_grid(M);
    for (int j = 0; j < M; ++j) a[j] = map(a[j], b[j]);
    return detail::truncate_checked(fft::forward(a), Kout, std::max(f.N(), g.N()), budget);
}

// Dealiased product (3/2 zero padding). A constant factor takes the exact
// path so that multiplying by 1 reproduces the other field bit for bit.
inline FourierField product(const FourierField& f, const FourierField& g) {
    const int K = std::max(f.K(), g.K());
    const int N = std::max(f.N(), g.N());
    if (f.is_constant() || g.is_constant()) {
        const bool fc = f.is_constant();
        const double a = fc ? f[0].real() : g[0].real();
        FourierField r = (fc ? g : f).resized(K);
        r *= a;
        FourierField out(K, N);
        for (int k = 0; k <= K; ++k) out.set(k, r[k]);
        return out;
    }
    const int M = std::max(N, fft::good_size(3 * K + 2));
    auto a = f.to_grid(M);
    const auto b = g.to_grid(M);
    for (int j = 0; j < M; ++j) a[j] *= b[j];
    auto c = fft::forward(a);
    FourierField out(K, N);
    for (int k = 0; k <= K; ++k) out.set(k, c[k]);
    return out;
}

// ---- serialization -------------------------------------------------------

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_field_csv(std::ostream& os, const FourierField& f) {
    os << "k,re,im\n";
    for (int k = -f.K(); k <= f.K(); ++k) {
        const cplx z = f[k];
        os << k << ',' << fmt17(z.real()) << ',' << fmt17(z.imag()) << '\n';
    }
}

inline std::string field_sidecar_json(const FourierField& f) {
    return "{\"K\": " + std::to_string(f.K()) + ", \"N\": " + std::to_string(f.N()) + "}\n";
}

inline void save_field(const std::string& csv_path, const FourierField& f) {
    std::ofstream os(csv_path);
    if (!os) throw ConfigError("cannot write " + csv_path);
    write_field_csv(os, f);
    std::ofstream js(csv_path + ".json");
    js << field_sidecar_json(f);
}

// Reads rows k,re,im. Only k >= 0 rows are used; negative rows must be the
// conjugates and are checked loosely.
inline FourierField read_field_csv(std::istream& is, int N = 0) {
    std::string line;
    std::vector<std::pair<int, cplx>> rows;
    int K = 0;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("k,", 0) == 0) continue;
        std::stringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ','))
            throw ConfigError("malformed field row: " + line);
        const int k = std::stoi(a);
        rows.emplace_back(k, cplx(std::stod(b), std::stod(c)));
        K = std::max(K, std::abs(k));
    }
    FourierField f(K, N);
    for (auto& [k, z] : rows) {
        if (k >= 0) f.set(k, z);
    }
    for (auto& [k, z] : rows) {
        if (k < 0 && std::abs(std::conj(z) - f[-k]) > 1e-12 * (1.0 + std::abs(z)))
            throw ConfigError("field CSV violates Hermitian symmetry at k = " + std::to_string(k));
    }
    return f;
}

inline FourierField load_field(const std::string& path, int N = 0) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read " + path);
    return read_field_csv(is, N);
}

}  // namespace bilinear
