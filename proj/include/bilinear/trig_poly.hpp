#pragma once

#include <boost/multiprecision/gmp.hpp>

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <utility>

#include "bilinear/error.hpp"
#include "bilinear/trig_field.hpp"

namespace bilinear {

// Expression templates off: intermediate values are often held in auto.
using Rational = boost::multiprecision::number<boost::multiprecision::gmp_rational, boost::multiprecision::et_off>;

inline std::string to_string(const Rational& r) { return r.str(); }

inline Rational parse_rational(const std::string& s) {
    try {
        return Rational(s);
    } catch (const std::exception&) {
        throw ConfigError("not a rational number: '" + s + "'");
    }
}

// Exact value of a double (every finite double is a dyadic rational).
inline Rational exact_rational(double x) {
    if (!std::isfinite(x)) throw ConfigError("exact_rational: non-finite value");
    int e = 0;
    double m = std::frexp(x, &e);
    // m * 2^53 is an integer
    const auto mant = static_cast<long long>(std::ldexp(m, 53));
    Rational r(mant);
    e -= 53;
    Rational p2 = 1;
    for (int i = 0; i < std::abs(e); ++i) p2 *= 2;
    return e >= 0 ? r * p2 : r / p2;
}

// Finite sum a_0 + sum_k (a_k cos kx + b_k sin kx) with rational coefficients.
class TrigPolynomial {
public:
    struct Pair {
        Rational a, b;
    };

    TrigPolynomial() = default;

    static TrigPolynomial constant(const Rational& c) {
        TrigPolynomial p;
        p.add_cos(0, c);
        return p;
    }
    static TrigPolynomial cos_k(int k, const Rational& c = 1) {
        TrigPolynomial p;
        p.add_cos(k, c);
        return p;
    }
    static TrigPolynomial sin_k(int k, const Rational& c = 1) {
        TrigPolynomial p;
        p.add_sin(k, c);
        return p;
    }

    void add_cos(int k, const Rational& c) {
        if (k < 0) k = -k;
        if (c == 0) return;
        terms_[k].a += c;
        prune(k);
    }
    // sin(-k x) = -sin(kx)
    void add_sin(int k, const Rational& c) {
        if (k == 0 || c == 0) return;
        if (k < 0) {
            terms_[-k].b -= c;
            prune(-k);
        } else {
            terms_[k].b += c;
            prune(k);
        }
    }

    Rational cos_coeff(int k) const {
        auto it = terms_.find(k);
        return it == terms_.end() ? Rational(0) : it->second.a;
    }
    Rational sin_coeff(int k) const {
        auto it = terms_.find(k);
        return it == terms_.end() ? Rational(0) : it->second.b;
    }

    const std::map<int, Pair>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    int max_frequency() const { return terms_.empty() ? 0 : terms_.rbegin()->first; }

    TrigPolynomial& operator+=(const TrigPolynomial& o) {
        for (const auto& [k, p] : o.terms_) {
            add_cos(k, p.a);
            add_sin(k, p.b);
        }
        return *this;
    }
    TrigPolynomial& operator-=(const TrigPolynomial& o) {
        for (const auto& [k, p] : o.terms_) {
            add_cos(k, -p.a);
            add_sin(k, -p.b);
        }
        return *this;
    }
    TrigPolynomial& operator*=(const Rational& r) {
        if (r == 0) {
            terms_.clear();
            return *this;
        }
        for (auto& [k, p] : terms_) {
            p.a *= r;
            p.b *= r;
        }
        return *this;
    }

    friend TrigPolynomial operator+(TrigPolynomial a, const TrigPolynomial& b) { return a += b; }
    friend TrigPolynomial operator-(TrigPolynomial a, const TrigPolynomial& b) { return a -= b; }
    friend TrigPolynomial operator-(TrigPolynomial a) { return a *= Rational(-1); }
    friend TrigPolynomial operator*(const Rational& r, TrigPolynomial a) { return a *= r; }

    // Product to sum:
    //   cos a cos b = (cos(a-b) + cos(a+b)) / 2
    //   sin a sin b = (cos(a-b) - cos(a+b)) / 2
    //   sin a cos b = (sin(a+b) + sin(a-b)) / 2
    friend TrigPolynomial operator*(const TrigPolynomial& f, const TrigPolynomial& g) {
        TrigPolynomial out;
        const Rational half(1, 2);
        for (const auto& [m, p] : f.terms_) {
            for (const auto& [n, q] : g.terms_) {
                if (p.a != 0 && q.a != 0) {
                    const Rational c = half * p.a * q.a;
                    out.add_cos(m - n, c);
                    out.add_cos(m + n, c);
                }
                if (p.b != 0 && q.b != 0) {
                    const Rational c = half * p.b * q.b;
                    out.add_cos(m - n, c);
                    out.add_cos(m + n, -c);
                }
                if (p.b != 0 && q.a != 0) {
                    const Rational c = half * p.b * q.a;
                    out.add_sin(m + n, c);
                    out.add_sin(m - n, c);
                }
                if (p.a != 0 && q.b != 0) {
                    const Rational c = half * p.a * q.b;
                    out.add_sin(n + m, c);
                    out.add_sin(n - m, c);
                }
            }
        }
        return out;
    }

    friend bool operator==(const TrigPolynomial& f, const TrigPolynomial& g) {
        if (f.terms_.size() != g.terms_.size()) return false;
        for (auto i = f.terms_.begin(), j = g.terms_.begin(); i != f.terms_.end(); ++i, ++j)
            if (i->first != j->first || i->second.a != j->second.a || i->second.b != j->second.b)
                return false;
        return true;
    }
    friend bool operator!=(const TrigPolynomial& f, const TrigPolynomial& g) { return !(f == g); }

    double operator()(double x) const {
        double v = 0.0;
        for (const auto& [k, p] : terms_)
            v += p.a.convert_to<double>() * std::cos(k * x) + p.b.convert_to<double>() * std::sin(k * x);
        return v;
    }

    FourierField to_field(int K, int N = 0) const {
        FourierField f(K, N);
        for (const auto& [k, p] : terms_) {
            if (k > K) throw ConfigError("to_field: frequency above truncation");
            const double a = p.a.convert_to<double>(), b = p.b.convert_to<double>();
            if (k == 0) f.set(0, a);
            else f.set(k, {a / 2.0, -b / 2.0});
        }
        return f;
    }

    std::string str() const {
        if (terms_.empty()) return "0";
        std::ostringstream os;
        bool first = true;
        auto emit = [&](const Rational& c, const std::string& basis) {
            if (c == 0) return;
            if (!first) os << (c < 0 ? " - " : " + ");
            else if (c < 0) os << "-";
            first = false;
            const Rational m = c < 0 ? Rational(-c) : c;
            if (basis.empty()) os << m.str();
            else if (m == 1) os << basis;
            else os << m.str() << "*" << basis;
        };
        for (const auto& [k, p] : terms_) {
            if (k == 0) emit(p.a, "");
            else {
                const std::string arg = k == 1 ? "x" : std::to_string(k) + "x";
                emit(p.a, "cos(" + arg + ")");
                emit(p.b, "sin(" + arg + ")");
            }
        }
        return os.str();
    }

private:
    void prune(int k) {
        auto it = terms_.find(k);
        if (it != terms_.end() && it->second.a == 0 && it->second.b == 0) terms_.erase(it);
    }

    std::map<int, Pair> terms_;
};

inline TrigPolynomial derivative(const TrigPolynomial& f) {
    TrigPolynomial out;
    for (const auto& [k, p] : f.terms()) {
        if (k == 0) continue;
        out.add_cos(k, Rational(k) * p.b);
        out.add_sin(k, Rational(-k) * p.a);
    }
    return out;
}

inline TrigPolynomial power(const TrigPolynomial& f, int n) {
    TrigPolynomial out = TrigPolynomial::constant(1);
    for (int i = 0; i < n; ++i) out = out * f;
    return out;
}

// (f')^4, the building block of the generation rule.
inline TrigPolynomial quartic_of_derivative(const TrigPolynomial& f) {
    const auto d = derivative(f);
    const auto d2 = d * d;
    return d2 * d2;
}

// Rounds a double field to rationals mode by mode (exact binary values).
inline TrigPolynomial from_field(const FourierField& f, int cap) {
    TrigPolynomial p;
    p.add_cos(0, exact_rational(f[0].real()));
    for (int k = 1; k <= std::min(cap, f.K()); ++k) {
        p.add_cos(k, exact_rational(2.0 * f[k].real()));
        p.add_sin(k, exact_rational(-2.0 * f[k].imag()));
    }
    return p;
}

}  // namespace bilinear
