#pragma once

#include <boost/multiprecision/mpfr.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "bilinear/error.hpp"

namespace bilinear::mp {

using Real = boost::multiprecision::number<boost::multiprecision::mpfr_float_backend<0>,
                                           boost::multiprecision::et_off>;

inline unsigned bits_to_digits10(unsigned bits) { return static_cast<unsigned>(bits * 0.30103) + 1; }

// Working precision for newly created Real values on this thread.
class PrecisionScope {
public:
    explicit PrecisionScope(unsigned bits) : saved_(Real::default_precision()) {
        Real::default_precision(bits_to_digits10(bits));
    }
    ~PrecisionScope() { Real::default_precision(saved_); }
    PrecisionScope(const PrecisionScope&) = delete;
    PrecisionScope& operator=(const PrecisionScope&) = delete;

private:
    unsigned saved_;
};

struct Complex {
    Real re, im;

    Complex() : re(0), im(0) {}
    Complex(const Real& r, const Real& i = Real(0)) : re(r), im(i) {}
    explicit Complex(std::complex<double> z) : re(z.real()), im(z.imag()) {}

    Complex& operator+=(const Complex& o) {
        re += o.re;
        im += o.im;
        return *this;
    }
    Complex& operator-=(const Complex& o) {
        re -= o.re;
        im -= o.im;
        return *this;
    }
    friend Complex operator+(Complex a, const Complex& b) { return a += b; }
    friend Complex operator-(Complex a, const Complex& b) { return a -= b; }
    friend Complex operator-(const Complex& a) { return {-a.re, -a.im}; }
    friend Complex operator*(const Complex& a, const Complex& b) {
        return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    }
    friend Complex operator*(const Real& s, const Complex& a) { return {s * a.re, s * a.im}; }
    friend Complex operator/(const Complex& a, const Complex& b) {
        const Real d = b.re * b.re + b.im * b.im;
        return {(a.re * b.re + a.im * b.im) / d, (a.im * b.re - a.re * b.im) / d};
    }
    std::complex<double> to_double() const { return {re.convert_to<double>(), im.convert_to<double>()}; }
};

inline Complex conj(const Complex& z) { return {z.re, -z.im}; }
inline Real norm(const Complex& z) { return z.re * z.re + z.im * z.im; }
inline Real abs(const Complex& z) { return boost::multiprecision::sqrt(norm(z)); }

inline Complex exp(const Complex& z) {
    const Real m = boost::multiprecision::exp(z.re);
    if (z.im == 0) return {m, Real(0)};
    return {m * boost::multiprecision::cos(z.im), m * boost::multiprecision::sin(z.im)};
}

// (1 - e^{-z T}) / z, with the limit T at z = 0.
inline Complex one_minus_exp_over(const Complex& z, const Real& T) {
    if (z.re == 0 && z.im == 0) return {T, Real(0)};
    const Complex e = exp(-(T * z));
    return (Complex(Real(1)) - e) / z;
}

using Matrix = std::vector<std::vector<Complex>>;

// Solves A X = B by Gaussian elimination with partial pivoting. Throws
// SingularGramian when a pivot vanishes at the working precision.
inline Matrix solve(Matrix A, Matrix B) {
    const std::size_t n = A.size();
    const std::size_t m = B.empty() ? 0 : B[0].size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        Real best = norm(A[col][col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const Real v = norm(A[r][col]);
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (best == 0) throw SingularGramian("singular system in extended-precision solve");
        std::swap(A[col], A[piv]);
        std::swap(B[col], B[piv]);
        const Complex d = A[col][col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const Complex f = A[r][col] / d;
            if (f.re == 0 && f.im == 0) continue;
            for (std::size_t j = col; j < n; ++j) A[r][j] -= f * A[col][j];
            for (std::size_t j = 0; j < m; ++j) B[r][j] -= f * B[col][j];
        }
    }
    Matrix X(n, std::vector<Complex>(m));
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t r = n; r-- > 0;) {
            Complex acc = B[r][j];
            for (std::size_t c = r + 1; c < n; ++c) acc -= A[r][c] * X[c][j];
            X[r][j] = acc / A[r][r];
        }
    }
    return X;
}

// f(t) = sum_j c_j e^{-r_j t}, evaluated at the working precision.
struct ExpSum {
    std::vector<Complex> coef;
    std::vector<Complex> rate;
    unsigned bits = 256;

    bool empty() const { return coef.empty(); }

    std::complex<double> operator()(double t) const {
        PrecisionScope ps(bits);
        const Real tt(t);
        Complex acc;
        for (std::size_t j = 0; j < coef.size(); ++j) acc += coef[j] * exp(-(tt * rate[j]));
        return acc.to_double();
    }
};

}  // namespace bilinear::mp
