#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "bilinear/expression.hpp"
#include "bilinear/trig_field.hpp"

using namespace bilinear;

namespace {

FourierField random_field(int K, unsigned seed, double decay = 1.0) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> nd;
    FourierField f(K, 4 * K);
    f.set(0, nd(gen));
    for (int k = 1; k <= K; ++k) f.set(k, {nd(gen) / std::pow(k, decay), nd(gen) / std::pow(k, decay)});
    return f;
}

double max_diff(const FourierField& a, const FourierField& b) {
    double m = 0.0;
    for (int k = 0; k <= std::max(a.K(), b.K()); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

}  // namespace

TEST(TrigField, HermitianByConstruction) {
    const auto f = random_field(16, 1);
    for (int k = -16; k <= 16; ++k) EXPECT_EQ(f[-k], std::conj(f[k]));
    EXPECT_EQ(f[0].imag(), 0.0);
}

TEST(TrigField, GridRoundTrip) {
    const auto f = random_field(20, 2);
    const auto g = FourierField::from_grid(f.to_grid(64), 20);
    EXPECT_LT(max_diff(f, g), 1e-12 * sobolev_norm(f, 0.0));
}

TEST(TrigField, DerivativeExamples) {
    const int K = 8;
    EXPECT_LT(max_diff(derivative(cos_mode(1, K), 1), -sin_mode(1, K)), 1e-15);
    EXPECT_EQ(derivative(FourierField::constant(1.0, K), 4), FourierField(K));
    EXPECT_LT(max_diff(derivative(sin_mode(3, K), 2), -9.0 * sin_mode(3, K)), 1e-14);
}

TEST(TrigField, DerivativeComposesExactly) {
    const auto f = random_field(32, 3);
    EXPECT_EQ(derivative(derivative(f, 1), 1), derivative(f, 2));
    EXPECT_EQ(derivative(derivative(f, 2), 2), derivative(f, 4));
}

TEST(TrigField, PointwiseMapExamples) {
    const int K = 8;
    const auto one = pointwise_map(FourierField(K), [](double x) { return std::exp(x); });
    EXPECT_LT(max_diff(one, FourierField::constant(1.0, K)), 1e-15);
    const auto two = pointwise_map(FourierField::constant(std::log(2.0), K), [](double x) { return std::exp(x); });
    EXPECT_LT(max_diff(two, FourierField::constant(2.0, K)), 1e-15);
    const auto cube = pointwise_map(sin_mode(1, K), [](double x) { return x * x * x; });
    const auto expect = 0.75 * sin_mode(1, K) - 0.25 * sin_mode(3, K);
    EXPECT_LT(max_diff(cube, expect), 1e-15);
}

TEST(TrigField, PointwiseMapAliasingBudget) {
    // exp(5 cos x) has a slowly decaying spectrum; truncating at K' = 4 drops
    // far more than 1e-8 of the mass
    const auto f = 5.0 * cos_mode(1, 32);
    EXPECT_THROW(pointwise_map(f, [](double x) { return std::exp(x); }, 4), AliasingBudgetExceeded);
    EXPECT_NO_THROW(pointwise_map(f, [](double x) { return std::exp(x); }, 32));
}

TEST(TrigField, ProductExamples) {
    const int K = 8;
    const auto g = random_field(K, 4);
    EXPECT_EQ(product(FourierField::constant(1.0, K), g), product(g, FourierField::constant(1.0, K)));
    EXPECT_LT(max_diff(product(FourierField::constant(1.0, K), g), g), 1e-15);
    const auto cc = product(cos_mode(1, K), cos_mode(1, K));
    EXPECT_LT(max_diff(cc, FourierField::constant(0.5, K) + 0.5 * cos_mode(2, K)), 1e-15);
    const auto sc = product(sin_mode(1, K), cos_mode(1, K));
    EXPECT_LT(max_diff(sc, 0.5 * sin_mode(2, K)), 1e-15);
}

TEST(TrigField, ProductCommutesBitwise) {
    const auto f = random_field(24, 5), g = random_field(24, 6);
    EXPECT_EQ(product(f, g), product(g, f));
}

TEST(TrigField, ProductDealiased) {
    // product of two band-limited fields with K = 12 has band 24; modes up
    // to 12 must be exact against a direct convolution
    const auto f = random_field(12, 7), g = random_field(12, 8);
    const auto p = product(f, g);
    for (int k = 0; k <= 12; ++k) {
        cplx acc = 0.0;
        for (int j = -12; j <= 12; ++j) acc += f[j] * g[k - j];
        EXPECT_LT(std::abs(acc - p[k]), 1e-13);
    }
}

TEST(TrigField, SobolevNormExamples) {
    EXPECT_EQ(sobolev_norm(FourierField(4), 1.0), 0.0);
    FourierField f(4);
    f.set(1, 1.0);  // e^{ix} + e^{-ix}
    EXPECT_NEAR(sobolev_norm(f, 0.0), std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(sobolev_norm(f, 1.0), 2.0, 1e-15);
}

TEST(TrigField, Parseval) {
    const auto f = random_field(30, 9);
    const double a = sobolev_norm(f, 0.0);
    const double b = grid_l2_norm(f.to_grid(128));
    EXPECT_LT(std::abs(a - b), 1e-10 * a);
}

TEST(TrigField, CsvRoundTripIsExact) {
    const auto f = random_field(10, 10);
    std::stringstream ss;
    write_field_csv(ss, f);
    const auto g = read_field_csv(ss, f.N());
    EXPECT_EQ(f, g);
    EXPECT_EQ(field_sidecar_json(f), "{\"K\": 10, \"N\": 40}\n");
}

TEST(TrigField, CsvRejectsNonHermitian) {
    std::stringstream ss("k,re,im\n-1,1,1\n0,0,0\n1,1,1\n");
    EXPECT_THROW(read_field_csv(ss), ConfigError);
}

TEST(Expression, EvaluatesAndProjects) {
    const int K = 16;
    const auto f = parse_field("2 + 0.5*sin(x) - cos(3x)/4", K);
    EXPECT_NEAR(f[0].real(), 2.0, 1e-14);
    EXPECT_NEAR(f[1].imag(), -0.25, 1e-14);
    EXPECT_NEAR(f[3].real(), -0.125, 1e-14);
    EXPECT_NEAR(FieldExpression("-(1 + pi) * 2")(0.3), -2 * (1 + std::acos(-1.0)), 1e-15);
    EXPECT_NEAR(FieldExpression("exp(cos(2*x))")(0.7), std::exp(std::cos(1.4)), 1e-15);
    // exp(cos x) = I0(1) + 2 sum I_k(1) cos kx
    EXPECT_NEAR(parse_field("exp(cos(x))", K)[0].real(), std::cyl_bessel_i(0.0, 1.0), 1e-14);
}

TEST(Expression, Rejects) {
    for (const char* bad : {"x", "sin(1.5x)", "1 +", "cos(x", "foo(x)", "2 3", "1/0", ""})
        EXPECT_THROW(parse_field(bad, 8), ConfigError) << bad;
}
