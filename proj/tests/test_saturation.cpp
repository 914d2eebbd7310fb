#include <gtest/gtest.h>

#include <cmath>

#include "bilinear/saturation.hpp"

using namespace bilinear;

namespace {

const TrigPolynomial one = TrigPolynomial::constant(1);
TrigPolynomial c(int k, Rational r = 1) { return TrigPolynomial::cos_k(k, r); }
TrigPolynomial s(int k, Rational r = 1) { return TrigPolynomial::sin_k(k, r); }

}  // namespace

TEST(TrigPoly, ProductToSum) {
    EXPECT_EQ(c(1) * c(1), Rational(1, 2) * one + c(2, Rational(1, 2)));
    EXPECT_EQ(s(1) * s(1), Rational(1, 2) * one - c(2, Rational(1, 2)));
    EXPECT_EQ(s(1) * c(1), s(2, Rational(1, 2)));
    EXPECT_EQ(c(1) * s(3), s(4, Rational(1, 2)) + s(2, Rational(1, 2)));
    EXPECT_EQ(s(2) * c(3), s(5, Rational(1, 2)) - s(1, Rational(1, 2)));
    // sin^3 x = (3 sin x - sin 3x) / 4
    EXPECT_EQ(power(s(1), 3), s(1, Rational(3, 4)) - s(3, Rational(1, 4)));
}

TEST(TrigPoly, DerivativeAndEvaluation) {
    EXPECT_EQ(derivative(c(3, 2) + s(1)), s(3, -6) + c(1));
    EXPECT_TRUE(derivative(one).is_zero());
    const auto p = c(2, Rational(3, 7)) - s(5, Rational(1, 3)) + one;
    for (double x : {0.0, 0.4, 2.0, 5.9})
        EXPECT_NEAR(p(x), 1 + 3.0 / 7 * std::cos(2 * x) - std::sin(5 * x) / 3, 1e-15);
    const auto f = p.to_field(8);
    for (double x : {0.1, 1.3}) EXPECT_NEAR(f.value_at(x), p(x), 1e-15);
    // dyadic coefficients survive the trip through doubles exactly
    const auto q = c(2, Rational(3, 4)) - s(5, Rational(1, 8)) + one;
    EXPECT_EQ(from_field(q.to_field(8), 8), q);
}

TEST(TrigPoly, ExactRationalFromDouble) {
    EXPECT_EQ(exact_rational(0.5), Rational(1, 2));
    EXPECT_EQ(exact_rational(-3.0), Rational(-3));
    EXPECT_EQ(exact_rational(0.1).convert_to<double>(), 0.1);
    EXPECT_EQ(exact_rational(0.0), Rational(0));
}

TEST(Span, MembershipExamples) {
    const auto H0 = SpanBasis::H0(4);
    EXPECT_TRUE(membership(one, H0).member);
    const auto m = membership(c(2), H0);
    EXPECT_FALSE(m.member);
    EXPECT_EQ(m.residual, c(2));
    const auto H1 = generate_next(SpanBasis::H0(), 4);
    EXPECT_TRUE(membership(c(2), H1).member);
}

TEST(Span, GenerateNextOfH0) {
    const auto H1 = generate_next(SpanBasis::H0(), 4);
    // 1, cos x, sin x, cos 2x, sin 2x, cos 4x; the +-pair family misses sin 4x
    EXPECT_EQ(H1.size(), 6u);
    EXPECT_TRUE(membership(s(2), H1).member);
    EXPECT_TRUE(membership(c(4), H1).member);
    EXPECT_FALSE(membership(s(4), H1).member);
    EXPECT_TRUE(H1.contains(SpanBasis::H0(4)));
}

TEST(Span, ProductOfSquaredDerivativesIsInH1) {
    // (phi1')^2 (phi2')^2 with phi1 = sin x, phi2 = cos x; the quartic of the
    // sum minus the quartics of the parts leaves 4a^3 b + 6 a^2 b^2 + 4 a b^3,
    // and adding the minus-sign twin isolates 12 a^2 b^2
    const auto a = derivative(s(1)), b = derivative(c(1));
    const auto lhs = power(a + b, 4) - power(a, 4) - power(b, 4);
    EXPECT_EQ(lhs, Rational(4) * power(a, 3) * b + Rational(6) * power(a, 2) * power(b, 2) + Rational(4) * a * power(b, 3));
    const auto twin = power(a - b, 4) - power(a, 4) - power(b, 4);
    EXPECT_EQ(lhs + twin, Rational(12) * power(a, 2) * power(b, 2));
    const auto H1 = generate_next(SpanBasis::H0(), 4);
    EXPECT_TRUE(membership(power(a, 2) * power(b, 2), H1).member);
}

TEST(Span, ZeroGeneratorStaysZero) {
    const auto out = generate_next(SpanBasis(4), 4);
    EXPECT_EQ(out.size(), 0u);
}

TEST(Span, ChainIsMonotone) {
    const auto H0 = SpanBasis::H0(1);
    const auto H1 = generate_next(H0, 4);
    const auto H2 = generate_next(H1, 16);
    EXPECT_TRUE(H1.contains(H0));
    EXPECT_TRUE(H2.contains(H1));
    EXPECT_GT(H2.size(), H1.size());
    EXPECT_TRUE(membership(s(4), H2).member);
    // cos 3x needs three-term combinations (the ladder witness has depth 2),
    // which the pairwise family does not form
    EXPECT_FALSE(membership(c(3), H2).member);
    EXPECT_EQ(mode_ladder(3, 3).cos_tree.depth(), 2);
}

TEST(Span, BudgetExceeded) {
    EXPECT_THROW(generate_next(SpanBasis::H0(), 3), BudgetExceeded);
    EXPECT_THROW(generate_next(SpanBasis::H0(), 4, 4), BudgetExceeded);
    EXPECT_THROW(mode_ladder(6, 5), BudgetExceeded);
}

TEST(Expand, SquareExamples) {
    const auto t = expand_square_to_quartics(PhaseTree::generator(0, 0, 1));
    EXPECT_EQ(t.evaluate(), Rational(1, 2) * one + c(2, Rational(1, 2)));
    EXPECT_EQ(t.depth(), 1);
    EXPECT_TRUE(expand_square_to_quartics(PhaseTree::generator(5, 0, 0)).evaluate().is_zero());
    // the scalar identity behind the expansion: a = 2, b = 3
    EXPECT_EQ((625 + 1 - 2 * 16 - 2 * 81) / 12, 36);
}

TEST(Expand, SquareOfDeeperTree) {
    const auto& w = mode_ladder(2, 8);
    const auto t = expand_square_to_quartics(w.cos_tree);
    EXPECT_EQ(t.evaluate(), derivative(c(2)) * derivative(c(2)));
    EXPECT_EQ(t.depth(), 2);
}

TEST(Ladder, ExactWitnessesUpToEight) {
    ModeLadder ladder(8);
    for (int n = 1; n <= 8; ++n) {
        const auto& w = ladder.get(n);
        EXPECT_EQ(w.cos_tree.evaluate(), c(n)) << n;
        EXPECT_EQ(w.sin_tree.evaluate(), s(n)) << n;
    }
}

TEST(Ladder, DepthTable) {
    // observed witness depths of the ladder; frozen from exact evaluation runs
    const int expect[] = {0, 0, 1, 2, 2, 3, 3, 4, 3};
    ModeLadder ladder(8);
    for (int n = 1; n <= 8; ++n) {
        const auto& w = ladder.get(n);
        EXPECT_EQ(w.cos_tree.depth(), expect[n]) << n;
        EXPECT_EQ(w.sin_tree.depth(), expect[n]) << n;
    }
    // the witness depth itself drops at n = 8 (4 + 4 by squares is shallower
    // than 7 + 1); the chain level holding all modes up to n is the running
    // maximum, which is nondecreasing by construction
    EXPECT_EQ(mode_ladder(1, 1).cos_tree.kind(), PhaseTree::Kind::Generator);
    EXPECT_EQ(mode_ladder(2, 2).sin_tree.depth(), 1);
}

TEST(Ladder, DerivationTableCsv) {
    const auto csv = derivation_table_csv(3);
    EXPECT_EQ(csv.substr(0, 24), "n,mode,depth,node_count\n");
    EXPECT_NE(csv.find("1,cos,0,1\n"), std::string::npos);
    EXPECT_NE(csv.find("3,sin,2,"), std::string::npos);
}

TEST(PhaseTreeIO, SexprRoundTrip) {
    const auto& w = mode_ladder(3, 3);
    const auto text = w.sin_tree.to_sexpr();
    const auto back = PhaseTree::parse(text);
    EXPECT_EQ(back.to_sexpr(), text);
    EXPECT_EQ(back.evaluate(), s(3));
    EXPECT_EQ(back.depth(), w.sin_tree.depth());
    EXPECT_EQ(PhaseTree::parse("(gen 1/2 -3 0)").evaluate(), Rational(1, 2) * one + c(1, -3));
    EXPECT_THROW(PhaseTree::parse("(gen 1 2)"), ConfigError);
    EXPECT_THROW(PhaseTree::parse("(cubic (gen 0 0 0))"), ConfigError);
    EXPECT_THROW(PhaseTree::parse("(gen 1 2 3) x"), ConfigError);
}

TEST(PhaseTreeAlgebra, CombineKeepsDepth) {
    const auto a = mode_ladder(2, 2).cos_tree;
    const auto b = mode_ladder(3, 3).cos_tree;
    const auto ab = combine(a, b);
    EXPECT_EQ(ab.depth(), 2);
    EXPECT_EQ(ab.evaluate(), c(2) + c(3));
    EXPECT_EQ(scale(ab, Rational(-2, 3)).evaluate(), Rational(-2, 3) * (c(2) + c(3)));
    EXPECT_TRUE(scale(ab, 0).is_zero_generator());
}

TEST(Simplex, SmallProgram) {
    // min x + 2y + 3z, x + y + z = 1, x - y = 0 -> x = y = 1/2
    std::vector<std::vector<Rational>> A{{1, 1, 1}, {1, -1, 0}};
    const auto w = simplex_min(A, {1, 0}, {1, 2, 3});
    ASSERT_TRUE(w.has_value());
    EXPECT_EQ((*w)[0], Rational(1, 2));
    EXPECT_EQ((*w)[1], Rational(1, 2));
    EXPECT_EQ((*w)[2], Rational(0));
    // infeasible: x + y = -1 with x, y >= 0
    EXPECT_FALSE(simplex_min({{1, 1}}, {-1}, {1, 1}).has_value());
}

TEST(Realize, NonnegativeWeightsForFrequencyTwo) {
    const auto g = Rational(7, 10) * one + c(1, Rational(-1, 5)) + c(2, Rational(3, 10)) + s(2, Rational(-1, 8));
    const auto t = realize(g);
    EXPECT_EQ(t.evaluate(), g);
    EXPECT_TRUE(has_nonnegative_weights(t));
    EXPECT_EQ(t.depth(), 1);
    // +cos 2x alone needs a positive weight on -(psi')^4 too
    EXPECT_TRUE(has_nonnegative_weights(realize(c(2))));
    EXPECT_TRUE(has_nonnegative_weights(realize(c(2, -1))));
    EXPECT_EQ(realize(c(1, 2) + one).kind(), PhaseTree::Kind::Generator);
    EXPECT_THROW(realize(c(3)), BudgetExceeded);
}

TEST(Realize, LadderTreesCarryNegativeWeights) {
    EXPECT_FALSE(has_nonnegative_weights(mode_ladder(2, 2).cos_tree));
}

TEST(Certificate, LadderWitnessesAndAWrongTarget) {
    ModeLadder ladder(5);
    for (int n = 1; n <= 5; ++n) {
        const auto a = certify_witness(ladder.get(n).cos_tree, c(n));
        EXPECT_TRUE(a.exact && a.member) << n;
        const auto b = certify_witness(ladder.get(n).sin_tree, s(n));
        EXPECT_TRUE(b.exact && b.member) << n;
    }
    const auto bad = certify_witness(ladder.get(2).cos_tree, c(3));
    EXPECT_FALSE(bad.exact);
    EXPECT_FALSE(bad.residual.is_zero());
    EXPECT_FALSE(bad.member);
    // a generator spans only 1, cos x, sin x
    EXPECT_TRUE(certify_witness(PhaseTree::generator(0, 1, 0), c(1)).member);
    EXPECT_FALSE(certify_witness(PhaseTree::generator(0, 1, 0), c(2)).member);
}
