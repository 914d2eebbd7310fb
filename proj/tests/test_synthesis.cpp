#include <gtest/gtest.h>

#include <cmath>

#include "bilinear/synthesis.hpp"

using namespace bilinear;

namespace {

Integrator make(Model m, int K) { return Integrator(m, standard_profiles(m, K)); }

FourierField one(int K) { return FourierField::constant(1.0, K); }

PhaseTree quartic_over(const PhaseTree& child, long w = 1) {
    return PhaseTree::quartic(PhaseTree::zero(), {{Rational(w), std::make_shared<const PhaseTree>(child)}});
}

}  // namespace

TEST(Conjugation, ForwardThenBackIsIdentity) {
    const int K = 32;
    const auto u0 = one(K) + cos_mode(1, K, 0.1);
    const auto phi = FourierField::constant(1.2, K) + sin_mode(1, K, 0.2);
    const double a = std::pow(5e-3, -0.25);
    const auto there = exp_times(-a * phi, u0, K);
    const auto back = exp_times(a * phi, there, K);
    EXPECT_LT(l2_norm(back - u0), 1e-10);
}

TEST(ConjugatedLimit, ConstantPhaseZeroControlTendsToIdentity) {
    const int K = 32;
    auto in = make(Model::KS, K);
    const auto u0 = one(K) + cos_mode(1, K, 0.1);
    const auto phi = FourierField::constant(1.5, K);
    const auto target = conjugated_limit_target(u0, phi, {0, 0, 0}, K);
    EXPECT_LT(l2_norm(target - u0), 1e-14);
    const auto rows = conjugated_limit_probe(in, u0, phi, {0, 0, 0}, {1e-2, 5e-3, 2.5e-3}, 1.0);
    ASSERT_EQ(rows.size(), 3u);
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LT(rows[i].error, rows[i - 1].error);
    EXPECT_LT(rows.back().error, 2e-2);
}

TEST(ConjugatedLimit, ConstantPhaseWithMeanControlScalesByExpR) {
    const int K = 32;
    auto in = make(Model::CH, K);
    const auto u0 = one(K) + cos_mode(1, K, 0.1);
    const auto phi = FourierField::constant(1.0, K);
    const double r = 0.3;
    const auto target = conjugated_limit_target(u0, phi, {r, 0, 0}, K);
    EXPECT_LT(l2_norm(target - std::exp(r) * u0), 1e-13);
    const auto rows = conjugated_limit_probe(in, u0, phi, {r, 0, 0}, {1e-2, 5e-3, 2.5e-3}, 1.0);
    EXPECT_LT(rows.back().error, rows.front().error);
}

TEST(ConjugatedLimit, StandardScenarioDecreasesForBothModels) {
    const int K = 32;
    const auto u0 = one(K) + cos_mode(1, K, 0.1);
    const auto phi = FourierField::constant(1.2, K) + sin_mode(1, K, 0.2);
    for (auto m : {Model::KS, Model::CH}) {
        auto in = make(m, K);
        const auto rows = conjugated_limit_probe(in, u0, phi, {0, 0, 0}, {1e-2, 5e-3, 2.5e-3}, 1.0);
        for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LT(rows[i].error, rows[i - 1].error) << to_string(m);
    }
}

TEST(ConjugatedLimit, RejectsNonPositivePhase) {
    const int K = 16;
    auto in = make(Model::KS, K);
    EXPECT_THROW(conjugated_limit_probe(in, one(K), sin_mode(1, K, 1.0), {0, 0, 0}, {1e-2}, 1.0), ConfigError);
}

TEST(ReachExponential, ZeroTreeReturnsStart) {
    const int K = 16;
    auto in = make(Model::KS, K);
    const auto u0 = one(K) + cos_mode(2, K, 0.2);
    const auto p = reach_exponential(in, u0, PhaseTree::zero(), 1e-3, 0.5);
    EXPECT_TRUE(p.stages.empty());
    EXPECT_TRUE(p.schedule.empty());
    EXPECT_LT(p.achieved_error, 1e-14);
    EXPECT_LT(l2_norm(p.terminal - u0), 1e-15);
}

TEST(ReachExponential, GeneratorLogTwoDoublesTheConstant) {
    const int K = 32;
    auto in = make(Model::KS, K);
    const auto tree = PhaseTree::generator(exact_rational(std::log(2.0)), 0, 0);
    const auto p = reach_exponential(in, one(K), tree, 1e-3, 0.5);
    ASSERT_EQ(p.stages.size(), 1u);
    EXPECT_EQ(p.stages[0].kind, "constant");
    EXPECT_LT(p.achieved_error, 1e-3);
    EXPECT_LT(sobolev_norm(p.terminal - FourierField::constant(2.0, K), 1.0), 1e-3);
    EXPECT_LE(p.total_duration, 0.5);
}

TEST(ReachExponential, QuarticOverSineReachesTarget) {
    const int K = 64;
    auto in = make(Model::KS, K);
    const auto u0 = one(K) + cos_mode(1, K, 0.1);
    const auto tree = quartic_over(PhaseTree::generator(0, 0, 1));
    SynthesisOptions so;
    so.s = 0.0;
    const auto p = reach_exponential(in, u0, tree, 5e-2, 0.5, so);
    // target e^{-cos^4 x} u0, built independently on the grid
    const int M = 256;
    auto g = u0.to_grid(M);
    for (int j = 0; j < M; ++j) g[j] *= std::exp(-std::pow(std::cos(two_pi * j / M), 4));
    const auto target = FourierField::from_grid(g, K);
    EXPECT_LT(l2_norm(p.terminal - target), 5e-2);
    int free = 0;
    for (const auto& st : p.stages) free += st.kind == "free";
    EXPECT_GE(free, 1);
    EXPECT_LE(p.total_duration, 0.5);
}

TEST(ReachExponential, NegativeQuarticWeightIsRefused) {
    const int K = 16;
    auto in = make(Model::KS, K);
    const auto tree = quartic_over(PhaseTree::generator(0, 1, 0), -1);
    EXPECT_THROW(reach_exponential(in, one(K), tree, 1e-2, 0.5), BudgetExceeded);
}

TEST(ReachExponential, CompiledScheduleReplaysAchievedError) {
    const int K = 32;
    auto in = make(Model::CH, K);
    const auto u0 = one(K) + sin_mode(1, K, 0.2);
    const auto tree = PhaseTree::generator(Rational(1, 5), Rational(1, 10), 0);
    const auto p = reach_exponential(in, u0, tree, 1e-3, 0.5);
    const auto target = exponential_target(u0, tree, K);
    const auto replay = in.flow(u0, p.schedule, p.schedule.total_duration()).u;
    EXPECT_NEAR(sobolev_norm(replay - target, 1.0), p.achieved_error, 1e-12);

    const auto back = ControlSchedule::from_json(nlohmann::json::parse(p.schedule.to_json().dump()));
    const auto replay2 = in.flow(u0, back, back.total_duration()).u;
    EXPECT_LT(l2_norm(replay2 - replay), 1e-14);
}

TEST(SteerSameSign, IdenticalEndsGiveEmptyPlan) {
    const int K = 16;
    auto in = make(Model::KS, K);
    const auto u = one(K) + sin_mode(1, K, 0.3);
    const auto p = steer_same_sign(in, u, u, 1e-2, 0.5);
    EXPECT_TRUE(p.stages.empty());
    EXPECT_LT(p.achieved_error, 1e-14);
}

TEST(SteerSameSign, ConstantsNeedOneConstantStage) {
    const int K = 16;
    auto in = make(Model::CH, K);
    const auto p =
        steer_same_sign(in, FourierField::constant(2.0, K), FourierField::constant(3.0, K), 1e-3, 0.5);
    ASSERT_EQ(p.stages.size(), 1u);
    EXPECT_EQ(p.stages[0].kind, "constant");
    EXPECT_NEAR(p.stages[0].lambda[0], std::log(1.5), 1e-12);
    EXPECT_EQ(p.stages[0].lambda[1], 0.0);
    EXPECT_EQ(p.stages[0].lambda[2], 0.0);
    EXPECT_LT(p.achieved_error, 1e-3);
}

TEST(SteerSameSign, PositiveTrigPairWithinTenPercent) {
    const int K = 32;
    const auto a = one(K) + sin_mode(1, K, 0.3);
    const auto b = FourierField::constant(1.5, K) + cos_mode(1, K, -0.2);
    for (auto m : {Model::KS, Model::CH}) {
        auto in = make(m, K);
        const auto p = steer_same_sign(in, a, b, 1e-1, 0.5);
        EXPECT_EQ(p.error_norm, "L2");
        EXPECT_LT(p.achieved_error, 1e-1) << to_string(m);
        EXPECT_LE(p.total_duration, 0.5);
        const auto replay = in.flow(a, p.schedule, p.schedule.total_duration()).u;
        EXPECT_NEAR(l2_norm(replay - b), p.achieved_error, 1e-12);
    }
}

TEST(SteerSameSign, OppositeSignsAreRejected) {
    const int K = 16;
    auto in = make(Model::KS, K);
    EXPECT_THROW(steer_same_sign(in, one(K), FourierField::constant(-1.0, K), 1e-2, 0.5), SignMismatch);
    // a target touching zero where the start does not
    EXPECT_THROW(steer_same_sign(in, one(K), one(K) + cos_mode(1, K, 1.0), 1e-2, 0.5), SignMismatch);
}

TEST(SteerWithHold, StationaryEndsHoldOnly) {
    const int K = 16;
    auto in = make(Model::KS, K);
    const auto p = steer_with_hold(in, one(K), one(K), 1e-6, 1.0);
    ASSERT_EQ(p.stages.size(), 1u);
    EXPECT_EQ(p.stages[0].role, "hold");
    EXPECT_EQ(p.schedule.total_duration(), 1.0);
    EXPECT_LT(p.achieved_error, 1e-12);
}

TEST(SteerWithHold, ExponentialOfSineToOneUsesFirstPhaseOnly) {
    const int K = 32;
    auto in = make(Model::CH, K);
    const int M = 128;
    std::vector<double> g(M);
    for (int j = 0; j < M; ++j) g[j] = std::exp(0.1 * std::sin(two_pi * j / M));
    const auto u0 = FourierField::from_grid(g, K);
    const auto p = steer_with_hold(in, u0, one(K), 1e-3, 1.0);
    for (const auto& st : p.stages) EXPECT_LT(st.unit, 1000);
    EXPECT_EQ(p.stages.back().role, "hold");
    EXPECT_EQ(p.total_duration, 1.0);
    EXPECT_LT(p.achieved_error, 1e-3);
}

TEST(SteerWithHold, TwoToHalfAtExactHorizon) {
    const int K = 32;
    for (auto m : {Model::KS, Model::CH}) {
        auto in = make(m, K);
        const auto p = steer_with_hold(in, FourierField::constant(2.0, K), FourierField::constant(0.5, K), 5e-2, 0.5);
        EXPECT_EQ(p.schedule.total_duration(), 0.5) << to_string(m);
        EXPECT_EQ(p.error_norm, "H^s");
        EXPECT_LT(p.achieved_error, 5e-2);
        const auto replay = in.flow(FourierField::constant(2.0, K), p.schedule, 0.5).u;
        EXPECT_NEAR(sobolev_norm(replay - FourierField::constant(0.5, K), 1.0), p.achieved_error, 1e-12);
    }
}

TEST(SteerWithHold, NegativeBranch) {
    const int K = 32;
    auto in = make(Model::CH, K);
    const auto u0 = FourierField::constant(-2.0, K) + cos_mode(1, K, 0.3);
    const auto u1 = FourierField::constant(-1.0, K);
    const auto p = steer_with_hold(in, u0, u1, 1e-2, 1.0);
    EXPECT_LT(p.achieved_error, 1e-2);
    EXPECT_EQ(p.total_duration, 1.0);
}

TEST(SteerWithHold, MixedSignsAreRejected) {
    const int K = 16;
    auto in = make(Model::KS, K);
    EXPECT_THROW(steer_with_hold(in, one(K), FourierField::constant(-1.0, K), 1e-2, 1.0), SignMismatch);
}

TEST(Plan, JsonCarriesStagesAndSchedule) {
    const int K = 16;
    auto in = make(Model::KS, K);
    const auto p =
        steer_with_hold(in, FourierField::constant(2.0, K), FourierField::constant(0.5, K), 5e-2, 0.5);
    const auto j = nlohmann::json::parse(p.to_json().dump());
    EXPECT_EQ(j.at("stages").size(), p.stages.size());
    EXPECT_EQ(j.at("error_norm"), "H^s");
    const auto back = ControlSchedule::from_json(j.at("schedule"));
    EXPECT_EQ(back.size(), p.schedule.size());
    EXPECT_EQ(back.total_duration(), p.schedule.total_duration());
}
