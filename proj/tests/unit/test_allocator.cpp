#include "nplmc/allocator.hpp"
#include "nplmc/error.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace nplmc;

namespace {

AllocationInputs independent(std::vector<double> sigma, double budget) {
    return {{{std::move(sigma), 0.0, 0}}, budget};
}

} // namespace

TEST(OptimalAllocation, Proportional) {
    const auto plan = optimal_allocation(independent({1, 2, 3}, 60));
    EXPECT_NEAR(plan.portfolios[0].independent[0], 10.0, 1e-12);
    EXPECT_NEAR(plan.portfolios[0].independent[1], 20.0, 1e-12);
    EXPECT_NEAR(plan.portfolios[0].independent[2], 30.0, 1e-12);
}

TEST(OptimalAllocation, BlockSharesOneCount) {
    const auto plan = optimal_allocation({{{{1, 1}, 2.0, 4}}, 8});
    const auto &p = plan.portfolios[0];
    EXPECT_NEAR(p.block, 4.0 / 3.0, 1e-12);
    EXPECT_NEAR(p.independent[0], 4.0 / 3.0, 1e-12);
    EXPECT_NEAR(p.independent[1], 4.0 / 3.0, 1e-12);
    EXPECT_NEAR(plan.cost(), 8.0, 1e-12);
}

TEST(OptimalAllocation, KktRatioConstant) {
    AllocationInputs in{{{{0.3, 5.0, 12.0}, 7.0, 9}, {{1.0, 0.01}, 0.0, 0}}, 777.0};
    const auto plan = optimal_allocation(in);
    EXPECT_NEAR(plan.cost(), 777.0, 1e-9);
    // sigma_i^2 / R_i^2 and, for a block, sigma_D^2 / (|D| r^2) are equal.
    const double ratio = 0.09 / std::pow(plan.portfolios[0].independent[0], 2);
    for (std::size_t j = 0; j < 2; ++j) {
        for (std::size_t i = 0; i < in.portfolios[j].independent.size(); ++i) {
            const double s = in.portfolios[j].independent[i];
            EXPECT_NEAR(s * s / std::pow(plan.portfolios[j].independent[i], 2) / ratio, 1.0, 1e-12);
        }
    }
    EXPECT_NEAR(49.0 / (9.0 * std::pow(plan.portfolios[0].block, 2)) / ratio, 1.0, 1e-12);
}

TEST(OptimalAllocation, BeatsPerturbations) {
    const auto in = independent({0.5, 1.5, 4.0, 9.0}, 100);
    const auto best = optimal_allocation(in);
    const double v = portfolio_variances(in, best)[0];
    for (int k = 0; k < 4; ++k) {
        auto p = best;
        p.portfolios[0].independent[k] *= 1.05;
        p.portfolios[0].independent[(k + 1) % 4] -= 0.05 * best.portfolios[0].independent[k];
        EXPECT_GT(portfolio_variances(in, p)[0], v);
    }
}

TEST(OptimalAllocation, Errors) {
    EXPECT_THROW(optimal_allocation(independent({0, 0}, 10)), DegenerateError);
    EXPECT_THROW(optimal_allocation(independent({1, -1}, 10)), ValidationError);
    EXPECT_THROW(optimal_allocation(independent({1, 1}, 0)), ValidationError);
}

TEST(Rounding, Convention) {
    EXPECT_EQ(round_count(0.3), 1u);
    EXPECT_EQ(round_count(0.0), 1u);
    EXPECT_EQ(round_count(2.4), 2u);
    EXPECT_EQ(round_count(2.5), 3u);
    EXPECT_EQ(round_count(1.0), 1u);
    RealPlan real{{{{0.3, 2.4, 2.5, 7.9}, 0.2, 3}}};
    const auto r = round_plan(real);
    EXPECT_EQ(r.portfolios[0].independent, (std::vector<std::uint32_t>{1, 2, 3, 8}));
    EXPECT_EQ(r.portfolios[0].block, 1u);
    EXPECT_LE(std::abs(r.cost() - real.cost()), rounding_bound(real) + 1e-12);
    EXPECT_NEAR(rounding_bound(real), 0.7 + 0.5 * 3 + 3 * 0.8, 1e-12);
}

TEST(PortfolioVariances, ZeroSigmaIgnored) {
    const auto in = independent({0.0, 2.0}, 10);
    RealPlan plan{{{{0.0, 4.0}, 0.0, 0}}};
    EXPECT_DOUBLE_EQ(portfolio_variances(in, plan)[0], 1.0);
}

TEST(PilotBlockVariance, ForcedPathsGiveZero) {
    std::vector<Account> block{{0, 800.0, 400.0, Segment::three, true, false},
                               {1, 650.0, 400.0, Segment::three, true, false}};
    EXPECT_EQ(pilot_block_variance(block, {}, 2, 3), 0.0);
}

TEST(PilotBlockVariance, AgreesWithIndependentReplication) {
    const auto pop = init_population({1000, {1.0}, {}}, 8);
    std::vector<Account> block;
    for (auto id : pop.portfolios[0].dependent_ids) {
        block.push_back(pop.account(id));
    }
    ASSERT_GT(block.size(), 20u);
    const double a = pilot_block_variance(block, {}, 5000, 1);
    const double b = pilot_block_variance(block, {}, 5000, 2);
    EXPECT_NEAR(a / b, 1.0, 0.10);
}

TEST(ReferenceVariances, OptimizedPlanBeatsEqual) {
    const auto pop = init_population({300, {1.0}, {}}, 13);
    const auto ref = reference_variances(pop, {}, 2000, 4, 0);
    const double budget = 30.0 * 300;
    const auto equal = to_real(equal_plan(pop, 30));
    const auto inputs = to_sigmas(ref, equal, budget);
    const auto optimized = round_plan(optimal_allocation(inputs));
    const double v_equal = estimator_variance(ref, equal).total;
    const double v_opt = estimator_variance(ref, optimized).total;
    EXPECT_LT(v_opt, v_equal);
    EXPECT_NEAR(optimized.cost(), budget, rounding_bound(optimal_allocation(inputs)) + 1e-9);
}
