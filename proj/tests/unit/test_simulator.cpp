#include "nplmc/error.hpp"
#include "nplmc/estimators.hpp"
#include "nplmc/simulator.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

using namespace nplmc;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Account make(AccountId id, double balance, double credit, Segment s, bool eligible = false,
             bool paid = false) {
    return {id, balance, credit, s, eligible, paid};
}

} // namespace

TEST(PaymentProbability, Logits) {
    EXPECT_NEAR(payment_probability(0.0, Segment::one, false), 0.26894142, 1e-8);
    EXPECT_DOUBLE_EQ(payment_probability(0.0, Segment::two, false), 0.5);
    EXPECT_NEAR(payment_probability(5.0, Segment::three, true), sigmoid(-1.0), 1e-15);
    EXPECT_NEAR(payment_probability(2.0, Segment::one, true), sigmoid(-1.0 + 0.2 + 2.0), 1e-15);
    EXPECT_NEAR(payment_probability(-1.5, Segment::two, true), sigmoid(-0.6 + 2.0), 1e-15);
}

TEST(Schedule, Validation) {
    const auto s = TransitionSchedule::standard();
    EXPECT_EQ(s.times, (std::vector<int>{6, 12, 18, 24, 30, 36}));
    EXPECT_EQ(s.capacities, (std::vector<int>(6, 10)));
    EXPECT_NO_THROW(s.validate(84));
    EXPECT_THROW((TransitionSchedule{{6, 6}, {1, 1}}).validate(84), ValidationError);
    EXPECT_THROW((TransitionSchedule{{0}, {1}}).validate(84), ValidationError);
    EXPECT_THROW((TransitionSchedule{{85}, {1}}).validate(84), ValidationError);
    EXPECT_THROW((TransitionSchedule{{6}, {-1}}).validate(84), ValidationError);
    EXPECT_THROW((TransitionSchedule{{6, 12}, {1}}).validate(84), ValidationError);
}

TEST(SimulateIndependent, ZeroBalanceIsAbsorbing) {
    const auto path = simulate_independent(make(0, 0.0, 3.0, Segment::two), 84, {1, Stream::estimation}, 0);
    ASSERT_EQ(path.monthly.size(), 84u);
    EXPECT_EQ(path.total, 0.0);
    for (double x : path.monthly) {
        EXPECT_EQ(x, 0.0);
    }
}

TEST(SimulateIndependent, PathValidity) {
    for (std::uint32_t k = 0; k < 200; ++k) {
        const auto a = make(k, 500.0 + 37.3 * k, -3.0 + 0.04 * k, segment_from_number(1 + k % 3), false, k % 2);
        const auto p = simulate_independent(a, 84, {7, Stream::estimation}, k);
        double sum = 0.0;
        double balance = a.balance;
        for (double x : p.monthly) {
            EXPECT_TRUE(x == 0.0 || x == 50.0 || (x > 0.0 && x < 50.0 && x == balance));
            balance -= x;
            sum += x;
        }
        EXPECT_GE(balance, -1e-9);
        EXPECT_DOUBLE_EQ(sum, p.total);
        EXPECT_LE(p.total, a.balance + 1e-9);
    }
}

TEST(SimulateIndependent, NearCertainPayer) {
    // Paying every month has probability sigmoid(4) sigmoid(6)^9, about 0.9604.
    const double exact = sigmoid(4.0) * std::pow(sigmoid(6.0), 9);
    const auto a = make(0, 500.0, 10.0, Segment::two);
    int paid_in_ten = 0;
    const int trials = 5000;
    for (int k = 0; k < trials; ++k) {
        const auto p = simulate_independent(a, 84, {3, Stream::estimation}, static_cast<std::uint32_t>(k));
        bool ok = p.total == 500.0;
        for (int t = 0; t < 10; ++t) {
            ok = ok && p.monthly[t] == 50.0;
        }
        paid_in_ten += ok;
    }
    EXPECT_NEAR(static_cast<double>(paid_in_ten) / trials, exact, 4.0 * std::sqrt(exact * (1 - exact) / trials));
}

TEST(SimulateIndependent, BatchMatchesSingle) {
    const auto a = make(12, 3300.0, -0.7, Segment::one, false, true);
    std::vector<double> totals(37);
    std::vector<double> monthly(37 * 84);
    simulate_independent_batch(a, 84, {5, Stream::pilot}, 4, totals, monthly);
    for (std::uint32_t k = 0; k < 37; ++k) {
        const auto p = simulate_independent(a, 84, {5, Stream::pilot}, 4 + k);
        EXPECT_EQ(totals[k], p.total);
        for (int t = 0; t < 84; ++t) {
            EXPECT_EQ(monthly[k * 84 + t], p.monthly[t]);
        }
    }
}

TEST(DependentBlock, ZeroCapacityMatchesIndependent) {
    std::vector<Account> block;
    for (AccountId i = 0; i < 8; ++i) {
        block.push_back(make(100 + i, 1000.0 + 300.0 * i, -5.0 + 0.3 * i, Segment::three, true, i % 3 == 0));
    }
    const TransitionSchedule none{{6, 12, 18}, {0, 0, 0}};
    for (std::uint32_t k = 0; k < 20; ++k) {
        const auto joint = simulate_dependent_block(block, none, 84, {8, Stream::estimation}, k);
        double total = 0.0;
        for (std::size_t m = 0; m < block.size(); ++m) {
            const auto alone = simulate_independent(block[m], 84, {8, Stream::estimation}, k);
            EXPECT_EQ(joint.members[m].monthly, alone.monthly);
            EXPECT_EQ(joint.transition_month[m], 0);
            total += alone.total;
        }
        EXPECT_DOUBLE_EQ(joint.total, total);
    }
}

TEST(DependentBlock, AllQualifyingTransitionUnderSpareCapacity) {
    // Very low credit: no payment in month 5 is (almost) certain.
    std::vector<Account> block{make(0, 5000, -5.0, Segment::three, true), make(1, 5000, -5.2, Segment::three, true),
                               make(2, 5000, -4.9, Segment::three, true)};
    const TransitionSchedule s{{6}, {10}};
    for (std::uint32_t k = 0; k < 50; ++k) {
        const auto p = simulate_dependent_block(block, s, 84, {2, Stream::estimation}, k);
        for (std::size_t m = 0; m < 3; ++m) {
            if (p.members[m].monthly[4] == 0.0) {
                EXPECT_EQ(p.transition_month[m], 6);
            }
        }
    }
}

TEST(DependentBlock, HandTracedTwoAccountRun) {
    // Trace written out with raw Philox words: capacity 1 at month 6, the
    // higher credit score moves if both missed month 5.
    const std::vector<Account> block{make(3, 400.0, -1.0, Segment::three, true),
                                     make(9, 400.0, -0.5, Segment::three, true)};
    const TransitionSchedule s{{6}, {1}};
    const std::uint64_t seed = 77;
    const auto key = PhiloxKey::from_seed(seed);
    int checked = 0;
    for (std::uint32_t k = 0; k < 40; ++k) {
        std::array<double, 2> balance{400.0, 400.0};
        std::array<bool, 2> paid{false, false};
        std::array<Segment, 2> seg{Segment::three, Segment::three};
        std::array<std::array<double, 12>, 2> expect{};
        int moved = -1;
        for (int t = 0; t < 12; ++t) {
            if (t + 1 == 6) {
                if (!paid[1]) {
                    moved = 1; // credit -0.5 beats -1.0
                } else if (!paid[0]) {
                    moved = 0;
                }
                if (moved >= 0) {
                    seg[moved] = Segment::one;
                }
            }
            for (int m = 0; m < 2; ++m) {
                const auto w = philox4x32({static_cast<std::uint32_t>(t / 2), k, block[m].id,
                                           static_cast<std::uint32_t>(Stream::estimation)},
                                          key);
                const double u = (t % 2) ? unit_from_words(w[2], w[3]) : unit_from_words(w[0], w[1]);
                const double eta = (seg[m] == Segment::one ? -1.0 + 0.1 * block[m].credit_score
                                                           : -4.0 + 0.2 * block[m].credit_score) +
                                   (paid[m] ? 2.0 : 0.0);
                double x = 0.0;
                if (balance[m] > 0.0) {
                    paid[m] = u < sigmoid(eta);
                    x = paid[m] ? std::min(50.0, balance[m]) : 0.0;
                    balance[m] -= x;
                } else {
                    paid[m] = false;
                }
                expect[m][t] = x;
            }
        }
        const auto p = simulate_dependent_block(block, s, 12, {seed, Stream::estimation}, k);
        for (int m = 0; m < 2; ++m) {
            for (int t = 0; t < 12; ++t) {
                EXPECT_NEAR(p.members[m].monthly[t], expect[m][t], 0.0);
            }
            EXPECT_EQ(p.transition_month[m], moved == m ? 6 : 0);
        }
        checked += moved == 1;
    }
    EXPECT_GT(checked, 20);
}

TEST(DependentBlock, CapacityAndTimingRespected) {
    std::vector<Account> block;
    for (AccountId i = 0; i < 40; ++i) {
        block.push_back(make(i, 3000.0, -5.0 + 0.01 * i, Segment::three, i % 4 != 0));
    }
    const auto s = TransitionSchedule::standard();
    for (std::uint32_t k = 0; k < 20; ++k) {
        const auto p = simulate_dependent_block(block, s, 84, {4, Stream::estimation}, k);
        std::map<int, int> per_month;
        for (std::size_t m = 0; m < block.size(); ++m) {
            const int month = p.transition_month[m];
            if (month != 0) {
                ++per_month[month];
                EXPECT_TRUE(block[m].eligible);
                EXPECT_NE(std::find(s.times.begin(), s.times.end(), month), s.times.end());
            }
        }
        for (auto [month, count] : per_month) {
            EXPECT_LE(count, 10);
        }
    }
}

TEST(RunPlan, AllOnesGivesOnePathPerAccount) {
    const auto pop = init_population({300, {0.6, 0.4}, {}}, 9);
    const auto out = run_plan(pop, equal_plan(pop, 1), {}, {{1, Stream::estimation}, 1, MonthlyDetail::paths});
    std::size_t paths = 0;
    for (std::size_t j = 0; j < pop.portfolios.size(); ++j) {
        for (const auto &v : out.portfolios[j].independent_totals) {
            EXPECT_EQ(v.size(), 1u);
            ++paths;
        }
        for (const auto &v : out.portfolios[j].member_totals) {
            EXPECT_EQ(v.size(), 1u);
            ++paths;
        }
        EXPECT_EQ(out.portfolios[j].block_totals.size(), pop.portfolios[j].dependent_ids.empty() ? 0u : 1u);
    }
    EXPECT_EQ(paths, 300u);
}

TEST(RunPlan, ThreadCountDoesNotChangeOutput) {
    const auto pop = init_population({400, {0.9, 0.1}, {}}, 12);
    auto plan = equal_plan(pop, 5);
    plan.portfolios[0].independent[3] = 17;
    const SimulationSettings settings{};
    const auto one = run_plan(pop, plan, settings, {{31, Stream::estimation}, 1, MonthlyDetail::paths});
    const auto eight = run_plan(pop, plan, settings, {{31, Stream::estimation}, 8, MonthlyDetail::paths});
    for (std::size_t j = 0; j < pop.portfolios.size(); ++j) {
        const auto &a = one.portfolios[j];
        const auto &b = eight.portfolios[j];
        EXPECT_EQ(a.independent_totals, b.independent_totals);
        EXPECT_EQ(a.member_totals, b.member_totals);
        EXPECT_EQ(a.block_totals, b.block_totals);
        EXPECT_EQ(a.independent_paths, b.independent_paths);
        EXPECT_EQ(a.member_paths, b.member_paths);
    }
}

TEST(RunPlan, ShapeMismatchRejected) {
    const auto pop = init_population({50, {1.0}, {}}, 1);
    auto plan = equal_plan(pop, 2);
    plan.portfolios[0].independent.pop_back();
    EXPECT_THROW(run_plan(pop, plan, {}, {}), ValidationError);
    auto zero = equal_plan(pop, 2);
    zero.portfolios[0].independent[0] = 0;
    EXPECT_THROW(run_plan(pop, zero, {}, {}), ValidationError);
}

TEST(RunPlan, MuAgreesWithHighRReference) {
    const auto pop = init_population({1000, {1.0}, {}}, 17);
    const auto run = run_plan(pop, equal_plan(pop, 100), {}, {{1, Stream::estimation}, 0, MonthlyDetail::none});
    const auto ref = run_plan(pop, equal_plan(pop, 2000), {}, {{2, Stream::reference}, 0, MonthlyDetail::none});
    const double mu = estimate_mu(run).total;
    const double mu_ref = estimate_mu(ref).total;
    const auto var = estimator_variance(sample_variances(run), equal_plan(pop, 100)).total;
    const auto var_ref = estimator_variance(sample_variances(ref), equal_plan(pop, 2000)).total;
    EXPECT_LT(std::abs(mu - mu_ref), 3.0 * std::sqrt(var + var_ref));
}

TEST(MonthlyMoments, MatchesTwoPass) {
    MonthlyMoments mm;
    mm.reset(3);
    const std::vector<std::vector<double>> rows{{1, 0, 50}, {3, 0, 20}, {8, 0, 50}, {2, 0, 0}};
    for (const auto &r : rows) {
        mm.add(r);
    }
    EXPECT_EQ(mm.count, 4u);
    EXPECT_DOUBLE_EQ(mm.mean[0], 3.5);
    EXPECT_DOUBLE_EQ(mm.variance(0), ((1 - 3.5) * (1 - 3.5) + 0.25 + 4.5 * 4.5 + 1.5 * 1.5) / 3.0);
    EXPECT_DOUBLE_EQ(mm.variance(1), 0.0);
}
