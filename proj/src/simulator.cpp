#include "nplmc/simulator.hpp"

#include "nplmc/error.hpp"
#include "nplmc/kernels.hpp"
#include "nplmc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace nplmc {

TransitionSchedule TransitionSchedule::standard() {
    return {{6, 12, 18, 24, 30, 36}, {10, 10, 10, 10, 10, 10}};
}

void TransitionSchedule::validate(int horizon) const {
    if (times.size() != capacities.size()) {
        throw ValidationError("transition schedule: times and capacities differ in length");
    }
    for (std::size_t m = 0; m < times.size(); ++m) {
        if (times[m] < 1 || times[m] > horizon) {
            throw ValidationError("transition schedule: month " + std::to_string(times[m]) +
                                  " outside [1, " + std::to_string(horizon) + "]");
        }
        if (m > 0 && times[m] <= times[m - 1]) {
            throw ValidationError("transition schedule: months must be strictly increasing");
        }
        if (capacities[m] < 0) {
            throw ValidationError("transition schedule: negative capacity");
        }
    }
}

double payment_probability(double credit_score, Segment segment, bool paid_prev) noexcept {
    const double lag = paid_prev ? 2.0 : 0.0;
    double eta = 0.0;
    switch (segment) {
    case Segment::one:
        eta = -1.0 + 0.1 * credit_score + lag;
        break;
    case Segment::two:
        eta = 0.4 * credit_score + lag;
        break;
    case Segment::three:
        eta = -4.0 + 0.2 * credit_score + lag;
        break;
    }
    return 1.0 / (1.0 + std::exp(-eta));
}

namespace {

kernels::IndependentPathJob make_job(const Account &account, int horizon, RunKey key) {
    kernels::IndependentPathJob job;
    job.balance = account.balance;
    job.p_after_miss = payment_probability(account.credit_score, account.segment, false);
    job.p_after_pay = payment_probability(account.credit_score, account.segment, true);
    job.paid_last_month = account.paid_last_month;
    job.horizon = horizon;
    job.key = PhiloxKey::from_seed(key.seed);
    job.stream = static_cast<std::uint32_t>(key.stream);
    job.account = account.id;
    return job;
}

void check_horizon(int horizon) {
    if (horizon < 1) {
        throw ValidationError("horizon must be at least one month");
    }
}

} // namespace

CollectionsPath simulate_independent(const Account &account, int horizon, RunKey key,
                                     std::uint32_t realisation) {
    check_horizon(horizon);
    CollectionsPath path;
    path.monthly.resize(static_cast<std::size_t>(horizon));
    path.total = kernels::simulate_one(make_job(account, horizon, key), realisation, path.monthly.data());
    return path;
}

void simulate_independent_batch(const Account &account, int horizon, RunKey key,
                                std::uint32_t first, std::span<double> totals,
                                std::span<double> monthly) {
    check_horizon(horizon);
    if (!monthly.empty() && monthly.size() != totals.size() * static_cast<std::size_t>(horizon)) {
        throw ValidationError("simulate_independent_batch: monthly buffer has the wrong size");
    }
    auto job = make_job(account, horizon, key);
    job.first_realisation = first;
    job.count = totals.size();
    job.totals = totals.data();
    job.monthly = monthly.empty() ? nullptr : monthly.data();
    kernels::active().simulate_independent(job);
}

BlockPath simulate_dependent_block(std::span<const Account> accounts,
                                   const TransitionSchedule &schedule, int horizon, RunKey key,
                                   std::uint32_t realisation) {
    check_horizon(horizon);
    const std::size_t n = accounts.size();
    BlockPath out;
    out.members.resize(n);
    out.transition_month.assign(n, 0);

    std::vector<double> balance(n);
    std::vector<char> paid(n);
    std::vector<Segment> segment(n);
    std::vector<CounterStream> rng;
    rng.reserve(n);
    for (std::size_t m = 0; m < n; ++m) {
        balance[m] = accounts[m].balance;
        paid[m] = accounts[m].paid_last_month;
        segment[m] = accounts[m].segment;
        out.members[m].monthly.assign(static_cast<std::size_t>(horizon), 0.0);
        rng.emplace_back(key.seed, key.stream, accounts[m].id, realisation);
    }

    std::vector<std::size_t> candidates;
    std::size_t next_transition = 0;
    for (int t = 0; t < horizon; ++t) {
        const int month = t + 1;
        while (next_transition < schedule.times.size() && schedule.times[next_transition] < month) {
            ++next_transition;
        }
        if (next_transition < schedule.times.size() && schedule.times[next_transition] == month) {
            candidates.clear();
            for (std::size_t m = 0; m < n; ++m) {
                if (accounts[m].eligible && segment[m] == Segment::three && !paid[m]) {
                    candidates.push_back(m);
                }
            }
            const auto capacity = static_cast<std::size_t>(schedule.capacities[next_transition]);
            const auto take = std::min(capacity, candidates.size());
            std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                              candidates.end(), [&](std::size_t a, std::size_t b) {
                                  if (accounts[a].credit_score != accounts[b].credit_score) {
                                      return accounts[a].credit_score > accounts[b].credit_score;
                                  }
                                  return accounts[a].id < accounts[b].id;
                              });
            for (std::size_t c = 0; c < take; ++c) {
                segment[candidates[c]] = Segment::one;
                out.transition_month[candidates[c]] = month;
            }
        }
        for (std::size_t m = 0; m < n; ++m) {
            double x = 0.0;
            if (balance[m] > 0.0) {
                const double u = rng[m].uniform(static_cast<std::uint32_t>(t));
                const bool pays = u < payment_probability(accounts[m].credit_score, segment[m], paid[m] != 0);
                paid[m] = pays;
                if (pays) {
                    x = std::min(balance[m], kernels::kPaymentCap);
                    balance[m] -= x;
                }
            } else {
                paid[m] = false;
            }
            out.members[m].monthly[static_cast<std::size_t>(t)] = x;
            out.members[m].total += x;
        }
    }
    for (const auto &member : out.members) {
        out.total += member.total;
    }
    return out;
}

void MonthlyMoments::reset(int horizon) {
    mean.assign(static_cast<std::size_t>(horizon), 0.0);
    m2.assign(static_cast<std::size_t>(horizon), 0.0);
    count = 0;
}

void MonthlyMoments::add(std::span<const double> month_values) {
    ++count;
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t t = 0; t < month_values.size(); ++t) {
        const double delta = month_values[t] - mean[t];
        mean[t] += delta * inv;
        m2[t] += delta * (month_values[t] - mean[t]);
    }
}

double MonthlyMoments::variance(std::size_t t) const {
    if (count < 2) {
        throw PreconditionError("monthly variance needs at least two realisations");
    }
    return std::max(0.0, m2.at(t) / static_cast<double>(count - 1));
}

SimulationOutput run_plan(const Population &pop, const IntegerPlan &plan,
                          const SimulationSettings &settings, const RunOptions &options) {
    check_horizon(settings.horizon);
    settings.schedule.validate(settings.horizon);
    validate_plan(pop, plan);

    const int horizon = settings.horizon;
    const auto h = static_cast<std::size_t>(horizon);
    const bool want_months = options.detail != MonthlyDetail::none;
    const bool want_paths = options.detail == MonthlyDetail::paths;

    SimulationOutput out;
    out.horizon = horizon;
    out.detail = options.detail;
    out.portfolios.resize(pop.portfolios.size());

    struct Task {
        std::size_t portfolio;
        bool block;
        std::size_t index; // independent slot or block realisation
    };
    std::vector<Task> tasks;
    std::vector<std::vector<Account>> block_accounts(pop.portfolios.size());
    std::vector<std::vector<BlockPath>> block_paths(pop.portfolios.size());

    for (std::size_t j = 0; j < pop.portfolios.size(); ++j) {
        const auto &idx = pop.portfolios[j];
        const auto &counts = plan.portfolios[j];
        auto &po = out.portfolios[j];
        po.independent_totals.resize(idx.independent_ids.size());
        if (want_months) {
            po.independent_monthly.resize(idx.independent_ids.size());
        }
        if (want_paths) {
            po.independent_paths.resize(idx.independent_ids.size());
        }
        for (std::size_t k = 0; k < idx.independent_ids.size(); ++k) {
            po.independent_totals[k].resize(counts.independent[k]);
            tasks.push_back({j, false, k});
        }
        if (!idx.dependent_ids.empty()) {
            for (auto id : idx.dependent_ids) {
                block_accounts[j].push_back(pop.account(id));
            }
            block_paths[j].resize(counts.block);
            for (std::uint32_t r = 0; r < counts.block; ++r) {
                tasks.push_back({j, true, r});
            }
        }
    }

    parallel_for(tasks.size(), options.threads, [&](std::size_t t) {
        const Task &task = tasks[t];
        if (task.block) {
            block_paths[task.portfolio][task.index] = simulate_dependent_block(
                block_accounts[task.portfolio], settings.schedule, horizon, options.key,
                static_cast<std::uint32_t>(task.index));
            return;
        }
        auto &po = out.portfolios[task.portfolio];
        const Account &account = pop.account(pop.portfolios[task.portfolio].independent_ids[task.index]);
        auto &totals = po.independent_totals[task.index];
        std::vector<double> months(want_months ? totals.size() * h : 0);
        simulate_independent_batch(account, horizon, options.key, 0, totals, months);
        if (want_months) {
            auto &mm = po.independent_monthly[task.index];
            mm.reset(horizon);
            for (std::size_t k = 0; k < totals.size(); ++k) {
                mm.add(std::span<const double>(months).subspan(k * h, h));
            }
            if (want_paths) {
                po.independent_paths[task.index] = std::move(months);
            }
        }
    });

    for (std::size_t j = 0; j < pop.portfolios.size(); ++j) {
        const auto &paths = block_paths[j];
        if (block_accounts[j].empty()) {
            continue;
        }
        auto &po = out.portfolios[j];
        const std::size_t members = block_accounts[j].size();
        po.member_totals.assign(members, std::vector<double>(paths.size()));
        po.block_totals.resize(paths.size());
        if (want_months) {
            po.member_monthly.resize(members);
            for (auto &mm : po.member_monthly) {
                mm.reset(horizon);
            }
            po.block_monthly.reset(horizon);
        }
        if (want_paths) {
            po.member_paths.assign(members, std::vector<double>(paths.size() * h));
        }
        std::vector<double> block_month(h);
        for (std::size_t r = 0; r < paths.size(); ++r) {
            po.block_totals[r] = paths[r].total;
            std::fill(block_month.begin(), block_month.end(), 0.0);
            for (std::size_t m = 0; m < members; ++m) {
                const auto &member = paths[r].members[m];
                po.member_totals[m][r] = member.total;
                if (want_months) {
                    po.member_monthly[m].add(member.monthly);
                    for (std::size_t t = 0; t < h; ++t) {
                        block_month[t] += member.monthly[t];
                    }
                }
                if (want_paths) {
                    std::copy(member.monthly.begin(), member.monthly.end(),
                              po.member_paths[m].begin() + static_cast<std::ptrdiff_t>(r * h));
                }
            }
            if (want_months) {
                po.block_monthly.add(block_month);
            }
        }
    }
    return out;
}

} // namespace nplmc
