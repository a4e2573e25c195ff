#include "nplmc/population.hpp"

#include "nplmc/error.hpp"
#include "nplmc/normal.hpp"
#include "nplmc/parallel.hpp"
#include "nplmc/philox.hpp"

#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>

namespace nplmc {

Segment segment_from_number(int s) {
    if (s < 1 || s > 3) {
        throw ValidationError("segment must be 1, 2 or 3, got " + std::to_string(s));
    }
    return static_cast<Segment>(s);
}

const CovariateModel &default_covariates() {
    static const CovariateModel model{};
    return model;
}

CovariateModel CovariateModel::with_tail_variance(double variance) {
    CovariateModel model;
    model.credit_mixture.back().variance = variance;
    model.validate();
    return model;
}

namespace {

void check_probabilities(const std::vector<double> &probs, const char *what) {
    if (probs.empty()) {
        throw ValidationError(std::string(what) + ": probability vector is empty");
    }
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ValidationError(std::string(what) + ": probability outside [0, 1]");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ValidationError(std::string(what) + ": probabilities sum to " +
                              std::to_string(total) + ", expected 1");
    }
}

std::size_t pick(const std::vector<double> &probs, double u) {
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
        acc += probs[k];
        if (u < acc) {
            return k;
        }
    }
    return probs.size() - 1;
}

template <class Cdf> double invert_cdf(Cdf &&cdf, double u, double lo, double hi, double step) {
    if (!(u > 0.0 && u < 1.0)) {
        throw DomainError("inverse CDF: u = " + std::to_string(u) + " is outside (0, 1)");
    }
    for (int i = 0; i < 64 && cdf(lo) > u; ++i) {
        lo -= step;
        step *= 2.0;
    }
    for (int i = 0; i < 64 && cdf(hi) < u; ++i) {
        hi += step;
        step *= 2.0;
    }
    const auto f = [&](double x) { return cdf(x) - u; };
    const double flo = f(lo);
    const double fhi = f(hi);
    if (flo == 0.0) {
        return lo;
    }
    if (fhi == 0.0) {
        return hi;
    }
    std::uintmax_t iterations = 200;
    const auto [a, b] = boost::math::tools::toms748_solve(
        f, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(52), iterations);
    // Pick the end of the final bracket whose CDF is closest to u.
    return std::abs(f(a)) <= std::abs(f(b)) ? a : b;
}

} // namespace

void CovariateModel::validate() const {
    if (!(paid_last_month_prob >= 0.0 && paid_last_month_prob <= 1.0) ||
        !(eligible_prob >= 0.0 && eligible_prob <= 1.0)) {
        throw ValidationError("covariate model: Bernoulli probability outside [0, 1]");
    }
    if (!(balance_sd > 0.0) || !(balance_min < balance_max)) {
        throw ValidationError("covariate model: invalid balance distribution");
    }
    check_probabilities(segment_probs, "segment probabilities");
    if (segment_probs.size() != 3) {
        throw ValidationError("covariate model: need exactly three segment probabilities");
    }
    std::vector<double> weights;
    for (const auto &c : credit_mixture) {
        if (!(c.variance > 0.0)) {
            throw ValidationError("covariate model: mixture variance must be positive");
        }
        weights.push_back(c.weight);
    }
    check_probabilities(weights, "credit mixture weights");
}

double balance_cdf(double balance, const CovariateModel &model) {
    if (balance <= model.balance_min) {
        return 0.0;
    }
    if (balance >= model.balance_max) {
        return 1.0;
    }
    const double lo = normal_cdf((model.balance_min - model.balance_mean) / model.balance_sd);
    const double hi = normal_cdf((model.balance_max - model.balance_mean) / model.balance_sd);
    const double v = normal_cdf((balance - model.balance_mean) / model.balance_sd);
    return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
}

double balance_quantile(double u, const CovariateModel &model) {
    return invert_cdf([&](double b) { return balance_cdf(b, model); }, u, model.balance_min,
                      model.balance_max, model.balance_sd);
}

double credit_cdf(double credit, const CovariateModel &model) {
    double total = 0.0;
    for (const auto &c : model.credit_mixture) {
        total += c.weight * normal_cdf((credit - c.mean) / std::sqrt(c.variance));
    }
    return std::clamp(total, 0.0, 1.0);
}

double credit_quantile(double u, const CovariateModel &model) {
    double lo = model.credit_mixture.front().mean;
    double hi = lo;
    for (const auto &c : model.credit_mixture) {
        lo = std::min(lo, c.mean - 8.0 * std::sqrt(c.variance));
        hi = std::max(hi, c.mean + 8.0 * std::sqrt(c.variance));
    }
    return invert_cdf([&](double c) { return credit_cdf(c, model); }, u, lo, hi, 1.0);
}

Account draw_account(const CovariateModel &model, std::uint64_t seed, AccountId id) {
    CounterStream rng(seed, Stream::population, id, 0);
    Account a;
    a.id = id;
    a.paid_last_month = rng.uniform(0) < model.paid_last_month_prob;
    a.balance = balance_quantile(rng.open_uniform(1), model);
    a.segment = segment_from_number(static_cast<int>(pick(model.segment_probs, rng.uniform(2))) + 1);
    std::vector<double> weights(model.credit_mixture.size());
    std::transform(model.credit_mixture.begin(), model.credit_mixture.end(), weights.begin(),
                   [](const MixtureComponent &c) { return c.weight; });
    const auto &component = model.credit_mixture[pick(weights, rng.uniform(3))];
    a.credit_score = component.mean + std::sqrt(component.variance) * normal_quantile(rng.open_uniform(4));
    a.eligible = rng.uniform(5) < model.eligible_prob;
    return a;
}

void Population::rebuild_index(std::size_t portfolio_count) {
    portfolios.assign(portfolio_count, {});
    for (const auto &a : accounts) {
        const auto j = portfolio_of.at(a.id);
        if (j >= portfolio_count) {
            throw ValidationError("account " + std::to_string(a.id) + " refers to portfolio " +
                                  std::to_string(j) + " of " + std::to_string(portfolio_count));
        }
        if (a.segment == Segment::three && a.eligible) {
            portfolios[j].dependent_ids.push_back(a.id);
        } else {
            portfolios[j].independent_ids.push_back(a.id);
        }
    }
}

Population init_population(const PopulationParams &params, std::uint64_t seed, int threads) {
    if (params.n == 0) {
        throw ValidationError("init_population: population must contain at least one account");
    }
    check_probabilities(params.portfolio_probs, "portfolio probabilities");
    params.covariates.validate();

    Population pop;
    pop.params = params;
    pop.seed = seed;
    pop.accounts.resize(params.n);
    pop.portfolio_of.resize(params.n);
    parallel_for(params.n, threads, [&](std::size_t i) {
        const auto id = static_cast<AccountId>(i);
        pop.accounts[i] = draw_account(params.covariates, seed, id);
        CounterStream rng(seed, Stream::population, id, 0);
        pop.portfolio_of[i] = static_cast<std::uint32_t>(pick(params.portfolio_probs, rng.uniform(6)));
    });
    pop.rebuild_index(params.portfolio_probs.size());
    return pop;
}

} // namespace nplmc
