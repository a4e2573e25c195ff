#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace nplmc {

enum class Segment : std::uint8_t { one = 1, two = 2, three = 3 };

inline constexpr int segment_number(Segment s) noexcept { return static_cast<int>(s); }
Segment segment_from_number(int s);

using AccountId = std::uint32_t;

/// Covariates and initial state of one simulated debtor.
struct Account {
    AccountId id = 0;
    double balance = 0.0;
    double credit_score = 0.0;
    Segment segment = Segment::one;
    bool eligible = false;
    bool paid_last_month = false;

    friend bool operator==(const Account &, const Account &) = default;
};

/// Accounts of one portfolio split into the dependent block and the rest.
/// The dependent block holds the accounts that start in segment 3 and are
/// eligible to transition; both id lists are sorted ascending.
struct PortfolioIndex {
    std::vector<AccountId> dependent_ids;
    std::vector<AccountId> independent_ids;

    [[nodiscard]] std::size_t size() const noexcept {
        return dependent_ids.size() + independent_ids.size();
    }
    friend bool operator==(const PortfolioIndex &, const PortfolioIndex &) = default;
};

/// Component of the credit-score mixture, parameterised by variance.
struct MixtureComponent {
    double weight;
    double mean;
    double variance;
};

/// Initialisation distributions of the representative population.
struct CovariateModel {
    double paid_last_month_prob = 0.2;
    double balance_mean = 2500.0;
    double balance_sd = 1000.0;
    double balance_min = 500.0;
    double balance_max = 10000.0;
    std::vector<double> segment_probs{0.2, 0.2, 0.6};
    std::vector<MixtureComponent> credit_mixture{
        {0.15, 1.0, 1.0}, {0.05, 4.0, 1.0}, {0.2, -1.0, 1.0}, {0.6, -5.0, 0.1}};
    double eligible_prob = 0.1;

    /// Default model with the variance of the -5 credit component overridden.
    static CovariateModel with_tail_variance(double variance);
    void validate() const;
};

const CovariateModel &default_covariates();

struct PopulationParams {
    std::size_t n = 0;
    std::vector<double> portfolio_probs{1.0};
    CovariateModel covariates{};
};

struct Population {
    std::vector<Account> accounts;
    std::vector<std::uint32_t> portfolio_of; ///< portfolio of each account
    std::vector<PortfolioIndex> portfolios;
    PopulationParams params;
    std::uint64_t seed = 0;

    [[nodiscard]] std::size_t size() const noexcept { return accounts.size(); }
    [[nodiscard]] const Account &account(AccountId id) const { return accounts.at(id); }

    /// Rebuilds the portfolio index sets from portfolio_of and the covariates.
    void rebuild_index(std::size_t portfolio_count);
};

/// Draws n accounts; account i uses its own counter-based stream keyed by
/// (seed, i), so results do not depend on the number of threads.
Population init_population(const PopulationParams &params, std::uint64_t seed, int threads = 1);

/// Draws a single account's covariates from the model (no portfolio).
Account draw_account(const CovariateModel &model, std::uint64_t seed, AccountId id);

/// Truncated-normal balance CDF and its inverse (bracketed root finding).
double balance_cdf(double balance, const CovariateModel &model = default_covariates());
double balance_quantile(double u, const CovariateModel &model = default_covariates());

/// Credit-score mixture CDF and its inverse (bracketed root finding).
double credit_cdf(double credit, const CovariateModel &model = default_covariates());
double credit_quantile(double u, const CovariateModel &model = default_covariates());

} // namespace nplmc
