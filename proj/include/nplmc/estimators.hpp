#pragma once

#include "nplmc/plan.hpp"
#include "nplmc/simulator.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace nplmc {

/// Monte Carlo estimate of expected total collections and its split by portfolio.
struct MuEstimate {
    double total = 0.0;
    std::vector<double> portfolio;
};

/// Sum over accounts of the mean realised total; total is the sum of the
/// portfolio values so additivity holds exactly.
MuEstimate estimate_mu(const SimulationOutput &output);

/// Per-month estimate of expected collections (needs monthly moments).
std::vector<double> estimate_monthly_mu(const SimulationOutput &output);

/// Sample mean, unbiased variance and plain kurtosis m4 / m2^2.
struct SampleMoments {
    std::size_t n = 0;
    double mean = 0.0;
    double variance = 0.0;
    double kurtosis = std::numeric_limits<double>::quiet_NaN();
    /// m2 == 0: kurtosis is undefined.
    bool degenerate = false;
};

/// Throws PreconditionError naming the moment when there are fewer than
/// 2 values (variance) or, with `with_kurtosis`, fewer than 4.
SampleMoments sample_moments(std::span<const double> values, bool with_kurtosis = true);

enum class VarianceSource { sample, emulator, reference };

struct PortfolioVariances {
    std::vector<double> independent; ///< sigma_i^2, plan order
    double block = 0.0;              ///< sigma_D^2 of the block total
};

struct VarianceInputs {
    std::vector<PortfolioVariances> portfolios;
    VarianceSource source = VarianceSource::sample;
};

/// Sample variances of every unit in a simulation output (method M1).
/// Units with fewer than two realisations get NaN; `prediction_interval`
/// rejects them.
VarianceInputs sample_variances(const SimulationOutput &output);

struct EstimatorVariance {
    double total = 0.0;
    std::vector<double> portfolio;
};

/// Var(mu_hat) = sum_j [sigma_D,j^2 / r_j + sum_i sigma_i^2 / R_i].
EstimatorVariance estimator_variance(const VarianceInputs &inputs, const RealPlan &plan);
EstimatorVariance estimator_variance(const VarianceInputs &inputs, const IntegerPlan &plan);

/// sigma_D^2 (1 + 1/r) + sum_i sigma_i^2 (1 + 1/R_i): variance of the
/// difference between a fresh realisation and mu_hat.
double prediction_error_variance(const VarianceInputs &inputs, const IntegerPlan &plan);

struct PredictionInterval {
    double center = 0.0;
    double half_width = 0.0;
    double coverage_p = 0.95;

    [[nodiscard]] double lower() const noexcept { return center - half_width; }
    [[nodiscard]] double upper() const noexcept { return center + half_width; }
    [[nodiscard]] bool contains(double x) const noexcept { return x >= lower() && x <= upper(); }
};

/// Normal-theory interval mu_hat +- z_{(1+p)/2} sqrt(prediction error variance).
/// With sample variances every count must be at least 2; the error lists the
/// offending accounts (ids taken from `pop` when given, plan positions otherwise).
PredictionInterval prediction_interval(double mu_hat, const VarianceInputs &inputs,
                                       const IntegerPlan &plan, double p,
                                       const Population *pop = nullptr);

/// Per-month intervals from month-specific sample variances; the output must
/// carry monthly moments and every count must be at least 2.
std::vector<PredictionInterval> monthly_bands(const SimulationOutput &output,
                                              const IntegerPlan &plan, double p);

} // namespace nplmc
