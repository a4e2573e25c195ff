#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace nplmc {

/// tau2 (1 + sqrt5 r + 5 r^2 / 3) exp(-sqrt5 r), r = |(x - x') / l|.
double matern52(const std::vector<double> &x, const std::vector<double> &xp,
                const std::vector<double> &lengthscales, double signal_variance);

struct GpHyperparameters {
    std::vector<double> lengthscales;
    double signal_variance = 1.0; ///< tau^2
    double mean = 0.0;            ///< beta, profiled by generalised least squares
};

struct GpFitOptions {
    int starts = 8;
    int max_iterations = 2000;
    double tolerance = 1e-8;  ///< stop when the objective improves by less
    double jitter = 1e-8;     ///< always added to the noise diagonal
    double min_log_lengthscale = -6.0;
    double max_log_lengthscale = 6.0;
};

struct GpPrediction {
    double mean = 0.0;
    double variance = 0.0; ///< latent posterior variance, noise excluded
};

/// Constant-mean GP with a Matern-5/2 ARD kernel and fixed per-point noise.
class GpModel {
  public:
    GpModel() = default;

    /// `inputs` is row-major n x dim.
    GpModel(std::size_t dim, std::vector<double> inputs, std::vector<double> targets,
            std::vector<double> noise, GpHyperparameters hyper, double jitter = 1e-8);

    [[nodiscard]] GpPrediction predict(const double *x) const;
    [[nodiscard]] double log_likelihood() const noexcept { return log_likelihood_; }
    [[nodiscard]] const GpHyperparameters &hyper() const noexcept { return hyper_; }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::size_t size() const noexcept { return targets_.size(); }
    [[nodiscard]] const std::vector<double> &inputs() const noexcept { return inputs_; }
    [[nodiscard]] const std::vector<double> &targets() const noexcept { return targets_; }
    [[nodiscard]] const std::vector<double> &noise() const noexcept { return noise_; }
    [[nodiscard]] double jitter() const noexcept { return jitter_; }

  private:
    std::size_t dim_ = 0;
    std::vector<double> inputs_;
    std::vector<double> by_dim_; ///< dim-major copy for the kernel rows
    std::vector<double> targets_;
    std::vector<double> noise_;
    GpHyperparameters hyper_;
    double jitter_ = 1e-8;
    std::vector<double> inv_lengthscale_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd weights_; ///< K^{-1} (y - beta)
    double log_likelihood_ = 0.0;
};

/// Profile log marginal likelihood at (lengthscales, tau2) with beta at its
/// GLS value. Returns -infinity if the kernel matrix cannot be factorised.
double profile_log_likelihood(std::size_t dim, const std::vector<double> &inputs,
                              const std::vector<double> &targets, const std::vector<double> &noise,
                              const std::vector<double> &lengthscales, double signal_variance,
                              double jitter, double *beta = nullptr);

struct GpFitReport {
    std::vector<double> start_log_likelihood;
    std::vector<double> end_log_likelihood;
    int best_start = 0;
};

/// Maximum-likelihood fit over log lengthscales and log tau2 by Nelder-Mead
/// from `starts` space-filling points; noise stays fixed.
GpModel fit_gp(std::size_t dim, const std::vector<double> &inputs, const std::vector<double> &targets,
               const std::vector<double> &noise, const GpFitOptions &options = {},
               GpFitReport *report = nullptr);

} // namespace nplmc
