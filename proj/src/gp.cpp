#include "nplmc/gp.hpp"

#include "nplmc/error.hpp"
#include "nplmc/kernels.hpp"

#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace nplmc {

double matern52(const std::vector<double> &x, const std::vector<double> &xp,
                const std::vector<double> &lengthscales, double signal_variance) {
    if (x.size() != xp.size() || x.size() != lengthscales.size()) {
        throw ValidationError("matern52: dimension mismatch");
    }
    double r2 = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double z = (x[d] - xp[d]) / lengthscales[d];
        r2 += z * z;
    }
    const double s = std::sqrt(5.0 * r2);
    return signal_variance * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

namespace {

std::vector<double> dim_major(std::size_t dim, const std::vector<double> &inputs) {
    const std::size_t n = inputs.size() / dim;
    std::vector<double> out(inputs.size());
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t d = 0; d < dim; ++d) {
            out[d * n + j] = inputs[j * dim + d];
        }
    }
    return out;
}

Eigen::MatrixXd covariance(std::size_t dim, const std::vector<double> &inputs,
                           const std::vector<double> &by_dim, const std::vector<double> &noise,
                           const std::vector<double> &inv_ls, double tau2, double jitter) {
    const std::size_t n = noise.size();
    const auto &k = kernels::active();
    Eigen::MatrixXd K(n, n);
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        k.matern52_row(&inputs[i * dim], by_dim.data(), n, dim, inv_ls.data(), tau2, row.data());
        for (std::size_t j = 0; j <= i; ++j) {
            K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto a = static_cast<Eigen::Index>(i);
        K(a, a) = tau2 + noise[i] + jitter;
        for (Eigen::Index b = a + 1; b < static_cast<Eigen::Index>(n); ++b) {
            K(a, b) = K(b, a);
        }
    }
    return K;
}

std::vector<double> inverse(const std::vector<double> &v) {
    std::vector<double> out(v.size());
    for (std::size_t d = 0; d < v.size(); ++d) {
        out[d] = 1.0 / v[d];
    }
    return out;
}

struct Profile {
    double log_likelihood = -std::numeric_limits<double>::infinity();
    double beta = 0.0;
};

Profile profile(const Eigen::LLT<Eigen::MatrixXd> &llt, const Eigen::VectorXd &y) {
    Profile p;
    if (llt.info() != Eigen::Success) {
        return p;
    }
    const auto n = y.size();
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd kinv_one = llt.solve(ones);
    const Eigen::VectorXd kinv_y = llt.solve(y);
    p.beta = ones.dot(kinv_y) / ones.dot(kinv_one);
    const Eigen::VectorXd resid = y - p.beta * ones;
    const double quad = resid.dot(kinv_y - p.beta * kinv_one);
    const Eigen::MatrixXd L = llt.matrixL();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        logdet += 2.0 * std::log(L(i, i));
    }
    p.log_likelihood = -0.5 * quad - 0.5 * logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    if (!std::isfinite(p.log_likelihood)) {
        p.log_likelihood = -std::numeric_limits<double>::infinity();
    }
    return p;
}

Eigen::VectorXd as_vector(const std::vector<double> &v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace

double profile_log_likelihood(std::size_t dim, const std::vector<double> &inputs,
                              const std::vector<double> &targets, const std::vector<double> &noise,
                              const std::vector<double> &lengthscales, double signal_variance,
                              double jitter, double *beta) {
    const auto by_dim = dim_major(dim, inputs);
    const Eigen::LLT<Eigen::MatrixXd> llt(
        covariance(dim, inputs, by_dim, noise, inverse(lengthscales), signal_variance, jitter));
    const auto p = profile(llt, as_vector(targets));
    if (beta) {
        *beta = p.beta;
    }
    return p.log_likelihood;
}

GpModel::GpModel(std::size_t dim, std::vector<double> inputs, std::vector<double> targets,
                 std::vector<double> noise, GpHyperparameters hyper, double jitter)
    : dim_(dim), inputs_(std::move(inputs)), targets_(std::move(targets)), noise_(std::move(noise)),
      hyper_(std::move(hyper)), jitter_(jitter) {
    const std::size_t n = targets_.size();
    if (dim_ == 0 || inputs_.size() != n * dim_ || noise_.size() != n || hyper_.lengthscales.size() != dim_) {
        throw ValidationError("GP model: inconsistent input sizes");
    }
    for (double l : hyper_.lengthscales) {
        if (!(l > 0.0)) {
            throw ValidationError("GP model: lengthscales must be positive");
        }
    }
    by_dim_ = dim_major(dim_, inputs_);
    inv_lengthscale_ = inverse(hyper_.lengthscales);
    // Escalate the jitter until the factorisation succeeds.
    for (int attempt = 0; attempt < 6; ++attempt) {
        llt_.compute(covariance(dim_, inputs_, by_dim_, noise_, inv_lengthscale_, hyper_.signal_variance, jitter_));
        if (llt_.info() == Eigen::Success) {
            break;
        }
        jitter_ = jitter_ > 0.0 ? jitter_ * 10.0 : 1e-10;
    }
    if (llt_.info() != Eigen::Success) {
        throw NumericalError("GP model: kernel matrix is not positive definite after jitter " +
                             std::to_string(jitter_));
    }
    const Eigen::VectorXd y = as_vector(targets_);
    const auto p = profile(llt_, y);
    hyper_.mean = p.beta;
    log_likelihood_ = p.log_likelihood;
    weights_ = llt_.solve((y.array() - hyper_.mean).matrix());
}

GpPrediction GpModel::predict(const double *x) const {
    const std::size_t n = targets_.size();
    Eigen::VectorXd kstar(static_cast<Eigen::Index>(n));
    kernels::active().matern52_row(x, by_dim_.data(), n, dim_, inv_lengthscale_.data(),
                                   hyper_.signal_variance, kstar.data());
    GpPrediction p;
    p.mean = hyper_.mean + kstar.dot(weights_);
    const Eigen::VectorXd v = llt_.matrixL().solve(kstar);
    p.variance = std::max(0.0, hyper_.signal_variance - v.squaredNorm());
    return p;
}

namespace {

struct Objective {
    std::size_t dim;
    const std::vector<double> *inputs;
    const std::vector<double> *by_dim;
    const std::vector<double> *noise;
    Eigen::VectorXd y;
    double jitter;
    double lo;
    double hi;
};

double negative_log_likelihood(const gsl_vector *theta, void *params) {
    const auto &o = *static_cast<const Objective *>(params);
    std::vector<double> inv_ls(o.dim);
    for (std::size_t d = 0; d < o.dim; ++d) {
        const double t = gsl_vector_get(theta, d);
        if (!(t >= o.lo && t <= o.hi)) {
            return 1e300;
        }
        inv_ls[d] = std::exp(-t);
    }
    const double log_tau2 = gsl_vector_get(theta, o.dim);
    if (!(log_tau2 > -20.0 && log_tau2 < 20.0)) {
        return 1e300;
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(
        covariance(o.dim, *o.inputs, *o.by_dim, *o.noise, inv_ls, std::exp(log_tau2), o.jitter));
    const double ll = profile(llt, o.y).log_likelihood;
    return std::isfinite(ll) ? -ll : 1e300;
}

// Radical inverse in base b: the Halton sequence gives evenly spread starts.
double halton(std::size_t index, unsigned base) {
    double f = 1.0;
    double r = 0.0;
    while (index > 0) {
        f /= base;
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

} // namespace

GpModel fit_gp(std::size_t dim, const std::vector<double> &inputs, const std::vector<double> &targets,
               const std::vector<double> &noise, const GpFitOptions &options, GpFitReport *report) {
    const std::size_t n = targets.size();
    if (n < 5) {
        throw PreconditionError("GP fit needs at least 5 observations, got " + std::to_string(n));
    }
    if (inputs.size() != n * dim || noise.size() != n) {
        throw ValidationError("GP fit: inconsistent input sizes");
    }
    double ybar = 0.0;
    for (double y : targets) {
        ybar += y;
    }
    ybar /= static_cast<double>(n);
    double yvar = 0.0;
    for (double y : targets) {
        yvar += (y - ybar) * (y - ybar);
    }
    yvar = std::max(yvar / static_cast<double>(n - 1), 1e-6);

    const auto by_dim = dim_major(dim, inputs);
    Objective obj{dim, &inputs, &by_dim, &noise, as_vector(targets), options.jitter,
                  options.min_log_lengthscale, options.max_log_lengthscale};
    gsl_multimin_function fn{&negative_log_likelihood, dim + 1, &obj};

    static constexpr unsigned primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
    if (dim + 1 > std::size(primes)) {
        throw ValidationError("GP fit: too many input dimensions");
    }
    const double log_l_lo = std::log(0.05);
    const double log_l_hi = std::log(2.0);
    const double log_t_lo = std::log(0.1 * yvar);
    const double log_t_hi = std::log(10.0 * yvar);

    GpFitReport local;
    std::vector<double> best_theta;
    double best = std::numeric_limits<double>::infinity();
    gsl_vector *x = gsl_vector_alloc(dim + 1);
    gsl_vector *step = gsl_vector_alloc(dim + 1);
    gsl_multimin_fminimizer *s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim + 1);
    for (int start = 0; start < options.starts; ++start) {
        for (std::size_t d = 0; d < dim; ++d) {
            gsl_vector_set(x, d, log_l_lo + (log_l_hi - log_l_lo) * halton(start + 1, primes[d]));
        }
        gsl_vector_set(x, dim, log_t_lo + (log_t_hi - log_t_lo) * halton(start + 1, primes[dim]));
        gsl_vector_set_all(step, 0.5);
        const double f0 = negative_log_likelihood(x, &obj);
        local.start_log_likelihood.push_back(-f0);
        gsl_multimin_fminimizer_set(s, &fn, x, step);
        double previous = s->fval;
        int stalled = 0;
        for (int it = 0; it < options.max_iterations; ++it) {
            if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) {
                break;
            }
            // A single flat step is common in Nelder-Mead; require a run of them.
            stalled = previous - s->fval < options.tolerance ? stalled + 1 : 0;
            previous = s->fval;
            if (stalled >= 10 * static_cast<int>(dim + 1) ||
                gsl_multimin_fminimizer_size(s) < 1e-10) {
                break;
            }
        }
        const double f = std::min(s->fval, f0);
        local.end_log_likelihood.push_back(-f);
        if (f < best) {
            best = f;
            local.best_start = start;
            best_theta.assign(dim + 1, 0.0);
            const gsl_vector *sx = s->fval <= f0 ? s->x : x;
            for (std::size_t d = 0; d <= dim; ++d) {
                best_theta[d] = gsl_vector_get(sx, d);
            }
        }
    }
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(step);
    gsl_vector_free(x);
    if (!std::isfinite(best) || best >= 1e300) {
        throw NumericalError("GP fit: no start produced a factorisable kernel matrix");
    }
    GpHyperparameters h;
    for (std::size_t d = 0; d < dim; ++d) {
        h.lengthscales.push_back(std::exp(best_theta[d]));
    }
    h.signal_variance = std::exp(best_theta[dim]);
    if (report) {
        *report = std::move(local);
    }
    return GpModel(dim, inputs, targets, noise, std::move(h), options.jitter);
}

} // namespace nplmc
