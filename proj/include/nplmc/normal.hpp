#pragma once

namespace nplmc {

double normal_pdf(double x) noexcept;
double normal_cdf(double x) noexcept;

/// Standard normal quantile, absolute error below 1e-9 on (0, 1).
/// Throws DomainError outside the open unit interval.
double normal_quantile(double p);

} // namespace nplmc
