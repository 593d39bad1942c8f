#pragma once

namespace scbm::gauss {

/// P(X <= x) for X ~ chi^2 with `dof` degrees of freedom.
double chi2_cdf(double dof, double x);

/// Inverse chi^2 CDF by bisection on the regularized lower incomplete gamma
/// function; absolute tolerance 1e-10 on the returned threshold.
/// Throws ConfigError unless dof >= 1 and 0 < level < 1.
double chi2_quantile(double dof, double level);

}  // namespace scbm::gauss
