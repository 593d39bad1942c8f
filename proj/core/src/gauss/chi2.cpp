#include "scbm/gauss/chi2.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include "scbm/error.hpp"

namespace scbm::gauss {

double chi2_cdf(double dof, double x) {
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(0.5 * dof, 0.5 * x);
}

double chi2_quantile(double dof, double level) {
  if (!(dof >= 1.0)) throw ConfigError("chi2_quantile: degrees of freedom must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("chi2_quantile: level must lie in (0, 1)");

  double lo = 0.0;
  double hi = dof;
  while (chi2_cdf(dof, hi) < level) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_cdf(dof, mid) < level)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace scbm::gauss
