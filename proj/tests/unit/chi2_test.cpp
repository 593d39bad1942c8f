#include <cmath>

#include <gtest/gtest.h>

#include "scbm/error.hpp"
#include "scbm/gauss/chi2.hpp"

namespace scbm::gauss {
namespace {

// Published chi-square critical values (upper-tail tables).
struct TableRow {
  double dof;
  double level;
  double value;
};
constexpr TableRow kTable[] = {
    {1, 0.90, 2.7055},  {1, 0.95, 3.8415},  {1, 0.99, 6.6349},  {2, 0.90, 4.6052},
    {2, 0.95, 5.9915},  {2, 0.99, 9.2103},  {5, 0.90, 9.2364},  {5, 0.95, 11.0705},
    {5, 0.99, 15.0863}, {10, 0.90, 15.9872}, {10, 0.95, 18.3070}, {10, 0.99, 23.2093},
};

TEST(Chi2, MatchesPublishedTables) {
  for (const auto& row : kTable) EXPECT_NEAR(chi2_quantile(row.dof, row.level), row.value, 1e-3) << row.dof << " " << row.level;
}

TEST(Chi2, TwoDofClosedForm) {
  for (double level : {0.5, 0.9, 0.95, 0.99, 0.999}) EXPECT_NEAR(chi2_quantile(2, level), -2 * std::log(1 - level), 1e-8);
}

TEST(Chi2, InvertsTheCdf) {
  for (double d : {1.0, 3.0, 7.0, 25.0})
    for (double level : {0.01, 0.3, 0.8, 0.995}) EXPECT_NEAR(chi2_cdf(d, chi2_quantile(d, level)), level, 1e-9);
}

TEST(Chi2, MonotoneInDofAndLevel) {
  double prev_d = 0.0;
  for (int d = 1; d <= 20; ++d) {
    const double q = chi2_quantile(d, 0.95);
    EXPECT_GT(q, prev_d);
    prev_d = q;
    double prev_l = 0.0;
    for (double level = 0.05; level < 1.0; level += 0.05) {
      const double ql = chi2_quantile(d, level);
      EXPECT_GT(ql, prev_l);
      prev_l = ql;
    }
  }
}

TEST(Chi2, RejectsInvalidArguments) {
  EXPECT_THROW(chi2_quantile(0, 0.5), ConfigError);
  EXPECT_THROW(chi2_quantile(2, 0.0), ConfigError);
  EXPECT_THROW(chi2_quantile(2, 1.0), ConfigError);
}

}  // namespace
}  // namespace scbm::gauss
