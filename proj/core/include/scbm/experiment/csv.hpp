#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "scbm/intervention/intervention.hpp"
#include "scbm/metrics/metrics.hpp"

namespace scbm::experiment {

/// Schema version written in every header comment.
inline constexpr int kCsvSchemaVersion = 1;

/// "# scbm-csv v1 kind=<kind> config=<hash> seed=<seed>"
std::string csv_comment(const std::string& kind, const std::string& config_hash, const std::string& seed);

/// Fixed "%.10g" rendering so reruns are byte-identical.
std::string format_number(double v);
/// "%.17g": round-trips every double exactly.
std::string format_exact(double v);

/// Rates are written as percentages.
std::string metrics_csv(const std::string& comment, const metrics::MetricReport& r);
std::string curve_csv(const std::string& comment, const intervention::InterventionCurve& c);
std::string matrix_csv(const std::string& comment, const Eigen::MatrixXd& m);

/// Mean and population std per k across runs with identical k ranges.
std::string aggregate_curve_csv(const std::string& comment, const std::vector<intervention::InterventionCurve>& runs);
std::string aggregate_metrics_csv(const std::string& comment, const std::vector<metrics::MetricReport>& runs);

void write_text(const std::string& path, const std::string& text);

}  // namespace scbm::experiment
