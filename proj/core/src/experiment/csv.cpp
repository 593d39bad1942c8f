#include "scbm/experiment/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "scbm/error.hpp"

namespace scbm::experiment {
namespace {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(v.size()));
  return out;
}

double pct(double v) { return 100.0 * v; }

}  // namespace

std::string csv_comment(const std::string& kind, const std::string& config_hash, const std::string& seed) {
  return "# scbm-csv v" + std::to_string(kCsvSchemaVersion) + " kind=" + kind + " config=" + config_hash +
         " seed=" + seed + "\n";
}

std::string format_number(double v) {
  if (v == 0.0) return "0";  // no "-0"
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string format_exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string metrics_csv(const std::string& comment, const metrics::MetricReport& r) {
  return comment + "target_accuracy,concept_accuracy,jaccard,brier,ece\n" + format_number(pct(r.target_accuracy)) +
         "," + format_number(pct(r.concept_accuracy)) + "," + format_number(pct(r.jaccard)) + "," +
         format_number(pct(r.brier)) + "," + format_number(pct(r.ece)) + "\n";
}

std::string curve_csv(const std::string& comment, const intervention::InterventionCurve& c) {
  std::string out = comment + "k,concept_accuracy,target_accuracy\n";
  for (const auto& p : c.points)
    out += std::to_string(p.k) + "," + format_number(pct(p.concept_accuracy)) + "," +
           format_number(pct(p.target_accuracy)) + "\n";
  return out;
}

std::string matrix_csv(const std::string& comment, const Eigen::MatrixXd& m) {
  std::string out = comment;
  for (Eigen::Index j = 0; j < m.cols(); ++j) out += (j ? ",c" : "c") + std::to_string(j);
  out += "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out += (j ? "," : "") + format_number(m(i, j));
    out += "\n";
  }
  return out;
}

std::string aggregate_curve_csv(const std::string& comment, const std::vector<intervention::InterventionCurve>& runs) {
  std::string out = comment + "k,concept_accuracy_mean,concept_accuracy_std,target_accuracy_mean,target_accuracy_std,seeds\n";
  if (runs.empty()) return out;
  const std::size_t points = runs.front().points.size();
  for (const auto& r : runs)
    if (r.points.size() != points) throw UsageError("aggregate: curves have different lengths");
  for (std::size_t k = 0; k < points; ++k) {
    std::vector<double> concept_acc;
    std::vector<double> target_acc;
    for (const auto& r : runs) {
      concept_acc.push_back(pct(r.points[k].concept_accuracy));
      target_acc.push_back(pct(r.points[k].target_accuracy));
    }
    const MeanStd ca = mean_std(concept_acc);
    const MeanStd ta = mean_std(target_acc);
    out += std::to_string(runs.front().points[k].k) + "," + format_number(ca.mean) + "," + format_number(ca.std) +
           "," + format_number(ta.mean) + "," + format_number(ta.std) + "," + std::to_string(runs.size()) + "\n";
  }
  return out;
}

std::string aggregate_metrics_csv(const std::string& comment, const std::vector<metrics::MetricReport>& runs) {
  std::string out = comment + "metric,mean,std,seeds\n";
  const std::pair<const char*, double metrics::MetricReport::*> fields[] = {
      {"target_accuracy", &metrics::MetricReport::target_accuracy},
      {"concept_accuracy", &metrics::MetricReport::concept_accuracy},
      {"jaccard", &metrics::MetricReport::jaccard},
      {"brier", &metrics::MetricReport::brier},
      {"ece", &metrics::MetricReport::ece}};
  for (const auto& [name, member] : fields) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(pct(r.*member));
    const MeanStd ms = mean_std(v);
    out += std::string(name) + "," + format_number(ms.mean) + "," + format_number(ms.std) + "," +
           std::to_string(runs.size()) + "\n";
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw IoError("failed writing '" + path + "'");
}

}  // namespace scbm::experiment
