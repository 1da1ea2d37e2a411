#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace riskbench {

// A score is called positive at a threshold t when score >= t. The first
// curve point sits above every score (threshold +inf), so the curve always
// runs from (0,0) to (1,1); tied scores collapse into one step.
struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels);

// Trapezoidal area only, no point list. Identical arithmetic to RocCurve::auc.
double auc_score(const std::vector<double>& scores, const std::vector<int>& labels);

struct SensSpec {
  double sensitivity = 0.0;
  double specificity = 0.0;
  double threshold = 0.0;
};

SensSpec sens_spec(const std::vector<double>& scores, const std::vector<int>& labels,
                   double threshold);

// Threshold maximizing tpr - fpr; among ties the highest threshold wins.
double youden_threshold(const RocCurve& curve);

std::pair<double, double> bootstrap_auc_ci(const std::vector<double>& scores,
                                           const std::vector<int>& labels, size_t n_boot,
                                           uint64_t seed);

struct DelongResult {
  double auc_a = 0.0;
  double auc_b = 0.0;
  double z = 0.0;
  double p_value = 1.0;
};

DelongResult delong_test(const std::vector<double>& scores_a,
                         const std::vector<double>& scores_b, const std::vector<int>& labels);

struct McnemarResult {
  long b = 0;  // a wrong, b right
  long c = 0;  // a right, b wrong
  double statistic = 0.0;
  double p_value = 1.0;
  std::string method;  // "exact" below 25 discordant pairs, else "chi-square"
};

McnemarResult mcnemar_test(const std::vector<int>& pred_a, const std::vector<int>& pred_b,
                           const std::vector<int>& labels);

struct EvalReport {
  double auc = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  SensSpec operating_point;
  std::vector<double> fold_aucs;
  std::optional<DelongResult> delong;
  std::optional<McnemarResult> mcnemar;
  std::string ci_method = "stratified percentile bootstrap";
  std::string threshold_rule = "youden-j";
};

// Single-shot report for one score vector: trapezoid AUC, stratified
// percentile bootstrap CI, and the Youden operating point. Paired tests and
// fold AUCs are left for the caller to fill.
EvalReport evaluate_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                           size_t n_boot = 1000, uint64_t seed = 0);

double fold_mean(const EvalReport& report);
double fold_sd(const EvalReport& report);

// "0.89 ± 0.03", the form used for cross-validated AUC tables.
std::string format_pm(double mean, double sd);

std::string eval_report_to_json(const EvalReport& report, const std::string& meta_json = {});
std::string roc_curve_to_csv(const RocCurve& curve, const std::string& comment = {});

}  // namespace riskbench
