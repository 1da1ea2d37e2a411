#include "riskbench/roc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "riskbench/common.hpp"
#include "riskbench/rng.hpp"
#include "riskbench/stats.hpp"

namespace riskbench {

using nlohmann::json;

namespace {

void check_scored_labels(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("scores and labels differ in length");
  if (scores.empty()) throw std::invalid_argument("empty score sequence");
  size_t pos = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw std::invalid_argument("labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw std::invalid_argument("scores must be finite");
    pos += labels[i];
  }
  if (pos == 0 || pos == labels.size())
    throw std::invalid_argument("ROC analysis needs both classes present");
}

// Sweep thresholds from high to low, grouping ties, accumulating trapezoids
// in count space; one division at the end keeps small cases exact.
double area_counts(const std::vector<size_t>& order, const std::vector<double>& scores,
                   const std::vector<int>& labels, size_t n_pos, size_t n_neg,
                   RocCurve* curve) {
  double area2 = 0.0;  // twice the area, in count units
  size_t tp = 0, fp = 0;
  if (curve) curve->points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    size_t dtp = 0, dfp = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) ++dtp; else ++dfp;
      ++j;
    }
    area2 += static_cast<double>(dfp) * static_cast<double>(2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    if (curve)
      curve->points.push_back({scores[order[i]],
                               static_cast<double>(fp) / static_cast<double>(n_neg),
                               static_cast<double>(tp) / static_cast<double>(n_pos)});
    i = j;
  }
  return area2 / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double run_auc(const std::vector<double>& scores, const std::vector<int>& labels,
               RocCurve* curve) {
  check_scored_labels(scores, labels);
  size_t n_pos = 0;
  for (int l : labels) n_pos += l;
  size_t n_neg = labels.size() - n_pos;
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  return area_counts(order, scores, labels, n_pos, n_neg, curve);
}

}  // namespace

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
  RocCurve curve;
  curve.auc = run_auc(scores, labels, &curve);
  return curve;
}

double auc_score(const std::vector<double>& scores, const std::vector<int>& labels) {
  return run_auc(scores, labels, nullptr);
}

SensSpec sens_spec(const std::vector<double>& scores, const std::vector<int>& labels,
                   double threshold) {
  check_scored_labels(scores, labels);
  size_t tp = 0, fn = 0, tn = 0, fp = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    bool called = scores[i] >= threshold;
    if (labels[i] == 1) (called ? tp : fn)++;
    else (called ? fp : tn)++;
  }
  SensSpec out;
  out.threshold = threshold;
  out.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
  out.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);
  return out;
}

double youden_threshold(const RocCurve& curve) {
  if (curve.points.empty()) throw std::invalid_argument("empty ROC curve");
  double best_j = -1.0;
  double best_t = curve.points.front().threshold;
  for (const auto& pt : curve.points) {
    double j = pt.tpr - pt.fpr;
    if (j > best_j) {
      best_j = j;
      best_t = pt.threshold;
    }
  }
  return best_t;
}

std::pair<double, double> bootstrap_auc_ci(const std::vector<double>& scores,
                                           const std::vector<int>& labels, size_t n_boot,
                                           uint64_t seed) {
  check_scored_labels(scores, labels);
  if (n_boot < 200) throw std::invalid_argument("bootstrap needs at least 200 resamples");
  std::vector<size_t> pos_idx, neg_idx;
  for (size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos_idx : neg_idx).push_back(i);
  if (pos_idx.empty() || neg_idx.empty())
    throw std::invalid_argument("sample too small to resample both classes");

  Rng rng(seed, "bootstrap");
  std::vector<double> aucs;
  aucs.reserve(n_boot);
  std::vector<double> s(scores.size());
  std::vector<int> y(scores.size());
  while (aucs.size() < n_boot) {
    size_t k = 0;
    for (size_t draw = 0; draw < pos_idx.size(); ++draw, ++k) {
      size_t i = pos_idx[rng.next_below(pos_idx.size())];
      s[k] = scores[i];
      y[k] = 1;
    }
    for (size_t draw = 0; draw < neg_idx.size(); ++draw, ++k) {
      size_t i = neg_idx[rng.next_below(neg_idx.size())];
      s[k] = scores[i];
      y[k] = 0;
    }
    aucs.push_back(auc_score(s, y));
  }
  std::sort(aucs.begin(), aucs.end());
  return {quantile(aucs, 0.025), quantile(aucs, 0.975)};
}

DelongResult delong_test(const std::vector<double>& scores_a,
                         const std::vector<double>& scores_b, const std::vector<int>& labels) {
  if (scores_a.size() != scores_b.size())
    throw std::invalid_argument("paired scores differ in length");
  check_scored_labels(scores_a, labels);
  check_scored_labels(scores_b, labels);

  std::vector<size_t> pos, neg;
  for (size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
  size_t m = pos.size(), n = neg.size();

  auto psi = [](double x, double y) { return x > y ? 1.0 : (x == y ? 0.5 : 0.0); };

  // Structural components: v10 per positive, v01 per negative, for each curve.
  auto components = [&](const std::vector<double>& s, std::vector<double>& v10,
                        std::vector<double>& v01) {
    v10.assign(m, 0.0);
    v01.assign(n, 0.0);
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < n; ++j) {
        double k = psi(s[pos[i]], s[neg[j]]);
        v10[i] += k;
        v01[j] += k;
      }
    for (auto& v : v10) v /= static_cast<double>(n);
    for (auto& v : v01) v /= static_cast<double>(m);
  };

  std::vector<double> v10a, v01a, v10b, v01b;
  components(scores_a, v10a, v01a);
  components(scores_b, v10b, v01b);

  DelongResult out;
  out.auc_a = mean(v10a);
  out.auc_b = mean(v10b);

  auto cov = [](const std::vector<double>& x, const std::vector<double>& y) {
    double mx = mean(x), my = mean(y), acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) acc += (x[i] - mx) * (y[i] - my);
    return acc / static_cast<double>(x.size() - 1);
  };

  double var = (cov(v10a, v10a) + cov(v10b, v10b) - 2.0 * cov(v10a, v10b)) /
                   static_cast<double>(m) +
               (cov(v01a, v01a) + cov(v01b, v01b) - 2.0 * cov(v01a, v01b)) /
                   static_cast<double>(n);
  if (var < 1e-12)
    throw std::runtime_error("degenerate variance: curves identical or nearly so");
  out.z = (out.auc_a - out.auc_b) / std::sqrt(var);
  out.p_value = 2.0 * normal_sf(std::fabs(out.z));
  if (out.p_value > 1.0) out.p_value = 1.0;
  return out;
}

McnemarResult mcnemar_test(const std::vector<int>& pred_a, const std::vector<int>& pred_b,
                           const std::vector<int>& labels) {
  if (pred_a.size() != pred_b.size() || pred_a.size() != labels.size())
    throw std::invalid_argument("paired predictions differ in length");
  McnemarResult out;
  for (size_t i = 0; i < labels.size(); ++i) {
    bool a_right = pred_a[i] == labels[i];
    bool b_right = pred_b[i] == labels[i];
    if (!a_right && b_right) ++out.b;
    if (a_right && !b_right) ++out.c;
  }
  long nd = out.b + out.c;
  if (nd == 0) {
    out.statistic = 0.0;
    out.p_value = 1.0;
    out.method = "exact";
    return out;
  }
  double diff = std::fabs(static_cast<double>(out.b - out.c)) - 1.0;
  out.statistic = diff * diff / static_cast<double>(nd);
  if (nd < 25) {
    out.method = "exact";
    out.p_value = std::min(
        1.0, 2.0 * binomial_half_cdf(static_cast<int>(std::min(out.b, out.c)),
                                     static_cast<int>(nd)));
  } else {
    out.method = "chi-square";
    out.p_value = chi_square_sf(out.statistic, 1);
  }
  return out;
}

EvalReport evaluate_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                           size_t n_boot, uint64_t seed) {
  EvalReport report;
  RocCurve curve = roc_curve(scores, labels);
  report.auc = curve.auc;
  auto ci = bootstrap_auc_ci(scores, labels, n_boot, seed);
  report.ci_lower = ci.first;
  report.ci_upper = ci.second;
  report.operating_point = sens_spec(scores, labels, youden_threshold(curve));
  return report;
}

double fold_mean(const EvalReport& report) {
  if (report.fold_aucs.empty()) return std::numeric_limits<double>::quiet_NaN();
  return mean(report.fold_aucs);
}

double fold_sd(const EvalReport& report) {
  if (report.fold_aucs.size() < 2) return 0.0;
  return std::sqrt(sample_variance(report.fold_aucs));
}

std::string format_pm(double mean_value, double sd_value) {
  return format_fixed(mean_value, 2) + " ± " + format_fixed(sd_value, 2);
}

std::string eval_report_to_json(const EvalReport& report, const std::string& meta_json) {
  json doc;
  if (!meta_json.empty()) doc["meta"] = json::parse(meta_json);
  doc["auc"] = report.auc;
  doc["ci"] = {{"lower", report.ci_lower},
               {"upper", report.ci_upper},
               {"method", report.ci_method}};
  doc["operating_point"] = {{"threshold", report.operating_point.threshold},
                            {"sensitivity", report.operating_point.sensitivity},
                            {"specificity", report.operating_point.specificity},
                            {"rule", report.threshold_rule}};
  if (!report.fold_aucs.empty()) {
    doc["cross_validation"] = {{"fold_aucs", report.fold_aucs},
                               {"mean", fold_mean(report)},
                               {"sd", fold_sd(report)},
                               {"summary", format_pm(fold_mean(report), fold_sd(report))}};
  }
  if (report.delong) {
    doc["delong"] = {{"auc_a", report.delong->auc_a},
                     {"auc_b", report.delong->auc_b},
                     {"z", report.delong->z},
                     {"p_value", report.delong->p_value}};
  }
  if (report.mcnemar) {
    doc["mcnemar"] = {{"b", report.mcnemar->b},
                      {"c", report.mcnemar->c},
                      {"statistic", report.mcnemar->statistic},
                      {"p_value", report.mcnemar->p_value},
                      {"method", report.mcnemar->method}};
  }
  return doc.dump(2) + "\n";
}

std::string roc_curve_to_csv(const RocCurve& curve, const std::string& comment) {
  std::ostringstream out;
  if (!comment.empty()) out << "# " << comment << "\n";
  out << "threshold,fpr,tpr\n";
  for (const auto& pt : curve.points)
    out << format_shortest(pt.threshold) << ',' << format_shortest(pt.fpr) << ','
        << format_shortest(pt.tpr) << "\n";
  return out.str();
}

}  // namespace riskbench
