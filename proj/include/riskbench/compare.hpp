#pragma once

#include <string>
#include <vector>

#include "riskbench/cox.hpp"
#include "riskbench/shap.hpp"

namespace riskbench {

struct GroupCox {
  std::string group;
  CoxFit fit;
};

struct MarkerCell {
  bool has_shap = false;
  double mean_abs_shap = 0.0;
  bool has_cox = false;
  double cox_p = 1.0;
  bool significant = false;  // Cox p < 0.05
};

struct MarkerComparison {
  std::vector<std::string> markers;            // row order
  std::vector<std::string> groups;             // column order
  std::vector<std::vector<MarkerCell>> cells;  // [marker][group]
  std::vector<std::string> warnings;           // one-sided rows
};

// Joins attribution importance and Cox p-values on marker name per group.
// A marker missing on one side stays in the grid with that side blank and a
// warning; groups come out in first-appearance order.
MarkerComparison compare_markers(const std::vector<GroupImportance>& importance,
                                 const std::vector<GroupCox>& cox_fits,
                                 const std::vector<std::string>& markers);

// Marker rows by group column pairs (average SHAP, Cox p). The markdown view
// renders p-values below 0.005 as "<0.005*" and stars anything under 0.05;
// the CSV keeps full precision.
std::string comparison_to_markdown(const MarkerComparison& comparison);
std::string comparison_to_csv(const MarkerComparison& comparison);

}  // namespace riskbench
