#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "riskbench/common.hpp"
#include "riskbench/matrix.hpp"
#include "riskbench/model.hpp"

namespace riskbench {

// Per-row additive contributions on the model's ensemble scale: log-odds for
// linear and boosted models, averaged probability for forests. For every row,
// base_value + sum(values[i]) equals ensemble_value(model, row).
struct Attribution {
  double base_value = 0.0;
  std::vector<std::string> column_names;
  std::vector<std::string> row_ids;
  std::vector<std::vector<double>> values;      // n x p contributions
  std::vector<std::vector<double>> raw_values;  // n x p de-standardized inputs, for display
  std::string background_ref;
  size_t background_size = 0;

  size_t n_rows() const { return values.size(); }
  size_t n_cols() const { return column_names.size(); }
};

// Reference sample the attributions marginalize over. Rows come from a
// seed-keyed draw without replacement, kept in original order; a matrix with
// at most `size` rows is passed through whole.
FeatureMatrix sample_background(const FeatureMatrix& train, size_t size = 100, uint64_t seed = 0);

// Brute-force enumeration over all feature subsets, averaging the ensemble
// value over background rows for the out-of-subset columns. Returns the
// contributions and the base value. Cost is 2^p model sweeps, refused above
// 20 features.
std::pair<std::vector<double>, double> shapley_exact(const TrainedModel& model,
                                                     const std::vector<double>& x,
                                                     const FeatureMatrix& background);

// Tree-path recursion giving the same numbers as shapley_exact without the
// subset sweep. Tree models only; linear models go through attribute(), which
// has a closed form for them.
Attribution tree_shap(const TrainedModel& model, const FeatureMatrix& matrix,
                      const FeatureMatrix& background, int threads = 1);

// Dispatches on the model family: trees use tree_shap, linear models use the
// closed form w_j * (x_j - background mean).
Attribution attribute(const TrainedModel& model, const FeatureMatrix& matrix,
                      const FeatureMatrix& background, int threads = 1);

// Pairwise decomposition of one row's contributions. Symmetric p x p matrix;
// each row j sums to the feature's contribution, with the main effect kept on
// the diagonal. Exact enumeration, refused above 12 features.
std::vector<std::vector<double>> interaction_values(const TrainedModel& model,
                                                    const std::vector<double>& x,
                                                    const FeatureMatrix& background);

struct ImportanceEntry {
  size_t column = 0;
  std::string name;
  double importance = 0.0;  // mean |contribution| over rows
};
using ImportanceRanking = std::vector<ImportanceEntry>;

// Descending by importance; ties keep column order.
ImportanceRanking feature_importance(const Attribution& attribution);

struct RowGroup {
  std::string name;
  std::vector<size_t> rows;
};

std::vector<RowGroup> sex_groups(const FeatureMatrix& matrix);
// Half-open bins [edge_k, edge_{k+1}); ages outside the edges are dropped.
std::vector<RowGroup> age_bin_groups(const FeatureMatrix& matrix, const std::vector<double>& edges);

struct GroupImportance {
  std::string group;
  size_t n_rows = 0;
  ImportanceRanking ranking;
};

// One ranking per non-empty group; empty groups are skipped with a warning.
std::vector<GroupImportance> subgroup_importance(const Attribution& attribution,
                                                 const std::vector<RowGroup>& groups,
                                                 WarningSink* warnings = nullptr);

struct SummaryPoint {
  double phi = 0.0;
  double color = 0.5;  // min-max normalized raw value; 0.5 for constant columns
  std::string row_id;
};

struct SummaryFeature {
  size_t column = 0;
  std::string name;
  double importance = 0.0;
  std::vector<SummaryPoint> points;
};

// Beeswarm-style point cloud, features ordered by importance. max_features 0
// keeps them all.
std::vector<SummaryFeature> summary_data(const Attribution& attribution, size_t max_features = 0);

struct DependencePoint {
  double x = 0.0;      // raw value of the plotted feature
  double phi = 0.0;
  double color = 0.0;  // raw value of the coloring feature
};

struct DependenceData {
  std::string feature;
  std::string color_feature;
  std::string method;  // "exact-interaction" or "variance-binning"
  std::vector<DependencePoint> points;
};

// Scatter of one feature's contribution against its raw value, colored by the
// strongest interaction partner. Up to 12 features the partner comes from
// exact interaction values on an evenly strided sample of at most sample_cap
// rows; beyond that, rows are binned by the plotted feature and partners are
// scored by how far the contribution moves across a median split inside each
// bin. Near-zero scores everywhere fall back to the lowest column index.
DependenceData dependence_data(const Attribution& attribution, const TrainedModel& model,
                               const FeatureMatrix& background, size_t column,
                               size_t sample_cap = 50);

struct ForceItem {
  std::string name;
  double value = 0.0;  // raw feature value
  double phi = 0.0;
};

struct Explanation {
  double base_value = 0.0;
  double output_value = 0.0;
  std::vector<ForceItem> items;  // descending |phi|, zero contributions dropped
};

Explanation force_explanation(const Attribution& attribution, size_t row);

std::string attribution_to_csv(const Attribution& attribution, const std::string& comment = {});
std::string summary_to_json(const std::vector<SummaryFeature>& features,
                            const std::string& meta_json = {});
std::string dependence_to_json(const DependenceData& data, const std::string& meta_json = {});
std::string explanation_to_json(const Explanation& explanation, const std::string& meta_json = {});

}  // namespace riskbench
