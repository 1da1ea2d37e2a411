#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "riskbench/common.hpp"
#include "riskbench/matrix.hpp"
#include "riskbench/model.hpp"

namespace riskbench {

struct CvPlan {
  int k = 5;
  int repeats = 10;
  uint64_t seed = 0;
  bool stratified = true;
};

// folds[repeat][fold] -> sorted row indices; each repeat partitions the rows.
using FoldPlan = std::vector<std::vector<std::vector<size_t>>>;

FoldPlan stratified_folds(const std::vector<int>& labels, const CvPlan& plan);

struct GridAxis {
  std::string name;
  std::vector<std::string> values;
};

struct Grid {
  Learner learner = Learner::LR;
  std::vector<GridAxis> axes;
};

// The published search spaces, one per learner.
Grid paper_grid(Learner learner);

// Starting config the grid axes overwrite; carries the fixed GBT leaf
// penalties the search space holds constant.
ModelConfig paper_base(Learner learner);

// The winning boosted configuration the published results report.
ModelConfig paper_best_config();

// Cartesian product in declared axis order, last axis fastest. Fields not
// named by an axis keep their value from base.
std::vector<ModelConfig> enumerate_grid(const Grid& grid, const ModelConfig& base);

// One axis assignment, e.g. ("C", "0.01") or ("penalty", "l1").
void apply_axis(ModelConfig& config, const std::string& name, const std::string& value);

struct GridResult {
  ModelConfig config;
  std::vector<double> fold_aucs;  // in (repeat, fold) order, skipped folds absent
  double mean_auc = 0.0;
  double sd_auc = 0.0;
  size_t folds_skipped = 0;
};

struct GridSearchOutcome {
  std::vector<GridResult> ranking;  // descending mean, ties to lower sd then grid order
  TrainedModel winner;              // best config refit on all rows
  size_t winner_grid_index = 0;
};

struct GridSearchOptions {
  int threads = 1;
};

GridSearchOutcome grid_search(const FeatureMatrix& matrix, const Grid& grid,
                              const ModelConfig& base, const CvPlan& plan,
                              const GridSearchOptions& options = {},
                              WarningSink* warnings = nullptr);

TrainedModel fit_model(const FeatureMatrix& matrix, const std::vector<int>& labels,
                       const ModelConfig& config, WarningSink* warnings = nullptr);

}  // namespace riskbench
