#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "riskbench/common.hpp"
#include "riskbench/matrix.hpp"

namespace riskbench {

enum class Learner { LR, SVM, RF, GBT };
enum class Penalty { L1, L2, ElasticNet };

std::string learner_name(Learner l);
Learner parse_learner(const std::string& s);
std::string penalty_name(Penalty p);
Penalty parse_penalty(const std::string& s);

struct ClassWeights {
  double w0 = 1.0, w1 = 1.0;
  double of(int label) const { return label ? w1 : w0; }
};

// w_c = n / (2 * n_c); balances the weighted class masses at n/2 each.
ClassWeights class_weights(const std::vector<int>& labels);

struct ModelConfig {
  Learner learner = Learner::LR;
  Penalty penalty = Penalty::L2;
  double C = 1.0;
  double l1_ratio = 0.5;      // elasticnet mix: 1 = pure l1
  int max_epochs = 1000;
  int n_trees = 100;
  int max_depth = 6;
  double learning_rate = 0.1;
  double subsample = 1.0;
  double colsample = 1.0;
  double gamma = 0.0;         // minimum split gain
  double alpha = 0.0;         // L1 leaf penalty
  double lambda = 1.0;        // L2 leaf penalty
  double dropout_rate = 0.0;
  bool bootstrap = true;      // RF row resampling
  uint64_t seed = 0;
  int threads = 1;
};

struct LinearPayload {
  std::vector<double> weights;
  double intercept = 0.0;
  bool platt_fitted = false;
  double platt_a = 1.0, platt_b = 0.0;  // calibrated p = sigmoid(a*margin + b)
};

struct TreeNode {
  int feature = -1;  // negative marks a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // root at index 0
  double scale = 1.0;

  double predict(const double* x) const;
  int depth() const;
};

struct TreeEnsemblePayload {
  std::vector<Tree> trees;
  // RF trees emit class-1 leaf frequencies and the scaled sum is already a
  // probability; GBT trees emit log-odds increments.
  bool output_is_probability = false;
};

struct TrainedModel {
  ModelConfig config;
  double base_score = 0.0;  // log-odds offset (GBT); 0 elsewhere
  LinearPayload linear;
  TreeEnsemblePayload ensemble;
  size_t n_train = 0;
  ClassWeights weights;
  bool converged = true;
  std::vector<std::string> column_names;

  bool is_linear() const { return config.learner == Learner::LR || config.learner == Learner::SVM; }
  size_t n_features() const { return column_names.size(); }
};

double sigmoid(double z);

// The model's additive output for one standardized row: log-odds for linear
// and boosted models, probability for the forest. Attribution methods
// decompose exactly this quantity.
double ensemble_value(const TrainedModel& model, const double* x);

// Raw ranking score per row (margin); monotone in predicted risk.
std::vector<double> predict_margin(const TrainedModel& model, const FeatureMatrix& matrix);
// Probability per row; SVM margins go through the stored calibration.
std::vector<double> predict_proba(const TrainedModel& model, const FeatureMatrix& matrix);

// Throws with a column-by-column diff when the input does not match training.
void check_columns(const TrainedModel& model, const FeatureMatrix& matrix);

std::string model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const std::string& text, const std::string& origin);
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

// The config object alone, in the same shape model files embed.
std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text, const std::string& origin);

}  // namespace riskbench
