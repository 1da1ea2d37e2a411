#include "riskbench/tree_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "riskbench/rng.hpp"

namespace riskbench {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::vector<int> usable_features(const FeatureMatrix& matrix) {
  std::vector<int> out;
  for (size_t j = 0; j < matrix.n_cols(); ++j)
    if (!matrix.columns[j].constant) out.push_back(static_cast<int>(j));
  return out;
}

// ---- random forest ----------------------------------------------------------

struct RfBuilder {
  const FeatureMatrix& matrix;
  const std::vector<int>& labels;
  const ClassWeights& weights;
  int max_depth;
  size_t m_try;
  const std::vector<int>& features;
  Tree& tree;
  Rng& tree_rng;
  uint64_t node_counter = 0;

  double leaf_frequency(const std::vector<size_t>& rows) const {
    double w0 = 0, w1 = 0;
    for (size_t i : rows) (labels[i] ? w1 : w0) += weights.of(labels[i]);
    return w1 / (w0 + w1);
  }

  int build(const std::vector<size_t>& rows, int depth) {
    int idx = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});

    double w0 = 0, w1 = 0;
    for (size_t i : rows) (labels[i] ? w1 : w0) += weights.of(labels[i]);
    double w = w0 + w1;
    double gini = 1.0 - (w0 / w) * (w0 / w) - (w1 / w) * (w1 / w);

    bool can_split = depth < max_depth && rows.size() >= 2 && w0 > 0 && w1 > 0;
    int best_feature = -1;
    double best_threshold = 0.0, best_decrease = 0.0;

    if (can_split) {
      Rng node_rng = tree_rng.derive(node_counter++);
      auto picks = node_rng.sample_without_replacement(features.size(),
                                                       std::min(m_try, features.size()));
      std::vector<int> tried;
      for (size_t k : picks) tried.push_back(features[k]);
      std::sort(tried.begin(), tried.end());

      std::vector<std::pair<double, size_t>> sorted;
      for (int j : tried) {
        sorted.clear();
        for (size_t i : rows) sorted.emplace_back(matrix.at(i, j), i);
        std::sort(sorted.begin(), sorted.end());
        double lw0 = 0, lw1 = 0;
        for (size_t k = 0; k + 1 < sorted.size(); ++k) {
          size_t i = sorted[k].second;
          (labels[i] ? lw1 : lw0) += weights.of(labels[i]);
          if (sorted[k].first == sorted[k + 1].first) continue;
          double rw0 = w0 - lw0, rw1 = w1 - lw1;
          double lw = lw0 + lw1, rw = rw0 + rw1;
          double gl = 1.0 - (lw0 / lw) * (lw0 / lw) - (lw1 / lw) * (lw1 / lw);
          double gr = 1.0 - (rw0 / rw) * (rw0 / rw) - (rw1 / rw) * (rw1 / rw);
          double decrease = gini - (lw / w) * gl - (rw / w) * gr;
          if (decrease > best_decrease + 1e-12) {
            best_decrease = decrease;
            best_feature = j;
            best_threshold = 0.5 * (sorted[k].first + sorted[k + 1].first);
          }
        }
      }
    }

    if (best_feature < 0) {
      tree.nodes[idx].feature = -1;
      tree.nodes[idx].value = w1 / w;
      return idx;
    }

    std::vector<size_t> left, right;
    for (size_t i : rows)
      (matrix.at(i, best_feature) < best_threshold ? left : right).push_back(i);
    int l = build(left, depth + 1);
    int r = build(right, depth + 1);
    tree.nodes[idx].feature = best_feature;
    tree.nodes[idx].threshold = best_threshold;
    tree.nodes[idx].left = l;
    tree.nodes[idx].right = r;
    return idx;
  }
};

// ---- gradient boosting ------------------------------------------------------

double shrink(double g, double alpha) {
  if (g > alpha) return g - alpha;
  if (g < -alpha) return g + alpha;
  return 0.0;
}

struct GbtBuilder {
  const FeatureMatrix& matrix;
  const std::vector<double>& grad;
  const std::vector<double>& hess;
  const ModelConfig& config;
  const std::vector<int>& features;  // columns available to this tree
  Tree& tree;

  double leaf_value(double g, double h) const {
    double denom = h + config.lambda;
    if (denom < 1e-12) return 0.0;
    return -shrink(g, config.alpha) / denom;
  }

  double score(double g, double h) const {
    double t = shrink(g, config.alpha);
    double denom = h + config.lambda;
    if (denom < 1e-12) return 0.0;
    return t * t / denom;
  }

  int build(const std::vector<size_t>& rows, int depth, bool* split_made) {
    int idx = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});

    double g = 0, h = 0;
    for (size_t i : rows) {
      g += grad[i];
      h += hess[i];
    }

    int best_feature = -1;
    double best_threshold = 0.0, best_gain = config.gamma;

    if (depth < config.max_depth && rows.size() >= 2) {
      double parent_score = score(g, h);
      std::vector<std::pair<double, size_t>> sorted;
      for (int j : features) {
        sorted.clear();
        for (size_t i : rows) sorted.emplace_back(matrix.at(i, j), i);
        std::sort(sorted.begin(), sorted.end());
        double gl = 0, hl = 0;
        for (size_t k = 0; k + 1 < sorted.size(); ++k) {
          size_t i = sorted[k].second;
          gl += grad[i];
          hl += hess[i];
          if (sorted[k].first == sorted[k + 1].first) continue;
          double gain = 0.5 * (score(gl, hl) + score(g - gl, h - hl) - parent_score);
          if (gain > best_gain) {
            best_gain = gain;
            best_feature = j;
            best_threshold = 0.5 * (sorted[k].first + sorted[k + 1].first);
          }
        }
      }
    }

    if (best_feature < 0) {
      tree.nodes[idx].feature = -1;
      tree.nodes[idx].value = leaf_value(g, h);
      return idx;
    }

    if (split_made) *split_made = true;
    std::vector<size_t> left, right;
    for (size_t i : rows)
      (matrix.at(i, best_feature) < best_threshold ? left : right).push_back(i);
    int l = build(left, depth + 1, split_made);
    int r = build(right, depth + 1, split_made);
    tree.nodes[idx].feature = best_feature;
    tree.nodes[idx].threshold = best_threshold;
    tree.nodes[idx].left = l;
    tree.nodes[idx].right = r;
    return idx;
  }
};

}  // namespace

TrainedModel fit_random_forest(const FeatureMatrix& matrix, const std::vector<int>& labels,
                               const ClassWeights& weights, const ModelConfig& config,
                               WarningSink* warnings, std::vector<double>* oob_out) {
  if (config.max_depth < 1) throw std::runtime_error("max_depth must be at least 1");
  if (config.n_trees < 1) throw std::runtime_error("n_trees must be at least 1");
  size_t n = matrix.n_rows;
  if (labels.size() != n) throw std::runtime_error("label count does not match matrix rows");

  std::vector<int> features = usable_features(matrix);
  if (features.empty()) throw std::runtime_error("no usable (non-constant) features");
  size_t m_try = static_cast<size_t>(
      std::max(1.0, std::ceil(std::log2(static_cast<double>(features.size())))));

  Rng base(config.seed, "rf-fit");
  size_t n_trees = static_cast<size_t>(config.n_trees);
  std::vector<Tree> trees(n_trees);
  std::vector<std::vector<char>> in_bag;
  if (oob_out) in_bag.assign(n_trees, std::vector<char>(n, 0));

  parallel_for(n_trees, config.threads, [&](size_t t) {
    Rng tree_rng = base.derive(t);
    std::vector<size_t> rows;
    rows.reserve(n);
    if (config.bootstrap) {
      Rng boot = tree_rng.derive("bootstrap");
      for (size_t i = 0; i < n; ++i) rows.push_back(boot.next_below(n));
      std::sort(rows.begin(), rows.end());
    } else {
      for (size_t i = 0; i < n; ++i) rows.push_back(i);
    }
    if (oob_out)
      for (size_t i : rows) in_bag[t][i] = 1;
    Rng grow = tree_rng.derive("grow");
    RfBuilder builder{matrix, labels, weights, config.max_depth, m_try, features,
                      trees[t], grow};
    builder.build(rows, 0);
  });

  TrainedModel model;
  model.config = config;
  model.config.learner = Learner::RF;
  model.base_score = 0.0;
  model.ensemble.trees = std::move(trees);
  model.ensemble.output_is_probability = true;
  for (auto& t : model.ensemble.trees) t.scale = 1.0 / static_cast<double>(n_trees);
  model.n_train = n;
  model.weights = weights;
  model.column_names = matrix.column_names();

  if (oob_out) {
    oob_out->assign(n, kNan);
    size_t uncovered = 0;
    for (size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      size_t count = 0;
      for (size_t t = 0; t < n_trees; ++t) {
        if (in_bag[t][i]) continue;
        sum += model.ensemble.trees[t].predict(&matrix.data[i * matrix.n_cols()]);
        ++count;
      }
      if (count) (*oob_out)[i] = sum / static_cast<double>(count);
      else ++uncovered;
    }
    if (uncovered)
      warn(warnings, std::to_string(uncovered) +
                         " rows were in every bootstrap sample and have no out-of-bag estimate");
  }
  return model;
}

TrainedModel fit_gbt(const FeatureMatrix& matrix, const std::vector<int>& labels,
                     const ClassWeights& weights, const ModelConfig& config,
                     WarningSink* warnings) {
  if (config.max_depth < 1) throw std::runtime_error("max_depth must be at least 1");
  if (config.n_trees < 1) throw std::runtime_error("n_trees must be at least 1");
  if (!(config.subsample > 0.0 && config.subsample <= 1.0))
    throw std::runtime_error("subsample must lie in (0,1]");
  if (!(config.colsample > 0.0 && config.colsample <= 1.0))
    throw std::runtime_error("colsample must lie in (0,1]");
  if (!(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0))
    throw std::runtime_error("dropout_rate must lie in [0,1)");
  if (config.learning_rate < 0.0) throw std::runtime_error("learning_rate must be non-negative");
  if (config.gamma < 0.0) throw std::runtime_error("gamma must be non-negative");

  size_t n = matrix.n_rows;
  if (labels.size() != n) throw std::runtime_error("label count does not match matrix rows");

  std::vector<int> all_features = usable_features(matrix);
  if (all_features.empty()) throw std::runtime_error("no usable (non-constant) features");

  double w0n0 = 0, w1n1 = 0;
  for (int y : labels) (y ? w1n1 : w0n0) += weights.of(y);
  double base_score = std::log(w1n1 / w0n0);

  TrainedModel model;
  model.config = config;
  model.config.learner = Learner::GBT;
  model.base_score = base_score;
  model.ensemble.output_is_probability = false;
  model.n_train = n;
  model.weights = weights;
  model.column_names = matrix.column_names();

  Rng base(config.seed, "gbt-fit");
  auto& trees = model.ensemble.trees;

  for (int round = 0; round < config.n_trees; ++round) {
    Rng round_rng = base.derive(static_cast<uint64_t>(round));

    // Dropout choses which earlier trees the residuals ignore this round.
    std::vector<size_t> dropped;
    if (config.dropout_rate > 0.0 && !trees.empty()) {
      Rng drop = round_rng.derive("dropout");
      for (size_t t = 0; t < trees.size(); ++t)
        if (drop.next_bernoulli(config.dropout_rate)) dropped.push_back(t);
    }
    std::vector<char> is_dropped(trees.size(), 0);
    for (size_t t : dropped) is_dropped[t] = 1;

    std::vector<double> margin(n, base_score);
    for (size_t t = 0; t < trees.size(); ++t) {
      if (is_dropped[t]) continue;
      for (size_t i = 0; i < n; ++i)
        margin[i] += trees[t].scale * trees[t].predict(&matrix.data[i * matrix.n_cols()]);
    }

    std::vector<double> grad(n), hess(n);
    for (size_t i = 0; i < n; ++i) {
      double p = sigmoid(margin[i]);
      double w = weights.of(labels[i]);
      grad[i] = w * (p - static_cast<double>(labels[i]));
      hess[i] = w * p * (1.0 - p);
    }

    std::vector<size_t> rows;
    if (config.subsample < 1.0) {
      size_t take = std::max<size_t>(
          1, static_cast<size_t>(std::floor(config.subsample * static_cast<double>(n))));
      Rng sub = round_rng.derive("subsample");
      rows = sub.sample_without_replacement(n, take);
      std::sort(rows.begin(), rows.end());
    } else {
      rows.resize(n);
      for (size_t i = 0; i < n; ++i) rows[i] = i;
    }

    std::vector<int> features = all_features;
    if (config.colsample < 1.0) {
      size_t take = std::max<size_t>(
          1, static_cast<size_t>(
                 std::floor(config.colsample * static_cast<double>(all_features.size()))));
      Rng cols = round_rng.derive("colsample");
      auto picks = cols.sample_without_replacement(all_features.size(), take);
      features.clear();
      for (size_t k : picks) features.push_back(all_features[k]);
      std::sort(features.begin(), features.end());
    }

    Tree tree;
    bool split_made = false;
    GbtBuilder builder{matrix, grad, hess, model.config, features, tree};
    builder.build(rows, 0, &split_made);

    if (round == 0 && !split_made) {
      warn(warnings, "no splits passed gamma; model is the base score alone");
      trees.clear();
      return model;
    }

    size_t k = dropped.size();
    double norm = static_cast<double>(k) / static_cast<double>(k + 1);
    for (size_t t : dropped) trees[t].scale *= norm;
    tree.scale = config.learning_rate / static_cast<double>(k + 1);
    trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace riskbench
