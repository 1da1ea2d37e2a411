#include "riskbench/cv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "riskbench/linear_fit.hpp"
#include "riskbench/roc.hpp"
#include "riskbench/rng.hpp"
#include "riskbench/stats.hpp"
#include "riskbench/tree_fit.hpp"

namespace riskbench {

namespace {

double parse_axis_number(const std::string& name, const std::string& value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw std::invalid_argument("grid axis '" + name + "': not a number: '" + value + "'");
  return out;
}

}  // namespace

FoldPlan stratified_folds(const std::vector<int>& labels, const CvPlan& plan) {
  if (plan.k < 2) throw std::invalid_argument("cross-validation needs k >= 2");
  if (plan.repeats < 1) throw std::invalid_argument("cross-validation needs repeats >= 1");
  size_t n = labels.size();
  if (n < static_cast<size_t>(plan.k))
    throw std::invalid_argument("fewer samples than folds");

  std::vector<size_t> pos, neg;
  for (size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw std::invalid_argument("labels must be 0 or 1");
    (labels[i] ? pos : neg).push_back(i);
  }
  if (plan.stratified &&
      (pos.size() < static_cast<size_t>(plan.k) || neg.size() < static_cast<size_t>(plan.k)))
    throw std::invalid_argument("stratified folds need at least k samples of each class");

  FoldPlan out(plan.repeats);
  Rng base(plan.seed, "cv");
  for (int r = 0; r < plan.repeats; ++r) {
    Rng rng = base.derive(static_cast<uint64_t>(r));
    auto& folds = out[r];
    folds.assign(plan.k, {});
    auto deal = [&](std::vector<size_t> idx, Rng stream) {
      stream.shuffle(idx);
      for (size_t i = 0; i < idx.size(); ++i)
        folds[i % plan.k].push_back(idx[i]);
    };
    if (plan.stratified) {
      deal(pos, rng.derive("pos"));
      deal(neg, rng.derive("neg"));
    } else {
      std::vector<size_t> all(n);
      std::iota(all.begin(), all.end(), 0);
      deal(std::move(all), rng.derive("all"));
    }
    for (auto& fold : folds) std::sort(fold.begin(), fold.end());
  }
  return out;
}

ModelConfig paper_base(Learner learner) {
  ModelConfig base;
  base.learner = learner;
  if (learner == Learner::GBT) {
    base.alpha = 0.9;
    base.lambda = 0.6;
  }
  return base;
}

ModelConfig paper_best_config() {
  ModelConfig cfg = paper_base(Learner::GBT);
  cfg.n_trees = 100;
  cfg.max_depth = 4;
  cfg.learning_rate = 0.1;
  cfg.subsample = 0.3;
  cfg.dropout_rate = 0.5;
  cfg.gamma = 10.0;
  return cfg;
}

Grid paper_grid(Learner learner) {
  Grid grid;
  grid.learner = learner;
  const std::vector<std::string> c_values = {"0.001", "0.01", "0.1", "1", "10", "100", "1000"};
  switch (learner) {
    case Learner::LR:
      grid.axes = {{"penalty", {"l1", "l2", "elasticnet"}}, {"C", c_values}};
      break;
    case Learner::SVM:
      grid.axes = {{"penalty", {"l1", "l2"}}, {"C", c_values}};
      break;
    case Learner::RF:
      grid.axes = {{"trees", {"50", "100", "200"}}, {"depth", {"2", "4", "6"}}};
      break;
    case Learner::GBT:
      grid.axes = {{"eta", {"0.05", "0.1", "0.5"}},
                   {"subsample", {"0.3", "0.4", "0.8", "0.9"}},
                   {"dropout", {"0.3", "0.5"}},
                   {"gamma", {"10", "20", "30", "40", "50"}},
                   {"trees", {"50", "100", "200"}},
                   {"depth", {"2", "4", "6"}}};
      break;
  }
  return grid;
}

void apply_axis(ModelConfig& config, const std::string& name, const std::string& value) {
  if (name == "penalty") {
    config.penalty = parse_penalty(value);
  } else if (name == "C") {
    config.C = parse_axis_number(name, value);
  } else if (name == "l1_ratio") {
    config.l1_ratio = parse_axis_number(name, value);
  } else if (name == "trees") {
    config.n_trees = static_cast<int>(parse_axis_number(name, value));
  } else if (name == "depth") {
    config.max_depth = static_cast<int>(parse_axis_number(name, value));
  } else if (name == "eta") {
    config.learning_rate = parse_axis_number(name, value);
  } else if (name == "subsample") {
    config.subsample = parse_axis_number(name, value);
  } else if (name == "dropout") {
    config.dropout_rate = parse_axis_number(name, value);
  } else if (name == "gamma") {
    config.gamma = parse_axis_number(name, value);
  } else if (name == "alpha") {
    config.alpha = parse_axis_number(name, value);
  } else if (name == "lambda") {
    config.lambda = parse_axis_number(name, value);
  } else {
    throw std::invalid_argument("unknown grid axis: " + name);
  }
}

std::vector<ModelConfig> enumerate_grid(const Grid& grid, const ModelConfig& base) {
  for (const auto& axis : grid.axes)
    if (axis.values.empty())
      throw std::invalid_argument("grid axis '" + axis.name + "' has no values");
  std::vector<ModelConfig> out;
  std::vector<size_t> odometer(grid.axes.size(), 0);
  while (true) {
    ModelConfig cfg = base;
    cfg.learner = grid.learner;
    for (size_t a = 0; a < grid.axes.size(); ++a)
      apply_axis(cfg, grid.axes[a].name, grid.axes[a].values[odometer[a]]);
    out.push_back(cfg);
    size_t a = grid.axes.size();
    while (a > 0) {
      --a;
      if (++odometer[a] < grid.axes[a].values.size()) break;
      odometer[a] = 0;
      if (a == 0) return out;
    }
    if (grid.axes.empty()) return out;
  }
}

TrainedModel fit_model(const FeatureMatrix& matrix, const std::vector<int>& labels,
                       const ModelConfig& config, WarningSink* warnings) {
  ClassWeights weights = class_weights(labels);
  switch (config.learner) {
    case Learner::LR:
      return fit_logistic(matrix, labels, weights, config, warnings);
    case Learner::SVM:
      return fit_linear_svm(matrix, labels, weights, config, warnings);
    case Learner::RF:
      return fit_random_forest(matrix, labels, weights, config, warnings);
    case Learner::GBT:
      return fit_gbt(matrix, labels, weights, config, warnings);
  }
  throw std::logic_error("bad Learner");
}

GridSearchOutcome grid_search(const FeatureMatrix& matrix, const Grid& grid,
                              const ModelConfig& base, const CvPlan& plan,
                              const GridSearchOptions& options, WarningSink* warnings) {
  auto configs = enumerate_grid(grid, base);
  auto folds = stratified_folds(matrix.labels, plan);
  size_t per_config = static_cast<size_t>(plan.repeats) * static_cast<size_t>(plan.k);

  struct Slot {
    double auc = 0.0;
    bool used = false;
  };
  std::vector<Slot> slots(configs.size() * per_config);
  std::vector<std::string> skip_notes(configs.size() * per_config);

  parallel_for(slots.size(), options.threads, [&](size_t task) {
    size_t ci = task / per_config;
    size_t rf = task % per_config;
    size_t r = rf / plan.k;
    size_t f = rf % plan.k;

    const auto& val_rows = folds[r][f];
    std::vector<size_t> train_rows;
    train_rows.reserve(matrix.n_rows - val_rows.size());
    for (size_t other = 0; other < folds[r].size(); ++other)
      if (other != f)
        train_rows.insert(train_rows.end(), folds[r][other].begin(), folds[r][other].end());
    std::sort(train_rows.begin(), train_rows.end());

    auto val = take_rows(matrix, val_rows);
    bool pos = false, neg = false;
    for (int l : val.labels) (l ? pos : neg) = true;
    if (!pos || !neg) {
      skip_notes[task] = "grid config " + std::to_string(ci + 1) + ": repeat " +
                         std::to_string(r + 1) + " fold " + std::to_string(f + 1) +
                         " validation has one class; fold skipped";
      return;
    }

    auto train = take_rows(matrix, train_rows);
    ModelConfig cfg = configs[ci];
    cfg.threads = 1;
    auto model = fit_model(train, train.labels, cfg);
    slots[task].auc = auc_score(predict_margin(model, val), val.labels);
    slots[task].used = true;
  });

  for (const auto& note : skip_notes)
    if (!note.empty()) warn(warnings, note);

  GridSearchOutcome out;
  out.ranking.reserve(configs.size());
  for (size_t ci = 0; ci < configs.size(); ++ci) {
    GridResult res;
    res.config = configs[ci];
    for (size_t rf = 0; rf < per_config; ++rf) {
      const Slot& s = slots[ci * per_config + rf];
      if (s.used) res.fold_aucs.push_back(s.auc);
      else ++res.folds_skipped;
    }
    if (res.fold_aucs.empty())
      throw std::runtime_error("grid config " + std::to_string(ci + 1) +
                               ": every validation fold was skipped");
    res.mean_auc = mean(res.fold_aucs);
    res.sd_auc = res.fold_aucs.size() < 2 ? 0.0 : std::sqrt(sample_variance(res.fold_aucs));
    out.ranking.push_back(std::move(res));
  }

  std::vector<size_t> order(out.ranking.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (out.ranking[a].mean_auc != out.ranking[b].mean_auc)
      return out.ranking[a].mean_auc > out.ranking[b].mean_auc;
    if (out.ranking[a].sd_auc != out.ranking[b].sd_auc)
      return out.ranking[a].sd_auc < out.ranking[b].sd_auc;
    return a < b;
  });
  std::vector<GridResult> ranked;
  ranked.reserve(order.size());
  for (size_t idx : order) ranked.push_back(std::move(out.ranking[idx]));
  out.ranking = std::move(ranked);
  out.winner_grid_index = order[0];

  ModelConfig winner_cfg = configs[order[0]];
  winner_cfg.threads = options.threads;
  out.winner = fit_model(matrix, matrix.labels, winner_cfg, warnings);
  return out;
}

}  // namespace riskbench
