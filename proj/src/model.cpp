#include "riskbench/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace riskbench {

using nlohmann::json;

std::string learner_name(Learner l) {
  switch (l) {
    case Learner::LR: return "lr";
    case Learner::SVM: return "svm";
    case Learner::RF: return "rf";
    case Learner::GBT: return "gbt";
  }
  throw std::logic_error("bad Learner");
}

Learner parse_learner(const std::string& s) {
  if (s == "lr") return Learner::LR;
  if (s == "svm") return Learner::SVM;
  if (s == "rf") return Learner::RF;
  if (s == "gbt") return Learner::GBT;
  throw std::runtime_error("unknown learner: " + s + " (expected lr, svm, rf, or gbt)");
}

std::string penalty_name(Penalty p) {
  switch (p) {
    case Penalty::L1: return "l1";
    case Penalty::L2: return "l2";
    case Penalty::ElasticNet: return "elasticnet";
  }
  throw std::logic_error("bad Penalty");
}

Penalty parse_penalty(const std::string& s) {
  if (s == "l1") return Penalty::L1;
  if (s == "l2") return Penalty::L2;
  if (s == "elasticnet") return Penalty::ElasticNet;
  throw std::runtime_error("unknown penalty: " + s);
}

ClassWeights class_weights(const std::vector<int>& labels) {
  size_t n0 = 0, n1 = 0;
  for (int y : labels) (y ? n1 : n0) += 1;
  if (n0 == 0 || n1 == 0)
    throw std::runtime_error("cannot weight a one-class problem");
  double n = static_cast<double>(labels.size());
  ClassWeights w;
  w.w0 = n / (2.0 * static_cast<double>(n0));
  w.w1 = n / (2.0 * static_cast<double>(n1));
  return w;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double Tree::predict(const double* x) const {
  int node = 0;
  while (!nodes[node].is_leaf()) {
    const TreeNode& nd = nodes[node];
    node = x[nd.feature] < nd.threshold ? nd.left : nd.right;
  }
  return nodes[node].value;
}

int Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int best = 0;
  while (!stack.empty()) {
    auto [idx, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    const TreeNode& nd = nodes[idx];
    if (!nd.is_leaf()) {
      stack.push_back({nd.left, d + 1});
      stack.push_back({nd.right, d + 1});
    }
  }
  return best;
}

double ensemble_value(const TrainedModel& model, const double* x) {
  if (model.is_linear()) {
    double m = model.linear.intercept;
    for (size_t j = 0; j < model.linear.weights.size(); ++j)
      m += model.linear.weights[j] * x[j];
    return m;
  }
  double v = model.base_score;
  for (const auto& t : model.ensemble.trees) v += t.scale * t.predict(x);
  return v;
}

namespace {

double margin_of_value(const TrainedModel& model, double v) {
  if (!model.ensemble.output_is_probability) return v;
  double p = std::clamp(v, 1e-9, 1.0 - 1e-9);
  return std::log(p / (1.0 - p));
}

double proba_of_value(const TrainedModel& model, double v) {
  if (model.ensemble.output_is_probability) return std::clamp(v, 0.0, 1.0);
  if (model.config.learner == Learner::SVM && model.linear.platt_fitted)
    return sigmoid(model.linear.platt_a * v + model.linear.platt_b);
  return sigmoid(v);
}

}  // namespace

std::vector<double> predict_margin(const TrainedModel& model, const FeatureMatrix& matrix) {
  check_columns(model, matrix);
  std::vector<double> out(matrix.n_rows);
  for (size_t i = 0; i < matrix.n_rows; ++i)
    out[i] = margin_of_value(model, ensemble_value(model, &matrix.data[i * matrix.n_cols()]));
  return out;
}

std::vector<double> predict_proba(const TrainedModel& model, const FeatureMatrix& matrix) {
  check_columns(model, matrix);
  std::vector<double> out(matrix.n_rows);
  for (size_t i = 0; i < matrix.n_rows; ++i)
    out[i] = proba_of_value(model, ensemble_value(model, &matrix.data[i * matrix.n_cols()]));
  return out;
}

void check_columns(const TrainedModel& model, const FeatureMatrix& matrix) {
  auto names = matrix.column_names();
  if (names == model.column_names) return;
  std::ostringstream msg;
  msg << "input columns do not match the model's training columns;";
  std::set<std::string> have(names.begin(), names.end());
  std::set<std::string> want(model.column_names.begin(), model.column_names.end());
  std::vector<std::string> missing, extra;
  for (const auto& w : want)
    if (!have.count(w)) missing.push_back(w);
  for (const auto& h : have)
    if (!want.count(h)) extra.push_back(h);
  if (!missing.empty()) {
    msg << " missing:";
    for (const auto& m : missing) msg << " " << m;
    msg << ";";
  }
  if (!extra.empty()) {
    msg << " unexpected:";
    for (const auto& e : extra) msg << " " << e;
    msg << ";";
  }
  if (missing.empty() && extra.empty()) {
    for (size_t j = 0; j < names.size(); ++j)
      if (names[j] != model.column_names[j]) {
        msg << " order differs starting at position " << j << " (expected '"
            << model.column_names[j] << "', got '" << names[j] << "')";
        break;
      }
  }
  throw std::runtime_error(msg.str());
}

namespace {

json config_to_json(const ModelConfig& c) {
  json j;
  j["learner"] = learner_name(c.learner);
  j["seed"] = c.seed;
  switch (c.learner) {
    case Learner::LR:
    case Learner::SVM:
      j["penalty"] = penalty_name(c.penalty);
      j["C"] = c.C;
      if (c.penalty == Penalty::ElasticNet) j["l1_ratio"] = c.l1_ratio;
      j["max_epochs"] = c.max_epochs;
      break;
    case Learner::RF:
      j["n_trees"] = c.n_trees;
      j["max_depth"] = c.max_depth;
      j["bootstrap"] = c.bootstrap;
      break;
    case Learner::GBT:
      j["n_trees"] = c.n_trees;
      j["max_depth"] = c.max_depth;
      j["learning_rate"] = c.learning_rate;
      j["subsample"] = c.subsample;
      j["colsample"] = c.colsample;
      j["gamma"] = c.gamma;
      j["alpha"] = c.alpha;
      j["lambda"] = c.lambda;
      j["dropout_rate"] = c.dropout_rate;
      break;
  }
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.learner = parse_learner(j.at("learner").get<std::string>());
  c.seed = j.value("seed", uint64_t{0});
  switch (c.learner) {
    case Learner::LR:
    case Learner::SVM:
      c.penalty = parse_penalty(j.value("penalty", std::string("l2")));
      c.C = j.value("C", 1.0);
      c.l1_ratio = j.value("l1_ratio", 0.5);
      c.max_epochs = j.value("max_epochs", 1000);
      break;
    case Learner::RF:
      c.n_trees = j.value("n_trees", 100);
      c.max_depth = j.value("max_depth", 6);
      c.bootstrap = j.value("bootstrap", true);
      break;
    case Learner::GBT:
      c.n_trees = j.value("n_trees", 100);
      c.max_depth = j.value("max_depth", 6);
      c.learning_rate = j.value("learning_rate", 0.1);
      c.subsample = j.value("subsample", 1.0);
      c.colsample = j.value("colsample", 1.0);
      c.gamma = j.value("gamma", 0.0);
      c.alpha = j.value("alpha", 0.0);
      c.lambda = j.value("lambda", 1.0);
      c.dropout_rate = j.value("dropout_rate", 0.0);
      break;
  }
  return c;
}

}  // namespace

std::string model_to_json(const TrainedModel& model) {
  json j;
  j["format_version"] = 1;
  j["config"] = config_to_json(model.config);
  j["base_score"] = model.base_score;
  j["columns"] = model.column_names;
  j["class_weights"] = {{"w0", model.weights.w0}, {"w1", model.weights.w1}};
  j["n_train"] = model.n_train;
  j["converged"] = model.converged;
  if (model.is_linear()) {
    json lin;
    lin["weights"] = model.linear.weights;
    lin["intercept"] = model.linear.intercept;
    if (model.linear.platt_fitted)
      lin["platt"] = {{"a", model.linear.platt_a}, {"b", model.linear.platt_b}};
    j["linear"] = std::move(lin);
  } else {
    json trees = json::array();
    for (const auto& t : model.ensemble.trees) {
      json jt;
      jt["scale"] = t.scale;
      json nodes = json::array();
      for (const auto& nd : t.nodes)
        nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.value});
      jt["nodes"] = std::move(nodes);
      trees.push_back(std::move(jt));
    }
    j["trees"] = std::move(trees);
    j["output_is_probability"] = model.ensemble.output_is_probability;
  }
  return j.dump(2) + "\n";
}

TrainedModel model_from_json(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(origin + ": invalid JSON: " + e.what());
  }
  int version = j.value("format_version", 0);
  if (version != 1)
    throw std::runtime_error(origin + ": unsupported model format_version " +
                             std::to_string(version));
  TrainedModel m;
  m.config = config_from_json(j.at("config"));
  m.base_score = j.at("base_score").get<double>();
  m.column_names = j.at("columns").get<std::vector<std::string>>();
  m.weights.w0 = j.at("class_weights").at("w0").get<double>();
  m.weights.w1 = j.at("class_weights").at("w1").get<double>();
  m.n_train = j.value("n_train", size_t{0});
  m.converged = j.value("converged", true);
  size_t p = m.column_names.size();
  if (m.is_linear()) {
    const auto& lin = j.at("linear");
    m.linear.weights = lin.at("weights").get<std::vector<double>>();
    m.linear.intercept = lin.at("intercept").get<double>();
    if (m.linear.weights.size() != p)
      throw std::runtime_error(origin + ": weight count does not match column count");
    if (lin.contains("platt")) {
      m.linear.platt_fitted = true;
      m.linear.platt_a = lin["platt"].at("a").get<double>();
      m.linear.platt_b = lin["platt"].at("b").get<double>();
    }
  } else {
    m.ensemble.output_is_probability = j.value("output_is_probability", false);
    for (const auto& jt : j.at("trees")) {
      Tree t;
      t.scale = jt.at("scale").get<double>();
      for (const auto& jn : jt.at("nodes")) {
        TreeNode nd;
        nd.feature = jn.at(0).get<int>();
        nd.threshold = jn.at(1).get<double>();
        nd.left = jn.at(2).get<int>();
        nd.right = jn.at(3).get<int>();
        nd.value = jn.at(4).get<double>();
        if (nd.feature >= static_cast<int>(p))
          throw std::runtime_error(origin + ": split feature index out of range");
        if (!std::isfinite(nd.threshold) || !std::isfinite(nd.value))
          throw std::runtime_error(origin + ": non-finite tree parameter");
        t.nodes.push_back(nd);
      }
      int n_nodes = static_cast<int>(t.nodes.size());
      for (const auto& nd : t.nodes)
        if (!nd.is_leaf() && (nd.left < 0 || nd.left >= n_nodes || nd.right < 0 ||
                              nd.right >= n_nodes))
          throw std::runtime_error(origin + ": tree child index out of range");
      m.ensemble.trees.push_back(std::move(t));
    }
  }
  return m;
}

void save_model(const TrainedModel& model, const std::string& path) {
  atomic_write_file(path, model_to_json(model));
}

TrainedModel load_model(const std::string& path) {
  return model_from_json(read_file(path), path);
}

std::string model_config_to_json(const ModelConfig& config) {
  return config_to_json(config).dump(2) + "\n";
}

ModelConfig model_config_from_json(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(origin + ": invalid JSON: " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const std::exception& e) {
    throw std::runtime_error(origin + ": " + e.what());
  }
}

}  // namespace riskbench
