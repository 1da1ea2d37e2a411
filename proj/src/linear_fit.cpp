#include "riskbench/linear_fit.hpp"

#include <cmath>
#include <stdexcept>

#include "riskbench/rng.hpp"

namespace riskbench {

namespace {

// Scalar loss derivative with respect to the margin, including the class
// weight. Squared hinge uses y in {-1,+1}.
double margin_derivative(Learner learner, int label, double w, double margin) {
  if (learner == Learner::LR) {
    double p = sigmoid(margin);
    return w * (p - static_cast<double>(label));
  }
  double y = label ? 1.0 : -1.0;
  double slack = 1.0 - y * margin;
  if (slack <= 0.0) return 0.0;
  return w * (-2.0 * y * slack);
}

double margin_loss(Learner learner, int label, double w, double margin) {
  if (learner == Learner::LR) {
    // log(1 + exp(-z)) with the stable branch per sign.
    double z = label ? margin : -margin;
    double l = z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
    return w * l;
  }
  double y = label ? 1.0 : -1.0;
  double slack = std::max(0.0, 1.0 - y * margin);
  return w * slack * slack;
}

struct PenaltySplit {
  double l1 = 0.0, l2 = 0.0;  // multipliers on |b| and b^2/2
};

PenaltySplit penalty_split(const ModelConfig& config) {
  double tau = 1.0 / config.C;
  switch (config.penalty) {
    case Penalty::L1: return {tau, 0.0};
    case Penalty::L2: return {0.0, tau};
    case Penalty::ElasticNet: return {tau * config.l1_ratio, tau * (1.0 - config.l1_ratio)};
  }
  throw std::logic_error("bad Penalty");
}

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

}  // namespace

double linear_data_loss(const FeatureMatrix& matrix, const std::vector<int>& labels,
                        const ClassWeights& weights, Learner learner,
                        const std::vector<double>& beta, double intercept) {
  size_t n = matrix.n_rows, p = matrix.n_cols();
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double m = intercept;
    for (size_t j = 0; j < p; ++j) m += beta[j] * matrix.at(i, j);
    total += margin_loss(learner, labels[i], weights.of(labels[i]), m);
  }
  return total / static_cast<double>(n);
}

std::vector<double> linear_data_gradient(const FeatureMatrix& matrix,
                                         const std::vector<int>& labels,
                                         const ClassWeights& weights, Learner learner,
                                         const std::vector<double>& beta, double intercept) {
  size_t n = matrix.n_rows, p = matrix.n_cols();
  std::vector<double> grad(p + 1, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double m = intercept;
    for (size_t j = 0; j < p; ++j) m += beta[j] * matrix.at(i, j);
    double d = margin_derivative(learner, labels[i], weights.of(labels[i]), m);
    for (size_t j = 0; j < p; ++j) grad[j] += d * matrix.at(i, j);
    grad[p] += d;
  }
  for (double& g : grad) g /= static_cast<double>(n);
  return grad;
}

std::vector<double> logistic_hessian(const FeatureMatrix& matrix, const std::vector<int>& labels,
                                     const ClassWeights& weights,
                                     const std::vector<double>& beta, double intercept) {
  size_t n = matrix.n_rows, p = matrix.n_cols();
  size_t d = p + 1;
  std::vector<double> hess(d * d, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double m = intercept;
    for (size_t j = 0; j < p; ++j) m += beta[j] * matrix.at(i, j);
    double pr = sigmoid(m);
    double w = weights.of(labels[i]) * pr * (1.0 - pr);
    for (size_t a = 0; a < d; ++a) {
      double xa = a < p ? matrix.at(i, a) : 1.0;
      for (size_t b = 0; b <= a; ++b) {
        double xb = b < p ? matrix.at(i, b) : 1.0;
        hess[a * d + b] += w * xa * xb;
      }
    }
  }
  for (size_t a = 0; a < d; ++a)
    for (size_t b = 0; b <= a; ++b) {
      hess[a * d + b] /= static_cast<double>(n);
      hess[b * d + a] = hess[a * d + b];
    }
  return hess;
}

double linear_penalty(const ModelConfig& config, const std::vector<double>& beta) {
  PenaltySplit ps = penalty_split(config);
  double l1 = 0.0, l2 = 0.0;
  for (double b : beta) {
    l1 += std::fabs(b);
    l2 += b * b;
  }
  return ps.l1 * l1 + ps.l2 * 0.5 * l2;
}

namespace {

TrainedModel fit_linear(const FeatureMatrix& matrix, const std::vector<int>& labels,
                        const ClassWeights& weights, const ModelConfig& config,
                        WarningSink* warnings) {
  if (config.C <= 0.0) throw std::runtime_error("C must be positive");
  size_t n = matrix.n_rows, p = matrix.n_cols();
  if (n == 0 || labels.size() != n)
    throw std::runtime_error("label count does not match matrix rows");

  Learner learner = config.learner;
  PenaltySplit ps = penalty_split(config);

  // Lipschitz constant of the per-sample margin derivative times the largest
  // row norm bounds the incremental-gradient step.
  double curvature = learner == Learner::LR ? 0.25 : 2.0;
  double max_row = 1.0;
  for (size_t i = 0; i < n; ++i) {
    double s = 1.0;
    for (size_t j = 0; j < p; ++j) s += matrix.at(i, j) * matrix.at(i, j);
    max_row = std::max(max_row, s);
  }
  double wmax = std::max(weights.w0, weights.w1);
  double step = 1.0 / (3.0 * curvature * wmax * max_row);

  std::vector<double> beta(p, 0.0);
  double intercept = 0.0;

  // Stored per-sample margin derivatives and their running average direction.
  std::vector<double> stored(n);
  std::vector<double> avg(p + 1, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double d = margin_derivative(learner, labels[i], weights.of(labels[i]), 0.0);
    stored[i] = d;
    for (size_t j = 0; j < p; ++j) avg[j] += d * matrix.at(i, j);
    avg[p] += d;
  }
  for (double& a : avg) a /= static_cast<double>(n);

  Rng rng(config.seed, "linear-fit");
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;

  // The convergence criterion is a 1e-6 coefficient change per epoch; after
  // meeting it the solver keeps polishing to 1e-9 so that equivalent
  // problems (e.g. a duplicated cohort) land on the same optimum to well
  // below prediction tolerance.
  bool converged = false;
  bool polished = false;
  for (int epoch = 0; epoch < config.max_epochs && !polished; ++epoch) {
    Rng erng = rng.derive(static_cast<uint64_t>(epoch));
    erng.shuffle(order);
    double max_change = 0.0;
    for (size_t t = 0; t < n; ++t) {
      size_t i = order[t];
      double m = intercept;
      for (size_t j = 0; j < p; ++j) m += beta[j] * matrix.at(i, j);
      double d_new = margin_derivative(learner, labels[i], weights.of(labels[i]), m);
      double delta = d_new - stored[i];
      stored[i] = d_new;

      for (size_t j = 0; j < p; ++j) {
        double g = delta * matrix.at(i, j) + avg[j];
        double z = beta[j] - step * g;
        double nb = soft_threshold(z, step * ps.l1) / (1.0 + step * ps.l2);
        max_change = std::max(max_change, std::fabs(nb - beta[j]));
        beta[j] = nb;
        avg[j] += delta * matrix.at(i, j) / static_cast<double>(n);
      }
      double g = delta + avg[p];
      double nb = intercept - step * g;
      max_change = std::max(max_change, std::fabs(nb - intercept));
      intercept = nb;
      avg[p] += delta / static_cast<double>(n);
    }
    if (max_change < 1e-6) converged = true;
    if (max_change < 1e-9) polished = true;
  }
  if (!converged)
    warn(warnings, learner_name(learner) + std::string(" solver hit max_epochs (") +
                       std::to_string(config.max_epochs) + ") before the coefficient change "
                       "dropped below 1e-6");

  TrainedModel model;
  model.config = config;
  model.linear.weights = std::move(beta);
  model.linear.intercept = intercept;
  model.n_train = n;
  model.weights = weights;
  model.converged = converged;
  model.column_names = matrix.column_names();
  return model;
}

// Logistic map from margins to probabilities with smoothed targets, fitted by
// damped Newton on two parameters.
void fit_platt(TrainedModel& model, const FeatureMatrix& matrix, const std::vector<int>& labels) {
  size_t n = matrix.n_rows;
  std::vector<double> margins(n);
  for (size_t i = 0; i < n; ++i)
    margins[i] = ensemble_value(model, &matrix.data[i * matrix.n_cols()]);

  double n1 = 0, n0 = 0;
  for (int y : labels) (y ? n1 : n0) += 1;
  double t_pos = (n1 + 1.0) / (n1 + 2.0);
  double t_neg = 1.0 / (n0 + 2.0);

  double a = 1.0, b = 0.0;
  for (int iter = 0; iter < 100; ++iter) {
    double g0 = 0, g1 = 0, h00 = 0, h01 = 0, h11 = 0;
    for (size_t i = 0; i < n; ++i) {
      double t = labels[i] ? t_pos : t_neg;
      double pr = sigmoid(a * margins[i] + b);
      double r = pr - t;
      double w = std::max(pr * (1.0 - pr), 1e-12);
      g0 += r * margins[i];
      g1 += r;
      h00 += w * margins[i] * margins[i];
      h01 += w * margins[i];
      h11 += w;
    }
    double det = h00 * h11 - h01 * h01;
    if (std::fabs(det) < 1e-12) break;
    double da = (h11 * g0 - h01 * g1) / det;
    double db = (h00 * g1 - h01 * g0) / det;
    a -= da;
    b -= db;
    if (std::fabs(da) + std::fabs(db) < 1e-10) break;
  }
  model.linear.platt_fitted = true;
  model.linear.platt_a = a;
  model.linear.platt_b = b;
}

}  // namespace

TrainedModel fit_logistic(const FeatureMatrix& matrix, const std::vector<int>& labels,
                          const ClassWeights& weights, const ModelConfig& config,
                          WarningSink* warnings) {
  ModelConfig c = config;
  c.learner = Learner::LR;
  return fit_linear(matrix, labels, weights, c, warnings);
}

TrainedModel fit_linear_svm(const FeatureMatrix& matrix, const std::vector<int>& labels,
                            const ClassWeights& weights, const ModelConfig& config,
                            WarningSink* warnings) {
  ModelConfig c = config;
  c.learner = Learner::SVM;
  TrainedModel model = fit_linear(matrix, labels, weights, c, warnings);
  fit_platt(model, matrix, labels);
  return model;
}

}  // namespace riskbench
