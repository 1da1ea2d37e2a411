#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "riskbench/linear_fit.hpp"
#include "riskbench/matrix.hpp"
#include "riskbench/model.hpp"
#include "riskbench/rng.hpp"
#include "riskbench/synth.hpp"

using namespace riskbench;

namespace {

// Rank-based AUC, independent of the evaluation module.
double rank_auc(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<std::pair<double, int>> v;
  for (size_t i = 0; i < s.size(); ++i) v.push_back({s[i], y[i]});
  std::sort(v.begin(), v.end());
  double n1 = 0, n0 = 0;
  for (int yy : y) (yy ? n1 : n0) += 1;
  double rank_sum = 0;
  size_t i = 0;
  while (i < v.size()) {
    size_t j = i;
    while (j < v.size() && v[j].first == v[i].first) ++j;
    double avg_rank = static_cast<double>(i + 1 + j) / 2.0;
    for (size_t k = i; k < j; ++k)
      if (v[k].second) rank_sum += avg_rank;
    i = j;
  }
  return (rank_sum - n1 * (n1 + 1) / 2.0) / (n1 * n0);
}

// Matrix with given standardized values, bypassing episode plumbing.
FeatureMatrix make_matrix(const std::vector<std::vector<double>>& rows,
                          const std::vector<int>& labels) {
  FeatureMatrix m;
  m.n_rows = rows.size();
  size_t p = rows[0].size();
  for (size_t j = 0; j < p; ++j) {
    ColumnInfo c;
    c.name = "f" + std::to_string(j);
    c.source = c.name;
    c.mean = 0.0;
    c.sd = 1.0;
    m.columns.push_back(c);
  }
  for (const auto& r : rows)
    for (double v : r) m.data.push_back(v);
  m.labels = labels;
  m.row_sex.assign(rows.size(), kFemale);
  m.row_age.assign(rows.size(), 60.0);
  m.row_survival.assign(rows.size(), std::numeric_limits<double>::quiet_NaN());
  for (size_t i = 0; i < rows.size(); ++i) m.row_ids.push_back("r" + std::to_string(i));
  return m;
}

FeatureMatrix planted_matrix(size_t n, uint64_t seed, std::vector<int>* labels_out) {
  GeneratorConfig cfg = parse_generator_config(R"({
    "n": )" + std::to_string(n) + R"(, "base_rate": 0.15,
    "features": [
      {"name":"urea","kind":"static-numeric","mean":40,"sd":18},
      {"name":"anion_gap","kind":"static-numeric","mean":12,"sd":4},
      {"name":"lactate","kind":"static-numeric","mean":2,"sd":1.2},
      {"name":"ef","kind":"static-numeric","mean":50,"sd":10},
      {"name":"ph","kind":"static-numeric","mean":7.38,"sd":0.06},
      {"name":"heart_rate","kind":"static-numeric","mean":82,"sd":16},
      {"name":"noise_a","kind":"static-numeric"},
      {"name":"noise_b","kind":"static-numeric"}
    ],
    "terms": [
      {"feature":"urea","weight":1.9},
      {"feature":"anion_gap","weight":1.6},
      {"feature":"lactate","weight":1.4},
      {"feature":"ef","weight":1.0,"direction":-1},
      {"feature":"ph","weight":0.8,"direction":-1},
      {"feature":"heart_rate","weight":0.6}
    ]})", "gen");
  auto eps = synth_cohort(cfg, seed);
  auto m = build_matrix(eps, spec_from_generator(cfg));
  if (labels_out) *labels_out = m.labels;
  return m;
}

}  // namespace

TEST_CASE("balanced labels weight both classes at one") {
  std::vector<int> labels(100, 0);
  for (size_t i = 0; i < 50; ++i) labels[i] = 1;
  auto w = class_weights(labels);
  CHECK(w.w0 == doctest::Approx(1.0));
  CHECK(w.w1 == doctest::Approx(1.0));
}

TEST_CASE("class weights match hand arithmetic on the cohort counts") {
  {
    std::vector<int> labels(1299, 0);
    for (size_t i = 0; i < 88; ++i) labels[i] = 1;
    auto w = class_weights(labels);
    CHECK(std::fabs(w.w1 - 7.3807) < 1e-4);
    CHECK(std::fabs(w.w0 - 0.5363) < 1e-4);
  }
  {
    std::vector<int> labels(2820, 0);
    for (size_t i = 0; i < 260; ++i) labels[i] = 1;
    auto w = class_weights(labels);
    CHECK(std::fabs(w.w1 - 5.4231) < 1e-4);
  }
}

TEST_CASE("one-class label sequences cannot be weighted") {
  std::vector<int> labels(10, 1);
  CHECK_THROWS_WITH_AS(class_weights(labels), doctest::Contains("one-class"),
                       std::runtime_error);
}

TEST_CASE("weighted class masses balance at n over two") {
  Rng rng(31, "masses");
  for (int rep = 0; rep < 50; ++rep) {
    size_t n = 10 + rng.next_below(500);
    std::vector<int> labels(n);
    size_t n1 = 0;
    for (auto& y : labels) {
      y = rng.next_bernoulli(0.3) ? 1 : 0;
      n1 += y;
    }
    if (n1 == 0 || n1 == n) continue;
    auto w = class_weights(labels);
    double half = static_cast<double>(n) / 2.0;
    CHECK(nearly_equal(w.w1 * static_cast<double>(n1), half, 1e-12));
    CHECK(nearly_equal(w.w0 * static_cast<double>(n - n1), half, 1e-12));
    CHECK(nearly_equal(w.w0 * (n - n1) + w.w1 * n1, static_cast<double>(n), 1e-9));
  }
}

TEST_CASE("separable data fits to a finite perfect ranking") {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 20; ++i) {
    rows.push_back({i < 10 ? -1.0 - 0.1 * i : 1.0 + 0.1 * i});
    labels.push_back(i < 10 ? 0 : 1);
  }
  auto m = make_matrix(rows, labels);
  ModelConfig cfg;
  cfg.penalty = Penalty::L2;
  cfg.C = 1.0;
  auto model = fit_logistic(m, labels, class_weights(labels), cfg);
  CHECK(std::isfinite(model.linear.weights[0]));
  CHECK(model.converged);
  auto margins = predict_margin(model, m);
  CHECK(rank_auc(margins, labels) == doctest::Approx(1.0));
}

TEST_CASE("strong l1 regularization zeroes every coefficient") {
  Rng rng(5, "noise");
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    rows.push_back({rng.next_normal(), rng.next_normal(), rng.next_normal()});
    labels.push_back(i % 2);
  }
  auto m = make_matrix(rows, labels);
  ModelConfig cfg;
  cfg.penalty = Penalty::L1;
  cfg.C = 1e-3;
  auto model = fit_logistic(m, labels, class_weights(labels), cfg);
  for (double b : model.linear.weights) CHECK(b == 0.0);
  auto margins = predict_margin(model, m);
  for (double mg : margins) CHECK(mg == doctest::Approx(model.linear.intercept));
  // Balanced weighting puts the regularized base-rate prediction at one half.
  CHECK(sigmoid(margins[0]) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(7, "fd");
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    rows.push_back({rng.next_normal(), rng.next_normal(), rng.next_normal(),
                    rng.next_normal()});
    labels.push_back(rng.next_bernoulli(0.3) ? 1 : 0);
  }
  auto m = make_matrix(rows, labels);
  auto w = class_weights(labels);

  for (Learner learner : {Learner::LR, Learner::SVM}) {
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> beta(4);
      for (auto& b : beta) b = rng.next_normal();
      double intercept = rng.next_normal();
      auto grad = linear_data_gradient(m, labels, w, learner, beta, intercept);
      const double h = 1e-6;
      for (size_t j = 0; j <= 4; ++j) {
        auto bp = beta, bm = beta;
        double ip = intercept, im = intercept;
        if (j < 4) { bp[j] += h; bm[j] -= h; }
        else { ip += h; im -= h; }
        double fd = (linear_data_loss(m, labels, w, learner, bp, ip) -
                     linear_data_loss(m, labels, w, learner, bm, im)) / (2 * h);
        CHECK(nearly_equal(grad[j], fd, 1e-5, 1e-7));
      }
    }
  }
}

TEST_CASE("logistic hessian matches finite differences of the gradient") {
  Rng rng(13, "hess");
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 30; ++i) {
    rows.push_back({rng.next_normal(), rng.next_normal()});
    labels.push_back(rng.next_bernoulli(0.4) ? 1 : 0);
  }
  auto m = make_matrix(rows, labels);
  auto w = class_weights(labels);

  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> beta{rng.next_normal(), rng.next_normal()};
    double intercept = rng.next_normal();
    auto hess = logistic_hessian(m, labels, w, beta, intercept);
    const size_t d = 3;
    const double h = 1e-6;
    for (size_t j = 0; j < d; ++j) {
      auto bp = beta, bm = beta;
      double ip = intercept, im = intercept;
      if (j < 2) { bp[j] += h; bm[j] -= h; }
      else { ip += h; im -= h; }
      auto gp = linear_data_gradient(m, labels, w, Learner::LR, bp, ip);
      auto gm = linear_data_gradient(m, labels, w, Learner::LR, bm, im);
      for (size_t k = 0; k < d; ++k) {
        double fd = (gp[k] - gm[k]) / (2 * h);
        CHECK(nearly_equal(hess[j * d + k], fd, 1e-5, 1e-7));
      }
    }
  }
}

TEST_CASE("weaker penalties never fit the training data worse") {
  std::vector<int> labels;
  FeatureMatrix m = planted_matrix(300, 41, &labels);
  auto w = class_weights(labels);
  for (Learner learner : {Learner::LR, Learner::SVM}) {
    double prev = std::numeric_limits<double>::infinity();
    for (double C : {1e-2, 1e-1, 1.0, 1e1, 1e2}) {
      ModelConfig cfg;
      cfg.learner = learner;
      cfg.penalty = Penalty::L2;
      cfg.C = C;
      cfg.seed = 2;
      cfg.max_epochs = 3000;
      auto model = learner == Learner::LR ? fit_logistic(m, labels, w, cfg)
                                          : fit_linear_svm(m, labels, w, cfg);
      double loss = linear_data_loss(m, labels, w, learner, model.linear.weights,
                                     model.linear.intercept);
      CHECK(loss <= prev + 1e-6);
      prev = loss;
    }
  }
}

TEST_CASE("duplicating every row leaves linear predictions unchanged") {
  std::vector<int> labels;
  FeatureMatrix m = planted_matrix(150, 43, &labels);
  FeatureMatrix doubled = m;
  doubled.n_rows = 2 * m.n_rows;
  doubled.data.insert(doubled.data.end(), m.data.begin(), m.data.end());
  doubled.labels.insert(doubled.labels.end(), m.labels.begin(), m.labels.end());
  doubled.row_sex.insert(doubled.row_sex.end(), m.row_sex.begin(), m.row_sex.end());
  doubled.row_age.insert(doubled.row_age.end(), m.row_age.begin(), m.row_age.end());
  doubled.row_survival.insert(doubled.row_survival.end(), m.row_survival.begin(),
                              m.row_survival.end());
  doubled.row_ids.insert(doubled.row_ids.end(), m.row_ids.begin(), m.row_ids.end());
  std::vector<int> labels2 = doubled.labels;

  auto w1 = class_weights(labels);
  auto w2 = class_weights(labels2);
  CHECK(w1.w0 == doctest::Approx(w2.w0).epsilon(1e-15));
  CHECK(w1.w1 == doctest::Approx(w2.w1).epsilon(1e-15));

  for (Learner learner : {Learner::LR, Learner::SVM}) {
    ModelConfig cfg;
    cfg.learner = learner;
    cfg.penalty = Penalty::ElasticNet;
    cfg.l1_ratio = 0.5;
    cfg.C = 1.0;
    cfg.max_epochs = 5000;
    auto a = learner == Learner::LR ? fit_logistic(m, labels, w1, cfg)
                                    : fit_linear_svm(m, labels, w1, cfg);
    auto b = learner == Learner::LR ? fit_logistic(doubled, labels2, w2, cfg)
                                    : fit_linear_svm(doubled, labels2, w2, cfg);
    auto pa = predict_margin(a, m);
    auto pb = predict_margin(b, m);
    for (size_t i = 0; i < pa.size(); ++i) CHECK(std::fabs(pa[i] - pb[i]) < 1e-6);
  }
}

TEST_CASE("flipping labels negates every decision margin") {
  std::vector<int> labels;
  FeatureMatrix m = planted_matrix(120, 47, &labels);
  std::vector<int> flipped;
  for (int y : labels) flipped.push_back(1 - y);
  FeatureMatrix mf = m;
  mf.labels = flipped;

  ModelConfig cfg;
  cfg.penalty = Penalty::L2;
  cfg.C = 1.0;
  cfg.seed = 3;
  auto a = fit_linear_svm(m, labels, class_weights(labels), cfg);
  auto b = fit_linear_svm(mf, flipped, class_weights(flipped), cfg);
  auto pa = predict_margin(a, m);
  auto pb = predict_margin(b, mf);
  for (size_t i = 0; i < pa.size(); ++i)
    CHECK(nearly_equal(pa[i], -pb[i], 1e-9, 1e-9));
}

TEST_CASE("separated clouds reach zero hinge loss and perfect ranking") {
  Rng rng(17, "clouds");
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    double cx = i < 20 ? -3.0 : 3.0;
    rows.push_back({cx + 0.3 * rng.next_normal(), 0.3 * rng.next_normal()});
    labels.push_back(i < 20 ? 0 : 1);
  }
  auto m = make_matrix(rows, labels);
  ModelConfig cfg;
  cfg.penalty = Penalty::L2;
  cfg.C = 100.0;
  cfg.max_epochs = 5000;
  auto w = class_weights(labels);
  auto model = fit_linear_svm(m, labels, w, cfg);
  auto margins = predict_margin(model, m);
  CHECK(rank_auc(margins, labels) == doctest::Approx(1.0));
  double hinge = 0.0;
  for (size_t i = 0; i < margins.size(); ++i) {
    double y = labels[i] ? 1.0 : -1.0;
    double slack = std::max(0.0, 1.0 - y * margins[i]);
    hinge += slack * slack;
  }
  CHECK(hinge < 1e-3);
}

TEST_CASE("non-convergence is flagged and warned, not hidden") {
  std::vector<int> labels;
  FeatureMatrix m = planted_matrix(200, 53, &labels);
  ModelConfig cfg;
  cfg.penalty = Penalty::L2;
  cfg.C = 100.0;
  cfg.max_epochs = 1;
  WarningSink warnings;
  auto model = fit_logistic(m, labels, class_weights(labels), cfg, &warnings);
  CHECK_FALSE(model.converged);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("max_epochs") != std::string::npos);
}

TEST_CASE("margin zero maps to probability one half and stays monotone") {
  TrainedModel model;
  model.config.learner = Learner::LR;
  model.linear.weights = {2.0};
  model.linear.intercept = 0.0;
  model.column_names = {"f0"};
  std::vector<std::vector<double>> rows{{-1.0}, {-0.5}, {0.0}, {0.5}, {1.0}};
  auto m = make_matrix(rows, {0, 0, 1, 1, 1});
  auto proba = predict_proba(model, m);
  auto margin = predict_margin(model, m);
  CHECK(proba[2] == doctest::Approx(0.5));
  for (size_t i = 1; i < proba.size(); ++i) {
    CHECK(margin[i] > margin[i - 1]);
    CHECK(proba[i] > proba[i - 1]);
    CHECK(proba[i] > 0.0);
    CHECK(proba[i] < 1.0);
  }
}

TEST_CASE("prediction rejects mismatched columns with a diff") {
  std::vector<int> labels;
  FeatureMatrix m = planted_matrix(50, 59, &labels);
  ModelConfig cfg;
  auto model = fit_logistic(m, labels, class_weights(labels), cfg);
  FeatureMatrix wrong = m;
  wrong.columns[0].name = "urea@zzz";
  CHECK_THROWS_WITH_AS(predict_margin(model, wrong), doctest::Contains("urea@zzz"),
                       std::runtime_error);
}

TEST_CASE("serialized linear models reload to identical predictions") {
  std::vector<int> labels;
  FeatureMatrix m = planted_matrix(100, 61, &labels);
  ModelConfig cfg;
  cfg.penalty = Penalty::ElasticNet;
  cfg.C = 0.5;
  auto model = fit_linear_svm(m, labels, class_weights(labels), cfg);

  auto path = (std::filesystem::temp_directory_path() / "riskbench_svm_model.json").string();
  save_model(model, path);
  auto reloaded = load_model(path);
  auto pa = predict_proba(model, m);
  auto pb = predict_proba(reloaded, m);
  for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == pb[i]);

  // A second serialization pass reproduces the file exactly.
  CHECK(model_to_json(reloaded) == model_to_json(model));
}
