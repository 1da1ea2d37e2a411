#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"

#include "riskbench/compare.hpp"
#include "riskbench/cox.hpp"
#include "riskbench/grace.hpp"
#include "riskbench/rng.hpp"
#include "riskbench/shap.hpp"
#include "riskbench/tree_fit.hpp"
#include "test_support.hpp"

using namespace riskbench;
using testsupport::make_matrix;

namespace {

#ifndef RISKBENCH_DATA_DIR
#define RISKBENCH_DATA_DIR "data"
#endif

const std::string kTablePath = std::string(RISKBENCH_DATA_DIR) + "/grace_table.json";

GracePointTable shipped_table() { return load_grace_table(kTablePath); }

GraceInput mid_profile() {
  GraceInput in;
  in.age = 67;
  in.heart_rate = 95;
  in.systolic_bp = 115;
  in.creatinine = 1.3;
  in.killip = 2;
  in.st_deviation = true;
  in.elevated_enzymes = true;
  return in;
}

void set_marker(GraceInput& in, const std::string& name, double value) {
  if (name == "age")
    in.age = value;
  else if (name == "heart_rate")
    in.heart_rate = value;
  else if (name == "systolic_bp")
    in.systolic_bp = value;
  else
    in.creatinine = value;
}

// Tampers the shipped file through a JSON patch function and reparses.
template <typename Fn>
GracePointTable reparse_tampered(Fn patch) {
  nlohmann::json doc = nlohmann::json::parse(read_file(kTablePath));
  patch(doc);
  return parse_grace_table(doc.dump(), "tampered");
}

struct SurvivalDraw {
  std::vector<std::vector<double>> x;
  std::vector<double> times;
  std::vector<int> events;
};

// Exponential baseline with a proportional effect on the first covariate and
// administrative censoring at the horizon.
SurvivalDraw draw_survival(size_t n, size_t p, double beta0, double horizon, uint64_t seed,
                           bool binary_first) {
  SurvivalDraw d;
  Rng rng(seed, "survival-fixture");
  for (size_t i = 0; i < n; ++i) {
    Rng r = rng.derive(i);
    std::vector<double> row(p);
    for (size_t j = 0; j < p; ++j) row[j] = r.next_normal();
    if (binary_first) row[0] = r.next_bernoulli(0.5) ? 1.0 : 0.0;
    double t = -std::log(r.next_double()) / std::exp(beta0 * row[0]);
    int ev = 1;
    if (t > horizon) {
      t = horizon;
      ev = 0;
    }
    d.x.push_back(std::move(row));
    d.times.push_back(t);
    d.events.push_back(ev);
  }
  return d;
}

}  // namespace

TEST_CASE("the shipped point table loads and keeps its published shape") {
  GracePointTable table = shipped_table();
  CHECK(table.version == "granger-2003-in-hospital");
  CHECK(table.source.find("2003") != std::string::npos);
  REQUIRE(table.numeric.size() == 4);
  CHECK(table.numeric[0].name == "age");
  CHECK(table.numeric[1].name == "heart_rate");
  CHECK(table.numeric[2].name == "systolic_bp");
  CHECK(table.numeric[3].name == "creatinine");
  CHECK(table.numeric[0].ascending);
  CHECK(table.numeric[1].ascending);
  CHECK_FALSE(table.numeric[2].ascending);  // risk falls as pressure rises
  CHECK(table.numeric[3].ascending);
  CHECK(table.killip == std::array<int, 4>{0, 20, 39, 59});
  CHECK(table.cardiac_arrest == 39);
  CHECK(table.st_deviation == 28);
  CHECK(table.elevated_enzymes == 14);
  for (const auto& m : table.numeric) {
    CHECK(m.bands.front().lower == 0.0);
    CHECK(std::isinf(m.bands.back().upper));
  }
}

TEST_CASE("hand-tallied profiles reproduce the banded totals") {
  GracePointTable table = shipped_table();

  GraceInput floor_profile;
  floor_profile.age = 25;
  floor_profile.heart_rate = 45;
  floor_profile.systolic_bp = 210;
  floor_profile.creatinine = 0.2;
  floor_profile.killip = 1;
  GraceScore s1 = grace_score(floor_profile, table);
  CHECK(s1.total == 1);  // the lowest creatinine band alone carries a point
  REQUIRE(s1.breakdown.size() == 8);
  for (const auto& item : s1.breakdown)
    CHECK(item.points == (item.marker == "creatinine" ? 1 : 0));
  CHECK(s1.breakdown[3].band == "[0, 0.4)");
  CHECK(s1.breakdown[4].band == "class I");
  CHECK(s1.breakdown[5].band == "absent");

  CHECK(grace_score(mid_profile(), table).total == 188);

  GraceInput worst;
  worst.age = 82;
  worst.heart_rate = 152;
  worst.systolic_bp = 78;
  worst.creatinine = 4.5;
  worst.killip = 4;
  worst.cardiac_arrest = true;
  worst.st_deviation = true;
  worst.elevated_enzymes = true;
  CHECK(grace_score(worst, table).total == 355);

  GraceInput mild;
  mild.age = 45;
  mild.heart_rate = 70;
  mild.systolic_bp = 140;
  mild.creatinine = 0.9;
  mild.killip = 1;
  CHECK(grace_score(mild, table).total == 65);

  // Values sitting exactly on a boundary belong to the upper band.
  GraceInput edges;
  edges.age = 90;
  edges.heart_rate = 200;
  edges.systolic_bp = 200;
  edges.creatinine = 2.0;
  edges.killip = 3;
  edges.cardiac_arrest = true;
  CHECK(grace_score(edges, table).total == 245);
}

TEST_CASE("the minimum reachable total is the creatinine floor") {
  GracePointTable table = shipped_table();
  int floor_total = table.killip[0];
  for (const auto& m : table.numeric) {
    int lowest = m.bands.front().points;
    for (const auto& b : m.bands) lowest = std::min(lowest, b.points);
    floor_total += lowest;
  }
  CHECK(floor_total == 1);
}

TEST_CASE("the killip class raises the score strictly") {
  GracePointTable table = shipped_table();
  GraceInput in = mid_profile();
  int last = -1;
  for (int k = 1; k <= 4; ++k) {
    in.killip = k;
    int total = grace_score(in, table).total;
    CHECK(total > last);
    last = total;
  }
  in.killip = 1;
  int base = grace_score(in, table).total;
  in.killip = 4;
  CHECK(grace_score(in, table).total == base + 59);
}

TEST_CASE("totals are monotone along each marker's declared direction") {
  GracePointTable table = shipped_table();
  for (const auto& marker : table.numeric) {
    std::vector<double> probes;
    for (const auto& band : marker.bands) {
      probes.push_back(band.lower);
      probes.push_back(std::isinf(band.upper) ? band.lower + 7.0
                                              : (band.lower + band.upper) / 2.0);
    }
    GraceInput in = mid_profile();
    int prev = -1;
    bool first = true;
    for (double v : probes) {
      set_marker(in, marker.name, v);
      int total = grace_score(in, table).total;
      if (!first) {
        if (marker.ascending)
          CHECK(total >= prev);
        else
          CHECK(total <= prev);
      }
      prev = total;
      first = false;
    }
  }
}

TEST_CASE("marker evaluation order cannot change the total") {
  GracePointTable table = shipped_table();
  GraceInput in = mid_profile();
  int expected = grace_score(in, table).total;
  GracePointTable reversed = table;
  std::reverse(reversed.numeric.begin(), reversed.numeric.end());
  CHECK(grace_score(in, reversed).total == expected);
}

TEST_CASE("scoring rejects missing and out-of-band markers") {
  GracePointTable table = shipped_table();
  GraceInput in = mid_profile();
  in.heart_rate = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(grace_score(in, table), doctest::Contains("heart_rate is missing"),
                       std::invalid_argument);
  in = mid_profile();
  in.creatinine = -0.5;
  CHECK_THROWS_WITH_AS(grace_score(in, table),
                       doctest::Contains("creatinine value -0.5 falls outside"),
                       std::invalid_argument);
  in = mid_profile();
  in.age = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(grace_score(in, table), std::invalid_argument);
  in = mid_profile();
  in.killip = 5;
  CHECK_THROWS_WITH_AS(grace_score(in, table), doctest::Contains("killip"),
                       std::invalid_argument);
}

TEST_CASE("table validation rejects broken files") {
  CHECK_THROWS_WITH_AS(parse_grace_table("{ not json", "bad"), doctest::Contains("invalid JSON"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(
      reparse_tampered([](nlohmann::json& d) { d["extra"] = 1; }),
      doctest::Contains("unknown key"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      reparse_tampered([](nlohmann::json& d) { d["schema"] = "grace-point-table/v2"; }),
      doctest::Contains("schema"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      reparse_tampered(
          [](nlohmann::json& d) { d["numeric_markers"][0]["bands"][1]["lower"] = 25; }),
      doctest::Contains("contiguous"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      reparse_tampered(
          [](nlohmann::json& d) { d["numeric_markers"][0]["bands"][2]["points"] = -3; }),
      doctest::Contains("non-negative"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      reparse_tampered(
          [](nlohmann::json& d) { d["numeric_markers"][0]["bands"][2]["points"] = 8.5; }),
      doctest::Contains("integers"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      reparse_tampered(
          [](nlohmann::json& d) { d["numeric_markers"][0]["bands"][2]["points"] = 1; }),
      doctest::Contains("monotone"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      reparse_tampered(
          [](nlohmann::json& d) { d["numeric_markers"][2]["direction"] = "ascending"; }),
      doctest::Contains("monotone"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      reparse_tampered([](nlohmann::json& d) { d["killip_points"]["II"] = 0; }),
      doctest::Contains("rise strictly"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      reparse_tampered([](nlohmann::json& d) { d["numeric_markers"].erase(3); }),
      doctest::Contains("exactly 4"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      reparse_tampered([](nlohmann::json& d) { d["numeric_markers"][0]["name"] = "agee"; }),
      doctest::Contains("exactly once"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      reparse_tampered(
          [](nlohmann::json& d) { d["numeric_markers"][1]["bands"].back()["upper"] = 300; }),
      doctest::Contains("end open"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      reparse_tampered(
          [](nlohmann::json& d) { d["numeric_markers"][1]["bands"][0]["lower"] = 10; }),
      doctest::Contains("start at 0"), std::runtime_error);
}

TEST_CASE("matrix columns feed the point score") {
  FeatureMatrix m;
  m.n_rows = 3;
  auto add_col = [&](const std::string& name, const std::string& source, Derivation d,
                     const std::string& category, double mean, double sd) {
    ColumnInfo c;
    c.name = name;
    c.source = source;
    c.derivation = d;
    c.category = category;
    c.mean = mean;
    c.sd = sd;
    m.columns.push_back(c);
  };
  add_col("age", "age", Derivation::Value, "", 65, 10);
  add_col("heart_rate@mean", "heart_rate", Derivation::Mean, "", 85, 15);
  add_col("sbp", "sbp", Derivation::Value, "", 130, 20);
  add_col("creatinine", "creatinine", Derivation::Value, "", 1.1, 0.4);
  for (const char* level : {"I", "II", "III", "IV"})
    add_col(std::string("killip=") + level, "killip", Derivation::OneHot, level, 0, 1);
  add_col("cardiac_arrest", "cardiac_arrest", Derivation::Value, "", 0, 1);
  add_col("st_deviation", "st_deviation", Derivation::Value, "", 0, 1);
  add_col("enzymes_elevated", "enzymes_elevated", Derivation::Value, "", 0, 1);

  auto standardized = [&](size_t j, double raw) {
    return (raw - m.columns[j].mean) / m.columns[j].sd;
  };
  std::vector<std::vector<double>> raw_rows = {
      {67, 95, 115, 1.3, 0, 1, 0, 0, 0, 1, 1},
      {45, 70, 140, 0.9, 1, 0, 0, 0, 0, 0, 0},
      // fractional one-hot cells, as mean imputation leaves them: argmax wins
      {25, 45, 210, 0.2, 0.2, 0.1, 0.6, 0.1, 0, 0, 0},
  };
  for (const auto& row : raw_rows)
    for (size_t j = 0; j < row.size(); ++j) m.data.push_back(standardized(j, row[j]));
  m.labels = {1, 0, 0};
  m.row_sex = {kFemale, kMale, kFemale};
  m.row_age = {67, 45, 25};
  m.row_survival.assign(3, std::numeric_limits<double>::quiet_NaN());
  m.row_ids = {"a", "b", "c"};

  GracePointTable table = shipped_table();
  auto inputs = grace_inputs_from_matrix(m);
  REQUIRE(inputs.size() == 3);
  CHECK(inputs[0].killip == 2);
  CHECK(inputs[0].st_deviation);
  CHECK_FALSE(inputs[0].cardiac_arrest);
  CHECK(inputs[2].killip == 3);
  CHECK(grace_score(inputs[0], table).total == 188);
  CHECK(grace_score(inputs[1], table).total == 65);
  CHECK(grace_score(inputs[2], table).total == 1 + 39);

  auto totals = grace_scores(inputs, table);
  CHECK(totals == std::vector<double>{188, 65, 40});
  CHECK(grace_scores(inputs, table, 8) == totals);

  GraceColumns renamed;
  renamed.creatinine = "serum_creatinine";
  CHECK_THROWS_WITH_AS(grace_inputs_from_matrix(m, renamed),
                       doctest::Contains("serum_creatinine"), std::invalid_argument);

  FeatureMatrix odd = m;
  odd.columns[4].category = "V";
  CHECK_THROWS_WITH_AS(grace_inputs_from_matrix(odd), doctest::Contains("not one of"),
                       std::invalid_argument);
}

TEST_CASE("point totals separate a cohort whose mortality rides on age and heart rate") {
  GracePointTable table = shipped_table();
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed, "grace-eval");
    size_t n = 800;
    std::vector<GraceInput> inputs;
    std::vector<int> labels;
    std::vector<double> noise_scores;
    for (size_t i = 0; i < n; ++i) {
      Rng r = rng.derive(i);
      GraceInput in;
      in.age = 30 + 65 * r.next_double();
      in.heart_rate = 45 + 115 * r.next_double();
      in.systolic_bp = std::max(60.0, r.next_normal(130, 20));
      in.creatinine = std::exp(r.next_normal(-0.1, 0.4));
      double ku = r.next_double();
      in.killip = ku < 0.7 ? 1 : ku < 0.85 ? 2 : ku < 0.95 ? 3 : 4;
      in.cardiac_arrest = r.next_bernoulli(0.05);
      in.st_deviation = r.next_bernoulli(0.1);
      in.elevated_enzymes = r.next_bernoulli(0.1);
      double logit = -2.2 + 0.07 * (in.age - 65) + 0.035 * (in.heart_rate - 85);
      labels.push_back(r.next_bernoulli(1.0 / (1.0 + std::exp(-logit))) ? 1 : 0);
      noise_scores.push_back(r.next_double());
      inputs.push_back(in);
    }
    EvalReport report = grace_eval(inputs, labels, table, &noise_scores, seed);
    CHECK(report.auc > 0.5);
    REQUIRE(report.delong.has_value());
    CHECK(std::fabs(report.delong->auc_a - report.auc) < 1e-12);
    CHECK(report.delong->p_value < 0.05);
    REQUIRE(report.mcnemar.has_value());
    CHECK(report.ci_lower <= report.auc);
    CHECK(report.auc <= report.ci_upper);
  }
}

TEST_CASE("comparing the point score against itself trips the variance guard") {
  GracePointTable table = shipped_table();
  Rng rng(3, "self");
  std::vector<GraceInput> inputs;
  std::vector<int> labels;
  for (size_t i = 0; i < 60; ++i) {
    Rng r = rng.derive(i);
    GraceInput in = mid_profile();
    in.age = 35 + 55 * r.next_double();
    inputs.push_back(in);
    labels.push_back(r.next_bernoulli(0.4) ? 1 : 0);
  }
  std::vector<double> same = grace_scores(inputs, table);
  CHECK_THROWS_WITH_AS(grace_eval(inputs, labels, table, &same),
                       doctest::Contains("degenerate variance"), std::runtime_error);
}

TEST_CASE("tied event times follow the Efron path exactly") {
  std::vector<std::vector<double>> x = {{1}, {0}, {1}, {0}};
  std::vector<double> t = {1, 1, 2, 3};
  std::vector<int> e = {1, 1, 1, 0};
  CoxFit fit = fit_cox(x, t, e);
  CHECK(fit.converged);
  CHECK(fit.ties == "efron");
  // stationarity of the tied-data likelihood puts the estimate at exactly ln 2
  CHECK(std::fabs(fit.beta[0] - std::log(2.0)) < 1e-10);
  CHECK(std::fabs(fit.log_likelihood - std::log(4.0 / 81.0)) < 1e-10);
  CHECK(std::fabs(fit.hazard_ratio(0) - 2.0) < 1e-9);
  CHECK(fit.se[0] > 0.0);
  CHECK(fit.p[0] > 0.0);
  CHECK(fit.p[0] < 1.0);
  CHECK(fit.names == std::vector<std::string>{"x1"});
}

TEST_CASE("the likelihood gradient matches central differences") {
  SurvivalDraw d = draw_survival(60, 3, 0.8, 1.4, 11, false);
  Rng rng(5, "beta-points");
  for (int trial = 0; trial < 6; ++trial) {
    std::vector<double> beta(3);
    for (auto& b : beta) b = rng.next_normal(0, 0.7);
    std::vector<double> grad;
    cox_log_likelihood(d.x, d.times, d.events, beta, &grad);
    for (size_t j = 0; j < 3; ++j) {
      double h = 1e-4 * std::max(1.0, std::fabs(beta[j]));
      std::vector<double> up = beta, down = beta;
      up[j] += h;
      down[j] -= h;
      double fd = (cox_log_likelihood(d.x, d.times, d.events, up) -
                   cox_log_likelihood(d.x, d.times, d.events, down)) /
                  (2 * h);
      CHECK(std::fabs(fd - grad[j]) < 1e-5 * std::max(1.0, std::fabs(grad[j])));
    }
  }
}

TEST_CASE("rescaling a covariate rescales its coefficient only") {
  SurvivalDraw d = draw_survival(400, 2, 0.7, 1.3, 21, false);
  CoxFit base = fit_cox(d.x, d.times, d.events);
  REQUIRE(base.converged);

  auto scaled = d.x;
  for (auto& row : scaled) row[0] *= 50.0;
  CoxFit fit = fit_cox(scaled, d.times, d.events);
  CHECK(std::fabs(fit.beta[0] - base.beta[0] / 50.0) < 1e-6 * std::fabs(base.beta[0] / 50.0) + 1e-12);
  CHECK(std::fabs(fit.beta[1] - base.beta[1]) < 1e-6);
  CHECK(std::fabs(fit.z[0] - base.z[0]) < 1e-6);
  CHECK(std::fabs(fit.z[1] - base.z[1]) < 1e-6);
  CHECK(std::fabs(fit.p[0] - base.p[0]) < 1e-6);

  auto shifted = d.x;
  for (auto& row : shifted) row[0] += 3.5;
  CoxFit shift_fit = fit_cox(shifted, d.times, d.events);
  CHECK(std::fabs(shift_fit.beta[0] - base.beta[0]) < 1e-8);
  CHECK(std::fabs(shift_fit.beta[1] - base.beta[1]) < 1e-8);
}

TEST_CASE("a hazard-free covariate stays inside two standard errors") {
  int inside = 0;
  for (uint64_t seed = 1; seed <= 100; ++seed) {
    SurvivalDraw d = draw_survival(2000, 1, 0.0, 1.5, 1000 + seed, false);
    CoxFit fit = fit_cox(d.x, d.times, d.events);
    if (std::fabs(fit.beta[0]) < 2.0 * fit.se[0]) ++inside;
  }
  CHECK(inside >= 93);
}

TEST_CASE("a planted hazard ratio of two is recovered with honest intervals") {
  double sum_beta = 0.0;
  int covered = 0;
  double censored_fraction = 0.0;
  for (uint64_t seed = 1; seed <= 50; ++seed) {
    SurvivalDraw d = draw_survival(2000, 1, std::log(2.0), 1.19, 2000 + seed, true);
    for (int ev : d.events) censored_fraction += ev == 0 ? 1.0 : 0.0;
    CoxFit fit = fit_cox(d.x, d.times, d.events);
    REQUIRE(fit.converged);
    sum_beta += fit.beta[0];
    double lo = fit.beta[0] - 1.959963984540054 * fit.se[0];
    double hi = fit.beta[0] + 1.959963984540054 * fit.se[0];
    if (lo <= std::log(2.0) && std::log(2.0) <= hi) ++covered;
  }
  double mean_beta = sum_beta / 50.0;
  CHECK(std::fabs(mean_beta - std::log(2.0)) < 0.15);
  CHECK(covered >= 46);  // 0.92 of 50
  censored_fraction /= 50.0 * 2000.0;
  CHECK(censored_fraction > 0.15);
  CHECK(censored_fraction < 0.25);
}

TEST_CASE("degenerate survival inputs are rejected") {
  std::vector<std::vector<double>> x = {{1}, {0}, {1}};
  CHECK_THROWS_WITH_AS(fit_cox(x, {1, 2, 3}, {0, 0, 0}), doctest::Contains("no events"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(fit_cox(x, {1, 0, 3}, {1, 0, 1}), doctest::Contains("positive"),
                       std::invalid_argument);
  std::vector<std::vector<double>> flat = {{1, 4}, {0, 4}, {1, 4}};
  CHECK_THROWS_WITH_AS(fit_cox(flat, {1, 2, 3}, {1, 0, 1}),
                       doctest::Contains("'x2' is constant"), std::invalid_argument);
  CHECK_THROWS_AS(fit_cox(std::vector<std::vector<double>>{}, {}, {}), std::invalid_argument);
  CHECK_THROWS_WITH_AS(cox_log_likelihood(x, {1, 2, 3}, {1, 0, 1}, {0.0, 0.0}),
                       doctest::Contains("beta length"), std::invalid_argument);
}

TEST_CASE("perfect separation is flagged instead of diverging silently") {
  std::vector<std::vector<double>> x = {{1}, {1}, {1}, {0}, {0}, {0}};
  std::vector<double> t = {1, 2, 3, 10, 10, 10};
  std::vector<int> e = {1, 1, 1, 0, 0, 0};
  CoxFit fit = fit_cox(x, t, e);
  CHECK_FALSE(fit.converged);
  REQUIRE(fit.warnings.size() == 1);
  CHECK(fit.warnings[0].find("separation") != std::string::npos);
  CHECK(fit.warnings[0].find("x1") != std::string::npos);
  CHECK(std::fabs(fit.beta[0]) > 20.0);
}

TEST_CASE("a subject censored before the first event leaves the fit untouched") {
  SurvivalDraw d = draw_survival(200, 1, std::log(2.0), 1.19, 7, true);
  CoxFit base = fit_cox(d.x, d.times, d.events);

  double first_event = std::numeric_limits<double>::infinity();
  double mean_x = 0.0;
  for (size_t i = 0; i < d.times.size(); ++i) {
    if (d.events[i]) first_event = std::min(first_event, d.times[i]);
    mean_x += d.x[i][0];
  }
  mean_x /= static_cast<double>(d.times.size());

  // Censored before anyone dies: the subject joins no risk set at all.
  SurvivalDraw early = d;
  early.x.push_back({mean_x});
  early.times.push_back(first_event / 2.0);
  early.events.push_back(0);
  CoxFit fit = fit_cox(early.x, early.times, early.events);
  CHECK(std::fabs(fit.beta[0] - base.beta[0]) < 1e-12);
  CHECK(std::fabs(fit.log_likelihood - base.log_likelihood) < 1e-12);

  // Censored after the last event the same subject sits in every risk set,
  // so the estimate genuinely moves.
  SurvivalDraw late = d;
  late.x.push_back({mean_x});
  late.times.push_back(*std::max_element(d.times.begin(), d.times.end()) + 1.0);
  late.events.push_back(0);
  CoxFit moved = fit_cox(late.x, late.times, late.events);
  CHECK(std::fabs(moved.beta[0] - base.beta[0]) > 1e-9);
}

TEST_CASE("matrix fits name their covariates") {
  SurvivalDraw d = draw_survival(120, 2, 0.8, 1.4, 31, false);
  std::vector<int> labels = d.events;
  FeatureMatrix m = make_matrix(d.x, labels);
  m.row_survival = d.times;

  CoxFit dense = fit_cox(d.x, d.times, d.events, {"f0", "f1"});
  CoxFit via_matrix = fit_cox(m, d.times, d.events);
  CHECK(via_matrix.names == std::vector<std::string>{"f0", "f1"});
  CHECK(via_matrix.beta == dense.beta);

  CoxFit via_survival = fit_cox_survival(m);
  CHECK(via_survival.beta == dense.beta);

  FeatureMatrix flat = m;
  flat.columns[1].constant = true;
  CHECK_THROWS_WITH_AS(fit_cox(flat, d.times, d.events), doctest::Contains("'f1' is constant"),
                       std::invalid_argument);

  FeatureMatrix no_times = make_matrix(d.x, labels);
  CHECK_THROWS_WITH_AS(fit_cox_survival(no_times), doctest::Contains("survival time"),
                       std::invalid_argument);
}

TEST_CASE("importance and hazard significance join per marker and group") {
  GroupImportance women{"women", 40, {{0, "urea", 1.46}, {1, "lactate", 0.51}}};
  GroupImportance men{"men", 60, {{0, "urea", 0.64}, {1, "lactate", 0.02}}};

  CoxFit women_fit;
  women_fit.names = {"urea"};
  women_fit.beta = {1.1};
  women_fit.se = {0.2};
  women_fit.z = {5.5};
  women_fit.p = {0.001};
  CoxFit men_fit;
  men_fit.names = {"urea", "lactate", "shock"};
  men_fit.beta = {0.4, 0.1, 0.8};
  men_fit.se = {0.2, 0.3, 0.3};
  men_fit.z = {2.0, 0.33, 2.67};
  men_fit.p = {0.034, 0.2, 0.008};

  auto cmp = compare_markers({women, men}, {{"women", women_fit}, {"men", men_fit}},
                             {"urea", "lactate", "shock"});
  CHECK(cmp.groups == std::vector<std::string>{"women", "men"});
  CHECK(cmp.markers.size() == 3);

  const MarkerCell& urea_w = cmp.cells[0][0];
  CHECK(urea_w.has_shap);
  CHECK(urea_w.mean_abs_shap == 1.46);
  CHECK(urea_w.has_cox);
  CHECK(urea_w.significant);

  const MarkerCell& lactate_w = cmp.cells[1][0];
  CHECK(lactate_w.has_shap);
  CHECK_FALSE(lactate_w.has_cox);
  CHECK_FALSE(lactate_w.significant);

  const MarkerCell& shock_w = cmp.cells[2][0];
  CHECK_FALSE(shock_w.has_shap);
  CHECK_FALSE(shock_w.has_cox);

  const MarkerCell& shock_m = cmp.cells[2][1];
  CHECK_FALSE(shock_m.has_shap);
  CHECK(shock_m.has_cox);
  CHECK(shock_m.significant);

  bool lactate_flagged = false, shock_flagged = false;
  for (const auto& w : cmp.warnings) {
    if (w.find("lactate") != std::string::npos && w.find("women") != std::string::npos)
      lactate_flagged = true;
    if (w.find("shock") != std::string::npos && w.find("no SHAP") != std::string::npos)
      shock_flagged = true;
  }
  CHECK(lactate_flagged);
  CHECK(shock_flagged);

  CHECK_THROWS_AS(compare_markers({women}, {}, {}), std::invalid_argument);
}

TEST_CASE("the grid renders the published table shape") {
  GroupImportance women{"women", 40, {{0, "creatinine", 1.4567}, {1, "urea", 0.44}}};
  GroupImportance men{"men", 60, {{0, "creatinine", 0.64}, {1, "urea", 0.50}}};
  CoxFit women_fit;
  women_fit.names = {"creatinine", "urea"};
  women_fit.beta = {1, 1};
  women_fit.se = {1, 1};
  women_fit.z = {1, 1};
  women_fit.p = {0.001, 0.2};
  CoxFit men_fit;
  men_fit.names = {"creatinine"};
  men_fit.beta = {1};
  men_fit.se = {1};
  men_fit.z = {1};
  men_fit.p = {0.034};

  auto cmp = compare_markers({women, men}, {{"women", women_fit}, {"men", men_fit}},
                             {"creatinine", "urea"});
  std::string md = comparison_to_markdown(cmp);
  CHECK(md.find("| Risk marker |") == 0);
  CHECK(md.find("women average SHAP") != std::string::npos);
  CHECK(md.find("men Cox p-value") != std::string::npos);
  CHECK(md.find("| 1.46 |") != std::string::npos);
  CHECK(md.find("<0.005*") != std::string::npos);
  CHECK(md.find("0.20") != std::string::npos);     // plain p, no star
  CHECK(md.find("0.20*") == std::string::npos);
  CHECK(md.find("0.03*") != std::string::npos);    // starred but above 0.005
  CHECK(md.find("n/a") != std::string::npos);      // urea missing from the men fit

  std::string csv = comparison_to_csv(cmp);
  CHECK(csv.rfind("marker,women mean_abs_shap,women cox_p,women significant,"
                  "men mean_abs_shap,men cox_p,men significant\n", 0) == 0);
  CHECK(csv.find("creatinine,1.4567,0.001,1,0.64,0.034,1") != std::string::npos);
  CHECK(csv.find("urea,0.44,0.2,0,0.5,,") != std::string::npos);
}

TEST_CASE("hazard-free markers earn stars at the nominal rate") {
  int starred = 0;
  const int trials = 300;
  double example_p = -1.0;
  for (int trial = 0; trial < trials; ++trial) {
    SurvivalDraw d = draw_survival(150, 1, 0.0, 1.5, 9000 + static_cast<uint64_t>(trial), false);
    CoxFit fit = fit_cox(d.x, d.times, d.events);
    if (fit.p[0] < 0.05) ++starred;
    if (trial == 0) example_p = fit.p[0];
  }
  double frequency = static_cast<double>(starred) / trials;
  CHECK(frequency > 0.01);
  CHECK(frequency < 0.10);

  CoxFit null_fit;
  null_fit.names = {"noise"};
  null_fit.beta = {0.0};
  null_fit.se = {1.0};
  null_fit.z = {0.0};
  null_fit.p = {example_p};
  GroupImportance gi{"all", 150, {{0, "noise", 0.0}}};
  auto cmp = compare_markers({gi}, {{"all", null_fit}}, {"noise"});
  CHECK(cmp.cells[0][0].mean_abs_shap == 0.0);
  CHECK(cmp.cells[0][0].cox_p == example_p);
  CHECK(cmp.cells[0][0].significant == (example_p < 0.05));
}

TEST_CASE("a planted marker is flagged concordantly by both views") {
  int concordant = 0;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    SurvivalDraw d = draw_survival(500, 5, 1.3, 1.0, 400 + seed, false);
    FeatureMatrix m = make_matrix(d.x, d.events);

    ModelConfig config;
    config.learner = Learner::GBT;
    config.n_trees = 60;
    config.max_depth = 3;
    config.learning_rate = 0.2;
    config.seed = seed;
    TrainedModel model = fit_gbt(m, m.labels, class_weights(m.labels), config);
    FeatureMatrix background = sample_background(m, 60, seed);
    std::vector<size_t> probe_rows;
    for (size_t i = 0; i < 120; ++i) probe_rows.push_back(i * 4);
    Attribution attribution = tree_shap(model, take_rows(m, probe_rows), background, 4);
    ImportanceRanking ranking = feature_importance(attribution);

    CoxFit fit = fit_cox(d.x, d.times, d.events, m.column_names());
    bool shap_first = ranking.front().name == "f0";
    bool cox_strong = fit.p[0] < 0.005;
    if (shap_first && cox_strong) ++concordant;

    if (seed == 1) {
      GroupImportance gi{"all", 120, ranking};
      auto cmp = compare_markers({gi}, {{"all", fit}}, m.column_names());
      CHECK(cmp.cells[0][0].has_shap);
      CHECK(cmp.cells[0][0].has_cox);
      CHECK(cmp.warnings.empty());
    }
  }
  CHECK(concordant >= 9);
}
