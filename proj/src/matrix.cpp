#include "riskbench/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "riskbench/rng.hpp"

namespace riskbench {

std::string derivation_name(Derivation d) {
  switch (d) {
    case Derivation::Value: return "value";
    case Derivation::Min: return "min";
    case Derivation::Max: return "max";
    case Derivation::Mean: return "mean";
    case Derivation::OneHot: return "onehot";
  }
  throw std::logic_error("bad Derivation");
}

Derivation parse_derivation(const std::string& s) {
  if (s == "value") return Derivation::Value;
  if (s == "min") return Derivation::Min;
  if (s == "max") return Derivation::Max;
  if (s == "mean") return Derivation::Mean;
  if (s == "onehot") return Derivation::OneHot;
  throw std::runtime_error("unknown derivation: " + s);
}

std::vector<std::string> FeatureMatrix::column_names() const {
  std::vector<std::string> out;
  out.reserve(columns.size());
  for (const auto& c : columns) out.push_back(c.name);
  return out;
}

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::optional<double> core_value(const RawEpisode& ep, const std::string& name) {
  if (name == "age") return ep.age;
  if (name == "los_days") return ep.los_days;
  return std::nullopt;
}

}  // namespace

FeatureMatrix build_matrix(const std::vector<RawEpisode>& episodes, const FeatureSpecList& spec,
                           const MatrixOptions& options, WarningSink* warnings) {
  if (episodes.size() < 2)
    throw std::runtime_error("build_matrix requires at least 2 episodes");
  if (spec.empty()) throw std::runtime_error("build_matrix requires at least 1 feature");

  size_t n = episodes.size();
  FeatureMatrix m;
  m.n_rows = n;
  m.labels.reserve(n);
  for (const auto& ep : episodes) {
    m.labels.push_back(ep.label);
    m.row_sex.push_back(ep.sex);
    m.row_age.push_back(ep.age);
    m.row_survival.push_back(ep.survival_days ? *ep.survival_days : kMissing);
    m.row_ids.push_back(ep.episode_id);
  }

  // Column plan plus a getter per column producing the raw (possibly missing)
  // value for one episode.
  struct Plan {
    ColumnInfo info;
    std::function<std::optional<double>(const RawEpisode&)> get;
  };
  std::vector<Plan> plans;

  for (const auto& f : spec) {
    switch (f.kind) {
      case FeatureKind::StaticNumeric:
      case FeatureKind::BinaryFlag: {
        Plan p;
        p.info.name = f.name;
        p.info.source = f.name;
        p.info.derivation = Derivation::Value;
        p.get = [name = f.name](const RawEpisode& ep) -> std::optional<double> {
          if (auto core = core_value(ep, name)) return core;
          auto it = ep.numeric_values.find(name);
          if (it == ep.numeric_values.end()) return std::nullopt;
          return it->second;
        };
        plans.push_back(std::move(p));
        break;
      }
      case FeatureKind::DynamicNumeric: {
        struct Part { const char* suffix; Derivation d; };
        for (auto part : {Part{"@min", Derivation::Min}, Part{"@max", Derivation::Max},
                          Part{"@mean", Derivation::Mean}}) {
          Plan p;
          p.info.name = f.name + part.suffix;
          p.info.source = f.name;
          p.info.derivation = part.d;
          p.get = [name = f.name, d = part.d](const RawEpisode& ep) -> std::optional<double> {
            DynamicSummary s = ep.dynamic_aggregate(name);
            switch (d) {
              case Derivation::Min: return s.min;
              case Derivation::Max: return s.max;
              default: return s.mean;
            }
          };
          plans.push_back(std::move(p));
        }
        break;
      }
      case FeatureKind::StaticCategorical: {
        std::vector<std::string> levels = f.levels;
        if (levels.empty()) {
          std::set<std::string> observed;
          for (const auto& ep : episodes) {
            if (f.name == "sex") {
              observed.insert(ep.sex == kFemale ? "female" : "male");
              continue;
            }
            auto it = ep.category_values.find(f.name);
            if (it != ep.category_values.end()) observed.insert(it->second);
          }
          levels.assign(observed.begin(), observed.end());
        }
        if (levels.empty())
          throw std::runtime_error("feature '" + f.name +
                                   "' has no observed values; cannot derive columns");
        for (const auto& lv : levels) {
          Plan p;
          p.info.name = f.name + "=" + lv;
          p.info.source = f.name;
          p.info.derivation = Derivation::OneHot;
          p.info.category = lv;
          p.get = [name = f.name, lv](const RawEpisode& ep) -> std::optional<double> {
            if (name == "sex")
              return (ep.sex == kFemale ? std::string("female") : std::string("male")) == lv
                         ? 1.0 : 0.0;
            auto it = ep.category_values.find(name);
            if (it == ep.category_values.end()) return std::nullopt;
            return it->second == lv ? 1.0 : 0.0;
          };
          plans.push_back(std::move(p));
        }
        break;
      }
    }
  }

  size_t p = plans.size();
  m.columns.resize(p);
  m.data.assign(n * p, kMissing);

  std::vector<size_t> all_rows;
  const std::vector<size_t>* stats_rows = options.stats_rows;
  if (!stats_rows) {
    all_rows.resize(n);
    for (size_t i = 0; i < n; ++i) all_rows[i] = i;
    stats_rows = &all_rows;
  }
  for (size_t i : *stats_rows)
    if (i >= n) throw std::runtime_error("stats row index out of range");

  parallel_for(p, options.threads, [&](size_t j) {
    ColumnInfo info = plans[j].info;
    for (size_t i = 0; i < n; ++i) {
      auto v = plans[j].get(episodes[i]);
      if (v) m.data[i * p + j] = *v;
    }

    double sum = 0.0;
    size_t observed = 0;
    for (size_t i : *stats_rows) {
      double v = m.data[i * p + j];
      if (!std::isnan(v)) { sum += v; ++observed; }
    }
    if (observed == 0)
      throw std::runtime_error("feature '" + info.source + "' (column '" + info.name +
                               "') has no observed values; no mean exists for imputation");
    double impute = sum / static_cast<double>(observed);

    size_t imputed = 0;
    for (size_t i = 0; i < n; ++i) {
      double& v = m.data[i * p + j];
      if (std::isnan(v)) { v = impute; ++imputed; }
    }
    info.imputed_fraction = static_cast<double>(imputed) / static_cast<double>(n);

    double mean = 0.0;
    for (size_t i : *stats_rows) mean += m.data[i * p + j];
    mean /= static_cast<double>(stats_rows->size());
    double ss = 0.0;
    for (size_t i : *stats_rows) {
      double d = m.data[i * p + j] - mean;
      ss += d * d;
    }
    double sd = stats_rows->size() > 1
                    ? std::sqrt(ss / static_cast<double>(stats_rows->size() - 1))
                    : 0.0;
    info.mean = mean;
    if (sd == 0.0 || !std::isfinite(sd)) {
      info.sd = 0.0;
      info.constant = true;
      for (size_t i = 0; i < n; ++i) m.data[i * p + j] = 0.0;
    } else {
      info.sd = sd;
      for (size_t i = 0; i < n; ++i) m.data[i * p + j] = (m.data[i * p + j] - mean) / sd;
    }
    m.columns[j] = std::move(info);
  });

  if (warnings)
    for (const auto& c : m.columns)
      if (c.constant) warn(warnings, "column '" + c.name + "' is constant; flagged and zeroed");
  return m;
}

SplitIndex split_holdout(const FeatureMatrix& matrix, double test_fraction, uint64_t seed) {
  size_t n = matrix.n_rows;
  if (n < 5) throw std::runtime_error("split_holdout requires at least 5 rows");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::runtime_error("test_fraction must lie in (0,1)");
  bool has0 = false, has1 = false;
  for (int y : matrix.labels) (y ? has1 : has0) = true;
  if (!has0 || !has1) throw std::runtime_error("split_holdout requires both classes present");

  size_t n_test = static_cast<size_t>(std::floor(test_fraction * static_cast<double>(n) + 0.5));
  if (n_test == 0 || n_test >= n)
    throw std::runtime_error("test_fraction leaves an empty partition");

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed, "split");
  rng.shuffle(order);

  SplitIndex idx;
  idx.seed = seed;
  idx.test_rows.assign(order.begin(), order.begin() + static_cast<long>(n_test));
  idx.train_rows.assign(order.begin() + static_cast<long>(n_test), order.end());
  std::sort(idx.test_rows.begin(), idx.test_rows.end());
  std::sort(idx.train_rows.begin(), idx.train_rows.end());

  auto class_count = [&](const std::vector<size_t>& rows, int label) {
    size_t c = 0;
    for (size_t i : rows)
      if (matrix.labels[i] == label) ++c;
    return c;
  };
  for (const auto* part : {&idx.train_rows, &idx.test_rows})
    if (class_count(*part, 0) == 0 || class_count(*part, 1) == 0)
      throw std::runtime_error(
          "degenerate split: a class is absent from one partition; re-seed or use stratified "
          "splitting");
  return idx;
}

FeatureMatrix take_rows(const FeatureMatrix& matrix, const std::vector<size_t>& rows) {
  FeatureMatrix out;
  out.columns = matrix.columns;
  out.n_rows = rows.size();
  size_t p = matrix.n_cols();
  out.data.reserve(rows.size() * p);
  for (size_t i : rows) {
    if (i >= matrix.n_rows) throw std::runtime_error("take_rows: index out of range");
    out.labels.push_back(matrix.labels[i]);
    out.row_sex.push_back(matrix.row_sex[i]);
    out.row_age.push_back(matrix.row_age[i]);
    out.row_survival.push_back(matrix.row_survival[i]);
    out.row_ids.push_back(matrix.row_ids[i]);
    for (size_t j = 0; j < p; ++j) out.data.push_back(matrix.at(i, j));
  }
  return out;
}

}  // namespace riskbench
