#include "riskbench/grace.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

#include "riskbench/common.hpp"

using nlohmann::json;

namespace riskbench {

namespace {

constexpr const char* kSchemaTag = "grace-point-table/v1";
const char* kRoman[4] = {"I", "II", "III", "IV"};

// A typo'd key would otherwise be ignored and quietly change the score.
void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const std::string& origin, const std::string& where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) { ok = true; break; }
    if (!ok)
      throw std::runtime_error(origin + ": unknown key '" + item.key() + "' in " + where);
  }
}

int read_points(const json& j, const std::string& origin, const std::string& where) {
  if (!j.is_number_integer())
    throw std::runtime_error(origin + ": points in " + where + " must be integers");
  int v = j.get<int>();
  if (v < 0)
    throw std::runtime_error(origin + ": points in " + where + " must be non-negative");
  return v;
}

std::string band_text(const GraceBand& band) {
  std::string upper =
      std::isinf(band.upper) ? std::string("inf") : format_shortest(band.upper);
  return "[" + format_shortest(band.lower) + ", " + upper + ")";
}

double numeric_value(const GraceInput& input, const std::string& name) {
  if (name == "age") return input.age;
  if (name == "heart_rate") return input.heart_rate;
  if (name == "systolic_bp") return input.systolic_bp;
  if (name == "creatinine") return input.creatinine;
  throw std::logic_error("unknown numeric marker: " + name);
}

size_t find_column(const FeatureMatrix& matrix, const std::string& name,
                   const std::string& marker) {
  for (size_t j = 0; j < matrix.n_cols(); ++j)
    if (matrix.columns[j].name == name) return j;
  for (size_t j = 0; j < matrix.n_cols(); ++j)
    if (matrix.columns[j].source == name && matrix.columns[j].derivation == Derivation::Mean)
      return j;
  throw std::invalid_argument("point score marker " + marker + ": no column named '" + name +
                              "' in the matrix");
}

}  // namespace

GracePointTable parse_grace_table(const std::string& json_text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const std::exception& e) {
    throw std::runtime_error(origin + ": invalid JSON: " + e.what());
  }
  require_keys(doc, {"schema", "version", "source", "notes", "numeric_markers", "killip_points",
                     "flag_points"}, origin, "point table");
  if (doc.value("schema", "") != kSchemaTag)
    throw std::runtime_error(origin + ": schema must be '" + std::string(kSchemaTag) + "'");

  GracePointTable table;
  table.version = doc.value("version", "");
  table.source = doc.value("source", "");
  if (table.version.empty() || table.source.empty())
    throw std::runtime_error(origin + ": version and source are required");

  if (!doc.contains("numeric_markers") || !doc["numeric_markers"].is_array())
    throw std::runtime_error(origin + ": numeric_markers must be an array");
  for (const auto& jm : doc["numeric_markers"]) {
    require_keys(jm, {"name", "unit", "direction", "bands"}, origin, "numeric marker");
    GraceNumericMarker marker;
    marker.name = jm.value("name", "");
    marker.unit = jm.value("unit", "");
    std::string direction = jm.value("direction", "");
    if (direction == "ascending")
      marker.ascending = true;
    else if (direction == "descending")
      marker.ascending = false;
    else
      throw std::runtime_error(origin + ": marker " + marker.name +
                               ": direction must be 'ascending' or 'descending'");
    if (!jm.contains("bands") || !jm["bands"].is_array() || jm["bands"].empty())
      throw std::runtime_error(origin + ": marker " + marker.name + " has no bands");
    for (const auto& jb : jm["bands"]) {
      require_keys(jb, {"lower", "upper", "points"}, origin, "band of " + marker.name);
      GraceBand band;
      band.lower = jb.at("lower").get<double>();
      band.upper = jb.at("upper").is_null() ? std::numeric_limits<double>::infinity()
                                            : jb.at("upper").get<double>();
      band.points = read_points(jb.at("points"), origin, "marker " + marker.name);
      if (!(band.lower < band.upper))
        throw std::runtime_error(origin + ": marker " + marker.name +
                                 " has a band with lower >= upper");
      marker.bands.push_back(band);
    }
    if (marker.bands.front().lower != 0.0)
      throw std::runtime_error(origin + ": marker " + marker.name +
                               " bands must start at 0");
    if (!std::isinf(marker.bands.back().upper))
      throw std::runtime_error(origin + ": marker " + marker.name +
                               " bands must end open (null upper)");
    for (size_t i = 1; i < marker.bands.size(); ++i) {
      if (marker.bands[i].lower != marker.bands[i - 1].upper)
        throw std::runtime_error(origin + ": marker " + marker.name +
                                 " bands must be contiguous");
      bool ordered = marker.ascending
                         ? marker.bands[i].points >= marker.bands[i - 1].points
                         : marker.bands[i].points <= marker.bands[i - 1].points;
      if (!ordered)
        throw std::runtime_error(origin + ": marker " + marker.name +
                                 " points are not monotone in the declared direction");
    }
    table.numeric.push_back(std::move(marker));
  }
  const std::vector<std::string> expected = {"age", "heart_rate", "systolic_bp", "creatinine"};
  if (table.numeric.size() != expected.size())
    throw std::runtime_error(origin + ": expected exactly 4 numeric markers");
  for (const auto& name : expected) {
    size_t hits = 0;
    for (const auto& m : table.numeric)
      if (m.name == name) ++hits;
    if (hits != 1)
      throw std::runtime_error(origin + ": numeric marker '" + name +
                               "' must appear exactly once");
  }

  if (!doc.contains("killip_points"))
    throw std::runtime_error(origin + ": killip_points is required");
  require_keys(doc["killip_points"], {"I", "II", "III", "IV"}, origin, "killip_points");
  for (int k = 0; k < 4; ++k) {
    if (!doc["killip_points"].contains(kRoman[k]))
      throw std::runtime_error(origin + ": killip_points missing class " +
                               std::string(kRoman[k]));
    table.killip[static_cast<size_t>(k)] =
        read_points(doc["killip_points"][kRoman[k]], origin, "killip_points");
  }
  for (int k = 1; k < 4; ++k)
    if (table.killip[static_cast<size_t>(k)] <= table.killip[static_cast<size_t>(k - 1)])
      throw std::runtime_error(origin + ": killip points must rise strictly from I to IV");

  if (!doc.contains("flag_points"))
    throw std::runtime_error(origin + ": flag_points is required");
  require_keys(doc["flag_points"], {"cardiac_arrest", "st_deviation", "elevated_enzymes"},
               origin, "flag_points");
  for (const char* flag : {"cardiac_arrest", "st_deviation", "elevated_enzymes"})
    if (!doc["flag_points"].contains(flag))
      throw std::runtime_error(origin + ": flag_points missing " + std::string(flag));
  table.cardiac_arrest = read_points(doc["flag_points"]["cardiac_arrest"], origin, "flag_points");
  table.st_deviation = read_points(doc["flag_points"]["st_deviation"], origin, "flag_points");
  table.elevated_enzymes =
      read_points(doc["flag_points"]["elevated_enzymes"], origin, "flag_points");
  return table;
}

GracePointTable load_grace_table(const std::string& path) {
  return parse_grace_table(read_file(path), path);
}

GraceScore grace_score(const GraceInput& input, const GracePointTable& table) {
  GraceScore out;
  for (const auto& marker : table.numeric) {
    double value = numeric_value(input, marker.name);
    if (std::isnan(value))
      throw std::invalid_argument("point score marker " + marker.name +
                                  " is missing; the score has no imputation");
    const GraceBand* hit = nullptr;
    for (const auto& band : marker.bands)
      if (value >= band.lower && value < band.upper) { hit = &band; break; }
    if (!hit)
      throw std::invalid_argument("point score marker " + marker.name + " value " +
                                  format_shortest(value) + " falls outside every band");
    out.breakdown.push_back({marker.name, band_text(*hit), hit->points});
    out.total += hit->points;
  }
  if (input.killip < 1 || input.killip > 4)
    throw std::invalid_argument("killip class must be 1..4, got " +
                                std::to_string(input.killip));
  int kp = table.killip[static_cast<size_t>(input.killip - 1)];
  out.breakdown.push_back({"killip", std::string("class ") + kRoman[input.killip - 1], kp});
  out.total += kp;
  auto add_flag = [&](const char* name, bool present, int points) {
    out.breakdown.push_back({name, present ? "present" : "absent", present ? points : 0});
    if (present) out.total += points;
  };
  add_flag("cardiac_arrest", input.cardiac_arrest, table.cardiac_arrest);
  add_flag("st_deviation", input.st_deviation, table.st_deviation);
  add_flag("elevated_enzymes", input.elevated_enzymes, table.elevated_enzymes);
  return out;
}

std::vector<GraceInput> grace_inputs_from_matrix(const FeatureMatrix& matrix,
                                                 const GraceColumns& columns) {
  size_t age = find_column(matrix, columns.age, "age");
  size_t heart_rate = find_column(matrix, columns.heart_rate, "heart_rate");
  size_t systolic_bp = find_column(matrix, columns.systolic_bp, "systolic_bp");
  size_t creatinine = find_column(matrix, columns.creatinine, "creatinine");
  size_t arrest = find_column(matrix, columns.cardiac_arrest, "cardiac_arrest");
  size_t st_dev = find_column(matrix, columns.st_deviation, "st_deviation");
  size_t enzymes = find_column(matrix, columns.elevated_enzymes, "elevated_enzymes");

  std::vector<std::pair<size_t, int>> killip_cols;  // column, class 1..4
  for (size_t j = 0; j < matrix.n_cols(); ++j) {
    const auto& c = matrix.columns[j];
    if (c.source != columns.killip || c.derivation != Derivation::OneHot) continue;
    int cls = 0;
    for (int k = 0; k < 4; ++k)
      if (c.category == kRoman[k]) cls = k + 1;
    if (cls == 0)
      throw std::invalid_argument("killip level '" + c.category +
                                  "' is not one of I..IV");
    killip_cols.emplace_back(j, cls);
  }
  if (killip_cols.empty())
    throw std::invalid_argument("point score marker killip: no one-hot columns with source '" +
                                columns.killip + "' in the matrix");

  std::vector<GraceInput> out(matrix.n_rows);
  for (size_t i = 0; i < matrix.n_rows; ++i) {
    GraceInput& in = out[i];
    in.age = matrix.raw(i, age);
    in.heart_rate = matrix.raw(i, heart_rate);
    in.systolic_bp = matrix.raw(i, systolic_bp);
    in.creatinine = matrix.raw(i, creatinine);
    in.cardiac_arrest = matrix.raw(i, arrest) > 0.5;
    in.st_deviation = matrix.raw(i, st_dev) > 0.5;
    in.elevated_enzymes = matrix.raw(i, enzymes) > 0.5;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& [col, cls] : killip_cols) {
      double v = matrix.raw(i, col);
      if (v > best) { best = v; in.killip = cls; }
    }
  }
  return out;
}

std::vector<double> grace_scores(const std::vector<GraceInput>& inputs,
                                 const GracePointTable& table, int threads) {
  std::vector<double> out(inputs.size());
  parallel_for(inputs.size(), threads,
               [&](size_t i) { out[i] = grace_score(inputs[i], table).total; });
  return out;
}

EvalReport grace_eval(const std::vector<GraceInput>& inputs, const std::vector<int>& labels,
                      const GracePointTable& table, const std::vector<double>* model_scores,
                      uint64_t seed) {
  std::vector<double> scores = grace_scores(inputs, table);
  EvalReport report = evaluate_scores(scores, labels, 1000, seed);
  if (model_scores) {
    report.delong = delong_test(scores, *model_scores, labels);
    RocCurve model_curve = roc_curve(*model_scores, labels);
    double model_cut = youden_threshold(model_curve);
    double grace_cut = report.operating_point.threshold;
    std::vector<int> grace_pred(scores.size()), model_pred(scores.size());
    for (size_t i = 0; i < scores.size(); ++i) {
      grace_pred[i] = scores[i] >= grace_cut ? 1 : 0;
      model_pred[i] = (*model_scores)[i] >= model_cut ? 1 : 0;
    }
    report.mcnemar = mcnemar_test(grace_pred, model_pred, labels);
  }
  return report;
}

}  // namespace riskbench
