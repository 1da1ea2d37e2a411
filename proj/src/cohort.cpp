#include "riskbench/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "riskbench/csv.hpp"
#include "riskbench/stats.hpp"

namespace riskbench {

using nlohmann::json;

FeatureKind parse_feature_kind(const std::string& s) {
  if (s == "static-categorical") return FeatureKind::StaticCategorical;
  if (s == "static-numeric") return FeatureKind::StaticNumeric;
  if (s == "dynamic-numeric") return FeatureKind::DynamicNumeric;
  if (s == "binary-flag") return FeatureKind::BinaryFlag;
  throw std::runtime_error("unknown feature kind: " + s);
}

std::string feature_kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::StaticCategorical: return "static-categorical";
    case FeatureKind::StaticNumeric: return "static-numeric";
    case FeatureKind::DynamicNumeric: return "dynamic-numeric";
    case FeatureKind::BinaryFlag: return "binary-flag";
  }
  throw std::logic_error("bad FeatureKind");
}

ClinicalSet parse_clinical_set(const std::string& s) {
  if (s == "demographic") return ClinicalSet::Demographic;
  if (s == "complications") return ClinicalSet::Complications;
  if (s == "treatments") return ClinicalSet::Treatments;
  if (s == "procedures") return ClinicalSet::Procedures;
  if (s == "blood-gas") return ClinicalSet::BloodGas;
  if (s == "laboratory") return ClinicalSet::Laboratory;
  if (s == "hemodynamic") return ClinicalSet::Hemodynamic;
  if (s == "vital-signs") return ClinicalSet::VitalSigns;
  throw std::runtime_error("unknown clinical set: " + s);
}

std::string clinical_set_name(ClinicalSet s) {
  switch (s) {
    case ClinicalSet::Demographic: return "demographic";
    case ClinicalSet::Complications: return "complications";
    case ClinicalSet::Treatments: return "treatments";
    case ClinicalSet::Procedures: return "procedures";
    case ClinicalSet::BloodGas: return "blood-gas";
    case ClinicalSet::Laboratory: return "laboratory";
    case ClinicalSet::Hemodynamic: return "hemodynamic";
    case ClinicalSet::VitalSigns: return "vital-signs";
  }
  throw std::logic_error("bad ClinicalSet");
}

FeatureSpecList parse_feature_specs(const std::string& json_text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const std::exception& e) {
    throw std::runtime_error(origin + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("features") || !doc["features"].is_array())
    throw std::runtime_error(origin + ": expected object with a 'features' array");
  FeatureSpecList out;
  std::set<std::string> seen;
  for (const auto& f : doc["features"]) {
    FeatureSpec spec;
    spec.name = f.at("name").get<std::string>();
    if (spec.name.empty()) throw std::runtime_error(origin + ": feature with empty name");
    if (!seen.insert(spec.name).second)
      throw std::runtime_error(origin + ": duplicate feature name: " + spec.name);
    spec.kind = parse_feature_kind(f.at("kind").get<std::string>());
    spec.clinical_set = parse_clinical_set(f.at("clinical_set").get<std::string>());
    spec.unit = f.value("unit", std::string{});
    if (f.contains("levels")) {
      for (const auto& lv : f["levels"]) spec.levels.push_back(lv.get<std::string>());
      if (spec.kind != FeatureKind::StaticCategorical && !spec.levels.empty())
        throw std::runtime_error(origin + ": levels declared on non-categorical feature: " +
                                 spec.name);
    }
    out.push_back(std::move(spec));
  }
  return out;
}

FeatureSpecList load_feature_specs(const std::string& path) {
  return parse_feature_specs(read_file(path), path);
}

std::string feature_specs_to_json(const FeatureSpecList& spec) {
  json doc;
  doc["features"] = json::array();
  for (const auto& f : spec) {
    json jf;
    jf["name"] = f.name;
    jf["kind"] = feature_kind_name(f.kind);
    jf["clinical_set"] = clinical_set_name(f.clinical_set);
    jf["unit"] = f.unit;
    if (!f.levels.empty()) jf["levels"] = f.levels;
    doc["features"].push_back(std::move(jf));
  }
  return doc.dump(2) + "\n";
}

DynamicSummary RawEpisode::dynamic_aggregate(const std::string& feature) const {
  auto seq_it = dynamic_values.find(feature);
  if (seq_it != dynamic_values.end() && !seq_it->second.empty()) {
    DynamicSummary s;
    double lo = seq_it->second.front().value, hi = lo, sum = 0.0;
    for (const auto& pt : seq_it->second) {
      lo = std::min(lo, pt.value);
      hi = std::max(hi, pt.value);
      sum += pt.value;
    }
    s.min = lo;
    s.max = hi;
    s.mean = sum / static_cast<double>(seq_it->second.size());
    return s;
  }
  auto sum_it = dynamic_summaries.find(feature);
  if (sum_it != dynamic_summaries.end()) return sum_it->second;
  return {};
}

namespace {

const char* const kCoreColumns[5] = {"episode_id", "sex", "age", "los_days", "label"};

struct ColumnBinding {
  enum Role { Core, Survival, Numeric, Flag, Category, DynMin, DynMax, DynMean, Unknown } role;
  std::string feature;
};

double require_number(const std::string& cell, const std::string& origin, size_t row,
                      const std::string& column) {
  auto v = parse_cell_double(cell, origin, row, column);
  if (!v)
    throw std::runtime_error(origin + ": row " + std::to_string(row) + ", column '" + column +
                             "': value required but cell is empty");
  return *v;
}

}  // namespace

std::vector<RawEpisode> load_episodes(const std::string& path, const FeatureSpecList& spec,
                                      WarningSink* warnings, const std::string& long_path) {
  CsvTable table = load_csv(path);

  for (const char* core : kCoreColumns)
    if (!table.find_column(core))
      throw std::runtime_error(path + ": missing required column: " + std::string(core));

  std::map<std::string, const FeatureSpec*> by_name;
  for (const auto& f : spec) by_name[f.name] = &f;

  // Resolve every header cell to a role up front so per-row work is a lookup.
  std::vector<ColumnBinding> bindings(table.header.size());
  for (size_t j = 0; j < table.header.size(); ++j) {
    const std::string& h = table.header[j];
    ColumnBinding& b = bindings[j];
    if (h == "survival_days") { b.role = ColumnBinding::Survival; continue; }
    bool is_core = false;
    for (const char* core : kCoreColumns)
      if (h == core) { is_core = true; break; }
    if (is_core) { b.role = ColumnBinding::Core; b.feature = h; continue; }

    std::string base = h;
    ColumnBinding::Role agg_role = ColumnBinding::Unknown;
    if (auto at = h.rfind('@'); at != std::string::npos) {
      std::string suffix = h.substr(at + 1);
      if (suffix == "min") agg_role = ColumnBinding::DynMin;
      else if (suffix == "max") agg_role = ColumnBinding::DynMax;
      else if (suffix == "mean") agg_role = ColumnBinding::DynMean;
      if (agg_role != ColumnBinding::Unknown) base = h.substr(0, at);
    }
    auto it = by_name.find(base);
    if (it == by_name.end()) {
      b.role = ColumnBinding::Unknown;
      warn(warnings, path + ": unknown column ignored: " + h);
      continue;
    }
    const FeatureSpec& f = *it->second;
    b.feature = base;
    if (agg_role != ColumnBinding::Unknown) {
      if (f.kind != FeatureKind::DynamicNumeric)
        throw std::runtime_error(path + ": column '" + h + "' uses aggregate syntax but '" +
                                 base + "' is not dynamic-numeric");
      b.role = agg_role;
    } else {
      switch (f.kind) {
        case FeatureKind::StaticNumeric: b.role = ColumnBinding::Numeric; break;
        case FeatureKind::BinaryFlag: b.role = ColumnBinding::Flag; break;
        case FeatureKind::StaticCategorical: b.role = ColumnBinding::Category; break;
        case FeatureKind::DynamicNumeric:
          throw std::runtime_error(path + ": dynamic-numeric feature '" + base +
                                   "' must appear as " + base + "@min/@max/@mean columns or in "
                                   "the long-format companion file");
      }
    }
  }

  std::vector<RawEpisode> episodes;
  std::set<std::string> seen_ids;
  size_t id_col = table.column("episode_id");

  for (size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    size_t row_no = r + 1;
    RawEpisode ep;
    ep.episode_id = row[id_col];
    if (ep.episode_id.empty())
      throw std::runtime_error(path + ": row " + std::to_string(row_no) +
                               ", column 'episode_id': empty identifier");
    if (!seen_ids.insert(ep.episode_id).second)
      throw std::runtime_error(path + ": duplicate episode_id: " + ep.episode_id);

    for (size_t j = 0; j < row.size(); ++j) {
      const ColumnBinding& b = bindings[j];
      const std::string& h = table.header[j];
      const std::string& cell = row[j];
      if (b.role != ColumnBinding::Unknown) ep.raw_text[h] = cell;
      switch (b.role) {
        case ColumnBinding::Core:
          if (h == "sex") {
            if (cell == "female") ep.sex = kFemale;
            else if (cell == "male") ep.sex = kMale;
            else
              throw std::runtime_error(path + ": row " + std::to_string(row_no) +
                                       ", column 'sex': expected female or male, got '" + cell +
                                       "'");
          } else if (h == "age") {
            ep.age = require_number(cell, path, row_no, h);
            if (ep.age <= 0.0)
              throw std::runtime_error(path + ": row " + std::to_string(row_no) +
                                       ", column 'age': must be positive");
          } else if (h == "los_days") {
            ep.los_days = require_number(cell, path, row_no, h);
            if (ep.los_days <= 0.0)
              throw std::runtime_error(path + ": row " + std::to_string(row_no) +
                                       ", column 'los_days': must be positive");
          } else if (h == "label") {
            double v = require_number(cell, path, row_no, h);
            if (v != 0.0 && v != 1.0)
              throw std::runtime_error(path + ": row " + std::to_string(row_no) +
                                       ", column 'label': expected 0 or 1, got '" + cell + "'");
            ep.label = static_cast<int>(v);
          }
          break;
        case ColumnBinding::Survival:
          if (auto v = parse_cell_double(cell, path, row_no, h)) ep.survival_days = *v;
          break;
        case ColumnBinding::Numeric:
          if (auto v = parse_cell_double(cell, path, row_no, h))
            ep.numeric_values[b.feature] = *v;
          break;
        case ColumnBinding::Flag:
          if (auto v = parse_cell_double(cell, path, row_no, h)) {
            if (*v != 0.0 && *v != 1.0)
              throw std::runtime_error(path + ": row " + std::to_string(row_no) + ", column '" +
                                       h + "': flag must be 0 or 1, got '" + cell + "'");
            ep.numeric_values[b.feature] = *v;
          }
          break;
        case ColumnBinding::Category:
          if (!cell.empty()) ep.category_values[b.feature] = cell;
          break;
        case ColumnBinding::DynMin:
          if (auto v = parse_cell_double(cell, path, row_no, h))
            ep.dynamic_summaries[b.feature].min = *v;
          break;
        case ColumnBinding::DynMax:
          if (auto v = parse_cell_double(cell, path, row_no, h))
            ep.dynamic_summaries[b.feature].max = *v;
          break;
        case ColumnBinding::DynMean:
          if (auto v = parse_cell_double(cell, path, row_no, h))
            ep.dynamic_summaries[b.feature].mean = *v;
          break;
        case ColumnBinding::Unknown:
          break;
      }
    }
    episodes.push_back(std::move(ep));
  }

  if (!long_path.empty()) {
    CsvTable longt = load_csv(long_path);
    size_t lid = longt.column("episode_id");
    size_t lfe = longt.column("feature");
    size_t lts = longt.column("timestamp");
    size_t lva = longt.column("value");
    std::map<std::string, size_t> ep_index;
    for (size_t i = 0; i < episodes.size(); ++i) ep_index[episodes[i].episode_id] = i;
    for (size_t r = 0; r < longt.rows.size(); ++r) {
      const auto& row = longt.rows[r];
      size_t row_no = r + 1;
      auto it = ep_index.find(row[lid]);
      if (it == ep_index.end())
        throw std::runtime_error(long_path + ": row " + std::to_string(row_no) +
                                 ": unknown episode_id '" + row[lid] + "'");
      const std::string& fname = row[lfe];
      auto ft = by_name.find(fname);
      if (ft == by_name.end()) {
        warn(warnings, long_path + ": unknown feature ignored: " + fname);
        continue;
      }
      if (ft->second->kind != FeatureKind::DynamicNumeric)
        throw std::runtime_error(long_path + ": row " + std::to_string(row_no) + ": feature '" +
                                 fname + "' is not dynamic-numeric");
      RawEpisode& ep = episodes[it->second];
      if (ep.dynamic_summaries.count(fname))
        throw std::runtime_error(long_path + ": feature '" + fname + "' for episode '" +
                                 ep.episode_id + "' appears both pre-aggregated and long-format");
      DynamicPoint pt;
      pt.timestamp = require_number(row[lts], long_path, row_no, "timestamp");
      pt.value = require_number(row[lva], long_path, row_no, "value");
      pt.timestamp_text = row[lts];
      pt.value_text = row[lva];
      ep.dynamic_values[fname].push_back(std::move(pt));
    }
    for (auto& ep : episodes)
      for (auto& [_, seq] : ep.dynamic_values)
        std::stable_sort(seq.begin(), seq.end(),
                         [](const DynamicPoint& a, const DynamicPoint& b) {
                           return a.timestamp < b.timestamp;
                         });
  }

  if (episodes.empty()) warn(warnings, path + ": empty cohort");
  return episodes;
}

void write_episodes(const std::vector<RawEpisode>& episodes, const FeatureSpecList& spec,
                    const std::string& path, const std::string& long_path,
                    const std::string& comment) {
  bool any_survival = false;
  for (const auto& ep : episodes)
    if (ep.survival_days) { any_survival = true; break; }

  bool long_mode = !long_path.empty();

  std::vector<std::string> header = {"episode_id", "sex", "age", "los_days", "label"};
  if (any_survival) header.push_back("survival_days");
  for (const auto& f : spec) {
    switch (f.kind) {
      case FeatureKind::DynamicNumeric:
        if (!long_mode) {
          header.push_back(f.name + "@min");
          header.push_back(f.name + "@max");
          header.push_back(f.name + "@mean");
        }
        break;
      default:
        header.push_back(f.name);
    }
  }

  std::ostringstream out;
  if (!comment.empty()) out << "# " << comment << "\n";
  for (size_t j = 0; j < header.size(); ++j)
    out << (j ? "," : "") << csv_escape(header[j]);
  out << "\n";

  auto cell_for = [](const RawEpisode& ep, const std::string& column,
                     const std::optional<double>& value) -> std::string {
    auto it = ep.raw_text.find(column);
    if (it != ep.raw_text.end()) return it->second;
    if (!value) return "";
    return format_shortest(*value);
  };

  for (const auto& ep : episodes) {
    std::vector<std::string> cells;
    cells.push_back(ep.episode_id);
    cells.push_back(ep.sex == kFemale ? "female" : "male");
    cells.push_back(cell_for(ep, "age", ep.age));
    cells.push_back(cell_for(ep, "los_days", ep.los_days));
    cells.push_back(cell_for(ep, "label", static_cast<double>(ep.label)));
    if (any_survival) cells.push_back(cell_for(ep, "survival_days", ep.survival_days));
    for (const auto& f : spec) {
      switch (f.kind) {
        case FeatureKind::DynamicNumeric: {
          if (long_mode) break;
          DynamicSummary s = ep.dynamic_aggregate(f.name);
          cells.push_back(cell_for(ep, f.name + "@min", s.min));
          cells.push_back(cell_for(ep, f.name + "@max", s.max));
          cells.push_back(cell_for(ep, f.name + "@mean", s.mean));
          break;
        }
        case FeatureKind::StaticCategorical: {
          auto it = ep.category_values.find(f.name);
          cells.push_back(it == ep.category_values.end() ? "" : it->second);
          break;
        }
        default: {
          auto it = ep.numeric_values.find(f.name);
          std::optional<double> v;
          if (it != ep.numeric_values.end()) v = it->second;
          cells.push_back(cell_for(ep, f.name, v));
        }
      }
    }
    for (size_t j = 0; j < cells.size(); ++j)
      out << (j ? "," : "") << csv_escape(cells[j]);
    out << "\n";
  }
  atomic_write_file(path, out.str());

  if (long_mode) {
    std::ostringstream lo;
    if (!comment.empty()) lo << "# " << comment << "\n";
    lo << "episode_id,feature,timestamp,value\n";
    for (const auto& ep : episodes)
      for (const auto& [fname, seq] : ep.dynamic_values)
        for (const auto& pt : seq) {
          std::string ts = pt.timestamp_text.empty() ? format_shortest(pt.timestamp)
                                                     : pt.timestamp_text;
          std::string va = pt.value_text.empty() ? format_shortest(pt.value) : pt.value_text;
          lo << csv_escape(ep.episode_id) << "," << csv_escape(fname) << "," << ts << "," << va
             << "\n";
        }
    atomic_write_file(long_path, lo.str());
  }
}

CohortSummary summarize_cohort(const std::vector<RawEpisode>& episodes,
                               const FeatureSpecList& spec) {
  CohortSummary sum;
  sum.n_total = episodes.size();
  for (const auto& ep : episodes) {
    if (ep.sex == kFemale) {
      ++sum.n_female;
      if (ep.label == 1) ++sum.deaths_female;
    } else {
      ++sum.n_male;
      if (ep.label == 1) ++sum.deaths_male;
    }
    if (ep.label == 1) ++sum.deaths_total;
  }
  if (sum.n_female == 0 || sum.n_male == 0)
    throw std::runtime_error("summarize_cohort requires both sexes present");

  auto continuous_entry = [&](const std::string& name,
                              const std::function<std::optional<double>(const RawEpisode&)>& get) {
    SummaryEntry e;
    e.feature = name;
    e.continuous = true;
    std::vector<double> vf, vm;
    for (const auto& ep : episodes) {
      auto v = get(ep);
      if (!v) continue;
      (ep.sex == kFemale ? vf : vm).push_back(*v);
    }
    e.n_female = vf.size();
    e.n_male = vm.size();
    if (!vf.empty()) e.mean_female = mean(vf);
    if (!vm.empty()) e.mean_male = mean(vm);
    if (vf.size() >= 2) e.sd_female = std::sqrt(sample_variance(vf));
    if (vm.size() >= 2) e.sd_male = std::sqrt(sample_variance(vm));
    bool const_f = vf.size() < 2 || e.sd_female == 0.0;
    bool const_m = vm.size() < 2 || e.sd_male == 0.0;
    if (vf.size() >= 2 && vm.size() >= 2 && !(const_f && const_m))
      e.p_value = welch_t_test(vf, vm).p_value;
    sum.entries.push_back(std::move(e));
  };

  auto categorical_entry = [&](const std::string& name, const std::vector<std::string>& declared,
                               const std::function<std::optional<std::string>(const RawEpisode&)>&
                                   get) {
    SummaryEntry e;
    e.feature = name;
    e.continuous = false;
    std::vector<std::string> levels = declared;
    if (levels.empty()) {
      std::set<std::string> observed;
      for (const auto& ep : episodes)
        if (auto v = get(ep)) observed.insert(*v);
      levels.assign(observed.begin(), observed.end());
    }
    std::map<std::string, std::pair<size_t, size_t>> counts;
    for (const auto& lv : levels) counts[lv] = {0, 0};
    for (const auto& ep : episodes) {
      auto v = get(ep);
      if (!v) continue;
      auto it = counts.find(*v);
      if (it == counts.end()) continue;
      if (ep.sex == kFemale) ++it->second.first;
      else ++it->second.second;
    }
    size_t tot_f = 0, tot_m = 0;
    for (const auto& lv : levels) {
      tot_f += counts[lv].first;
      tot_m += counts[lv].second;
    }
    e.n_female = tot_f;
    e.n_male = tot_m;
    size_t nonzero_levels = 0;
    for (const auto& lv : levels) {
      SummaryLevel sl;
      sl.level = lv;
      sl.count_female = counts[lv].first;
      sl.count_male = counts[lv].second;
      sl.pct_female = tot_f ? 100.0 * static_cast<double>(sl.count_female) / tot_f : 0.0;
      sl.pct_male = tot_m ? 100.0 * static_cast<double>(sl.count_male) / tot_m : 0.0;
      if (sl.count_female + sl.count_male > 0) ++nonzero_levels;
      e.levels.push_back(std::move(sl));
    }
    if (nonzero_levels >= 2 && tot_f > 0 && tot_m > 0) {
      std::vector<std::vector<double>> tab(2);
      for (const auto& lv : levels) {
        if (counts[lv].first + counts[lv].second == 0) continue;
        tab[0].push_back(static_cast<double>(counts[lv].first));
        tab[1].push_back(static_cast<double>(counts[lv].second));
      }
      e.p_value = chi_square_test(tab).p_value;
    }
    sum.entries.push_back(std::move(e));
  };

  continuous_entry("age", [](const RawEpisode& ep) { return std::optional<double>(ep.age); });
  continuous_entry("los_days",
                   [](const RawEpisode& ep) { return std::optional<double>(ep.los_days); });

  for (const auto& f : spec) {
    if (f.name == "age" || f.name == "sex" || f.name == "los_days") continue;
    switch (f.kind) {
      case FeatureKind::StaticNumeric:
        continuous_entry(f.name, [&](const RawEpisode& ep) -> std::optional<double> {
          auto it = ep.numeric_values.find(f.name);
          if (it == ep.numeric_values.end()) return std::nullopt;
          return it->second;
        });
        break;
      case FeatureKind::DynamicNumeric:
        continuous_entry(f.name, [&](const RawEpisode& ep) -> std::optional<double> {
          return ep.dynamic_aggregate(f.name).mean;
        });
        break;
      case FeatureKind::BinaryFlag:
        categorical_entry(f.name, {"0", "1"}, [&](const RawEpisode& ep) ->
                          std::optional<std::string> {
          auto it = ep.numeric_values.find(f.name);
          if (it == ep.numeric_values.end()) return std::nullopt;
          return it->second != 0.0 ? "1" : "0";
        });
        break;
      case FeatureKind::StaticCategorical:
        categorical_entry(f.name, f.levels, [&](const RawEpisode& ep) ->
                          std::optional<std::string> {
          auto it = ep.category_values.find(f.name);
          if (it == ep.category_values.end()) return std::nullopt;
          return it->second;
        });
        break;
    }
  }
  return sum;
}

std::string cohort_summary_to_csv(const CohortSummary& summary, const std::string& comment) {
  std::ostringstream out;
  if (!comment.empty()) out << "# " << comment << "\n";
  out << "feature,level,n_female,n_male,stat_female,stat_male,p_value\n";
  out << "episodes,," << summary.n_female << "," << summary.n_male << ",,,\n";
  out << "deaths,," << summary.deaths_female << "," << summary.deaths_male << ",,,\n";
  for (const auto& e : summary.entries) {
    std::string p = e.p_value ? format_shortest(*e.p_value) : "n/a";
    if (e.continuous) {
      out << csv_escape(e.feature) << ",," << e.n_female << "," << e.n_male << ","
          << format_fixed(e.mean_female, 4) << " (" << format_fixed(e.sd_female, 4) << "),"
          << format_fixed(e.mean_male, 4) << " (" << format_fixed(e.sd_male, 4) << "),"
          << p << "\n";
    } else {
      bool first = true;
      for (const auto& lv : e.levels) {
        out << csv_escape(e.feature) << "," << csv_escape(lv.level) << "," << lv.count_female
            << "," << lv.count_male << "," << format_fixed(lv.pct_female, 2) << "%,"
            << format_fixed(lv.pct_male, 2) << "%," << (first ? p : std::string{}) << "\n";
        first = false;
      }
    }
  }
  return out.str();
}

const std::vector<double> kDefaultAgeBinEdges = {50.0, 60.0, 70.0, 80.0};

std::string age_bin_label(double age, const std::vector<double>& edges) {
  if (edges.empty()) return "all";
  if (age < edges.front())
    return "<" + format_shortest(edges.front());
  for (size_t i = 0; i + 1 < edges.size(); ++i)
    if (age < edges[i + 1])
      return format_shortest(edges[i]) + "-" + format_shortest(edges[i + 1] - 1);
  return ">=" + format_shortest(edges.back());
}

}  // namespace riskbench
