#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "riskbench/common.hpp"

namespace riskbench {

enum class FeatureKind { StaticCategorical, StaticNumeric, DynamicNumeric, BinaryFlag };
enum class ClinicalSet {
  Demographic, Complications, Treatments, Procedures,
  BloodGas, Laboratory, Hemodynamic, VitalSigns
};

FeatureKind parse_feature_kind(const std::string& s);
std::string feature_kind_name(FeatureKind k);
ClinicalSet parse_clinical_set(const std::string& s);
std::string clinical_set_name(ClinicalSet s);

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::StaticNumeric;
  ClinicalSet clinical_set = ClinicalSet::Laboratory;
  std::string unit;
  // Category levels; only meaningful for static-categorical. May be empty, in
  // which case levels are inferred from the observed data in sorted order.
  std::vector<std::string> levels;
};

using FeatureSpecList = std::vector<FeatureSpec>;

FeatureSpecList parse_feature_specs(const std::string& json_text, const std::string& origin);
FeatureSpecList load_feature_specs(const std::string& path);
std::string feature_specs_to_json(const FeatureSpecList& spec);

constexpr int kFemale = 0;
constexpr int kMale = 1;

struct DynamicPoint {
  double timestamp = 0.0;
  double value = 0.0;
  // Original cell text, kept so writing a loaded cohort reproduces it.
  std::string timestamp_text;
  std::string value_text;
};

struct DynamicSummary {
  std::optional<double> min, max, mean;
};

struct RawEpisode {
  std::string episode_id;
  int sex = kFemale;
  double age = 0.0;
  double los_days = 0.0;
  int label = 0;
  std::optional<double> survival_days;
  std::map<std::string, double> numeric_values;               // static-numeric and binary-flag
  std::map<std::string, std::string> category_values;         // static-categorical
  std::map<std::string, std::vector<DynamicPoint>> dynamic_values;
  std::map<std::string, DynamicSummary> dynamic_summaries;    // pre-aggregated input
  std::map<std::string, std::string> raw_text;                // main-file column -> cell text

  // Aggregate of a dynamic feature, from the stored points or the
  // pre-aggregated summary, whichever the episode carries.
  DynamicSummary dynamic_aggregate(const std::string& feature) const;
};

// Reads the episode CSV (and optional long-format companion holding
// per-timestamp values). Unknown columns produce warnings, not errors.
std::vector<RawEpisode> load_episodes(const std::string& path, const FeatureSpecList& spec,
                                      WarningSink* warnings = nullptr,
                                      const std::string& long_path = "");

// Writes the main CSV; dynamic features go out as pre-aggregated
// name@min/name@max/name@mean columns unless long_path is given, in which
// case raw sequences go to the companion file and the main file omits them.
// Cells loaded from a file keep their original text.
void write_episodes(const std::vector<RawEpisode>& episodes, const FeatureSpecList& spec,
                    const std::string& path, const std::string& long_path = "",
                    const std::string& comment = "");

struct SummaryLevel {
  std::string level;
  size_t count_female = 0, count_male = 0;
  double pct_female = 0.0, pct_male = 0.0;
};

struct SummaryEntry {
  std::string feature;
  bool continuous = true;
  size_t n_female = 0, n_male = 0;               // observed counts
  double mean_female = 0, sd_female = 0, mean_male = 0, sd_male = 0;
  std::vector<SummaryLevel> levels;
  std::optional<double> p_value;                 // absent where the test is undefined
};

struct CohortSummary {
  size_t n_total = 0, n_female = 0, n_male = 0;
  size_t deaths_total = 0, deaths_female = 0, deaths_male = 0;
  std::vector<SummaryEntry> entries;
};

// Sex-split descriptive table: Welch t-test per continuous feature,
// chi-square per categorical one. Requires both sexes present.
CohortSummary summarize_cohort(const std::vector<RawEpisode>& episodes,
                               const FeatureSpecList& spec);

std::string cohort_summary_to_csv(const CohortSummary& summary, const std::string& comment = "");

// Default decade bins for subgroup reporting; edges are lower bounds of the
// non-open bins, producing [<e0, e0..e1-1, ..., >=elast].
extern const std::vector<double> kDefaultAgeBinEdges;
std::string age_bin_label(double age, const std::vector<double>& edges = kDefaultAgeBinEdges);

}  // namespace riskbench
