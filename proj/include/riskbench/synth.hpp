#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "riskbench/cohort.hpp"

namespace riskbench {

// One term of the planted risk function. Values enter in standardized units
// (z = (x - marginal mean) / marginal sd), so weights are comparable across
// features and recoverable by a refit on the standardized matrix.
struct PlantedTerm {
  std::string feature;
  int direction = 1;                 // +1 raises risk with the feature, -1 lowers it
  double weight = 0.0;
  std::string transform = "linear";  // "linear" or "threshold"
  double threshold = 0.0;            // for "threshold": indicator(z >= threshold)
  std::string interact_with;         // optional partner feature
  double interact_threshold = 0.0;   // term active only when partner z >= this
  std::optional<int> subgroup_sex;
  double subgroup_age_min = -std::numeric_limits<double>::infinity();
  double subgroup_age_max = std::numeric_limits<double>::infinity();
};

struct FeatureGen {
  FeatureSpec spec;
  double mean = 0.0, sd = 1.0;       // numeric marginals
  double prevalence = 0.0;           // binary-flag marginal
  std::vector<double> level_probs;   // categorical marginal
  double missing_rate = 0.0;
  int points = 3;                    // samples per dynamic sequence
  double within_sd = 0.1;            // within-episode spread, in sd units
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
};

struct GeneratorConfig {
  size_t n = 0;
  double base_rate = 0.1;
  double female_fraction = 0.5;
  double age_mean = 65.0, age_sd = 12.0, age_min = 18.0, age_max = 100.0;
  double los_mean = 7.0, los_sd = 4.0, los_min = 0.25;
  bool survival_enabled = false;
  double followup_days = 365.0;
  std::vector<FeatureGen> features;
  std::vector<PlantedTerm> terms;
};

GeneratorConfig parse_generator_config(const std::string& json_text, const std::string& origin);
GeneratorConfig load_generator_config(const std::string& path);

// Feature declarations implied by the generator, for downstream loading.
FeatureSpecList spec_from_generator(const GeneratorConfig& config);

// Draws episodes independently; the label is Bernoulli from the planted
// logistic model logit(base_rate) + sum(terms). Deterministic per seed.
std::vector<RawEpisode> synth_cohort(const GeneratorConfig& config, uint64_t seed);

// Ground-truth sidecar content listing the planted terms.
std::string truth_json(const GeneratorConfig& config, uint64_t seed);

}  // namespace riskbench
