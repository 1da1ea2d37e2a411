#include "riskbench/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "riskbench/rng.hpp"
#include "riskbench/stats.hpp"

namespace riskbench {

using nlohmann::json;

namespace {

double get_num(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<double>();
}

// A typo'd key would otherwise be ignored and quietly change the cohort.
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

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

GeneratorConfig parse_generator_config(const std::string& json_text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const std::exception& e) {
    throw std::runtime_error(origin + ": invalid JSON: " + e.what());
  }
  GeneratorConfig cfg;
  require_keys(doc, {"n", "base_rate", "female_fraction", "age", "los", "survival",
                     "features", "terms"}, origin, "generator config");
  cfg.n = doc.at("n").get<size_t>();
  cfg.base_rate = doc.at("base_rate").get<double>();
  if (!(cfg.base_rate > 0.0 && cfg.base_rate < 1.0))
    throw std::runtime_error(origin + ": base_rate must lie in (0,1)");
  cfg.female_fraction = get_num(doc, "female_fraction", 0.5);

  if (doc.contains("age")) {
    const auto& a = doc["age"];
    require_keys(a, {"mean", "sd", "min", "max"}, origin, "age");
    cfg.age_mean = get_num(a, "mean", cfg.age_mean);
    cfg.age_sd = get_num(a, "sd", cfg.age_sd);
    cfg.age_min = get_num(a, "min", cfg.age_min);
    cfg.age_max = get_num(a, "max", cfg.age_max);
  }
  if (doc.contains("los")) {
    const auto& a = doc["los"];
    require_keys(a, {"mean", "sd", "min"}, origin, "los");
    cfg.los_mean = get_num(a, "mean", cfg.los_mean);
    cfg.los_sd = get_num(a, "sd", cfg.los_sd);
    cfg.los_min = get_num(a, "min", cfg.los_min);
  }
  if (doc.contains("survival")) {
    const auto& s = doc["survival"];
    require_keys(s, {"enabled", "followup_days"}, origin, "survival");
    cfg.survival_enabled = s.value("enabled", false);
    cfg.followup_days = get_num(s, "followup_days", cfg.followup_days);
  }

  if (doc.contains("features")) {
    for (const auto& jf : doc["features"]) {
      FeatureGen g;
      require_keys(jf, {"name", "kind", "clinical_set", "unit", "mean", "sd", "prevalence",
                        "missing_rate", "points", "within_sd", "min", "max", "levels", "probs"},
                   origin, "feature");
      g.spec.name = jf.at("name").get<std::string>();
      g.spec.kind = parse_feature_kind(jf.at("kind").get<std::string>());
      g.spec.clinical_set = parse_clinical_set(jf.value("clinical_set", std::string("laboratory")));
      g.spec.unit = jf.value("unit", std::string{});
      g.mean = get_num(jf, "mean", 0.0);
      g.sd = get_num(jf, "sd", 1.0);
      g.prevalence = get_num(jf, "prevalence", 0.0);
      g.missing_rate = get_num(jf, "missing_rate", 0.0);
      g.points = static_cast<int>(get_num(jf, "points", 3));
      g.within_sd = get_num(jf, "within_sd", 0.1);
      g.min = get_num(jf, "min", g.min);
      g.max = get_num(jf, "max", g.max);
      if (jf.contains("levels"))
        for (const auto& lv : jf["levels"]) g.spec.levels.push_back(lv.get<std::string>());
      if (jf.contains("probs"))
        for (const auto& p : jf["probs"]) g.level_probs.push_back(p.get<double>());
      if (g.spec.kind == FeatureKind::StaticCategorical) {
        if (g.spec.levels.empty())
          throw std::runtime_error(origin + ": categorical feature '" + g.spec.name +
                                   "' needs levels");
        if (g.level_probs.empty())
          g.level_probs.assign(g.spec.levels.size(), 1.0 / g.spec.levels.size());
        if (g.level_probs.size() != g.spec.levels.size())
          throw std::runtime_error(origin + ": feature '" + g.spec.name +
                                   "': probs and levels differ in length");
        double s = 0.0;
        for (double p : g.level_probs) s += p;
        if (std::fabs(s - 1.0) > 1e-6)
          throw std::runtime_error(origin + ": feature '" + g.spec.name +
                                   "': level probabilities must sum to 1");
      }
      if (g.spec.kind == FeatureKind::BinaryFlag &&
          !(g.prevalence >= 0.0 && g.prevalence <= 1.0))
        throw std::runtime_error(origin + ": feature '" + g.spec.name +
                                 "': prevalence outside [0,1]");
      if (g.spec.kind == FeatureKind::DynamicNumeric && g.points < 1)
        throw std::runtime_error(origin + ": feature '" + g.spec.name + "': points must be >= 1");
      for (const char* reserved : {"episode_id", "sex", "age", "los", "los_days", "label",
                                   "survival_days", "outcome"})
        if (g.spec.name == reserved)
          throw std::runtime_error(origin + ": feature name '" + g.spec.name + "' is reserved");
      cfg.features.push_back(std::move(g));
    }
  }

  std::map<std::string, const FeatureGen*> declared;
  for (const auto& g : cfg.features) declared[g.spec.name] = &g;

  auto check_term_feature = [&](const std::string& name, const std::string& where,
                                bool needs_normal) {
    if (name == "age") return;
    auto it = declared.find(name);
    if (it == declared.end())
      throw std::runtime_error(origin + ": planted weight on undeclared feature: " + name +
                               " (" + where + ")");
    if (it->second->spec.kind == FeatureKind::StaticCategorical)
      throw std::runtime_error(origin + ": planted terms require numeric or flag features, got "
                               "categorical: " + name);
    // Threshold centering assumes a normal latent, which a flag is not.
    if (needs_normal && it->second->spec.kind == FeatureKind::BinaryFlag)
      throw std::runtime_error(origin + ": threshold semantics need a numeric feature, got "
                               "binary-flag: " + name);
  };

  if (doc.contains("terms")) {
    for (const auto& jt : doc["terms"]) {
      PlantedTerm t;
      require_keys(jt, {"feature", "weight", "direction", "transform", "threshold",
                        "interact_with", "interact_threshold", "subgroup"}, origin, "term");
      t.feature = jt.at("feature").get<std::string>();
      t.weight = jt.at("weight").get<double>();
      t.direction = static_cast<int>(get_num(jt, "direction", 1));
      if (t.direction != 1 && t.direction != -1)
        throw std::runtime_error(origin + ": term direction must be +1 or -1");
      t.transform = jt.value("transform", std::string("linear"));
      if (t.transform != "linear" && t.transform != "threshold")
        throw std::runtime_error(origin + ": unknown transform: " + t.transform);
      t.threshold = get_num(jt, "threshold", 0.0);
      t.interact_with = jt.value("interact_with", std::string{});
      t.interact_threshold = get_num(jt, "interact_threshold", 0.0);
      if (jt.contains("subgroup")) {
        const auto& sg = jt["subgroup"];
        require_keys(sg, {"sex", "age_min", "age_max"}, origin, "subgroup");
        if (sg.contains("sex")) {
          std::string s = sg["sex"].get<std::string>();
          if (s == "female") t.subgroup_sex = kFemale;
          else if (s == "male") t.subgroup_sex = kMale;
          else throw std::runtime_error(origin + ": subgroup sex must be female or male");
        }
        t.subgroup_age_min = get_num(sg, "age_min", t.subgroup_age_min);
        t.subgroup_age_max = get_num(sg, "age_max", t.subgroup_age_max);
      }
      check_term_feature(t.feature, "term", t.transform == "threshold");
      if (!t.interact_with.empty())
        check_term_feature(t.interact_with, "interaction partner", true);
      cfg.terms.push_back(std::move(t));
    }
  }
  return cfg;
}

GeneratorConfig load_generator_config(const std::string& path) {
  return parse_generator_config(read_file(path), path);
}

FeatureSpecList spec_from_generator(const GeneratorConfig& config) {
  FeatureSpecList out;
  for (const auto& g : config.features) out.push_back(g.spec);
  return out;
}

namespace {

struct EpisodeDraw {
  RawEpisode episode;
  std::map<std::string, double> latent_z;  // standardized latent per numeric feature
};

EpisodeDraw draw_episode(const GeneratorConfig& cfg, const Rng& base, size_t index) {
  EpisodeDraw d;
  RawEpisode& ep = d.episode;
  Rng ep_rng = base.derive(index);

  char idbuf[32];
  std::snprintf(idbuf, sizeof(idbuf), "ep%06zu", index + 1);
  ep.episode_id = idbuf;

  ep.sex = ep_rng.derive("sex").next_bernoulli(cfg.female_fraction) ? kFemale : kMale;
  {
    double z = ep_rng.derive("age").next_normal();
    ep.age = std::clamp(cfg.age_mean + cfg.age_sd * z, cfg.age_min, cfg.age_max);
    d.latent_z["age"] = (ep.age - cfg.age_mean) / cfg.age_sd;
  }
  {
    double z = ep_rng.derive("los").next_normal();
    ep.los_days = std::max(cfg.los_mean + cfg.los_sd * z, cfg.los_min);
  }

  for (const auto& g : cfg.features) {
    Rng frng = ep_rng.derive(g.spec.name);
    bool missing = g.missing_rate > 0.0 && frng.next_bernoulli(g.missing_rate);
    switch (g.spec.kind) {
      case FeatureKind::StaticNumeric: {
        double z = frng.next_normal();
        d.latent_z[g.spec.name] = z;
        if (missing) break;
        ep.numeric_values[g.spec.name] =
            std::clamp(g.mean + g.sd * z, g.min, g.max);
        break;
      }
      case FeatureKind::BinaryFlag: {
        double p = g.prevalence;
        bool on = frng.next_bernoulli(p);
        double denom = std::sqrt(std::max(p * (1.0 - p), 1e-12));
        d.latent_z[g.spec.name] = ((on ? 1.0 : 0.0) - p) / denom;
        if (missing) break;
        ep.numeric_values[g.spec.name] = on ? 1.0 : 0.0;
        break;
      }
      case FeatureKind::StaticCategorical: {
        double u = frng.next_double();
        size_t pick = g.spec.levels.size() - 1;
        double acc = 0.0;
        for (size_t k = 0; k < g.level_probs.size(); ++k) {
          acc += g.level_probs[k];
          if (u < acc) { pick = k; break; }
        }
        if (missing) break;
        ep.category_values[g.spec.name] = g.spec.levels[pick];
        break;
      }
      case FeatureKind::DynamicNumeric: {
        double z = frng.next_normal();
        d.latent_z[g.spec.name] = z;
        if (missing) break;
        auto& seq = ep.dynamic_values[g.spec.name];
        for (int k = 0; k < g.points; ++k) {
          DynamicPoint pt;
          pt.timestamp = static_cast<double>(k);
          double zz = z + g.within_sd * frng.next_normal();
          pt.value = std::clamp(g.mean + g.sd * zz, g.min, g.max);
          seq.push_back(pt);
        }
        break;
      }
    }
  }
  return d;
}

double term_value(const PlantedTerm& t, const EpisodeDraw& d) {
  const RawEpisode& ep = d.episode;
  if (t.subgroup_sex && ep.sex != *t.subgroup_sex) return 0.0;
  if (ep.age < t.subgroup_age_min || ep.age > t.subgroup_age_max) return 0.0;

  auto z_of = [&](const std::string& name) {
    auto it = d.latent_z.find(name);
    if (it == d.latent_z.end())
      throw std::logic_error("no latent value for feature: " + name);
    return it->second;
  };

  double z = z_of(t.feature);
  double g, eg;
  if (t.transform == "threshold") {
    g = z >= t.threshold ? 1.0 : 0.0;
    eg = normal_sf(t.threshold);
  } else {
    g = z;
    eg = 0.0;
  }

  if (t.interact_with.empty())
    return t.weight * t.direction * (g - eg);

  double zp = z_of(t.interact_with);
  double h = zp >= t.interact_threshold ? 1.0 : 0.0;
  double eh = normal_sf(t.interact_threshold);
  return t.weight * t.direction * (g * h - eg * eh);
}

}  // namespace

std::vector<RawEpisode> synth_cohort(const GeneratorConfig& cfg, uint64_t seed) {
  Rng base(seed, "synth");
  std::vector<RawEpisode> out;
  out.reserve(cfg.n);
  double base_logit = logit(cfg.base_rate);
  for (size_t i = 0; i < cfg.n; ++i) {
    EpisodeDraw d = draw_episode(cfg, base, i);
    double score = base_logit;
    for (const auto& t : cfg.terms) score += term_value(t, d);
    double p = sigmoid(score);
    Rng orng = base.derive(i).derive("outcome");
    d.episode.label = orng.next_bernoulli(p) ? 1 : 0;
    if (cfg.survival_enabled) {
      // Deaths land early in follow-up (density rising toward admission),
      // survivors are administratively censored at the horizon.
      if (d.episode.label == 1) {
        double u = orng.next_double();
        d.episode.survival_days = cfg.followup_days * u * u;
      } else {
        d.episode.survival_days = cfg.followup_days;
      }
    }
    out.push_back(std::move(d.episode));
  }
  return out;
}

std::string truth_json(const GeneratorConfig& cfg, uint64_t seed) {
  json doc;
  doc["seed"] = seed;
  doc["n"] = cfg.n;
  doc["base_rate"] = cfg.base_rate;
  doc["outcome_model"] = "logistic";
  doc["terms"] = json::array();
  for (const auto& t : cfg.terms) {
    json jt;
    jt["feature"] = t.feature;
    jt["direction"] = t.direction;
    jt["weight"] = t.weight;
    jt["transform"] = t.transform;
    if (t.transform == "threshold") jt["threshold"] = t.threshold;
    if (!t.interact_with.empty()) {
      jt["interact_with"] = t.interact_with;
      jt["interact_threshold"] = t.interact_threshold;
    }
    json sg;
    if (t.subgroup_sex) sg["sex"] = *t.subgroup_sex == kFemale ? "female" : "male";
    if (std::isfinite(t.subgroup_age_min)) sg["age_min"] = t.subgroup_age_min;
    if (std::isfinite(t.subgroup_age_max)) sg["age_max"] = t.subgroup_age_max;
    if (!sg.empty()) jt["subgroup"] = sg;
    doc["terms"].push_back(std::move(jt));
  }
  return doc.dump(2) + "\n";
}

}  // namespace riskbench
