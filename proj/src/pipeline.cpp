#include "riskbench/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "riskbench/cohort.hpp"
#include "riskbench/common.hpp"
#include "riskbench/compare.hpp"
#include "riskbench/cox.hpp"
#include "riskbench/cv.hpp"
#include "riskbench/grace.hpp"
#include "riskbench/matrix.hpp"
#include "riskbench/model.hpp"
#include "riskbench/roc.hpp"
#include "riskbench/shap.hpp"
#include "riskbench/svg.hpp"
#include "riskbench/synth.hpp"

namespace riskbench {

using nlohmann::json;

const char kToolName[] = "riskbench";
const char kToolVersion[] = "0.1.0";

namespace {

namespace fs = std::filesystem;

void require_keys(const json& obj, const std::set<std::string>& allowed,
                  const std::string& origin, const std::string& context) {
  for (const auto& item : obj.items())
    if (!allowed.count(item.key()))
      throw std::invalid_argument(origin + ": unknown key '" + item.key() + "' in " + context);
}

std::string joined(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string pick(const std::string& override_path, const std::string& dir,
                 const std::string& name) {
  return override_path.empty() ? joined(dir, name) : override_path;
}

uint64_t fnv1a(const std::string& text) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json meta_object(const RunConfig& config) {
  return json{{"tool", std::string(kToolName) + " " + kToolVersion},
              {"config", run_config_hash(config)},
              {"seed", config.seed}};
}

void write_json(const std::string& path, json doc) {
  atomic_write_file(path, doc.dump(2) + "\n");
}

void ensure_out(const RunConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out, ec);
  if (ec)
    throw std::invalid_argument("output directory '" + config.out +
                                "' cannot be created: " + ec.message());
}

void need_file(const std::string& path, const std::string& what, const std::string& hint) {
  if (!fs::exists(path))
    throw std::invalid_argument(what + " '" + path + "' not found; " + hint);
}

FeatureSpecList resolve_spec(const RunConfig& config) {
  if (!config.spec.empty()) {
    need_file(config.spec, "feature spec", "check the --spec path");
    return load_feature_specs(config.spec);
  }
  need_file(config.spec_path(), "feature spec", "run synth first or pass --spec");
  return load_feature_specs(config.spec_path());
}

// The episode file carries age and sex as intrinsic columns, so the file
// spec must not declare them; the model matrix wants them as features. This
// prepends the two demographic entries unless the spec already has them.
FeatureSpecList with_demographics(const FeatureSpecList& spec) {
  for (const auto& f : spec)
    if (f.name == "age" || f.name == "sex") return spec;
  FeatureSpec age;
  age.name = "age";
  age.kind = FeatureKind::StaticNumeric;
  age.clinical_set = ClinicalSet::Demographic;
  age.unit = "years";
  FeatureSpec sex;
  sex.name = "sex";
  sex.kind = FeatureKind::StaticCategorical;
  sex.clinical_set = ClinicalSet::Demographic;
  sex.levels = {"female", "male"};
  FeatureSpecList out{age, sex};
  out.insert(out.end(), spec.begin(), spec.end());
  return out;
}

struct CohortBundle {
  FeatureSpecList spec;
  std::vector<RawEpisode> episodes;
  FeatureMatrix matrix;
  SplitIndex split;
  WarningSink warnings;
};

CohortBundle load_bundle(const RunConfig& config) {
  CohortBundle b;
  b.spec = resolve_spec(config);
  need_file(config.cohort_path(), "cohort file", "run synth first or pass --cohort");
  b.episodes = load_episodes(config.cohort_path(), b.spec, &b.warnings,
                             config.cohort_long.empty() ? std::string{} : config.long_path());
  int threads = resolve_threads(config.threads);
  FeatureSpecList matrix_spec = with_demographics(b.spec);
  b.matrix = build_matrix(b.episodes, matrix_spec, {nullptr, threads}, &b.warnings);
  b.split = split_holdout(b.matrix, config.holdout, config.seed);
  if (config.strict_impute) {
    MatrixOptions strict{&b.split.train_rows, threads};
    b.matrix = build_matrix(b.episodes, matrix_spec, strict, &b.warnings);
    b.split = split_holdout(b.matrix, config.holdout, config.seed);
  }
  return b;
}

TrainedModel load_model_artifact(const RunConfig& config) {
  need_file(config.model_path(), "model artifact", "run train first");
  return load_model(config.model_path());
}

json config_echo(const ModelConfig& config) {
  return json::parse(model_config_to_json(config));
}

json eval_report_json(const EvalReport& report) {
  json j;
  j["auc"] = report.auc;
  j["ci_lower"] = report.ci_lower;
  j["ci_upper"] = report.ci_upper;
  j["ci_method"] = report.ci_method;
  j["threshold_rule"] = report.threshold_rule;
  j["operating_point"] = {{"sensitivity", report.operating_point.sensitivity},
                          {"specificity", report.operating_point.specificity},
                          {"threshold", report.operating_point.threshold}};
  j["fold_aucs"] = report.fold_aucs;
  if (report.delong) {
    j["delong"] = {{"auc_a", report.delong->auc_a},
                   {"auc_b", report.delong->auc_b},
                   {"z", report.delong->z},
                   {"p_value", report.delong->p_value}};
  } else {
    j["delong"] = nullptr;
  }
  if (report.mcnemar) {
    j["mcnemar"] = {{"b", report.mcnemar->b},
                    {"c", report.mcnemar->c},
                    {"statistic", report.mcnemar->statistic},
                    {"p_value", report.mcnemar->p_value},
                    {"method", report.mcnemar->method}};
  } else {
    j["mcnemar"] = nullptr;
  }
  return j;
}

json group_importance_json(const GroupImportance& gi) {
  json ranking = json::array();
  for (const auto& e : gi.ranking)
    ranking.push_back({{"name", e.name}, {"column", e.column}, {"mean_abs_shap", e.importance}});
  return json{{"group", gi.group}, {"n_rows", gi.n_rows}, {"ranking", std::move(ranking)}};
}

Grid resolve_grid(const RunConfig& config) {
  const std::string& g = config.grid;
  if (g.rfind("paper-", 0) == 0) {
    try {
      return paper_grid(parse_learner(g.substr(6)));
    } catch (const std::exception&) {
      throw std::invalid_argument("unknown grid '" + g +
                                  "' (expected paper-lr, paper-svm, paper-rf, paper-gbt, or a "
                                  "grid file)");
    }
  }
  need_file(g, "grid file", "check the --grid path");
  json doc;
  try {
    doc = json::parse(read_file(g));
  } catch (const std::exception& e) {
    throw std::invalid_argument(g + ": invalid JSON: " + std::string(e.what()));
  }
  require_keys(doc, {"learner", "axes"}, g, "the grid file");
  Grid grid;
  try {
    grid.learner = parse_learner(doc.at("learner").get<std::string>());
  } catch (const std::exception& e) {
    throw std::invalid_argument(g + ": " + e.what());
  }
  if (!doc.contains("axes") || !doc["axes"].is_array())
    throw std::invalid_argument(g + ": expected an 'axes' array");
  for (const auto& a : doc["axes"]) {
    require_keys(a, {"name", "values"}, g, "a grid axis");
    GridAxis axis;
    axis.name = a.at("name").get<std::string>();
    for (const auto& v : a.at("values"))
      axis.values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    grid.axes.push_back(std::move(axis));
  }
  return grid;
}

std::vector<double> parse_age_bins(const json& arr, const std::string& origin) {
  std::vector<double> edges;
  for (const auto& v : arr) {
    if (!v.is_number()) throw std::invalid_argument(origin + ": age_bins must be numbers");
    edges.push_back(v.get<double>());
  }
  return edges;
}

}  // namespace

std::string RunConfig::cohort_path() const { return pick(cohort, out, "cohort.csv"); }
std::string RunConfig::long_path() const { return pick(cohort_long, out, "cohort_long.csv"); }
std::string RunConfig::spec_path() const { return pick(spec, out, "featurespec.json"); }
std::string RunConfig::truth_path() const { return joined(out, "cohort_truth.json"); }
std::string RunConfig::summary_csv_path() const { return joined(out, "cohort_summary.csv"); }
std::string RunConfig::model_path() const { return pick(model, out, "model.json"); }
std::string RunConfig::training_log_path() const { return joined(out, "training_log.json"); }
std::string RunConfig::tune_report_path() const { return joined(out, "tune_report.json"); }
std::string RunConfig::eval_report_path() const { return joined(out, "eval_report.json"); }
std::string RunConfig::roc_csv_path() const { return joined(out, "roc.csv"); }
std::string RunConfig::roc_svg_path() const { return joined(out, "roc.svg"); }
std::string RunConfig::attributions_path() const { return joined(out, "attributions.csv"); }
std::string RunConfig::summary_json_path() const { return joined(out, "summary.json"); }
std::string RunConfig::summary_svg_path() const { return joined(out, "summary.svg"); }
std::string RunConfig::dependence_json_path() const { return joined(out, "dependence.json"); }
std::string RunConfig::dependence_svg_path() const { return joined(out, "dependence.svg"); }
std::string RunConfig::force_json_path() const { return joined(out, "force.json"); }
std::string RunConfig::force_svg_path() const { return joined(out, "force.svg"); }
std::string RunConfig::subgroups_path() const { return joined(out, "subgroups.json"); }
std::string RunConfig::comparison_md_path() const { return joined(out, "comparison.md"); }
std::string RunConfig::comparison_csv_path() const { return joined(out, "comparison.csv"); }

RunConfig parse_run_config(const std::string& json_text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(origin + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument(origin + ": expected a config object");
  require_keys(doc,
               {"generator", "cohort", "cohort_long", "spec", "out", "model", "model_config",
                "grid", "grace_table", "seed", "threads", "holdout", "cv_folds", "cv_repeats",
                "background", "n_boot", "top_markers", "age_bins", "strict_impute",
                "enumerate_only"},
               origin, "the run config");
  RunConfig c;
  c.generator = doc.value("generator", c.generator);
  c.cohort = doc.value("cohort", c.cohort);
  c.cohort_long = doc.value("cohort_long", c.cohort_long);
  c.spec = doc.value("spec", c.spec);
  c.out = doc.value("out", c.out);
  c.model = doc.value("model", c.model);
  c.model_config = doc.value("model_config", c.model_config);
  c.grid = doc.value("grid", c.grid);
  c.grace_table = doc.value("grace_table", c.grace_table);
  c.seed = doc.value("seed", c.seed);
  c.threads = doc.value("threads", c.threads);
  c.holdout = doc.value("holdout", c.holdout);
  c.cv_folds = doc.value("cv_folds", c.cv_folds);
  c.cv_repeats = doc.value("cv_repeats", c.cv_repeats);
  c.background = doc.value("background", c.background);
  c.n_boot = doc.value("n_boot", c.n_boot);
  c.top_markers = doc.value("top_markers", c.top_markers);
  if (doc.contains("age_bins")) c.age_bins = parse_age_bins(doc["age_bins"], origin);
  c.strict_impute = doc.value("strict_impute", c.strict_impute);
  c.enumerate_only = doc.value("enumerate_only", c.enumerate_only);
  if (!(c.holdout >= 0.0 && c.holdout < 1.0))
    throw std::invalid_argument(origin + ": holdout must be in [0, 1)");
  if (c.cv_folds < 2) throw std::invalid_argument(origin + ": cv_folds must be at least 2");
  if (c.cv_repeats < 1) throw std::invalid_argument(origin + ": cv_repeats must be at least 1");
  if (c.background == 0) throw std::invalid_argument(origin + ": background must be positive");
  if (c.top_markers == 0) throw std::invalid_argument(origin + ": top_markers must be positive");
  return c;
}

RunConfig load_run_config(const std::string& path) {
  need_file(path, "config file", "check the --config path");
  return parse_run_config(read_file(path), path);
}

std::string run_config_canonical(const RunConfig& c) {
  // Only knobs that change what gets computed. File locations, thread count,
  // and log format stay out so the same run stamps the same bytes wherever
  // and however it is executed.
  json doc{{"grid", c.grid},
           {"seed", c.seed},
           {"holdout", c.holdout},
           {"cv_folds", c.cv_folds},
           {"cv_repeats", c.cv_repeats},
           {"background", c.background},
           {"n_boot", c.n_boot},
           {"top_markers", c.top_markers},
           {"age_bins", c.age_bins},
           {"strict_impute", c.strict_impute},
           {"enumerate_only", c.enumerate_only}};
  return doc.dump();
}

std::string run_config_hash(const RunConfig& config) {
  return hex64(fnv1a(run_config_canonical(config)));
}

std::string artifact_stamp(const RunConfig& config) {
  return std::string(kToolName) + " " + kToolVersion + " config=" + run_config_hash(config) +
         " seed=" + std::to_string(config.seed);
}

void Logger::info(const std::string& stage, const std::string& message) const {
  if (!out) return;
  if (json) {
    nlohmann::json line{{"stage", stage}, {"message", message}};
    *out << line.dump() << "\n";
  } else {
    *out << stage << ": " << message << "\n";
  }
}

void cmd_synth(const RunConfig& config, const Logger& log) {
  if (config.generator.empty())
    throw std::invalid_argument("synth needs a generator file (--generator or config)");
  need_file(config.generator, "generator file", "check the --generator path");
  ensure_out(config);

  GeneratorConfig gen = load_generator_config(config.generator);
  FeatureSpecList spec = spec_from_generator(gen);
  std::vector<RawEpisode> episodes = synth_cohort(gen, config.seed);

  std::string stamp = artifact_stamp(config);
  write_episodes(episodes, spec, config.cohort_path(),
                 config.cohort_long.empty() ? std::string{} : config.long_path(), stamp);
  log.info("synth", "wrote " + config.cohort_path() + " (" + std::to_string(episodes.size()) +
                        " episodes)");

  json spec_doc = json::parse(feature_specs_to_json(spec));
  spec_doc["meta"] = meta_object(config);
  write_json(config.spec_path(), spec_doc);
  log.info("synth", "wrote " + config.spec_path());

  json truth = json::parse(truth_json(gen, config.seed));
  truth["meta"] = meta_object(config);
  write_json(config.truth_path(), truth);
  log.info("synth", "wrote " + config.truth_path());
}

void cmd_summarize(const RunConfig& config, const Logger& log) {
  ensure_out(config);
  FeatureSpecList spec = resolve_spec(config);
  need_file(config.cohort_path(), "cohort file", "run synth first or pass --cohort");
  WarningSink warnings;
  auto episodes = load_episodes(config.cohort_path(), spec, &warnings,
                                config.cohort_long.empty() ? std::string{} : config.long_path());
  CohortSummary summary = summarize_cohort(episodes, spec);
  atomic_write_file(config.summary_csv_path(),
                    cohort_summary_to_csv(summary, artifact_stamp(config)));
  log.info("summarize", "wrote " + config.summary_csv_path() + " (" +
                            std::to_string(summary.entries.size()) + " features)");
}

void cmd_train(const RunConfig& config, const Logger& log) {
  ensure_out(config);
  CohortBundle bundle = load_bundle(config);

  ModelConfig fit_config;
  std::string source;
  if (!config.model_config.empty()) {
    need_file(config.model_config, "model config file", "check the --model-config path");
    fit_config = model_config_from_json(read_file(config.model_config), config.model_config);
    source = config.model_config;
  } else if (fs::exists(config.tune_report_path())) {
    json report = json::parse(read_file(config.tune_report_path()));
    if (report.contains("winner") && !report["winner"].is_null()) {
      fit_config = model_config_from_json(report["winner"]["config"].dump(),
                                          config.tune_report_path());
      source = "tune-winner";
    } else {
      fit_config = paper_best_config();
      source = "paper-default";
      log.info("train", "tune report has no winner (enumeration only); using the paper default");
    }
  } else {
    fit_config = paper_best_config();
    source = "paper-default";
  }
  fit_config.seed = config.seed;
  fit_config.threads = resolve_threads(config.threads);

  FeatureMatrix train = take_rows(bundle.matrix, bundle.split.train_rows);
  WarningSink warnings = bundle.warnings;
  TrainedModel trained = fit_model(train, train.labels, fit_config, &warnings);
  double train_auc = auc_score(predict_margin(trained, train), train.labels);

  json model_doc = json::parse(model_to_json(trained));
  model_doc["meta"] = meta_object(config);
  write_json(config.model_path(), model_doc);
  log.info("train", "wrote " + config.model_path() + " (" + learner_name(fit_config.learner) +
                        ", " + std::to_string(train.n_rows) + " training rows)");

  json log_doc;
  log_doc["meta"] = meta_object(config);
  log_doc["config"] = config_echo(trained.config);
  log_doc["config_source"] = source;
  log_doc["n_rows"] = bundle.matrix.n_rows;
  log_doc["n_train"] = train.n_rows;
  log_doc["n_test"] = bundle.split.test_rows.size();
  log_doc["class_weights"] = {{"w0", trained.weights.w0}, {"w1", trained.weights.w1}};
  log_doc["train_auc"] = train_auc;
  log_doc["converged"] = trained.converged;
  log_doc["warnings"] = warnings;
  write_json(config.training_log_path(), log_doc);
  log.info("train", "wrote " + config.training_log_path());
}

void cmd_tune(const RunConfig& config, const Logger& log) {
  ensure_out(config);
  Grid grid = resolve_grid(config);
  ModelConfig base = paper_base(grid.learner);
  base.seed = config.seed;

  json report;
  report["meta"] = meta_object(config);
  report["learner"] = learner_name(grid.learner);
  json axes = json::array();
  for (const auto& a : grid.axes) axes.push_back({{"name", a.name}, {"values", a.values}});
  report["axes"] = std::move(axes);
  report["enumerate_only"] = config.enumerate_only;

  if (config.enumerate_only) {
    auto configs = enumerate_grid(grid, base);
    json results = json::array();
    for (size_t i = 0; i < configs.size(); ++i)
      results.push_back({{"grid_index", i}, {"config", config_echo(configs[i])}});
    report["n_configs"] = configs.size();
    report["results"] = std::move(results);
    report["winner"] = nullptr;
    write_json(config.tune_report_path(), report);
    log.info("tune", "enumerated " + std::to_string(configs.size()) + " configs into " +
                         config.tune_report_path());
    return;
  }

  CohortBundle bundle = load_bundle(config);
  FeatureMatrix train = take_rows(bundle.matrix, bundle.split.train_rows);
  CvPlan plan{config.cv_folds, config.cv_repeats, config.seed, true};
  GridSearchOptions options{resolve_threads(config.threads)};
  WarningSink warnings = bundle.warnings;
  GridSearchOutcome outcome = grid_search(train, grid, base, plan, options, &warnings);

  json results = json::array();
  for (size_t rank = 0; rank < outcome.ranking.size(); ++rank) {
    const auto& r = outcome.ranking[rank];
    results.push_back({{"rank", rank + 1},
                       {"config", config_echo(r.config)},
                       {"mean_auc", r.mean_auc},
                       {"sd_auc", r.sd_auc},
                       {"display", format_pm(r.mean_auc, r.sd_auc)},
                       {"folds_skipped", r.folds_skipped}});
  }
  report["n_configs"] = outcome.ranking.size();
  report["results"] = std::move(results);
  report["winner"] = {{"grid_index", outcome.winner_grid_index},
                      {"config", config_echo(outcome.winner.config)}};
  report["cv"] = {{"folds", config.cv_folds}, {"repeats", config.cv_repeats}};
  report["warnings"] = warnings;
  write_json(config.tune_report_path(), report);
  log.info("tune", "ranked " + std::to_string(outcome.ranking.size()) + " configs into " +
                       config.tune_report_path());
}

void cmd_evaluate(const RunConfig& config, const Logger& log) {
  ensure_out(config);
  TrainedModel model = load_model_artifact(config);
  CohortBundle bundle = load_bundle(config);
  check_columns(model, bundle.matrix);
  if (bundle.split.test_rows.empty())
    throw std::invalid_argument("holdout fraction leaves no held-out rows to evaluate");

  FeatureMatrix test = take_rows(bundle.matrix, bundle.split.test_rows);
  std::vector<double> scores = predict_margin(model, test);
  EvalReport model_report = evaluate_scores(scores, test.labels, config.n_boot, config.seed);
  RocCurve model_curve = roc_curve(scores, test.labels);

  json doc;
  doc["meta"] = meta_object(config);
  doc["n_test"] = test.n_rows;
  doc["n_positive"] = std::count(test.labels.begin(), test.labels.end(), 1);
  doc["model"] = eval_report_json(model_report);

  std::vector<RocSeries> series{{"model", model_curve}};
  if (!config.grace_table.empty()) {
    need_file(config.grace_table, "point table", "check the --grace-table path");
    GracePointTable table = load_grace_table(config.grace_table);
    auto inputs = grace_inputs_from_matrix(test);
    EvalReport grace_report = grace_eval(inputs, test.labels, table, &scores, config.seed);
    auto totals = grace_scores(inputs, table, resolve_threads(config.threads));
    series.push_back({"point score", roc_curve(totals, test.labels)});
    doc["grace"] = eval_report_json(grace_report);
  } else {
    doc["grace"] = nullptr;
  }
  write_json(config.eval_report_path(), doc);
  log.info("evaluate", "wrote " + config.eval_report_path() + " (n_test=" +
                           std::to_string(test.n_rows) + ")");

  std::string stamp = artifact_stamp(config);
  atomic_write_file(config.roc_csv_path(), roc_curve_to_csv(model_curve, stamp));
  atomic_write_file(config.roc_svg_path(), roc_svg(series, "held-out discrimination", stamp));
  log.info("evaluate", "wrote " + config.roc_csv_path() + " and " + config.roc_svg_path());
}

void cmd_explain(const RunConfig& config, const Logger& log) {
  ensure_out(config);
  TrainedModel model = load_model_artifact(config);
  CohortBundle bundle = load_bundle(config);
  check_columns(model, bundle.matrix);

  int threads = resolve_threads(config.threads);
  FeatureMatrix train = take_rows(bundle.matrix, bundle.split.train_rows);
  FeatureMatrix background = sample_background(train, config.background, config.seed);
  Attribution attribution = attribute(model, bundle.matrix, background, threads);

  std::string stamp = artifact_stamp(config);
  std::string meta_str = meta_object(config).dump();
  atomic_write_file(config.attributions_path(), attribution_to_csv(attribution, stamp));

  auto features = summary_data(attribution);
  atomic_write_file(config.summary_json_path(), summary_to_json(features, meta_str));
  atomic_write_file(config.summary_svg_path(),
                    summary_svg(features, "contribution summary", stamp));

  ImportanceRanking ranking = feature_importance(attribution);
  DependenceData dependence =
      dependence_data(attribution, model, background, ranking.front().column);
  atomic_write_file(config.dependence_json_path(), dependence_to_json(dependence, meta_str));
  atomic_write_file(config.dependence_svg_path(), dependence_svg(dependence, "", stamp));

  std::vector<double> margins = predict_margin(model, bundle.matrix);
  size_t force_row = std::max_element(margins.begin(), margins.end()) - margins.begin();
  Explanation explanation = force_explanation(attribution, force_row);
  json force_meta = meta_object(config);
  force_meta["row_id"] = bundle.matrix.row_ids[force_row];
  atomic_write_file(config.force_json_path(),
                    explanation_to_json(explanation, force_meta.dump()));
  atomic_write_file(config.force_svg_path(), force_svg(explanation, "", stamp));
  log.info("explain", "wrote attributions and plot artifacts for " +
                          std::to_string(bundle.matrix.n_rows) + " rows");

  std::vector<double> edges = config.age_bins.empty() ? kDefaultAgeBinEdges : config.age_bins;
  auto groups = sex_groups(bundle.matrix);
  auto age_groups = age_bin_groups(bundle.matrix, edges);
  groups.insert(groups.end(), age_groups.begin(), age_groups.end());
  WarningSink warnings = bundle.warnings;
  auto sliced = subgroup_importance(attribution, groups, &warnings);

  // Sex-specific rankings come from a refit on each sex alone, so markers
  // that only matter inside one group can surface even when the pooled model
  // never splits on the gate.
  json refits = json::array();
  for (const auto& group : sex_groups(bundle.matrix)) {
    FeatureMatrix gm = take_rows(bundle.matrix, group.rows);
    int n_pos = std::count(gm.labels.begin(), gm.labels.end(), 1);
    if (gm.n_rows == 0 || n_pos == 0 || static_cast<size_t>(n_pos) == gm.n_rows) {
      warn(&warnings, "subgroup '" + group.name + "' has a single outcome class; refit skipped");
      continue;
    }
    ModelConfig cfg = model.config;
    cfg.seed = config.seed;
    cfg.threads = threads;
    TrainedModel refit = fit_model(gm, gm.labels, cfg, &warnings);
    FeatureMatrix gbg = sample_background(gm, config.background, config.seed);
    Attribution gattr = attribute(refit, gm, gbg, threads);
    GroupImportance gi{group.name, gm.n_rows, feature_importance(gattr)};
    refits.push_back(group_importance_json(gi));
  }

  json sub;
  sub["meta"] = meta_object(config);
  sub["age_edges"] = edges;
  sub["sliced"] = json::array();
  for (const auto& gi : sliced) sub["sliced"].push_back(group_importance_json(gi));
  sub["sex_refit"] = std::move(refits);
  sub["warnings"] = warnings;
  write_json(config.subgroups_path(), sub);
  log.info("explain", "wrote " + config.subgroups_path());
}

void cmd_compare(const RunConfig& config, const Logger& log) {
  ensure_out(config);
  TrainedModel model = load_model_artifact(config);
  CohortBundle bundle = load_bundle(config);
  check_columns(model, bundle.matrix);

  for (double t : bundle.matrix.row_survival)
    if (std::isnan(t))
      throw std::invalid_argument(
          "cohort has no survival times; enable survival in the generator or supply "
          "survival_days");

  int threads = resolve_threads(config.threads);
  FeatureMatrix train = take_rows(bundle.matrix, bundle.split.train_rows);
  FeatureMatrix background = sample_background(train, config.background, config.seed);
  Attribution attribution = attribute(model, bundle.matrix, background, threads);

  std::vector<std::string> markers;
  std::vector<size_t> marker_cols;
  for (const auto& entry : feature_importance(attribution)) {
    const ColumnInfo& info = bundle.matrix.columns[entry.column];
    // Sex indicators are constant inside the per-sex fits, so they cannot be
    // compared across the groups this table is split by.
    if (info.constant || info.source == "sex") continue;
    markers.push_back(entry.name);
    marker_cols.push_back(entry.column);
    if (markers.size() == config.top_markers) break;
  }

  WarningSink warnings = bundle.warnings;
  auto groups = sex_groups(bundle.matrix);
  auto slices = subgroup_importance(attribution, groups, &warnings);

  std::vector<GroupCox> cox_fits;
  for (const auto& group : groups) {
    if (group.rows.empty()) continue;
    std::vector<std::string> names;
    std::vector<size_t> cols;
    for (size_t k = 0; k < marker_cols.size(); ++k) {
      double lo = bundle.matrix.at(group.rows.front(), marker_cols[k]);
      double hi = lo;
      for (size_t i : group.rows) {
        lo = std::min(lo, bundle.matrix.at(i, marker_cols[k]));
        hi = std::max(hi, bundle.matrix.at(i, marker_cols[k]));
      }
      if (hi > lo) {
        names.push_back(markers[k]);
        cols.push_back(marker_cols[k]);
      } else {
        warn(&warnings, "marker '" + markers[k] + "' is constant among " + group.name +
                            "; dropped from the Cox fit");
      }
    }
    if (names.empty()) {
      warn(&warnings, "no usable Cox covariates for " + group.name);
      continue;
    }
    std::vector<std::vector<double>> x;
    std::vector<double> times;
    std::vector<int> events;
    for (size_t i : group.rows) {
      std::vector<double> row;
      for (size_t c : cols) row.push_back(bundle.matrix.at(i, c));
      x.push_back(std::move(row));
      times.push_back(bundle.matrix.row_survival[i]);
      events.push_back(bundle.matrix.labels[i]);
    }
    try {
      CoxFit fit = fit_cox(x, times, events, names);
      for (const auto& w : fit.warnings) warn(&warnings, group.name + " Cox fit: " + w);
      cox_fits.push_back({group.name, std::move(fit)});
    } catch (const std::exception& e) {
      warn(&warnings, group.name + " Cox fit failed: " + e.what());
    }
  }

  MarkerComparison comparison = compare_markers(slices, cox_fits, markers);
  for (const auto& w : comparison.warnings) warn(&warnings, w);

  std::string stamp = artifact_stamp(config);
  atomic_write_file(config.comparison_md_path(),
                    "<!-- " + stamp + " -->\n\n" + comparison_to_markdown(comparison));
  atomic_write_file(config.comparison_csv_path(),
                    "# " + stamp + "\n" + comparison_to_csv(comparison));
  log.info("compare", "wrote " + config.comparison_md_path() + " and " +
                          config.comparison_csv_path() + " (" + std::to_string(markers.size()) +
                          " markers)");
  for (const auto& w : warnings) log.info("compare", "warning: " + w);
}

}  // namespace riskbench
