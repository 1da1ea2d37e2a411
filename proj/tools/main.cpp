#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "riskbench/pipeline.hpp"

using riskbench::Logger;
using riskbench::RunConfig;

int main(int argc, char** argv) {
  CLI::App app{"interpretable risk modeling pipeline for tabular clinical cohorts"};
  app.set_version_flag("--version",
                       std::string(riskbench::kToolName) + " " + riskbench::kToolVersion);
  app.require_subcommand(1);

  std::string config_path, out, cohort, cohort_long, spec, generator, model, model_config;
  std::string grid, paper_grid_name, grace_table;
  uint64_t seed = 0;
  int threads = 0, folds = 5, repeats = 10;
  double holdout = 0.2;
  std::size_t background = 100, n_boot = 1000, top_markers = 10;
  std::vector<double> age_bins;
  bool strict_impute = false, enumerate_only = false, json_log = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run config JSON file");
    sub->add_option("--out", out, "artifact directory");
    sub->add_option("--seed", seed, "master seed for every random stream");
    sub->add_option("--threads", threads, "worker threads (0 = RISKBENCH_THREADS or hardware)");
    sub->add_flag("--json", json_log, "machine-readable log lines");
  };
  auto add_cohort_inputs = [&](CLI::App* sub) {
    sub->add_option("--cohort", cohort, "episode CSV path");
    sub->add_option("--cohort-long", cohort_long, "long-format companion CSV");
    sub->add_option("--spec", spec, "feature spec JSON");
  };
  auto add_split = [&](CLI::App* sub) {
    sub->add_option("--holdout", holdout, "held-out fraction of the cohort");
    sub->add_flag("--strict-impute", strict_impute,
                  "imputation and scaling statistics from training rows only");
  };
  auto add_model_input = [&](CLI::App* sub) {
    sub->add_option("--model", model, "model artifact path");
  };

  CLI::App* synth = app.add_subcommand("synth", "draw a synthetic cohort from a generator file");
  add_common(synth);
  synth->add_option("--generator", generator, "generator config JSON");
  synth->add_option("--cohort", cohort, "cohort output path");
  synth->add_option("--cohort-long", cohort_long, "long-format output path");

  CLI::App* summarize = app.add_subcommand("summarize", "sex-split descriptive cohort table");
  add_common(summarize);
  add_cohort_inputs(summarize);

  CLI::App* train = app.add_subcommand("train", "fit the final model on the training partition");
  add_common(train);
  add_cohort_inputs(train);
  add_split(train);
  train->add_option("--model", model, "model artifact output path");
  train->add_option("--model-config", model_config, "explicit model config JSON");

  CLI::App* tune = app.add_subcommand("tune", "cross-validated grid search");
  add_common(tune);
  add_cohort_inputs(tune);
  add_split(tune);
  tune->add_option("--grid", grid, "'paper-<learner>' or a grid file");
  tune->add_option("--paper-grid", paper_grid_name, "published search space: lr, svm, rf, gbt");
  tune->add_flag("--enumerate-only", enumerate_only, "list the grid without cross-validating");
  tune->add_option("--folds", folds, "cross-validation folds");
  tune->add_option("--repeats", repeats, "cross-validation repeats");

  CLI::App* evaluate = app.add_subcommand("evaluate", "held-out discrimination report");
  add_common(evaluate);
  add_cohort_inputs(evaluate);
  add_split(evaluate);
  add_model_input(evaluate);
  evaluate->add_option("--n-boot", n_boot, "bootstrap resamples for the AUC interval");
  evaluate->add_option("--grace-table", grace_table, "point-score table for the comparison");

  CLI::App* explain = app.add_subcommand("explain", "attributions, plots, subgroup rankings");
  add_common(explain);
  add_cohort_inputs(explain);
  add_split(explain);
  add_model_input(explain);
  explain->add_option("--background", background, "background sample size");
  explain->add_option("--age-bins", age_bins, "age bin edges")->delimiter(',');

  CLI::App* compare = app.add_subcommand("compare", "contribution vs Cox marker grid");
  add_common(compare);
  add_cohort_inputs(compare);
  add_split(compare);
  add_model_input(compare);
  compare->add_option("--background", background, "background sample size");
  compare->add_option("--top-markers", top_markers, "markers entering the Cox fits");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  auto given = [&](const char* name) {
    const CLI::Option* option = sub->get_option_no_throw(name);
    return option != nullptr && option->count() > 0;
  };
  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : riskbench::load_run_config(config_path);
    if (given("--out")) cfg.out = out;
    if (given("--seed")) cfg.seed = seed;
    if (given("--threads")) cfg.threads = threads;
    if (given("--cohort")) cfg.cohort = cohort;
    if (given("--cohort-long")) cfg.cohort_long = cohort_long;
    if (given("--spec")) cfg.spec = spec;
    if (given("--generator")) cfg.generator = generator;
    if (given("--model")) cfg.model = model;
    if (given("--model-config")) cfg.model_config = model_config;
    if (given("--grid")) cfg.grid = grid;
    if (given("--paper-grid")) cfg.grid = "paper-" + paper_grid_name;
    if (given("--grace-table")) cfg.grace_table = grace_table;
    if (given("--holdout")) cfg.holdout = holdout;
    if (given("--folds")) cfg.cv_folds = folds;
    if (given("--repeats")) cfg.cv_repeats = repeats;
    if (given("--background")) cfg.background = background;
    if (given("--n-boot")) cfg.n_boot = n_boot;
    if (given("--top-markers")) cfg.top_markers = top_markers;
    if (given("--age-bins")) cfg.age_bins = age_bins;
    if (given("--strict-impute")) cfg.strict_impute = strict_impute;
    if (given("--enumerate-only")) cfg.enumerate_only = enumerate_only;
    if (given("--json")) cfg.json_log = json_log;

    Logger log{&std::cout, cfg.json_log};
    if (sub == synth) riskbench::cmd_synth(cfg, log);
    else if (sub == summarize) riskbench::cmd_summarize(cfg, log);
    else if (sub == train) riskbench::cmd_train(cfg, log);
    else if (sub == tune) riskbench::cmd_tune(cfg, log);
    else if (sub == evaluate) riskbench::cmd_evaluate(cfg, log);
    else if (sub == explain) riskbench::cmd_explain(cfg, log);
    else riskbench::cmd_compare(cfg, log);
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
