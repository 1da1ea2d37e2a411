#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace riskbench {

extern const char kToolName[];
extern const char kToolVersion[];

// One config drives every stage; stages find each other's artifacts through
// the shared output directory, so a pipeline is reproducible from the config
// file alone. Every seed is explicit, nothing reads the clock.
struct RunConfig {
  std::string generator;      // synth input
  std::string cohort;         // episode CSV; synth writes it, later stages read it
  std::string cohort_long;    // optional long-format companion
  std::string spec;           // feature declarations; defaults to the synth output
  std::string out = "out";    // artifact directory
  std::string model;          // model artifact path override
  std::string model_config;   // explicit config file for train
  std::string grid = "paper-gbt";  // "paper-<learner>" or a grid file
  std::string grace_table;    // point-score table; empty skips the comparison

  uint64_t seed = 0;
  int threads = 0;            // 0 defers to RISKBENCH_THREADS, then hardware
  double holdout = 0.2;
  int cv_folds = 5;
  int cv_repeats = 10;
  size_t background = 100;
  size_t n_boot = 1000;
  size_t top_markers = 10;
  std::vector<double> age_bins;  // empty uses the default decade edges
  bool strict_impute = false;    // imputation and scaling stats from training rows only
  bool enumerate_only = false;   // tune lists the grid without cross-validating
  bool json_log = false;

  // Artifact locations, override path first, shared directory otherwise.
  std::string cohort_path() const;
  std::string long_path() const;
  std::string spec_path() const;
  std::string truth_path() const;
  std::string summary_csv_path() const;
  std::string model_path() const;
  std::string training_log_path() const;
  std::string tune_report_path() const;
  std::string eval_report_path() const;
  std::string roc_csv_path() const;
  std::string roc_svg_path() const;
  std::string attributions_path() const;
  std::string summary_json_path() const;
  std::string summary_svg_path() const;
  std::string dependence_json_path() const;
  std::string dependence_svg_path() const;
  std::string force_json_path() const;
  std::string force_svg_path() const;
  std::string subgroups_path() const;
  std::string comparison_md_path() const;
  std::string comparison_csv_path() const;
};

RunConfig parse_run_config(const std::string& json_text, const std::string& origin);
RunConfig load_run_config(const std::string& path);

// Canonical config text for hashing; presentation-only fields (threads,
// json_log) are excluded so artifact bytes do not depend on them.
std::string run_config_canonical(const RunConfig& config);
std::string run_config_hash(const RunConfig& config);

// "<tool> <version> config=<hash> seed=<seed>", embedded in every artifact.
std::string artifact_stamp(const RunConfig& config);

struct Logger {
  std::ostream* out = nullptr;
  bool json = false;
  void info(const std::string& stage, const std::string& message) const;
};

// Each stage validates inputs (invalid_argument), computes, and writes its
// artifacts atomically. Runtime failures propagate as other exceptions; the
// binary maps the two classes onto exit codes 1 and 2.
void cmd_synth(const RunConfig& config, const Logger& log);
void cmd_summarize(const RunConfig& config, const Logger& log);
void cmd_train(const RunConfig& config, const Logger& log);
void cmd_tune(const RunConfig& config, const Logger& log);
void cmd_evaluate(const RunConfig& config, const Logger& log);
void cmd_explain(const RunConfig& config, const Logger& log);
void cmd_compare(const RunConfig& config, const Logger& log);

}  // namespace riskbench
