#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "riskbench/matrix.hpp"
#include "riskbench/roc.hpp"

namespace riskbench {

struct GraceBand {
  double lower = 0.0;  // inclusive
  double upper = 0.0;  // exclusive; +inf marks the open top band
  int points = 0;
};

// Ascending markers earn more points as the value rises (age, heart rate,
// creatinine); descending ones earn more as it falls (systolic blood
// pressure). The loader validates monotonicity in the declared direction.
struct GraceNumericMarker {
  std::string name;
  std::string unit;
  bool ascending = true;
  std::vector<GraceBand> bands;
};

struct GracePointTable {
  std::string version;
  std::string source;
  std::vector<GraceNumericMarker> numeric;   // age, heart_rate, systolic_bp, creatinine
  std::array<int, 4> killip = {0, 0, 0, 0};  // classes I..IV
  int cardiac_arrest = 0;
  int st_deviation = 0;
  int elevated_enzymes = 0;
};

// Parses and validates a point table: bands must be contiguous, cover
// [0, inf), carry non-negative integer points, and be monotone in the
// declared direction; Killip points must rise strictly from I to IV.
GracePointTable parse_grace_table(const std::string& json_text, const std::string& origin);
GracePointTable load_grace_table(const std::string& path);

struct GraceInput {
  double age = std::numeric_limits<double>::quiet_NaN();
  double heart_rate = std::numeric_limits<double>::quiet_NaN();
  double systolic_bp = std::numeric_limits<double>::quiet_NaN();
  double creatinine = std::numeric_limits<double>::quiet_NaN();
  int killip = 1;  // 1..4
  bool cardiac_arrest = false;
  bool st_deviation = false;
  bool elevated_enzymes = false;
};

struct GraceItem {
  std::string marker;
  std::string band;  // "[60, 70)", "class III", "present"
  int points = 0;
};

struct GraceScore {
  int total = 0;
  std::vector<GraceItem> breakdown;
};

// Pure banded lookup, no imputation: a NaN marker is an error, as is a value
// outside every band.
GraceScore grace_score(const GraceInput& input, const GracePointTable& table);

// Column names used to lift the eight markers out of a built matrix. Numeric
// markers match a column by exact name first, then by source with the mean
// derivation; the Killip class is read off its one-hot group.
struct GraceColumns {
  std::string age = "age";
  std::string heart_rate = "heart_rate";
  std::string systolic_bp = "sbp";
  std::string creatinine = "creatinine";
  std::string killip = "killip";
  std::string cardiac_arrest = "cardiac_arrest";
  std::string st_deviation = "st_deviation";
  std::string elevated_enzymes = "enzymes_elevated";
};

std::vector<GraceInput> grace_inputs_from_matrix(const FeatureMatrix& matrix,
                                                 const GraceColumns& columns = {});

// Point totals as doubles, ready for ROC analysis; per-patient and parallel.
std::vector<double> grace_scores(const std::vector<GraceInput>& inputs,
                                 const GracePointTable& table, int threads = 1);

// Scores the inputs and evaluates the totals like any other model score.
// When model_scores is given, the report carries a DeLong comparison (curve A
// is the point score, curve B the model) and a McNemar test of the two
// prediction sets, each thresholded at its own Youden point.
EvalReport grace_eval(const std::vector<GraceInput>& inputs, const std::vector<int>& labels,
                      const GracePointTable& table,
                      const std::vector<double>* model_scores = nullptr, uint64_t seed = 0);

}  // namespace riskbench
