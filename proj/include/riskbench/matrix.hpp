#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "riskbench/cohort.hpp"
#include "riskbench/common.hpp"

namespace riskbench {

enum class Derivation { Value, Min, Max, Mean, OneHot };

std::string derivation_name(Derivation d);
Derivation parse_derivation(const std::string& s);

struct ColumnInfo {
  std::string name;        // e.g. "urea@mean", "killip=II"
  std::string source;      // originating feature
  Derivation derivation = Derivation::Value;
  std::string category;    // level, for one-hot columns
  double imputed_fraction = 0.0;
  double mean = 0.0;       // standardization center
  double sd = 0.0;         // standardization scale; 0 marks a constant column
  bool constant = false;
};

struct FeatureMatrix {
  std::vector<ColumnInfo> columns;
  size_t n_rows = 0;
  std::vector<double> data;  // row-major, standardized
  std::vector<int> labels;
  std::vector<int> row_sex;
  std::vector<double> row_age;
  std::vector<double> row_survival;  // NaN where absent
  std::vector<std::string> row_ids;

  size_t n_cols() const { return columns.size(); }
  double& at(size_t i, size_t j) { return data[i * columns.size() + j]; }
  double at(size_t i, size_t j) const { return data[i * columns.size() + j]; }
  // Undoes standardization using the stored column statistics.
  double raw(size_t i, size_t j) const { return at(i, j) * columns[j].sd + columns[j].mean; }
  std::vector<std::string> column_names() const;
};

struct MatrixOptions {
  // When set, imputation and standardization statistics come from these rows
  // only; the default uses the whole cohort.
  const std::vector<size_t>* stats_rows = nullptr;
  int threads = 1;
};

// Expands features to columns (dynamic -> min/max/mean, categorical ->
// one-hot), mean-imputes missing cells, standardizes each column to mean 0
// and sample sd 1. Zero-variance columns become all-zero and are flagged
// constant.
FeatureMatrix build_matrix(const std::vector<RawEpisode>& episodes, const FeatureSpecList& spec,
                           const MatrixOptions& options = {}, WarningSink* warnings = nullptr);

struct SplitIndex {
  std::vector<size_t> train_rows, test_rows;
  uint64_t seed = 0;
};

// Seed-keyed uniform shuffle; |test| = round(test_fraction * n), half up.
SplitIndex split_holdout(const FeatureMatrix& matrix, double test_fraction, uint64_t seed);

// Copies the selected rows into a new matrix sharing the column metadata.
FeatureMatrix take_rows(const FeatureMatrix& matrix, const std::vector<size_t>& rows);

}  // namespace riskbench
