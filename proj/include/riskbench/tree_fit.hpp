#pragma once

#include "riskbench/model.hpp"

namespace riskbench {

// Bootstrap forest with class-weighted Gini splits; each node considers a
// seeded random subset of ceil(log2(usable features)) columns. Tree outputs
// are class-1 leaf frequencies and the ensemble mean is the probability.
// When oob_out is given it receives the out-of-bag probability per row (NaN
// for rows every tree trained on).
TrainedModel fit_random_forest(const FeatureMatrix& matrix, const std::vector<int>& labels,
                               const ClassWeights& weights, const ModelConfig& config,
                               WarningSink* warnings = nullptr,
                               std::vector<double>* oob_out = nullptr);

// Second-order boosting on the class-weighted logistic loss. Split gain uses
// gradient/hessian sums with the L1/L2 leaf penalties; a split must beat
// gamma. Row subsampling and tree dropout are reseeded per round.
TrainedModel fit_gbt(const FeatureMatrix& matrix, const std::vector<int>& labels,
                     const ClassWeights& weights, const ModelConfig& config,
                     WarningSink* warnings = nullptr);

}  // namespace riskbench
