#pragma once

#include "riskbench/model.hpp"

namespace riskbench {

// Class-weighted mean loss without the penalty term; beta has one entry per
// column, the intercept rides separately. Exposed so tests can compare the
// analytic gradient against finite differences.
double linear_data_loss(const FeatureMatrix& matrix, const std::vector<int>& labels,
                        const ClassWeights& weights, Learner learner,
                        const std::vector<double>& beta, double intercept);

// Gradient of linear_data_loss; last entry is the intercept derivative.
std::vector<double> linear_data_gradient(const FeatureMatrix& matrix,
                                         const std::vector<int>& labels,
                                         const ClassWeights& weights, Learner learner,
                                         const std::vector<double>& beta, double intercept);

// Dense Hessian of the weighted logistic mean loss over (beta, intercept).
std::vector<double> logistic_hessian(const FeatureMatrix& matrix, const std::vector<int>& labels,
                                     const ClassWeights& weights,
                                     const std::vector<double>& beta, double intercept);

// Penalty evaluated at beta: (l1 part + l2 part) / C with the elasticnet mix.
double linear_penalty(const ModelConfig& config, const std::vector<double>& beta);

// Weighted logistic regression via proximal incremental gradients (saga-style
// variance-reduced updates); converged when the largest coefficient change in
// an epoch drops below 1e-6.
TrainedModel fit_logistic(const FeatureMatrix& matrix, const std::vector<int>& labels,
                          const ClassWeights& weights, const ModelConfig& config,
                          WarningSink* warnings = nullptr);

// Class-weighted squared-hinge linear classifier, same solver; probabilities
// come from a logistic calibration fitted on training margins.
TrainedModel fit_linear_svm(const FeatureMatrix& matrix, const std::vector<int>& labels,
                            const ClassWeights& weights, const ModelConfig& config,
                            WarningSink* warnings = nullptr);

}  // namespace riskbench
