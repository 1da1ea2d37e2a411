#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "riskbench/matrix.hpp"

namespace riskbench {

struct CoxFit {
  std::vector<std::string> names;
  std::vector<double> beta;  // log hazard ratios
  std::vector<double> se;
  std::vector<double> z;     // beta / se
  std::vector<double> p;     // two-sided normal
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string ties = "efron";
  std::vector<std::string> warnings;

  double hazard_ratio(size_t j) const { return std::exp(beta[j]); }
};

// Log partial likelihood with Efron handling of tied event times; when grad
// is non-null it receives the analytic gradient. x holds one row per subject.
double cox_log_likelihood(const std::vector<std::vector<double>>& x,
                          const std::vector<double>& times, const std::vector<int>& events,
                          const std::vector<double>& beta, std::vector<double>* grad = nullptr);

// Damped Newton ascent on the partial likelihood; converged when the
// likelihood moves by less than 1e-9, capped at 100 iterations. Standard
// errors come from the observed information at the optimum. A coefficient
// running past |beta| = 20 with the likelihood still climbing marks monotone
// separation: the fit stops unconverged with a warning naming the covariate.
CoxFit fit_cox(const std::vector<std::vector<double>>& x, const std::vector<double>& times,
               const std::vector<int>& events, const std::vector<std::string>& names = {});

// All matrix columns enter as covariates; a constant column is an error.
CoxFit fit_cox(const FeatureMatrix& covariates, const std::vector<double>& times,
               const std::vector<int>& events);

// Times from row_survival (every row must have one), events from the labels.
CoxFit fit_cox_survival(const FeatureMatrix& covariates);

}  // namespace riskbench
