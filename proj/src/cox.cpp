#include "riskbench/cox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "riskbench/stats.hpp"

namespace riskbench {

namespace {

void validate_inputs(const std::vector<std::vector<double>>& x, const std::vector<double>& times,
                     const std::vector<int>& events) {
  size_t n = x.size();
  if (n == 0) throw std::invalid_argument("Cox regression needs at least one subject");
  if (times.size() != n || events.size() != n)
    throw std::invalid_argument("covariates, times and events differ in length");
  size_t p = x[0].size();
  if (p == 0) throw std::invalid_argument("Cox regression needs at least one covariate");
  int n_events = 0;
  for (size_t i = 0; i < n; ++i) {
    if (x[i].size() != p) throw std::invalid_argument("covariate rows differ in length");
    for (double v : x[i])
      if (!std::isfinite(v)) throw std::invalid_argument("covariates must be finite");
    if (!(times[i] > 0.0) || !std::isfinite(times[i]))
      throw std::invalid_argument("survival times must be positive and finite");
    if (events[i] != 0 && events[i] != 1)
      throw std::invalid_argument("events must be 0 or 1");
    n_events += events[i];
  }
  if (n_events == 0)
    throw std::invalid_argument("no events: the partial likelihood is undefined");
}

// One pass over the risk sets, Efron weights on ties. Exponentials are taken
// relative to the largest linear predictor so a diverging coefficient cannot
// overflow. info, when non-null, receives the observed information (p x p,
// row-major).
double efron_sweep(const std::vector<std::vector<double>>& x, const std::vector<double>& times,
                   const std::vector<int>& events, const std::vector<double>& beta,
                   std::vector<double>* grad, std::vector<double>* info) {
  size_t n = x.size();
  size_t p = beta.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return times[a] < times[b]; });

  std::vector<double> eta(n);
  double eta_max = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (size_t j = 0; j < p; ++j) s += x[i][j] * beta[j];
    eta[i] = s;
    eta_max = std::max(eta_max, s);
  }
  std::vector<double> w(n);
  for (size_t i = 0; i < n; ++i) w[i] = std::exp(eta[i] - eta_max);

  if (grad) grad->assign(p, 0.0);
  if (info) info->assign(p * p, 0.0);
  double ll = 0.0;
  double s0 = 0.0;
  std::vector<double> s1(p, 0.0);
  std::vector<double> s2(info ? p * p : 0, 0.0);
  std::vector<double> s1d(p), s2d(info ? p * p : 0), u(p);

  size_t idx = n;
  while (idx > 0) {
    size_t hi = idx;
    double t = times[order[idx - 1]];
    while (idx > 0 && times[order[idx - 1]] == t) --idx;
    for (size_t k = idx; k < hi; ++k) {
      size_t i = order[k];
      s0 += w[i];
      for (size_t j = 0; j < p; ++j) s1[j] += w[i] * x[i][j];
      if (info)
        for (size_t j = 0; j < p; ++j)
          for (size_t l = 0; l <= j; ++l) s2[j * p + l] += w[i] * x[i][j] * x[i][l];
    }
    double d0 = 0.0;
    std::fill(s1d.begin(), s1d.end(), 0.0);
    if (info) std::fill(s2d.begin(), s2d.end(), 0.0);
    size_t d = 0;
    for (size_t k = idx; k < hi; ++k) {
      size_t i = order[k];
      if (!events[i]) continue;
      ++d;
      d0 += w[i];
      ll += eta[i];
      for (size_t j = 0; j < p; ++j) {
        s1d[j] += w[i] * x[i][j];
        if (grad) (*grad)[j] += x[i][j];
      }
      if (info)
        for (size_t j = 0; j < p; ++j)
          for (size_t l = 0; l <= j; ++l) s2d[j * p + l] += w[i] * x[i][j] * x[i][l];
    }
    for (size_t l = 0; l < d; ++l) {
      double f = static_cast<double>(l) / static_cast<double>(d);
      double denom = s0 - f * d0;
      ll -= eta_max + std::log(denom);
      if (!grad && !info) continue;
      for (size_t j = 0; j < p; ++j) u[j] = (s1[j] - f * s1d[j]) / denom;
      if (grad)
        for (size_t j = 0; j < p; ++j) (*grad)[j] -= u[j];
      if (info)
        for (size_t j = 0; j < p; ++j)
          for (size_t m = 0; m <= j; ++m)
            (*info)[j * p + m] +=
                (s2[j * p + m] - f * s2d[j * p + m]) / denom - u[j] * u[m];
    }
  }
  if (info)
    for (size_t j = 0; j < p; ++j)
      for (size_t m = j + 1; m < p; ++m) (*info)[j * p + m] = (*info)[m * p + j];
  return ll;
}

// In-place lower Cholesky; false when the matrix is not positive definite.
bool cholesky(std::vector<double>& a, size_t p) {
  for (size_t j = 0; j < p; ++j) {
    double d = a[j * p + j];
    for (size_t k = 0; k < j; ++k) d -= a[j * p + k] * a[j * p + k];
    if (!(d > 0.0)) return false;
    a[j * p + j] = std::sqrt(d);
    for (size_t i = j + 1; i < p; ++i) {
      double s = a[i * p + j];
      for (size_t k = 0; k < j; ++k) s -= a[i * p + k] * a[j * p + k];
      a[i * p + j] = s / a[j * p + j];
    }
  }
  return true;
}

std::vector<double> chol_solve(const std::vector<double>& factor, std::vector<double> b,
                               size_t p) {
  for (size_t i = 0; i < p; ++i) {
    for (size_t k = 0; k < i; ++k) b[i] -= factor[i * p + k] * b[k];
    b[i] /= factor[i * p + i];
  }
  for (size_t ii = p; ii > 0; --ii) {
    size_t i = ii - 1;
    for (size_t k = i + 1; k < p; ++k) b[i] -= factor[k * p + i] * b[k];
    b[i] /= factor[i * p + i];
  }
  return b;
}

// Factors with escalating diagonal jitter when the information is singular
// (as it becomes under separation).
std::vector<double> factor_info(const std::vector<double>& info, size_t p) {
  double max_diag = 0.0;
  for (size_t j = 0; j < p; ++j) max_diag = std::max(max_diag, std::fabs(info[j * p + j]));
  if (max_diag == 0.0) max_diag = 1.0;
  for (double jitter = 0.0; jitter <= 1e-2; jitter = jitter == 0.0 ? 1e-12 : jitter * 100.0) {
    std::vector<double> a = info;
    for (size_t j = 0; j < p; ++j) a[j * p + j] += jitter * max_diag;
    if (cholesky(a, p)) return a;
  }
  throw std::runtime_error("information matrix is singular");
}

}  // namespace

double cox_log_likelihood(const std::vector<std::vector<double>>& x,
                          const std::vector<double>& times, const std::vector<int>& events,
                          const std::vector<double>& beta, std::vector<double>* grad) {
  validate_inputs(x, times, events);
  if (beta.size() != x[0].size())
    throw std::invalid_argument("beta length does not match the covariate count");
  return efron_sweep(x, times, events, beta, grad, nullptr);
}

CoxFit fit_cox(const std::vector<std::vector<double>>& x, const std::vector<double>& times,
               const std::vector<int>& events, const std::vector<std::string>& names) {
  validate_inputs(x, times, events);
  size_t n = x.size();
  size_t p = x[0].size();
  CoxFit fit;
  fit.names = names;
  if (fit.names.empty())
    for (size_t j = 0; j < p; ++j) fit.names.push_back("x" + std::to_string(j + 1));
  if (fit.names.size() != p)
    throw std::invalid_argument("covariate names do not match the covariate count");

  // The partial likelihood is invariant to covariate shifts; centering keeps
  // the exponentials tame without changing any estimate.
  std::vector<double> center(p, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < p; ++j) center[j] += x[i][j];
  for (size_t j = 0; j < p; ++j) center[j] /= static_cast<double>(n);
  std::vector<std::vector<double>> xc(n, std::vector<double>(p));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < p; ++j) xc[i][j] = x[i][j] - center[j];
  for (size_t j = 0; j < p; ++j) {
    double lo = xc[0][j], hi = xc[0][j];
    for (size_t i = 1; i < n; ++i) {
      lo = std::min(lo, xc[i][j]);
      hi = std::max(hi, xc[i][j]);
    }
    if (lo == hi)
      throw std::invalid_argument("covariate '" + fit.names[j] +
                                  "' is constant across all rows");
  }

  std::vector<double> beta(p, 0.0), grad, info;
  double ll = efron_sweep(xc, times, events, beta, &grad, &info);
  bool separated = false;
  for (int iter = 1; iter <= 100 && !separated; ++iter) {
    std::vector<double> factor = factor_info(info, p);
    std::vector<double> delta = chol_solve(factor, grad, p);
    double step = 1.0;
    std::vector<double> candidate(p);
    double ll_new = ll;
    for (int halving = 0; halving < 40; ++halving) {
      for (size_t j = 0; j < p; ++j) candidate[j] = beta[j] + step * delta[j];
      ll_new = efron_sweep(xc, times, events, candidate, nullptr, nullptr);
      if (ll_new > ll - 1e-12) break;
      step /= 2.0;
    }
    double dll = ll_new - ll;
    beta = candidate;
    ll = efron_sweep(xc, times, events, beta, &grad, &info);
    fit.iterations = iter;
    for (size_t j = 0; j < p; ++j) {
      if (std::fabs(beta[j]) > 20.0) {
        fit.warnings.push_back("covariate '" + fit.names[j] +
                               "' shows monotone separation; the hazard estimate diverges");
        separated = true;
      }
    }
    if (separated) break;
    if (std::fabs(dll) < 1e-9) {
      fit.converged = true;
      break;
    }
  }
  if (fit.converged) {
    // One polishing step pins the optimum well past the stopping rule.
    std::vector<double> factor = factor_info(info, p);
    std::vector<double> delta = chol_solve(factor, grad, p);
    std::vector<double> candidate(p);
    for (size_t j = 0; j < p; ++j) candidate[j] = beta[j] + delta[j];
    double ll_new = efron_sweep(xc, times, events, candidate, nullptr, nullptr);
    if (ll_new >= ll - 1e-12) {
      beta = candidate;
      ll = efron_sweep(xc, times, events, beta, &grad, &info);
    }
  }

  fit.beta = beta;
  fit.log_likelihood = ll;
  std::vector<double> factor = factor_info(info, p);
  fit.se.resize(p);
  fit.z.resize(p);
  fit.p.resize(p);
  for (size_t j = 0; j < p; ++j) {
    std::vector<double> e(p, 0.0);
    e[j] = 1.0;
    std::vector<double> col = chol_solve(factor, std::move(e), p);
    fit.se[j] = std::sqrt(std::max(col[j], 0.0));
    fit.z[j] = fit.se[j] > 0.0 ? fit.beta[j] / fit.se[j] : 0.0;
    fit.p[j] = std::min(1.0, 2.0 * normal_sf(std::fabs(fit.z[j])));
  }
  return fit;
}

CoxFit fit_cox(const FeatureMatrix& covariates, const std::vector<double>& times,
               const std::vector<int>& events) {
  for (const auto& c : covariates.columns)
    if (c.constant)
      throw std::invalid_argument("covariate '" + c.name + "' is constant across all rows");
  std::vector<std::vector<double>> x(covariates.n_rows,
                                     std::vector<double>(covariates.n_cols()));
  for (size_t i = 0; i < covariates.n_rows; ++i)
    for (size_t j = 0; j < covariates.n_cols(); ++j) x[i][j] = covariates.at(i, j);
  return fit_cox(x, times, events, covariates.column_names());
}

CoxFit fit_cox_survival(const FeatureMatrix& covariates) {
  if (covariates.row_survival.size() != covariates.n_rows)
    throw std::invalid_argument("matrix carries no survival times");
  for (double t : covariates.row_survival)
    if (std::isnan(t))
      throw std::invalid_argument("every row needs a survival time");
  return fit_cox(covariates, covariates.row_survival, covariates.labels);
}

}  // namespace riskbench
