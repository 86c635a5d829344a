#pragma once

#include <vector>

#include "bmlmc/stats.hpp"

namespace bmlmc {

/// Fallback and clamping policy for the on-the-fly rate fits.
struct RateFitOptions {
  double fallback_alpha = 1.0;
  double fallback_beta = 1.0;
  double fallback_gamma = 2.0;  // D + 1; callers set it from the model
  double min_rate = 0.05;
  double max_rate = 10.0;
};

/// Fitted rates of |E[Y_l]| ~ c_alpha 2^{-alpha l}, V[Y_l] ~ c_beta 2^{-beta l}
/// and C_l ~ c_gamma 2^{gamma l}. Constants are the level-0 intercepts of the
/// log2-linear fit, i.e. they absorb h_0.
struct RateEstimate {
  double alpha = 0.0, c_alpha = 0.0;
  double beta = 0.0, c_beta = 0.0;
  double gamma = 0.0, c_gamma = 0.0;

  bool alpha_defaulted = false;
  bool beta_defaulted = false;
  bool gamma_defaulted = false;
  bool clamped = false;

  bool defaulted() const noexcept {
    return alpha_defaulted || beta_defaulted || gamma_defaulted;
  }
};

struct ErrorEstimate {
  double err_disc = 0.0;
  double err_input = 0.0;
  double err_mse = 0.0;
  double err_rmse = 0.0;
};

struct Allocation {
  std::vector<double> continuous;    // pre-ceiling optimizer
  std::vector<std::uint64_t> m_opt;  // ceilings, floored at 1
  double predicted_cost = 0.0;       // sum_l max(m_opt - M_l, 0) * Chat_l
};

/// Plain least-squares slope/intercept of y against x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // sum of squared residuals
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);
/// Weighted variant; residual is the weighted sum of squares.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y,
                 const std::vector<double>& w);

RateEstimate fit_rates(const MlmcDataset& data, const RateFitOptions& opts = {});

/// max_{l=1..L} |Yhat_l| / (2^alpha - 1) * 2^{-alpha (L - l)}. Returns +inf
/// when only level 0 exists so that the controller adds a level.
double estimate_bias(const MlmcDataset& data, double alpha_hat);

/// sum_l s^2_{Y_l} / M_l. Throws UndefinedVariance on an under-sampled level.
double estimate_input_error(const MlmcDataset& data);

ErrorEstimate estimate_mse(const MlmcDataset& data, const RateEstimate& rates);
ErrorEstimate combine_errors(double err_input, double err_disc);

/// Continuous optimum of min sum M_l C_l s.t. sum V_l / M_l = theta eps^2.
std::vector<double> continuous_allocation(const std::vector<double>& variance,
                                          const std::vector<double>& cost,
                                          double epsilon, double theta);

/// Estimated optimal sample counts from the dataset's variances and mean
/// costs. Zero-variance levels are floored at one sample.
Allocation optimal_samples(const MlmcDataset& data, double epsilon, double theta);

struct DeltaPrediction {
  double delta = 0.5;
  bool boundary = false;  // beta == gamma, returned the beta > gamma value
};

/// Exponent delta of eps ~ B^{-delta} for a feasible budgeted run.
DeltaPrediction theoretical_delta(double alpha, double beta, double gamma);

}  // namespace bmlmc
