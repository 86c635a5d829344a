#include "bmlmc/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bmlmc {

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  return fit_line(x, y, std::vector<double>(x.size(), 1.0));
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y,
                 const std::vector<double>& w) {
  if (x.size() != y.size() || x.size() != w.size() || x.size() < 2) {
    throw std::invalid_argument("fit_line: need at least two (x, y, w) triples");
  }
  double sw = 0.0, mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(w[i] > 0.0)) throw std::invalid_argument("fit_line: weights must be positive");
    sw += w[i];
    mx += w[i] * x[i];
    my += w[i] * y[i];
  }
  mx /= sw;
  my /= sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: x values coincide");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    fit.residual += w[i] * r * r;
  }
  return fit;
}

namespace {

struct RateFit {
  double rate = 0.0;
  double constant = 0.0;
  bool defaulted = true;
  bool clamped = false;
};

// Fits log2 value_l = log2 c + sign * rate * l over the usable points.
RateFit fit_one(const std::vector<double>& levels,
                const std::vector<double>& values, const std::vector<double>& weights,
                double sign, double fallback, const RateFitOptions& opts) {
  RateFit out;
  if (levels.size() >= 2) {
    std::vector<double> logs(values.size());
    std::transform(values.begin(), values.end(), logs.begin(),
                   [](double v) { return std::log2(v); });
    const LineFit line = fit_line(levels, logs, weights);
    out.rate = sign * line.slope;
    out.constant = std::exp2(line.intercept);
    out.defaulted = false;
  } else {
    out.rate = fallback;
    if (!levels.empty()) {
      out.constant = values.back() * std::exp2(-sign * fallback * levels.back());
    }
  }
  if (!std::isfinite(out.rate)) {
    out.rate = fallback;
    out.defaulted = true;
  }
  if (out.rate < opts.min_rate || out.rate > opts.max_rate) {
    out.rate = std::clamp(out.rate, opts.min_rate, opts.max_rate);
    out.clamped = true;
  }
  return out;
}

// Inverse-variance weights of log2|Yhat_l| are M_l mu_l^2 / s^2_l with mu_l the
// true mean. Using the observed |Yhat_l| for mu_l would favour exactly the
// levels whose mean came out large by chance, so mu_l is taken from the
// previous fit instead (iteratively reweighted, starting from equal mu_l).
RateFit fit_alpha(const std::vector<double>& levels, const std::vector<double>& values,
                  const std::vector<double>& precision, double fallback,
                  const RateFitOptions& opts) {
  constexpr int kIterations = 8;
  std::vector<double> w = precision;
  RateFit fit = fit_one(levels, values, w, -1.0, fallback, opts);
  if (fit.defaulted) return fit;
  for (int it = 0; it < kIterations; ++it) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double mu = fit.constant * std::exp2(-fit.rate * levels[i]);
      w[i] = precision[i] * mu * mu;
    }
    const RateFit next = fit_one(levels, values, w, -1.0, fallback, opts);
    const bool done = std::abs(next.rate - fit.rate) <= 1e-12 * std::max(1.0, fit.rate);
    fit = next;
    if (done) break;
  }
  return fit;
}

}  // namespace

RateEstimate fit_rates(const MlmcDataset& data, const RateFitOptions& opts) {
  // Weighted least squares in log2 space. The beta points carry weight
  // (M - 1) / 2, the inverse variance of log s^2 up to a constant. Noise-free
  // data (s^2 == 0) falls back to equal weights.
  std::vector<double> la, va, wa, lb, vb, wb, lg, vg;
  bool exact_means = false;
  for (const auto& acc : data.levels) {
    if (acc.count < 2) continue;
    const double l = static_cast<double>(acc.level);
    const double m = static_cast<double>(acc.count);
    if (acc.mean_cost > 0.0) {
      lg.push_back(l);
      vg.push_back(acc.mean_cost);
    }
    if (acc.level == 0) continue;
    const double s2 = sample_variance_y(acc);
    if (acc.mean_y != 0.0) {
      la.push_back(l);
      va.push_back(std::abs(acc.mean_y));
      if (s2 > 0.0) {
        wa.push_back(m / s2);
      } else {
        wa.push_back(1.0);
        exact_means = true;
      }
    }
    if (s2 > 0.0) {
      lb.push_back(l);
      vb.push_back(s2);
      wb.push_back(0.5 * (m - 1.0));
    }
  }

  const RateFit a = exact_means
                        ? fit_one(la, va, std::vector<double>(la.size(), 1.0), -1.0,
                                  opts.fallback_alpha, opts)
                        : fit_alpha(la, va, wa, opts.fallback_alpha, opts);
  const RateFit b = fit_one(lb, vb, wb, -1.0, opts.fallback_beta, opts);
  const RateFit g =
      fit_one(lg, vg, std::vector<double>(lg.size(), 1.0), +1.0, opts.fallback_gamma, opts);

  RateEstimate r;
  r.alpha = a.rate;
  r.c_alpha = a.constant;
  r.alpha_defaulted = a.defaulted;
  r.beta = b.rate;
  r.c_beta = b.constant;
  r.beta_defaulted = b.defaulted;
  r.gamma = g.rate;
  r.c_gamma = g.constant;
  r.gamma_defaulted = g.defaulted;
  r.clamped = a.clamped || b.clamped || g.clamped;
  return r;
}

double estimate_bias(const MlmcDataset& data, double alpha_hat) {
  if (alpha_hat <= 0.0) throw std::invalid_argument("estimate_bias: alpha <= 0");
  const int L = data.max_level();
  if (L < 1) return std::numeric_limits<double>::infinity();
  const double denom = std::exp2(alpha_hat) - 1.0;
  double bias = 0.0;
  for (int l = 1; l <= L; ++l) {
    const double term =
        std::abs(data[l].mean_y) / denom * std::exp2(-alpha_hat * (L - l));
    bias = std::max(bias, term);
  }
  return bias;
}

double estimate_input_error(const MlmcDataset& data) {
  double sum = 0.0;
  for (const auto& acc : data.levels) {
    sum += sample_variance_y(acc) / static_cast<double>(acc.count);
  }
  return sum;
}

ErrorEstimate combine_errors(double err_input, double err_disc) {
  ErrorEstimate e;
  e.err_input = err_input;
  e.err_disc = err_disc;
  e.err_mse = err_input + err_disc * err_disc;
  e.err_rmse = std::sqrt(e.err_mse);
  return e;
}

ErrorEstimate estimate_mse(const MlmcDataset& data, const RateEstimate& rates) {
  return combine_errors(estimate_input_error(data),
                        estimate_bias(data, rates.alpha));
}

std::vector<double> continuous_allocation(const std::vector<double>& variance,
                                          const std::vector<double>& cost,
                                          double epsilon, double theta) {
  if (variance.size() != cost.size()) {
    throw std::invalid_argument("continuous_allocation: size mismatch");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(theta > 0.0 && theta < 1.0)) {
    throw std::invalid_argument("theta must lie in (0, 1)");
  }
  double sum = 0.0;
  for (std::size_t l = 0; l < cost.size(); ++l) {
    if (!(cost[l] > 0.0)) {
      throw std::invalid_argument("mean cost of level " + std::to_string(l) +
                                  " is not positive");
    }
    if (variance[l] < 0.0) throw std::invalid_argument("negative variance");
    sum += std::sqrt(variance[l] * cost[l]);
  }
  const double prefactor = 1.0 / (theta * epsilon * epsilon);
  std::vector<double> m(cost.size());
  for (std::size_t l = 0; l < cost.size(); ++l) {
    m[l] = prefactor * std::sqrt(variance[l] / cost[l]) * sum;
  }
  return m;
}

Allocation optimal_samples(const MlmcDataset& data, double epsilon,
                           double theta) {
  std::vector<double> var, cost;
  for (const auto& acc : data.levels) {
    var.push_back(sample_variance_y(acc));
    cost.push_back(acc.mean_cost);
  }
  Allocation alloc;
  alloc.continuous = continuous_allocation(var, cost, epsilon, theta);
  alloc.m_opt.resize(alloc.continuous.size());
  for (std::size_t l = 0; l < alloc.continuous.size(); ++l) {
    const double c = std::ceil(alloc.continuous[l]);
    alloc.m_opt[l] = c < 1.0 ? 1 : static_cast<std::uint64_t>(c);
    const std::uint64_t have = data.levels[l].count;
    if (alloc.m_opt[l] > have) {
      alloc.predicted_cost +=
          static_cast<double>(alloc.m_opt[l] - have) * cost[l];
    }
  }
  return alloc;
}

DeltaPrediction theoretical_delta(double alpha, double beta, double gamma) {
  if (!(alpha > 0.0 && beta > 0.0 && gamma > 0.0)) {
    throw std::invalid_argument("theoretical_delta: rates must be positive");
  }
  if (beta > gamma) return {0.5, false};
  if (beta == gamma) return {0.5, true};
  return {alpha / (2.0 * alpha + (gamma - beta)), false};
}

}  // namespace bmlmc
