#pragma once

#include <memory>
#include <numbers>
#include <vector>

#include "bmlmc/models/acoustic_dg.hpp"
#include "bmlmc/models/gaussian_field.hpp"
#include "bmlmc/models/sample_problem.hpp"

namespace bmlmc {

/// 1D stochastic acoustic problem on (0, 1) with a log-normal density, a
/// Ricker-in-time source in the pressure equation and walls at both ends.
struct Wave1DSpec {
  double final_time = 1.0;
  double kappa = 1.0;
  CovSpec density;
  int degree = 1;
  double cfl_ratio = 0.125;  // tau_l / h_l
  double h0 = 1.0 / 32.0;
  double ricker_a = std::numbers::pi / 10.0;
  double ricker_amplitude = 10.0;
  double source_center = 0.5;
  double source_width = 0.1;
  double roi_lo = 0.25;
  double roi_hi = 0.75;
  int max_level = 8;
  double cost_unit = 1e-6;  // modeled cost per (step x cell x mode)

  void validate() const;
  int cells(int level) const;
  int steps(int level) const;
  friend bool operator==(const Wave1DSpec&, const Wave1DSpec&) = default;
};

/// Ricker wavelet amplitude (1 - (t/a)^2) exp(-t^2 / (2 a^2)).
double ricker(double t, double a, double amplitude);

/// Smooth bump exp(-1 / (1 - r^2)), r = |x - c| / w, scaled to unit L1 mass.
class SourceBump {
 public:
  SourceBump(double center, double width);
  double operator()(double x) const;

 private:
  double center_, width_, scale_;
};

/// Result of a single deterministic solve.
struct WaveSolution {
  std::vector<double> state;  // final dG coefficients
  double qoi = 0.0;
  double energy = 0.0;
  int steps = 0;
};

/// Solves the acoustic system on a given density field up to spec.final_time.
/// `snapshot` (optional) is called after every step with (step, time, state).
WaveSolution solve_wave(
    const Wave1DSpec& spec, const std::vector<double>& rho,
    const std::function<void(int, double, std::span<const double>)>& snapshot = {});

class Wave1DModel final : public SampleProblem {
 public:
  explicit Wave1DModel(Wave1DSpec spec);
  ~Wave1DModel() override;

  std::string name() const override { return "wave1d"; }
  ProblemDescriptor descriptor() const override;
  SampleValue evaluate(int level, std::uint64_t seed) const override;
  std::optional<double> modeled_cost(int level) const override;

  const Wave1DSpec& spec() const noexcept { return spec_; }

  /// Fine-grid density of a sample on `level`.
  std::vector<double> density(int level, std::uint64_t seed) const;

 private:
  Wave1DSpec spec_;
  std::vector<GaussianFieldSampler> samplers_;  // one per level
};

/// Pair averages of a fine cell field (coarse restriction).
std::vector<double> restrict_pairs(const std::vector<double>& fine);

}  // namespace bmlmc
