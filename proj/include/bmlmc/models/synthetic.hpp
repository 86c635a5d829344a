#pragma once

#include <array>

#include "bmlmc/models/sample_problem.hpp"

namespace bmlmc {

/// Rates and constants of a problem that satisfies the MLMC rate assumptions
/// with equality: bias c_alpha h^alpha, V[Y_l] = c_beta h^beta, cost
/// c_gamma h^{-gamma}.
struct SyntheticSpec {
  double q_bar = 1.0;
  double c_alpha = 1.0, alpha = 2.0;
  double c_beta = 1.0, beta = 4.0;
  double c_gamma = 1.0, gamma = 3.0;
  double v0 = 1.0;  // V[Q_0]
  double h0 = 0.25;
  int spatial_dimension = 2;
  double cost_jitter = 0.0;  // sigma of a mean-one log-normal cost factor

  void validate() const;
  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

class SyntheticModel final : public SampleProblem {
 public:
  explicit SyntheticModel(SyntheticSpec spec);

  std::string name() const override { return "synthetic"; }
  ProblemDescriptor descriptor() const override;
  SampleValue evaluate(int level, std::uint64_t seed) const override;
  std::optional<double> modeled_cost(int level) const override;

  const SyntheticSpec& spec() const noexcept { return spec_; }

  // Closed forms used as oracles.
  double bias(int level) const;            // E[Q_l] - q_bar
  double level_variance(int level) const;  // V[Y_l]
  double level_mean(int level) const;      // E[Y_l]
  double cost(int level) const;

 private:
  static constexpr int kTabulatedLevels = 64;

  SyntheticSpec spec_;
  std::array<double, kTabulatedLevels> sd_{};  // sqrt(V[Y_l])
  std::array<double, kTabulatedLevels> bias_{};
  std::array<double, kTabulatedLevels> cost_{};
};

}  // namespace bmlmc
