#include "bmlmc/models/synthetic.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "bmlmc/rng.hpp"

namespace bmlmc {

double ProblemDescriptor::mesh_width(int level) const {
  return h0 * std::exp2(-static_cast<double>(level));
}

void SyntheticSpec::validate() const {
  if (!(c_alpha > 0 && alpha > 0 && c_beta > 0 && beta > 0 && c_gamma > 0 &&
        gamma > 0 && v0 > 0 && h0 > 0)) {
    throw std::invalid_argument("synthetic model constants must be positive");
  }
  if (cost_jitter < 0) throw std::invalid_argument("cost_jitter must be >= 0");
}

SyntheticModel::SyntheticModel(SyntheticSpec spec) : spec_(spec) {
  spec_.validate();
  for (int l = 0; l < kTabulatedLevels; ++l) {
    sd_[l] = std::sqrt(level_variance(l));
    bias_[l] = bias(l);
    cost_[l] = cost(l);
  }
}

ProblemDescriptor SyntheticModel::descriptor() const {
  return {spec_.spatial_dimension, spec_.h0};
}

double SyntheticModel::bias(int level) const {
  return spec_.c_alpha * std::pow(descriptor().mesh_width(level), spec_.alpha);
}

double SyntheticModel::level_variance(int level) const {
  if (level == 0) return spec_.v0;
  return spec_.c_beta * std::pow(descriptor().mesh_width(level), spec_.beta);
}

double SyntheticModel::level_mean(int level) const {
  if (level == 0) return spec_.q_bar + bias(0);
  return bias(level) - bias(level - 1);
}

double SyntheticModel::cost(int level) const {
  return spec_.c_gamma * std::pow(descriptor().mesh_width(level), -spec_.gamma);
}

std::optional<double> SyntheticModel::modeled_cost(int level) const {
  if (spec_.cost_jitter > 0) return std::nullopt;
  return cost(level);
}

SampleValue SyntheticModel::evaluate(int level, std::uint64_t seed) const {
  if (level < 0 || level >= kTabulatedLevels) {
    throw std::invalid_argument("level out of range");
  }
  Xoshiro256 rng(seed);
  std::normal_distribution<double> normal;

  // Q_j = q_bar + c_a h_j^a + sqrt(v0) xi_0 + sum_{i=1..j} sqrt(c_b h_i^b) xi_i
  double noise = sd_[0] * normal(rng);
  double noise_coarse = noise;
  for (int i = 1; i <= level; ++i) {
    noise_coarse = noise;
    noise += sd_[i] * normal(rng);
  }

  SampleValue out;
  out.q_fine = spec_.q_bar + bias_[level] + noise;
  out.q_coarse = level == 0 ? 0.0 : spec_.q_bar + bias_[level - 1] + noise_coarse;
  out.cost = cost_[level];
  if (spec_.cost_jitter > 0) {
    const double s = spec_.cost_jitter;
    out.cost *= std::exp(s * normal(rng) - 0.5 * s * s);
  }
  return out;
}

}  // namespace bmlmc
