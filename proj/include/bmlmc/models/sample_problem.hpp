#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace bmlmc {

struct ProblemDescriptor {
  int spatial_dimension = 1;
  double h0 = 1.0;  // coarsest mesh width; h_l = h0 * 2^{-l}

  double mesh_width(int level) const;
};

/// Result of one coupled sample: Q_l(y) and Q_{l-1}(y) from the same input y.
struct SampleValue {
  double q_fine = 0.0;
  double q_coarse = 0.0;  // 0 on level 0
  double cost = 0.0;
};

/// A level hierarchy of random problems. evaluate() must be a pure function of
/// (level, seed) so that concurrent calls with distinct seeds are safe.
class SampleProblem {
 public:
  virtual ~SampleProblem() = default;

  virtual std::string name() const = 0;
  virtual ProblemDescriptor descriptor() const = 0;
  virtual SampleValue evaluate(int level, std::uint64_t seed) const = 0;

  /// Deterministic per-sample cost of a level when the problem prices work
  /// analytically; empty when costs have to be measured.
  virtual std::optional<double> modeled_cost(int level) const = 0;
};

}  // namespace bmlmc
