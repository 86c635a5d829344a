#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace bmlmc {

/// Raised when a sample produces NaN or infinity. Carries the identity of the
/// sample so a diverged solve can be reproduced.
class NonFiniteSample : public std::runtime_error {
 public:
  NonFiniteSample(int level, std::uint64_t ordinal, std::uint64_t seed,
                  const std::string& what);

  int level() const noexcept { return level_; }
  std::uint64_t ordinal() const noexcept { return ordinal_; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  int level_;
  std::uint64_t ordinal_;
  std::uint64_t seed_;
};

class UndefinedVariance : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Mergeable online statistics of one level: Q_l, Y_l = Q_l - Q_{l-1} and the
/// per-sample cost. An accumulator with count == 0 is the merge identity.
struct LevelAccumulator {
  int level = 0;
  std::uint64_t count = 0;
  double mean_q = 0.0;
  double s2_q = 0.0;  // sum of squared deviations from mean_q
  double mean_y = 0.0;
  double s2_y = 0.0;
  double mean_cost = 0.0;
  double total_cost = 0.0;

  bool empty() const noexcept { return count == 0; }

  friend bool operator==(const LevelAccumulator&,
                         const LevelAccumulator&) = default;
};

/// Adds a single sample. Level 0 requires q_coarse == 0 so that Y_0 = Q_0.
/// Throws std::invalid_argument on a negative cost or a nonzero level-0
/// coarse value, and NonFiniteSample on NaN/inf input.
LevelAccumulator accumulate(LevelAccumulator acc, double q_fine,
                            double q_coarse, double cost);

/// Chan/Welford pairwise combination. Both sides must describe the same level.
LevelAccumulator merge(const LevelAccumulator& a, const LevelAccumulator& b);

// s^2 = S_2 / (M - 1); throws UndefinedVariance when count < 2.
double sample_variance_y(const LevelAccumulator& acc);
double sample_variance_q(const LevelAccumulator& acc);

/// Per-level accumulators for levels 0..L plus the estimation-round index.
struct MlmcDataset {
  std::vector<LevelAccumulator> levels;
  int round = 0;

  int max_level() const noexcept { return static_cast<int>(levels.size()) - 1; }
  std::size_t num_levels() const noexcept { return levels.size(); }
  bool empty() const noexcept { return levels.empty(); }

  /// Grows the level range so that `level` exists (new levels are empty).
  LevelAccumulator& at_level(int level);
  const LevelAccumulator& operator[](int level) const { return levels.at(level); }

  /// Sum over levels of Yhat_l: the multi-level estimate of E[Q_L].
  double estimate() const;
  double total_cost() const;

  friend bool operator==(const MlmcDataset&, const MlmcDataset&) = default;
};

/// Per-level merge of `delta` into `old`; extends the level range when delta
/// carries a new top level. The round index advances by one.
MlmcDataset merge_datasets(const MlmcDataset& old, const MlmcDataset& delta);

/// Reduces accumulators of one level pairwise in a fixed binary-tree shape.
/// The result depends only on the order of `parts`, never on thread timing.
LevelAccumulator tree_reduce(std::span<const LevelAccumulator> parts);

// Checkpoint encoding. Doubles are written as hex-float strings so a restore
// is bit-exact.
void to_json(nlohmann::json& j, const LevelAccumulator& acc);
void from_json(const nlohmann::json& j, LevelAccumulator& acc);
void to_json(nlohmann::json& j, const MlmcDataset& data);
void from_json(const nlohmann::json& j, MlmcDataset& data);

std::string hexfloat(double x);
double parse_hexfloat(const std::string& s);

}  // namespace bmlmc
