#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

namespace bmlmc {

/// Stationary covariance sigma^2 exp(-(|d| / lambda)^nu) of a log-field.
struct CovSpec {
  double sigma = 1.0;
  double lambda = 0.15;
  double nu = 1.8;

  void validate() const;
  double covariance(double distance) const;
  friend bool operator==(const CovSpec&, const CovSpec&) = default;
};

class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Samples a mean-zero Gaussian vector at the midpoints of n equal cells on
/// (0, length) by circulant embedding. The embedding is built once and the
/// sampler is then immutable, so sample() may be called concurrently.
class GaussianFieldSampler {
 public:
  static constexpr double kMaxClippedFraction = 0.05;
  static constexpr int kMaxDoublings = 3;

  GaussianFieldSampler(CovSpec cov, int n_cells, double length = 1.0);
  ~GaussianFieldSampler();
  GaussianFieldSampler(GaussianFieldSampler&&) noexcept;
  GaussianFieldSampler& operator=(GaussianFieldSampler&&) noexcept;

  /// Gaussian values (log of the material field).
  std::vector<double> sample_log(std::uint64_t seed) const;
  /// exp of sample_log: the log-normal field.
  std::vector<double> sample(std::uint64_t seed) const;

  int cells() const noexcept { return n_; }
  int embedding_size() const noexcept { return m_; }
  int doublings() const noexcept { return doublings_; }
  /// Share of |eigenvalue| mass that was negative and set to zero.
  double clipped_fraction() const noexcept { return clipped_; }

 private:
  struct Plan;

  CovSpec cov_;
  int n_ = 0;
  int m_ = 0;
  int doublings_ = 0;
  double clipped_ = 0.0;
  std::vector<double> sqrt_eigen_;  // sqrt(lambda_j / m)
  std::unique_ptr<Plan> plan_;
};

/// One log-normal realization, cell-wise, for the given covariance.
std::vector<double> sample_field(const CovSpec& cov, int n_cells,
                                 std::uint64_t seed);

}  // namespace bmlmc
