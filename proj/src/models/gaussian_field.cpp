#include "bmlmc/models/gaussian_field.hpp"

#include <cmath>
#include <complex>
#include <iostream>
#include <mutex>
#include <random>

#include <fftw3.h>

#include "bmlmc/rng.hpp"

namespace bmlmc {

namespace {

// FFTW's planner is not thread-safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<double> embedding_eigenvalues(const CovSpec& cov, int m, double dx) {
  std::vector<std::complex<double>> row(m), eig(m);
  for (int j = 0; j < m; ++j) {
    const int lag = std::min(j, m - j);
    row[j] = cov.covariance(lag * dx);
  }
  {
    std::lock_guard lock(planner_mutex());
    fftw_plan p = fftw_plan_dft_1d(m, reinterpret_cast<fftw_complex*>(row.data()),
                                   reinterpret_cast<fftw_complex*>(eig.data()),
                                   FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_execute(p);
    fftw_destroy_plan(p);
  }
  std::vector<double> lambda(m);
  for (int j = 0; j < m; ++j) lambda[j] = eig[j].real();
  return lambda;
}

}  // namespace

void CovSpec::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("covariance sigma must be > 0");
  if (!(lambda > 0.0)) throw std::invalid_argument("correlation length must be > 0");
  if (!(nu > 0.0 && nu <= 2.0)) throw std::invalid_argument("smoothness nu must lie in (0, 2]");
}

double CovSpec::covariance(double distance) const {
  return sigma * sigma * std::exp(-std::pow(std::abs(distance) / lambda, nu));
}

struct GaussianFieldSampler::Plan {
  fftw_plan plan = nullptr;
  ~Plan() {
    if (plan) {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan);
    }
  }
};

GaussianFieldSampler::GaussianFieldSampler(CovSpec cov, int n_cells, double length)
    : cov_(cov), n_(n_cells) {
  cov_.validate();
  if (n_cells < 1) throw std::invalid_argument("field needs at least one cell");
  if (!(length > 0.0)) throw std::invalid_argument("domain length must be > 0");
  const double dx = length / n_cells;

  int m = 2;
  while (m < 2 * (n_cells - 1)) m *= 2;

  std::vector<double> lambda;
  for (doublings_ = 0;; ++doublings_, m *= 2) {
    lambda = embedding_eigenvalues(cov_, m, dx);
    double negative = 0.0, total = 0.0;
    for (double l : lambda) {
      total += std::abs(l);
      if (l < 0.0) negative -= l;
    }
    clipped_ = total > 0.0 ? negative / total : 0.0;
    if (clipped_ <= kMaxClippedFraction) break;
    if (doublings_ == kMaxDoublings) {
      throw EmbeddingError("circulant embedding of size " + std::to_string(m) +
                           " clips " + std::to_string(100.0 * clipped_) +
                           "% of the spectrum; use a larger embedding");
    }
  }
  if (clipped_ > 1e-10) {
    std::clog << "warning: circulant embedding clipped " << clipped_
              << " of its spectral mass (m = " << m << ")\n";
  }
  m_ = m;
  sqrt_eigen_.resize(m);
  for (int j = 0; j < m; ++j) {
    sqrt_eigen_[j] = std::sqrt(std::max(lambda[j], 0.0) / m);
  }

  std::vector<std::complex<double>> in(m), out(m);
  plan_ = std::make_unique<Plan>();
  std::lock_guard lock(planner_mutex());
  plan_->plan = fftw_plan_dft_1d(m, reinterpret_cast<fftw_complex*>(in.data()),
                                 reinterpret_cast<fftw_complex*>(out.data()),
                                 FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
}

GaussianFieldSampler::~GaussianFieldSampler() = default;
GaussianFieldSampler::GaussianFieldSampler(GaussianFieldSampler&&) noexcept = default;
GaussianFieldSampler& GaussianFieldSampler::operator=(GaussianFieldSampler&&) noexcept =
    default;

std::vector<double> GaussianFieldSampler::sample_log(std::uint64_t seed) const {
  Xoshiro256 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<std::complex<double>> w(m_), y(m_);
  for (int j = 0; j < m_; ++j) {
    const double a = normal(rng);
    const double b = normal(rng);
    w[j] = sqrt_eigen_[j] * std::complex<double>(a, b);
  }
  fftw_execute_dft(plan_->plan, reinterpret_cast<fftw_complex*>(w.data()),
                   reinterpret_cast<fftw_complex*>(y.data()));
  // Real and imaginary parts are independent N(0, C); the real part is used.
  std::vector<double> field(n_);
  for (int i = 0; i < n_; ++i) field[i] = y[i].real();
  return field;
}

std::vector<double> GaussianFieldSampler::sample(std::uint64_t seed) const {
  auto field = sample_log(seed);
  for (double& v : field) v = std::exp(v);
  return field;
}

std::vector<double> sample_field(const CovSpec& cov, int n_cells,
                                 std::uint64_t seed) {
  return GaussianFieldSampler(cov, n_cells).sample(seed);
}

}  // namespace bmlmc
