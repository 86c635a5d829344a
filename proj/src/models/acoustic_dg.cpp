#include "bmlmc/models/acoustic_dg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <lapacke.h>

namespace bmlmc {

double legendre(int n, double xi) {
  if (n == 0) return 1.0;
  double p0 = 1.0, p1 = xi;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2 * k - 1) * xi * p1 - (k - 1) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

void gauss_legendre(int points, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  if (points < 1) throw std::invalid_argument("gauss_legendre: points must be >= 1");
  nodes.assign(points, 0.0);
  weights.assign(points, 0.0);
  for (int i = 0; i < points; ++i) {
    // Newton iteration from the Chebyshev-like initial guess.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (points + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= points; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = points * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[points - 1 - i] = x;
    weights[points - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

AcousticDG1D::AcousticDG1D(std::vector<double> rho, double kappa, int degree,
                           double length)
    : rho_(std::move(rho)), kappa_(kappa), degree_(degree), length_(length) {
  if (rho_.empty()) throw std::invalid_argument("dG mesh needs at least one cell");
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be > 0");
  if (degree < 0 || degree > 8) throw std::invalid_argument("dG degree must lie in [0, 8]");
  if (!(length > 0.0)) throw std::invalid_argument("domain length must be > 0");
  for (double r : rho_) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw std::invalid_argument("density must be positive and finite");
    }
  }
  cells_ = static_cast<int>(rho_.size());
  block_ = 2 * (degree_ + 1);
  h_ = length_ / cells_;

  mass_.resize(dofs());
  for (int c = 0; c < cells_; ++c) {
    for (int j = 0; j <= degree_; ++j) {
      const double base = h_ / (2 * j + 1);
      mass_[index(c, 0, j)] = rho_[c] * base;
      mass_[index(c, 1, j)] = base / kappa_;
    }
  }
  assemble();
}

void AcousticDG1D::assemble() {
  const int np = degree_ + 1;
  blocks_.assign(static_cast<std::size_t>(cells_) * 3 * block_ * block_, 0.0);

  // Volume terms: -int p_x psi and -int v_x phi; int P_j' P_i = 2 for j > i
  // with i + j odd.
  for (int c = 0; c < cells_; ++c) {
    for (int i = 0; i < np; ++i) {
      for (int j = i + 1; j < np; j += 2) {
        block_entry(c, 1, i, np + j) -= 2.0;
        block_entry(c, 1, np + i, j) -= 2.0;
      }
    }
  }

  auto impedance = [&](int c) { return std::sqrt(kappa_ * rho_[c]); };

  for (int c = 0; c < cells_; ++c) {
    const double zk = impedance(c);
    for (int side = 0; side < 2; ++side) {
      const double n = side == 0 ? -1.0 : 1.0;
      const int nb = side == 0 ? c - 1 : c + 1;
      const int which = side == 0 ? 0 : 2;
      auto trace = [&](int mode) { return side == 0 ? legendre(mode, -1.0) : 1.0; };
      auto nb_trace = [&](int mode) { return side == 0 ? 1.0 : legendre(mode, -1.0); };

      if (nb < 0 || nb >= cells_) {
        // Wall: mirror state v -> -v, p -> p.
        for (int i = 0; i < np; ++i) {
          for (int j = 0; j < np; ++j) {
            const double ts = trace(i) * trace(j);
            block_entry(c, 1, np + i, j) += n * ts;
            block_entry(c, 1, i, j) += zk * ts;
          }
        }
        continue;
      }

      const double zf = impedance(nb);
      const double w = 1.0 / (zk + zf);
      for (int i = 0; i < np; ++i) {
        const double row_p = trace(i);
        const double row_v = zk * n * trace(i);
        for (int j = 0; j < np; ++j) {
          const double own = trace(j);
          const double other = nb_trace(j);
          // Jump J = (p_F - p_K) + Z_F n (v_F - v_K).
          block_entry(c, 1, np + i, np + j) += w * row_p * own;
          block_entry(c, 1, np + i, j) += w * row_p * zf * n * own;
          block_entry(c, which, np + i, np + j) -= w * row_p * other;
          block_entry(c, which, np + i, j) -= w * row_p * zf * n * other;
          block_entry(c, 1, i, np + j) += w * row_v * own;
          block_entry(c, 1, i, j) += w * row_v * zf * n * own;
          block_entry(c, which, i, np + j) -= w * row_v * other;
          block_entry(c, which, i, j) -= w * row_v * zf * n * other;
        }
      }
    }
  }
}

void AcousticDG1D::apply(std::span<const double> u, std::span<double> out) const {
  if (u.size() != static_cast<std::size_t>(dofs()) || out.size() != u.size()) {
    throw std::invalid_argument("apply: vector size mismatch");
  }
  const int b = block_;
  const double* x = u.data();
  for (int c = 0; c < cells_; ++c) {
    const int first = c == 0 ? 1 : 0;
    const int last = c == cells_ - 1 ? 1 : 2;
    double* y = out.data() + static_cast<std::size_t>(c) * b;
    for (int r = 0; r < b; ++r) y[r] = 0.0;
    for (int which = first; which <= last; ++which) {
      const double* col = x + static_cast<std::size_t>(c + which - 1) * b;
      const double* blk = &blocks_[(static_cast<std::size_t>(c) * 3 + which) * b * b];
      for (int r = 0; r < b; ++r) {
        double acc = 0.0;
        for (int k = 0; k < b; ++k) acc += blk[r * b + k] * col[k];
        y[r] += acc;
      }
    }
  }
}

double AcousticDG1D::entry(std::size_t row, std::size_t col) const {
  const int rc = static_cast<int>(row / block_);
  const int cc = static_cast<int>(col / block_);
  const int which = cc - rc + 1;
  if (which < 0 || which > 2) return 0.0;
  return block_entry(rc, which, static_cast<int>(row % block_),
                     static_cast<int>(col % block_));
}

std::vector<double> AcousticDG1D::project(
    const std::function<FieldPair(double)>& fn) const {
  std::vector<double> nodes, weights;
  gauss_legendre(degree_ + 4, nodes, weights);
  std::vector<double> u(dofs(), 0.0);
  for (int c = 0; c < cells_; ++c) {
    const double x0 = c * h_;
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      const FieldPair val = fn(x0 + 0.5 * h_ * (nodes[q] + 1.0));
      for (int j = 0; j <= degree_; ++j) {
        // (u, P_j) / (P_j, P_j) on the reference cell.
        const double f = weights[q] * legendre(j, nodes[q]) * (2 * j + 1) / 2.0;
        u[index(c, 0, j)] += f * val[0];
        u[index(c, 1, j)] += f * val[1];
      }
    }
  }
  return u;
}

void AcousticDG1D::load(const std::function<FieldPair(double)>& source,
                        std::span<double> out) const {
  if (out.size() != static_cast<std::size_t>(dofs())) {
    throw std::invalid_argument("load: vector size mismatch");
  }
  std::vector<double> nodes, weights;
  gauss_legendre(degree_ + 4, nodes, weights);
  for (int c = 0; c < cells_; ++c) {
    const double x0 = c * h_;
    for (int j = 0; j <= degree_; ++j) {
      out[index(c, 0, j)] = 0.0;
      out[index(c, 1, j)] = 0.0;
    }
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      const FieldPair val = source(x0 + 0.5 * h_ * (nodes[q] + 1.0));
      for (int j = 0; j <= degree_; ++j) {
        const double f = 0.5 * h_ * weights[q] * legendre(j, nodes[q]);
        out[index(c, 0, j)] += f * val[0];
        out[index(c, 1, j)] += f * val[1];
      }
    }
  }
}

FieldPair AcousticDG1D::evaluate(std::span<const double> u, double x) const {
  int c = static_cast<int>(std::floor(x / h_));
  c = std::clamp(c, 0, cells_ - 1);
  const double xi = 2.0 * (x - c * h_) / h_ - 1.0;
  FieldPair out{0.0, 0.0};
  for (int j = 0; j <= degree_; ++j) {
    const double pj = legendre(j, xi);
    out[0] += u[index(c, 0, j)] * pj;
    out[1] += u[index(c, 1, j)] * pj;
  }
  return out;
}

double AcousticDG1D::energy(std::span<const double> u) const {
  double e = 0.0;
  for (std::size_t i = 0; i < mass_.size(); ++i) e += mass_[i] * u[i] * u[i];
  return 0.5 * e;
}

double AcousticDG1D::squared_norm_on(std::span<const double> u, double lo,
                                     double hi) const {
  const double first = lo / h_, last = hi / h_;
  const int c0 = static_cast<int>(std::lround(first));
  const int c1 = static_cast<int>(std::lround(last));
  if (std::abs(first - c0) > 1e-9 || std::abs(last - c1) > 1e-9 || c0 < 0 ||
      c1 > cells_ || c0 > c1) {
    throw std::invalid_argument("squared_norm_on: bounds must lie on cell faces");
  }
  double s = 0.0;
  for (int c = c0; c < c1; ++c) {
    for (int j = 0; j <= degree_; ++j) {
      const double v = u[index(c, 0, j)], p = u[index(c, 1, j)];
      s += h_ / (2 * j + 1) * (v * v + p * p);
    }
  }
  return s;
}

double AcousticDG1D::l2_error(std::span<const double> u,
                              const std::function<FieldPair(double)>& exact,
                              int points) const {
  std::vector<double> nodes, weights;
  gauss_legendre(points, nodes, weights);
  double s = 0.0;
  for (int c = 0; c < cells_; ++c) {
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      FieldPair uh{0.0, 0.0};
      for (int j = 0; j <= degree_; ++j) {
        const double pj = legendre(j, nodes[q]);
        uh[0] += u[index(c, 0, j)] * pj;
        uh[1] += u[index(c, 1, j)] * pj;
      }
      const FieldPair ex = exact(c * h_ + 0.5 * h_ * (nodes[q] + 1.0));
      const double dv = uh[0] - ex[0], dp = uh[1] - ex[1];
      s += 0.5 * h_ * weights[q] * (dv * dv + dp * dp);
    }
  }
  return std::sqrt(s);
}

ImplicitMidpoint::ImplicitMidpoint(const AcousticDG1D& dg, double tau)
    : dg_(dg), tau_(tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("time step must be > 0");
  const int n = dg.dofs();
  const int b = 2 * (dg.degree() + 1);
  kl_ = std::min(2 * b - 1, n - 1);
  ldab_ = 3 * kl_ + 1;
  band_.assign(static_cast<std::size_t>(ldab_) * n, 0.0);
  pivots_.resize(n);
  rhs_.resize(n);
  work_.resize(n);

  // Column-major LAPACK band storage: A(i, j) at row kl + ku + i - j.
  for (int j = 0; j < n; ++j) {
    const int lo = std::max(0, j - kl_), hi = std::min(n - 1, j + kl_);
    for (int i = lo; i <= hi; ++i) {
      double a = 0.5 * tau * dg.entry(i, j);
      if (i == j) a += dg.mass()[i];
      band_[static_cast<std::size_t>(j) * ldab_ + (2 * kl_ + i - j)] = a;
    }
  }
  const lapack_int info = LAPACKE_dgbtrf_work(LAPACK_COL_MAJOR, n, n, kl_, kl_,
                                              band_.data(), ldab_, pivots_.data());
  if (info != 0) {
    throw std::runtime_error("band factorization failed (info = " +
                             std::to_string(info) + ")");
  }
}

void ImplicitMidpoint::step(std::span<double> u, std::span<const double> load_mid) {
  const int n = dg_.dofs();
  dg_.apply(u, work_);
  const double* mass = dg_.mass().data();
  double* b = rhs_.data();
  const double half = 0.5 * tau_;
  for (int i = 0; i < n; ++i) b[i] = mass[i] * u[i] - half * work_[i];
  if (!load_mid.empty()) {
    for (int i = 0; i < n; ++i) b[i] += tau_ * load_mid[i];
  }

  // Band triangular solves on the dgbtrf factors (dgbtrs, unrolled). The
  // reference dgbtrs issues one BLAS call per column, which dominates at the
  // few hundred unknowns of a 1D mesh.
  const int kd = 2 * kl_;  // row of the diagonal; ku == kl
  const double* ab = band_.data();
  for (int j = 0; j + 1 < n; ++j) {
    const int p = pivots_[j] - 1;
    if (p != j) std::swap(b[p], b[j]);
    const double bj = b[j];
    if (bj == 0.0) continue;
    const double* col = ab + static_cast<std::size_t>(j) * ldab_ + kd;
    const int lm = std::min(kl_, n - 1 - j);
    for (int i = 1; i <= lm; ++i) b[j + i] -= col[i] * bj;
  }
  for (int j = n - 1; j >= 0; --j) {
    const double* col = ab + static_cast<std::size_t>(j) * ldab_ + kd;
    b[j] /= col[0];
    const double t = b[j];
    if (t == 0.0) continue;
    for (int i = std::max(0, j - kd); i < j; ++i) b[i] -= t * col[i - j];
  }
  std::copy(rhs_.begin(), rhs_.end(), u.begin());
}

}  // namespace bmlmc
