#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

namespace bmlmc {

/// Velocity/pressure pair (v, p).
using FieldPair = std::array<double, 2>;

/// Upwind discontinuous Galerkin discretization of the 1D acoustic system
///
///   rho v_t - p_x = f,   kappa^{-1} p_t - v_x = g,   v = 0 at both ends,
///
/// on (0, length) with cell-wise constant rho. Each cell carries Legendre
/// modes 0..degree for v and for p. Interface fluxes are weighted by the
/// impedances Z = sqrt(kappa rho) of the two adjacent cells; the wall
/// condition uses the mirror state, which keeps the operator dissipative.
///
/// Coefficient layout: index (cell * 2 + field) * (degree + 1) + mode, with
/// field 0 = v and field 1 = p.
class AcousticDG1D {
 public:
  AcousticDG1D(std::vector<double> rho, double kappa, int degree,
               double length = 1.0);

  int cells() const noexcept { return cells_; }
  int degree() const noexcept { return degree_; }
  int dofs() const noexcept { return cells_ * block_; }
  double h() const noexcept { return h_; }
  double kappa() const noexcept { return kappa_; }
  std::span<const double> rho() const noexcept { return rho_; }

  std::size_t index(int cell, int field, int mode) const {
    return (static_cast<std::size_t>(cell) * 2 + field) * (degree_ + 1) + mode;
  }

  /// Diagonal of the mass matrix M.
  std::span<const double> mass() const noexcept { return mass_; }

  /// out = A u, where (A u)_i = a(u, phi_i) is the discrete operator applied
  /// in its weak (un-inverted) form.
  void apply(std::span<const double> u, std::span<double> out) const;

  /// Entry A(row, col); zero outside the block tridiagonal pattern.
  double entry(std::size_t row, std::size_t col) const;

  /// L2 projection of a (v, p) function onto the dG space.
  std::vector<double> project(const std::function<FieldPair(double)>& fn) const;

  /// Load vector (b, phi_i) for a source b = (f, g) given pointwise.
  void load(const std::function<FieldPair(double)>& source,
            std::span<double> out) const;

  /// Evaluates the discrete (v, p) at x.
  FieldPair evaluate(std::span<const double> u, double x) const;

  /// 0.5 * (||sqrt(rho) v||^2 + ||p / sqrt(kappa)||^2).
  double energy(std::span<const double> u) const;

  /// Integral of v^2 + p^2 over the union of cells inside [lo, hi]. Both
  /// bounds must lie on cell faces.
  double squared_norm_on(std::span<const double> u, double lo, double hi) const;

  /// L2 distance to an exact solution, by Gauss quadrature with `points`
  /// nodes per cell.
  double l2_error(std::span<const double> u,
                  const std::function<FieldPair(double)>& exact,
                  int points = 6) const;

 private:
  // Block-tridiagonal storage: for each cell the couplings to the left
  // neighbour, itself and the right neighbour, each block_ x block_.
  double& block_entry(int cell, int which, int r, int c) {
    return blocks_[((static_cast<std::size_t>(cell) * 3 + which) * block_ + r) * block_ + c];
  }
  double block_entry(int cell, int which, int r, int c) const {
    return blocks_[((static_cast<std::size_t>(cell) * 3 + which) * block_ + r) * block_ + c];
  }
  void assemble();

  std::vector<double> rho_;
  double kappa_;
  int degree_;
  double length_;
  int cells_;
  int block_;
  double h_;
  std::vector<double> mass_;
  std::vector<double> blocks_;
};

/// Implicit midpoint rule (M + tau/2 A) u_n = (M - tau/2 A) u_{n-1} + tau b_{n-1/2}
/// with the left-hand matrix factored once as a band LU.
class ImplicitMidpoint {
 public:
  ImplicitMidpoint(const AcousticDG1D& dg, double tau);

  double tau() const noexcept { return tau_; }

  /// Advances u by one step; `load_mid` is the load vector at t_{n-1/2}
  /// (empty span for a homogeneous step).
  void step(std::span<double> u, std::span<const double> load_mid);

 private:
  const AcousticDG1D& dg_;
  double tau_;
  int kl_;
  int ldab_;
  std::vector<double> band_;
  std::vector<int> pivots_;
  std::vector<double> rhs_;
  std::vector<double> work_;
};

/// Legendre polynomial P_n at xi in [-1, 1].
double legendre(int n, double xi);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int points, std::vector<double>& nodes,
                    std::vector<double>& weights);

}  // namespace bmlmc
