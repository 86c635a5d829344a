#include "bmlmc/models/wave1d.hpp"

#include <cmath>
#include <stdexcept>

#include "bmlmc/stats.hpp"

namespace bmlmc {

namespace {

bool all_finite(std::span<const double> u) {
  for (double x : u) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

void Wave1DSpec::validate() const {
  density.validate();
  if (!(final_time > 0)) throw std::invalid_argument("final_time must be > 0");
  if (!(kappa > 0)) throw std::invalid_argument("kappa must be > 0");
  if (degree < 0 || degree > 2) throw std::invalid_argument("dG degree must be 0, 1 or 2");
  if (!(cfl_ratio > 0)) throw std::invalid_argument("cfl_ratio must be > 0");
  if (!(h0 > 0 && h0 <= 1)) throw std::invalid_argument("h0 must lie in (0, 1]");
  const double n0 = 1.0 / h0;
  if (std::abs(n0 - std::round(n0)) > 1e-9) {
    throw std::invalid_argument("h0 must divide the unit interval evenly");
  }
  if (!(source_width > 0)) throw std::invalid_argument("source_width must be > 0");
  if (!(ricker_a > 0)) throw std::invalid_argument("ricker_a must be > 0");
  if (!(0 <= roi_lo && roi_lo < roi_hi && roi_hi <= 1)) {
    throw std::invalid_argument("region of interest must satisfy 0 <= lo < hi <= 1");
  }
  if (max_level < 0 || max_level > 16) throw std::invalid_argument("max_level must lie in [0, 16]");
  if (!(cost_unit > 0)) throw std::invalid_argument("cost_unit must be > 0");
}

int Wave1DSpec::cells(int level) const {
  return static_cast<int>(std::lround(1.0 / h0)) << level;
}

int Wave1DSpec::steps(int level) const {
  const double tau = cfl_ratio / cells(level);
  return static_cast<int>(std::ceil(final_time / tau - 1e-9));
}

double ricker(double t, double a, double amplitude) {
  const double r = t / a;
  return amplitude * (1.0 - r * r) * std::exp(-0.5 * r * r);
}

namespace {

// Integral of exp(-1 / (1 - r^2)) over (-1, 1).
double bump_mass() {
  static const double mass = [] {
    std::vector<double> nodes, weights;
    gauss_legendre(200, nodes, weights);
    double m = 0.0;
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      m += weights[q] * std::exp(-1.0 / (1.0 - nodes[q] * nodes[q]));
    }
    return m;
  }();
  return mass;
}

}  // namespace

SourceBump::SourceBump(double center, double width)
    : center_(center), width_(width), scale_(1.0 / (bump_mass() * width)) {}

double SourceBump::operator()(double x) const {
  const double r = (x - center_) / width_;
  if (std::abs(r) >= 1.0) return 0.0;
  return scale_ * std::exp(-1.0 / (1.0 - r * r));
}

WaveSolution solve_wave(
    const Wave1DSpec& spec, const std::vector<double>& rho,
    const std::function<void(int, double, std::span<const double>)>& snapshot) {
  AcousticDG1D dg(rho, spec.kappa, spec.degree);
  const int n_steps =
      static_cast<int>(std::ceil(spec.final_time / (spec.cfl_ratio * dg.h()) - 1e-9));
  const double tau = spec.final_time / n_steps;
  ImplicitMidpoint stepper(dg, tau);

  const SourceBump bump(spec.source_center, spec.source_width);
  std::vector<double> spatial(dg.dofs());
  dg.load([&](double x) { return FieldPair{0.0, bump(x)}; }, spatial);

  std::vector<double> u(dg.dofs(), 0.0), load(dg.dofs());
  for (int n = 1; n <= n_steps; ++n) {
    const double g1 = ricker((n - 0.5) * tau, spec.ricker_a, spec.ricker_amplitude);
    for (std::size_t i = 0; i < load.size(); ++i) load[i] = g1 * spatial[i];
    stepper.step(u, load);
    if ((n % 32 == 0 || n == n_steps) && !all_finite(u)) {
      throw std::runtime_error("non-finite state at step " + std::to_string(n));
    }
    if (snapshot) snapshot(n, n * tau, u);
  }

  WaveSolution out;
  out.qoi = std::sqrt(dg.squared_norm_on(u, spec.roi_lo, spec.roi_hi));
  out.energy = dg.energy(u);
  out.steps = n_steps;
  out.state = std::move(u);
  return out;
}

std::vector<double> restrict_pairs(const std::vector<double>& fine) {
  if (fine.size() % 2 != 0) throw std::invalid_argument("restrict_pairs: odd cell count");
  std::vector<double> coarse(fine.size() / 2);
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    coarse[i] = 0.5 * (fine[2 * i] + fine[2 * i + 1]);
  }
  return coarse;
}

Wave1DModel::Wave1DModel(Wave1DSpec spec) : spec_(spec) {
  spec_.validate();
  samplers_.reserve(spec_.max_level + 1);
  for (int l = 0; l <= spec_.max_level; ++l) {
    samplers_.emplace_back(spec_.density, spec_.cells(l));
  }
}

Wave1DModel::~Wave1DModel() = default;

ProblemDescriptor Wave1DModel::descriptor() const { return {1, spec_.h0}; }

std::optional<double> Wave1DModel::modeled_cost(int level) const {
  auto work = [&](int l) {
    return static_cast<double>(spec_.steps(l)) * spec_.cells(l) * (spec_.degree + 1);
  };
  double w = work(level);
  if (level > 0) w += work(level - 1);
  return spec_.cost_unit * w;
}

std::vector<double> Wave1DModel::density(int level, std::uint64_t seed) const {
  if (level < 0 || level > spec_.max_level) {
    throw std::invalid_argument("wave1d: level " + std::to_string(level) +
                                " exceeds max_level");
  }
  return samplers_[level].sample(seed);
}

SampleValue Wave1DModel::evaluate(int level, std::uint64_t seed) const {
  const auto rho = density(level, seed);
  SampleValue out;
  try {
    out.q_fine = solve_wave(spec_, rho).qoi;
    if (level > 0) out.q_coarse = solve_wave(spec_, restrict_pairs(rho)).qoi;
  } catch (const std::runtime_error& e) {
    throw NonFiniteSample(level, 0, seed, std::string("wave1d diverged: ") + e.what());
  }
  out.cost = *modeled_cost(level);
  return out;
}

}  // namespace bmlmc
