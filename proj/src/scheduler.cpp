#include "bmlmc/scheduler.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <ctime>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "bmlmc/rng.hpp"

namespace bmlmc {

namespace {

// Samples are reduced in blocks of consecutive ordinals. The block size is a
// constant so the reduction tree never depends on the worker count.
constexpr std::uint64_t kBlockSize = 4096;
constexpr std::uint64_t kChunkSize = 16 * kBlockSize;

LevelCost price_level(const LevelSchedule& ls, double cost, int p,
                      double sigma) {
  LevelCost lc;
  lc.level = ls.level;
  lc.samples = ls.count;
  lc.sample_cost = static_cast<double>(ls.count) * cost;
  for (const auto& b : ls.batches) {
    const double t = group_time(cost, b.k, sigma);
    const double waves = static_cast<double>(b.waves);
    const int used = b.groups << b.k;
    lc.waves += b.waves;
    lc.span += waves * t;
    lc.busy += waves * (used * t);
    lc.idle += waves * ((p - used) * t);
  }
  lc.comm = lc.busy - lc.sample_cost;
  return lc;
}

// Locates sample `offset` (0-based within the level's round) in its wave.
struct WavePosition {
  std::uint64_t wave;
  int group;
  int k;
  int groups;
};

WavePosition locate(const LevelSchedule& ls, std::uint64_t offset) {
  std::uint64_t wave_base = 0;
  for (const auto& b : ls.batches) {
    if (offset < b.samples()) {
      return {wave_base + offset / b.groups, static_cast<int>(offset % b.groups), b.k,
              b.groups};
    }
    offset -= b.samples();
    wave_base += b.waves;
  }
  throw std::logic_error("sample offset outside the level schedule");
}

// Streams per-sample costs wave by wave for levels whose costs vary.
class WaveCostStream {
 public:
  WaveCostStream(const LevelSchedule& ls, int p, double sigma)
      : ls_(ls), p_(p), sigma_(sigma) {
    out_.level = ls.level;
    out_.samples = ls.count;
  }

  void add(std::uint64_t offset, double cost) {
    const WavePosition pos = locate(ls_, offset);
    if (pos.wave != wave_) close_wave();
    wave_ = pos.wave;
    open_ = true;
    const double t = group_time(cost, pos.k, sigma_);
    max_t_ = std::max(max_t_, t);
    busy_ += (1 << pos.k) * t;
    out_.sample_cost += cost;
    if (!uniform_checked_) {
      first_cost_ = cost;
      uniform_checked_ = true;
    } else if (cost != first_cost_) {
      uniform_ = false;
    }
  }

  LevelCost finish() {
    close_wave();
    if (uniform_ && uniform_checked_) {
      // Identical costs: use the closed form so the record matches the price.
      return price_level(ls_, first_cost_, p_, sigma_);
    }
    out_.comm = out_.busy - out_.sample_cost;
    return out_;
  }

 private:
  void close_wave() {
    if (!open_) return;
    out_.waves += 1;
    out_.span += max_t_;
    out_.busy += busy_;
    out_.idle += p_ * max_t_ - busy_;
    max_t_ = 0.0;
    busy_ = 0.0;
    open_ = false;
  }

  const LevelSchedule& ls_;
  int p_;
  double sigma_;
  LevelCost out_;
  std::uint64_t wave_ = 0;
  bool open_ = false;
  double max_t_ = 0.0;
  double busy_ = 0.0;
  bool uniform_checked_ = false;
  bool uniform_ = true;
  double first_cost_ = 0.0;
};

double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

// Evaluates samples [begin, end) of a level into `out`, on `workers` threads.
void evaluate_chunk(const SampleProblem& model, int level, std::uint64_t master,
                    std::uint64_t first_ordinal, std::uint64_t begin,
                    std::uint64_t end, int workers, bool measure,
                    std::vector<SampleValue>& out) {
  const std::uint64_t n = end - begin;
  out.resize(n);
  std::atomic<std::uint64_t> next{0};
  std::mutex error_mutex;
  std::uint64_t error_index = std::numeric_limits<std::uint64_t>::max();
  std::exception_ptr error;

  auto work = [&] {
    for (;;) {
      const std::uint64_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) return;
      const std::uint64_t ordinal = first_ordinal + begin + i;
      try {
        const double start = measure ? thread_cpu_seconds() : 0.0;
        out[i] = model.evaluate(level, sample_seed(master, level, ordinal));
        if (measure) out[i].cost = thread_cpu_seconds() - start;
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
        next.store(n, std::memory_order_relaxed);
        return;
      }
    }
  };

  const int threads = static_cast<int>(std::min<std::uint64_t>(std::max(workers, 1), n));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads - 1);
    for (int t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
  }
  if (error) {
    const std::uint64_t ordinal = first_ordinal + begin + error_index;
    const std::uint64_t seed = sample_seed(master, level, ordinal);
    try {
      std::rethrow_exception(error);
    } catch (const NonFiniteSample& e) {
      throw NonFiniteSample(level, ordinal, seed, e.what());
    } catch (const std::exception& e) {
      throw SampleFailure(level, ordinal, seed, e.what());
    }
  }
}

}  // namespace

ProcessorSet::ProcessorSet(int size) : size_(size) {
  if (size < 1 || !std::has_single_bit(static_cast<unsigned>(size))) {
    throw std::invalid_argument("processor count must be a positive power of two");
  }
}

int split_exponent(int p_size, std::uint64_t m) {
  if (m == 0) throw std::invalid_argument("split_exponent: m must be >= 1");
  if (m >= static_cast<std::uint64_t>(p_size)) return 0;
  const std::uint64_t q = static_cast<std::uint64_t>(p_size) / m;  // floor(p/m) >= 1
  return std::bit_width(q) - 1;
}

std::uint64_t LevelSchedule::wave_count() const noexcept {
  std::uint64_t w = 0;
  for (const auto& b : batches) w += b.waves;
  return w;
}

std::uint64_t SchedulePlan::total_samples() const noexcept {
  std::uint64_t s = 0;
  for (const auto& l : levels) s += l.count;
  return s;
}

std::vector<std::vector<SampleGroup>> SchedulePlan::expand(std::size_t index) const {
  const LevelSchedule& ls = levels.at(index);
  std::vector<std::vector<SampleGroup>> waves;
  std::uint64_t ordinal = ls.first_ordinal;
  for (const auto& b : ls.batches) {
    const int units = 1 << b.k;
    for (std::uint64_t w = 0; w < b.waves; ++w) {
      auto& wave = waves.emplace_back();
      for (int g = 0; g < b.groups; ++g, ++ordinal) {
        wave.push_back({g, g * units, units, ls.level, ordinal,
                        sample_seed(master_seed, ls.level, ordinal)});
      }
    }
  }
  return waves;
}

SchedulePlan build_plan(int p_size, const std::vector<std::uint64_t>& delta_m,
                        const std::vector<std::uint64_t>& first_ordinal,
                        std::uint64_t master_seed) {
  const ProcessorSet procs(p_size);
  SchedulePlan plan;
  plan.p_size = procs.size();
  plan.master_seed = master_seed;
  for (int l = static_cast<int>(delta_m.size()) - 1; l >= 0; --l) {
    std::uint64_t remaining = delta_m[l];
    if (remaining == 0) continue;
    LevelSchedule ls;
    ls.level = l;
    ls.count = remaining;
    ls.first_ordinal = l < static_cast<int>(first_ordinal.size()) ? first_ordinal[l] : 0;
    const auto p = static_cast<std::uint64_t>(p_size);
    if (remaining >= p) {
      // k = 0 while the residual fills all units.
      ls.batches.push_back({0, p_size, remaining / p});
      remaining %= p;
    }
    if (remaining > 0) {
      // The residual wave regroups onto larger groups; k is recomputed from it
      // and the whole residual fits in a single wave.
      const int k = split_exponent(p_size, remaining);
      ls.batches.push_back({k, static_cast<int>(remaining), 1});
    }
    plan.levels.push_back(std::move(ls));
  }
  return plan;
}

double group_time(double cost, int k, double sigma_eff) {
  if (k == 0) return cost;
  return cost / std::exp2(k * sigma_eff);
}

double CostRecord::span() const noexcept {
  double s = 0.0;
  for (const auto& l : levels) s += l.span;
  return s;
}
double CostRecord::busy() const noexcept {
  double s = 0.0;
  for (const auto& l : levels) s += l.busy;
  return s;
}
double CostRecord::idle() const noexcept {
  double s = 0.0;
  for (const auto& l : levels) s += l.idle;
  return s;
}
double CostRecord::comm() const noexcept {
  double s = 0.0;
  for (const auto& l : levels) s += l.comm;
  return s;
}
double CostRecord::sample_cost() const noexcept {
  double s = 0.0;
  for (const auto& l : levels) s += l.sample_cost;
  return s;
}
double CostRecord::consumed() const noexcept { return p_size * (span() + sync); }

CostRecord price_plan(const SchedulePlan& plan, const std::function<double(int)>& cost,
                      const SchedulerOptions& opts) {
  CostRecord rec;
  rec.p_size = plan.p_size;
  rec.sync = opts.sync_time;
  for (const auto& ls : plan.levels) {
    rec.levels.push_back(price_level(ls, cost(ls.level), plan.p_size, opts.sigma_eff));
  }
  return rec;
}

SampleFailure::SampleFailure(int level, std::uint64_t ordinal, std::uint64_t seed,
                             const std::string& what)
    : std::runtime_error("sample failed (level " + std::to_string(level) +
                         ", ordinal " + std::to_string(ordinal) + ", seed " +
                         std::to_string(seed) + "): " + what),
      level_(level),
      ordinal_(ordinal),
      seed_(seed) {}

ExecutionResult execute(const SchedulePlan& plan, const SampleProblem& model,
                        const SchedulerOptions& opts, int round,
                        const TraceSink& trace) {
  if (opts.workers < 1) throw std::invalid_argument("workers must be >= 1");
  ExecutionResult result;
  result.cost.p_size = plan.p_size;
  result.cost.sync = opts.sync_time;
  result.delta.round = round;
  if (plan.empty()) return result;

  int top = 0;
  for (const auto& ls : plan.levels) top = std::max(top, ls.level);
  result.delta.at_level(top);

  std::vector<SampleValue> buffer;
  for (const auto& ls : plan.levels) {
    WaveCostStream costs(ls, plan.p_size, opts.sigma_eff);
    std::vector<LevelAccumulator> blocks;
    LevelAccumulator block;
    block.level = ls.level;

    for (std::uint64_t begin = 0; begin < ls.count; begin += kChunkSize) {
      const std::uint64_t end = std::min(ls.count, begin + kChunkSize);
      evaluate_chunk(model, ls.level, plan.master_seed, ls.first_ordinal, begin, end,
                     opts.workers, opts.measure_cost, buffer);
      for (std::uint64_t i = begin; i < end; ++i) {
        const SampleValue& s = buffer[i - begin];
        const std::uint64_t ordinal = ls.first_ordinal + i;
        try {
          block = accumulate(block, s.q_fine, s.q_coarse, s.cost);
        } catch (const NonFiniteSample& e) {
          throw NonFiniteSample(ls.level, ordinal,
                                sample_seed(plan.master_seed, ls.level, ordinal), e.what());
        } catch (const std::exception& e) {
          throw SampleFailure(ls.level, ordinal,
                              sample_seed(plan.master_seed, ls.level, ordinal), e.what());
        }
        costs.add(i, s.cost);
        if (trace) {
          const WavePosition pos = locate(ls, i);
          trace({round, ls.level, pos.wave, pos.group, 1 << pos.k, ordinal,
                 sample_seed(plan.master_seed, ls.level, ordinal), s.cost});
        }
        if ((i + 1) % kBlockSize == 0) {
          blocks.push_back(block);
          block = LevelAccumulator{};
          block.level = ls.level;
        }
      }
    }
    if (!block.empty()) blocks.push_back(block);
    result.delta.at_level(ls.level) = tree_reduce(blocks);
    result.cost.levels.push_back(costs.finish());
  }
  return result;
}

namespace {

struct LinearFit {
  double s = 0.0, e = 0.0, residual = 0.0;
};

// Non-negative least squares of y ~ s + e * b over the active sets of a
// two-column problem.
LinearFit nnls_two(const std::vector<double>& y, const std::vector<double>& b) {
  const double n = static_cast<double>(y.size());
  auto residual = [&](double s, double e) {
    double r = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = y[i] - s - e * b[i];
      r += d * d;
    }
    return r;
  };
  double sy = 0, sb = 0, sbb = 0, sby = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sy += y[i];
    sb += b[i];
    sbb += b[i] * b[i];
    sby += b[i] * y[i];
  }
  LinearFit best{0.0, 0.0, residual(0.0, 0.0)};
  auto consider = [&](double s, double e) {
    if (s < 0 || e < 0 || !std::isfinite(s) || !std::isfinite(e)) return;
    const double r = residual(s, e);
    if (r < best.residual) best = {s, e, r};
  };
  const double det = n * sbb - sb * sb;
  if (det > 0) consider((sbb * sy - sb * sby) / det, (n * sby - sb * sy) / det);
  consider(sy / n, 0.0);
  if (sbb > 0) consider(0.0, sby / sbb);
  return best;
}

}  // namespace

ScalingFit fit_weak_scaling(const std::vector<ScalingPoint>& points) {
  if (points.size() < 3) {
    throw std::invalid_argument("weak-scaling fit needs at least three points");
  }
  std::vector<double> ks, y;
  for (const auto& p : points) {
    if (!std::isfinite(p.k) || !std::isfinite(p.rmse)) {
      throw std::invalid_argument("weak-scaling points must be finite");
    }
    ks.push_back(p.k);
    y.push_back(p.rmse);
  }
  auto sorted = ks;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("weak-scaling points need distinct k");
  }

  ScalingFit out;
  const double y0 = y.front();
  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y0; })) {
    out.err_s = y0;
    out.err_p = 0.0;
    out.delta = std::numeric_limits<double>::quiet_NaN();
    out.delta_defined = false;
    return out;
  }

  std::vector<double> basis(ks.size());
  auto profile = [&](double delta) {
    for (std::size_t i = 0; i < ks.size(); ++i) basis[i] = std::exp2(ks[i] * delta);
    return nnls_two(y, basis);
  };

  // Coarse grid over delta, then golden-section refinement of the bracket.
  constexpr double kLo = 1e-4, kHi = 4.0;
  constexpr int kGrid = 400;
  int best_i = 0;
  double best_r = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kGrid; ++i) {
    const double r = profile(kLo + (kHi - kLo) * i / kGrid).residual;
    if (r < best_r) {
      best_r = r;
      best_i = i;
    }
  }
  double a = kLo + (kHi - kLo) * std::max(best_i - 1, 0) / kGrid;
  double b = kLo + (kHi - kLo) * std::min(best_i + 1, kGrid) / kGrid;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = profile(c).residual, fd = profile(d).residual;
  for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = profile(c).residual;
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = profile(d).residual;
    }
  }
  const double delta = 0.5 * (a + b);
  const LinearFit lin = profile(delta);
  out.err_s = lin.s;
  out.err_p = lin.e;
  out.delta = delta;
  out.residual = lin.residual;
  out.delta_defined = lin.e > 0.0;
  return out;
}

}  // namespace bmlmc
