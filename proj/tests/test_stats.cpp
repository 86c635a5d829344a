#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "bmlmc/stats.hpp"

using namespace bmlmc;

namespace {

LevelAccumulator of_values(const std::vector<double>& ys, int level = 1) {
  LevelAccumulator acc;
  acc.level = level;
  for (double y : ys) acc = accumulate(acc, y, 0.0, 1.0);
  return acc;
}

struct Batch {
  double mean_q = 0, s2_q = 0, mean_y = 0, s2_y = 0, total_cost = 0;
};

// Two-pass statistics in long double.
Batch batch(const std::vector<double>& qf, const std::vector<double>& qc,
            const std::vector<double>& cost) {
  const std::size_t n = qf.size();
  long double sq = 0, sy = 0, sc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sq += qf[i];
    sy += static_cast<long double>(qf[i]) - qc[i];
    sc += cost[i];
  }
  const long double mq = sq / n, my = sy / n;
  long double vq = 0, vy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    vq += (qf[i] - mq) * (qf[i] - mq);
    const long double dy = static_cast<long double>(qf[i]) - qc[i] - my;
    vy += dy * dy;
  }
  return {static_cast<double>(mq), static_cast<double>(vq), static_cast<double>(my),
          static_cast<double>(vy), static_cast<double>(sc)};
}

bool close(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300});
}

struct Samples {
  std::vector<double> qf, qc, cost;
};

Samples random_samples(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> e(-3.0, 6.0);
  Samples s;
  for (std::size_t i = 0; i < n; ++i) {
    s.qf.push_back(std::pow(10.0, e(rng)));
    s.qc.push_back(std::pow(10.0, e(rng)));
    s.cost.push_back(std::pow(10.0, e(rng) / 3.0));
  }
  return s;
}

LevelAccumulator accumulate_range(const Samples& s, std::size_t lo, std::size_t hi,
                                  int level = 1) {
  LevelAccumulator acc;
  acc.level = level;
  for (std::size_t i = lo; i < hi; ++i) acc = accumulate(acc, s.qf[i], s.qc[i], s.cost[i]);
  return acc;
}

}  // namespace

TEST_SUITE("stats") {
  TEST_CASE("sample variance of small data sets") {
    CHECK(sample_variance_y(of_values({1.0, 3.0})) == doctest::Approx(2.0));
    CHECK(sample_variance_y(of_values({0.7, 0.7, 0.7})) == 0.0);
    CHECK(sample_variance_y(of_values({1.0, 2.0, 3.0, 4.0})) == doctest::Approx(5.0 / 3.0));
  }

  TEST_CASE("variance of fewer than two samples is undefined") {
    CHECK_THROWS_AS(sample_variance_y(of_values({})), UndefinedVariance);
    CHECK_THROWS_AS(sample_variance_q(of_values({1.0})), UndefinedVariance);
  }

  TEST_CASE("accumulate tracks Q, Y and cost separately") {
    LevelAccumulator acc;
    acc.level = 2;
    acc = accumulate(acc, 5.0, 4.0, 2.0);
    acc = accumulate(acc, 7.0, 4.0, 4.0);
    CHECK(acc.count == 2);
    CHECK(acc.mean_q == doctest::Approx(6.0));
    CHECK(acc.mean_y == doctest::Approx(2.0));
    CHECK(sample_variance_q(acc) == doctest::Approx(2.0));
    CHECK(sample_variance_y(acc) == doctest::Approx(2.0));
    CHECK(acc.mean_cost == doctest::Approx(3.0));
    CHECK(acc.total_cost == doctest::Approx(6.0));
  }

  TEST_CASE("invalid samples are rejected") {
    LevelAccumulator l0;
    CHECK_THROWS_AS(accumulate(l0, 1.0, 0.5, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(accumulate(l0, 1.0, 0.0, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(accumulate(l0, std::numeric_limits<double>::quiet_NaN(), 0.0, 1.0),
                    NonFiniteSample);
    LevelAccumulator l1;
    l1.level = 1;
    CHECK_THROWS_AS(accumulate(l1, 1.0, std::numeric_limits<double>::infinity(), 1.0),
                    NonFiniteSample);
  }

  TEST_CASE("merge of random partitions equals two-pass batch") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 25; ++trial) {
      const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 20000)(rng);
      const Samples s = random_samples(n, 100 + trial);
      std::vector<std::size_t> cuts{0, n};
      const int groups = std::uniform_int_distribution<int>(1, 40)(rng);
      for (int g = 1; g < groups; ++g) {
        cuts.push_back(std::uniform_int_distribution<std::size_t>(0, n)(rng));
      }
      std::sort(cuts.begin(), cuts.end());
      LevelAccumulator merged;
      merged.level = 1;
      for (std::size_t g = 0; g + 1 < cuts.size(); ++g) {
        merged = merge(merged, accumulate_range(s, cuts[g], cuts[g + 1]));
      }
      const Batch b = batch(s.qf, s.qc, s.cost);
      CHECK(merged.count == n);
      CHECK(close(merged.mean_q, b.mean_q, 1e-12));
      CHECK(close(merged.mean_y, b.mean_y, 1e-12));
      CHECK(close(merged.total_cost, b.total_cost, 1e-12));
      CHECK(close(merged.s2_q, b.s2_q, 1e-10));
      CHECK(close(merged.s2_y, b.s2_y, 1e-10));
    }
  }

  TEST_CASE("merge is associative and commutative") {
    const Samples s = random_samples(3000, 9);
    const auto a = accumulate_range(s, 0, 700);
    const auto b = accumulate_range(s, 700, 1900);
    const auto c = accumulate_range(s, 1900, 3000);
    const auto left = merge(merge(a, b), c);
    const auto right = merge(a, merge(b, c));
    const auto swapped = merge(c, merge(b, a));
    for (const auto* x : {&right, &swapped}) {
      CHECK(x->count == left.count);
      CHECK(close(x->mean_q, left.mean_q, 1e-10));
      CHECK(close(x->s2_q, left.s2_q, 1e-10));
      CHECK(close(x->mean_y, left.mean_y, 1e-10));
      CHECK(close(x->s2_y, left.s2_y, 1e-10));
      CHECK(close(x->mean_cost, left.mean_cost, 1e-10));
    }
  }

  TEST_CASE("empty accumulator is a two-sided identity") {
    const Samples s = random_samples(50, 4);
    const auto a = accumulate_range(s, 0, 50);
    LevelAccumulator empty;
    empty.level = 1;
    CHECK(merge(a, empty) == a);
    CHECK(merge(empty, a) == a);
  }

  TEST_CASE("counts add exactly") {
    const Samples s = random_samples(100, 5);
    const auto a = accumulate_range(s, 0, 37);
    const auto b = accumulate_range(s, 37, 100);
    CHECK(merge(a, b).count == 100);
  }

  TEST_CASE("merging different levels is an error") {
    const auto a = of_values({1.0, 2.0}, 1);
    const auto b = of_values({1.0, 2.0}, 2);
    CHECK_THROWS_AS(merge(a, b), std::invalid_argument);
  }

  TEST_CASE("tree_reduce is deterministic and matches sequential merge") {
    const Samples s = random_samples(5000, 6);
    std::vector<LevelAccumulator> parts;
    for (std::size_t i = 0; i < 5000; i += 333) {
      parts.push_back(accumulate_range(s, i, std::min<std::size_t>(i + 333, 5000)));
    }
    const auto t1 = tree_reduce(parts);
    const auto t2 = tree_reduce(parts);
    CHECK(t1 == t2);
    LevelAccumulator seq;
    seq.level = 1;
    for (const auto& p : parts) seq = merge(seq, p);
    CHECK(t1.count == seq.count);
    CHECK(close(t1.mean_q, seq.mean_q, 1e-12));
    CHECK(close(t1.s2_y, seq.s2_y, 1e-10));
  }

  TEST_CASE("merge_datasets") {
    const Samples s = random_samples(400, 7);
    MlmcDataset a, b;
    a.at_level(0) = accumulate_range(Samples{s.qf, std::vector<double>(400, 0.0), s.cost}, 0, 200, 0);
    a.at_level(1) = accumulate_range(s, 0, 100);
    b.at_level(0) = accumulate_range(Samples{s.qf, std::vector<double>(400, 0.0), s.cost}, 200, 400, 0);
    b.at_level(1) = accumulate_range(s, 100, 200);
    b.at_level(2) = accumulate_range(s, 200, 260, 2);

    SUBCASE("empty old dataset yields the delta") {
      const MlmcDataset m = merge_datasets(MlmcDataset{}, b);
      CHECK(m.levels == b.levels);
    }
    SUBCASE("two rounds equal batch statistics and grow the level range") {
      const MlmcDataset m = merge_datasets(a, b);
      CHECK(m.round == a.round + 1);
      REQUIRE(m.num_levels() == 3);
      const auto l1 = accumulate_range(s, 0, 200);
      CHECK(m[1].count == 200);
      CHECK(close(m[1].mean_y, l1.mean_y, 1e-12));
      CHECK(close(m[1].s2_y, l1.s2_y, 1e-10));
      CHECK(m[2] == b[2]);
      const double est = m[0].mean_y + m[1].mean_y + m[2].mean_y;
      CHECK(m.estimate() == doctest::Approx(est));
    }
  }

  TEST_CASE("checkpoints restore bit-exactly") {
    const Samples s = random_samples(300, 8);
    MlmcDataset d;
    d.at_level(0) = accumulate_range(Samples{s.qf, std::vector<double>(300, 0.0), s.cost}, 0, 300, 0);
    d.at_level(1) = accumulate_range(s, 0, 150);
    d.round = 4;
    const nlohmann::json j = d;
    const MlmcDataset back = nlohmann::json::parse(j.dump()).get<MlmcDataset>();
    CHECK(back == d);

    for (double x : {0.1, -3.5e-300, 1e308, 0.0, 2.0 / 3.0}) {
      CHECK(parse_hexfloat(hexfloat(x)) == x);
    }
    CHECK_THROWS(parse_hexfloat("zebra"));
  }
}
