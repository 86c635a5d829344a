#include "bmlmc/stats.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include <nlohmann/json.hpp>

namespace bmlmc {

NonFiniteSample::NonFiniteSample(int level, std::uint64_t ordinal,
                                 std::uint64_t seed, const std::string& what)
    : std::runtime_error(what + " (level " + std::to_string(level) +
                         ", sample " + std::to_string(ordinal) + ", seed " +
                         std::to_string(seed) + ")"),
      level_(level),
      ordinal_(ordinal),
      seed_(seed) {}

LevelAccumulator accumulate(LevelAccumulator acc, double q_fine,
                            double q_coarse, double cost) {
  if (!std::isfinite(q_fine) || !std::isfinite(q_coarse) ||
      !std::isfinite(cost)) {
    throw NonFiniteSample(acc.level, acc.count, 0, "non-finite sample value");
  }
  if (cost < 0.0) throw std::invalid_argument("accumulate: negative cost");
  if (acc.level == 0 && q_coarse != 0.0) {
    throw std::invalid_argument("accumulate: level 0 requires q_coarse == 0");
  }

  const double y = q_fine - q_coarse;
  acc.count += 1;
  const double n = static_cast<double>(acc.count);

  const double dq = q_fine - acc.mean_q;
  acc.mean_q += dq / n;
  acc.s2_q += dq * (q_fine - acc.mean_q);

  const double dy = y - acc.mean_y;
  acc.mean_y += dy / n;
  acc.s2_y += dy * (y - acc.mean_y);

  acc.mean_cost += (cost - acc.mean_cost) / n;
  acc.total_cost += cost;
  return acc;
}

LevelAccumulator merge(const LevelAccumulator& a, const LevelAccumulator& b) {
  if (a.level != b.level) {
    throw std::invalid_argument("merge: level mismatch (" +
                                std::to_string(a.level) + " vs " +
                                std::to_string(b.level) + ")");
  }
  if (b.count == 0) return a;
  if (a.count == 0) return b;

  const double na = static_cast<double>(a.count);
  const double nb = static_cast<double>(b.count);
  LevelAccumulator ab;
  ab.level = a.level;
  ab.count = a.count + b.count;
  const double n = static_cast<double>(ab.count);
  const double wb = nb / n;
  const double cross = na * nb / n;

  const double dq = b.mean_q - a.mean_q;
  ab.mean_q = a.mean_q + wb * dq;
  ab.s2_q = a.s2_q + b.s2_q + cross * dq * dq;

  const double dy = b.mean_y - a.mean_y;
  ab.mean_y = a.mean_y + wb * dy;
  ab.s2_y = a.s2_y + b.s2_y + cross * dy * dy;

  ab.mean_cost = a.mean_cost + wb * (b.mean_cost - a.mean_cost);
  ab.total_cost = a.total_cost + b.total_cost;
  return ab;
}

double sample_variance_y(const LevelAccumulator& acc) {
  if (acc.count < 2) {
    throw UndefinedVariance("level " + std::to_string(acc.level) +
                            " has fewer than 2 samples");
  }
  return acc.s2_y / static_cast<double>(acc.count - 1);
}

double sample_variance_q(const LevelAccumulator& acc) {
  if (acc.count < 2) {
    throw UndefinedVariance("level " + std::to_string(acc.level) +
                            " has fewer than 2 samples");
  }
  return acc.s2_q / static_cast<double>(acc.count - 1);
}

LevelAccumulator& MlmcDataset::at_level(int level) {
  if (level < 0) throw std::out_of_range("negative level");
  while (static_cast<int>(levels.size()) <= level) {
    LevelAccumulator acc;
    acc.level = static_cast<int>(levels.size());
    levels.push_back(acc);
  }
  return levels[level];
}

double MlmcDataset::estimate() const {
  double sum = 0.0;
  for (const auto& acc : levels) sum += acc.mean_y;
  return sum;
}

double MlmcDataset::total_cost() const {
  double sum = 0.0;
  for (const auto& acc : levels) sum += acc.total_cost;
  return sum;
}

MlmcDataset merge_datasets(const MlmcDataset& old, const MlmcDataset& delta) {
  MlmcDataset out = old;
  for (const auto& acc : delta.levels) {
    auto& target = out.at_level(acc.level);
    target = merge(target, acc);
  }
  out.round = old.round + 1;
  return out;
}

LevelAccumulator tree_reduce(std::span<const LevelAccumulator> parts) {
  if (parts.empty()) return {};
  if (parts.size() == 1) return parts.front();
  const std::size_t half = parts.size() / 2;
  return merge(tree_reduce(parts.first(half)), tree_reduce(parts.subspan(half)));
}

std::string hexfloat(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::hex);
  if (ec != std::errc{}) throw std::runtime_error("hexfloat: conversion failed");
  return std::string(buf, ptr);
}

double parse_hexfloat(const std::string& s) {
  double x = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  bool negative = false;
  if (first != last && *first == '-') {
    negative = true;
    ++first;
  }
  auto [ptr, ec] = std::from_chars(first, last, x, std::chars_format::hex);
  if (ec != std::errc{} || ptr != last) {
    throw std::invalid_argument("malformed hex-float '" + s + "'");
  }
  return negative ? -x : x;
}

void to_json(nlohmann::json& j, const LevelAccumulator& acc) {
  j = nlohmann::json{{"level", acc.level},
                     {"count", acc.count},
                     {"mean_q", hexfloat(acc.mean_q)},
                     {"s2_q", hexfloat(acc.s2_q)},
                     {"mean_y", hexfloat(acc.mean_y)},
                     {"s2_y", hexfloat(acc.s2_y)},
                     {"mean_cost", hexfloat(acc.mean_cost)},
                     {"total_cost", hexfloat(acc.total_cost)}};
}

void from_json(const nlohmann::json& j, LevelAccumulator& acc) {
  acc.level = j.at("level").get<int>();
  acc.count = j.at("count").get<std::uint64_t>();
  acc.mean_q = parse_hexfloat(j.at("mean_q").get<std::string>());
  acc.s2_q = parse_hexfloat(j.at("s2_q").get<std::string>());
  acc.mean_y = parse_hexfloat(j.at("mean_y").get<std::string>());
  acc.s2_y = parse_hexfloat(j.at("s2_y").get<std::string>());
  acc.mean_cost = parse_hexfloat(j.at("mean_cost").get<std::string>());
  acc.total_cost = parse_hexfloat(j.at("total_cost").get<std::string>());
}

void to_json(nlohmann::json& j, const MlmcDataset& data) {
  j = nlohmann::json{{"round", data.round}, {"levels", data.levels}};
}

void from_json(const nlohmann::json& j, MlmcDataset& data) {
  data.round = j.at("round").get<int>();
  data.levels = j.at("levels").get<std::vector<LevelAccumulator>>();
  for (std::size_t l = 0; l < data.levels.size(); ++l) {
    if (data.levels[l].level != static_cast<int>(l)) {
      throw std::invalid_argument("checkpoint levels are not contiguous");
    }
  }
}

}  // namespace bmlmc
