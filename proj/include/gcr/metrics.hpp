#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace gcr {

inline double mrr(std::span<const std::size_t> ranks) {
  if (ranks.empty()) return 0.0;
  double s = 0;
  for (std::size_t r : ranks) s += 1.0 / static_cast<double>(r);
  return s / static_cast<double>(ranks.size());
}

inline double hit_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  if (ranks.empty()) return 0.0;
  const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

/// Single relevant item, so the ideal DCG is 1.
inline double ndcg_at_k(std::size_t rank, std::size_t k) {
  return rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

/// 1-based rank of scores[truth]. Ties place the truth at the ceiling of the
/// mean rank of its tie group.
template <class S>
std::size_t rank_of_truth(std::span<const S> scores, std::size_t truth) {
  const S s = scores[truth];
  std::size_t better = 0, tied = 0;
  for (const S v : scores) {
    if (v > s) {
      ++better;
    } else if (v == s) {
      ++tied;
    }
  }
  // mean of better+1 .. better+tied, rounded up
  return better + (tied + 2) / 2;
}

inline constexpr std::array<std::size_t, 4> kHitCutoffs = {1, 3, 5, 10};
inline constexpr std::array<std::size_t, 2> kNdcgCutoffs = {5, 10};

struct MetricsTable {
  double mrr = 0;
  std::array<double, kHitCutoffs.size()> hit{};
  std::array<double, kNdcgCutoffs.size()> ndcg{};
  std::size_t queries = 0;
  std::size_t skipped = 0;
  // Every query had a single candidate, so all metrics are trivially 1.
  bool degenerate = false;

  double hit_at(std::size_t k) const {
    for (std::size_t i = 0; i < kHitCutoffs.size(); ++i) {
      if (kHitCutoffs[i] == k) return hit[i];
    }
    return hit_at_k_missing();
  }

  double ndcg_at(std::size_t k) const {
    for (std::size_t i = 0; i < kNdcgCutoffs.size(); ++i) {
      if (kNdcgCutoffs[i] == k) return ndcg[i];
    }
    return hit_at_k_missing();
  }

  /// Plain average of per-query metrics.
  static MetricsTable from_ranks(std::span<const std::size_t> ranks) {
    MetricsTable t;
    t.queries = ranks.size();
    t.mrr = gcr::mrr(ranks);
    for (std::size_t i = 0; i < kHitCutoffs.size(); ++i) t.hit[i] = hit_at_k(ranks, kHitCutoffs[i]);
    for (std::size_t i = 0; i < kNdcgCutoffs.size(); ++i) {
      double s = 0;
      for (std::size_t r : ranks) s += ndcg_at_k(r, kNdcgCutoffs[i]);
      t.ndcg[i] = ranks.empty() ? 0.0 : s / static_cast<double>(ranks.size());
    }
    return t;
  }

 private:
  [[noreturn]] static double hit_at_k_missing() { throw std::out_of_range("metric cutoff not tracked"); }
};

}  // namespace gcr
