#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gcr/errors.hpp"

namespace gcr {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

/// A (head, relation, tail) edge. Doubles as the grounded predicate relation(head, tail).
struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

inline std::string to_string(const Triple& t) {
  return std::to_string(t.head) + ":" + std::to_string(t.relation) + ":" + std::to_string(t.tail);
}

enum class Slot { kHead, kTail };

inline const char* to_string(Slot s) { return s == Slot::kHead ? "head" : "tail"; }

/// Undirected graphs store every edge with the smaller entity id as head.
inline Triple canonical_orient(const Triple& t, bool directed) {
  if (directed || t.head <= t.tail) return t;
  return Triple{t.tail, t.relation, t.head};
}

inline Triple substitute(const Triple& t, Slot slot, EntityId e) {
  Triple out = t;
  (slot == Slot::kHead ? out.head : out.tail) = e;
  return out;
}

inline EntityId slot_entity(const Triple& t, Slot slot) { return slot == Slot::kHead ? t.head : t.tail; }

/// Half-open entity id range [begin, end).
struct EntityRange {
  EntityId begin = 0;
  EntityId end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool contains(EntityId e) const noexcept { return e >= begin && e < end; }
  friend bool operator==(const EntityRange&, const EntityRange&) = default;
};

/// Sorted, duplicate-free triple set with logarithmic membership.
class TripleSet {
 public:
  TripleSet() = default;
  explicit TripleSet(std::vector<Triple> triples) : items_(std::move(triples)) {
    std::sort(items_.begin(), items_.end());
    items_.erase(std::unique(items_.begin(), items_.end()), items_.end());
  }

  bool contains(const Triple& t) const { return std::binary_search(items_.begin(), items_.end(), t); }
  std::size_t size() const noexcept { return items_.size(); }
  const std::vector<Triple>& items() const noexcept { return items_; }

 private:
  std::vector<Triple> items_;
};

/// Multi-relational graph over training triples, immutable after construction.
/// Bipartite (recommendation) graphs are undirected; users occupy
/// [0, item_begin) and items [item_begin, num_entities).
class Graph {
 public:
  Graph() = default;

  Graph(std::size_t num_entities, std::size_t num_relations, std::vector<Triple> triples, bool directed,
        std::optional<EntityId> item_begin = std::nullopt)
      : num_entities_(num_entities), num_relations_(num_relations), directed_(directed), item_begin_(item_begin) {
    if (item_begin_ && (directed_ || *item_begin_ > num_entities_)) {
      throw std::invalid_argument("bipartite graphs must be undirected with item_begin <= |V|");
    }
    for (auto& t : triples) {
      if (t.head >= num_entities_ || t.tail >= num_entities_ || t.relation >= num_relations_) {
        throw std::out_of_range("triple " + to_string(t) + " has an id out of range");
      }
      t = canonical(t);
    }
    triples_ = TripleSet(std::move(triples));

    // CSR adjacency: each triple is listed under its head and under its tail.
    offsets_.assign(num_entities_ + 1, 0);
    const auto& ts = triples_.items();
    for (const auto& t : ts) {
      ++offsets_[t.head + 1];
      if (t.tail != t.head) ++offsets_[t.tail + 1];
    }
    for (std::size_t i = 0; i < num_entities_; ++i) offsets_[i + 1] += offsets_[i];
    incident_.resize(offsets_.back());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (std::size_t i = 0; i < ts.size(); ++i) {
      incident_[cursor[ts[i].head]++] = static_cast<std::uint32_t>(i);
      if (ts[i].tail != ts[i].head) incident_[cursor[ts[i].tail]++] = static_cast<std::uint32_t>(i);
    }
  }

  std::size_t num_entities() const noexcept { return num_entities_; }
  std::size_t num_relations() const noexcept { return num_relations_; }
  bool directed() const noexcept { return directed_; }
  bool bipartite() const noexcept { return item_begin_.has_value(); }
  std::optional<EntityId> item_begin() const noexcept { return item_begin_; }

  Triple canonical(const Triple& t) const { return canonical_orient(t, directed_); }

  const std::vector<Triple>& triples() const noexcept { return triples_.items(); }
  bool contains(const Triple& t) const { return triples_.contains(canonical(t)); }

  /// Indices into triples() of every edge touching `e`.
  std::span<const std::uint32_t> incident(EntityId e) const {
    return std::span<const std::uint32_t>(incident_).subspan(offsets_[e], offsets_[e + 1] - offsets_[e]);
  }

  std::size_t degree(EntityId e) const { return offsets_[e + 1] - offsets_[e]; }

  /// Entities eligible for a slot: items for the tail of a bipartite graph,
  /// users for its head, everything otherwise.
  EntityRange slot_range(Slot slot) const {
    const auto n = static_cast<EntityId>(num_entities_);
    if (!item_begin_) return {0, n};
    return slot == Slot::kHead ? EntityRange{0, *item_begin_} : EntityRange{*item_begin_, n};
  }

 private:
  std::size_t num_entities_ = 0;
  std::size_t num_relations_ = 0;
  bool directed_ = true;
  std::optional<EntityId> item_begin_;
  TripleSet triples_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> incident_;
};

/// Train/validation/test triples plus the union index used for filtering.
struct DatasetSplit {
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
  TripleSet known;

  static DatasetSplit make(std::vector<Triple> train, std::vector<Triple> valid, std::vector<Triple> test) {
    DatasetSplit s;
    s.train = std::move(train);
    s.valid = std::move(valid);
    s.test = std::move(test);
    std::vector<Triple> all;
    all.reserve(s.train.size() + s.valid.size() + s.test.size());
    for (const auto* part : {&s.train, &s.valid, &s.test}) all.insert(all.end(), part->begin(), part->end());
    s.known = TripleSet(std::move(all));
    return s;
  }
};

/// Up to `n_cap` incident training triples of the head and up to `n_cap` of the
/// tail, each side drawn uniformly without replacement. The target itself is
/// never returned and an edge drawn on both sides appears once.
template <class Rng>
std::vector<Triple> sample_neighbors(const Graph& g, const Triple& target, std::size_t n_cap, Rng& rng) {
  const Triple t = g.canonical(target);
  if (t.head >= g.num_entities() || t.tail >= g.num_entities()) {
    throw std::out_of_range("sample_neighbors: target " + to_string(t) + " out of range");
  }
  std::vector<Triple> out;
  out.reserve(2 * n_cap);
  std::vector<std::uint32_t> pool;
  const auto& ts = g.triples();
  for (EntityId side : {t.head, t.tail}) {
    pool.clear();
    for (std::uint32_t idx : g.incident(side)) {
      if (ts[idx] != t) pool.push_back(idx);
    }
    const std::size_t take = std::min(n_cap, pool.size());
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      const Triple& cand = ts[pool[i]];
      if (std::find(out.begin(), out.end(), cand) == out.end()) out.push_back(cand);
    }
  }
  return out;
}

inline constexpr int kNegativeSampleAttempts = 100;

/// Replaces `slot` with a uniformly drawn eligible entity such that the result
/// is not a known triple. Throws SaturationError after 100 failed draws.
template <class Rng>
Triple sample_negative(const Graph& g, const TripleSet& known, const Triple& target, Slot slot, Rng& rng) {
  const Triple t = g.canonical(target);
  const EntityRange range = g.slot_range(slot);
  if (range.size() == 0) throw SaturationError("sample_negative: empty entity range");
  std::uniform_int_distribution<EntityId> pick(range.begin, range.end - 1);
  for (int attempt = 0; attempt < kNegativeSampleAttempts; ++attempt) {
    const Triple cand = g.canonical(substitute(t, slot, pick(rng)));
    if (!known.contains(cand)) return cand;
  }
  throw SaturationError("sample_negative: no unknown " + std::string(to_string(slot)) + " replacement for " +
                        to_string(t) + " after " + std::to_string(kNegativeSampleAttempts) + " attempts");
}

/// Every entity whose substitution into `slot` is not a known triple, plus the
/// true entity itself, in ascending id order.
inline std::vector<EntityId> filtered_candidates(const Graph& g, const TripleSet& known, const Triple& target,
                                                 Slot slot) {
  const Triple t = g.canonical(target);
  const EntityId truth = slot_entity(t, slot);
  const EntityRange range = g.slot_range(slot);
  std::vector<EntityId> out;
  for (EntityId e = range.begin; e < range.end; ++e) {
    if (e == truth || !known.contains(g.canonical(substitute(t, slot, e)))) out.push_back(e);
  }
  if (!range.contains(truth)) out.insert(std::lower_bound(out.begin(), out.end(), truth), truth);
  return out;
}

}  // namespace gcr
