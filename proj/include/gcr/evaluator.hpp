#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "gcr/config.hpp"
#include "gcr/fpenv.hpp"
#include "gcr/graph.hpp"
#include "gcr/logic.hpp"
#include "gcr/metrics.hpp"
#include "gcr/model.hpp"

namespace gcr {

struct EvalOptions {
  std::size_t neighbors = 5;
  std::uint64_t seed = 1;
  bool normalize = true;
  std::size_t negatives = 100;
  std::size_t threads = 0;

  static EvalOptions from(const TrainConfig& c) { return {c.neighbors, c.seed, c.normalize, c.negatives, c.threads}; }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Per-query seed so that every query samples the same neighbors on reruns.
inline std::uint64_t query_seed(std::uint64_t global_seed, std::uint64_t query_id) {
  return splitmix64(global_seed ^ splitmix64(query_id));
}

/// Runs fn(i, worker) for i in [0, n) on up to `threads` workers.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n, 1));
  if (threads <= 1) {
    FlushSubnormals ftz;
    for (std::size_t i = 0; i < n; ++i) fn(i, std::size_t{0});
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      FlushSubnormals ftz;
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i, w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Eval-mode scorer for many clauses that share one neighbor set. The OR fold
/// over the negated neighbors does not depend on the target, so it is computed
/// once; scores are bit-identical to scoring each full clause.
template <Scalar T>
class ClauseScorer {
 public:
  ClauseScorer(const ModelParams<T>& model, const Clause& neighbors, Tape<T>& tape, bool normalize)
      : model_(model), tape_(tape) {
    ctx_.normalize_predicates = normalize;
    if (neighbors.neighbors.empty()) return;
    tape_.reset();
    ReasoningNet<T> net(model_, tape_);
    const auto terms = net.negated_neighbors(neighbors, ctx_);
    std::vector<std::size_t> order(terms.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const Var acc = net.or_fold(terms, order, ctx_);
    const auto v = tape_.value(acc);
    prefix_.assign(v.begin(), v.end());
  }

  T score(const Triple& target) {
    tape_.reset();
    ReasoningNet<T> net(model_, tape_);
    Var e = net.encode_predicate(target, ctx_);
    if (!prefix_.empty()) e = net.or_module(tape_.constant(std::span<const T>(prefix_)), e, ctx_);
    return tape_.scalar_value(tape_.cosine_similarity(e, net.anchor()));
  }

 private:
  const ModelParams<T>& model_;
  Tape<T>& tape_;
  ForwardContext ctx_;
  std::vector<T> prefix_;
};

struct RankingQuery {
  Triple target;  // canonical true triple
  Slot slot = Slot::kTail;
  std::vector<EntityId> candidates;
};

/// Scores every candidate substitution against one neighbor sample (drawn
/// around the uncorrupted query triple) and returns the truth's rank.
template <Scalar T>
std::size_t rank_query(const ModelParams<T>& model, const Graph& g, const RankingQuery& q,
                          const std::vector<Triple>& neighbors, Tape<T>& tape, bool normalize = true) {
  if (q.candidates.empty()) throw std::invalid_argument("rank_query: no candidates");
  const EntityId truth = slot_entity(q.target, q.slot);
  ClauseScorer<T> scorer(model, build_clause(q.target, neighbors), tape, normalize);
  std::vector<T> scores(q.candidates.size());
  std::size_t truth_index = q.candidates.size();
  for (std::size_t i = 0; i < q.candidates.size(); ++i) {
    if (q.candidates[i] == truth) truth_index = i;
    scores[i] = scorer.score(g.canonical(substitute(q.target, q.slot, q.candidates[i])));
  }
  if (truth_index == q.candidates.size()) throw std::invalid_argument("rank_query: truth not among candidates");
  return rank_of_truth(std::span<const T>(scores), truth_index);
}

struct QueryOutcome {
  Triple target;
  Slot slot = Slot::kTail;
  EntityId key = 0;  // grouping entity: the (canonical) head
  std::optional<std::size_t> rank;
  std::size_t candidates = 0;
};

/// Filtered KG ranking: for triple i, query 2i corrupts the tail and 2i+1 the head.
template <Scalar T>
std::vector<QueryOutcome> run_kg_queries(const ModelParams<T>& model, const Graph& g, const DatasetSplit& split,
                                         const std::vector<Triple>& triples, const EvalOptions& opt) {
  std::vector<QueryOutcome> out(2 * triples.size());
  std::size_t workers = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  std::vector<Tape<T>> tapes(workers);
  parallel_for(out.size(), workers, [&](std::size_t qid, std::size_t w) {
    const Triple t = g.canonical(triples[qid / 2]);
    RankingQuery q{t, qid % 2 == 0 ? Slot::kTail : Slot::kHead, {}};
    q.candidates = filtered_candidates(g, split.known, t, q.slot);
    std::mt19937_64 rng(query_seed(opt.seed, qid));
    const auto neighbors = sample_neighbors(g, t, opt.neighbors, rng);
    out[qid] = {t, q.slot, t.head, rank_query(model, g, q, neighbors, tapes[w], opt.normalize),
                q.candidates.size()};
  });
  return out;
}

/// Sampled recommendation ranking: the held-out item against up to
/// `negatives` items the user never interacted with.
template <Scalar T>
std::vector<QueryOutcome> run_rec_queries(const ModelParams<T>& model, const Graph& g, const DatasetSplit& split,
                                          const std::vector<Triple>& triples, const EvalOptions& opt) {
  std::vector<QueryOutcome> out(triples.size());
  std::size_t workers = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  std::vector<Tape<T>> tapes(workers);
  const EntityRange items = g.slot_range(Slot::kTail);
  const auto& known = split.known.items();
  parallel_for(out.size(), workers, [&](std::size_t qid, std::size_t w) {
    const Triple t = g.canonical(triples[qid]);
    out[qid].target = t;
    out[qid].key = t.head;
    // Known items of this user are contiguous in the sorted index.
    const auto lo = std::lower_bound(known.begin(), known.end(), Triple{t.head, t.relation, items.begin});
    const auto hi = std::lower_bound(known.begin(), known.end(), Triple{t.head, t.relation, items.end});
    const std::size_t interacted = static_cast<std::size_t>(hi - lo);
    const std::size_t available = items.size() - std::min(interacted, items.size());
    std::mt19937_64 rng(query_seed(opt.seed, qid));
    if (available == 0 && opt.negatives > 0) return;  // skipped

    RankingQuery q{t, Slot::kTail, {t.tail}};
    const std::size_t want = std::min(opt.negatives, available);
    if (want == available) {
      for (EntityId e = items.begin; e < items.end; ++e) {
        if (!split.known.contains(Triple{t.head, t.relation, e})) q.candidates.push_back(e);
      }
    } else {
      std::unordered_set<EntityId> chosen;
      std::uniform_int_distribution<EntityId> pick(items.begin, items.end - 1);
      while (chosen.size() < want) {
        const EntityId e = pick(rng);
        if (split.known.contains(Triple{t.head, t.relation, e}) || !chosen.insert(e).second) continue;
        q.candidates.push_back(e);
      }
    }
    const auto neighbors = sample_neighbors(g, t, opt.neighbors, rng);
    out[qid].rank = rank_query(model, g, q, neighbors, tapes[w], opt.normalize);
    out[qid].candidates = q.candidates.size();
  });
  return out;
}

/// Averages over queries (KG protocol).
inline MetricsTable aggregate_queries(const std::vector<QueryOutcome>& qs) {
  std::vector<std::size_t> ranks;
  std::size_t skipped = 0;
  bool degenerate = !qs.empty();
  for (const auto& q : qs) {
    if (!q.rank) {
      ++skipped;
      continue;
    }
    ranks.push_back(*q.rank);
    degenerate = degenerate && q.candidates == 1;
  }
  MetricsTable t = MetricsTable::from_ranks(ranks);
  t.skipped = skipped;
  t.degenerate = degenerate && !ranks.empty();
  return t;
}

/// Averages per user first, then across users (recommendation protocol).
inline MetricsTable aggregate_per_user(const std::vector<QueryOutcome>& qs) {
  std::map<EntityId, std::vector<std::size_t>> by_user;
  std::size_t skipped = 0;
  bool degenerate = true;
  for (const auto& q : qs) {
    if (!q.rank) {
      ++skipped;
      continue;
    }
    by_user[q.key].push_back(*q.rank);
    degenerate = degenerate && q.candidates == 1;
  }
  MetricsTable t;
  for (const auto& [user, ranks] : by_user) {
    const MetricsTable u = MetricsTable::from_ranks(ranks);
    t.mrr += u.mrr;
    for (std::size_t i = 0; i < t.hit.size(); ++i) t.hit[i] += u.hit[i];
    for (std::size_t i = 0; i < t.ndcg.size(); ++i) t.ndcg[i] += u.ndcg[i];
    t.queries += ranks.size();
  }
  if (!by_user.empty()) {
    const double n = static_cast<double>(by_user.size());
    t.mrr /= n;
    for (auto& v : t.hit) v /= n;
    for (auto& v : t.ndcg) v /= n;
  }
  t.skipped = skipped;
  t.degenerate = degenerate && !by_user.empty();
  return t;
}

template <Scalar T>
MetricsTable evaluate_kg(const ModelParams<T>& model, const Graph& g, const DatasetSplit& split,
                         const std::vector<Triple>& triples, const EvalOptions& opt) {
  return aggregate_queries(run_kg_queries(model, g, split, triples, opt));
}

template <Scalar T>
MetricsTable evaluate_rec(const ModelParams<T>& model, const Graph& g, const DatasetSplit& split,
                          const std::vector<Triple>& triples, const EvalOptions& opt) {
  return aggregate_per_user(run_rec_queries(model, g, split, triples, opt));
}

template <Scalar T>
MetricsTable evaluate(Task task, const ModelParams<T>& model, const Graph& g, const DatasetSplit& split,
                      const std::vector<Triple>& triples, const EvalOptions& opt) {
  return task == Task::kKg ? evaluate_kg(model, g, split, triples, opt) : evaluate_rec(model, g, split, triples, opt);
}

/// Validation metric used for early stopping: MRR for KG, NDCG@10 for recommendation.
inline double validation_metric(Task task, const MetricsTable& t) { return task == Task::kKg ? t.mrr : t.ndcg_at(10); }

struct DegreeBucket {
  std::size_t lower = 0;
  std::optional<std::size_t> upper;  // exclusive; none means unbounded
  std::size_t population = 0;        // distinct grouping entities (users)
  std::optional<MetricsTable> metrics;

  std::string label() const {
    return "[" + std::to_string(lower) + "," + (upper ? std::to_string(*upper) + ")" : std::string("inf)"));
  }
};

struct DegreeBreakdown {
  std::vector<DegreeBucket> buckets;
  std::size_t unbucketed = 0;  // entities whose degree is below the first edge
};

inline const std::vector<std::size_t> kDefaultDegreeEdges = {1, 5, 10, 30};

/// Groups test queries by the training degree of their head entity (the user
/// for bipartite data) and evaluates each bucket on its own.
template <Scalar T>
DegreeBreakdown group_by_degree(Task task, const ModelParams<T>& model, const Graph& g, const DatasetSplit& split,
                                const std::vector<Triple>& triples, const EvalOptions& opt,
                                const std::vector<std::size_t>& edges = kDefaultDegreeEdges) {
  if (edges.empty() || !std::is_sorted(edges.begin(), edges.end())) {
    throw std::invalid_argument("group_by_degree: bucket edges must be non-empty and ascending");
  }
  const auto outcomes =
      task == Task::kKg ? run_kg_queries(model, g, split, triples, opt) : run_rec_queries(model, g, split, triples, opt);
  DegreeBreakdown out;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    DegreeBucket b;
    b.lower = edges[i];
    if (i + 1 < edges.size()) b.upper = edges[i + 1];
    out.buckets.push_back(b);
  }
  std::vector<std::vector<QueryOutcome>> members(edges.size());
  std::vector<std::unordered_set<EntityId>> keys(edges.size());
  std::unordered_set<EntityId> below;
  for (const auto& q : outcomes) {
    const std::size_t deg = g.degree(q.key);
    const auto it = std::upper_bound(edges.begin(), edges.end(), deg);
    if (it == edges.begin()) {
      below.insert(q.key);
      continue;
    }
    const auto b = static_cast<std::size_t>(it - edges.begin()) - 1;
    members[b].push_back(q);
    keys[b].insert(q.key);
  }
  for (std::size_t b = 0; b < edges.size(); ++b) {
    out.buckets[b].population = keys[b].size();
    if (!members[b].empty()) {
      out.buckets[b].metrics = task == Task::kKg ? aggregate_queries(members[b]) : aggregate_per_user(members[b]);
    }
  }
  out.unbucketed = below.size();
  return out;
}

}  // namespace gcr
