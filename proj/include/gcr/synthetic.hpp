#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcr/errors.hpp"

namespace gcr {

/// Planted-rule graph parameters. The target relation r_star(u, v), u < v,
/// holds iff u and v share at least rule_arity - 1 out-neighbors via r0.
struct SyntheticSpec {
  std::size_t entities = 50;
  std::size_t relations = 3;  // base relations r0..r{relations-1}
  std::size_t rule_arity = 2;
  double edge_probability = 0.08;
  std::uint64_t seed = 1;

  void validate() const {
    if (entities < 2) throw std::invalid_argument("synthetic spec: need at least 2 entities");
    if (relations < 1) throw std::invalid_argument("synthetic spec: need at least 1 base relation");
    if (rule_arity < 2) throw std::invalid_argument("synthetic spec: rule arity must be >= 2");
    if (!(edge_probability > 0 && edge_probability < 1)) {
      throw std::invalid_argument("synthetic spec: edge probability must be in (0, 1)");
    }
  }
};

struct NamedEdge {
  std::string head, relation, tail;
  friend bool operator==(const NamedEdge&, const NamedEdge&) = default;
};

struct SyntheticGraph {
  std::vector<NamedEdge> train, valid, test;
  std::size_t planted = 0;
};

inline const std::string kPlantedRelation = "r_star";

namespace detail {

inline std::string entity_name(std::size_t i) { return "e" + std::to_string(i); }

// out-neighbors of every entity via r0
using Adjacency = std::vector<std::vector<std::size_t>>;

inline std::size_t common_count(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::size_t n = 0;
  for (auto i = a.begin(), j = b.begin(); i != a.end() && j != b.end();) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n, ++i, ++j;
    }
  }
  return n;
}

}  // namespace detail

inline SyntheticGraph gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::bernoulli_distribution coin(spec.edge_probability);
  SyntheticGraph g;
  detail::Adjacency out_r0(spec.entities);
  for (std::size_t r = 0; r < spec.relations; ++r) {
    for (std::size_t u = 0; u < spec.entities; ++u) {
      for (std::size_t v = 0; v < spec.entities; ++v) {
        if (u == v || !coin(rng)) continue;
        g.train.push_back({detail::entity_name(u), "r" + std::to_string(r), detail::entity_name(v)});
        if (r == 0) out_r0[u].push_back(v);
      }
    }
  }

  std::vector<NamedEdge> planted;
  for (std::size_t u = 0; u < spec.entities; ++u) {
    for (std::size_t v = u + 1; v < spec.entities; ++v) {
      if (detail::common_count(out_r0[u], out_r0[v]) + 1 >= spec.rule_arity) {
        planted.push_back({detail::entity_name(u), kPlantedRelation, detail::entity_name(v)});
      }
    }
  }
  if (planted.empty()) {
    throw DegenerateInputError("synthetic spec produced no planted edges; try a larger edge probability");
  }
  g.planted = planted.size();
  std::shuffle(planted.begin(), planted.end(), rng);
  const std::size_t n_test = std::max<std::size_t>(1, planted.size() / 10);
  const std::size_t n_valid = std::min(planted.size() / 10, planted.size() - n_test);
  g.test.assign(planted.begin(), planted.begin() + static_cast<std::ptrdiff_t>(n_test));
  g.valid.assign(planted.begin() + static_cast<std::ptrdiff_t>(n_test),
                 planted.begin() + static_cast<std::ptrdiff_t>(n_test + n_valid));
  g.train.insert(g.train.end(), planted.begin() + static_cast<std::ptrdiff_t>(n_test + n_valid), planted.end());
  return g;
}

inline void write_synthetic(const SyntheticGraph& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto dump = [&](const char* file, const std::vector<NamedEdge>& edges) {
    std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / file).string());
    for (const auto& e : edges) out << e.head << '\t' << e.relation << '\t' << e.tail << '\n';
  };
  dump("train.txt", g.train);
  dump("valid.txt", g.valid);
  dump("test.txt", g.test);
}

struct RuleCheck {
  std::size_t planted = 0;     // r_star edges seen across all splits
  std::size_t expected = 0;    // pairs satisfying the rule
  std::size_t violations = 0;  // emitted edges that break the rule
  std::size_t missing = 0;     // rule pairs with no emitted edge
  bool ok() const { return violations == 0 && missing == 0; }
};

/// Re-scans the base edges and checks that r_star is exactly the rule's extension.
inline RuleCheck validate_synthetic(const SyntheticGraph& g, std::size_t rule_arity = 2) {
  auto index_of = [](const std::string& name) -> std::size_t {
    if (name.size() < 2 || name[0] != 'e') throw std::invalid_argument("unexpected entity name " + name);
    return std::stoul(name.substr(1));
  };
  std::size_t n = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stars;
  detail::Adjacency out_r0;
  auto ensure = [&](std::size_t i) {
    n = std::max(n, i + 1);
    if (out_r0.size() < n) out_r0.resize(n);
  };
  for (const auto* part : {&g.train, &g.valid, &g.test}) {
    for (const auto& e : *part) {
      const std::size_t h = index_of(e.head), t = index_of(e.tail);
      ensure(std::max(h, t));
      if (e.relation == "r0") out_r0[h].push_back(t);
      if (e.relation == kPlantedRelation) stars.emplace_back(h, t);
    }
  }
  for (auto& l : out_r0) {
    std::sort(l.begin(), l.end());
    l.erase(std::unique(l.begin(), l.end()), l.end());
  }
  std::sort(stars.begin(), stars.end());
  RuleCheck rc;
  rc.planted = stars.size();
  for (const auto& [u, v] : stars) {
    if (u >= v || detail::common_count(out_r0[u], out_r0[v]) + 1 < rule_arity) ++rc.violations;
  }
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (detail::common_count(out_r0[u], out_r0[v]) + 1 < rule_arity) continue;
      ++rc.expected;
      if (!std::binary_search(stars.begin(), stars.end(), std::make_pair(u, v))) ++rc.missing;
    }
  }
  return rc;
}

}  // namespace gcr
