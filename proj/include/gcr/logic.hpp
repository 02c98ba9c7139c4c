#pragma once

// Horn-clause compilation of a link-prediction query.
//
// A target triple Tx with one-hop neighbor triples T1..Tn is explained by the
// disjunction, over every nonempty neighbor subset S, of (AND(S) -> Tx). With
// p -> q == !p | q and De Morgan this collapses to !T1 | ... | !Tn | Tx, which
// is linear in n. The symbolic machinery below lets the collapse be checked by
// exhaustive enumeration for small n.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gcr/errors.hpp"
#include "gcr/graph.hpp"

namespace gcr {

struct Atom {
  Triple triple;
  bool negated = false;

  friend bool operator==(const Atom&, const Atom&) = default;
};

/// !N1 | ... | !Nk | target, with distinct neighbors.
struct Clause {
  std::vector<Atom> neighbors;
  Atom target;

  std::size_t size() const noexcept { return neighbors.size() + 1; }
};

/// Negates each distinct neighbor (first occurrence order kept) and appends the
/// positive target. A neighbor equal to the target is a construction error.
inline Clause build_clause(const Triple& target, const std::vector<Triple>& neighbors) {
  Clause c;
  c.target = Atom{target, false};
  c.neighbors.reserve(neighbors.size());
  for (const auto& n : neighbors) {
    if (n == target) throw ClauseError("build_clause: target " + to_string(target) + " listed among its neighbors");
    const Atom a{n, true};
    if (std::find(c.neighbors.begin(), c.neighbors.end(), a) == c.neighbors.end()) c.neighbors.push_back(a);
  }
  return c;
}

/// Same neighbors, different target: the negative-sample clause.
inline Clause with_target(const Clause& c, const Triple& target) {
  for (const auto& n : c.neighbors) {
    if (n.triple == target) throw ClauseError("with_target: target " + to_string(target) + " is a neighbor");
  }
  Clause out = c;
  out.target = Atom{target, false};
  return out;
}

/// One clause per line: "-h:r:t ... +h:r:t".
inline std::string format_clause(const Clause& c) {
  std::string s;
  for (const auto& a : c.neighbors) s += "-" + to_string(a.triple) + " ";
  return s + "+" + to_string(c.target.triple);
}

inline Clause parse_clause(const std::string& line) {
  std::istringstream in(line);
  std::string tok;
  std::vector<Triple> neg;
  std::optional<Triple> pos;
  while (in >> tok) {
    if (tok.size() < 6 || (tok[0] != '-' && tok[0] != '+')) throw ClauseError("parse_clause: bad token '" + tok + "'");
    Triple t;
    char c1 = 0, c2 = 0;
    std::istringstream ts(tok.substr(1));
    if (!(ts >> t.head >> c1 >> t.relation >> c2 >> t.tail) || c1 != ':' || c2 != ':' || !ts.eof()) {
      throw ClauseError("parse_clause: bad triple '" + tok + "'");
    }
    if (tok[0] == '-') {
      if (pos) throw ClauseError("parse_clause: negated atom after the target");
      neg.push_back(t);
    } else {
      if (pos) throw ClauseError("parse_clause: more than one positive atom");
      pos = t;
    }
  }
  if (!pos) throw ClauseError("parse_clause: missing positive target atom");
  return build_clause(*pos, neg);
}

// ---- symbolic oracle --------------------------------------------------------

enum class Connective : std::uint8_t { kAtom, kNot, kAnd, kOr, kImplies };

/// Expression tree over atom indices.
struct SymbolicExpr {
  Connective kind = Connective::kAtom;
  int atom = -1;
  std::vector<SymbolicExpr> children;

  static SymbolicExpr leaf(int a) { return {Connective::kAtom, a, {}}; }
  static SymbolicExpr negate(SymbolicExpr e) { return {Connective::kNot, -1, {std::move(e)}}; }
  static SymbolicExpr conj(std::vector<SymbolicExpr> es) { return {Connective::kAnd, -1, std::move(es)}; }
  static SymbolicExpr disj(std::vector<SymbolicExpr> es) { return {Connective::kOr, -1, std::move(es)}; }
  static SymbolicExpr implies(SymbolicExpr p, SymbolicExpr q) {
    std::vector<SymbolicExpr> c;
    c.push_back(std::move(p));
    c.push_back(std::move(q));
    return {Connective::kImplies, -1, std::move(c)};
  }
};

/// Total map from atom index to truth value, stored densely by index.
using TruthAssignment = std::vector<bool>;

inline bool eval_symbolic(const SymbolicExpr& e, const TruthAssignment& a) {
  switch (e.kind) {
    case Connective::kAtom:
      if (e.atom < 0 || static_cast<std::size_t>(e.atom) >= a.size()) {
        throw std::out_of_range("eval_symbolic: atom " + std::to_string(e.atom) + " missing from assignment");
      }
      return a[static_cast<std::size_t>(e.atom)];
    case Connective::kNot:
      return !eval_symbolic(e.children.at(0), a);
    case Connective::kAnd:
      for (const auto& c : e.children) {
        if (!eval_symbolic(c, a)) return false;
      }
      return true;
    case Connective::kOr:
      for (const auto& c : e.children) {
        if (eval_symbolic(c, a)) return true;
      }
      return false;
    case Connective::kImplies:
      return !eval_symbolic(e.children.at(0), a) || eval_symbolic(e.children.at(1), a);
  }
  return false;
}

/// Rewrites every p -> q as !p | q.
inline SymbolicExpr eliminate_implications(const SymbolicExpr& e) {
  if (e.kind == Connective::kAtom) return e;
  std::vector<SymbolicExpr> kids;
  kids.reserve(e.children.size());
  for (const auto& c : e.children) kids.push_back(eliminate_implications(c));
  if (e.kind == Connective::kImplies) {
    std::vector<SymbolicExpr> d;
    d.push_back(SymbolicExpr::negate(std::move(kids[0])));
    d.push_back(std::move(kids[1]));
    return SymbolicExpr::disj(std::move(d));
  }
  return {e.kind, -1, std::move(kids)};
}

inline constexpr int kMaxOracleNeighbors = 10;

/// Atom indices 0..n-1 are the neighbors T1..Tn; index n is the target Tx.
inline SymbolicExpr expand_full_expression(int n) {
  if (n < 1 || n > kMaxOracleNeighbors) {
    throw std::out_of_range("expand_full_expression: n must be in [1, " + std::to_string(kMaxOracleNeighbors) + "]");
  }
  std::vector<SymbolicExpr> disjuncts;
  disjuncts.reserve((1u << n) - 1);
  // Subsets by size, then lexicographically, matching the row layout of the full expansion.
  for (int k = 1; k <= n; ++k) {
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
      if (__builtin_popcount(mask) != k) continue;
      std::vector<SymbolicExpr> body;
      for (int i = 0; i < n; ++i) {
        if (mask & (1u << i)) body.push_back(SymbolicExpr::leaf(i));
      }
      SymbolicExpr premise = body.size() == 1 ? std::move(body[0]) : SymbolicExpr::conj(std::move(body));
      disjuncts.push_back(SymbolicExpr::implies(std::move(premise), SymbolicExpr::leaf(n)));
    }
  }
  return SymbolicExpr::disj(std::move(disjuncts));
}

/// !T1 | ... | !Tn | Tx over the same atom indexing.
inline SymbolicExpr clause_expression(int n) {
  std::vector<SymbolicExpr> d;
  for (int i = 0; i < n; ++i) d.push_back(SymbolicExpr::negate(SymbolicExpr::leaf(i)));
  d.push_back(SymbolicExpr::leaf(n));
  return SymbolicExpr::disj(std::move(d));
}

struct EquivalenceReport {
  int n = 0;
  std::size_t assignments = 0;
  std::size_t disjuncts = 0;
  bool clause_equivalent = true;
  bool target_determined = true;  // with all neighbors true, value == Tx
  std::optional<TruthAssignment> counterexample;

  bool ok() const noexcept { return clause_equivalent && target_determined; }
};

inline std::string format_assignment(const TruthAssignment& a) {
  std::string s;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i) s += ' ';
    s += (i + 1 == a.size() ? "Tx" : "T" + std::to_string(i + 1)) + "=" + (a[i] ? "1" : "0");
  }
  return s;
}

/// Enumerates all 2^(n+1) assignments over {T1..Tn, Tx}.
inline EquivalenceReport check_equivalence(int n) {
  const SymbolicExpr full = expand_full_expression(n);
  const SymbolicExpr clause = clause_expression(n);
  EquivalenceReport r;
  r.n = n;
  r.disjuncts = full.children.size();
  const std::uint32_t total = 1u << (n + 1);
  TruthAssignment a(static_cast<std::size_t>(n) + 1);
  for (std::uint32_t bits = 0; bits < total; ++bits) {
    bool all_neighbors = true;
    for (int i = 0; i <= n; ++i) {
      a[static_cast<std::size_t>(i)] = (bits >> i) & 1u;
      if (i < n) all_neighbors = all_neighbors && a[static_cast<std::size_t>(i)];
    }
    const bool full_v = eval_symbolic(full, a);
    if (full_v != eval_symbolic(clause, a)) {
      r.clause_equivalent = false;
      if (!r.counterexample) r.counterexample = a;
    }
    if (all_neighbors && full_v != a[static_cast<std::size_t>(n)]) {
      r.target_determined = false;
      if (!r.counterexample) r.counterexample = a;
    }
    ++r.assignments;
  }
  return r;
}

}  // namespace gcr
