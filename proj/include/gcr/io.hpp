#pragma once

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gcr/errors.hpp"
#include "gcr/graph.hpp"

namespace gcr {

/// Dense interning of string names in first-seen order.
class Vocabulary {
 public:
  std::uint32_t intern(std::string_view name) {
    auto [it, inserted] = index_.try_emplace(std::string(name), static_cast<std::uint32_t>(names_.size()));
    if (inserted) names_.emplace_back(name);
    return it->second;
  }

  std::optional<std::uint32_t> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  static Vocabulary from_names(const std::vector<std::string>& names) {
    Vocabulary v;
    for (const auto& n : names) v.intern(n);
    return v;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct LoadReport {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
  // Entities / relations first seen in validation or test data (cold ids).
  std::size_t unseen_entities = 0;
  std::size_t unseen_relations = 0;
  // Rows dropped because the same triple already appeared (in train or an earlier split).
  std::size_t duplicates_dropped = 0;
  // Bipartite data only.
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t interactions = 0;
  bool header_detected = false;
};

struct Dataset {
  Graph graph;
  DatasetSplit split;
  Vocabulary entities;
  Vocabulary relations;
  LoadReport report;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

inline bool parse_number(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '"')) s.remove_suffix(1);
  if (s.empty()) return false;
  const std::string tmp(s);
  char* end = nullptr;
  out = std::strtod(tmp.c_str(), &end);
  return end == tmp.c_str() + tmp.size();
}

struct NamedTriple {
  std::string head, relation, tail;
};

inline std::vector<NamedTriple> read_tsv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<NamedTriple> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view sv = strip_cr(line);
    if (sv.empty()) continue;
    const auto f = split_fields(sv, '\t');
    if (f.size() != 3) {
      throw ParseError(path.string(), lineno,
                       "expected 3 tab-separated fields (head, relation, tail), got " + std::to_string(f.size()));
    }
    if (f[0].empty() || f[1].empty() || f[2].empty()) throw ParseError(path.string(), lineno, "empty field");
    rows.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2])});
  }
  return rows;
}

inline std::filesystem::path find_split_file(const std::filesystem::path& dir, std::string_view stem, bool required) {
  for (const char* ext : {".txt", ".tsv"}) {
    auto p = dir / (std::string(stem) + ext);
    if (std::filesystem::exists(p)) return p;
  }
  if (required) throw std::runtime_error("missing " + std::string(stem) + ".txt in " + dir.string());
  return {};
}

}  // namespace detail

/// Builds a directed multi-relational dataset from named triples. Ids are
/// assigned in first-seen order over train, then valid, then test.
inline Dataset build_tsv_dataset(const std::vector<detail::NamedTriple>& train,
                                 const std::vector<detail::NamedTriple>& valid,
                                 const std::vector<detail::NamedTriple>& test) {
  Dataset ds;
  auto intern_all = [&](const std::vector<detail::NamedTriple>& rows) {
    std::vector<Triple> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
      const EntityId h = ds.entities.intern(r.head);
      const RelationId rel = ds.relations.intern(r.relation);
      const EntityId t = ds.entities.intern(r.tail);
      out.push_back({h, rel, t});
    }
    return out;
  };

  std::vector<Triple> tr = intern_all(train);
  const std::size_t train_entities = ds.entities.size();
  const std::size_t train_relations = ds.relations.size();
  std::vector<Triple> va = intern_all(valid);
  std::vector<Triple> te = intern_all(test);
  ds.report.unseen_entities = ds.entities.size() - train_entities;
  ds.report.unseen_relations = ds.relations.size() - train_relations;

  // Keep the splits disjoint: dedupe train, then drop repeats of anything seen earlier.
  std::set<Triple> seen(tr.begin(), tr.end());
  ds.report.duplicates_dropped = tr.size() - seen.size();
  tr.assign(seen.begin(), seen.end());
  auto filter = [&](std::vector<Triple>& part) {
    std::vector<Triple> kept;
    for (const auto& t : part) {
      if (!seen.insert(t).second) {
        ++ds.report.duplicates_dropped;
        continue;
      }
      kept.push_back(t);
    }
    part = std::move(kept);
  };
  filter(va);
  filter(te);

  ds.graph = Graph(ds.entities.size(), ds.relations.size(), tr, /*directed=*/true);
  ds.report.entities = ds.entities.size();
  ds.report.relations = ds.relations.size();
  ds.report.train = tr.size();
  ds.report.valid = va.size();
  ds.report.test = te.size();
  ds.split = DatasetSplit::make(std::move(tr), std::move(va), std::move(te));
  return ds;
}

/// Loads `train.txt`, `valid.txt` and `test.txt` (or `.tsv`) from a directory of
/// "head<TAB>relation<TAB>tail" lines. Validation and test files are optional.
inline Dataset load_tsv(const std::filesystem::path& dir) {
  using namespace detail;
  const auto train = read_tsv_file(find_split_file(dir, "train", true));
  std::vector<NamedTriple> valid, test;
  if (auto p = find_split_file(dir, "valid", false); !p.empty()) valid = read_tsv_file(p);
  if (auto p = find_split_file(dir, "test", false); !p.empty()) test = read_tsv_file(p);
  return build_tsv_dataset(train, valid, test);
}

/// Parses a single triple file; every triple lands in the training split.
inline Dataset load_tsv_file(const std::filesystem::path& file) {
  return build_tsv_dataset(detail::read_tsv_file(file), {}, {});
}

/// Loads "user,item,rating,timestamp" rows into an undirected bipartite graph
/// with the single relation "interacts". Every row is a positive interaction.
/// Per user, ordered by timestamp, the latest interaction goes to test and the
/// second latest to validation; users with fewer than three keep all in train.
inline Dataset load_ratings_csv(const std::filesystem::path& path) {
  using namespace detail;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());

  struct Row {
    std::uint32_t user, item;
    double time;
    std::size_t order;
  };
  Vocabulary users, items;
  std::vector<Row> rows;
  LoadReport report;
  std::string line;
  std::size_t lineno = 0;
  bool any_line = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view sv = strip_cr(line);
    if (sv.empty()) continue;
    const auto f = split_fields(sv, ',');
    if (f.size() != 4) {
      throw ParseError(path.string(), lineno,
                       "expected 4 comma-separated fields (user, item, rating, timestamp), got " +
                           std::to_string(f.size()));
    }
    double rating = 0, ts = 0;
    const bool numeric = parse_number(f[2], rating) && parse_number(f[3], ts);
    if (!numeric) {
      if (!any_line) {
        report.header_detected = true;
        any_line = true;
        continue;
      }
      throw ParseError(path.string(), lineno, "rating and timestamp must be numeric");
    }
    any_line = true;
    if (f[0].empty() || f[1].empty()) throw ParseError(path.string(), lineno, "empty user or item");
    rows.push_back({users.intern(f[0]), items.intern(f[1]), ts, rows.size()});
  }
  if (rows.empty()) throw ParseError(path.string(), lineno, "no interactions in file");

  // Implicit feedback: a repeated (user, item) pair counts once, at its latest time.
  std::map<std::pair<std::uint32_t, std::uint32_t>, Row> unique;
  for (const auto& r : rows) {
    auto [it, inserted] = unique.try_emplace({r.user, r.item}, r);
    if (!inserted && r.time >= it->second.time) it->second = r;
  }
  std::vector<std::vector<Row>> per_user(users.size());
  for (const auto& [key, r] : unique) per_user[r.user].push_back(r);

  Dataset ds;
  const auto item_begin = static_cast<EntityId>(users.size());
  for (const auto& n : users.names()) ds.entities.intern("u:" + n);
  for (const auto& n : items.names()) ds.entities.intern("i:" + n);
  ds.relations.intern("interacts");

  std::vector<Triple> tr, va, te;
  for (auto& list : per_user) {
    std::sort(list.begin(), list.end(),
              [](const Row& a, const Row& b) { return a.time != b.time ? a.time < b.time : a.order < b.order; });
    const std::size_t n = list.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Triple t{list[k].user, 0, item_begin + list[k].item};
      if (n >= 3 && k == n - 1) {
        te.push_back(t);
      } else if (n >= 3 && k == n - 2) {
        va.push_back(t);
      } else {
        tr.push_back(t);
      }
    }
  }

  ds.graph = Graph(ds.entities.size(), 1, tr, /*directed=*/false, item_begin);
  report.users = users.size();
  report.items = items.size();
  report.interactions = unique.size();
  report.duplicates_dropped = rows.size() - unique.size();
  report.entities = ds.entities.size();
  report.relations = 1;
  report.train = tr.size();
  report.valid = va.size();
  report.test = te.size();
  ds.report = report;
  ds.split = DatasetSplit::make(std::move(tr), std::move(va), std::move(te));
  return ds;
}

}  // namespace gcr
