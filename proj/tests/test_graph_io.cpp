#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "gcr/graph.hpp"
#include "gcr/io.hpp"

using namespace gcr;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("gcr_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name) << text;
    return path_ / name;
  }

 private:
  fs::path path_;
};

}  // namespace

TEST(CanonicalOrient, Examples) {
  EXPECT_EQ(canonical_orient({7, 0, 3}, false), (Triple{3, 0, 7}));
  EXPECT_EQ(canonical_orient({3, 0, 7}, false), (Triple{3, 0, 7}));
  EXPECT_EQ(canonical_orient({7, 0, 3}, true), (Triple{7, 0, 3}));
}

TEST(CanonicalOrient, IdempotentAndSwapInvariant) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Triple t{static_cast<EntityId>(rng() % 50), static_cast<RelationId>(rng() % 4),
                   static_cast<EntityId>(rng() % 50)};
    const Triple once = canonical_orient(t, false);
    EXPECT_EQ(canonical_orient(once, false), once);
    EXPECT_EQ(canonical_orient({t.tail, t.relation, t.head}, false), once);
    EXPECT_LE(once.head, once.tail);
  }
}

TEST(LoadTsv, SmallFileCounts) {
  TempDir dir;
  dir.write("train.txt", "a\tr\tb\nb\tr\ta\na\tr\tb\n");
  const auto ds = load_tsv(dir.path());
  EXPECT_EQ(ds.graph.num_entities(), 2u);
  EXPECT_EQ(ds.graph.num_relations(), 1u);
  EXPECT_LE(ds.graph.triples().size(), 3u);
  EXPECT_EQ(ds.graph.triples().size(), 2u);
  EXPECT_EQ(ds.report.duplicates_dropped, 1u);
  EXPECT_EQ(ds.entities.name(0), "a");
}

TEST(LoadTsv, MalformedLineNamesLineNumber) {
  TempDir dir;
  auto p = dir.write("one.txt", "a b\n");
  try {
    load_tsv_file(p);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
    EXPECT_NE(std::string(e.what()).find(":1:"), std::string::npos);
  }
  auto q = dir.write("three.txt", "a\tr\tb\n\nc\tr\n");
  try {
    load_tsv_file(q);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(LoadTsv, UnseenTestEntitiesAreKeptAndFlagged) {
  TempDir dir;
  dir.write("train.txt", "a\tr\tb\nb\tr\tc\n");
  dir.write("valid.txt", "a\tr\tc\n");
  dir.write("test.txt", "d\ts\ta\na\tr\tb\n");
  const auto ds = load_tsv(dir.path());
  EXPECT_EQ(ds.report.unseen_entities, 1u);
  EXPECT_EQ(ds.report.unseen_relations, 1u);
  EXPECT_EQ(ds.graph.num_entities(), 4u);
  EXPECT_EQ(ds.entities.find("d").value(), 3u);
  // the repeated train triple in test is dropped to keep splits disjoint
  EXPECT_EQ(ds.split.test.size(), 1u);
  EXPECT_EQ(ds.report.duplicates_dropped, 1u);
  EXPECT_EQ(ds.split.known.size(), 4u);
}

TEST(LoadTsv, SplitsDisjointAndKnownIsUnion) {
  TempDir dir;
  std::string train, valid, test;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    const std::string line = "e" + std::to_string(rng() % 30) + "\tr" + std::to_string(rng() % 3) + "\te" +
                             std::to_string(rng() % 30) + "\n";
    (i % 10 == 0 ? valid : i % 10 == 1 ? test : train) += line;
  }
  dir.write("train.txt", train);
  dir.write("valid.tsv", valid);
  dir.write("test.txt", test);
  const auto ds = load_tsv(dir.path());
  const TripleSet tr(ds.split.train), va(ds.split.valid);
  for (const auto& t : ds.split.valid) EXPECT_FALSE(tr.contains(t));
  for (const auto& t : ds.split.test) {
    EXPECT_FALSE(tr.contains(t));
    EXPECT_FALSE(va.contains(t));
  }
  EXPECT_EQ(ds.split.known.size(), ds.split.train.size() + ds.split.valid.size() + ds.split.test.size());
}

TEST(LoadRatings, LeaveLastOut) {
  TempDir dir;
  auto p = dir.write("r.csv",
                     "user,item,rating,timestamp\n"
                     "u1,i1,5,1\nu1,i3,4,3\nu1,i2,3,2\n"
                     "u2,i1,5,10\nu2,i2,1,11\n");
  const auto ds = load_ratings_csv(p);
  EXPECT_TRUE(ds.report.header_detected);
  EXPECT_EQ(ds.report.users, 2u);
  EXPECT_EQ(ds.report.items, 3u);
  EXPECT_EQ(ds.report.interactions, 5u);
  ASSERT_TRUE(ds.graph.item_begin().has_value());
  const EntityId ib = *ds.graph.item_begin();
  EXPECT_EQ(ib, 2u);
  const auto id = [&](const std::string& n) { return ds.entities.find(n).value(); };
  ASSERT_EQ(ds.split.test.size(), 1u);
  ASSERT_EQ(ds.split.valid.size(), 1u);
  EXPECT_EQ(ds.split.test[0], (Triple{id("u:u1"), 0, id("i:i3")}));
  EXPECT_EQ(ds.split.valid[0], (Triple{id("u:u1"), 0, id("i:i2")}));
  // u2 has two interactions: both stay in train
  EXPECT_EQ(ds.split.train.size(), 3u);
  EXPECT_TRUE(ds.graph.contains({id("u:u2"), 0, id("i:i2")}));
  EXPECT_FALSE(ds.graph.directed());
  for (const auto& t : ds.graph.triples()) {
    EXPECT_LT(t.head, ib);
    EXPECT_GE(t.tail, ib);
  }
}

TEST(LoadRatings, Errors) {
  TempDir dir;
  EXPECT_THROW(load_ratings_csv(dir.write("empty.csv", "")), ParseError);
  try {
    load_ratings_csv(dir.write("bad.csv", "u1,i1,5,1\nu1,i2,5\n"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(load_ratings_csv(dir.write("nan.csv", "u1,i1,5,1\nu1,i2,x,y\n")), ParseError);
}

TEST(GraphStore, AdjacencyAndDegrees) {
  const Graph g(4, 2, {{0, 0, 1}, {1, 1, 2}, {2, 0, 2}, {0, 0, 1}}, true);
  EXPECT_EQ(g.triples().size(), 3u);
  EXPECT_EQ(g.degree(0), 1u);
  EXPECT_EQ(g.degree(1), 2u);
  EXPECT_EQ(g.degree(2), 2u);  // self-loop counted once
  EXPECT_EQ(g.degree(3), 0u);
  EXPECT_THROW(Graph(2, 1, {{0, 1, 1}}, true), std::out_of_range);
  EXPECT_THROW(Graph(2, 1, {}, true, EntityId{1}), std::invalid_argument);
}

TEST(SampleNeighbors, UnderFullAndExclusion) {
  const Graph g(5, 1, {{0, 0, 1}, {0, 0, 2}, {0, 0, 3}, {4, 0, 1}}, true);
  std::mt19937_64 rng(2);
  const Triple target{0, 0, 1};
  for (int i = 0; i < 50; ++i) {
    const auto ns = sample_neighbors(g, target, 5, rng);
    EXPECT_EQ(ns.size(), 3u);  // head side {0-2, 0-3}, tail side {4-1}
    for (const auto& n : ns) EXPECT_NE(n, target);
  }
  const Graph iso(3, 1, {{0, 0, 1}}, true);
  EXPECT_TRUE(sample_neighbors(iso, Triple{2, 0, 2}, 5, rng).empty());
}

TEST(SampleNeighbors, NoDuplicatesAcrossSides) {
  std::vector<Triple> ts;
  for (EntityId e = 2; e < 8; ++e) ts.push_back({0, 0, e});
  ts.push_back({0, 1, 1});
  ts.push_back({0, 0, 1});
  const Graph g(8, 2, ts, true);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    auto ns = sample_neighbors(g, Triple{0, 0, 1}, 10, rng);
    std::sort(ns.begin(), ns.end());
    EXPECT_EQ(std::adjacent_find(ns.begin(), ns.end()), ns.end());
    EXPECT_EQ(ns.size(), 7u);
  }
}

TEST(SampleNeighbors, UniformInclusion) {
  // Head 0 has 10 incident edges besides the target; the tail is otherwise isolated.
  std::vector<Triple> ts{{0, 0, 11}};
  for (EntityId e = 1; e <= 10; ++e) ts.push_back({0, 0, e});
  const Graph g(12, 1, ts, true);
  std::mt19937_64 rng(5);
  std::map<Triple, int> hits;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto ns = sample_neighbors(g, Triple{0, 0, 11}, 5, rng);
    ASSERT_EQ(ns.size(), 5u);
    for (const auto& n : ns) ++hits[n];
  }
  ASSERT_EQ(hits.size(), 10u);
  for (const auto& [t, c] : hits) EXPECT_NEAR(static_cast<double>(c) / draws, 0.5, 0.03) << to_string(t);
}

TEST(SampleNegative, NeverKnownAndKeepsOtherSlots) {
  std::mt19937_64 rng(6);
  std::vector<Triple> ts;
  for (int i = 0; i < 60; ++i) {
    ts.push_back({static_cast<EntityId>(rng() % 20), static_cast<RelationId>(rng() % 2),
                  static_cast<EntityId>(rng() % 20)});
  }
  const Graph g(20, 2, ts, true);
  const auto split = DatasetSplit::make(ts, {{1, 0, 2}}, {{3, 1, 4}});
  for (int i = 0; i < 2000; ++i) {
    const Triple& t = ts[i % ts.size()];
    const Slot slot = i % 2 ? Slot::kHead : Slot::kTail;
    const Triple n = sample_negative(g, split.known, t, slot, rng);
    EXPECT_FALSE(split.known.contains(n));
    EXPECT_EQ(n.relation, t.relation);
    if (slot == Slot::kTail) {
      EXPECT_EQ(n.head, t.head);
    } else {
      EXPECT_EQ(n.tail, t.tail);
    }
  }
}

TEST(SampleNegative, SaturatedGraphThrows) {
  const std::vector<Triple> all{{0, 0, 0}, {0, 0, 1}, {1, 0, 0}, {1, 0, 1}};
  const Graph g(2, 1, all, true);
  const auto split = DatasetSplit::make(all, {}, {});
  std::mt19937_64 rng(7);
  EXPECT_THROW(sample_negative(g, split.known, all[1], Slot::kTail, rng), SaturationError);
  EXPECT_THROW(sample_negative(g, split.known, all[1], Slot::kHead, rng), SaturationError);
}

TEST(SampleNegative, BipartiteDrawsItemsOnly) {
  // users 0..2, items 3..6
  const std::vector<Triple> ts{{0, 0, 3}, {1, 0, 4}, {2, 0, 5}};
  const Graph g(7, 1, ts, false, EntityId{3});
  const auto split = DatasetSplit::make(ts, {}, {});
  std::mt19937_64 rng(8);
  for (int i = 0; i < 500; ++i) {
    const Triple n = sample_negative(g, split.known, ts[0], Slot::kTail, rng);
    EXPECT_GE(n.tail, 3u);
    EXPECT_NE(n.tail, 3u);
    EXPECT_EQ(n.head, 0u);
  }
}

TEST(FilteredCandidates, ToyGraph) {
  // (0,r,1) is the query; (0,r,2) is another known tail.
  const std::vector<Triple> train{{0, 0, 1}, {2, 0, 3}};
  const Graph g(4, 1, train, true);
  const auto split = DatasetSplit::make(train, {}, {{0, 0, 2}});
  const auto c = filtered_candidates(g, split.known, {0, 0, 1}, Slot::kTail);
  EXPECT_EQ(c.size(), 4u - 1u);
  EXPECT_EQ(std::count(c.begin(), c.end(), 1u), 1);
  for (EntityId e : c) {
    if (e != 1) EXPECT_FALSE(split.known.contains({0, 0, e}));
  }
  const auto h = filtered_candidates(g, split.known, {0, 0, 1}, Slot::kHead);
  EXPECT_EQ(h.size(), 4u);
}
