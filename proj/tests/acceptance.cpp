// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--strict]
//
// Without --strict the exit status is 0 whenever every criterion ran to
// completion, and the FAIL lines carry the verdict. --strict also fails the
// process on any FAIL line. Optional real-data checks read GCR_FB15K237_DIR
// (train/valid/test) and GCR_BEAUTY_CSV (user,item,rating,timestamp).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gcr/gcr.hpp"

using namespace gcr;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const Verdict& v) {
  std::cout << "C" << id << " " << (v.pass ? "PASS" : "FAIL") << "  " << name << ": " << v.detail << std::endl;
  failures += !v.pass;
}

// 1 ----------------------------------------------------------------------

Verdict logic_equivalence() {
  const auto t0 = Clock::now();
  std::size_t assignments = 0;
  std::string bad;
  for (std::size_t n = 1; n <= 10; ++n) {
    const auto r = check_equivalence(n);
    assignments += r.assignments;
    if (!r.ok() && bad.empty()) bad = fmt("n=%zu counterexample %s", n, format_assignment(*r.counterexample).c_str());
  }
  const double secs = seconds_since(t0);
  if (!bad.empty()) return {false, bad};
  return {secs < 1.0, fmt("n=1..10, %zu assignments, %.3f s (limit 1 s)", assignments, secs)};
}

// 2 ----------------------------------------------------------------------

struct FdResult {
  double rel = 0;
  std::size_t entries = 0;
};

// Central differences over every trainable entry; error is measured on the
// whole gradient vector.
FdResult finite_difference(ModelParams<double>& m, const std::function<Var(Tape<double>&)>& loss) {
  Tape<double> tape;
  m.zero_grad();
  tape.backward(loss(tape));
  double diff2 = 0, a2 = 0, n2 = 0;
  FdResult out;
  constexpr double h = 1e-5;
  for (auto& p : m.parameters()) {
    if (!p.trainable) continue;
    auto& v = p.value.storage();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double x = v[i];
      v[i] = x + h;
      tape.reset();
      const double fp = tape.scalar_value(loss(tape));
      v[i] = x - h;
      tape.reset();
      const double fm = tape.scalar_value(loss(tape));
      v[i] = x;
      const double numeric = (fp - fm) / (2 * h);
      const double analytic = p.grad.storage()[i];
      diff2 += (analytic - numeric) * (analytic - numeric);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
      ++out.entries;
    }
  }
  out.rel = std::sqrt(diff2) / std::max(std::sqrt(a2) + std::sqrt(n2), 1e-300);
  return out;
}

Verdict gradient_correctness() {
  const auto t0 = Clock::now();
  constexpr int kConfigs = 24;
  const double lambdas[] = {0.0, 1e-2, 1.0};
  double worst = 0;
  std::size_t entries = 0;
  bool finite = true;
  for (int k = 0; k < kConfigs; ++k) {
    std::mt19937_64 rng(1000 + k);
    ModelShape shape;
    shape.entities = 7;
    shape.relations = 1 + rng() % 3;
    shape.dim = 2 + rng() % 4;
    shape.layers = 1 + rng() % 3;
    ModelParams<double> m(shape, 50 + k, 0.5);
    auto entity = [&] { return static_cast<EntityId>(rng() % shape.entities); };
    auto relation = [&] { return static_cast<RelationId>(rng() % shape.relations); };
    const Triple target{entity(), relation(), entity()};
    std::vector<Triple> neighbors;
    for (std::size_t i = 0, n = rng() % 4; i < n; ++i) {
      Triple t{entity(), relation(), entity()};
      if (t != target) neighbors.push_back(t);
    }
    Triple corrupt = target;
    corrupt.tail = static_cast<EntityId>((target.tail + 1 + rng() % (shape.entities - 1)) % shape.entities);
    const Clause pos = build_clause(target, neighbors);
    Clause neg = pos;
    const bool clash = std::find(neighbors.begin(), neighbors.end(), corrupt) != neighbors.end();
    if (!clash) neg = with_target(pos, corrupt);
    const bool normalize = k % 2 == 0;
    const double lambda = lambdas[k % 3];

    const auto r = finite_difference(m, [&](Tape<double>& tape) {
      ReasoningNet<double> net(m, tape);
      ForwardContext ctx;
      ctx.normalize_predicates = normalize;
      std::vector<Var> collected;
      ctx.collected = &collected;
      const Var sp = net.score_clause(pos, ctx);
      const Var sn = net.score_clause(neg, ctx);
      Var loss = pairwise_loss(tape, sp, sn, 10.0);
      if (lambda > 0) loss = tape.add(loss, tape.affine(logic_regularizer(net, collected, ctx).total, lambda));
      return loss;
    });
    finite = finite && std::isfinite(r.rel);
    worst = std::max(worst, r.rel);
    entries += r.entries;
  }
  const double secs = seconds_since(t0);
  return {finite && worst <= 1e-6 && secs < 30.0,
          fmt("%d configurations, %zu entries, worst rel. error %.2e (limit 1e-6), %.1f s (limit 30 s)", kConfigs,
              entries, worst, secs)};
}

// 3 ----------------------------------------------------------------------

Verdict metric_oracles() {
  const std::vector<std::size_t> ranks{1, 2, 4};
  struct Row {
    const char* what;
    double got, want;
  };
  const Row rows[] = {
      {"mrr([1,2,4])", mrr(ranks), 0.5833333},
      {"hit_at_k([1,2,4],3)", hit_at_k(ranks, 3), 0.6666667},
      {"ndcg_at_k(2,5)", ndcg_at_k(2, 5), 0.6309298},
      {"pairwise_loss(s,s)", pairwise_loss_value(0.3, 0.3, 10.0), 0.6931472},
  };
  bool ok = true;
  std::ostringstream os;
  for (const auto& r : rows) {
    ok = ok && std::abs(r.got - r.want) <= 1e-6;
    os << r.what << "=" << fmt("%.7f", r.got) << " ";
  }
  return {ok, os.str() + "(tol 1e-6)"};
}

// 4, 5, 6, 7 ---------------------------------------------------------------

struct PlantedData {
  fs::path dir;
  Dataset ds;
};

PlantedData planted_data(const fs::path& root) {
  PlantedData p;
  p.dir = root / "planted";
  write_synthetic(gen_synthetic(SyntheticSpec{}), p.dir);
  p.ds = load_tsv(p.dir);
  return p;
}

TrainConfig planted_config(std::uint64_t seed, double lambda_logic) {
  TrainConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 50;
  cfg.lambda_logic = lambda_logic;
  cfg.seed = seed;
  cfg.threads = 1;
  return cfg;
}

struct PlantedRun {
  double untrained_hit3 = 0;
  double trained_hit3 = 0;
  double trained_mrr = 0;
  double logic_first = 0;
  double logic_last = 0;
  double epoch1_loss = 0;
  bool finite = true;
  double seconds = 0;
  ModelParams<float> model;
};

PlantedRun run_planted(const Dataset& ds, const TrainConfig& cfg) {
  const auto t0 = Clock::now();
  PlantedRun run;
  run.model = ModelParams<float>(ModelShape{ds.graph.num_entities(), ds.graph.num_relations(), cfg.dim, cfg.layers, 0},
                                 cfg.seed);
  const auto opt = EvalOptions::from(cfg);
  run.untrained_hit3 = evaluate_kg(run.model, ds.graph, ds.split, ds.split.test, opt).hit_at(3);
  const auto result = train(run.model, ds.graph, ds.split, cfg, {}, [&](const EpochReport& e) {
    run.finite = run.finite && std::isfinite(e.loss) && std::isfinite(e.logic);
    if (e.epoch == 1) {
      run.logic_first = e.logic;
      run.epoch1_loss = e.loss;
    }
    run.logic_last = e.logic;
  });
  run.model = result.best;
  const auto trained = evaluate_kg(run.model, ds.graph, ds.split, ds.split.test, opt);
  run.trained_hit3 = trained.hit_at(3);
  run.trained_mrr = trained.mrr;
  run.seconds = seconds_since(t0);
  return run;
}

Verdict planted_learning(const PlantedRun& r, std::size_t queries) {
  const bool ok = r.finite && r.trained_hit3 >= 2 * r.untrained_hit3 && r.trained_hit3 > 0 && r.seconds < 300;
  return {ok, fmt("test Hit@3 %.4f vs untrained %.4f over %zu queries (need >= 2x), MRR %.4f, %.0f s (limit 300 s)",
                  r.trained_hit3, r.untrained_hit3, queries, r.trained_mrr, r.seconds)};
}

struct AblationGrid {
  static constexpr double lambdas[4] = {0.0, 1e-6, 1e-4, 1e-2};
  static constexpr std::uint64_t kSeeds = 5;
  double hit3[4][kSeeds];
  double logic_last[4][kSeeds];
};

AblationGrid run_ablation(const Dataset& ds, const PlantedRun& seed1_default) {
  AblationGrid grid;
  for (int li = 0; li < 4; ++li) {
    for (std::uint64_t s = 1; s <= AblationGrid::kSeeds; ++s) {
      const PlantedRun r =
          li == 2 && s == 1 ? seed1_default : run_planted(ds, planted_config(s, AblationGrid::lambdas[li]));
      grid.hit3[li][s - 1] = r.trained_hit3;
      grid.logic_last[li][s - 1] = r.logic_last;
    }
  }
  return grid;
}

Verdict logic_convergence(const PlantedRun& r, const AblationGrid* grid) {
  const double ratio = r.logic_last / r.logic_first;
  std::string detail = fmt("logic regularizer epoch 1 %.4f, epoch 50 %.4f, ratio %.3f (need <= 0.5)", r.logic_first,
                           r.logic_last, ratio);
  if (grid) detail += fmt("; same seed with lambda_logic 0 ends at %.4f", grid->logic_last[0][0]);
  return {r.finite && ratio <= 0.5, detail};
}

Verdict ablation(const AblationGrid& grid) {
  std::cout << "    lambda_logic   seed1   seed2   seed3   seed4   seed5    mean\n";
  double mean[4];
  for (int li = 0; li < 4; ++li) {
    mean[li] = 0;
    std::cout << fmt("    %-12g", AblationGrid::lambdas[li]);
    for (std::uint64_t s = 0; s < AblationGrid::kSeeds; ++s) {
      std::cout << fmt("  %.4f", grid.hit3[li][s]);
      mean[li] += grid.hit3[li][s] / AblationGrid::kSeeds;
    }
    std::cout << fmt("  %.4f", mean[li]) << "\n";
  }
  int best = 1;
  for (int li = 2; li < 4; ++li) best = mean[li] > mean[best] ? li : best;
  return {mean[best] >= mean[0], fmt("best lambda_logic %g mean Hit@3 %.4f vs lambda_logic 0 mean %.4f",
                                     AblationGrid::lambdas[best], mean[best], mean[0])};
}

Verdict determinism(const Dataset& ds, const PlantedRun& trained, const fs::path& root) {
  auto cfg = planted_config(7, 1e-4);
  cfg.epochs = 1;
  double loss[2];
  for (double& l : loss) {
    ModelParams<float> m(ModelShape{ds.graph.num_entities(), ds.graph.num_relations(), cfg.dim, cfg.layers, 0},
                         cfg.seed);
    Trainer<float> trainer(m, ds.graph, ds.split, cfg);
    l = trainer.run_epoch(1).loss;
  }
  const bool same_loss = std::memcmp(&loss[0], &loss[1], sizeof(double)) == 0;

  Checkpoint<float> ck;
  ck.config = planted_config(1, 1e-4);
  ck.model = trained.model;
  ck.entities = ds.entities;
  ck.relations = ds.relations;
  ck.directed = ds.graph.directed();
  save_checkpoint(root / "planted.ckpt", ck);
  const auto back = load_checkpoint<float>(root / "planted.ckpt");
  const auto opt = EvalOptions::from(ck.config);
  const std::string before = to_json(evaluate_kg(trained.model, ds.graph, ds.split, ds.split.test, opt)).dump(2);
  const std::string after = to_json(evaluate_kg(back.model, ds.graph, ds.split, ds.split.test, opt)).dump(2);
  return {same_loss && before == after,
          fmt("epoch-1 loss %.17g vs %.17g (%s); checkpoint eval JSON %s", loss[0], loss[1],
              same_loss ? "bit-identical" : "differs", before == after ? "byte-identical" : "differs")};
}

// 8 ----------------------------------------------------------------------

Verdict undirected_symmetry() {
  // users 0..5, items 6..13
  std::vector<Triple> edges;
  std::mt19937_64 rng(8);
  for (EntityId u = 0; u < 6; ++u) {
    for (EntityId i = 6; i < 14; ++i) {
      if (rng() % 3 == 0 || i == 6 + u) edges.push_back(rng() % 2 ? Triple{u, 0, i} : Triple{i, 0, u});
    }
  }
  const Graph g(14, 1, edges, false, 6);
  ModelParams<float> m(ModelShape{14, 1, 16, 2, 0}, 3);
  Tape<float> tape;
  std::size_t compared = 0;
  bool ok = true;
  for (EntityId u = 0; u < 6; ++u) {
    for (EntityId i = 6; i < 14; ++i) {
      const Triple forward{u, 0, i}, backward{i, 0, u};
      std::mt19937_64 ra(u * 100 + i), rb(u * 100 + i);
      const auto na = sample_neighbors(g, forward, 5, ra);
      const auto nb = sample_neighbors(g, backward, 5, rb);
      const float a = score_clause_value(m, build_clause(g.canonical(forward), na), tape, true);
      const float b = score_clause_value(m, build_clause(g.canonical(backward), nb), tape, true);
      ok = ok && na == nb && std::memcmp(&a, &b, sizeof a) == 0;
      ++compared;
    }
  }

  // the whole evaluator on flipped test triples
  std::vector<Triple> test, flipped;
  for (const auto& t : g.triples()) {
    if (t.head % 2 == 0) {
      test.push_back(t);
      flipped.push_back({t.tail, t.relation, t.head});
    }
  }
  const auto split = DatasetSplit::make(g.triples(), {}, test);
  EvalOptions opt;
  opt.threads = 1;
  opt.negatives = 4;
  const auto ja = to_json(evaluate_rec(m, g, split, test, opt)).dump();
  const auto jb = to_json(evaluate_rec(m, g, split, flipped, opt)).dump();
  ok = ok && ja == jb;
  return {ok, fmt("%zu (u,r,i)/(i,r,u) pairs bit-identical scores; flipped-query rec eval JSON %s", compared,
                  ja == jb ? "identical" : "differs")};
}

// 9 ----------------------------------------------------------------------

Verdict loader_formats(const fs::path& root) {
  std::ostringstream os;
  bool ok = true;

  // Freebase-style ids and relation paths, tab separated
  const auto fb = root / "fb_fixture";
  fs::create_directories(fb);
  std::ofstream(fb / "train.txt") << "/m/027rn\t/location/country/form_of_government\t/m/06cx9\n"
                                  << "/m/017dcd\t/tv/tv_program/regular_cast./tv/regular_tv_appearance/actor\t/m/06v8s0\n"
                                  << "/m/07s9rl0\t/media_common/netflix_genre/titles\t/m/0170z3\n";
  std::ofstream(fb / "valid.txt") << "/m/07s9rl0\t/location/country/form_of_government\t/m/06cx9\n";
  std::ofstream(fb / "test.txt") << "/m/027rn\t/media_common/netflix_genre/titles\t/m/0170z3\n";
  const auto f = load_tsv(fb);
  ok = ok && f.report.entities == 6 && f.report.relations == 3 && f.report.train == 3 && f.report.valid == 1 &&
       f.report.test == 1;

  // Amazon ratings dump: no header
  const auto az = root / "ratings_fixture.csv";
  std::ofstream(az) << "A1YJEY40YUW4SE,7806397051,1.0,1391040000\n"
                    << "A1YJEY40YUW4SE,9759091062,5.0,1391040001\n"
                    << "A1YJEY40YUW4SE,9788072216,3.0,1391040002\n"
                    << "A60XNB876KYML,7806397051,4.0,1397779200\n";
  const auto a = load_ratings_csv(az);
  ok = ok && a.graph.item_begin() == std::optional<EntityId>(2) && a.graph.num_entities() == 5 &&
       a.report.train + a.report.valid + a.report.test == 4;
  os << "format fixtures " << (ok ? "ok" : "wrong counts");

  if (const char* dir = std::getenv("GCR_FB15K237_DIR")) {
    const auto d = load_tsv(dir);
    const bool match = d.report.entities == 14541 && d.report.relations == 237 && d.report.train == 272115;
    ok = ok && match;
    os << fmt("; FB15k-237 %zu entities / %zu relations / %zu train (expect 14541 / 237 / 272115)", d.report.entities,
              d.report.relations, d.report.train);
  } else {
    os << "; FB15k-237 not supplied";
  }
  if (const char* csv = std::getenv("GCR_BEAUTY_CSV")) {
    const auto d = load_ratings_csv(csv);
    const std::size_t users = d.graph.item_begin().value_or(0);
    const std::size_t items = d.graph.num_entities() - users;
    const std::size_t inter = d.report.train + d.report.valid + d.report.test;
    const bool match = users == 22363 && items == 12101 && inter == 198502;
    ok = ok && match;
    os << fmt("; Beauty %zu users / %zu items / %zu interactions (expect 22363 / 12101 / 198502)", users, items,
              inter);
  } else {
    os << "; Beauty not supplied";
  }
  os << "; full-scale benchmark numbers are outside desk scale";
  return {ok, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const bool strict = argc > 1 && std::string(argv[1]) == "--strict";
  const auto root = fs::temp_directory_path() / "gcr_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  bool crashed = false;
  auto guarded = [&](int id, const char* name, auto&& fn) {
    try {
      report(id, name, fn());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("error: ") + e.what()});
      crashed = true;
    }
  };

  guarded(1, "logic equivalence", logic_equivalence);
  guarded(2, "gradient correctness", gradient_correctness);
  guarded(3, "metric oracles", metric_oracles);

  std::optional<PlantedData> planted;
  std::optional<PlantedRun> run;
  try {
    planted = planted_data(root);
    run = run_planted(planted->ds, planted_config(1, 1e-4));
  } catch (const std::exception& e) {
    std::cout << "planted run error: " << e.what() << std::endl;
    crashed = true;
  }
  auto need_run = [&]() -> const PlantedRun& {
    if (!run) throw std::runtime_error("planted run unavailable");
    return *run;
  };
  guarded(4, "planted-rule learning",
          [&] { return planted_learning(need_run(), 2 * planted->ds.split.test.size()); });
  std::optional<AblationGrid> grid;
  std::string grid_error;
  try {
    grid = run_ablation(planted->ds, need_run());
  } catch (const std::exception& e) {
    grid_error = e.what();
    crashed = true;
  }
  guarded(5, "logic-law convergence", [&] { return logic_convergence(need_run(), grid ? &*grid : nullptr); });
  guarded(6, "ablation direction", [&] {
    if (!grid) throw std::runtime_error(grid_error);
    return ablation(*grid);
  });
  guarded(7, "determinism and persistence", [&] { return determinism(planted->ds, need_run(), root); });
  guarded(8, "undirected symmetry", undirected_symmetry);
  guarded(9, "loader formats and scale", [&] { return loader_formats(root); });

  std::cout << (9 - failures) << "/9 criteria PASS" << std::endl;
  fs::remove_all(root);
  if (crashed) return 1;
  return strict && failures > 0 ? 1 : 0;
}
