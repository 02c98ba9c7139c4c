// Command-line front end: train, eval, check-logic, gen-synth.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gcr/gcr.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Hyperparameter flags, stored as text so that only flags actually given
// override the config file.
struct HyperFlags {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void add(CLI::App& app, const std::string& key, const std::string& help) {
    options[key] = app.add_option("--" + key, values[key], help);
  }

  gcr::TrainConfig resolve(const std::string& config_file) const {
    std::map<std::string, std::string> file;
    if (!config_file.empty()) file = gcr::read_config_file(config_file);
    std::string task = "kg";
    if (auto it = file.find("task"); it != file.end()) task = it->second;
    if (options.at("task")->count()) task = values.at("task");
    try {
      gcr::TrainConfig cfg = gcr::TrainConfig::for_task(gcr::parse_task(task));
      for (const auto& [k, v] : file) cfg.set(k, v);
      for (const auto& [k, opt] : options) {
        if (opt->count()) cfg.set(k, values.at(k));
      }
      cfg.validate();
      return cfg;
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
};

void add_hyper_flags(CLI::App& app, HyperFlags& f) {
  f.add(app, "task", "kg or rec");
  f.add(app, "dim", "embedding size");
  f.add(app, "layers", "affine layers per module");
  f.add(app, "dropout", "dropout rate");
  f.add(app, "alpha", "pairwise loss amplification");
  f.add(app, "lambda-logic", "logical regularizer weight");
  f.add(app, "lambda-l2", "L2 weight");
  f.add(app, "lr", "Adam learning rate");
  f.add(app, "neighbors", "neighbors sampled per endpoint");
  f.add(app, "epochs", "maximum epochs");
  f.add(app, "patience", "early-stopping patience");
  f.add(app, "seed", "random seed");
  f.add(app, "negatives", "sampled negatives per rec query");
  f.add(app, "precision", "f32 or f64");
  f.add(app, "batch-size", "triples per optimizer step");
  f.add(app, "threads", "evaluation threads (0 = all cores)");
  f.add(app, "fold-shuffle", "training OR-fold shuffle: neighbors (target last) or all");
  f.add(app, "logic-dropout", "apply dropout inside NOT/OR (true/false)");
  f.add(app, "normalize", "l2-normalize predicate embeddings (true/false)");
  for (auto& [k, opt] : f.options) {
    if (k == "task") opt->check(CLI::IsMember({"kg", "rec"}));
    if (k == "precision") opt->check(CLI::IsMember({"f32", "f64"}));
  }
}

gcr::Dataset load_dataset(const fs::path& path, gcr::Task task) {
  if (!fs::exists(path)) throw UsageError("--data: " + path.string() + " does not exist");
  if (task == gcr::Task::kKg) return fs::is_directory(path) ? gcr::load_tsv(path) : gcr::load_tsv_file(path);
  if (fs::is_directory(path)) {
    for (const char* name : {"ratings.csv", "ratings.tsv"}) {
      if (fs::exists(path / name)) return gcr::load_ratings_csv(path / name);
    }
    throw UsageError("--data: no ratings.csv in " + path.string());
  }
  return gcr::load_ratings_csv(path);
}

std::string report_line(const gcr::LoadReport& r) {
  std::string s = "loaded " + std::to_string(r.entities) + " entities, " + std::to_string(r.relations) +
                  " relations, " + std::to_string(r.train) + "/" + std::to_string(r.valid) + "/" +
                  std::to_string(r.test) + " train/valid/test";
  if (r.users) s += " (" + std::to_string(r.users) + " users, " + std::to_string(r.items) + " items)";
  if (r.duplicates_dropped) s += ", " + std::to_string(r.duplicates_dropped) + " duplicates dropped";
  return s;
}

template <gcr::Scalar T>
int run_train(const gcr::TrainConfig& cfg, const gcr::Dataset& ds, const fs::path& checkpoint,
              const std::string& log_path) {
  const gcr::ModelShape shape{ds.graph.num_entities(), ds.graph.num_relations(), cfg.dim, cfg.layers};
  gcr::ModelParams<T> model(shape, cfg.seed);
  const auto eval_opt = gcr::EvalOptions::from(cfg);

  gcr::ValidationHook<T> hook;
  if (!ds.split.valid.empty()) {
    hook = [&](const gcr::ModelParams<T>& m) {
      return gcr::validation_metric(cfg.task, gcr::evaluate(cfg.task, m, ds.graph, ds.split, ds.split.valid, eval_opt));
    };
  } else {
    gcr::log::warn("no validation triples; training all epochs and keeping the last");
  }

  std::ofstream log_file;
  if (!log_path.empty()) {
    log_file.open(log_path, std::ios::trunc);
    if (!log_file) throw std::runtime_error("cannot write " + log_path);
  }
  std::ostream& log = log_path.empty() ? std::cout : log_file;
  auto result = gcr::train(model, ds.graph, ds.split, cfg, hook, [&](const gcr::EpochReport& r) {
    log << gcr::to_json(r).dump() << '\n' << std::flush;
  });

  gcr::Checkpoint<T> ck{cfg, result.best, ds.entities, ds.relations, ds.graph.directed(), ds.graph.item_begin()};
  gcr::save_checkpoint(checkpoint, ck);
  gcr::log::info("best epoch " + std::to_string(result.best_epoch) + ", checkpoint written to " +
                 checkpoint.string());
  return 0;
}

/// Fails unless the dataset indexes entities and relations exactly as the
/// checkpoint does.
void check_compatible(const gcr::ModelShape& shape, const gcr::Vocabulary& entities,
                      const gcr::Vocabulary& relations, const gcr::Dataset& ds) {
  if (shape.relations != ds.graph.num_relations() || shape.entities != ds.graph.num_entities()) {
    throw gcr::DimensionError("checkpoint shape (" + std::to_string(shape.entities) + " entities, " +
                              std::to_string(shape.relations) + " relations) does not match dataset (" +
                              std::to_string(ds.graph.num_entities()) + " entities, " +
                              std::to_string(ds.graph.num_relations()) + " relations)");
  }
  if (!(entities == ds.entities) || !(relations == ds.relations)) {
    throw gcr::DimensionError("checkpoint vocabulary does not match the dataset's entity/relation names");
  }
}

template <gcr::Scalar T>
int run_eval(const fs::path& checkpoint, const fs::path& data, std::optional<gcr::Task> task_flag,
             const std::string& split, bool groups, bool table, std::optional<std::size_t> threads) {
  auto ck = gcr::load_checkpoint<T>(checkpoint);
  const gcr::Task task = task_flag.value_or(ck.config.task);
  const auto ds = load_dataset(data, task);
  gcr::log::info(report_line(ds.report));
  check_compatible(ck.model.shape(), ck.entities, ck.relations, ds);
  if (task == gcr::Task::kRec && !ds.graph.bipartite()) {
    throw std::invalid_argument("rec evaluation needs a user-item dataset");
  }
  auto opt = gcr::EvalOptions::from(ck.config);
  if (threads) opt.threads = *threads;
  const auto& triples = split == "valid" ? ds.split.valid : ds.split.test;
  const auto metrics = gcr::evaluate(task, ck.model, ds.graph, ds.split, triples, opt);

  nlohmann::json out = gcr::to_json(metrics);
  if (groups) out["groups"] = gcr::to_json(gcr::group_by_degree(task, ck.model, ds.graph, ds.split, triples, opt));
  if (table) {
    std::cout << gcr::format_table(metrics);
    if (groups) {
      for (const auto& b : out["groups"]["buckets"]) {
        std::cout << b["bucket"].get<std::string>() << " population " << b["population"] << ": "
                  << (b["metrics"].is_null() ? std::string("no queries") : b["metrics"].dump()) << '\n';
      }
    }
  } else {
    std::cout << out.dump(2) << '\n';
  }
  return 0;
}

int run_check_logic(std::size_t n_max) {
  if (n_max < 1 || n_max > gcr::kMaxOracleNeighbors) {
    throw UsageError("--n-max must be in [1, " + std::to_string(gcr::kMaxOracleNeighbors) + "]");
  }
  bool all = true;
  for (std::size_t n = 1; n <= n_max; ++n) {
    const auto rep = gcr::check_equivalence(n);
    all = all && rep.ok();
    std::cout << "n=" << n << ' ' << (rep.ok() ? "PASS" : "FAIL") << " (" << rep.assignments << " assignments, "
              << rep.disjuncts << " disjuncts)";
    if (rep.counterexample) std::cout << " counterexample " << gcr::format_assignment(*rep.counterexample);
    std::cout << '\n';
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-symbolic link prediction with learned logic modules"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "train a model and write its best checkpoint");
  HyperFlags hyper;
  std::string data, config_file, checkpoint = "gcr.ckpt", log_path;
  train->add_option("--data", data, "TSV directory/file (kg) or ratings CSV (rec)");
  train->add_option("--config", config_file, "flat key = value config file");
  train->add_option("--checkpoint", checkpoint, "output checkpoint path");
  train->add_option("--log", log_path, "write epoch JSON lines here instead of stdout");
  add_hyper_flags(*train, hyper);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_data, eval_ckpt, eval_task, eval_split = "test";
  bool groups = false, table = false;
  std::size_t eval_threads = 0;
  eval->add_option("--data", eval_data, "dataset the checkpoint was trained on");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint path");
  eval->add_option("--task", eval_task, "kg or rec (default: the checkpoint's task)")->check(CLI::IsMember({"kg", "rec"}));
  eval->add_option("--split", eval_split, "test or valid")->check(CLI::IsMember({"test", "valid"}));
  eval->add_flag("--groups", groups, "add the user-degree breakdown");
  eval->add_flag("--table", table, "print a text table instead of JSON");
  auto* threads_opt = eval->add_option("--threads", eval_threads, "evaluation threads (0 = all cores)");

  auto* check = app.add_subcommand("check-logic", "brute-force the clause/expansion equivalence");
  std::size_t n_max = 10;
  check->add_option("--n-max", n_max, "largest neighbor count to check");

  auto* synth = app.add_subcommand("gen-synth", "write a planted-rule graph as TSV files");
  gcr::SyntheticSpec spec;
  std::string out_dir;
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--entities", spec.entities, "entity count");
  synth->add_option("--relations", spec.relations, "base relation count");
  synth->add_option("--arity", spec.rule_arity, "rule body size");
  synth->add_option("--p", spec.edge_probability, "base edge probability");
  synth->add_option("--seed", spec.seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*train) {
      if (data.empty()) throw UsageError("--data is required");
      const auto cfg = hyper.resolve(config_file);
      const auto ds = load_dataset(data, cfg.task);
      gcr::log::info(report_line(ds.report));
      if (cfg.task == gcr::Task::kRec && !ds.graph.bipartite()) {
        throw std::invalid_argument("rec training needs a user-item dataset");
      }
      return cfg.double_precision ? run_train<double>(cfg, ds, checkpoint, log_path)
                                  : run_train<float>(cfg, ds, checkpoint, log_path);
    }
    if (*eval) {
      if (eval_data.empty()) throw UsageError("--data is required");
      if (eval_ckpt.empty()) throw UsageError("--checkpoint is required");
      std::optional<gcr::Task> task;
      if (!eval_task.empty()) task = gcr::parse_task(eval_task);
      std::optional<std::size_t> threads;
      if (threads_opt->count()) threads = eval_threads;
      return gcr::peek_checkpoint_dtype(eval_ckpt) == "f64"
                 ? run_eval<double>(eval_ckpt, eval_data, task, eval_split, groups, table, threads)
                 : run_eval<float>(eval_ckpt, eval_data, task, eval_split, groups, table, threads);
    }
    if (*check) return run_check_logic(n_max);
    if (*synth) {
      const auto g = gcr::gen_synthetic(spec);
      gcr::write_synthetic(g, out_dir);
      const auto rc = gcr::validate_synthetic(g, spec.rule_arity);
      std::cout << "planted " << g.planted << " edges: " << g.train.size() << " train, " << g.valid.size()
                << " valid, " << g.test.size() << " test lines; rule re-scan " << (rc.ok() ? "ok" : "FAILED")
                << '\n';
      return rc.ok() ? 0 : 1;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
