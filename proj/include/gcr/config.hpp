#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "gcr/errors.hpp"

namespace gcr {

enum class Task { kKg, kRec };

inline const char* to_string(Task t) { return t == Task::kKg ? "kg" : "rec"; }

inline Task parse_task(const std::string& s) {
  if (s == "kg") return Task::kKg;
  if (s == "rec") return Task::kRec;
  throw std::invalid_argument("unknown task '" + s + "' (expected kg or rec)");
}

/// Hyperparameters of one training run. Defaults follow the knowledge-graph
/// setting; for_task(kRec) switches to the recommendation setting.
struct TrainConfig {
  Task task = Task::kKg;
  std::size_t dim = 64;
  std::size_t layers = 3;
  double dropout = 0.2;
  double alpha = 10.0;
  double lambda_logic = 1e-4;
  double lambda_l2 = 1e-6;
  double lr = 1e-3;
  std::size_t neighbors = 5;
  std::size_t epochs = 100;
  std::size_t patience = 5;
  // Training triples averaged into one optimizer step.
  std::size_t batch_size = 1;
  std::uint64_t seed = 1;
  bool double_precision = false;
  bool normalize = true;
  // Let the target take any position in the training OR fold.
  bool shuffle_target = false;
  bool logic_dropout = false;
  // Recommendation evaluation: sampled negatives per held-out item.
  std::size_t negatives = 100;
  // Evaluation worker threads; 0 picks the hardware concurrency.
  std::size_t threads = 0;

  static TrainConfig for_task(Task t) {
    TrainConfig c;
    c.task = t;
    if (t == Task::kRec) {
      c.layers = 2;
      c.lambda_logic = 1e-6;
      c.lambda_l2 = 1e-5;
    }
    return c;
  }

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("invalid config: ") + what);
    };
    require(dim >= 1, "dim must be >= 1");
    require(layers >= 1, "layers must be >= 1");
    require(dropout >= 0 && dropout < 1, "dropout must be in [0, 1)");
    require(alpha > 0, "alpha must be positive");
    require(lambda_logic >= 0, "lambda-logic must be >= 0");
    require(lambda_l2 >= 0, "lambda-l2 must be >= 0");
    require(lr > 0, "lr must be positive");
    require(neighbors >= 1, "neighbors must be >= 1");
    require(epochs >= 1, "epochs must be >= 1");
    require(patience >= 1, "patience must be >= 1");
    require(batch_size >= 1, "batch-size must be >= 1");
  }

  /// Applies one "key=value" setting; keys match the long CLI flag names.
  void set(const std::string& key, const std::string& value) {
    auto numeric = [&](auto parse) {
      std::size_t used = 0;
      try {
        const auto v = parse(value, &used);
        if (used == value.size()) return v;
      } catch (const std::logic_error&) {
      }
      throw std::invalid_argument("invalid value '" + value + "' for " + key);
    };
    auto as_size = [&] {
      if (value.starts_with('-')) throw std::invalid_argument("invalid value '" + value + "' for " + key);
      return static_cast<std::size_t>(numeric([](const std::string& s, std::size_t* n) { return std::stoull(s, n); }));
    };
    auto as_real = [&] { return numeric([](const std::string& s, std::size_t* n) { return std::stod(s, n); }); };
    if (key == "task") task = parse_task(value);
    else if (key == "dim") dim = as_size();
    else if (key == "layers") layers = as_size();
    else if (key == "dropout") dropout = as_real();
    else if (key == "alpha") alpha = as_real();
    else if (key == "lambda-logic") lambda_logic = as_real();
    else if (key == "lambda-l2") lambda_l2 = as_real();
    else if (key == "lr") lr = as_real();
    else if (key == "neighbors") neighbors = as_size();
    else if (key == "epochs") epochs = as_size();
    else if (key == "patience") patience = as_size();
    else if (key == "batch-size") batch_size = as_size();
    else if (key == "seed") seed = as_size();
    else if (key == "negatives") negatives = as_size();
    else if (key == "threads") threads = as_size();
    else if (key == "normalize") normalize = parse_bool(key, value);
    else if (key == "fold-shuffle") {
      if (value != "all" && value != "neighbors") throw std::invalid_argument("fold-shuffle must be all or neighbors");
      shuffle_target = value == "all";
    } else if (key == "logic-dropout") logic_dropout = parse_bool(key, value);
    else if (key == "precision") {
      if (value != "f32" && value != "f64") throw std::invalid_argument("precision must be f32 or f64");
      double_precision = value == "f64";
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }

  static bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw std::invalid_argument(key + " must be true or false");
  }

  std::map<std::string, std::string> to_map() const {
    auto num = [](double v) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      return std::string(buf);
    };
    return {{"task", to_string(task)},
            {"dim", std::to_string(dim)},
            {"layers", std::to_string(layers)},
            {"dropout", num(dropout)},
            {"alpha", num(alpha)},
            {"lambda-logic", num(lambda_logic)},
            {"lambda-l2", num(lambda_l2)},
            {"lr", num(lr)},
            {"neighbors", std::to_string(neighbors)},
            {"epochs", std::to_string(epochs)},
            {"patience", std::to_string(patience)},
            {"batch-size", std::to_string(batch_size)},
            {"seed", std::to_string(seed)},
            {"negatives", std::to_string(negatives)},
            {"threads", std::to_string(threads)},
            {"normalize", normalize ? "true" : "false"},
            {"fold-shuffle", shuffle_target ? "all" : "neighbors"},
            {"logic-dropout", logic_dropout ? "true" : "false"},
            {"precision", double_precision ? "f64" : "f32"}};
  }
};

/// Reads a flat "key = value" file; '#' starts a comment.
inline std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path, lineno, "expected key = value");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

}  // namespace gcr
