#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "gcr/autodiff.hpp"
#include "gcr/config.hpp"
#include "gcr/fpenv.hpp"
#include "gcr/graph.hpp"
#include "gcr/logic.hpp"
#include "gcr/model.hpp"
#include "gcr/optim.hpp"

namespace gcr {

/// −ln σ(α (s_pos − s_neg)) on the tape.
template <Scalar T>
Var pairwise_loss(Tape<T>& tape, Var s_pos, Var s_neg, double alpha) {
  return tape.affine(tape.log_sigmoid(tape.affine(tape.sub(s_pos, s_neg), static_cast<T>(alpha))), T(-1));
}

inline double pairwise_loss_value(double s_pos, double s_neg, double alpha) {
  return -Tape<double>::log_sigmoid_value(alpha * (s_pos - s_neg));
}

/// gcr + λ_logic · logic + λ_Θ · l2, where l2 is ||Θ||².
inline double total_loss(double gcr, double logic, double l2, double lambda_logic, double lambda_l2) {
  return gcr + lambda_logic * logic + lambda_l2 * l2;
}

struct StepResult {
  double total = 0;
  double gcr = 0;
  double logic = 0;
  double l2 = 0;
  std::array<double, 6> logic_terms{};
  Clause positive;
  Clause negative;
  Slot corrupted = Slot::kTail;
};

struct EpochReport {
  std::size_t epoch = 0;
  double loss = 0;
  double gcr = 0;
  double logic = 0;
  double l2 = 0;
  std::array<double, 6> logic_terms{};
  std::optional<double> validation;
  double learning_rate = 0;
  double seconds = 0;
};

/// Pairwise trainer over one model. The model is updated in place.
template <Scalar T>
class Trainer {
 public:
  Trainer(ModelParams<T>& model, const Graph& graph, const DatasetSplit& split, const TrainConfig& cfg)
      : model_(model),
        graph_(graph),
        split_(split),
        cfg_(cfg),
        rng_(cfg.seed * 0x9E3779B97F4A7C15ull + 0x7F4A7C15ull),
        optimizer_(model.parameters(), cfg.lr) {
    cfg_.validate();
  }

  /// One SGD step on a single training triple: a positive clause over sampled
  /// neighbors, a negative clause sharing those neighbors with one endpoint
  /// corrupted (tail on even steps, head on odd ones; items only for
  /// bipartite graphs), then backprop and an Adam update.
  StepResult train_step(const Triple& target) { return train_batch(std::span<const Triple>(&target, 1)); }

  /// Averages the per-triple objectives of `batch` into a single Adam update.
  /// The returned result holds batch means; its clauses are the last triple's.
  StepResult train_batch(std::span<const Triple> batch) {
    if (batch.empty()) throw std::invalid_argument("train_batch: empty batch");
    FlushSubnormals ftz;
    model_.zero_grad();
    StepResult out;
    const T scale = T(1) / static_cast<T>(batch.size());
    for (const Triple& target : batch) {
      const StepResult s = accumulate(target, scale);
      out.gcr += s.gcr;
      out.logic += s.logic;
      for (std::size_t k = 0; k < 6; ++k) out.logic_terms[k] += s.logic_terms[k];
      out.positive = s.positive;
      out.negative = s.negative;
      out.corrupted = s.corrupted;
    }
    const double n = static_cast<double>(batch.size());
    out.gcr /= n;
    out.logic /= n;
    for (auto& v : out.logic_terms) v /= n;
    out.l2 = model_.l2_squared();
    out.total = total_loss(out.gcr, out.logic, out.l2, cfg_.lambda_logic, cfg_.lambda_l2);
    if (!std::isfinite(out.total)) throw NumericError("train_step: non-finite loss");

    if (cfg_.lambda_l2 > 0) {
      const T c = static_cast<T>(2 * cfg_.lambda_l2);
      for (auto& p : model_.parameters()) {
        if (!p.trainable) continue;
        auto g = p.grad.data();
        auto v = p.value.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * v[i];
      }
    }
    optimizer_.step();
    return out;
  }

  /// One pass over the shuffled training triples.
  EpochReport run_epoch(std::size_t epoch) {
    const auto start = std::chrono::steady_clock::now();
    order_.resize(split_.train.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
    EpochReport rep;
    rep.epoch = epoch;
    rep.learning_rate = optimizer_.learning_rate();
    std::vector<Triple> batch;
    std::size_t steps = 0;
    for (std::size_t b = 0; b < order_.size(); b += cfg_.batch_size) {
      batch.clear();
      for (std::size_t i = b; i < std::min(order_.size(), b + cfg_.batch_size); ++i) {
        batch.push_back(split_.train[order_[i]]);
      }
      const StepResult s = train_batch(batch);
      rep.loss += s.total;
      rep.gcr += s.gcr;
      rep.logic += s.logic;
      rep.l2 += s.l2;
      for (std::size_t k = 0; k < 6; ++k) rep.logic_terms[k] += s.logic_terms[k];
      ++steps;
    }
    const double n = std::max<std::size_t>(steps, 1);
    rep.loss /= n;
    rep.gcr /= n;
    rep.logic /= n;
    rep.l2 /= n;
    for (auto& v : rep.logic_terms) v /= n;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
  }

  Adam<T>& optimizer() noexcept { return optimizer_; }
  std::mt19937_64& rng() noexcept { return rng_; }
  const TrainConfig& config() const noexcept { return cfg_; }

 private:
  // Forward and backward for one triple; gradients are scaled and added to the model.
  StepResult accumulate(const Triple& target, T scale) {
    StepResult out;
    const Triple t = graph_.canonical(target);
    const auto neighbors = sample_neighbors(graph_, t, cfg_.neighbors, rng_);
    out.positive = build_clause(t, neighbors);
    out.corrupted = graph_.bipartite() || step_ % 2 == 0 ? Slot::kTail : Slot::kHead;
    const Triple negative = sample_negative(graph_, split_.known, t, out.corrupted, rng_);
    out.negative = with_target(out.positive, negative);
    ++step_;

    tape_.reset();
    collected_.clear();
    ReasoningNet<T> net(model_, tape_);
    ForwardContext ctx;
    ctx.training = true;
    ctx.dropout = cfg_.dropout;
    ctx.normalize_predicates = cfg_.normalize;
    ctx.shuffle_target = cfg_.shuffle_target;
    ctx.logic_dropout = cfg_.logic_dropout;
    ctx.rng = &rng_;
    ctx.collected = &collected_;

    const auto terms = net.negated_neighbors(out.positive, ctx);
    const Var pos_target = net.encode_predicate(out.positive.target.triple, ctx);
    const Var neg_target = net.encode_predicate(out.negative.target.triple, ctx);
    const Var s_pos = net.score_terms(terms, pos_target, ctx);
    const Var s_neg = net.score_terms(terms, neg_target, ctx);
    const Var gcr = pairwise_loss(tape_, s_pos, s_neg, cfg_.alpha);
    const auto reg = logic_regularizer(net, collected_, ctx);

    Var objective = gcr;
    if (cfg_.lambda_logic > 0) objective = tape_.add(gcr, tape_.affine(reg.total, static_cast<T>(cfg_.lambda_logic)));
    out.gcr = tape_.scalar_value(gcr);
    out.logic = reg.total_value;
    out.logic_terms = reg.values;
    if (!std::isfinite(out.gcr) || !std::isfinite(out.logic)) throw NumericError("train_step: non-finite loss");
    if (scale != T(1)) objective = tape_.affine(objective, scale);
    tape_.backward(objective);
    return out;
  }

  ModelParams<T>& model_;
  const Graph& graph_;
  const DatasetSplit& split_;
  TrainConfig cfg_;
  std::mt19937_64 rng_;
  Adam<T> optimizer_;
  Tape<T> tape_;
  std::vector<Var> collected_;
  std::vector<std::size_t> order_;
  std::size_t step_ = 0;
};

template <Scalar T>
struct TrainResult {
  ModelParams<T> best;
  std::vector<EpochReport> epochs;
  std::size_t best_epoch = 0;
  std::optional<double> best_metric;
};

/// Validation metric of a parameter snapshot; larger is better.
template <Scalar T>
using ValidationHook = std::function<double(const ModelParams<T>&)>;

/// Early-stopping driver. Runs up to cfg.epochs epochs, evaluates the hook
/// after each, keeps the best snapshot, halves the learning rate after every
/// two non-improving evaluations and stops after `patience` of them. Without a
/// hook every epoch runs and the final parameters are returned.
template <Scalar T>
TrainResult<T> train(ModelParams<T>& model, const Graph& graph, const DatasetSplit& split, const TrainConfig& cfg,
                     const ValidationHook<T>& hook = {},
                     const std::function<void(const EpochReport&)>& on_epoch = {}) {
  Trainer<T> trainer(model, graph, split, cfg);
  TrainResult<T> result;
  PlateauDecay decay;
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochReport rep = trainer.run_epoch(epoch);
    bool improved = true;
    if (hook) {
      rep.validation = hook(model);
      improved = !result.best_metric || *rep.validation > *result.best_metric;
    }
    if (improved) {
      result.best = model;
      result.best_epoch = epoch;
      result.best_metric = rep.validation;
      stale = 0;
    } else {
      ++stale;
    }
    if (hook) trainer.optimizer().set_learning_rate(trainer.optimizer().learning_rate() * decay.observe(improved));
    result.epochs.push_back(rep);
    if (on_epoch) on_epoch(rep);
    if (hook && stale >= cfg.patience) break;
  }
  return result;
}

}  // namespace gcr
