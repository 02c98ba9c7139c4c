#pragma once

// Neural reasoning space for Horn-clause scoring.
//
// Each relation owns a predicate encoder MLP mapping concat(e_head, e_tail) to a
// d-dimensional predicate embedding. Shared NOT (d -> d) and OR (2d -> d) MLPs
// evaluate a clause: neighbors are negated, then all terms are folded with OR
// and the result is compared with a fixed anchor vector meaning "true".

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gcr/autodiff.hpp"
#include "gcr/graph.hpp"
#include "gcr/logic.hpp"
#include "gcr/optim.hpp"
#include "gcr/tensor.hpp"

namespace gcr {

struct ModelShape {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t dim = 64;
  // Affine layers per MLP, ReLU between consecutive layers.
  std::size_t layers = 3;
  // Encoder hidden width; 0 means 2 * dim.
  std::size_t encoder_hidden = 0;

  std::size_t hidden() const noexcept { return encoder_hidden ? encoder_hidden : 2 * dim; }
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// Indices of an MLP's weight and bias tensors inside ModelParams::parameters().
struct MlpLayout {
  std::vector<std::size_t> weights;
  std::vector<std::size_t> biases;
};

template <Scalar T>
class ModelParams {
 public:
  ModelParams() = default;

  /// Every tensor (anchor included) is drawn from N(0, 0.01); the anchor is
  /// then scaled to unit length and never trained.
  ModelParams(const ModelShape& shape, std::uint64_t seed, double init_std = 0.01) : shape_(shape) {
    if (shape.entities == 0 || shape.relations == 0 || shape.dim == 0 || shape.layers == 0) {
      throw std::invalid_argument("ModelParams: entities, relations, dim and layers must be positive");
    }
    shape_.encoder_hidden = shape.hidden();
    std::mt19937_64 rng(seed);
    const std::size_t d = shape.dim;
    params_.emplace_back("entity_embeddings", init_normal<T>({shape.entities, d}, rng, 0.0, init_std));
    encoders_.reserve(shape.relations);
    for (std::size_t r = 0; r < shape.relations; ++r) {
      encoders_.push_back(add_mlp("encoder." + std::to_string(r), 2 * d, shape.hidden(), d, rng, init_std));
    }
    not_ = add_mlp("not", d, d, d, rng, init_std);
    or_ = add_mlp("or", 2 * d, d, d, rng, init_std);
    anchor_ = init_normal<T>({d}, rng, 0.0, init_std);
    const T len = norm2(std::span<const T>(anchor_.data()));
    for (auto& v : anchor_.storage()) v /= len;
  }

  /// Rebuilds a model from stored tensors, validating every shape.
  static ModelParams from_tensors(const ModelShape& shape, std::vector<Parameter<T>> tensors, Tensor<T> anchor) {
    ModelParams m(shape, 0);
    if (tensors.size() != m.params_.size()) {
      throw DimensionError("model expects " + std::to_string(m.params_.size()) + " tensors, got " +
                           std::to_string(tensors.size()));
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      if (tensors[i].name != m.params_[i].name || tensors[i].value.shape() != m.params_[i].value.shape()) {
        throw DimensionError("tensor " + std::to_string(i) + " '" + tensors[i].name + "' " +
                             shape_string(tensors[i].value.shape()) + " does not match expected '" +
                             m.params_[i].name + "' " + shape_string(m.params_[i].value.shape()));
      }
      m.params_[i].value = std::move(tensors[i].value);
    }
    if (anchor.shape() != m.anchor_.shape()) throw DimensionError("anchor shape mismatch");
    m.anchor_ = std::move(anchor);
    return m;
  }

  const ModelShape& shape() const noexcept { return shape_; }
  std::size_t dim() const noexcept { return shape_.dim; }

  std::vector<Parameter<T>>& parameters() noexcept { return params_; }
  const std::vector<Parameter<T>>& parameters() const noexcept { return params_; }
  const Parameter<T>& entity_embeddings() const noexcept { return params_[0]; }
  const Tensor<T>& anchor() const noexcept { return anchor_; }

  const MlpLayout& encoder(RelationId r) const { return encoders_.at(r); }
  const MlpLayout& not_layout() const noexcept { return not_; }
  const MlpLayout& or_layout() const noexcept { return or_; }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  /// Squared 2-norm over all trainable tensors.
  double l2_squared() const {
    double s = 0;
    for (const auto& p : params_) {
      if (!p.trainable) continue;
      for (T v : p.value.storage()) s += static_cast<double>(v) * v;
    }
    return s;
  }

  /// Order-sensitive FNV-1a over every parameter bit pattern and the anchor.
  std::uint64_t checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const Tensor<T>& t) {
      for (T v : t.storage()) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(&v);
        for (std::size_t i = 0; i < sizeof(T); ++i) h = (h ^ bytes[i]) * 1099511628211ull;
      }
    };
    for (const auto& p : params_) mix(p.value);
    mix(anchor_);
    return h;
  }

 private:
  MlpLayout add_mlp(const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t out,
                    std::mt19937_64& rng, double init_std) {
    MlpLayout m;
    std::size_t width = in;
    for (std::size_t l = 0; l < shape_.layers; ++l) {
      const std::size_t next = l + 1 == shape_.layers ? out : hidden;
      m.weights.push_back(params_.size());
      params_.emplace_back(prefix + ".W" + std::to_string(l), init_normal<T>({next, width}, rng, 0.0, init_std));
      m.biases.push_back(params_.size());
      params_.emplace_back(prefix + ".b" + std::to_string(l), init_normal<T>({next}, rng, 0.0, init_std));
      width = next;
    }
    return m;
  }

  ModelShape shape_;
  std::vector<Parameter<T>> params_;
  std::vector<MlpLayout> encoders_;
  MlpLayout not_;
  MlpLayout or_;
  Tensor<T> anchor_;
};

/// Per-forward settings. Training mode enables dropout and random OR-fold order.
struct ForwardContext {
  bool training = false;
  double dropout = 0.0;
  bool normalize_predicates = true;
  // Training fold order: the target joins the shuffle, or stays last after
  // the shuffled neighbors.
  bool shuffle_target = false;
  // Dropout inside NOT/OR as well as the predicate encoders.
  bool logic_dropout = false;
  std::mt19937_64* rng = nullptr;
  // When set, every vector the logic regularizer should see is appended here.
  std::vector<Var>* collected = nullptr;

  ForwardContext without_collection() const {
    ForwardContext c = *this;
    c.collected = nullptr;
    return c;
  }
};

/// Graph-building operations of the reasoning network over one tape.
template <Scalar T>
class ReasoningNet {
 public:
  ReasoningNet(const ModelParams<T>& model, Tape<T>& tape) : model_(model), tape_(tape) {}

  Var mlp(const MlpLayout& layout, Var x, const ForwardContext& ctx) {
    const auto& ps = model_.parameters();
    const std::size_t n = layout.weights.size();
    for (std::size_t l = 0; l < n; ++l) {
      x = tape_.linear(tape_.param(ps[layout.weights[l]]), x, tape_.param(ps[layout.biases[l]]));
      if (l + 1 < n) {
        x = tape_.relu(x);
        if (ctx.training && ctx.dropout > 0) x = tape_.dropout(x, ctx.dropout, *ctx.rng, true);
      }
    }
    return x;
  }

  /// Predicate embedding of a (canonically oriented) triple.
  Var encode_predicate(const Triple& t, const ForwardContext& ctx) {
    const auto& s = model_.shape();
    if (t.head >= s.entities || t.tail >= s.entities || t.relation >= s.relations) {
      throw std::out_of_range("encode_predicate: triple " + to_string(t) + " out of range");
    }
    const Var eh = tape_.param_row(model_.entity_embeddings(), t.head);
    const Var et = tape_.param_row(model_.entity_embeddings(), t.tail);
    Var e = mlp(model_.encoder(t.relation), tape_.concat(eh, et), ctx);
    if (ctx.normalize_predicates) e = tape_.l2_normalize(e);
    if (ctx.collected) ctx.collected->push_back(e);
    return e;
  }

  Var not_module(Var e, const ForwardContext& ctx) {
    check_dim(e, "not_module");
    return mlp(model_.not_layout(), e, logic_context(ctx));
  }

  Var or_module(Var a, Var b, const ForwardContext& ctx) {
    check_dim(a, "or_module");
    check_dim(b, "or_module");
    return mlp(model_.or_layout(), tape_.concat(a, b), logic_context(ctx));
  }

  /// Left fold acc = OR(acc, terms[order[i]]). Intermediate accumulators are collected.
  Var or_fold(std::span<const Var> terms, std::span<const std::size_t> order, const ForwardContext& ctx) {
    if (terms.empty()) throw std::invalid_argument("or_fold: no terms");
    if (order.size() != terms.size()) throw std::invalid_argument("or_fold: order length mismatch");
    Var acc = terms[order[0]];
    for (std::size_t i = 1; i < order.size(); ++i) {
      acc = or_module(acc, terms[order[i]], ctx);
      if (ctx.collected) ctx.collected->push_back(acc);
    }
    return acc;
  }

  /// Encodes and negates each neighbor of a clause.
  std::vector<Var> negated_neighbors(const Clause& c, const ForwardContext& ctx) {
    std::vector<Var> out;
    out.reserve(c.neighbors.size() + 1);
    for (const auto& a : c.neighbors) {
      const Var e = encode_predicate(a.triple, ctx);
      const Var ne = not_module(e, ctx);
      if (ctx.collected) ctx.collected->push_back(ne);
      out.push_back(ne);
    }
    return out;
  }

  /// Folds negated neighbors with the target embedding and compares with the
  /// anchor. Training order is a fresh uniform permutation (of the neighbors
  /// only unless ctx.shuffle_target); evaluation order is neighbors as given,
  /// target last.
  Var score_terms(std::vector<Var> terms, Var target, const ForwardContext& ctx) {
    terms.push_back(target);
    std::vector<std::size_t> order(terms.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (ctx.training && ctx.rng) std::shuffle(order.begin(), order.end() - (ctx.shuffle_target ? 0 : 1), *ctx.rng);
    const Var expr = or_fold(terms, order, ctx);
    return tape_.cosine_similarity(expr, anchor());
  }

  Var score_clause(const Clause& c, const ForwardContext& ctx) {
    auto terms = negated_neighbors(c, ctx);
    const Var target = encode_predicate(c.target.triple, ctx);
    return score_terms(std::move(terms), target, ctx);
  }

  Var anchor() {
    if (!anchor_.valid()) anchor_ = tape_.constant(model_.anchor());
    return anchor_;
  }

  Tape<T>& tape() noexcept { return tape_; }
  const ModelParams<T>& model() const noexcept { return model_; }

 private:
  static ForwardContext logic_context(const ForwardContext& ctx) {
    ForwardContext c = ctx;
    if (!ctx.logic_dropout) c.dropout = 0;
    return c;
  }

  void check_dim(Var v, const char* who) const {
    if (tape_.length(v) != model_.dim()) {
      throw DimensionError(std::string(who) + ": expected dimension " + std::to_string(model_.dim()) + ", got " +
                           std::to_string(tape_.length(v)));
    }
  }

  const ModelParams<T>& model_;
  Tape<T>& tape_;
  Var anchor_;
};

/// Eval-mode clause score as a plain value.
template <Scalar T>
T score_clause_value(const ModelParams<T>& model, const Clause& c, Tape<T>& tape, bool normalize = true) {
  tape.reset();
  ReasoningNet<T> net(model, tape);
  ForwardContext ctx;
  ctx.normalize_predicates = normalize;
  return tape.scalar_value(net.score_clause(c, ctx));
}

// ---- logical regularizers ---------------------------------------------------

inline constexpr std::array<const char*, 6> kLogicLawNames = {
    "negation", "double_negation", "idempotence", "annihilator", "identity", "complementation"};

/// The six law penalties, each averaged over `w`. `ops` supplies the vector
/// algebra: not_(v), or_(a, b), cos(a, b), one_plus(s), one_minus(s) and
/// mean(list of scalars). F is taken to be NOT(T).
template <class Ops>
std::array<typename Ops::scalar_type, 6> logic_law_terms(Ops& ops, std::span<const typename Ops::vector_type> w,
                                                         const typename Ops::vector_type& truth) {
  using S = typename Ops::scalar_type;
  const auto falsity = ops.not_(truth);
  std::array<std::vector<S>, 6> per_law;
  for (auto& v : per_law) v.reserve(w.size());
  for (const auto& x : w) {
    const auto nx = ops.not_(x);
    per_law[0].push_back(ops.one_plus(ops.cos(nx, x)));
    per_law[1].push_back(ops.one_minus(ops.cos(ops.not_(nx), x)));
    per_law[2].push_back(ops.one_minus(ops.cos(ops.or_(x, x), x)));
    per_law[3].push_back(ops.one_minus(ops.cos(ops.or_(x, truth), truth)));
    per_law[4].push_back(ops.one_minus(ops.cos(ops.or_(x, falsity), x)));
    per_law[5].push_back(ops.one_minus(ops.cos(ops.or_(x, nx), truth)));
  }
  std::array<S, 6> out;
  for (std::size_t k = 0; k < 6; ++k) out[k] = ops.mean(per_law[k]);
  return out;
}

template <Scalar T>
struct RegularizerReport {
  std::array<Var, 6> terms{};
  Var total;
  std::array<double, 6> values{};
  double total_value = 0;
};

template <Scalar T>
class TapeLogicOps {
 public:
  using vector_type = Var;
  using scalar_type = Var;

  TapeLogicOps(ReasoningNet<T>& net, const ForwardContext& ctx) : net_(net), ctx_(ctx.without_collection()) {}

  Var not_(Var v) { return net_.not_module(v, ctx_); }
  Var or_(Var a, Var b) { return net_.or_module(a, b, ctx_); }
  Var cos(Var a, Var b) { return net_.tape().cosine_similarity(a, b); }
  Var one_plus(Var s) { return net_.tape().affine(s, T(1), T(1)); }
  Var one_minus(Var s) { return net_.tape().affine(s, T(-1), T(1)); }
  Var mean(const std::vector<Var>& xs) { return net_.tape().mean(xs); }

 private:
  ReasoningNet<T>& net_;
  ForwardContext ctx_;
};

/// Logic-law penalties over vectors collected from the current batch. An empty
/// set yields an all-zero report.
template <Scalar T>
RegularizerReport<T> logic_regularizer(ReasoningNet<T>& net, std::span<const Var> vectors, const ForwardContext& ctx) {
  RegularizerReport<T> r;
  auto& tape = net.tape();
  if (vectors.empty()) {
    for (auto& t : r.terms) t = tape.scalar(T(0));
    r.total = tape.add_n(r.terms);
    return r;
  }
  TapeLogicOps<T> ops(net, ctx);
  r.terms = logic_law_terms(ops, vectors, net.anchor());
  r.total = tape.add_n(r.terms);
  for (std::size_t k = 0; k < 6; ++k) r.values[k] = tape.scalar_value(r.terms[k]);
  r.total_value = tape.scalar_value(r.total);
  return r;
}

}  // namespace gcr
