#pragma once

// Reverse-mode automatic differentiation over a flat tape.
//
// A Tape records every operation as a node in creation order, which is a
// topological order of the computation DAG. backward() walks the nodes that
// are reachable from the root exactly once, in reverse. Parameter leaves write
// their gradient straight into Parameter::grad, so repeated backward() calls
// accumulate; callers zero the accumulators between optimizer steps.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gcr/errors.hpp"
#include "gcr/tensor.hpp"

namespace gcr {

template <Scalar T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), trainable(train) {}

  void zero_grad() { grad.fill(T(0)); }
};

/// Handle to a tape node.
struct Var {
  std::int32_t index = -1;
  bool valid() const noexcept { return index >= 0; }
  friend bool operator==(Var, Var) = default;
};

enum class OpKind : std::uint8_t {
  kConstant,
  kParam,
  kParamRow,
  kLinear,
  kRelu,
  kDropout,
  kConcat,
  kCosine,
  kLogSigmoid,
  kL2Normalize,
  kSum,
  kAdd,
  kSub,
  kAffine,
  kAddN,
};

template <Scalar T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// Drops all nodes but keeps their buffers for reuse.
  void reset() {
    size_ = 0;
    param_leaf_.clear();
  }

  std::size_t size() const noexcept { return size_; }

  // ---- leaves -------------------------------------------------------------

  Var constant(const Tensor<T>& t) { return constant(t.data(), t.rank(), t.rows(), t.cols()); }

  Var constant(std::span<const T> values) { return constant(values, 1, values.size(), 1); }

  Var scalar(T v) {
    const T tmp[1] = {v};
    return constant(std::span<const T>(tmp, 1), 0, 1, 1);
  }

  /// Leaf bound to a parameter; one node per parameter per tape. backward()
  /// writes into p.grad, so never run it on a tape built over a shared model.
  Var param(const Parameter<T>& cp) {
    auto& p = const_cast<Parameter<T>&>(cp);
    if (auto it = param_leaf_.find(&p); it != param_leaf_.end()) return Var{it->second};
    auto [idx, n] = push(OpKind::kParam, static_cast<int>(p.value.rank()), p.value.rows(), p.value.cols());
    n.param = &p;
    n.value.clear();
    param_leaf_.emplace(&p, idx);
    return Var{idx};
  }

  /// Row lookup into a rank-2 parameter (embedding table); gradient is scattered back to that row.
  Var param_row(const Parameter<T>& ctable, std::size_t row) {
    auto& table = const_cast<Parameter<T>&>(ctable);
    if (table.value.rank() != 2) throw DimensionError("param_row: table must be rank 2");
    if (row >= table.value.rows()) {
      throw DimensionError("param_row: row " + std::to_string(row) + " out of range " +
                           std::to_string(table.value.rows()));
    }
    auto [idx, n] = push(OpKind::kParamRow, 1, table.value.cols(), 1);
    n.param = &table;
    n.row = row;
    auto src = table.value.row(row);
    std::copy(src.begin(), src.end(), n.value.begin());
    return Var{idx};
  }

  // ---- operations ---------------------------------------------------------

  /// W·x + b with W of shape m×k, x of length k and b of length m.
  Var linear(Var w, Var x, Var b) {
    const Node& nw = node(w);
    const Node& nx = node(x);
    const Node& nb = node(b);
    if (nw.rank != 2) throw DimensionError("linear: weight must be rank 2");
    const std::size_t m = nw.rows;
    const std::size_t k = nw.cols;
    if (nx.rank != 1 || nx.rows != k) {
      throw DimensionError("linear: input length " + std::to_string(nx.rows) + " != " + std::to_string(k));
    }
    if (nb.rank != 1 || nb.rows != m) {
      throw DimensionError("linear: bias length " + std::to_string(nb.rows) + " != " + std::to_string(m));
    }
    auto [idx, n] = push(OpKind::kLinear, 1, m, 1);
    n.in = {w.index, x.index, b.index};
    const T* W = value_ptr(w.index);
    const T* xv = value_ptr(x.index);
    const T* bv = value_ptr(b.index);
    for (std::size_t i = 0; i < m; ++i) {
      T s = bv[i];
      const T* wr = W + i * k;
      for (std::size_t j = 0; j < k; ++j) s += wr[j] * xv[j];
      n.value[i] = s;
    }
    return Var{idx};
  }

  /// max(0, x); the subgradient at 0 is 0.
  Var relu(Var x) {
    const Node& nx = node(x);
    auto [idx, n] = push(OpKind::kRelu, nx.rank, nx.rows, nx.cols);
    n.in = {x.index, -1, -1};
    const T* xv = value_ptr(x.index);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = xv[i] > T(0) ? xv[i] : T(0);
    return Var{idx};
  }

  /// Inverted dropout. Identity when not training or rate == 0.
  template <class Rng>
  Var dropout(Var x, double rate, Rng& rng, bool training) {
    if (!(rate >= 0.0) || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0, 1)");
    if (!training || rate == 0.0) return x;
    const Node& nx = node(x);
    auto [idx, n] = push(OpKind::kDropout, nx.rank, nx.rows, nx.cols);
    n.in = {x.index, -1, -1};
    n.aux.resize(n.value.size());
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    std::bernoulli_distribution drop(rate);
    const T* xv = value_ptr(x.index);
    for (std::size_t i = 0; i < n.value.size(); ++i) {
      n.aux[i] = drop(rng) ? T(0) : keep_scale;
      n.value[i] = xv[i] * n.aux[i];
    }
    return Var{idx};
  }

  Var concat(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (na.rank != 1 || nb.rank != 1) throw DimensionError("concat: both inputs must be rank 1");
    const std::size_t p = na.rows;
    auto [idx, n] = push(OpKind::kConcat, 1, p + nb.rows, 1);
    n.in = {a.index, b.index, -1};
    const T* av = value_ptr(a.index);
    const T* bv = value_ptr(b.index);
    std::copy(av, av + p, n.value.begin());
    std::copy(bv, bv + (n.value.size() - p), n.value.begin() + static_cast<std::ptrdiff_t>(p));
    return Var{idx};
  }

  /// a·b / (|a||b|) as a scalar node.
  Var cosine_similarity(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (na.rank != 1 || nb.rank != 1 || na.rows != nb.rows) {
      throw DimensionError("cosine_similarity: shape mismatch");
    }
    const std::size_t d = na.rows;
    std::span<const T> av(value_ptr(a.index), d);
    std::span<const T> bv(value_ptr(b.index), d);
    const T la = norm2(av);
    const T lb = norm2(bv);
    if (!(la > 0) || !(lb > 0)) throw DegenerateInputError("cosine_similarity: zero-norm input");
    auto [idx, n] = push(OpKind::kCosine, 0, 1, 1);
    n.in = {a.index, b.index, -1};
    n.aux = {la, lb};
    n.value[0] = dot(av, bv) / (la * lb);
    return Var{idx};
  }

  /// ln σ(x) = −softplus(−x), evaluated without overflow.
  Var log_sigmoid(Var x) {
    const Node& nx = node(x);
    if (nx.value_size() != 1) throw DimensionError("log_sigmoid: scalar input required");
    auto [idx, n] = push(OpKind::kLogSigmoid, 0, 1, 1);
    n.in = {x.index, -1, -1};
    n.value[0] = log_sigmoid_value(value_ptr(x.index)[0]);
    return Var{idx};
  }

  Var l2_normalize(Var x) {
    const Node& nx = node(x);
    const std::size_t len = nx.value_size();
    std::span<const T> xv(value_ptr(x.index), len);
    const T len2 = norm2(xv);
    if (!(len2 > 0)) throw DegenerateInputError("l2_normalize: zero vector");
    auto [idx, n] = push(OpKind::kL2Normalize, nx.rank, nx.rows, nx.cols);
    n.in = {x.index, -1, -1};
    n.aux = {len2};
    for (std::size_t i = 0; i < len; ++i) n.value[i] = xv[i] / len2;
    return Var{idx};
  }

  /// Sum of all elements.
  Var sum(Var x) {
    const Node& nx = node(x);
    const std::size_t len = nx.value_size();
    auto [idx, n] = push(OpKind::kSum, 0, 1, 1);
    n.in = {x.index, -1, -1};
    const T* xv = value_ptr(x.index);
    T s = 0;
    for (std::size_t i = 0; i < len; ++i) s += xv[i];
    n.value[0] = s;
    return Var{idx};
  }

  Var add(Var a, Var b) { return binary(OpKind::kAdd, a, b); }
  Var sub(Var a, Var b) { return binary(OpKind::kSub, a, b); }

  /// scale·x + shift, elementwise.
  Var affine(Var x, T scale, T shift = T(0)) {
    const Node& nx = node(x);
    auto [idx, n] = push(OpKind::kAffine, nx.rank, nx.rows, nx.cols);
    n.in = {x.index, -1, -1};
    n.a = scale;
    n.b = shift;
    const T* xv = value_ptr(x.index);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = scale * xv[i] + shift;
    return Var{idx};
  }

  /// Sum of a list of scalar nodes.
  Var add_n(std::span<const Var> xs) {
    auto [idx, n] = push(OpKind::kAddN, 0, 1, 1);
    n.extra.clear();
    T s = 0;
    for (Var v : xs) {
      if (node(v).value_size() != 1) throw DimensionError("add_n: scalar inputs required");
      n.extra.push_back(v.index);
      s += value_ptr(v.index)[0];
    }
    n.value[0] = s;
    return Var{idx};
  }

  Var mean(std::span<const Var> xs) {
    if (xs.empty()) return scalar(T(0));
    return affine(add_n(xs), T(1) / static_cast<T>(xs.size()));
  }

  // ---- access -------------------------------------------------------------

  std::span<const T> value(Var v) const { return {value_ptr(v.index), node(v).value_size()}; }

  T scalar_value(Var v) const {
    if (node(v).value_size() != 1) throw DimensionError("scalar_value: not a scalar");
    return value_ptr(v.index)[0];
  }

  std::size_t length(Var v) const { return node(v).value_size(); }

  /// Gradient held by a non-parameter node after backward().
  std::span<const T> grad(Var v) const {
    const Node& n = node(v);
    if (n.op == OpKind::kParam) return n.param->grad.data();
    return n.grad;
  }

  OpKind op(Var v) const { return node(v).op; }

  // ---- backward -----------------------------------------------------------

  /// Accumulates dRoot/dParam into every reachable Parameter::grad.
  void backward(Var root) {
    if (node(root).value_size() != 1) throw DimensionError("backward: root must be a scalar");
    const auto r = static_cast<std::size_t>(root.index);
    reach_.assign(r + 1, 0);
    reach_[r] = 1;
    for (std::size_t i = r + 1; i-- > 0;) {
      if (!reach_[i]) continue;
      Node& n = nodes_[i];
      for_each_input(n, [&](int j) { reach_[static_cast<std::size_t>(j)] = 1; });
      if (n.op != OpKind::kParam) n.grad.assign(n.value.size(), T(0));
    }
    nodes_[r].grad[0] = T(1);
    for (std::size_t i = r + 1; i-- > 0;) {
      if (reach_[i]) propagate(i);
    }
  }

  static T log_sigmoid_value(T x) {
    // ln σ(x) = −log1p(e^{−x}) for x ≥ 0, x − log1p(e^{x}) otherwise.
    return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
  }

 private:
  struct Node {
    OpKind op = OpKind::kConstant;
    int rank = 0;
    std::size_t rows = 1;
    std::size_t cols = 1;
    std::array<int, 3> in{-1, -1, -1};
    std::vector<int> extra;
    std::vector<T> value;
    std::vector<T> grad;
    std::vector<T> aux;
    Parameter<T>* param = nullptr;
    std::size_t row = 0;
    T a = 0;
    T b = 0;

    std::size_t value_size() const noexcept { return op == OpKind::kParam ? param->value.size() : value.size(); }
  };

  struct Pushed {
    int index;
    Node& node;
  };

  Pushed push(OpKind op, int rank, std::size_t rows, std::size_t cols) {
    if (size_ == nodes_.size()) nodes_.emplace_back();
    Node& n = nodes_[size_];
    n.op = op;
    n.rank = rank;
    n.rows = rows;
    n.cols = cols;
    n.in = {-1, -1, -1};
    n.extra.clear();
    n.param = nullptr;
    n.value.resize(rows * cols);
    n.grad.clear();
    return {static_cast<int>(size_++), n};
  }

  Var constant(std::span<const T> values, std::size_t rank, std::size_t rows, std::size_t cols) {
    auto [idx, n] = push(OpKind::kConstant, static_cast<int>(rank), rows, cols);
    std::copy(values.begin(), values.end(), n.value.begin());
    return Var{idx};
  }

  Var binary(OpKind op, Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (na.value_size() != nb.value_size()) throw DimensionError("elementwise op: shape mismatch");
    auto [idx, n] = push(op, na.rank, na.rows, na.cols);
    n.in = {a.index, b.index, -1};
    const T* av = value_ptr(a.index);
    const T* bv = value_ptr(b.index);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = op == OpKind::kAdd ? av[i] + bv[i] : av[i] - bv[i];
    return Var{idx};
  }

  const Node& node(Var v) const {
    if (v.index < 0 || static_cast<std::size_t>(v.index) >= size_) throw std::out_of_range("invalid tape handle");
    return nodes_[static_cast<std::size_t>(v.index)];
  }

  const T* value_ptr(int i) const {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    return n.op == OpKind::kParam ? n.param->value.storage().data() : n.value.data();
  }

  T* grad_ptr(int i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    return n.op == OpKind::kParam ? n.param->grad.storage().data() : n.grad.data();
  }

  template <class F>
  static void for_each_input(const Node& n, F&& f) {
    for (int j : n.in) {
      if (j >= 0) f(j);
    }
    for (int j : n.extra) f(j);
  }

  void propagate(std::size_t i) {
    Node& n = nodes_[i];
    const T* g = n.grad.data();
    switch (n.op) {
      case OpKind::kConstant:
      case OpKind::kParam:
        break;
      case OpKind::kParamRow: {
        auto dst = n.param->grad.row(n.row);
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += g[k];
        break;
      }
      case OpKind::kLinear: {
        const Node& nw = nodes_[static_cast<std::size_t>(n.in[0])];
        const std::size_t m = nw.rows;
        const std::size_t k = nw.cols;
        const T* W = value_ptr(n.in[0]);
        const T* x = value_ptr(n.in[1]);
        T* dW = grad_ptr(n.in[0]);
        T* dx = grad_ptr(n.in[1]);
        T* db = grad_ptr(n.in[2]);
        for (std::size_t r = 0; r < m; ++r) {
          const T gr = g[r];
          db[r] += gr;
          if (gr == T(0)) continue;
          T* dwr = dW + r * k;
          const T* wr = W + r * k;
          for (std::size_t c = 0; c < k; ++c) {
            dwr[c] += gr * x[c];
            dx[c] += gr * wr[c];
          }
        }
        break;
      }
      case OpKind::kRelu: {
        const T* x = value_ptr(n.in[0]);
        T* dx = grad_ptr(n.in[0]);
        for (std::size_t k = 0; k < n.value.size(); ++k) {
          if (x[k] > T(0)) dx[k] += g[k];
        }
        break;
      }
      case OpKind::kDropout: {
        T* dx = grad_ptr(n.in[0]);
        for (std::size_t k = 0; k < n.value.size(); ++k) dx[k] += g[k] * n.aux[k];
        break;
      }
      case OpKind::kConcat: {
        const std::size_t p = nodes_[static_cast<std::size_t>(n.in[0])].value_size();
        T* da = grad_ptr(n.in[0]);
        T* db = grad_ptr(n.in[1]);
        for (std::size_t k = 0; k < p; ++k) da[k] += g[k];
        for (std::size_t k = p; k < n.value.size(); ++k) db[k - p] += g[k];
        break;
      }
      case OpKind::kCosine: {
        const std::size_t d = nodes_[static_cast<std::size_t>(n.in[0])].value_size();
        const T* av = value_ptr(n.in[0]);
        const T* bv = value_ptr(n.in[1]);
        T* da = grad_ptr(n.in[0]);
        T* db = grad_ptr(n.in[1]);
        const T la = n.aux[0];
        const T lb = n.aux[1];
        const T s = n.value[0];
        const T inv = T(1) / (la * lb);
        for (std::size_t k = 0; k < d; ++k) {
          da[k] += g[0] * (bv[k] * inv - s * av[k] / (la * la));
          db[k] += g[0] * (av[k] * inv - s * bv[k] / (lb * lb));
        }
        break;
      }
      case OpKind::kLogSigmoid: {
        const T x = value_ptr(n.in[0])[0];
        // d/dx ln σ(x) = σ(−x)
        const T sig_neg = x >= 0 ? std::exp(-x) / (T(1) + std::exp(-x)) : T(1) / (T(1) + std::exp(x));
        grad_ptr(n.in[0])[0] += g[0] * sig_neg;
        break;
      }
      case OpKind::kL2Normalize: {
        const T len = n.aux[0];
        const T proj = dot(std::span<const T>(n.value), std::span<const T>(n.grad));
        T* dx = grad_ptr(n.in[0]);
        for (std::size_t k = 0; k < n.value.size(); ++k) dx[k] += (g[k] - n.value[k] * proj) / len;
        break;
      }
      case OpKind::kSum: {
        const std::size_t len = nodes_[static_cast<std::size_t>(n.in[0])].value_size();
        T* dx = grad_ptr(n.in[0]);
        for (std::size_t k = 0; k < len; ++k) dx[k] += g[0];
        break;
      }
      case OpKind::kAdd:
      case OpKind::kSub: {
        T* da = grad_ptr(n.in[0]);
        T* db = grad_ptr(n.in[1]);
        const T sign = n.op == OpKind::kAdd ? T(1) : T(-1);
        for (std::size_t k = 0; k < n.value.size(); ++k) {
          da[k] += g[k];
          db[k] += sign * g[k];
        }
        break;
      }
      case OpKind::kAffine: {
        T* dx = grad_ptr(n.in[0]);
        for (std::size_t k = 0; k < n.value.size(); ++k) dx[k] += n.a * g[k];
        break;
      }
      case OpKind::kAddN: {
        for (int j : n.extra) grad_ptr(j)[0] += g[0];
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  std::size_t size_ = 0;
  std::unordered_map<const Parameter<T>*, int> param_leaf_;
  std::vector<std::uint8_t> reach_;
};

}  // namespace gcr
