#pragma once

// Dense 64-bit primitives for the word-choice models: the peephole LSTM
// cell, the output projection, softmax and cross-entropy, plus a small
// reverse-mode tape that records those primitives and replays their exact
// gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wordchoice/error.hpp"

namespace wordchoice::nk {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

inline void check_len(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(want) +
                         ", got " + std::to_string(got));
  }
}

// y += W x
inline void gemv_acc(const Matrix& w, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double* wr = w.row(r).data();
    double acc = 0.0;
    for (std::size_t c = 0; c < w.cols(); ++c) acc += wr[c] * x[c];
    y[r] += acc;
  }
}

// dx += W^T dy
inline void gemv_t_acc(const Matrix& w, std::span<const double> dy, std::span<double> dx) {
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    const double* wr = w.row(r).data();
    for (std::size_t c = 0; c < w.cols(); ++c) dx[c] += wr[c] * g;
  }
}

// G += dy x^T
inline void outer_acc(Matrix& g, std::span<const double> dy, std::span<const double> x) {
  for (std::size_t r = 0; r < g.rows(); ++r) {
    const double d = dy[r];
    if (d == 0.0) continue;
    double* gr = g.row(r).data();
    for (std::size_t c = 0; c < g.cols(); ++c) gr[c] += d * x[c];
  }
}

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

// Named view over a parameter tensor, used for generic update and
// serialization loops.
struct TensorRef {
  std::string name;
  Matrix* value;
};

struct ConstTensorRef {
  std::string name;
  const Matrix* value;
};

// ---------------------------------------------------------------------------
// LSTM cell
//
//   i = sigmoid(W_i x + U_i h + Y_i c + b_i)
//   f = sigmoid(W_f x + U_f h + Y_f c + b_f)      (or 1 - i when coupled)
//   o = sigmoid(W_o x + U_o h + Y_o c + b_o)
//   g = tanh(W_g x + U_g h + b_g)
//   c' = f * c + i * g
//   h' = o * tanh(c')
//
// The peephole terms Y_* read the previous cell state c and are full
// matrices.

struct LstmParams {
  Matrix W_i, W_f, W_o, W_g;
  Matrix U_i, U_f, U_o, U_g;
  Matrix Y_i, Y_f, Y_o;
  Matrix b_i, b_f, b_o, b_g;  // hidden x 1
  bool coupled_gates = false;

  LstmParams() = default;
  LstmParams(std::size_t input, std::size_t hidden, bool coupled = false)
      : W_i(hidden, input), W_f(hidden, input), W_o(hidden, input), W_g(hidden, input),
        U_i(hidden, hidden), U_f(hidden, hidden), U_o(hidden, hidden), U_g(hidden, hidden),
        Y_i(hidden, hidden), Y_f(hidden, hidden), Y_o(hidden, hidden),
        b_i(hidden, 1), b_f(hidden, 1), b_o(hidden, 1), b_g(hidden, 1),
        coupled_gates(coupled) {}

  std::size_t input_size() const { return W_i.cols(); }
  std::size_t hidden_size() const { return W_i.rows(); }

  template <class Self, class F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "W_i", self.W_i); f(prefix + "W_f", self.W_f);
    f(prefix + "W_o", self.W_o); f(prefix + "W_g", self.W_g);
    f(prefix + "U_i", self.U_i); f(prefix + "U_f", self.U_f);
    f(prefix + "U_o", self.U_o); f(prefix + "U_g", self.U_g);
    f(prefix + "Y_i", self.Y_i); f(prefix + "Y_f", self.Y_f); f(prefix + "Y_o", self.Y_o);
    f(prefix + "b_i", self.b_i); f(prefix + "b_f", self.b_f);
    f(prefix + "b_o", self.b_o); f(prefix + "b_g", self.b_g);
  }
  template <class F> void for_each_tensor(const std::string& prefix, F&& f) { visit(*this, prefix, f); }
  template <class F> void for_each_tensor(const std::string& prefix, F&& f) const { visit(*this, prefix, f); }

  void validate() const {
    const std::size_t h = hidden_size(), in = input_size();
    for_each_tensor("", [&](const std::string& name, const Matrix& m) {
      std::size_t want_c = name[0] == 'W' ? in : name[0] == 'b' ? 1 : h;
      if (m.rows() != h || m.cols() != want_c) {
        throw DimensionError("lstm tensor " + name + " has shape " + shape_str(m.rows(), m.cols()) +
                             ", expected " + shape_str(h, want_c));
      }
    });
  }
};

struct LstmState {
  Vector h;
  Vector c;

  static LstmState zeros(std::size_t hidden) { return {Vector(hidden, 0.0), Vector(hidden, 0.0)}; }
};

// Intermediate activations kept for the backward pass.
struct LstmCache {
  Vector i, f, o, g, tanh_c;
};

inline LstmState lstm_step(const LstmParams& p, std::span<const double> x, const LstmState& prev,
                           LstmCache* cache = nullptr) {
  const std::size_t hs = p.hidden_size();
  check_len(x.size(), p.input_size(), "lstm_step input");
  check_len(prev.h.size(), hs, "lstm_step previous h");
  check_len(prev.c.size(), hs, "lstm_step previous c");

  auto affine = [&](const Matrix& w, const Matrix& u, const Matrix* y, const Matrix& b) {
    Vector a(b.values().begin(), b.values().end());
    gemv_acc(w, x, a);
    gemv_acc(u, prev.h, a);
    if (y != nullptr) gemv_acc(*y, prev.c, a);
    return a;
  };

  Vector i = affine(p.W_i, p.U_i, &p.Y_i, p.b_i);
  Vector o = affine(p.W_o, p.U_o, &p.Y_o, p.b_o);
  Vector g = affine(p.W_g, p.U_g, nullptr, p.b_g);
  Vector f;
  for (double& v : i) v = sigmoid(v);
  for (double& v : o) v = sigmoid(v);
  for (double& v : g) v = std::tanh(v);
  if (p.coupled_gates) {
    f.resize(hs);
    for (std::size_t k = 0; k < hs; ++k) f[k] = 1.0 - i[k];
  } else {
    f = affine(p.W_f, p.U_f, &p.Y_f, p.b_f);
    for (double& v : f) v = sigmoid(v);
  }

  LstmState next{Vector(hs), Vector(hs)};
  Vector tanh_c(hs);
  for (std::size_t k = 0; k < hs; ++k) {
    next.c[k] = f[k] * prev.c[k] + i[k] * g[k];
    tanh_c[k] = std::tanh(next.c[k]);
    next.h[k] = o[k] * tanh_c[k];
  }
  if (cache != nullptr) {
    cache->i = std::move(i);
    cache->f = std::move(f);
    cache->o = std::move(o);
    cache->g = std::move(g);
    cache->tanh_c = std::move(tanh_c);
  }
  return next;
}

// Accumulates parameter gradients into `grads` and input/state gradients
// into dx, dh_prev, dc_prev given upstream dh, dc.
inline void lstm_step_backward(const LstmParams& p, LstmParams& grads, std::span<const double> x,
                               const LstmState& prev, const LstmCache& cache,
                               std::span<const double> dh, std::span<const double> dc,
                               std::span<double> dx, std::span<double> dh_prev,
                               std::span<double> dc_prev) {
  const std::size_t hs = p.hidden_size();
  Vector da_i(hs), da_f(hs), da_o(hs), da_g(hs);
  for (std::size_t k = 0; k < hs; ++k) {
    const double tc = cache.tanh_c[k];
    const double d_o = dh[k] * tc;
    const double d_c = dc[k] + dh[k] * cache.o[k] * (1.0 - tc * tc);
    const double d_f = d_c * prev.c[k];
    double d_i = d_c * cache.g[k];
    const double d_g = d_c * cache.i[k];
    dc_prev[k] += d_c * cache.f[k];
    if (p.coupled_gates) {
      d_i -= d_f;
    } else {
      da_f[k] = d_f * cache.f[k] * (1.0 - cache.f[k]);
    }
    da_i[k] = d_i * cache.i[k] * (1.0 - cache.i[k]);
    da_o[k] = d_o * cache.o[k] * (1.0 - cache.o[k]);
    da_g[k] = d_g * (1.0 - cache.g[k] * cache.g[k]);
  }

  auto gate = [&](const Vector& da, const Matrix& w, const Matrix& u, const Matrix* y, Matrix& gw,
                  Matrix& gu, Matrix* gy, Matrix& gb) {
    outer_acc(gw, da, x);
    outer_acc(gu, da, prev.h);
    if (y != nullptr) outer_acc(*gy, da, prev.c);
    for (std::size_t k = 0; k < hs; ++k) gb(k, 0) += da[k];
    gemv_t_acc(w, da, dx);
    gemv_t_acc(u, da, dh_prev);
    if (y != nullptr) gemv_t_acc(*y, da, dc_prev);
  };
  gate(da_i, p.W_i, p.U_i, &p.Y_i, grads.W_i, grads.U_i, &grads.Y_i, grads.b_i);
  if (!p.coupled_gates) gate(da_f, p.W_f, p.U_f, &p.Y_f, grads.W_f, grads.U_f, &grads.Y_f, grads.b_f);
  gate(da_o, p.W_o, p.U_o, &p.Y_o, grads.W_o, grads.U_o, &grads.Y_o, grads.b_o);
  gate(da_g, p.W_g, p.U_g, nullptr, grads.W_g, grads.U_g, nullptr, grads.b_g);
}

// ---------------------------------------------------------------------------
// Output layer and normalization.

struct LinearParams {
  Matrix W;  // out x in
  Matrix b;  // out x 1

  LinearParams() = default;
  LinearParams(std::size_t out, std::size_t in) : W(out, in), b(out, 1) {}

  std::size_t in_size() const { return W.cols(); }
  std::size_t out_size() const { return W.rows(); }

  template <class Self, class F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "W", self.W);
    f(prefix + "b", self.b);
  }
  template <class F> void for_each_tensor(const std::string& prefix, F&& f) { visit(*this, prefix, f); }
  template <class F> void for_each_tensor(const std::string& prefix, F&& f) const { visit(*this, prefix, f); }

  void validate() const {
    if (b.rows() != W.rows() || b.cols() != 1) {
      throw DimensionError("linear bias shape " + shape_str(b.rows(), b.cols()) +
                           " does not match weight rows " + std::to_string(W.rows()));
    }
  }
};

inline Vector linear(const LinearParams& p, std::span<const double> x) {
  check_len(x.size(), p.in_size(), "linear input");
  Vector z(p.b.values().begin(), p.b.values().end());
  gemv_acc(p.W, x, z);
  return z;
}

inline double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

inline Vector softmax(std::span<const double> z) {
  if (z.empty()) return {};
  const double m = *std::max_element(z.begin(), z.end());
  Vector q(z.size());
  double s = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    q[k] = std::exp(z[k] - m);
    s += q[k];
  }
  for (double& v : q) v /= s;
  return q;
}

inline double cross_entropy(std::span<const double> q, std::size_t target) {
  if (target >= q.size()) {
    throw DimensionError("cross_entropy target " + std::to_string(target) + " out of range " +
                         std::to_string(q.size()));
  }
  return -std::log(q[target]);
}

// -log softmax(z)[target], computed through log-sum-exp.
inline double softmax_cross_entropy(std::span<const double> z, std::size_t target) {
  if (target >= z.size()) {
    throw DimensionError("cross_entropy target " + std::to_string(target) + " out of range " +
                         std::to_string(z.size()));
  }
  return log_sum_exp(z) - z[target];
}

// ---------------------------------------------------------------------------
// Reverse-mode tape.
//
// Every recorded value is a node holding its forward value and an adjoint.
// Parameter gradients are accumulated into caller-owned tensors supplied at
// record time; backward() replays the recorded closures in reverse order.

class Tape {
 public:
  using Var = std::size_t;

  Tape() = default;
  // Recorded closures refer back to this tape.
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Vector v) { return push(std::move(v)); }

  Var lookup(const Matrix& table, Matrix& grad_table, std::size_t row) {
    if (row >= table.rows()) {
      throw DimensionError("embedding row " + std::to_string(row) + " out of range " +
                           std::to_string(table.rows()));
    }
    auto r = table.row(row);
    Var out = push(Vector(r.begin(), r.end()));
    ops_.push_back([this, out, &grad_table, row] {
      auto g = grad_table.row(row);
      const Vector& d = nodes_[out].grad;
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += d[k];
    });
    return out;
  }

  std::pair<Var, Var> lstm(const LstmParams& p, LstmParams& grads, Var x, Var h, Var c) {
    auto cache = std::make_shared<LstmCache>();
    LstmState prev{nodes_[h].value, nodes_[c].value};
    LstmState next = lstm_step(p, nodes_[x].value, prev, cache.get());
    Var h_out = push(std::move(next.h));
    Var c_out = push(std::move(next.c));
    ops_.push_back([this, &p, &grads, x, h, c, h_out, c_out, cache] {
      LstmState prev_state{nodes_[h].value, nodes_[c].value};
      lstm_step_backward(p, grads, nodes_[x].value, prev_state, *cache, nodes_[h_out].grad,
                         nodes_[c_out].grad, nodes_[x].grad, nodes_[h].grad, nodes_[c].grad);
    });
    return {h_out, c_out};
  }

  Var concat(Var a, Var b) {
    Vector v = nodes_[a].value;
    v.insert(v.end(), nodes_[b].value.begin(), nodes_[b].value.end());
    Var out = push(std::move(v));
    ops_.push_back([this, a, b, out] {
      const Vector& d = nodes_[out].grad;
      const std::size_t na = nodes_[a].grad.size();
      for (std::size_t k = 0; k < na; ++k) nodes_[a].grad[k] += d[k];
      for (std::size_t k = 0; k < nodes_[b].grad.size(); ++k) nodes_[b].grad[k] += d[na + k];
    });
    return out;
  }

  Var linear(const LinearParams& p, LinearParams& grads, Var x) {
    Var out = push(nk::linear(p, nodes_[x].value));
    ops_.push_back([this, &p, &grads, x, out] {
      const Vector& dz = nodes_[out].grad;
      outer_acc(grads.W, dz, nodes_[x].value);
      for (std::size_t k = 0; k < dz.size(); ++k) grads.b(k, 0) += dz[k];
      gemv_t_acc(p.W, dz, nodes_[x].grad);
    });
    return out;
  }

  // Scalar node holding -log softmax(z)[target].
  Var softmax_xent(Var z, std::size_t target) {
    const Vector& zv = nodes_[z].value;
    const double loss = softmax_cross_entropy(zv, target);
    Var out = push(Vector{loss});
    ops_.push_back([this, z, out, target] {
      const double up = nodes_[out].grad[0];
      if (up == 0.0) return;
      Vector q = softmax(nodes_[z].value);
      q[target] -= 1.0;
      Vector& dz = nodes_[z].grad;
      for (std::size_t k = 0; k < q.size(); ++k) dz[k] += up * q[k];
    });
    return out;
  }

  // Weighted scalar sum: sum_k weight * terms[k].
  Var weighted_sum(std::span<const Var> terms, double weight) {
    double s = 0.0;
    for (Var t : terms) s += nodes_[t].value[0];
    Var out = push(Vector{s * weight});
    std::vector<Var> ts(terms.begin(), terms.end());
    ops_.push_back([this, ts = std::move(ts), weight, out] {
      const double up = nodes_[out].grad[0] * weight;
      for (Var t : ts) nodes_[t].grad[0] += up;
    });
    return out;
  }

  const Vector& value(Var v) const { return nodes_[v].value; }
  const Vector& adjoint(Var v) const { return nodes_[v].grad; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(output)/d(output) = upstream on a scalar node and propagates.
  void backward(Var output, double upstream = 1.0) {
    if (nodes_[output].value.size() != 1) {
      throw DimensionError("backward needs a scalar output node");
    }
    if (backward_done_) throw DimensionError("tape already consumed by backward");
    nodes_[output].grad[0] += upstream;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    backward_done_ = true;
  }

 private:
  struct Node {
    Vector value;
    Vector grad;
  };

  Var push(Vector v) {
    const std::size_t n = v.size();
    nodes_.push_back(Node{std::move(v), Vector(n, 0.0)});
    return nodes_.size() - 1;
  }

  std::vector<Node> nodes_;
  std::vector<std::function<void()>> ops_;
  bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Optimizer.

template <class Refs>
double global_norm(const Refs& grads) {
  double s = 0.0;
  for (const auto& g : grads) {
    for (double v : g.value->values()) s += v * v;
  }
  return std::sqrt(s);
}

// p -= lr * g for every tensor pair, after optional global-norm clipping.
// Non-finite gradients abort before anything is modified.
inline void sgd_update(std::span<const TensorRef> params, std::span<const ConstTensorRef> grads,
                       double lr, std::optional<double> clip = std::nullopt) {
  if (!(lr > 0.0)) throw DimensionError("learning rate must be positive");
  if (params.size() != grads.size()) throw DimensionError("parameter/gradient count mismatch");
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (!params[t].value->same_shape(*grads[t].value)) {
      throw DimensionError("gradient shape mismatch for " + params[t].name);
    }
    for (double v : grads[t].value->values()) {
      if (!std::isfinite(v)) throw NonFiniteError("non-finite gradient in tensor " + grads[t].name);
    }
  }
  double scale = lr;
  if (clip) {
    const double norm = global_norm(grads);
    if (norm > *clip) scale *= *clip / norm;
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t].value->values();
    auto g = grads[t].value->values();
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= scale * g[k];
  }
}

// Uniform(-s, s) with s = sqrt(6 / (rows + cols)).
inline void glorot_uniform(Matrix& m, std::mt19937_64& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  std::uniform_real_distribution<double> dist(-s, s);
  for (double& v : m.values()) v = dist(rng);
}

}  // namespace wordchoice::nk
