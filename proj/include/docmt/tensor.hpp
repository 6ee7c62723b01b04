#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "docmt/error.hpp"
#include "docmt/rng.hpp"

namespace docmt {

/// Handle into a Tape. Cheap to copy; owns nothing.
struct Tensor {
  int id = -1;
};

template <typename S>
using MatrixOf = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One trainable matrix with its persistent gradient accumulator.
template <typename S>
struct Param {
  MatrixOf<S> value;
  MatrixOf<S> grad;

  explicit Param(MatrixOf<S> v) : value(std::move(v)) {
    grad = MatrixOf<S>::Zero(value.rows(), value.cols());
  }
};

/// Append-only record of a forward computation over dense 2-D matrices.
/// Creation order is the topological order, so backward() is a single
/// reverse sweep; every node's closure accumulates into its parents'
/// gradients additively.
template <typename S>
class Tape {
 public:
  using Matrix = MatrixOf<S>;

  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::function<void()> backward;
  };

  Tensor constant(Matrix v) { return push(std::move(v), false, nullptr); }

  /// Leases a persistent parameter onto this tape; after backward() the
  /// node's gradient lands in p.grad.
  Tensor leaf(Param<S>& p) {
    Tensor t = push(p.value, true, nullptr);
    Param<S>* target = &p;
    int id = t.id;
    nodes_[id].backward = [this, id, target]() {
      if (nodes_[id].grad.size() > 0) target->grad += nodes_[id].grad;
    };
    return t;
  }

  const Matrix& value(Tensor t) const { return nodes_.at(t.id).value; }
  const Matrix& grad(Tensor t) const { return nodes_.at(t.id).grad; }
  Eigen::Index rows(Tensor t) const { return nodes_.at(t.id).value.rows(); }
  Eigen::Index cols(Tensor t) const { return nodes_.at(t.id).value.cols(); }
  bool requires_grad(Tensor t) const { return nodes_.at(t.id).requires_grad; }
  size_t size() const { return nodes_.size(); }

  /// Reverse-mode sweep from a 1x1 loss node.
  void backward(Tensor loss) {
    if (nodes_.empty()) throw Error("backward: empty tape");
    const Node& top = nodes_.at(loss.id);
    if (top.value.rows() != 1 || top.value.cols() != 1)
      throw DimensionError("backward: loss must be 1x1, got " +
                           shape_str(top.value));
    grad_of(loss.id)(0, 0) += S(1);
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
      Node& node = nodes_[id];
      if (!node.requires_grad || !node.backward) continue;
      if (node.grad.size() == 0) continue;  // not on any path to the loss
      node.backward();
    }
  }

  // ---- implementation helpers shared by the op definitions ----

  Tensor push(Matrix v, bool requires_grad, std::function<void()> backward) {
    Node node;
    node.value = std::move(v);
    node.requires_grad = requires_grad;
    node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Tensor{static_cast<int>(nodes_.size()) - 1};
  }

  void set_backward(Tensor t, std::function<void()> fn) {
    nodes_.at(t.id).backward = std::move(fn);
  }

  /// Gradient accumulator of a node, zero-initialized on first touch.
  Matrix& grad_of(int id) {
    Node& node = nodes_.at(id);
    if (node.grad.size() == 0)
      node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
    return node.grad;
  }

  bool has_grad(int id) const { return nodes_.at(id).grad.size() > 0; }

  static std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
  }

 private:
  std::vector<Node> nodes_;
};

namespace detail {

template <typename S>
void require_same_shape(const Tape<S>& tape, Tensor a, Tensor b, const char* op) {
  if (tape.rows(a) != tape.rows(b) || tape.cols(a) != tape.cols(b))
    throw DimensionError(std::string(op) + ": shapes " +
                         Tape<S>::shape_str(tape.value(a)) + " and " +
                         Tape<S>::shape_str(tape.value(b)) + " differ");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise and broadcast ops
// ---------------------------------------------------------------------------

template <typename S>
Tensor add(Tape<S>& tape, Tensor a, Tensor b) {
  detail::require_same_shape(tape, a, b, "add");
  bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  Tensor out = tape.push(tape.value(a) + tape.value(b), rg, nullptr);
  tape.set_backward(out, [&tape, a, b, out]() {
    const auto& g = tape.grad_of(out.id);
    if (tape.requires_grad(a)) tape.grad_of(a.id) += g;
    if (tape.requires_grad(b)) tape.grad_of(b.id) += g;
  });
  return out;
}

/// y = a*x + b with scalar a, b; covers scaling and 1-x style expressions.
template <typename S>
Tensor affine(Tape<S>& tape, Tensor x, S a, S b) {
  Tensor out =
      tape.push((tape.value(x).array() * a + b).matrix(), tape.requires_grad(x),
                nullptr);
  tape.set_backward(out, [&tape, x, out, a]() {
    if (tape.requires_grad(x)) tape.grad_of(x.id) += a * tape.grad_of(out.id);
  });
  return out;
}

template <typename S>
Tensor scale(Tape<S>& tape, Tensor x, S a) {
  return affine(tape, x, a, S(0));
}

template <typename S>
Tensor mul(Tape<S>& tape, Tensor a, Tensor b) {
  detail::require_same_shape(tape, a, b, "mul");
  bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  Tensor out = tape.push(
      (tape.value(a).array() * tape.value(b).array()).matrix(), rg, nullptr);
  tape.set_backward(out, [&tape, a, b, out]() {
    const auto& g = tape.grad_of(out.id);
    if (tape.requires_grad(a))
      tape.grad_of(a.id).array() += g.array() * tape.value(b).array();
    if (tape.requires_grad(b))
      tape.grad_of(b.id).array() += g.array() * tape.value(a).array();
  });
  return out;
}

/// Elementwise product with a constant matrix (masks, fixed gates).
template <typename S>
Tensor const_mul(Tape<S>& tape, Tensor x, MatrixOf<S> m) {
  if (tape.rows(x) != m.rows() || tape.cols(x) != m.cols())
    throw DimensionError("const_mul: shapes " +
                         Tape<S>::shape_str(tape.value(x)) + " and " +
                         Tape<S>::shape_str(m) + " differ");
  auto shared = std::make_shared<MatrixOf<S>>(std::move(m));
  Tensor out = tape.push((tape.value(x).array() * shared->array()).matrix(),
                         tape.requires_grad(x), nullptr);
  tape.set_backward(out, [&tape, x, out, shared]() {
    if (tape.requires_grad(x))
      tape.grad_of(x.id).array() += tape.grad_of(out.id).array() * shared->array();
  });
  return out;
}

/// x + constant matrix (positional encodings).
template <typename S>
Tensor add_const(Tape<S>& tape, Tensor x, const MatrixOf<S>& m) {
  if (tape.rows(x) != m.rows() || tape.cols(x) != m.cols())
    throw DimensionError("add_const: shapes " +
                         Tape<S>::shape_str(tape.value(x)) + " and " +
                         Tape<S>::shape_str(m) + " differ");
  Tensor out = tape.push(tape.value(x) + m, tape.requires_grad(x), nullptr);
  tape.set_backward(out, [&tape, x, out]() {
    if (tape.requires_grad(x)) tape.grad_of(x.id) += tape.grad_of(out.id);
  });
  return out;
}

/// Adds a 1xD bias row to every row of x.
template <typename S>
Tensor add_bias(Tape<S>& tape, Tensor x, Tensor bias) {
  if (tape.rows(bias) != 1 || tape.cols(bias) != tape.cols(x))
    throw DimensionError("add_bias: bias " + Tape<S>::shape_str(tape.value(bias)) +
                         " does not broadcast over " +
                         Tape<S>::shape_str(tape.value(x)));
  bool rg = tape.requires_grad(x) || tape.requires_grad(bias);
  Tensor out =
      tape.push(tape.value(x).rowwise() + tape.value(bias).row(0), rg, nullptr);
  tape.set_backward(out, [&tape, x, bias, out]() {
    const auto& g = tape.grad_of(out.id);
    if (tape.requires_grad(x)) tape.grad_of(x.id) += g;
    if (tape.requires_grad(bias)) tape.grad_of(bias.id) += g.colwise().sum();
  });
  return out;
}

/// Multiplies every row of x elementwise by a 1xD gain row.
template <typename S>
Tensor mul_bias(Tape<S>& tape, Tensor x, Tensor gain) {
  if (tape.rows(gain) != 1 || tape.cols(gain) != tape.cols(x))
    throw DimensionError("mul_bias: gain " + Tape<S>::shape_str(tape.value(gain)) +
                         " does not broadcast over " +
                         Tape<S>::shape_str(tape.value(x)));
  bool rg = tape.requires_grad(x) || tape.requires_grad(gain);
  Tensor out = tape.push(
      (tape.value(x).array().rowwise() * tape.value(gain).row(0).array()).matrix(),
      rg, nullptr);
  tape.set_backward(out, [&tape, x, gain, out]() {
    const auto& g = tape.grad_of(out.id);
    if (tape.requires_grad(x))
      tape.grad_of(x.id).array() +=
          g.array().rowwise() * tape.value(gain).row(0).array();
    if (tape.requires_grad(gain))
      tape.grad_of(gain.id) +=
          (g.array() * tape.value(x).array()).matrix().colwise().sum();
  });
  return out;
}

template <typename S>
Tensor relu(Tape<S>& tape, Tensor x) {
  Tensor out = tape.push(tape.value(x).cwiseMax(S(0)), tape.requires_grad(x),
                         nullptr);
  tape.set_backward(out, [&tape, x, out]() {
    if (!tape.requires_grad(x)) return;
    tape.grad_of(x.id).array() +=
        tape.grad_of(out.id).array() *
        (tape.value(x).array() > S(0)).template cast<S>();
  });
  return out;
}

template <typename S>
Tensor sigmoid(Tape<S>& tape, Tensor x) {
  MatrixOf<S> y = tape.value(x).unaryExpr([](S v) {
    return v >= S(0) ? S(1) / (S(1) + std::exp(-v))
                     : std::exp(v) / (S(1) + std::exp(v));
  });
  Tensor out = tape.push(std::move(y), tape.requires_grad(x), nullptr);
  tape.set_backward(out, [&tape, x, out]() {
    if (!tape.requires_grad(x)) return;
    const auto& y = tape.value(out);
    tape.grad_of(x.id).array() +=
        tape.grad_of(out.id).array() * y.array() * (S(1) - y.array());
  });
  return out;
}

// ---------------------------------------------------------------------------
// matrix product, concatenation, reductions
// ---------------------------------------------------------------------------

template <typename S>
Tensor matmul(Tape<S>& tape, Tensor a, Tensor b) {
  if (tape.cols(a) != tape.rows(b))
    throw DimensionError("matmul: " + Tape<S>::shape_str(tape.value(a)) +
                         " times " + Tape<S>::shape_str(tape.value(b)));
  bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  Tensor out = tape.push(tape.value(a) * tape.value(b), rg, nullptr);
  tape.set_backward(out, [&tape, a, b, out]() {
    const auto& g = tape.grad_of(out.id);
    if (tape.requires_grad(a)) tape.grad_of(a.id) += g * tape.value(b).transpose();
    if (tape.requires_grad(b)) tape.grad_of(b.id) += tape.value(a).transpose() * g;
  });
  return out;
}

template <typename S>
Tensor transpose(Tape<S>& tape, Tensor x) {
  Tensor out =
      tape.push(tape.value(x).transpose(), tape.requires_grad(x), nullptr);
  tape.set_backward(out, [&tape, x, out]() {
    if (tape.requires_grad(x))
      tape.grad_of(x.id) += tape.grad_of(out.id).transpose();
  });
  return out;
}

template <typename S>
Tensor concat_cols(Tape<S>& tape, Tensor a, Tensor b) {
  if (tape.rows(a) != tape.rows(b))
    throw DimensionError("concat_cols: row counts " +
                         Tape<S>::shape_str(tape.value(a)) + " and " +
                         Tape<S>::shape_str(tape.value(b)) + " differ");
  bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  MatrixOf<S> v(tape.rows(a), tape.cols(a) + tape.cols(b));
  v.leftCols(tape.cols(a)) = tape.value(a);
  v.rightCols(tape.cols(b)) = tape.value(b);
  Tensor out = tape.push(std::move(v), rg, nullptr);
  tape.set_backward(out, [&tape, a, b, out]() {
    const auto& g = tape.grad_of(out.id);
    Eigen::Index ca = tape.cols(a);
    if (tape.requires_grad(a)) tape.grad_of(a.id) += g.leftCols(ca);
    if (tape.requires_grad(b)) tape.grad_of(b.id) += g.rightCols(tape.cols(b));
  });
  return out;
}

template <typename S>
Tensor split_cols(Tape<S>& tape, Tensor x, Eigen::Index offset, Eigen::Index width) {
  if (offset < 0 || width <= 0 || offset + width > tape.cols(x))
    throw DimensionError("split_cols: [" + std::to_string(offset) + ", " +
                         std::to_string(offset + width) + ") outside " +
                         Tape<S>::shape_str(tape.value(x)));
  Tensor out = tape.push(tape.value(x).middleCols(offset, width),
                         tape.requires_grad(x), nullptr);
  tape.set_backward(out, [&tape, x, out, offset, width]() {
    if (tape.requires_grad(x))
      tape.grad_of(x.id).middleCols(offset, width) += tape.grad_of(out.id);
  });
  return out;
}

template <typename S>
Tensor mean_all(Tape<S>& tape, Tensor x) {
  MatrixOf<S> v(1, 1);
  v(0, 0) = tape.value(x).mean();
  Tensor out = tape.push(std::move(v), tape.requires_grad(x), nullptr);
  tape.set_backward(out, [&tape, x, out]() {
    if (!tape.requires_grad(x)) return;
    S g = tape.grad_of(out.id)(0, 0) / static_cast<S>(tape.value(x).size());
    tape.grad_of(x.id).array() += g;
  });
  return out;
}

template <typename S>
Tensor sum_all(Tape<S>& tape, Tensor x) {
  MatrixOf<S> v(1, 1);
  v(0, 0) = tape.value(x).sum();
  Tensor out = tape.push(std::move(v), tape.requires_grad(x), nullptr);
  tape.set_backward(out, [&tape, x, out]() {
    if (tape.requires_grad(x))
      tape.grad_of(x.id).array() += tape.grad_of(out.id)(0, 0);
  });
  return out;
}

// ---------------------------------------------------------------------------
// normalization and softmax
// ---------------------------------------------------------------------------

/// Per-row standardization (x - mean) / sqrt(var + eps), without affine
/// parameters; compose with mul_bias/add_bias for the learned gain and bias.
template <typename S>
Tensor layer_norm_rows(Tape<S>& tape, Tensor x, S eps = S(1e-5)) {
  const auto& v = tape.value(x);
  Eigen::Index n = v.cols();
  MatrixOf<S> y(v.rows(), n);
  MatrixOf<S> inv_sigma(v.rows(), 1);
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    S mu = v.row(r).mean();
    S var = (v.row(r).array() - mu).square().sum() / static_cast<S>(n);
    S is = S(1) / std::sqrt(var + eps);
    inv_sigma(r, 0) = is;
    y.row(r) = ((v.row(r).array() - mu) * is).matrix();
  }
  auto shared_is = std::make_shared<MatrixOf<S>>(std::move(inv_sigma));
  Tensor out = tape.push(std::move(y), tape.requires_grad(x), nullptr);
  tape.set_backward(out, [&tape, x, out, shared_is]() {
    if (!tape.requires_grad(x)) return;
    const auto& y = tape.value(out);
    const auto& g = tape.grad_of(out.id);
    auto& gx = tape.grad_of(x.id);
    Eigen::Index n = y.cols();
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      S gmean = g.row(r).mean();
      S gy = (g.row(r).array() * y.row(r).array()).sum() / static_cast<S>(n);
      gx.row(r).array() +=
          (*shared_is)(r, 0) * (g.row(r).array() - gmean - y.row(r).array() * gy);
    }
  });
  return out;
}

namespace detail {

// softmax over the columns of one row restricted to unmasked entries;
// a fully masked row stays exactly zero (and backpropagates exact zero)
template <typename S>
void masked_softmax_row(const Eigen::Ref<const Eigen::RowVectorX<S>>& x,
                        const Eigen::Ref<const Eigen::RowVectorX<S>>& mask,
                        Eigen::Ref<Eigen::RowVectorX<S>> y) {
  S max_val = std::numeric_limits<S>::lowest();
  bool any = false;
  for (Eigen::Index j = 0; j < x.size(); ++j)
    if (mask(j) != S(0)) {
      any = true;
      if (x(j) > max_val) max_val = x(j);
    }
  y.setZero();
  if (!any) return;
  S denom = S(0);
  for (Eigen::Index j = 0; j < x.size(); ++j)
    if (mask(j) != S(0)) {
      y(j) = std::exp(x(j) - max_val);
      denom += y(j);
    }
  y /= denom;
}

}  // namespace detail

/// Row softmax with a constant 0/1 mask; masked entries get exactly zero
/// probability and exactly zero gradient. A fully masked row yields a zero
/// output row.
template <typename S>
Tensor masked_softmax_rows(Tape<S>& tape, Tensor x, MatrixOf<S> mask) {
  const auto& v = tape.value(x);
  if (v.rows() != mask.rows() || v.cols() != mask.cols())
    throw DimensionError("masked_softmax_rows: shapes " +
                         Tape<S>::shape_str(v) + " and " +
                         Tape<S>::shape_str(mask) + " differ");
  auto shared_mask = std::make_shared<MatrixOf<S>>(std::move(mask));
  MatrixOf<S> y(v.rows(), v.cols());
  for (Eigen::Index r = 0; r < v.rows(); ++r)
    detail::masked_softmax_row<S>(v.row(r), shared_mask->row(r), y.row(r));
  Tensor out = tape.push(std::move(y), tape.requires_grad(x), nullptr);
  tape.set_backward(out, [&tape, x, out, shared_mask]() {
    if (!tape.requires_grad(x)) return;
    const auto& y = tape.value(out);
    const auto& g = tape.grad_of(out.id);
    auto& gx = tape.grad_of(x.id);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      S dot = (g.row(r).array() * y.row(r).array()).sum();
      gx.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
    }
  });
  return out;
}

template <typename S>
Tensor softmax_rows(Tape<S>& tape, Tensor x) {
  MatrixOf<S> ones = MatrixOf<S>::Ones(tape.rows(x), tape.cols(x));
  return masked_softmax_rows(tape, x, std::move(ones));
}

// ---------------------------------------------------------------------------
// lookups, dropout, loss
// ---------------------------------------------------------------------------

/// Gathers rows of a (vocab x dim) table; backward scatter-adds.
template <typename S>
Tensor embedding_lookup(Tape<S>& tape, Tensor table, const std::vector<int>& ids) {
  const auto& t = tape.value(table);
  MatrixOf<S> v(static_cast<Eigen::Index>(ids.size()), t.cols());
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= t.rows())
      throw DimensionError("embedding_lookup: id " + std::to_string(ids[i]) +
                           " outside table " + Tape<S>::shape_str(t));
    v.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
  }
  auto shared_ids = std::make_shared<std::vector<int>>(ids);
  Tensor out = tape.push(std::move(v), tape.requires_grad(table), nullptr);
  tape.set_backward(out, [&tape, table, out, shared_ids]() {
    if (!tape.requires_grad(table)) return;
    const auto& g = tape.grad_of(out.id);
    auto& gt = tape.grad_of(table.id);
    for (size_t i = 0; i < shared_ids->size(); ++i)
      gt.row((*shared_ids)[i]) += g.row(static_cast<Eigen::Index>(i));
  });
  return out;
}

/// Inverted dropout with an explicit generator so runs are reproducible.
/// rate 0 is an exact no-op.
template <typename S>
Tensor dropout(Tape<S>& tape, Tensor x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError("dropout: rate must be in [0, 1), got " +
                      std::to_string(rate));
  if (rate == 0.0) return x;
  S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
  MatrixOf<S> mask(tape.rows(x), tape.cols(x));
  for (Eigen::Index r = 0; r < mask.rows(); ++r)
    for (Eigen::Index c = 0; c < mask.cols(); ++c)
      mask(r, c) = rng.real() < rate ? S(0) : keep_scale;
  return const_mul(tape, x, std::move(mask));
}

/// Mean token-level cross entropy from raw logits via a stable log-softmax.
/// targets[i] == ignore_index rows carry no loss and no gradient; optional
/// uniform label smoothing mixes epsilon of mass over the whole vocabulary.
template <typename S>
Tensor cross_entropy_mean(Tape<S>& tape, Tensor logits,
                          const std::vector<int>& targets, int ignore_index = -1,
                          double label_smoothing = 0.0) {
  const auto& z = tape.value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != z.rows())
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for " + Tape<S>::shape_str(z));
  Eigen::Index vocab = z.cols();
  S eps = static_cast<S>(label_smoothing);
  long counted = 0;
  S loss = S(0);
  MatrixOf<S> log_probs(z.rows(), vocab);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    S max_val = z.row(r).maxCoeff();
    S lse = std::log((z.row(r).array() - max_val).exp().sum()) + max_val;
    log_probs.row(r) = z.row(r).array() - lse;
    int t = targets[r];
    if (t == ignore_index) continue;
    if (t < 0 || t >= vocab)
      throw DimensionError("cross_entropy: target " + std::to_string(t) +
                           " outside vocabulary of " + std::to_string(vocab));
    counted += 1;
    S nll = -log_probs(r, t);
    if (eps > S(0)) {
      S uniform_nll = -log_probs.row(r).mean();
      loss += (S(1) - eps) * nll + eps * uniform_nll;
    } else {
      loss += nll;
    }
  }
  if (counted == 0) throw ConfigError("cross_entropy: every target is ignored");
  MatrixOf<S> v(1, 1);
  v(0, 0) = loss / static_cast<S>(counted);

  auto shared_targets = std::make_shared<std::vector<int>>(targets);
  auto shared_lp = std::make_shared<MatrixOf<S>>(std::move(log_probs));
  Tensor out = tape.push(std::move(v), tape.requires_grad(logits), nullptr);
  tape.set_backward(out, [&tape, logits, out, shared_targets, shared_lp,
                          ignore_index, eps, counted]() {
    if (!tape.requires_grad(logits)) return;
    S g = tape.grad_of(out.id)(0, 0) / static_cast<S>(counted);
    auto& gz = tape.grad_of(logits.id);
    Eigen::Index vocab = shared_lp->cols();
    for (Eigen::Index r = 0; r < shared_lp->rows(); ++r) {
      int t = (*shared_targets)[r];
      if (t == ignore_index) continue;
      // d/dz of -sum_k q_k log p_k is (p - q)
      gz.row(r).array() += g * shared_lp->row(r).array().exp();
      if (eps > S(0)) {
        gz.row(r).array() -= g * eps / static_cast<S>(vocab);
        gz(r, t) -= g * (S(1) - eps);
      } else {
        gz(r, t) -= g;
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// batched multi-head attention primitives
//
// Activations for a batch of B sequences of length L sit in (B*L) x D
// matrices. Attention works per batch element and head on column slices of
// width D/heads, producing score blocks stacked as (B*heads*Lq) x Lk.
// ---------------------------------------------------------------------------

namespace detail {

template <typename S>
void check_attn_shapes(const Tape<S>& tape, Tensor q, Tensor k, Eigen::Index batch,
                       Eigen::Index heads, const char* op) {
  if (tape.cols(q) != tape.cols(k))
    throw DimensionError(std::string(op) + ": model dims " +
                         std::to_string(tape.cols(q)) + " and " +
                         std::to_string(tape.cols(k)) + " differ");
  if (batch <= 0 || tape.rows(q) % batch != 0 || tape.rows(k) % batch != 0)
    throw DimensionError(std::string(op) + ": rows not divisible by batch " +
                         std::to_string(batch));
  if (heads <= 0 || tape.cols(q) % heads != 0)
    throw DimensionError(std::string(op) + ": model dim " +
                         std::to_string(tape.cols(q)) +
                         " not divisible by heads " + std::to_string(heads));
}

}  // namespace detail

/// Scaled dot-product scores. q: (B*Lq) x D, k: (B*Lk) x D. The result
/// stacks per-batch per-head blocks: row ((b*heads + h)*Lq + i) holds the
/// scores of query i against all Lk keys of batch element b under head h.
template <typename S>
Tensor attn_scores(Tape<S>& tape, Tensor q, Tensor k, Eigen::Index batch,
                   Eigen::Index heads, S scale) {
  detail::check_attn_shapes(tape, q, k, batch, heads, "attn_scores");
  Eigen::Index lq = tape.rows(q) / batch;
  Eigen::Index lk = tape.rows(k) / batch;
  Eigen::Index dk = tape.cols(q) / heads;
  const auto& qv = tape.value(q);
  const auto& kv = tape.value(k);
  MatrixOf<S> s(batch * heads * lq, lk);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index h = 0; h < heads; ++h)
      s.middleRows((b * heads + h) * lq, lq) =
          scale * qv.block(b * lq, h * dk, lq, dk) *
          kv.block(b * lk, h * dk, lk, dk).transpose();
  bool rg = tape.requires_grad(q) || tape.requires_grad(k);
  Tensor out = tape.push(std::move(s), rg, nullptr);
  tape.set_backward(out, [&tape, q, k, out, batch, heads, lq, lk, dk, scale]() {
    const auto& g = tape.grad_of(out.id);
    const auto& qv = tape.value(q);
    const auto& kv = tape.value(k);
    for (Eigen::Index b = 0; b < batch; ++b)
      for (Eigen::Index h = 0; h < heads; ++h) {
        auto gblock = g.middleRows((b * heads + h) * lq, lq);
        if (tape.requires_grad(q))
          tape.grad_of(q.id).block(b * lq, h * dk, lq, dk) +=
              scale * gblock * kv.block(b * lk, h * dk, lk, dk);
        if (tape.requires_grad(k))
          tape.grad_of(k.id).block(b * lk, h * dk, lk, dk) +=
              scale * gblock.transpose() * qv.block(b * lq, h * dk, lq, dk);
      }
  });
  return out;
}

/// Applies attention weights to values. p: (B*heads*Lq) x Lk as produced by
/// attn_scores (after softmax), v: (B*Lk) x D; result is (B*Lq) x D with
/// heads written back into their column slices.
template <typename S>
Tensor attn_apply(Tape<S>& tape, Tensor p, Tensor v, Eigen::Index batch,
                  Eigen::Index heads) {
  if (batch <= 0 || tape.rows(v) % batch != 0 ||
      tape.rows(p) % (batch * heads) != 0)
    throw DimensionError("attn_apply: rows not divisible by batch " +
                         std::to_string(batch));
  Eigen::Index lk = tape.rows(v) / batch;
  Eigen::Index lq = tape.rows(p) / (batch * heads);
  Eigen::Index d = tape.cols(v);
  if (d % heads != 0 || tape.cols(p) != lk)
    throw DimensionError("attn_apply: weights " +
                         Tape<S>::shape_str(tape.value(p)) +
                         " incompatible with values " +
                         Tape<S>::shape_str(tape.value(v)));
  Eigen::Index dk = d / heads;
  const auto& pv = tape.value(p);
  const auto& vv = tape.value(v);
  MatrixOf<S> o = MatrixOf<S>::Zero(batch * lq, d);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index h = 0; h < heads; ++h)
      o.block(b * lq, h * dk, lq, dk) =
          pv.middleRows((b * heads + h) * lq, lq) *
          vv.block(b * lk, h * dk, lk, dk);
  bool rg = tape.requires_grad(p) || tape.requires_grad(v);
  Tensor out = tape.push(std::move(o), rg, nullptr);
  tape.set_backward(out, [&tape, p, v, out, batch, heads, lq, lk, dk]() {
    const auto& g = tape.grad_of(out.id);
    const auto& pv = tape.value(p);
    const auto& vv = tape.value(v);
    for (Eigen::Index b = 0; b < batch; ++b)
      for (Eigen::Index h = 0; h < heads; ++h) {
        auto gblock = g.block(b * lq, h * dk, lq, dk);
        if (tape.requires_grad(p))
          tape.grad_of(p.id).middleRows((b * heads + h) * lq, lq) +=
              gblock * vv.block(b * lk, h * dk, lk, dk).transpose();
        if (tape.requires_grad(v))
          tape.grad_of(v.id).block(b * lk, h * dk, lk, dk) +=
              pv.middleRows((b * heads + h) * lq, lq).transpose() * gblock;
      }
  });
  return out;
}

/// Per-row attention scores of each query row against the matching row of
/// every stacked alternative (sentence-level attention over context
/// offsets). q and each entry of options are N x D; the result is
/// (N*heads) x K with row r*heads+h holding head h's scores for row r.
template <typename S>
Tensor stacked_attn_scores(Tape<S>& tape, Tensor q,
                           const std::vector<Tensor>& options,
                           Eigen::Index heads, S scale) {
  if (options.empty()) throw DimensionError("stacked_attn_scores: no options");
  Eigen::Index n = tape.rows(q);
  Eigen::Index d = tape.cols(q);
  if (heads <= 0 || d % heads != 0)
    throw DimensionError("stacked_attn_scores: model dim " + std::to_string(d) +
                         " not divisible by heads " + std::to_string(heads));
  for (Tensor o : options)
    if (tape.rows(o) != n || tape.cols(o) != d)
      throw DimensionError("stacked_attn_scores: option shape " +
                           Tape<S>::shape_str(tape.value(o)) +
                           " does not match queries " +
                           Tape<S>::shape_str(tape.value(q)));
  Eigen::Index num_opts = static_cast<Eigen::Index>(options.size());
  Eigen::Index dk = d / heads;
  const auto& qv = tape.value(q);
  MatrixOf<S> s(n * heads, num_opts);
  bool rg = tape.requires_grad(q);
  for (Eigen::Index k = 0; k < num_opts; ++k) {
    const auto& ov = tape.value(options[k]);
    rg = rg || tape.requires_grad(options[k]);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index h = 0; h < heads; ++h)
        s(r * heads + h, k) =
            scale *
            (qv.row(r).segment(h * dk, dk).array() *
             ov.row(r).segment(h * dk, dk).array())
                .sum();
  }
  auto opts = std::make_shared<std::vector<Tensor>>(options);
  Tensor out = tape.push(std::move(s), rg, nullptr);
  tape.set_backward(out, [&tape, q, out, opts, heads, dk, scale]() {
    const auto& g = tape.grad_of(out.id);
    const auto& qv = tape.value(q);
    Eigen::Index n = qv.rows();
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(opts->size()); ++k) {
      Tensor opt = (*opts)[static_cast<size_t>(k)];
      const auto& ov = tape.value(opt);
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index h = 0; h < heads; ++h) {
          S gs = scale * g(r * heads + h, k);
          if (gs == S(0)) continue;
          if (tape.requires_grad(q))
            tape.grad_of(q.id).row(r).segment(h * dk, dk) +=
                gs * ov.row(r).segment(h * dk, dk);
          if (tape.requires_grad(opt))
            tape.grad_of(opt.id).row(r).segment(h * dk, dk) +=
                gs * qv.row(r).segment(h * dk, dk);
        }
    }
  });
  return out;
}

/// Blends the stacked alternatives with per-row per-head weights produced
/// from stacked_attn_scores: out[r] head h = sum_k p[r*heads+h, k] *
/// options[k][r] head h.
template <typename S>
Tensor stacked_attn_apply(Tape<S>& tape, Tensor p,
                          const std::vector<Tensor>& options,
                          Eigen::Index heads) {
  if (options.empty()) throw DimensionError("stacked_attn_apply: no options");
  Eigen::Index n = tape.rows(options[0]);
  Eigen::Index d = tape.cols(options[0]);
  Eigen::Index num_opts = static_cast<Eigen::Index>(options.size());
  if (heads <= 0 || d % heads != 0 || tape.rows(p) != n * heads ||
      tape.cols(p) != num_opts)
    throw DimensionError("stacked_attn_apply: weights " +
                         Tape<S>::shape_str(tape.value(p)) +
                         " incompatible with " + std::to_string(num_opts) +
                         " options of " + Tape<S>::shape_str(tape.value(options[0])));
  Eigen::Index dk = d / heads;
  const auto& pv = tape.value(p);
  MatrixOf<S> o = MatrixOf<S>::Zero(n, d);
  bool rg = tape.requires_grad(p);
  for (Eigen::Index k = 0; k < num_opts; ++k) {
    const auto& ov = tape.value(options[static_cast<size_t>(k)]);
    rg = rg || tape.requires_grad(options[static_cast<size_t>(k)]);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index h = 0; h < heads; ++h)
        o.row(r).segment(h * dk, dk) +=
            pv(r * heads + h, k) * ov.row(r).segment(h * dk, dk);
  }
  auto opts = std::make_shared<std::vector<Tensor>>(options);
  Tensor out = tape.push(std::move(o), rg, nullptr);
  tape.set_backward(out, [&tape, p, out, opts, heads, dk]() {
    const auto& g = tape.grad_of(out.id);
    const auto& pv = tape.value(p);
    Eigen::Index n = g.rows();
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(opts->size()); ++k) {
      Tensor opt = (*opts)[static_cast<size_t>(k)];
      const auto& ov = tape.value(opt);
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index h = 0; h < heads; ++h) {
          auto grow = g.row(r).segment(h * dk, dk);
          if (tape.requires_grad(p))
            tape.grad_of(p.id)(r * heads + h, k) +=
                (grow.array() * ov.row(r).segment(h * dk, dk).array()).sum();
          if (tape.requires_grad(opt))
            tape.grad_of(opt.id).row(r).segment(h * dk, dk) +=
                pv(r * heads + h, k) * grow;
        }
    }
  });
  return out;
}

}  // namespace docmt
