#pragma once

// Reverse-mode differentiation over dense matrices.
//
// A Tape records every primitive applied during one forward pass. Each
// primitive stores its output value and a backward rule that maps the output
// gradient to input gradients. `Tape::backward` walks the record in reverse
// creation order, which is a valid topological order because a node can only
// reference nodes created before it.

#include <toporeg/errors.hpp>
#include <toporeg/types.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace toporeg {

class Tape;

/// Handle to a matrix recorded on a Tape.
class DiffMatrix {
 public:
  DiffMatrix() = default;

  Eigen::Index rows() const;
  Eigen::Index cols() const;
  const Matrix& value() const;
  const Matrix& grad() const;
  /// Scalar value of a 1x1 matrix.
  double item() const;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  DiffMatrix(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

namespace detail {

inline std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite entries in ") + what);
}

}  // namespace detail

class Tape {
 public:
  using BackwardRule = std::function<void(const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Trainable leaf; its gradient is available after backward().
  DiffMatrix parameter(Matrix value) { return leaf(std::move(value), true, "parameter"); }

  /// Leaf that never receives a gradient.
  DiffMatrix constant(Matrix value) { return leaf(std::move(value), false, "constant"); }

  /// Records a primitive output. `inputs` decide whether the node needs a gradient.
  DiffMatrix record(Matrix value, std::initializer_list<DiffMatrix> inputs, BackwardRule rule,
                    const char* op) {
    bool needs_grad = false;
    for (const auto& in : inputs) {
      if (in.tape() != this) throw ContractError(std::string(op) + ": operands belong to different tapes");
      needs_grad = needs_grad || nodes_[in.id()].needs_grad;
    }
    detail::require_finite(value, op);
    nodes_.push_back(Node{std::move(value), Matrix(), needs_grad ? std::move(rule) : BackwardRule{}, needs_grad});
    return DiffMatrix(this, nodes_.size() - 1);
  }

  const Matrix& value(const DiffMatrix& m) const { return nodes_.at(m.id()).value; }

  /// Gradient of the last backward() loss with respect to m (zeros if unreachable).
  const Matrix& grad(const DiffMatrix& m) const {
    if (!backward_done_) throw ContractError("grad() requested before backward()");
    return nodes_.at(m.id()).grad;
  }

  bool needs_grad(const DiffMatrix& m) const { return nodes_.at(m.id()).needs_grad; }

  /// Adds g into the gradient buffer of m. Used by backward rules.
  void accumulate(const DiffMatrix& m, const Matrix& g) {
    Node& node = nodes_[m.id()];
    if (!node.needs_grad) return;
    node.grad += g;
  }

  /// Runs reverse accumulation from a 1x1 loss. Allowed once per forward pass.
  void backward(const DiffMatrix& loss) {
    if (loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
    if (backward_done_) throw ContractError("backward called twice on the same forward pass");
    const Matrix& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ContractError("backward needs a scalar loss, got " + detail::shape_string(lv));
    }
    for (auto& node : nodes_) node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
    backward_done_ = true;
    nodes_[loss.id()].grad(0, 0) = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (!node.needs_grad || !node.rule) continue;
      if (node.grad.isZero(0.0)) continue;
      node.rule(node.grad);
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardRule rule;
    bool needs_grad = false;
  };

  DiffMatrix leaf(Matrix value, bool needs_grad, const char* what) {
    detail::require_finite(value, what);
    nodes_.push_back(Node{std::move(value), Matrix(), {}, needs_grad});
    return DiffMatrix(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

inline Eigen::Index DiffMatrix::rows() const { return value().rows(); }
inline Eigen::Index DiffMatrix::cols() const { return value().cols(); }
inline const Matrix& DiffMatrix::value() const {
  if (!tape_) throw ContractError("use of an unbound DiffMatrix");
  return tape_->value(*this);
}
inline const Matrix& DiffMatrix::grad() const { return tape_->grad(*this); }
inline double DiffMatrix::item() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ContractError("item() on a " + detail::shape_string(v) + " matrix");
  return v(0, 0);
}

namespace detail {

inline void require_same_shape(const DiffMatrix& a, const DiffMatrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError(std::string(op) + ": shape mismatch " + shape_string(a.value()) + " vs " +
                        shape_string(b.value()));
  }
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

inline DiffMatrix matmul(const DiffMatrix& a, const DiffMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ContractError("matmul: shape mismatch " + detail::shape_string(a.value()) + " * " +
                        detail::shape_string(b.value()));
  }
  Tape& tape = *a.tape();
  return tape.record(a.value() * b.value(), {a, b},
                     [&tape, a, b](const Matrix& g) {
                       tape.accumulate(a, g * b.value().transpose());
                       tape.accumulate(b, a.value().transpose() * g);
                     },
                     "matmul");
}

inline DiffMatrix transpose(const DiffMatrix& a) {
  Tape& tape = *a.tape();
  return tape.record(a.value().transpose(), {a},
                     [&tape, a](const Matrix& g) { tape.accumulate(a, g.transpose()); }, "transpose");
}

inline DiffMatrix add(const DiffMatrix& a, const DiffMatrix& b) {
  detail::require_same_shape(a, b, "add");
  Tape& tape = *a.tape();
  return tape.record(a.value() + b.value(), {a, b},
                     [&tape, a, b](const Matrix& g) {
                       tape.accumulate(a, g);
                       tape.accumulate(b, g);
                     },
                     "add");
}

inline DiffMatrix subtract(const DiffMatrix& a, const DiffMatrix& b) {
  detail::require_same_shape(a, b, "subtract");
  Tape& tape = *a.tape();
  return tape.record(a.value() - b.value(), {a, b},
                     [&tape, a, b](const Matrix& g) {
                       tape.accumulate(a, g);
                       tape.accumulate(b, -g);
                     },
                     "subtract");
}

inline DiffMatrix scale(const DiffMatrix& a, double s) {
  Tape& tape = *a.tape();
  return tape.record(s * a.value(), {a}, [&tape, a, s](const Matrix& g) { tape.accumulate(a, s * g); },
                     "scale");
}

/// Elementwise (Hadamard) product.
inline DiffMatrix hadamard(const DiffMatrix& a, const DiffMatrix& b) {
  detail::require_same_shape(a, b, "hadamard");
  Tape& tape = *a.tape();
  return tape.record(a.value().cwiseProduct(b.value()), {a, b},
                     [&tape, a, b](const Matrix& g) {
                       tape.accumulate(a, g.cwiseProduct(b.value()));
                       tape.accumulate(b, g.cwiseProduct(a.value()));
                     },
                     "hadamard");
}

inline DiffMatrix sigmoid(const DiffMatrix& a) {
  Tape& tape = *a.tape();
  Matrix out = a.value().unaryExpr([](double x) { return detail::stable_sigmoid(x); });
  Matrix slope = out.cwiseProduct((1.0 - out.array()).matrix());
  return tape.record(std::move(out), {a},
                     [&tape, a, slope = std::move(slope)](const Matrix& g) {
                       tape.accumulate(a, g.cwiseProduct(slope));
                     },
                     "sigmoid");
}

inline DiffMatrix relu(const DiffMatrix& a) {
  Tape& tape = *a.tape();
  return tape.record(a.value().cwiseMax(0.0), {a},
                     [&tape, a](const Matrix& g) {
                       tape.accumulate(a, (a.value().array() > 0.0).select(g, 0.0).matrix());
                     },
                     "relu");
}

inline DiffMatrix reduce_sum(const DiffMatrix& a) {
  Tape& tape = *a.tape();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const auto r = a.rows();
  const auto c = a.cols();
  return tape.record(std::move(out), {a},
                     [&tape, a, r, c](const Matrix& g) { tape.accumulate(a, Matrix::Constant(r, c, g(0, 0))); },
                     "reduce_sum");
}

/// Pivot magnitude below which a matrix is treated as singular.
inline constexpr double kSingularPivot = 1e-12;

/// Inverse of a square matrix; d(X^-1) = -X^-1 dX X^-1.
inline DiffMatrix inverse(const DiffMatrix& a, double max_condition = 1e14) {
  const Matrix& x = a.value();
  if (x.rows() != x.cols()) throw ContractError("inverse of a non-square " + detail::shape_string(x) + " matrix");
  Eigen::PartialPivLU<Matrix> lu(x);
  const Matrix& packed = lu.matrixLU();
  for (Eigen::Index i = 0; i < packed.rows(); ++i) {
    if (std::abs(packed(i, i)) < kSingularPivot) throw SingularityError("matrix inverse: pivot below 1e-12");
  }
  if (lu.rcond() * max_condition < 1.0) throw SingularityError("matrix inverse: condition estimate too large");
  Matrix inv = lu.inverse();
  Tape& tape = *a.tape();
  return tape.record(inv, {a},
                     [&tape, a, inv](const Matrix& g) {
                       tape.accumulate(a, -inv.transpose() * g * inv.transpose());
                     },
                     "inverse");
}

/// Per-row min-max normalization (x - min) / (max - min).
///
/// Rows with max == min become uniform 1/K rows with zero gradient. The
/// argmin/argmax positions (lowest index on ties) are held constant in the
/// backward pass.
inline DiffMatrix row_minmax_normalize(const DiffMatrix& a) {
  const Matrix& x = a.value();
  const auto n = x.rows();
  const auto k = x.cols();
  if (k == 0) throw ContractError("row_minmax_normalize: zero columns");
  Matrix out(n, k);
  std::vector<Eigen::Index> arg_min(n), arg_max(n);
  std::vector<double> range(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i).minCoeff(&arg_min[i]);
    x.row(i).maxCoeff(&arg_max[i]);
    const double lo = x(i, arg_min[i]);
    range[i] = x(i, arg_max[i]) - lo;
    if (range[i] > 0.0) {
      out.row(i) = (x.row(i).array() - lo) / range[i];
    } else {
      out.row(i).setConstant(1.0 / static_cast<double>(k));
    }
  }
  Tape& tape = *a.tape();
  Matrix y = out;
  return tape.record(std::move(out), {a},
                     [&tape, a, y = std::move(y), arg_min = std::move(arg_min), arg_max = std::move(arg_max),
                      range = std::move(range)](const Matrix& g) {
                       Matrix gx = Matrix::Zero(y.rows(), y.cols());
                       for (Eigen::Index i = 0; i < y.rows(); ++i) {
                         if (!(range[i] > 0.0)) continue;
                         // y_j = (x_j - x_lo) / (x_hi - x_lo)
                         const double inv = 1.0 / range[i];
                         double to_lo = 0.0;
                         double to_hi = 0.0;
                         for (Eigen::Index j = 0; j < y.cols(); ++j) {
                           gx(i, j) += g(i, j) * inv;
                           to_lo += g(i, j) * (y(i, j) - 1.0) * inv;
                           to_hi -= g(i, j) * y(i, j) * inv;
                         }
                         gx(i, arg_min[i]) += to_lo;
                         gx(i, arg_max[i]) += to_hi;
                       }
                       tape.accumulate(a, gx);
                     },
                     "row_minmax_normalize");
}

/// Divides each row by its sum. Rows must have a positive sum.
inline DiffMatrix row_sum_normalize(const DiffMatrix& a) {
  const Matrix& x = a.value();
  const Vector sums = x.rowwise().sum();
  if ((sums.array() <= 0.0).any()) throw ContractError("row_sum_normalize: non-positive row sum");
  Matrix out = sums.cwiseInverse().asDiagonal() * x;
  Tape& tape = *a.tape();
  Matrix y = out;
  return tape.record(std::move(out), {a},
                     [&tape, a, y = std::move(y), sums](const Matrix& g) {
                       // dy_ij/dx_il = (delta_jl - y_ij) / s_i
                       const Vector gy_dot_y = g.cwiseProduct(y).rowwise().sum();
                       Matrix gx = g.colwise() - gy_dot_y;
                       gx = sums.cwiseInverse().asDiagonal() * gx;
                       tape.accumulate(a, gx);
                     },
                     "row_sum_normalize");
}

/// Mean of squared differences over all entries.
inline DiffMatrix mse_loss(const DiffMatrix& a, const DiffMatrix& b) {
  detail::require_same_shape(a, b, "mse_loss");
  const double count = static_cast<double>(a.value().size());
  Matrix diff = a.value() - b.value();
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / count;
  Tape& tape = *a.tape();
  return tape.record(std::move(out), {a, b},
                     [&tape, a, b, diff = std::move(diff), count](const Matrix& g) {
                       const Matrix ga = (2.0 * g(0, 0) / count) * diff;
                       tape.accumulate(a, ga);
                       tape.accumulate(b, -ga);
                     },
                     "mse_loss");
}

/// Probability clamp used by the cross-entropy loss.
inline constexpr double kProbabilityEpsilon = 1e-15;

/// Mean binary cross-entropy over all entries of `pred` against a constant
/// 0/1 `target`, with positive entries weighted by `pos_weight`.
inline DiffMatrix weighted_bce_loss(const DiffMatrix& pred, const Matrix& target, double pos_weight) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ContractError("weighted_bce_loss: shape mismatch");
  }
  const Matrix& p = pred.value();
  const double count = static_cast<double>(p.size());
  double total = 0.0;
  Matrix dp(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double y = target(i, j);
      const double raw = p(i, j);
      const double q = std::clamp(raw, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
      const bool clamped = q != raw;
      total -= pos_weight * y * std::log(q) + (1.0 - y) * std::log1p(-q);
      dp(i, j) = clamped ? 0.0 : (-pos_weight * y / q + (1.0 - y) / (1.0 - q)) / count;
    }
  }
  Matrix out(1, 1);
  out(0, 0) = total / count;
  Tape& tape = *pred.tape();
  return tape.record(std::move(out), {pred},
                     [&tape, pred, dp = std::move(dp)](const Matrix& g) { tape.accumulate(pred, g(0, 0) * dp); },
                     "weighted_bce_loss");
}

/// <a, c> for a constant matrix c; the gradient with respect to a is c.
inline DiffMatrix frobenius_dot(const DiffMatrix& a, const Matrix& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) throw ContractError("frobenius_dot: shape mismatch");
  Matrix out(1, 1);
  out(0, 0) = a.value().cwiseProduct(c).sum();
  Tape& tape = *a.tape();
  return tape.record(std::move(out), {a}, [&tape, a, c](const Matrix& g) { tape.accumulate(a, g(0, 0) * c); },
                     "frobenius_dot");
}

/// Regularized right pseudo-inverse C^T (C C^T + lambda I)^-1 of a K x d matrix.
inline DiffMatrix regularized_pinv(const DiffMatrix& c, double lambda) {
  if (c.rows() > c.cols()) {
    throw RankError("pseudo-inverse needs embedding dimension (" + std::to_string(c.cols()) +
                    ") >= number of clusters (" + std::to_string(c.rows()) + ")");
  }
  if (lambda < 0.0) throw ContractError("regularized_pinv: negative damping");
  Tape& tape = *c.tape();
  const DiffMatrix ct = transpose(c);
  DiffMatrix gram = matmul(c, ct);
  if (lambda > 0.0) gram = add(gram, tape.constant(lambda * Matrix::Identity(c.rows(), c.rows())));
  return matmul(ct, inverse(gram));
}

// ---------------------------------------------------------------------------
// Parameters and optimization
// ---------------------------------------------------------------------------

/// Glorot/Xavier uniform initialization in +-sqrt(6 / (rows + cols)).
inline Matrix glorot_init(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  if (rows <= 0 || cols <= 0) throw ContractError("glorot_init: dimensions must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam moment estimates for a fixed list of parameters.
class OptimizerState {
 public:
  explicit OptimizerState(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const noexcept { return config_; }
  std::int64_t step_count() const noexcept { return steps_; }

  /// One bias-corrected Adam update of every parameter from its gradient.
  void step(std::vector<Matrix*> params, const std::vector<Matrix>& grads) {
    if (params.size() != grads.size()) throw ContractError("adam_step: parameter/gradient count mismatch");
    if (first_.empty()) {
      for (const Matrix* p : params) {
        first_.push_back(Matrix::Zero(p->rows(), p->cols()));
        second_.push_back(Matrix::Zero(p->rows(), p->cols()));
      }
    }
    if (first_.size() != params.size()) throw ContractError("adam_step: parameter list changed between steps");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i]->rows() != grads[i].rows() || params[i]->cols() != grads[i].cols() ||
          first_[i].rows() != grads[i].rows() || first_[i].cols() != grads[i].cols()) {
        throw ContractError("adam_step: shape mismatch for parameter " + std::to_string(i));
      }
      if (!grads[i].allFinite()) {
        std::ostringstream msg;
        msg << "adam_step: non-finite gradient for parameter " << i << " at step " << steps_ + 1
            << " (max |g| over finite entries: "
            << grads[i].unaryExpr([](double v) { return std::isfinite(v) ? std::abs(v) : 0.0; }).maxCoeff()
            << ")";
        throw NumericError(msg.str());
      }
    }
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double correction1 = 1.0 - std::pow(config_.beta1, t);
    const double correction2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      first_[i] = config_.beta1 * first_[i] + (1.0 - config_.beta1) * grads[i];
      second_[i] = config_.beta2 * second_[i] + (1.0 - config_.beta2) * grads[i].cwiseAbs2();
      const auto m_hat = first_[i].array() / correction1;
      const auto v_hat = second_[i].array() / correction2;
      params[i]->array() -= config_.learning_rate * m_hat / (v_hat.sqrt() + config_.epsilon);
    }
  }

 private:
  AdamConfig config_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  std::int64_t steps_ = 0;
};

}  // namespace toporeg
