#pragma once

#include "tcanet/common.hpp"

#include <functional>
#include <initializer_list>
#include <vector>

// Reverse-mode differentiation over dense matrices. Every operation appends a
// node to a Tape; Tape::backward walks the nodes in reverse creation order.
namespace tcanet::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  double scalar() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(const Matrix& grad_out, Tape& tape)>;

  /// With `record_gradients = false` the tape only evaluates values.
  explicit Tape(bool record_gradients = true) : record_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant(double value);
  Var parameter(Matrix value);

  /// Appends a computed node. `backward` runs only when some input needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Matrix value, const std::vector<Var>& inputs, Backward backward);

  const Matrix& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id())].value; }
  bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id())].requires_grad; }
  bool recording() const { return record_; }

  /// Gradient of the last backward root w.r.t. `v`; zeros when unreached.
  Matrix grad(Var v) const;

  template <class Derived>
  void accumulate(Var target, const Eigen::MatrixBase<Derived>& g) {
    auto& node = nodes_[static_cast<std::size_t>(target.id())];
    if (!node.requires_grad) return;
    if (node.grad.size() == 0) {
      node.grad = g;
    } else {
      node.grad += g;
    }
  }

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and propagates.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
  bool record_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);   // elementwise
Var div(Var a, Var b);   // elementwise
Var scale(Var a, double k);
Var add_scalar(Var a, double k);
/// Adds a 1 x C row to every row of `a`.
Var add_row(Var a, Var row);
Var relu(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var smooth_l1(Var a);
Var maximum(Var a, Var b);
Var minimum(Var a, Var b);
Var clamp(Var a, double lo, double hi);
Var sum(Var a);
Var mean_rows(Var a);
Var element(Var a, Eigen::Index row, Eigen::Index col);
Var vcat(const std::vector<Var>& parts);
Var hcat(const std::vector<Var>& parts);
/// Zeroes rows [from, rows).
Var zero_rows_from(Var a, Eigen::Index from);
/// Row-wise layer normalization with per-channel gain and shift (1 x C each).
Var layer_norm(Var x, Var gain, Var shift, double eps = 1e-5);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator*(Var a, double k) { return scale(a, k); }
inline Var operator*(double k, Var a) { return scale(a, k); }
inline Var operator+(Var a, double k) { return add_scalar(a, k); }
inline Var operator-(Var a, double k) { return add_scalar(a, -k); }
inline Var operator-(Var a) { return scale(a, -1.0); }

}  // namespace tcanet::ad
