#include "tcanet/autodiff.hpp"

#include <cmath>
#include <string>

namespace tcanet::ad {
namespace {

void require_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()) + ")");
  }
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw ArgumentError("operation on an unbound Var");
  return *a.tape();
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(*this); }

double Var::scalar() const {
  const auto& v = value();
  if (v.size() != 1) throw ArgumentError("Var::scalar on a non 1x1 node");
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), false, nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::parameter(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), record_, nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  bool needs = false;
  if (record_) {
    for (const Var& in : inputs) needs = needs || requires_grad(in);
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs, needs ? std::move(backward) : nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Matrix value, const std::vector<Var>& inputs, Backward backward) {
  bool needs = false;
  if (record_) {
    for (const Var& in : inputs) needs = needs || requires_grad(in);
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs, needs ? std::move(backward) : nullptr});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Matrix Tape::grad(Var v) const {
  const auto& node = nodes_[static_cast<std::size_t>(v.id())];
  if (node.grad.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

void Tape::backward(Var root) {
  if (!record_) throw ArgumentError("backward on a tape that does not record gradients");
  if (value(root).size() != 1) throw ArgumentError("backward root must be 1x1");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  auto& r = nodes_[static_cast<std::size_t>(root.id())];
  if (!r.requires_grad) return;
  r.grad = Matrix::Ones(1, 1);
  for (int i = root.id(); i >= 0; --i) {
    auto& node = nodes_[static_cast<std::size_t>(i)];
    if (node.backward && node.grad.size() != 0) node.backward(node.grad, *this);
  }
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw ArgumentError("matmul: inner dimensions differ");
  Matrix out = a.value() * b.value();
  return tape_of(a).record(std::move(out), {a, b}, [a, b](const Matrix& g, Tape& t) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  return tape_of(a).record(a.value() + b.value(), {a, b}, [a, b](const Matrix& g, Tape& t) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  return tape_of(a).record(a.value() - b.value(), {a, b}, [a, b](const Matrix& g, Tape& t) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return tape_of(a).record(std::move(out), {a, b}, [a, b](const Matrix& g, Tape& t) {
    t.accumulate(a, g.cwiseProduct(b.value()));
    t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var div(Var a, Var b) {
  require_same_shape(a, b, "div");
  Matrix out = a.value().cwiseQuotient(b.value());
  return tape_of(a).record(std::move(out), {a, b}, [a, b](const Matrix& g, Tape& t) {
    t.accumulate(a, g.cwiseQuotient(b.value()));
    t.accumulate(b, -g.cwiseProduct(a.value()).cwiseQuotient(b.value().cwiseAbs2()));
  });
}

Var scale(Var a, double k) {
  return tape_of(a).record(a.value() * k, {a}, [a, k](const Matrix& g, Tape& t) { t.accumulate(a, g * k); });
}

Var add_scalar(Var a, double k) {
  Matrix out = a.value().array() + k;
  return tape_of(a).record(std::move(out), {a}, [a](const Matrix& g, Tape& t) { t.accumulate(a, g); });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ArgumentError("add_row: bias must be 1 x cols");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return tape_of(a).record(std::move(out), {a, row}, [a, row](const Matrix& g, Tape& t) {
    t.accumulate(a, g);
    if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var relu(Var a) {
  Matrix out = a.value().cwiseMax(0.0);
  return tape_of(a).record(std::move(out), {a}, [a](const Matrix& g, Tape& t) {
    t.accumulate(a, (a.value().array() > 0.0).select(g, 0.0));
  });
}

Var sigmoid(Var a) {
  Matrix out = a.value().unaryExpr([](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  Var result;
  result = tape_of(a).record(out, {a}, [a, out](const Matrix& g, Tape& t) {
    t.accumulate(a, g.cwiseProduct(out.cwiseProduct((1.0 - out.array()).matrix())));
  });
  return result;
}

Var exp(Var a) {
  Matrix out = a.value().array().exp();
  return tape_of(a).record(out, {a}, [a, out](const Matrix& g, Tape& t) { t.accumulate(a, g.cwiseProduct(out)); });
}

Var log(Var a) {
  Matrix out = a.value().array().log();
  return tape_of(a).record(std::move(out), {a},
                           [a](const Matrix& g, Tape& t) { t.accumulate(a, g.cwiseQuotient(a.value())); });
}

Var smooth_l1(Var a) {
  Matrix out = a.value().unaryExpr([](double x) {
    const double ax = std::abs(x);
    return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
  });
  return tape_of(a).record(std::move(out), {a}, [a](const Matrix& g, Tape& t) {
    Matrix d = a.value().unaryExpr([](double x) { return std::abs(x) < 1.0 ? x : (x > 0.0 ? 1.0 : -1.0); });
    t.accumulate(a, g.cwiseProduct(d));
  });
}

Var maximum(Var a, Var b) {
  require_same_shape(a, b, "maximum");
  Matrix out = a.value().cwiseMax(b.value());
  return tape_of(a).record(std::move(out), {a, b}, [a, b](const Matrix& g, Tape& t) {
    const auto pick_a = (a.value().array() >= b.value().array());
    t.accumulate(a, pick_a.select(g, 0.0));
    t.accumulate(b, pick_a.select(0.0, g));
  });
}

Var minimum(Var a, Var b) {
  require_same_shape(a, b, "minimum");
  Matrix out = a.value().cwiseMin(b.value());
  return tape_of(a).record(std::move(out), {a, b}, [a, b](const Matrix& g, Tape& t) {
    const auto pick_a = (a.value().array() <= b.value().array());
    t.accumulate(a, pick_a.select(g, 0.0));
    t.accumulate(b, pick_a.select(0.0, g));
  });
}

Var clamp(Var a, double lo, double hi) {
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return tape_of(a).record(std::move(out), {a}, [a, lo, hi](const Matrix& g, Tape& t) {
    const auto inside = (a.value().array() >= lo) && (a.value().array() <= hi);
    t.accumulate(a, inside.select(g, 0.0));
  });
}

Var sum(Var a) {
  return tape_of(a).record(Matrix::Constant(1, 1, a.value().sum()), {a}, [a](const Matrix& g, Tape& t) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean_rows(Var a) {
  const auto n = static_cast<double>(a.rows());
  Matrix out = a.value().colwise().sum() / n;
  return tape_of(a).record(std::move(out), {a}, [a, n](const Matrix& g, Tape& t) {
    t.accumulate(a, g.replicate(a.rows(), 1) / n);
  });
}

Var element(Var a, Eigen::Index row, Eigen::Index col) {
  if (row < 0 || col < 0 || row >= a.rows() || col >= a.cols()) throw ArgumentError("element: out of range");
  return tape_of(a).record(Matrix::Constant(1, 1, a.value()(row, col)), {a},
                           [a, row, col](const Matrix& g, Tape& t) {
                             Matrix d = Matrix::Zero(a.rows(), a.cols());
                             d(row, col) = g(0, 0);
                             t.accumulate(a, d);
                           });
}

Var vcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ArgumentError("vcat: no inputs");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ArgumentError("vcat: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return tape_of(parts.front()).record(std::move(out), parts, [parts](const Matrix& g, Tape& t) {
    Eigen::Index offset = 0;
    for (const Var& p : parts) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleRows(offset, p.rows()));
      offset += p.rows();
    }
  });
}

Var hcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ArgumentError("hcat: no inputs");
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts.front().rows();
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ArgumentError("hcat: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return tape_of(parts.front()).record(std::move(out), parts, [parts](const Matrix& g, Tape& t) {
    Eigen::Index offset = 0;
    for (const Var& p : parts) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleCols(offset, p.cols()));
      offset += p.cols();
    }
  });
}

Var zero_rows_from(Var a, Eigen::Index from) {
  if (from >= a.rows()) {
    return tape_of(a).record(a.value(), {a}, [a](const Matrix& g, Tape& t) { t.accumulate(a, g); });
  }
  Matrix out = a.value();
  out.bottomRows(a.rows() - from).setZero();
  return tape_of(a).record(std::move(out), {a}, [a, from](const Matrix& g, Tape& t) {
    Matrix d = g;
    d.bottomRows(a.rows() - from).setZero();
    t.accumulate(a, d);
  });
}

Var layer_norm(Var x, Var gain, Var shift, double eps) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index cols = x.cols();
  if (gain.rows() != 1 || gain.cols() != cols || shift.rows() != 1 || shift.cols() != cols) {
    throw ArgumentError("layer_norm: gain/shift must be 1 x C");
  }
  Matrix normalized(rows, cols);
  Vector inv_std(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = x.value().row(r).mean();
    const double var = (x.value().row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    normalized.row(r) = (x.value().row(r).array() - mean) * inv_std(r);
  }
  Matrix out = (normalized.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += shift.value().row(0);
  return tape_of(x).record(std::move(out), {x, gain, shift},
                           [x, gain, shift, normalized, inv_std](const Matrix& g, Tape& t) {
                             if (t.requires_grad(gain)) {
                               t.accumulate(gain, g.cwiseProduct(normalized).colwise().sum());
                             }
                             if (t.requires_grad(shift)) t.accumulate(shift, g.colwise().sum());
                             if (!t.requires_grad(x)) return;
                             Matrix dnorm = (g.array().rowwise() * gain.value().row(0).array()).matrix();
                             Matrix dx(dnorm.rows(), dnorm.cols());
                             for (Eigen::Index r = 0; r < dnorm.rows(); ++r) {
                               const double m1 = dnorm.row(r).mean();
                               const double m2 = dnorm.row(r).cwiseProduct(normalized.row(r)).mean();
                               dx.row(r) = inv_std(r) * (dnorm.row(r).array() - m1 -
                                                         normalized.row(r).array() * m2);
                             }
                             t.accumulate(x, dx);
                           });
}

}  // namespace tcanet::ad
