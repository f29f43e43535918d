#include "tcanet/autodiff.hpp"
#include "tcanet/train.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <random>

using namespace tcanet;
using ad::Tape;
using ad::Var;

namespace {

using Graph = std::function<Var(Tape&, const std::vector<Var>&)>;

// Relative error between the tape gradient and central differences.
double check(const Graph& graph, const std::vector<Matrix>& inputs) {
  const train::LossWithGradient fn = [&](const std::vector<Matrix>& x, std::vector<Matrix>* grads) {
    Tape tape(grads != nullptr);
    std::vector<Var> vars;
    for (const auto& m : x) vars.push_back(tape.parameter(m));
    const Var out = graph(tape, vars);
    if (grads != nullptr) {
      tape.backward(out);
      grads->clear();
      for (const auto& v : vars) grads->push_back(tape.grad(v));
    }
    return out.scalar();
  };
  return train::grad_check(fn, inputs, 1e-6).max_rel_error;
}

Matrix rnd(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Generic scalar readout so every output entry gets a distinct weight.
Var readout(Tape& t, Var x, std::uint64_t seed) {
  return ad::sum(ad::mul(x, t.constant(rnd(x.rows(), x.cols(), seed))));
}

}  // namespace

TEST(Autodiff, ArithmeticGradients) {
  const auto a = rnd(3, 4, 1), b = rnd(3, 4, 2);
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, v[0] + v[1], 9); }, {a, b}), 1e-7);
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, v[0] - v[1], 9); }, {a, b}), 1e-7);
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, v[0] * v[1], 9); }, {a, b}), 1e-7);
  const Matrix pos = b.cwiseAbs().array() + 0.5;
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, v[0] / v[1], 9); }, {a, pos}), 1e-7);
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, v[0] * 3.0 + 1.0, 9); }, {a}), 1e-7);
}

TEST(Autodiff, MatmulAndRowBroadcast) {
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, ad::matmul(v[0], v[1]), 4); },
                  {rnd(3, 5, 1), rnd(5, 2, 2)}),
            1e-7);
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, ad::add_row(v[0], v[1]), 4); },
                  {rnd(3, 5, 1), rnd(1, 5, 2)}),
            1e-7);
}

TEST(Autodiff, Nonlinearities) {
  const auto a = rnd(4, 3, 5);
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, ad::sigmoid(v[0]), 2); }, {a}), 1e-7);
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, ad::exp(v[0]), 2); }, {a}), 1e-7);
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, ad::log(v[0]), 2); },
                  {Matrix(a.cwiseAbs().array() + 0.2)}),
            1e-7);
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, ad::relu(v[0]), 2); }, {a}), 1e-7);
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, ad::smooth_l1(v[0] * 2.0), 2); }, {a}), 1e-7);
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, ad::clamp(v[0], -0.5, 0.5), 2); }, {a}), 1e-7);
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, ad::maximum(v[0], v[1]), 2); }, {a, rnd(4, 3, 6)}),
            1e-7);
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, ad::minimum(v[0], v[1]), 2); }, {a, rnd(4, 3, 6)}),
            1e-7);
}

TEST(Autodiff, ShapeOps) {
  const auto a = rnd(4, 3, 7), b = rnd(2, 3, 8), c = rnd(4, 2, 9);
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, ad::vcat({v[0], v[1]}), 3); }, {a, b}), 1e-7);
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, ad::hcat({v[0], v[1]}), 3); }, {a, c}), 1e-7);
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, ad::mean_rows(v[0]), 3); }, {a}), 1e-7);
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, ad::zero_rows_from(v[0], 2), 3); }, {a}), 1e-7);
  EXPECT_LT(check([](Tape&, const auto& v) { return ad::element(v[0], 2, 1) * 3.0; }, {a}), 1e-7);
}

TEST(Autodiff, LayerNorm) {
  EXPECT_LT(check([](Tape& t, const auto& v) { return readout(t, ad::layer_norm(v[0], v[1], v[2]), 5); },
                  {rnd(4, 6, 1), rnd(1, 6, 2), rnd(1, 6, 3)}),
            1e-6);
  Tape tape(false);
  const Matrix x = rnd(3, 8, 4);
  const Matrix y = ad::layer_norm(tape.constant(x), tape.constant(Matrix::Ones(1, 8)), tape.constant(Matrix::Zero(1, 8)))
                       .value();
  for (Eigen::Index r = 0; r < 3; ++r) {
    EXPECT_NEAR(y.row(r).mean(), 0.0, 1e-12);
    EXPECT_NEAR(y.row(r).squaredNorm() / 8.0, 1.0, 1e-4);  // eps = 1e-5 in the denominator
  }
}

TEST(Autodiff, SharedSubexpressionsAccumulate) {
  Tape tape;
  const Var x = tape.parameter(Matrix::Constant(1, 1, 3.0));
  const Var y = x * x + x;  // dy/dx = 2x + 1
  tape.backward(y);
  EXPECT_DOUBLE_EQ(tape.grad(x)(0, 0), 7.0);
}

TEST(Autodiff, ValueOnlyTapeMatchesRecordingTape) {
  Tape a(true), b(false);
  const Matrix m = rnd(3, 3, 11);
  const Var ya = ad::sigmoid(ad::matmul(a.parameter(m), a.constant(m)));
  const Var yb = ad::sigmoid(ad::matmul(b.parameter(m), b.constant(m)));
  EXPECT_EQ(ya.value(), yb.value());
}

TEST(Autodiff, ConstantsGetNoGradient) {
  Tape tape;
  const Var c = tape.constant(Matrix::Ones(2, 2));
  const Var p = tape.parameter(Matrix::Ones(2, 2));
  tape.backward(ad::sum(c * p));
  EXPECT_TRUE(tape.grad(c).isZero(0.0));
  EXPECT_EQ(tape.grad(p), Matrix::Ones(2, 2));
}

TEST(Autodiff, BackwardNeedsScalarRoot) {
  Tape tape;
  const Var p = tape.parameter(Matrix::Ones(2, 2));
  EXPECT_THROW(tape.backward(p), ArgumentError);
}
