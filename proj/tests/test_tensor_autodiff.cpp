#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dnm/autodiff.hpp"
#include "dnm/gradcheck.hpp"
#include "dnm/layers.hpp"
#include "support.hpp"

using namespace dnm;

TEST(Tensor, ConstructionChecksValueCount) {
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  const Tensor t(Shape{2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_DOUBLE_EQ(t[5], 1.5);
  EXPECT_DOUBLE_EQ(Tensor::scalar(3.0).item(), 3.0);
  EXPECT_THROW((void)t.item(), ShapeError);
}

TEST(Tensor, ImageIndexingIsRowMajorBchw) {
  Tensor t = Tensor::image(2, 3, 4, 5);
  t.at(1, 2, 3, 4) = 7.0;
  EXPECT_EQ(t.index(1, 2, 3, 4), t.size() - 1);
  EXPECT_DOUBLE_EQ(t[t.size() - 1], 7.0);
}

TEST(Tensor, FlipSliceStack) {
  const Tensor row(Shape{1, 1, 1, 3}, std::vector<double>{1, 2, 3});
  EXPECT_EQ(flip_horizontal(row).storage(), (std::vector<double>{3, 2, 1}));
  EXPECT_EQ(flip_horizontal(flip_horizontal(row)), row);

  const Tensor two(Shape{1, 2, 1, 2}, std::vector<double>{1, 2, 3, 4});
  EXPECT_EQ(slice_channels(two, 1, 1).storage(), (std::vector<double>{3, 4}));
  EXPECT_THROW(slice_channels(two, 1, 2), ShapeError);

  const std::vector<Tensor> parts{row, row};
  const Tensor stacked = stack_batch(parts);
  EXPECT_EQ(stacked.shape(), (Shape{2, 1, 1, 3}));
  EXPECT_EQ(stacked.storage(), (std::vector<double>{1, 2, 3, 1, 2, 3}));
}

TEST(Autodiff, AddForward) {
  Tape t;
  const Var a = t.leaf(Tensor(Shape{2}, std::vector<double>{1, 2}));
  const Var b = t.leaf(Tensor(Shape{2}, std::vector<double>{3, 4}));
  EXPECT_EQ((a + b).value().storage(), (std::vector<double>{4, 6}));
}

TEST(Autodiff, MeanAllForwardAndBackward) {
  Tape t;
  const Var a = t.leaf(Tensor(Shape{3}, std::vector<double>{2, 4, 6}));
  const Var m = mean_all(a);
  EXPECT_DOUBLE_EQ(m.value().item(), 4.0);
  t.backward(m);
  for (double g : t.grad(a).values()) EXPECT_DOUBLE_EQ(g, 1.0 / 3.0);
}

TEST(Autodiff, ShapeMismatchThrows) {
  Tape t;
  const Var a = t.leaf(Tensor(Shape{2}, 1.0));
  const Var b = t.leaf(Tensor(Shape{3}, 1.0));
  EXPECT_THROW(a + b, ShapeError);
  EXPECT_THROW(a * b, ShapeError);
}

TEST(Autodiff, OperandsFromDifferentTapesRejected) {
  Tape t1, t2;
  const Var a = t1.leaf(Tensor(Shape{1}, 1.0));
  const Var b = t2.leaf(Tensor(Shape{1}, 1.0));
  EXPECT_THROW(a + b, Error);
}

TEST(Autodiff, BackwardRequiresScalarRoot) {
  Tape t;
  const Var a = t.leaf(Tensor(Shape{2}, 1.0));
  EXPECT_THROW(t.backward(a * a), ShapeError);
}

TEST(Autodiff, AbsSubgradientAtZeroIsZero) {
  Tape t;
  const Var a = t.leaf(Tensor(Shape{3}, std::vector<double>{-2, 0, 3}));
  t.backward(sum_all(abs(a)));
  EXPECT_EQ(t.grad(a).storage(), (std::vector<double>{-1, 0, 1}));
}

TEST(Autodiff, ExpClampsLargeArguments) {
  Tape t;
  const Var a = t.leaf(Tensor(Shape{2}, std::vector<double>{1e6, 0.0}));
  const Var e = exp(a);
  EXPECT_TRUE(std::isfinite(e.value()[0]));
  EXPECT_DOUBLE_EQ(e.value()[0], std::exp(kExpClamp));
  t.backward(sum_all(e));
  EXPECT_DOUBLE_EQ(t.grad(a)[0], 0.0);
  EXPECT_DOUBLE_EQ(t.grad(a)[1], 1.0);
}

TEST(Autodiff, UnusedInputGetsExactlyZeroGradient) {
  Tape t;
  const Var a = t.leaf(Tensor(Shape{2}, std::vector<double>{1, 2}));
  const Var b = t.leaf(Tensor(Shape{2}, std::vector<double>{3, 4}));
  t.backward(sum_all(square(a)));
  EXPECT_EQ(t.grad(b).storage(), (std::vector<double>{0, 0}));
  EXPECT_EQ(t.grad(a).storage(), (std::vector<double>{2, 4}));
}

TEST(Autodiff, FanOutAccumulates) {
  Tape t;
  const Var a = t.leaf(Tensor(Shape{1}, 3.0));
  t.backward(sum_all(a * a + a));
  EXPECT_DOUBLE_EQ(t.grad(a)[0], 7.0);
}

TEST(Autodiff, RepeatedBackwardIsIdempotent) {
  Tape t;
  const Var a = t.leaf(Tensor(Shape{2}, std::vector<double>{1, -2}));
  const Var y = sum_all(exp(a) * a);
  t.backward(y);
  const Tensor g1 = t.grad(a);
  t.backward(y);
  EXPECT_EQ(t.grad(a), g1);
}

TEST(Autodiff, ConstantsReceiveNoGradientBuffer) {
  Tape t;
  const Var c = t.constant(Tensor(Shape{2}, 1.0));
  const Var a = t.leaf(Tensor(Shape{2}, 2.0));
  t.backward(sum_all(a * c));
  EXPECT_EQ(t.grad_sink(c.id), nullptr);
  EXPECT_EQ(t.grad(a).storage(), (std::vector<double>{1, 1}));
}

TEST(Autodiff, ForwardIsDeterministic) {
  Rng rng(3);
  const Tensor x = test::random_tensor(rng, {2, 3, 4, 4}, -1, 1);
  auto run = [&] {
    Tape t;
    const Var v = t.leaf(x);
    const Var y = mean_all(exp(v) * abs(v) - square(v));
    t.backward(y);
    return std::make_pair(y.value(), t.grad(v));
  };
  EXPECT_EQ(run(), run());
}

TEST(GradCheck, MeanAllIsExact) {
  Rng rng(1);
  const double err = grad_check([](Tape&, Var x) { return mean_all(x); }, test::random_tensor(rng, {3, 4}), 1e-5);
  EXPECT_LT(err, 1e-10);
}

TEST(GradCheck, SumOfSquares) {
  const Tensor p(Shape{3}, std::vector<double>{1, 2, 3});
  Tape t;
  const Var x = t.leaf(p);
  t.backward(sum_all(square(x)));
  EXPECT_EQ(t.grad(x).storage(), (std::vector<double>{2, 4, 6}));
  EXPECT_LT(grad_check([](Tape&, Var v) { return sum_all(square(v)); }, p, 1e-5), 1e-8);
}

TEST(GradCheck, ExpOnRandomTensor) {
  Rng rng(2);
  const double err =
      grad_check([](Tape&, Var x) { return sum_all(exp(x)); }, test::random_tensor(rng, {2, 3}, -1, 1), 1e-5);
  EXPECT_LT(err, 1e-6);
}

TEST(GradCheck, DetectsAWrongGradient) {
  // An op whose backward is deliberately off by a factor of two.
  auto broken = [](Tape& t, Var x) {
    Tensor y = x.value();
    for (double& v : y.values()) v = v * v;
    const Var out = t.record("broken", {x}, std::move(y), [ix = x.id](Tape& tp, std::size_t self) {
      Tensor* g = tp.grad_sink(ix);
      const Tensor& gy = tp.grad_of(self);
      const Tensor& xv = tp.value(ix);
      for (std::size_t i = 0; i < gy.size(); ++i) (*g)[i] += gy[i] * 4.0 * xv[i];
    });
    return sum_all(out);
  };
  EXPECT_GT(grad_check(broken, Tensor(Shape{2}, std::vector<double>{1.0, 2.0}), 1e-5), 0.1);
}

TEST(GradCheck, RejectsNonPositiveEps) {
  EXPECT_THROW(grad_check([](Tape&, Var x) { return sum_all(x); }, Tensor(Shape{1}, 1.0), 0.0), ConfigError);
}

class SmoothElementwise : public ::testing::TestWithParam<int> {};

TEST_P(SmoothElementwise, MatchesFiniteDifferences) {
  Rng rng(100 + GetParam());
  Tensor x = test::random_tensor(rng, {2, 3}, 0.2, 1.5);
  for (std::size_t i = 0; i < x.size(); i += 2) x[i] = -x[i];
  const Tensor other = test::random_tensor(rng, {2, 3}, 0.5, 1.5);
  const ScalarFn fns[] = {
      [](Tape&, const std::vector<Var>& v) { return sum_all(v[0] + v[1]); },
      [](Tape&, const std::vector<Var>& v) { return sum_all(v[0] * v[1]); },
      [](Tape&, const std::vector<Var>& v) { return sum_all(v[0] / v[1]); },
      [](Tape&, const std::vector<Var>& v) { return sum_all(abs(v[0]) * v[1]); },
      [](Tape&, const std::vector<Var>& v) { return sum_all(exp(v[0]) - v[1]); },
      [](Tape&, const std::vector<Var>& v) { return sum_all(sigmoid(v[0]) * v[1]); },
      [](Tape&, const std::vector<Var>& v) { return sum_all(elu(v[0]) * v[1]); },
      [](Tape&, const std::vector<Var>& v) { return mean_all(scale(-v[0], 3.0) * add_scalar(v[1], 2.0)); },
  };
  EXPECT_LT(grad_check_detailed(fns[GetParam()], {x, other}, 1e-6).max_relative_error, 1e-6);
}

INSTANTIATE_TEST_SUITE_P(Ops, SmoothElementwise, ::testing::Range(0, 8));
