#include <cmath>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "intgrad/engine.hpp"
#include "intgrad/fixtures.hpp"
#include "support.hpp"

namespace intgrad {
namespace {

using testing::Rng;

TEST(Forward, AppendixNetworksAtThreeOne) {
  const auto x = Tensor::vector({3.0, 1.0});
  EXPECT_EQ(forward(build_fixture(fixture::AppendixF{}), x).value, 1.0);
  EXPECT_EQ(forward(build_fixture(fixture::AppendixG{}), x).value, 1.0);
}

TEST(Forward, OneReluIsFlatAboveOne) {
  const auto g = build_fixture(fixture::OneRelu{});
  EXPECT_EQ(forward(g, Tensor::vector({2.0})).value, 1.0);
  EXPECT_EQ(forward(g, Tensor::vector({0.0})).value, 0.0);
  EXPECT_EQ(forward(g, Tensor::vector({0.25})).value, 0.25);
}

TEST(Forward, TraceCoversEveryNode) {
  const auto g = build_fixture(fixture::AppendixF{});
  const auto r = forward(g, Tensor::vector({3.0, 1.0}));
  ASSERT_EQ(r.trace.values.size(), g.node_count());
  for (std::size_t p = 0; p < g.node_count(); ++p) EXPECT_EQ(r.trace.values[p].size(), g.width(p));
  EXPECT_EQ(r.trace.output(g), r.value);
}

TEST(Forward, RejectsArityMismatchAndNonFiniteInput) {
  const auto g = build_fixture(fixture::Min2{});
  EXPECT_THROW(evaluate(g, std::vector<double>{1.0}), ValidationError);
  EXPECT_THROW(evaluate(g, std::vector<double>{1.0, NAN}), NumericError);
  EXPECT_THROW(evaluate(g, std::vector<double>{INFINITY, 1.0}), NumericError);
}

TEST(Forward, SigmoidAndTanhStayFiniteAtExtremes) {
  const ModelGraph s({{"x", op::Input{0, 1}, {}}, {"out", op::Sigmoid{}, {"x"}}}, "out");
  const ModelGraph t({{"x", op::Input{0, 1}, {}}, {"out", op::Tanh{}, {"x"}}}, "out");
  for (double v : {-700.0, -50.0, 0.0, 50.0, 700.0}) {
    const double sv = evaluate(s, std::vector<double>{v});
    EXPECT_TRUE(std::isfinite(sv));
    EXPECT_GE(sv, 0.0);
    EXPECT_LE(sv, 1.0);
    EXPECT_TRUE(std::isfinite(evaluate(t, std::vector<double>{v})));
    EXPECT_TRUE(std::isfinite(gradient(s, Tensor::vector({v}))[0]));
  }
  EXPECT_EQ(evaluate(s, std::vector<double>{0.0}), 0.5);
}

TEST(Gradient, OneReluIsZeroInFlatRegion) {
  const auto g = build_fixture(fixture::OneRelu{});
  EXPECT_EQ(gradient(g, Tensor::vector({2.0}))[0], 0.0);
  EXPECT_EQ(gradient(g, Tensor::vector({0.5}))[0], 1.0);
}

TEST(Gradient, ReluDerivativeAtZeroIsZero) {
  const auto g = build_fixture(fixture::OneRelu{});
  EXPECT_EQ(gradient(g, Tensor::vector({1.0}))[0], 0.0);
}

TEST(Gradient, ModifiedRulesDropSecondFeatureOnAppendixF) {
  const auto g = build_fixture(fixture::AppendixF{});
  const auto x = Tensor::vector({3.0, 1.0});
  EXPECT_EQ(gradient(g, x, BackpropRule::Guided)[1], 0.0);
  EXPECT_EQ(gradient(g, x, BackpropRule::Deconvnet)[1], 0.0);
  EXPECT_EQ(gradient(g, x, BackpropRule::Standard)[1], -1.0);
}

TEST(Gradient, DeconvnetIgnoresForwardActivation) {
  // relu of a negative pre-activation: standard and guided block, deconvnet passes.
  const ModelGraph g({{"x", op::Input{0, 1}, {}}, {"r", op::Relu{}, {"x"}}, {"out", op::Scale{2.0}, {"r"}}}, "out");
  const auto x = Tensor::vector({-1.0});
  EXPECT_EQ(gradient(g, x, BackpropRule::Standard)[0], 0.0);
  EXPECT_EQ(gradient(g, x, BackpropRule::Guided)[0], 0.0);
  EXPECT_EQ(gradient(g, x, BackpropRule::Deconvnet)[0], 2.0);
}

TEST(Gradient, TiesSplitEvenly) {
  const auto g = build_fixture(fixture::Min2{});
  const auto grad = gradient(g, Tensor::vector({2.0, 2.0}));
  EXPECT_EQ(grad[0], 0.5);
  EXPECT_EQ(grad[1], 0.5);
  const auto off = gradient(g, Tensor::vector({1.0, 3.0}));
  EXPECT_EQ(off[0], 1.0);
  EXPECT_EQ(off[1], 0.0);
}

TEST(Gradient, BroadcastOperandAccumulates) {
  // sum(x * c) with a length-1 constant c = 3.
  const ModelGraph g({{"x", op::Input{0, 3}, {}},
                      {"c", op::Constant{{3.0}}, {}},
                      {"m", op::Multiply{}, {"x", "c"}},
                      {"out", op::SumReduce{}, {"m"}}},
                     "out");
  const auto grad = gradient(g, Tensor::vector({1.0, 2.0, 4.0}));
  EXPECT_EQ(grad.values(), (std::vector<double>{3.0, 3.0, 3.0}));
  EXPECT_EQ(evaluate(g, std::vector<double>{1.0, 2.0, 4.0}), 21.0);
}

TEST(Gradient, SymmetryCexRegions) {
  const auto g = build_fixture(fixture::SymmetryCex{0.0, 1.0, 0, 1, 2});
  EXPECT_EQ(evaluate(g, std::vector<double>{0.5, 0.25}), 0.125);
  EXPECT_EQ(evaluate(g, std::vector<double>{-1.0, 0.5}), 0.0);
  EXPECT_EQ(evaluate(g, std::vector<double>{2.0, 3.0}), 1.0);
  EXPECT_EQ(gradient(g, Tensor::vector({0.5, 0.25})).values(), (std::vector<double>{0.25, 0.5}));
  // Boundaries belong to the flat side.
  EXPECT_EQ(gradient(g, Tensor::vector({1.0, 0.5})).values(), (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(gradient(g, Tensor::vector({0.0, 0.5})).values(), (std::vector<double>{0.0, 0.0}));
}

TEST(CheckGradient, Examples) {
  EXPECT_LE(check_gradient(build_fixture(fixture::LogisticSym{2}), Tensor::vector({1.0, 1.0}), 1e-6), 1e-6);
  EXPECT_LE(check_gradient(build_fixture(fixture::Linear{{2.0, -3.0, 0.5}, 1.0}), Tensor::vector({0.3, 7.0, -2.0}),
                           1e-6),
            1e-9);
  EXPECT_LE(check_gradient(build_fixture(fixture::AppendixF{}), Tensor::vector({3.0, 1.0}), 1e-6), 1e-6);
}

TEST(CheckGradient, RejectsNonPositiveEpsilon) {
  const auto g = build_fixture(fixture::Min2{});
  EXPECT_THROW(check_gradient(g, Tensor::vector({1.0, 2.0}), 0.0), ValidationError);
  EXPECT_THROW(check_gradient(g, Tensor::vector({1.0, 2.0}), -1e-6), ValidationError);
}

TEST(CheckGradient, KinksReportLargeErrorWithoutThrowing) {
  const auto g = build_fixture(fixture::OneRelu{});
  EXPECT_GT(check_gradient(g, Tensor::vector({1.0}), 1e-6), 0.1);
}

TEST(EngineProperty, PurityBitIdenticalRepeats) {
  Rng rng(7);
  for (int k = 0; k < 20; ++k) {
    const auto g = testing::random_smooth_model(rng, 4);
    const auto x = rng.point(4, -2.0, 2.0);
    const auto a = forward(g, x);
    const auto b = forward(g, x);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.trace.values, b.trace.values);
    EXPECT_EQ(gradient(g, x), gradient(g, x));
  }
}

TEST(EngineProperty, ConcurrentCallsAgree) {
  Rng rng(11);
  const auto g = testing::random_piecewise_model(rng, 5);
  const auto x = rng.point(5, -2.0, 2.0);
  const auto expected = gradient(g, x);
  std::vector<Tensor> got(8);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < got.size(); ++t) pool.emplace_back([&, t] { got[t] = gradient(g, x); });
  }
  for (const auto& r : got) EXPECT_EQ(r, expected);
}

TEST(EngineProperty, PiecewiseLinearMatchesFiniteDifferencesAwayFromKinks) {
  Rng rng(3);
  int checked = 0;
  for (int k = 0; k < 200 && checked < 100; ++k) {
    const auto g = testing::random_piecewise_model(rng, 1 + rng.index(6));
    const auto x = rng.point(g.input_arity(), -3.0, 3.0);
    if (testing::kink_distance(g, x) < 1e-4) continue;
    ++checked;
    EXPECT_LE(check_gradient(g, x, 1e-7), 1e-6);
  }
  EXPECT_EQ(checked, 100);
}

TEST(EngineProperty, SmoothModelsMatchFiniteDifferences) {
  Rng rng(5);
  for (int k = 0; k < 100; ++k) {
    const auto g = testing::random_smooth_model(rng, 1 + rng.index(6));
    EXPECT_LE(check_gradient(g, rng.point(g.input_arity(), -2.0, 2.0), 1e-6), 1e-6);
  }
}

TEST(EngineProperty, GuidedEqualsStandardWhenAllActivationsPositive) {
  // Guided is standard with negative signals masked, so |guided| <= |deconvnet|
  // and guided == standard once every pre-activation and signal is positive.
  Rng rng(13);
  int checked = 0;
  for (int k = 0; k < 500 && checked < 50; ++k) {
    const std::size_t n = 3;
    op::Dense first{3, n, rng.vec(3 * n, 0.1, 1.0), rng.vec(3, 0.1, 0.5)};
    op::Dense second{1, 3, rng.vec(3, 0.1, 1.0), {0.0}};
    const ModelGraph g({{"x", op::Input{0, n}, {}}, {"h", first, {"x"}}, {"r", op::Relu{}, {"h"}},
                        {"out", second, {"r"}}},
                       "out");
    const auto x = rng.point(n, 0.0, 2.0);
    ++checked;
    const auto standard = gradient(g, x, BackpropRule::Standard);
    const auto guided = gradient(g, x, BackpropRule::Guided);
    const auto deconv = gradient(g, x, BackpropRule::Deconvnet);
    EXPECT_EQ(guided, standard);
    for (std::size_t i = 0; i < n; ++i) EXPECT_LE(std::abs(guided[i]), std::abs(deconv[i]));
  }
  EXPECT_EQ(checked, 50);
}

TEST(EngineProperty, LinearGraphGradientIsPointIndependent) {
  Rng rng(17);
  for (int k = 0; k < 20; ++k) {
    const std::size_t n = 1 + rng.index(5);
    const ModelGraph g({{"x", op::Input{0, n}, {}},
                        {"h", testing::random_dense(rng, 3, n), {"x"}},
                        {"s", op::Scale{-1.5}, {"h"}},
                        {"out", op::SumReduce{}, {"s"}}},
                       "out");
    const auto at_a = gradient(g, rng.point(n, -5.0, 5.0));
    const auto at_b = gradient(g, rng.point(n, -5.0, 5.0));
    EXPECT_EQ(at_a, at_b);
  }
}

}  // namespace
}  // namespace intgrad
