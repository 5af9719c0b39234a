#include <algorithm>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "intgrad/audit.hpp"
#include "intgrad/axioms.hpp"
#include "intgrad/fixtures.hpp"
#include "support.hpp"

namespace intgrad {
namespace {

const Tensor kThreeOne = Tensor::vector({3.0, 1.0});
const MethodSpec kIg = method::IntegratedGradients{{1000, RiemannRule::Right}};
const MethodSpec kExactShapley = method::ShapleyShubik{method::ShapleyExact{}};
const MethodSpec kDeepLift = method::DiscreteGradient{method::DiscreteVariant::DeepLiftRescale};
const MethodSpec kGuided = method::ModifiedBackprop{BackpropRule::Guided};

// F(x0, x1, x2) = relu(x0 - x1) + x1: feature 2 is a dummy.
ModelGraph three_input_two_wired() {
  return ModelGraph({{"x", op::Input{0, 3}, {}},
                     {"d", op::Dense{1, 3, {1.0, -1.0, 0.0}, {0.0}}, {"x"}},
                     {"r", op::Relu{}, {"d"}},
                     {"x1", op::Dense{1, 3, {0.0, 1.0, 0.0}, {0.0}}, {"x"}},
                     {"out", op::Add{}, {"r", "x1"}}},
                    "out");
}

// Same function as above, with feature 2 wired in and then cancelled. The
// declared dummy is wired, so it cannot be certified.
ModelGraph three_input_all_wired() {
  return ModelGraph({{"x", op::Input{0, 3}, {}},
                     {"d", op::Dense{1, 3, {1.0, -1.0, 0.0}, {0.0}}, {"x"}},
                     {"r", op::Relu{}, {"d"}},
                     {"x1", op::Dense{1, 3, {0.0, 1.0, 1.0}, {0.0}}, {"x"}},
                     {"x2", op::Dense{1, 3, {0.0, 0.0, 1.0}, {0.0}}, {"x"}},
                     {"a", op::Add{}, {"r", "x1"}},
                     {"out", op::Subtract{}, {"a", "x2"}}},
                    "out");
}

TEST(Completeness, Examples) {
  const auto ig = check_completeness(build_fixture(fixture::AppendixF{}), kIg, kThreeOne, ZerosBaseline{}, 0.02);
  EXPECT_EQ(ig.verdict, Verdict::Pass);

  const auto grad = check_completeness(build_fixture(fixture::OneRelu{}), method::Gradients{}, Tensor::vector({2.0}),
                                       ZerosBaseline{}, 0.02);
  EXPECT_EQ(grad.verdict, Verdict::Fail);
  ASSERT_TRUE(grad.witness);
  EXPECT_EQ(grad.witness->gaps.at(0), 1.0);

  const auto shapley = check_completeness(build_fixture(fixture::Min2{}), kExactShapley, Tensor::vector({1.0, 3.0}),
                                          ZerosBaseline{}, 1e-9);
  EXPECT_EQ(shapley.verdict, Verdict::Pass);
}

TEST(Completeness, InapplicableMethodIsInconclusive) {
  const auto r = check_completeness(build_fixture(fixture::Min2{}), kDeepLift, Tensor::vector({1.0, 3.0}),
                                    ZerosBaseline{}, 0.05);
  EXPECT_EQ(r.verdict, Verdict::Inconclusive);
  EXPECT_FALSE(r.witness);
}

TEST(SensitivityA, GradientsFailOnOneRelu) {
  SensitivityOptions opt;
  opt.probes.emplace_back(Tensor::vector({2.0}), Tensor::vector({0.0}));
  const auto r = check_sensitivity_a(build_fixture(fixture::OneRelu{}), method::Gradients{}, opt);
  ASSERT_EQ(r.verdict, Verdict::Fail);
  EXPECT_EQ(r.witness->input.values(), std::vector<double>{2.0});
  EXPECT_EQ(r.witness->baseline.values(), std::vector<double>{0.0});
}

TEST(SensitivityA, GuidedFailsVaryingSecondFeature) {
  SensitivityOptions opt;
  opt.feature = 1;
  opt.anchor = Tensor::vector({3.0, 0.0});
  opt.feature_box = SamplingBox{0.0, 2.0};
  opt.seed = 4;
  const auto g = build_fixture(fixture::AppendixF{});
  EXPECT_EQ(check_sensitivity_a(g, kGuided, opt).verdict, Verdict::Fail);
  EXPECT_EQ(check_sensitivity_a(g, method::ModifiedBackprop{BackpropRule::Deconvnet}, opt).verdict, Verdict::Fail);
  EXPECT_EQ(check_sensitivity_a(g, kIg, opt).verdict, Verdict::Pass);
}

TEST(SensitivityA, IntegratedGradientsPassOnOneRelu) {
  SensitivityOptions opt;
  opt.probes.emplace_back(Tensor::vector({2.0}), Tensor::vector({0.0}));
  const auto r = check_sensitivity_a(build_fixture(fixture::OneRelu{}), method::IntegratedGradients{{50}}, opt);
  EXPECT_EQ(r.verdict, Verdict::Pass);
}

TEST(SensitivityA, FlatModelIsInconclusive) {
  const auto g = build_fixture(fixture::Linear{{0.0}, 1.0});
  EXPECT_EQ(check_sensitivity_a(g, kIg, {}).verdict, Verdict::Inconclusive);
}

TEST(SensitivityA, RefinementRescuesQuadratureMisses) {
  // The only region where x1 matters lies inside the first right-rule step.
  const auto g = build_fixture(fixture::AppendixK{});
  SensitivityOptions opt;
  opt.trials = 0;
  opt.probes.emplace_back(Tensor::vector({-1.5, 0.5}), Tensor::vector({1.004, 0.5}));
  const MethodSpec coarse = method::IntegratedGradients{{300}};
  EXPECT_EQ(attribute(g, opt.probes[0].first, ExplicitBaseline{opt.probes[0].second}, coarse).values[0], 0.0);
  EXPECT_EQ(check_sensitivity_a(g, coarse, opt).verdict, Verdict::Pass);
  opt.max_refinement = 1;
  EXPECT_EQ(check_sensitivity_a(g, coarse, opt).verdict, Verdict::Fail);
}

TEST(SensitivityA, ProbeValidation) {
  SensitivityOptions opt;
  opt.probes.emplace_back(Tensor::vector({2.0, 1.0}), Tensor::vector({0.0, 0.0}));
  EXPECT_EQ(check_sensitivity_a(build_fixture(fixture::Min2{}), kIg, opt).verdict, Verdict::Inconclusive);
}

TEST(Dummy, PathAndShapleyMethodsPass) {
  const auto g = three_input_two_wired();
  for (const auto& m : {kIg, MethodSpec{method::GradTimesInput{}}, kExactShapley}) {
    const auto r = check_sensitivity_b_dummy(g, m, 2, {});
    EXPECT_EQ(r.verdict, Verdict::Pass) << method_name(m);
  }
}

TEST(Dummy, WiredFeatureIsInconclusive) {
  const auto r = check_sensitivity_b_dummy(three_input_all_wired(), kIg, 2, {});
  EXPECT_EQ(r.verdict, Verdict::Inconclusive);
  EXPECT_THROW(check_sensitivity_b_dummy(three_input_all_wired(), kIg, 3, {}), ValidationError);
}

TEST(Linearity, Examples) {
  const auto f = build_fixture(fixture::AppendixF{});
  const auto lin = build_fixture(fixture::Linear{{1.0, 1.0}, 0.0});
  EXPECT_EQ(check_linearity(f, lin, 2.0, 0.5, kIg, kThreeOne, ZerosBaseline{}, 1e-12).verdict, Verdict::Pass);
  EXPECT_EQ(check_linearity(f, lin, 2.0, 0.5, kExactShapley, kThreeOne, ZerosBaseline{}, 1e-9).verdict,
            Verdict::Pass);
  // No claim either way for the rescale rule; the check must simply run.
  const auto dl = check_linearity(f, build_fixture(fixture::AppendixG{}), 1.0, -1.0, kDeepLift, kThreeOne,
                                  ZerosBaseline{}, 1e-12);
  EXPECT_NE(dl.verdict, Verdict::Inconclusive);
  EXPECT_THROW(check_linearity(f, build_fixture(fixture::OneRelu{}), 1.0, 1.0, kIg, kThreeOne, ZerosBaseline{}, 1e-12),
               ValidationError);
}

TEST(ImplementationInvariance, AppendixPair) {
  const EquivalencePair pair{build_fixture(fixture::AppendixF{}), build_fixture(fixture::AppendixG{})};
  const auto dl = check_implementation_invariance(pair, kDeepLift, {kThreeOne}, ZerosBaseline{}, 1e-6);
  ASSERT_EQ(dl.verdict, Verdict::Fail);
  EXPECT_EQ(dl.witness->input, kThreeOne);
  EXPECT_NEAR(dl.witness->attributions[0][0], 1.5, 1e-9);
  EXPECT_NEAR(dl.witness->attributions[1][0], 2.0, 1e-9);
  EXPECT_NE(dl.detail.find("1000 samples"), std::string::npos);

  EXPECT_EQ(check_implementation_invariance(pair, kIg, {kThreeOne}, ZerosBaseline{}, 1e-6).verdict, Verdict::Pass);
  EXPECT_EQ(check_implementation_invariance(pair, method::Gradients{}, {kThreeOne}, ZerosBaseline{}, 1e-6).verdict,
            Verdict::Pass);
}

TEST(ImplementationInvariance, NonEquivalentPairIsInconclusive) {
  const EquivalencePair pair{build_fixture(fixture::AppendixH{}), build_fixture(fixture::AppendixK{})};
  const auto r = check_implementation_invariance(pair, kIg, {kThreeOne}, ZerosBaseline{}, 1e-6);
  EXPECT_EQ(r.verdict, Verdict::Inconclusive);
}

TEST(Symmetry, Examples) {
  const auto logistic = build_fixture(fixture::LogisticSym{2});
  const auto ones = Tensor::vector({1.0, 1.0});
  EXPECT_EQ(check_symmetry(logistic, method::IntegratedGradients{{50}}, {{0, 1}}, ones, ZerosBaseline{}, 1e-12).verdict,
            Verdict::Pass);
  EXPECT_EQ(check_symmetry(logistic, kExactShapley, {{0, 1}}, ones, ZerosBaseline{}, 1e-12).verdict, Verdict::Pass);

  const auto cex = build_fixture(fixture::SymmetryCex{0.0, 1.0, 0, 1, 2});
  const MethodSpec bent = method::PathMethod{path::Polyline{{Tensor::vector({1.0, 0.0})}}, {10000}};
  const auto r = check_symmetry(cex, bent, {{0, 1}}, ones, ZerosBaseline{}, 1e-6);
  ASSERT_EQ(r.verdict, Verdict::Fail);
  EXPECT_GT(r.witness->attributions[0][1], r.witness->attributions[0][0]);
}

TEST(Symmetry, UnverifiedOrUnequalPairsAreInconclusive) {
  const auto f = build_fixture(fixture::AppendixF{});
  EXPECT_EQ(check_symmetry(f, kIg, {{0, 1}}, Tensor::vector({1.0, 1.0}), ZerosBaseline{}, 1e-12).verdict,
            Verdict::Inconclusive);
  const auto logistic = build_fixture(fixture::LogisticSym{2});
  EXPECT_EQ(check_symmetry(logistic, kIg, {{0, 1}}, Tensor::vector({1.0, 2.0}), ZerosBaseline{}, 1e-12).verdict,
            Verdict::Inconclusive);
}

TEST(AppendixA, CounterexampleConstruction) {
  const auto cex = build_appendix_a_counterexample(path::Polyline{{Tensor::vector({1.0, 0.0})}}, 2);
  EXPECT_EQ(cex.params.a, 0.0);
  EXPECT_EQ(cex.params.b, 1.0);
  EXPECT_EQ(cex.larger, 1u);
  EXPECT_EQ(cex.smaller, 0u);

  const auto mirrored = build_appendix_a_counterexample(path::Polyline{{Tensor::vector({0.0, 1.0})}}, 2);
  EXPECT_EQ(mirrored.larger, 0u);
  EXPECT_EQ(mirrored.smaller, 1u);

  try {
    build_appendix_a_counterexample(path::Straightline{}, 2);
    FAIL() << "straightline must be rejected";
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "no counterexample for straightline");
  }
}

TEST(AppendixA, PropertyHoldsForRandomBentPaths) {
  testing::Rng rng(73);
  int built = 0;
  for (int k = 0; k < 40; ++k) {
    const std::size_t n = 2 + rng.index(3);
    // Random monotone waypoints from 0 to 1, sorted per coordinate.
    std::vector<std::vector<double>> coords(n);
    for (auto& c : coords) {
      c = rng.vec(2, 0.0, 1.0);
      std::sort(c.begin(), c.end());
    }
    std::vector<Tensor> waypoints;
    for (std::size_t w = 0; w < 2; ++w) {
      std::vector<double> p(n);
      for (std::size_t i = 0; i < n; ++i) p[i] = coords[i][w];
      waypoints.push_back(Tensor::vector(p));
    }
    const PathSpec bent = path::Polyline{waypoints};
    const auto cex = build_appendix_a_counterexample(bent, n);
    ++built;
    const auto r = path_integrated_gradients(cex.model, cex.input, ExplicitBaseline{cex.baseline}, bent, {9000});
    EXPECT_GT(r.values[cex.larger], r.values[cex.smaller] + 1e-4) << "trial " << k;
    const auto straight = integrated_gradients(cex.model, cex.input, ExplicitBaseline{cex.baseline}, {9000});
    EXPECT_NEAR(straight.values[cex.larger], straight.values[cex.smaller], 1e-12);
  }
  EXPECT_EQ(built, 40);
}

TEST(Audit, IntegratedGradientsPassEverythingOnEveryFixture) {
  for (const auto& id : standard_fixtures()) {
    AuditConfig c;
    c.seed = 3;
    for (const auto& r : run_audit(build_fixture(id), method::IntegratedGradients{{50}}, c)) {
      EXPECT_EQ(r.verdict, Verdict::Pass) << fixture_name(id) << " " << axiom_name(r.axiom) << ": " << r.detail;
    }
  }
}

TEST(Audit, KnownFailures) {
  AuditConfig c;
  c.seed = 1;
  auto verdict_of = [](const std::vector<AxiomReport>& rs, Axiom a) {
    for (const auto& r : rs) {
      if (r.axiom == a) return r.verdict;
    }
    return Verdict::Inconclusive;
  };
  const auto one_relu = run_audit(build_fixture(fixture::OneRelu{}), method::Gradients{}, c);
  EXPECT_EQ(verdict_of(one_relu, Axiom::SensitivityA), Verdict::Fail);
  EXPECT_EQ(verdict_of(one_relu, Axiom::Completeness), Verdict::Fail);

  for (auto rule : {BackpropRule::Guided, BackpropRule::Deconvnet}) {
    const auto rs = run_audit(build_fixture(fixture::AppendixF{}), method::ModifiedBackprop{rule}, c);
    EXPECT_EQ(verdict_of(rs, Axiom::SensitivityA), Verdict::Fail);
  }

  AuditConfig pair = c;
  pair.seed = 2;
  pair.partner = build_fixture(fixture::AppendixG{});
  pair.axioms = {Axiom::ImplementationInvariance};
  const auto dl = run_audit(build_fixture(fixture::AppendixF{}), kDeepLift, pair);
  EXPECT_EQ(verdict_of(dl, Axiom::ImplementationInvariance), Verdict::Fail);
}

TEST(Audit, SubsetSelectionDoesNotChangeVerdicts) {
  const auto g = build_fixture(fixture::AppendixK{});
  AuditConfig all;
  all.seed = 5;
  const auto full = run_audit(g, method::Gradients{}, all);
  for (const auto& r : full) {
    AuditConfig one = all;
    one.axioms = {r.axiom};
    const auto single = run_audit(g, method::Gradients{}, one);
    ASSERT_EQ(single.size(), 1u);
    EXPECT_EQ(report_to_json(single[0]), report_to_json(r));
  }
}

TEST(Audit, SeedStable) {
  const auto g = build_fixture(fixture::AppendixG{});
  AuditConfig c;
  c.seed = 77;
  const auto a = run_audit(g, kGuided, c);
  const auto b = run_audit(g, kGuided, c);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(report_to_json(a[k]), report_to_json(b[k]));
}

TEST(Audit, EveryFailureReplays) {
  const auto f = build_fixture(fixture::AppendixF{});
  const auto g = build_fixture(fixture::AppendixG{});
  const auto linear_partner = build_fixture(fixture::Linear{{1.0, 1.0}, 0.0});
  struct Case {
    ModelGraph model;
    MethodSpec method;
    AuditConfig config;
  };
  AuditConfig plain;
  plain.seed = 9;
  AuditConfig with_partner = plain;
  with_partner.partner = g;
  AuditConfig bent = plain;
  bent.input = Tensor::vector({1.0, 1.0});
  bent.axioms = {Axiom::Symmetry};
  const std::vector<Case> cases = {
      {build_fixture(fixture::OneRelu{}), method::Gradients{}, plain},
      {f, kGuided, plain},
      {f, method::ModifiedBackprop{BackpropRule::Deconvnet}, plain},
      {f, kDeepLift, with_partner},
      {build_fixture(fixture::SymmetryCex{0.0, 1.0, 0, 1, 2}),
       method::PathMethod{path::Polyline{{Tensor::vector({1.0, 0.0})}}, {2000}}, bent},
      {build_fixture(fixture::LogisticSym{3}), method::ShapleyShubik{method::ShapleySampled{7, 1}}, plain},
  };
  int failures = 0;
  for (const auto& c : cases) {
    const auto implicit_partner = cloned_halves(c.model);
    for (const auto& r : run_audit(c.model, c.method, c.config)) {
      if (r.verdict != Verdict::Fail) continue;
      ++failures;
      ASSERT_TRUE(r.witness);
      const ModelGraph* partner = nullptr;
      if (r.axiom == Axiom::Linearity) partner = &linear_partner;
      if (r.axiom == Axiom::ImplementationInvariance) partner = c.config.partner ? &*c.config.partner : &implicit_partner;
      EXPECT_NE(r.axiom, Axiom::SensitivityBDummy);
      EXPECT_TRUE(witness_reproduces(r, c.model, c.method, partner))
          << method_name(c.method) << " " << axiom_name(r.axiom);
      const auto back = report_from_json(report_to_json(r));
      EXPECT_EQ(report_to_json(back), report_to_json(r));
    }
  }
  EXPECT_GE(failures, 6);
}

TEST(Audit, ReportJsonShape) {
  const auto rs = run_audit(build_fixture(fixture::OneRelu{}), method::Gradients{}, {});
  const auto j = report_to_json(rs.front());
  EXPECT_EQ(j["axiom"], "completeness");
  EXPECT_EQ(j["verdict"], "fail");
  EXPECT_TRUE(j["witness"].is_object());
  EXPECT_THROW(report_from_json(nlohmann::json{{"axiom", "nonsense"}}), ValidationError);
}

}  // namespace
}  // namespace intgrad
