#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "intgrad/attribution.hpp"
#include "intgrad/detail/files.hpp"
#include "intgrad/engine.hpp"
#include "intgrad/error.hpp"
#include "intgrad/fixtures.hpp"
#include "intgrad/graph.hpp"
#include "intgrad/tensor.hpp"
#include "intgrad/transforms.hpp"

namespace intgrad {

enum class Axiom { Completeness, SensitivityA, SensitivityBDummy, Linearity, ImplementationInvariance, Symmetry };

inline constexpr Axiom kAllAxioms[] = {Axiom::Completeness, Axiom::SensitivityA,
                                       Axiom::SensitivityBDummy, Axiom::Linearity,
                                       Axiom::ImplementationInvariance, Axiom::Symmetry};

inline std::string_view axiom_name(Axiom a) {
  switch (a) {
    case Axiom::Completeness: return "completeness";
    case Axiom::SensitivityA: return "sensitivity_a";
    case Axiom::SensitivityBDummy: return "sensitivity_b_dummy";
    case Axiom::Linearity: return "linearity";
    case Axiom::ImplementationInvariance: return "implementation_invariance";
    case Axiom::Symmetry: return "symmetry";
  }
  return "completeness";
}

inline std::optional<Axiom> parse_axiom(std::string_view name) {
  for (auto a : kAllAxioms) {
    if (axiom_name(a) == name) return a;
  }
  return std::nullopt;
}

enum class Verdict { Pass, Fail, Inconclusive };

inline std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

/// Evidence for a verdict. `attributions` holds one tensor per model run on
/// the witness (e.g. both models of an equivalence pair).
struct Witness {
  Tensor input;
  Tensor baseline;
  std::vector<Tensor> attributions;
  std::vector<double> gaps;
  /// Feature under test (sensitivity, dummy) or first feature of a pair.
  std::optional<std::size_t> feature;
  std::optional<std::size_t> other_feature;
  std::string detail;
  /// Mixing weights (a, b) for linearity witnesses.
  std::vector<double> coefficients;
};

struct AxiomReport {
  Axiom axiom = Axiom::Completeness;
  Verdict verdict = Verdict::Inconclusive;
  std::string method;
  std::optional<Witness> witness;
  std::size_t trials = 0;
  double tolerance = 0.0;
  std::string detail;
};

/// Axis-aligned box [low, high]^n for random sampling.
struct SamplingBox {
  double low = -3.0;
  double high = 3.0;
};

struct SensitivityOptions {
  std::size_t trials = 100;
  double attribution_tolerance = 1e-6;
  /// Pairs must change the output by more than this.
  double difference_floor = 1e-5;
  std::uint64_t seed = 0;
  SamplingBox box;
  /// Vary only this feature (random feature per trial otherwise).
  std::optional<std::size_t> feature;
  /// Shared values for the non-varied features (random per trial otherwise).
  std::optional<Tensor> anchor;
  /// Box for the varied feature; defaults to `box`.
  std::optional<SamplingBox> feature_box;
  /// (x, x') pairs checked before any random trial.
  std::vector<std::pair<Tensor, Tensor>> probes;
  /// Quadrature methods are retried with doubled steps, up to this many
  /// times the configured count, before a zero attribution counts as a
  /// failure.
  std::size_t max_refinement = 1024;
};

struct DummyOptions {
  std::size_t trials = 20;
  double tolerance = 1e-6;
  std::uint64_t seed = 0;
  SamplingBox box;
};

/// Two models claimed to compute the same function. Agreement is certified by
/// sampling `agreement_samples` points of `box` before any invariance verdict.
struct EquivalencePair {
  ModelGraph model_a;
  ModelGraph model_b;
  SamplingBox box = {-5.0, 5.0};
  std::size_t agreement_samples = 1000;
  std::uint64_t seed = 0;
};

struct SymmetryOptions {
  std::size_t swap_samples = 100;
  std::uint64_t seed = 0;
  SamplingBox box;
};

namespace detail {

/// Seeded uniform draws with a fixed, library-independent mapping.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double uniform(const SamplingBox& box) { return box.low + (box.high - box.low) * unit(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  std::vector<double> point(std::size_t n, const SamplingBox& box) {
    std::vector<double> p(n);
    for (auto& v : p) v = uniform(box);
    return p;
  }

 private:
  std::mt19937_64 rng_;
};

/// Independent stream for sub-audit `k` of a batch seeded with `seed`.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline AxiomReport make_report(Axiom axiom, const MethodSpec& m, double tolerance) {
  AxiomReport r;
  r.axiom = axiom;
  r.method = method_name(m);
  r.tolerance = tolerance;
  return r;
}

inline AxiomReport inconclusive(AxiomReport r, std::string why) {
  r.verdict = Verdict::Inconclusive;
  r.detail = std::move(why);
  return r;
}

/// `m` with its Riemann step count multiplied by `factor`; nothing when the
/// method has no quadrature.
inline std::optional<MethodSpec> scaled_steps(const MethodSpec& m, std::size_t factor) {
  if (const auto* ig = std::get_if<method::IntegratedGradients>(&m)) {
    auto next = *ig;
    next.config.steps *= factor;
    return next;
  }
  if (const auto* p = std::get_if<method::PathMethod>(&m)) {
    auto next = *p;
    next.config.steps *= factor;
    return next;
  }
  return std::nullopt;
}

inline Tensor like(const Tensor& shape_of, std::vector<double> values) {
  return Tensor(shape_of.shape(), std::move(values));
}

inline double max_abs_diff(const Tensor& a, const Tensor& b, std::size_t* where = nullptr) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    if (d > worst) {
      worst = d;
      if (where) *where = i;
    }
  }
  return worst;
}

}  // namespace detail

/// Passes iff completeness_gap <= tolerance * max(1, |F(x) - F(x')|).
inline AxiomReport check_completeness(const ModelGraph& g, const MethodSpec& m, const Tensor& x,
                                      const BaselineSpec& baseline, double tolerance,
                                      const ExecutionOptions& exec = {}) {
  auto report = detail::make_report(Axiom::Completeness, m, tolerance);
  report.trials = 1;
  AttributionResult r;
  try {
    r = attribute(g, x, baseline, m, exec);
  } catch (const ValidationError& e) {
    return detail::inconclusive(std::move(report), e.what());
  }
  const double delta = r.output_at_input - r.output_at_baseline;
  const double allowed = tolerance * std::max(1.0, std::abs(delta));
  report.verdict = r.completeness_gap <= allowed ? Verdict::Pass : Verdict::Fail;
  report.detail = "gap " + detail::format_double(r.completeness_gap, 6) + " vs allowed " +
                  detail::format_double(allowed, 6);
  if (report.verdict == Verdict::Fail) {
    report.witness = Witness{x, resolve_baseline(baseline, x), {r.values}, {r.completeness_gap}, {}, {},
                             "F(x) - F(x') = " + detail::format_double(delta), {}};
  }
  return report;
}

/// Samples pairs differing in one feature whose outputs differ by more than
/// the difference floor; fails if that feature's attribution magnitude is at
/// most the attribution tolerance.
inline AxiomReport check_sensitivity_a(const ModelGraph& g, const MethodSpec& m, const SensitivityOptions& opt,
                                       const ExecutionOptions& exec = {}) {
  auto report = detail::make_report(Axiom::SensitivityA, m, opt.attribution_tolerance);
  const auto n = g.input_arity();
  if (n == 0) return detail::inconclusive(std::move(report), "model has no features");
  if (opt.anchor && opt.anchor->size() != n) throw ValidationError("sensitivity anchor has the wrong length");
  if (opt.feature && *opt.feature >= n) throw ValidationError("sensitivity feature index out of range");

  detail::Sampler sampler(opt.seed);
  std::size_t qualifying = 0;
  std::size_t refined_pairs = 0;
  auto run_pair = [&](const Tensor& x, const Tensor& xb, std::size_t f) -> bool {
    const double dF = evaluate(g, x.span()) - evaluate(g, xb.span());
    if (!(std::abs(dF) > opt.difference_floor)) return false;
    ++qualifying;
    const auto r = attribute(g, x, ExplicitBaseline{xb}, m, exec);
    if (std::abs(r.values[f]) <= opt.attribution_tolerance) {
      // A zero from a quadrature method may only mean the grid stepped over
      // the region where the feature matters. Refine before blaming the method.
      for (std::size_t factor = 2; factor <= opt.max_refinement; factor *= 2) {
        const auto finer = detail::scaled_steps(m, factor);
        if (!finer) break;
        if (std::abs(attribute(g, x, ExplicitBaseline{xb}, *finer, exec).values[f]) > opt.attribution_tolerance) {
          ++refined_pairs;
          return false;
        }
      }
      report.verdict = Verdict::Fail;
      report.witness = Witness{x, xb, {r.values}, {r.completeness_gap}, f, {},
                               "F(x) - F(x') = " + detail::format_double(dF) + " but feature " +
                                   std::to_string(f) + " received " + detail::format_double(r.values[f]), {}};
      report.detail = report.witness->detail;
      return true;
    }
    return false;
  };

  try {
    for (const auto& [x, xb] : opt.probes) {
      if (x.size() != n || xb.size() != n) throw ValidationError("sensitivity probe has the wrong length");
      std::optional<std::size_t> diff;
      for (std::size_t i = 0; i < n; ++i) {
        if (x[i] != xb[i]) {
          if (diff) throw ValidationError("sensitivity probes must differ in exactly one feature");
          diff = i;
        }
      }
      if (!diff) throw ValidationError("sensitivity probes must differ in exactly one feature");
      ++report.trials;
      if (run_pair(x, xb, *diff)) return report;
    }
    const auto& fbox = opt.feature_box ? *opt.feature_box : opt.box;
    for (std::size_t t = 0; t < opt.trials; ++t) {
      ++report.trials;
      auto base = opt.anchor ? opt.anchor->values() : sampler.point(n, opt.box);
      const auto f = opt.feature ? *opt.feature : sampler.index(n);
      auto x = base;
      auto xb = base;
      x[f] = sampler.uniform(fbox);
      xb[f] = sampler.uniform(fbox);
      if (run_pair(Tensor::vector(std::move(x)), Tensor::vector(std::move(xb)), f)) return report;
    }
  } catch (const ValidationError& e) {
    return detail::inconclusive(std::move(report), e.what());
  }
  if (qualifying == 0) {
    return detail::inconclusive(std::move(report), "no sampled pair changed the output by more than " +
                                                       detail::format_double(opt.difference_floor, 6));
  }
  report.verdict = Verdict::Pass;
  report.detail = std::to_string(qualifying) + " qualifying pairs";
  if (refined_pairs > 0) {
    report.detail += ", " + std::to_string(refined_pairs) + " resolved only after step refinement";
  }
  return report;
}

/// Fails if any trial gives the declared dummy feature an attribution larger
/// than the tolerance. A feature the output structurally depends on cannot be
/// certified as dummy, which makes the report inconclusive.
inline AxiomReport check_sensitivity_b_dummy(const ModelGraph& g, const MethodSpec& m, std::size_t dummy,
                                             const DummyOptions& opt, const ExecutionOptions& exec = {}) {
  auto report = detail::make_report(Axiom::SensitivityBDummy, m, opt.tolerance);
  const auto n = g.input_arity();
  if (dummy >= n) throw ValidationError("dummy feature index out of range");
  if (structural_support(g)[dummy]) {
    return detail::inconclusive(std::move(report),
                                "feature " + std::to_string(dummy) + " is wired to the output");
  }
  detail::Sampler sampler(opt.seed);
  try {
    for (std::size_t t = 0; t < opt.trials; ++t) {
      ++report.trials;
      const auto x = Tensor::vector(sampler.point(n, opt.box));
      const auto xb = Tensor::vector(sampler.point(n, opt.box));
      const auto r = attribute(g, x, ExplicitBaseline{xb}, m, exec);
      if (std::abs(r.values[dummy]) > opt.tolerance) {
        report.verdict = Verdict::Fail;
        report.witness = Witness{x, xb, {r.values}, {r.completeness_gap}, dummy, {},
                                 "dummy feature received " + detail::format_double(r.values[dummy]), {}};
        report.detail = report.witness->detail;
        return report;
      }
    }
  } catch (const ValidationError& e) {
    return detail::inconclusive(std::move(report), e.what());
  }
  report.verdict = Verdict::Pass;
  report.detail = "feature " + std::to_string(dummy) + " received no attribution";
  return report;
}

/// Compares attribution(a*f1 + b*f2) with a*attribution(f1) + b*attribution(f2)
/// component-wise: |diff_i| <= tolerance * max(1, |expected_i|).
inline AxiomReport check_linearity(const ModelGraph& f1, const ModelGraph& f2, double a, double b,
                                   const MethodSpec& m, const Tensor& x, const BaselineSpec& baseline,
                                   double tolerance, const ExecutionOptions& exec = {}) {
  auto report = detail::make_report(Axiom::Linearity, m, tolerance);
  report.trials = 1;
  const auto composite = linear_combination(f1, f2, a, b);
  try {
    const auto r1 = attribute(f1, x, baseline, m, exec);
    const auto r2 = attribute(f2, x, baseline, m, exec);
    const auto rc = attribute(composite, x, baseline, m, exec);
    std::vector<double> expected(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) expected[i] = a * r1.values[i] + b * r2.values[i];
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double diff = std::abs(rc.values[i] - expected[i]);
      if (diff > tolerance * std::max(1.0, std::abs(expected[i]))) {
        report.verdict = Verdict::Fail;
        report.witness = Witness{x, resolve_baseline(baseline, x),
                                 {rc.values, detail::like(x, expected), r1.values, r2.values},
                                 {rc.completeness_gap}, i, {},
                                 "composite attribution differs from the weighted sum by " +
                                     detail::format_double(diff) + " (a = " + detail::format_double(a) +
                                     ", b = " + detail::format_double(b) + ")",
                                 {a, b}};
        report.detail = report.witness->detail;
        return report;
      }
    }
  } catch (const ValidationError& e) {
    return detail::inconclusive(std::move(report), e.what());
  }
  report.verdict = Verdict::Pass;
  report.detail = "a = " + detail::format_double(a) + ", b = " + detail::format_double(b);
  return report;
}

/// Certifies functional agreement of the pair by sampling, then fails if any
/// of `inputs` receives different attributions from the two models.
inline AxiomReport check_implementation_invariance(const EquivalencePair& pair, const MethodSpec& m,
                                                   const std::vector<Tensor>& inputs, const BaselineSpec& baseline,
                                                   double tolerance, const ExecutionOptions& exec = {}) {
  auto report = detail::make_report(Axiom::ImplementationInvariance, m, tolerance);
  const auto n = pair.model_a.input_arity();
  if (pair.model_b.input_arity() != n) {
    return detail::inconclusive(std::move(report), "models have different input arity");
  }
  constexpr double kAgreement = 1e-9;
  detail::Sampler sampler(pair.seed);
  double worst = 0.0;
  for (std::size_t s = 0; s < pair.agreement_samples; ++s) {
    const auto p = sampler.point(n, pair.box);
    const double d = std::abs(evaluate(pair.model_a, p) - evaluate(pair.model_b, p));
    worst = std::max(worst, d);
    if (d > kAgreement) {
      report = detail::inconclusive(std::move(report), "models disagree by " + detail::format_double(d) +
                                                           "; not functionally equivalent");
      report.witness = Witness{Tensor::vector(p), Tensor::zeros({n}), {}, {}, {}, {}, "disagreement point", {}};
      return report;
    }
  }
  const std::string evidence = "agreement within 1e-9 on " + std::to_string(pair.agreement_samples) +
                               " samples of [" + detail::format_double(pair.box.low, 6) + ", " +
                               detail::format_double(pair.box.high, 6) + "]^" + std::to_string(n) +
                               " (max diff " + detail::format_double(worst, 6) + ")";
  try {
    for (const auto& x : inputs) {
      ++report.trials;
      const auto ra = attribute(pair.model_a, x, baseline, m, exec);
      const auto rb = attribute(pair.model_b, x, baseline, m, exec);
      std::size_t where = 0;
      const double diff = detail::max_abs_diff(ra.values, rb.values, &where);
      if (diff > tolerance) {
        report.verdict = Verdict::Fail;
        report.witness = Witness{x, resolve_baseline(baseline, x), {ra.values, rb.values},
                                 {ra.completeness_gap, rb.completeness_gap}, where, {},
                                 "attributions differ by " + detail::format_double(diff), {}};
        report.detail = report.witness->detail + "; " + evidence;
        return report;
      }
    }
  } catch (const ValidationError& e) {
    return detail::inconclusive(std::move(report), e.what());
  }
  if (report.trials == 0) return detail::inconclusive(std::move(report), "no inputs to compare");
  report.verdict = Verdict::Pass;
  report.detail = evidence;
  return report;
}

/// Largest |F(x) - F(swap_ij(x))| over sampled points.
inline double swap_discrepancy(const ModelGraph& g, std::size_t i, std::size_t j, const SymmetryOptions& opt) {
  detail::Sampler sampler(detail::stream_seed(opt.seed, i * 7919 + j));
  double worst = 0.0;
  for (std::size_t s = 0; s < opt.swap_samples; ++s) {
    auto p = sampler.point(g.input_arity(), opt.box);
    const double before = evaluate(g, p);
    std::swap(p[i], p[j]);
    worst = std::max(worst, std::abs(before - evaluate(g, p)));
  }
  return worst;
}

/// Fails if two features of a verified symmetric pair, holding equal values
/// in both x and the baseline, receive attributions more than `tolerance`
/// apart.
inline AxiomReport check_symmetry(const ModelGraph& g, const MethodSpec& m,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& pairs, const Tensor& x,
                                  const BaselineSpec& baseline, double tolerance, const SymmetryOptions& opt = {},
                                  const ExecutionOptions& exec = {}) {
  auto report = detail::make_report(Axiom::Symmetry, m, tolerance);
  const auto n = g.input_arity();
  if (x.size() != n) throw ValidationError("symmetry input has the wrong length");
  const auto xb = resolve_baseline(baseline, x);
  constexpr double kSwapAgreement = 1e-9;
  for (const auto& [i, j] : pairs) {
    if (i >= n || j >= n || i == j) throw ValidationError("symmetric pair indices out of range");
    const double d = swap_discrepancy(g, i, j, opt);
    if (d > kSwapAgreement) {
      return detail::inconclusive(std::move(report), "features " + std::to_string(i) + " and " +
                                                         std::to_string(j) + " are not symmetric (swap changes F by " +
                                                         detail::format_double(d, 6) + ")");
    }
    if (x[i] != x[j] || xb[i] != xb[j]) {
      return detail::inconclusive(std::move(report), "input and baseline must agree on features " +
                                                         std::to_string(i) + " and " + std::to_string(j));
    }
  }
  AttributionResult r;
  try {
    r = attribute(g, x, baseline, m, exec);
  } catch (const ValidationError& e) {
    return detail::inconclusive(std::move(report), e.what());
  }
  for (const auto& [i, j] : pairs) {
    ++report.trials;
    const double diff = std::abs(r.values[i] - r.values[j]);
    if (diff > tolerance) {
      report.verdict = Verdict::Fail;
      report.witness = Witness{x, xb, {r.values}, {r.completeness_gap}, i, j,
                               "symmetric features differ by " + detail::format_double(diff), {}};
      report.detail = report.witness->detail;
      return report;
    }
  }
  report.verdict = Verdict::Pass;
  report.detail = pairs.empty() ? "no symmetric pairs declared"
                                : std::to_string(pairs.size()) + " symmetric pairs verified by " +
                                      std::to_string(opt.swap_samples) + " swap samples each";
  return report;
}

/// Counterexample to symmetry preservation for a non-straight path from 0 to 1.
struct SymmetryCounterexample {
  fixture::SymmetryCex params;
  ModelGraph model;
  /// The feature that must receive the strictly larger attribution.
  std::size_t larger = 0;
  std::size_t smaller = 0;
  Tensor input;
  Tensor baseline;
};

/// Picks features i, j and an interval (t1, t2) on which the path keeps
/// gamma_i > gamma_j, with a = gamma_i(t1) and b = gamma_i(t2), and returns the
/// symmetric function (clamp(x_i)-a)(clamp(x_j)-a) at x = 1, x' = 0. Along
/// the path, x_j's integrand dominates x_i's inside (t1, t2).
inline SymmetryCounterexample build_appendix_a_counterexample(const PathSpec& path, std::size_t n) {
  if (std::holds_alternative<path::Straightline>(path)) {
    throw ValidationError("no counterexample for straightline");
  }
  if (n < 2) throw ValidationError("a symmetry counterexample needs at least two features");
  const auto ones = Tensor::filled({n}, 1.0);
  const auto zeros = Tensor::zeros({n});
  const auto skeleton = detail::resolve_path(path, ones, zeros);

  std::optional<std::size_t> at;
  std::size_t fi = 0;
  std::size_t fj = 0;
  for (std::size_t k = 1; k + 1 < skeleton.size() && !at; ++k) {
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double d = skeleton[k][i] - skeleton[k][j];
        if (d > best) {
          best = d;
          fi = i;
          fj = j;
          at = k;
        }
      }
    }
  }
  if (!at) throw ValidationError("no counterexample for straightline");

  auto diff = [&](std::size_t q) { return skeleton[q][fi] - skeleton[q][fj]; };
  auto along = [&](std::size_t q, double frac) {
    return skeleton[q][fi] + frac * (skeleton[q + 1][fi] - skeleton[q][fi]);
  };
  std::size_t q0 = *at;
  while (diff(q0) > 0.0) --q0;
  const double a = along(q0, diff(q0) / (diff(q0) - diff(q0 + 1)));
  std::size_t q1 = *at;
  while (diff(q1) > 0.0) ++q1;
  const double b = along(q1 - 1, diff(q1 - 1) / (diff(q1 - 1) - diff(q1)));
  if (!(a < b)) throw ValidationError("path crossing values do not bracket a non-empty interval");

  const fixture::SymmetryCex params{a, b, fi, fj, n};
  return {params, build_fixture(params), fj, fi, ones, zeros};
}

}  // namespace intgrad
