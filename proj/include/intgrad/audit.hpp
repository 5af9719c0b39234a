#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "intgrad/attribution.hpp"
#include "intgrad/axioms.hpp"
#include "intgrad/fixtures.hpp"
#include "intgrad/transforms.hpp"

// Runs the whole axiom battery for one (model, method) pair, filling in the
// inputs each audit needs when the caller does not supply them.

namespace intgrad {

struct AuditConfig {
  /// Empty means every axiom.
  std::vector<Axiom> axioms;
  std::uint64_t seed = 0;
  std::size_t trials = 100;
  SamplingBox box;
  /// Evaluation point; random points from `box` when absent.
  std::optional<Tensor> input;
  BaselineSpec baseline = ZerosBaseline{};
  /// Second implementation for implementation invariance. When absent the
  /// model is compared against an independently cloned copy of itself.
  std::optional<ModelGraph> partner;
  /// Declared symmetric pairs; discovered by swap testing when absent.
  std::optional<std::vector<std::pair<std::size_t, std::size_t>>> symmetric_pairs;
  std::optional<std::size_t> dummy_index;

  double completeness_tolerance = 0.05;
  /// Quadrature methods failing completeness are retried with doubled step
  /// counts up to this many steps before the failure stands.
  std::size_t completeness_max_steps = 300;
  double sensitivity_tolerance = 1e-6;
  double sensitivity_floor = 1e-5;
  double dummy_tolerance = 1e-6;
  double invariance_tolerance = 1e-6;
  /// Defaults to 1e-9 for Shapley-Shubik and 1e-12 for everything else.
  std::optional<double> linearity_tolerance;
  std::optional<double> symmetry_tolerance;
  /// Points used by the linearity audit when no
  /// input is given.
  std::size_t point_trials = 10;
};

namespace detail {

inline bool is_shapley(const MethodSpec& m) { return std::holds_alternative<method::ShapleyShubik>(m); }

// Folds per-point reports: first failure wins, otherwise pass if any point
// was conclusive.
inline AxiomReport fold_reports(Axiom axiom, const MethodSpec& m, double tol, std::vector<AxiomReport> parts) {
  auto out = make_report(axiom, m, tol);
  std::size_t conclusive = 0;
  std::string last_detail;
  for (auto& r : parts) {
    out.trials += r.trials;
    if (r.verdict == Verdict::Fail) {
      r.trials = out.trials;
      return r;
    }
    if (r.verdict == Verdict::Pass) ++conclusive;
    last_detail = r.detail;
  }
  if (conclusive == 0) return inconclusive(std::move(out), last_detail);
  out.verdict = Verdict::Pass;
  out.detail = std::to_string(conclusive) + " points passed; " + last_detail;
  return out;
}

inline std::size_t quadrature_steps(const MethodSpec& m) {
  if (const auto* ig = std::get_if<method::IntegratedGradients>(&m)) return ig->config.steps;
  if (const auto* p = std::get_if<method::PathMethod>(&m)) return p->config.steps;
  return 0;
}

inline AxiomReport audit_completeness_at(const ModelGraph& g, const MethodSpec& m, const Tensor& x,
                                         const AuditConfig& c, const ExecutionOptions& exec) {
  auto report = check_completeness(g, m, x, c.baseline, c.completeness_tolerance, exec);
  const auto steps = quadrature_steps(m);
  if (report.verdict != Verdict::Fail || steps == 0) return report;
  for (std::size_t factor = 2; steps * factor <= c.completeness_max_steps; factor *= 2) {
    auto finer = check_completeness(g, *scaled_steps(m, factor), x, c.baseline, c.completeness_tolerance, exec);
    if (finer.verdict == Verdict::Pass) {
      finer.method = report.method;
      finer.detail += " at m = " + std::to_string(steps * factor);
      return finer;
    }
  }
  return report;
}

inline std::vector<Tensor> audit_points(const AuditConfig& c, std::size_t n, std::size_t count, std::uint64_t seed) {
  if (c.input) return {*c.input};
  Sampler sampler(seed);
  std::vector<Tensor> points;
  for (std::size_t k = 0; k < count; ++k) points.push_back(Tensor::vector(sampler.point(n, c.box)));
  return points;
}

inline std::vector<std::pair<std::size_t, std::size_t>> discover_symmetric_pairs(const ModelGraph& g,
                                                                                const SymmetryOptions& opt) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < g.input_arity(); ++i) {
    for (std::size_t j = i + 1; j < g.input_arity(); ++j) {
      if (swap_discrepancy(g, i, j, opt) <= 1e-9) pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

inline AxiomReport audit_symmetry(const ModelGraph& g, const MethodSpec& m, const AuditConfig& c, double tol,
                                  std::uint64_t seed, const ExecutionOptions& exec) {
  const auto n = g.input_arity();
  SymmetryOptions opt{100, seed, c.box};
  const bool declared = c.symmetric_pairs.has_value();
  auto pairs = declared ? *c.symmetric_pairs : discover_symmetric_pairs(g, opt);
  if (pairs.empty()) {
    auto r = make_report(Axiom::Symmetry, m, tol);
    r.verdict = Verdict::Pass;
    r.detail = "no symmetric feature pairs; vacuously satisfied";
    return r;
  }
  Tensor x;
  if (c.input) {
    x = *c.input;
    if (!declared) {
      const auto xb = resolve_baseline(c.baseline, x);
      std::erase_if(pairs, [&](const auto& p) { return x[p.first] != x[p.second] || xb[p.first] != xb[p.second]; });
      if (pairs.empty()) {
        return inconclusive(make_report(Axiom::Symmetry, m, tol),
                            "input or baseline breaks every discovered symmetric pair");
      }
    }
  } else {
    // Random point, equalised over connected groups of pairs.
    std::vector<std::size_t> root(n);
    std::iota(root.begin(), root.end(), std::size_t{0});
    auto find = [&](std::size_t v) {
      while (root[v] != v) v = root[v] = root[root[v]];
      return v;
    };
    for (const auto& [i, j] : pairs) root[find(i)] = find(j);
    Sampler sampler(stream_seed(seed, 1));
    auto p = sampler.point(n, c.box);
    for (std::size_t i = 0; i < n; ++i) p[i] = p[find(i)];
    x = Tensor::vector(std::move(p));
    const auto xb = resolve_baseline(c.baseline, x);
    std::erase_if(pairs, [&](const auto& q) { return xb[q.first] != xb[q.second]; });
    if (pairs.empty()) {
      return inconclusive(make_report(Axiom::Symmetry, m, tol), "baseline breaks every symmetric pair");
    }
  }
  return check_symmetry(g, m, pairs, x, c.baseline, tol, opt, exec);
}

}  // namespace detail

/// Runs the requested axiom audits. Each audit draws from its own seeded
/// stream, so selecting a subset of axioms does not change any verdict.
inline std::vector<AxiomReport> run_audit(const ModelGraph& g, const MethodSpec& m, const AuditConfig& c,
                                          const ExecutionOptions& exec = {}) {
  using namespace detail;
  const auto n = g.input_arity();
  const std::vector<Axiom> axioms = c.axioms.empty() ? std::vector<Axiom>(std::begin(kAllAxioms), std::end(kAllAxioms))
                                                     : c.axioms;
  const double exact_tol = is_shapley(m) ? 1e-9 : 1e-12;
  std::vector<AxiomReport> reports;
  for (auto axiom : axioms) {
    const auto seed = stream_seed(c.seed, static_cast<std::uint64_t>(axiom));
    switch (axiom) {
      case Axiom::Completeness: {
        std::vector<AxiomReport> parts;
        for (const auto& x : audit_points(c, n, c.trials, seed)) {
          parts.push_back(audit_completeness_at(g, m, x, c, exec));
          if (parts.back().verdict == Verdict::Fail) break;
        }
        reports.push_back(fold_reports(axiom, m, c.completeness_tolerance, std::move(parts)));
        break;
      }
      case Axiom::SensitivityA: {
        SensitivityOptions opt;
        opt.trials = c.trials;
        opt.attribution_tolerance = c.sensitivity_tolerance;
        opt.difference_floor = c.sensitivity_floor;
        opt.seed = seed;
        opt.box = c.box;
        if (c.input) {
          const auto xb = resolve_baseline(c.baseline, *c.input);
          std::size_t differing = 0;
          for (std::size_t i = 0; i < n; ++i) differing += (*c.input)[i] != xb[i];
          if (differing == 1) opt.probes.emplace_back(*c.input, xb);
        }
        reports.push_back(check_sensitivity_a(g, m, opt, exec));
        break;
      }
      case Axiom::SensitivityBDummy: {
        DummyOptions opt{std::min<std::size_t>(c.trials, 20), c.dummy_tolerance, seed, c.box};
        if (c.dummy_index) {
          reports.push_back(check_sensitivity_b_dummy(g, m, *c.dummy_index, opt, exec));
          break;
        }
        const auto support = structural_support(g);
        const auto unwired = std::find(support.begin(), support.end(), false);
        if (unwired != support.end()) {
          const auto dummy = static_cast<std::size_t>(unwired - support.begin());
          reports.push_back(check_sensitivity_b_dummy(g, m, dummy, opt, exec));
        } else {
          auto r = check_sensitivity_b_dummy(with_unwired_feature(g), m, n, opt, exec);
          r.detail += " (model extended with unwired feature " + std::to_string(n) + ")";
          reports.push_back(std::move(r));
        }
        break;
      }
      case Axiom::Linearity: {
        const double tol = c.linearity_tolerance.value_or(exact_tol);
        const auto other = build_fixture(fixture::Linear{std::vector<double>(n, 1.0), 0.0});
        std::vector<AxiomReport> parts;
        for (const auto& x : audit_points(c, n, c.point_trials, seed)) {
          parts.push_back(check_linearity(g, other, 2.0, 0.5, m, x, c.baseline, tol, exec));
          if (parts.back().verdict == Verdict::Fail) break;
        }
        auto r = fold_reports(axiom, m, tol, std::move(parts));
        r.detail += " (partner: linear model with unit weights)";
        reports.push_back(std::move(r));
        break;
      }
      case Axiom::ImplementationInvariance: {
        EquivalencePair pair{g, c.partner ? *c.partner : cloned_halves(g), {-5.0, 5.0}, 1000, seed};
        auto r = check_implementation_invariance(pair, m, audit_points(c, n, c.trials, stream_seed(seed, 2)),
                                                 c.baseline, c.invariance_tolerance, exec);
        if (!c.partner) r.detail += " (partner: cloned halves 0.5*F + 0.5*F)";
        reports.push_back(std::move(r));
        break;
      }
      case Axiom::Symmetry:
        reports.push_back(audit_symmetry(g, m, c, c.symmetry_tolerance.value_or(exact_tol), seed, exec));
        break;
    }
  }
  return reports;
}

/// Re-runs the method on a failure witness and confirms both that the recorded
/// attributions are reproduced bit-for-bit and that the violation still holds.
/// `audited` is the model the report was produced on; linearity and
/// implementation-invariance witnesses also need the partner model.
inline bool witness_reproduces(const AxiomReport& r, const ModelGraph& audited, const MethodSpec& m,
                               const ModelGraph* partner = nullptr) {
  if (r.verdict != Verdict::Fail || !r.witness) return false;
  const auto& w = *r.witness;
  const BaselineSpec baseline = ExplicitBaseline{w.baseline};
  auto same = [](const Tensor& a, const Tensor& b) { return a.values() == b.values(); };
  switch (r.axiom) {
    case Axiom::Completeness: {
      const auto res = attribute(audited, w.input, baseline, m);
      const double delta = std::abs(res.output_at_input - res.output_at_baseline);
      return same(res.values, w.attributions.at(0)) && res.completeness_gap > r.tolerance * std::max(1.0, delta);
    }
    case Axiom::SensitivityA: {
      const auto res = attribute(audited, w.input, baseline, m);
      const auto f = w.feature.value();
      return same(res.values, w.attributions.at(0)) && res.output_at_input != res.output_at_baseline &&
             std::abs(res.values[f]) <= r.tolerance;
    }
    case Axiom::SensitivityBDummy: {
      const auto res = attribute(audited, w.input, baseline, m);
      return same(res.values, w.attributions.at(0)) && std::abs(res.values[w.feature.value()]) > r.tolerance;
    }
    case Axiom::Linearity: {
      if (!partner || w.coefficients.size() != 2) return false;
      const auto composite = linear_combination(audited, *partner, w.coefficients[0], w.coefficients[1]);
      const auto rc = attribute(composite, w.input, baseline, m);
      const auto r1 = attribute(audited, w.input, baseline, m);
      const auto r2 = attribute(*partner, w.input, baseline, m);
      const auto i = w.feature.value();
      const double expected = w.coefficients[0] * r1.values[i] + w.coefficients[1] * r2.values[i];
      return same(rc.values, w.attributions.at(0)) &&
             std::abs(rc.values[i] - expected) > r.tolerance * std::max(1.0, std::abs(expected));
    }
    case Axiom::ImplementationInvariance: {
      if (!partner) return false;
      const auto ra = attribute(audited, w.input, baseline, m);
      const auto rb = attribute(*partner, w.input, baseline, m);
      return same(ra.values, w.attributions.at(0)) && same(rb.values, w.attributions.at(1)) &&
             detail::max_abs_diff(ra.values, rb.values) > r.tolerance;
    }
    case Axiom::Symmetry: {
      const auto res = attribute(audited, w.input, baseline, m);
      return same(res.values, w.attributions.at(0)) &&
             std::abs(res.values[w.feature.value()] - res.values[w.other_feature.value()]) > r.tolerance;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Report documents

inline nlohmann::json report_to_json(const AxiomReport& r) {
  using nlohmann::json;
  json j = {{"axiom", axiom_name(r.axiom)},
            {"verdict", verdict_name(r.verdict)},
            {"method", r.method},
            {"trials", r.trials},
            {"tolerance", r.tolerance},
            {"detail", r.detail},
            {"witness", nullptr}};
  if (r.witness) {
    const auto& w = *r.witness;
    json attributions = json::array();
    for (const auto& a : w.attributions) attributions.push_back(a.values());
    j["witness"] = {{"input", w.input.values()},
                    {"baseline", w.baseline.values()},
                    {"attributions", attributions},
                    {"gaps", w.gaps},
                    {"feature", w.feature ? json(*w.feature) : json(nullptr)},
                    {"other_feature", w.other_feature ? json(*w.other_feature) : json(nullptr)},
                    {"coefficients", w.coefficients},
                    {"detail", w.detail}};
  }
  return j;
}

inline AxiomReport report_from_json(const nlohmann::json& j) {
  AxiomReport r;
  const auto axiom = parse_axiom(j.at("axiom").get<std::string>());
  if (!axiom) throw ValidationError("unknown axiom '" + j.at("axiom").get<std::string>() + "'");
  r.axiom = *axiom;
  const auto verdict = j.at("verdict").get<std::string>();
  r.verdict = verdict == "pass" ? Verdict::Pass : verdict == "fail" ? Verdict::Fail : Verdict::Inconclusive;
  r.method = j.at("method").get<std::string>();
  r.trials = j.at("trials").get<std::size_t>();
  r.tolerance = j.at("tolerance").get<double>();
  r.detail = j.at("detail").get<std::string>();
  if (!j.at("witness").is_null()) {
    const auto& wj = j.at("witness");
    Witness w;
    w.input = Tensor::vector(wj.at("input").get<std::vector<double>>());
    w.baseline = Tensor::vector(wj.at("baseline").get<std::vector<double>>());
    for (const auto& a : wj.at("attributions")) w.attributions.push_back(Tensor::vector(a.get<std::vector<double>>()));
    w.gaps = wj.at("gaps").get<std::vector<double>>();
    if (!wj.at("feature").is_null()) w.feature = wj.at("feature").get<std::size_t>();
    if (!wj.at("other_feature").is_null()) w.other_feature = wj.at("other_feature").get<std::size_t>();
    w.coefficients = wj.at("coefficients").get<std::vector<double>>();
    w.detail = wj.at("detail").get<std::string>();
    r.witness = std::move(w);
  }
  return r;
}

}  // namespace intgrad
