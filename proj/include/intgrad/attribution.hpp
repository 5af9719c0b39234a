#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "intgrad/detail/parallel.hpp"
#include "intgrad/engine.hpp"
#include "intgrad/error.hpp"
#include "intgrad/graph.hpp"
#include "intgrad/tensor.hpp"

namespace intgrad {

// ---------------------------------------------------------------------------
// Baselines

struct ZerosBaseline {};
struct ConstantBaseline {
  double value = 0.0;
};
struct ExplicitBaseline {
  Tensor values;
};
using BaselineSpec = std::variant<ZerosBaseline, ConstantBaseline, ExplicitBaseline>;

/// Baseline with the same shape as `like`.
inline Tensor resolve_baseline(const BaselineSpec& spec, const Tensor& like) {
  return std::visit(overloaded{
                        [&](const ZerosBaseline&) { return Tensor::zeros(like.shape()); },
                        [&](const ConstantBaseline& c) { return Tensor::filled(like.shape(), c.value); },
                        [&](const ExplicitBaseline& e) {
                          if (e.values.size() != like.size()) {
                            throw ValidationError("baseline has " + std::to_string(e.values.size()) +
                                                  " values but the input has " +
                                                  std::to_string(like.size()));
                          }
                          return Tensor(like.shape(), e.values.values());
                        },
                    },
                    spec);
}

// ---------------------------------------------------------------------------
// Quadrature and paths

enum class RiemannRule { Left, Right, Midpoint, Trapezoid };

inline std::string_view riemann_rule_name(RiemannRule r) {
  switch (r) {
    case RiemannRule::Left: return "left";
    case RiemannRule::Right: return "right";
    case RiemannRule::Midpoint: return "midpoint";
    case RiemannRule::Trapezoid: return "trapezoid";
  }
  return "right";
}

/// m sub-intervals of [0, 1]. The right rule is the default: it samples
/// k/m for k = 1..m.
struct RiemannConfig {
  std::size_t steps = 50;
  RiemannRule rule = RiemannRule::Right;
};

namespace path {
struct Straightline {};
/// Interior waypoints; the baseline and the input are the implicit endpoints.
struct Polyline {
  std::vector<Tensor> waypoints;
};
/// Moves one feature at a time from baseline to input, in `order`.
struct AxisSequential {
  std::vector<std::size_t> order;
};
}  // namespace path

using PathSpec = std::variant<path::Straightline, path::Polyline, path::AxisSequential>;

// ---------------------------------------------------------------------------
// Methods

namespace method {
struct Gradients {};
struct GradTimesInput {};
struct IntegratedGradients {
  RiemannConfig config;
};
struct PathMethod {
  PathSpec path;
  RiemannConfig config;
};
struct ShapleyExact {};
struct ShapleySampled {
  std::size_t orderings = 1000;
  std::uint64_t seed = 0;
};
struct ShapleyShubik {
  std::variant<ShapleyExact, ShapleySampled> mode;
};
enum class DiscreteVariant { DeepLiftRescale, LrpZeroBaseline };
struct DiscreteGradient {
  DiscreteVariant variant = DiscreteVariant::DeepLiftRescale;
};
/// Deconvnet or guided backpropagation (standard is rejected).
struct ModifiedBackprop {
  BackpropRule rule = BackpropRule::Guided;
};
}  // namespace method

using MethodSpec = std::variant<method::Gradients, method::GradTimesInput, method::IntegratedGradients,
                                method::PathMethod, method::ShapleyShubik, method::DiscreteGradient,
                                method::ModifiedBackprop>;

inline std::string method_name(const MethodSpec& m) {
  return std::visit(
      overloaded{
          [](const method::Gradients&) { return std::string("gradients"); },
          [](const method::GradTimesInput&) { return std::string("grad_times_input"); },
          [](const method::IntegratedGradients&) { return std::string("integrated_gradients"); },
          [](const method::PathMethod&) { return std::string("path_method"); },
          [](const method::ShapleyShubik& s) {
            return std::string(std::holds_alternative<method::ShapleyExact>(s.mode)
                                   ? "shapley_shubik_exact"
                                   : "shapley_shubik_sampled");
          },
          [](const method::DiscreteGradient& d) {
            return std::string(d.variant == method::DiscreteVariant::DeepLiftRescale ? "deeplift_rescale"
                                                                                     : "lrp_zero_baseline");
          },
          [](const method::ModifiedBackprop& b) { return std::string(rule_name(b.rule)); },
      },
      m);
}

struct AttributionResult {
  Tensor values;
  MethodSpec method;
  double output_at_input = 0.0;
  double output_at_baseline = 0.0;
  /// |sum(values) - (F(x) - F(x'))|, always recomputed from two forward calls.
  double completeness_gap = 0.0;
  /// Forward plus gradient evaluations, including the two for the gap.
  std::size_t model_calls = 0;
};

struct ExecutionOptions {
  unsigned threads = 1;
};

namespace detail {

inline void check_shapes(const ModelGraph& g, const Tensor& x, const Tensor& baseline) {
  if (x.size() != g.input_arity()) {
    throw ValidationError("input has " + std::to_string(x.size()) + " features but the model expects " +
                          std::to_string(g.input_arity()));
  }
  if (baseline.size() != x.size()) {
    throw ValidationError("baseline has " + std::to_string(baseline.size()) +
                          " values but the input has " + std::to_string(x.size()));
  }
}

inline AttributionResult finish(const ModelGraph& g, const Tensor& x, const Tensor& baseline,
                                std::vector<double> values, MethodSpec method, std::size_t calls) {
  AttributionResult r{Tensor(x.shape(), std::move(values)), std::move(method)};
  r.output_at_input = evaluate(g, x.span());
  r.output_at_baseline = evaluate(g, baseline.span());
  double total = 0.0;
  for (double v : r.values.values()) total += v;
  r.completeness_gap = std::abs(total - (r.output_at_input - r.output_at_baseline));
  r.model_calls = calls + 2;
  return r;
}

/// Waypoint skeleton x' = p_0, ..., p_s = x of a path, validated monotone.
inline std::vector<std::vector<double>> resolve_path(const PathSpec& spec, const Tensor& x,
                                                     const Tensor& baseline) {
  const auto& to = x.values();
  const auto& from = baseline.values();
  const auto n = to.size();
  std::vector<std::vector<double>> skeleton{from};
  std::visit(overloaded{
                 [](const path::Straightline&) {},
                 [&](const path::Polyline& p) {
                   for (std::size_t k = 0; k < p.waypoints.size(); ++k) {
                     if (p.waypoints[k].size() != n) {
                       throw ValidationError("path waypoint " + std::to_string(k) + " has " +
                                             std::to_string(p.waypoints[k].size()) + " values, expected " +
                                             std::to_string(n));
                     }
                     skeleton.push_back(p.waypoints[k].values());
                   }
                 },
                 [&](const path::AxisSequential& a) {
                   std::vector<std::size_t> sorted = a.order;
                   std::sort(sorted.begin(), sorted.end());
                   for (std::size_t k = 0; k < sorted.size(); ++k) {
                     if (sorted[k] != k || sorted.size() != n) {
                       throw ValidationError("axis order must be a permutation of 0.." + std::to_string(n - 1));
                     }
                   }
                   auto point = from;
                   for (std::size_t k = 0; k + 1 < a.order.size(); ++k) {
                     point[a.order[k]] = to[a.order[k]];
                     skeleton.push_back(point);
                   }
                 },
             },
             spec);
  skeleton.push_back(to);

  for (std::size_t i = 0; i < n; ++i) {
    const double dir = to[i] - from[i];
    for (std::size_t k = 0; k + 1 < skeleton.size(); ++k) {
      const double step = skeleton[k + 1][i] - skeleton[k][i];
      const bool ok = dir > 0 ? step >= 0 : (dir < 0 ? step <= 0 : step == 0);
      if (!ok) {
        throw ValidationError("non-monotone path: feature " + std::to_string(i) + " moves against its "
                              "baseline-to-input direction on segment " + std::to_string(k));
      }
    }
  }
  return skeleton;
}

struct QuadratureNode {
  std::size_t segment;
  double u;
  double weight;
};

/// Sample positions u in [0, 1] within one segment of q sub-intervals.
inline void append_rule(std::vector<QuadratureNode>& out, std::size_t segment, std::size_t q,
                        RiemannRule rule) {
  const double dq = static_cast<double>(q);
  const double w = 1.0 / dq;
  switch (rule) {
    case RiemannRule::Right:
      for (std::size_t k = 1; k <= q; ++k) out.push_back({segment, static_cast<double>(k) / dq, w});
      break;
    case RiemannRule::Left:
      for (std::size_t k = 0; k < q; ++k) out.push_back({segment, static_cast<double>(k) / dq, w});
      break;
    case RiemannRule::Midpoint:
      for (std::size_t k = 0; k < q; ++k) {
        out.push_back({segment, (static_cast<double>(k) + 0.5) / dq, w});
      }
      break;
    case RiemannRule::Trapezoid:
      for (std::size_t k = 0; k <= q; ++k) {
        out.push_back({segment, static_cast<double>(k) / dq, (k == 0 || k == q) ? 0.5 * w : w});
      }
      break;
  }
}

/// Path integral of the gradient along a waypoint skeleton. Each segment
/// receives an equal share of the m sub-intervals (remainder to the earliest
/// segments) and is integrated with the configured rule; contributions are
/// accumulated in ascending sample order.
inline AttributionResult integrate_path(const ModelGraph& g, const Tensor& x, const Tensor& baseline,
                                        const std::vector<std::vector<double>>& skeleton,
                                        const RiemannConfig& config, MethodSpec method,
                                        const ExecutionOptions& exec) {
  const auto n = x.size();
  if (config.steps == 0) throw ValidationError("Riemann steps must be at least 1");
  if (x.values() == baseline.values()) {
    return finish(g, x, baseline, std::vector<double>(n, 0.0), std::move(method), 0);
  }
  const std::size_t segments = skeleton.size() - 1;
  if (config.steps < segments) {
    throw ValidationError("Riemann steps (" + std::to_string(config.steps) +
                          ") must be at least the number of path segments (" + std::to_string(segments) + ")");
  }

  std::vector<QuadratureNode> nodes;
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t q = config.steps / segments + (s < config.steps % segments ? 1 : 0);
    append_rule(nodes, s, q, config.rule);
  }

  std::vector<std::vector<double>> grads(nodes.size());
  parallel_for(nodes.size(), exec.threads, [&](std::size_t k) {
    const auto& node = nodes[k];
    const auto& a = skeleton[node.segment];
    const auto& b = skeleton[node.segment + 1];
    std::vector<double> point(n);
    for (std::size_t i = 0; i < n; ++i) point[i] = a[i] + node.u * (b[i] - a[i]);
    grads[k] = gradient_from_trace(g, trace(g, point));
  });

  std::vector<std::vector<double>> sums(segments, std::vector<double>(n, 0.0));
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    auto& sum = sums[nodes[k].segment];
    for (std::size_t i = 0; i < n; ++i) sum[i] += nodes[k].weight * grads[k][i];
  }
  std::vector<double> values(n, 0.0);
  for (std::size_t s = 0; s < segments; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      values[i] += (skeleton[s + 1][i] - skeleton[s][i]) * sums[s][i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(values[i])) throw NumericError("non-finite attribution for feature " + std::to_string(i));
  }
  return finish(g, x, baseline, std::move(values), std::move(method), nodes.size());
}

template <class Allowed>
void require_ops(const ModelGraph& g, const std::string& method, Allowed allowed) {
  for (const auto& node : g.nodes()) {
    if (!std::visit(allowed, node.op)) {
      throw ValidationError(method + " does not support op '" + std::string(op_name(node.op)) +
                            "' (node '" + node.id + "')");
    }
  }
}

inline std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) { return rng() % bound; }

}  // namespace detail

/// Straight-line path integral of gradients, approximated by a Riemann sum.
inline AttributionResult integrated_gradients(const ModelGraph& g, const Tensor& x, const BaselineSpec& baseline,
                                              const RiemannConfig& config = {},
                                              const ExecutionOptions& exec = {}) {
  const auto xb = resolve_baseline(baseline, x);
  detail::check_shapes(g, x, xb);
  return detail::integrate_path(g, x, xb, {xb.values(), x.values()}, config, method::IntegratedGradients{config},
                                exec);
}

/// Path integral of gradients along a monotone path from baseline to input.
inline AttributionResult path_integrated_gradients(const ModelGraph& g, const Tensor& x,
                                                   const BaselineSpec& baseline, const PathSpec& path,
                                                   const RiemannConfig& config = {},
                                                   const ExecutionOptions& exec = {}) {
  const auto xb = resolve_baseline(baseline, x);
  detail::check_shapes(g, x, xb);
  const auto skeleton = detail::resolve_path(path, x, xb);
  return detail::integrate_path(g, x, xb, skeleton, config, method::PathMethod{path, config}, exec);
}

/// dF/dx_i at x. The baseline only feeds the completeness bookkeeping.
inline AttributionResult vanilla_gradients(const ModelGraph& g, const Tensor& x,
                                           const BaselineSpec& baseline = ZerosBaseline{}) {
  const auto xb = resolve_baseline(baseline, x);
  detail::check_shapes(g, x, xb);
  return detail::finish(g, x, xb, gradient(g, x).values(), method::Gradients{}, 1);
}

/// dF/dx_i * (x_i - x'_i).
inline AttributionResult grad_times_input(const ModelGraph& g, const Tensor& x,
                                          const BaselineSpec& baseline = ZerosBaseline{}) {
  const auto xb = resolve_baseline(baseline, x);
  detail::check_shapes(g, x, xb);
  auto values = gradient(g, x).values();
  for (std::size_t i = 0; i < values.size(); ++i) values[i] *= x[i] - xb[i];
  return detail::finish(g, x, xb, std::move(values), method::GradTimesInput{}, 1);
}

inline constexpr std::size_t kMaxExactShapleyFeatures = 16;

/// Shapley value of the game S -> F(x on S, x' elsewhere). Exact mode
/// enumerates all 2^n coalitions; sampled mode averages marginal
/// contributions over seeded random orderings.
inline AttributionResult shapley_shubik(const ModelGraph& g, const Tensor& x, const BaselineSpec& baseline,
                                        const std::variant<method::ShapleyExact, method::ShapleySampled>& mode,
                                        const ExecutionOptions& exec = {}) {
  const auto xb = resolve_baseline(baseline, x);
  detail::check_shapes(g, x, xb);
  const auto n = x.size();
  const auto& on = x.values();
  const auto& off = xb.values();

  if (std::holds_alternative<method::ShapleyExact>(mode)) {
    if (n > kMaxExactShapleyFeatures) {
      throw ValidationError("exact Shapley-Shubik supports at most " + std::to_string(kMaxExactShapleyFeatures) +
                            " features, the model has " + std::to_string(n) + "; use sampled mode");
    }
    const std::size_t coalitions = std::size_t{1} << n;
    std::vector<double> worth(coalitions);
    detail::parallel_for(coalitions, exec.threads, [&](std::size_t mask) {
      std::vector<double> hybrid(n);
      for (std::size_t i = 0; i < n; ++i) hybrid[i] = (mask >> i) & 1U ? on[i] : off[i];
      worth[mask] = evaluate(g, hybrid);
    });
    // weight[s] = s! (n - s - 1)! / n! = 1 / (n * C(n - 1, s))
    std::vector<double> weight(n);
    double choose = 1.0;
    for (std::size_t s = 0; s < n; ++s) {
      weight[s] = 1.0 / (static_cast<double>(n) * choose);
      choose = choose * static_cast<double>(n - 1 - s) / static_cast<double>(s + 1);
    }
    std::vector<double> values(n, 0.0);
    for (std::size_t mask = 0; mask < coalitions; ++mask) {
      const auto size = static_cast<std::size_t>(std::popcount(mask));
      for (std::size_t i = 0; i < n; ++i) {
        if ((mask >> i) & 1U) continue;
        values[i] += weight[size] * (worth[mask | (std::size_t{1} << i)] - worth[mask]);
      }
    }
    return detail::finish(g, x, xb, std::move(values), method::ShapleyShubik{mode}, coalitions);
  }

  const auto& sampled = std::get<method::ShapleySampled>(mode);
  if (sampled.orderings == 0) throw ValidationError("sampled Shapley-Shubik needs at least one ordering");
  std::mt19937_64 rng(sampled.seed);
  std::vector<std::vector<std::size_t>> orders(sampled.orderings);
  for (auto& order : orders) {
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t k = n; k > 1; --k) {
      std::swap(order[k - 1], order[detail::bounded_draw(rng, k)]);
    }
  }
  const double start = evaluate(g, off);
  std::vector<std::vector<double>> marginals(orders.size());
  detail::parallel_for(orders.size(), exec.threads, [&](std::size_t k) {
    std::vector<double> point = off;
    std::vector<double> m(n, 0.0);
    double prev = start;
    for (auto f : orders[k]) {
      point[f] = on[f];
      const double next = evaluate(g, point);
      m[f] = next - prev;
      prev = next;
    }
    marginals[k] = std::move(m);
  });
  std::vector<double> values(n, 0.0);
  for (const auto& m : marginals) {
    for (std::size_t i = 0; i < n; ++i) values[i] += m[i];
  }
  for (auto& v : values) v /= static_cast<double>(orders.size());
  return detail::finish(g, x, xb, std::move(values), method::ShapleyShubik{mode}, 1 + orders.size() * n);
}

/// Discrete-gradient backpropagation with the rescale rule: every activation
/// contributes the multiplier (f(z) - f(z')) / (z - z') between its input and
/// baseline pre-activations, falling back to f'(z) when |z - z'| < 1e-9.
/// Multipliers compose by the chain rule; attribution_i = multiplier_i *
/// (x_i - x'_i). The LRP variant runs the same engine against a zero baseline.
inline AttributionResult discrete_gradient_backprop(const ModelGraph& g, const Tensor& x,
                                                    const BaselineSpec& baseline,
                                                    method::DiscreteVariant variant) {
  const MethodSpec spec = method::DiscreteGradient{variant};
  detail::require_ops(g, method_name(spec),
                      overloaded{[](const op::Multiply&) { return false; }, [](const op::Min&) { return false; },
                                 [](const op::Max&) { return false; },
                                 [](const op::SymmetryCex&) { return false; }, [](const auto&) { return true; }});
  const auto xb = variant == method::DiscreteVariant::LrpZeroBaseline ? Tensor::zeros(x.shape())
                                                                      : resolve_baseline(baseline, x);
  detail::check_shapes(g, x, xb);
  const auto tx = trace(g, x.span());
  const auto tb = trace(g, xb.span());
  constexpr double kRescaleFloor = 1e-9;
  auto multipliers = detail::backpropagate(g, tx, [&](std::size_t p, std::size_t e, double up) {
    const auto in = g.operands(p)[0];
    const double dz = tx.values[in][e] - tb.values[in][e];
    if (std::abs(dz) < kRescaleFloor) {
      return detail::activation_backward(g, tx, p, e, up, BackpropRule::Standard);
    }
    return up * ((tx.values[p][e] - tb.values[p][e]) / dz);
  });
  for (std::size_t i = 0; i < multipliers.size(); ++i) multipliers[i] *= x[i] - xb[i];
  return detail::finish(g, x, xb, std::move(multipliers), spec, 2);
}

/// Deconvnet / guided backpropagation signal times the input value. The
/// baseline only feeds the completeness bookkeeping.
inline AttributionResult modified_backprop_attribution(const ModelGraph& g, const Tensor& x, BackpropRule rule,
                                                       const BaselineSpec& baseline = ZerosBaseline{}) {
  if (rule == BackpropRule::Standard) {
    throw ValidationError("modified backprop needs the deconvnet or guided rule");
  }
  const MethodSpec spec = method::ModifiedBackprop{rule};
  detail::require_ops(g, method_name(spec),
                      overloaded{[](const op::Input&) { return true; }, [](const op::Constant&) { return true; },
                                 [](const op::Dense&) { return true; }, [](const op::Relu&) { return true; },
                                 [](const op::Add&) { return true; }, [](const op::Subtract&) { return true; },
                                 [](const op::Scale&) { return true; }, [](const op::SumReduce&) { return true; },
                                 [](const auto&) { return false; }});
  const auto xb = resolve_baseline(baseline, x);
  detail::check_shapes(g, x, xb);
  auto values = gradient(g, x, rule).values();
  for (std::size_t i = 0; i < values.size(); ++i) values[i] *= x[i];
  return detail::finish(g, x, xb, std::move(values), spec, 1);
}

/// Dispatches on the method tag.
inline AttributionResult attribute(const ModelGraph& g, const Tensor& x, const BaselineSpec& baseline,
                                   const MethodSpec& m, const ExecutionOptions& exec = {}) {
  return std::visit(
      overloaded{
          [&](const method::Gradients&) { return vanilla_gradients(g, x, baseline); },
          [&](const method::GradTimesInput&) { return grad_times_input(g, x, baseline); },
          [&](const method::IntegratedGradients& ig) { return integrated_gradients(g, x, baseline, ig.config, exec); },
          [&](const method::PathMethod& p) {
            return path_integrated_gradients(g, x, baseline, p.path, p.config, exec);
          },
          [&](const method::ShapleyShubik& s) { return shapley_shubik(g, x, baseline, s.mode, exec); },
          [&](const method::DiscreteGradient& d) { return discrete_gradient_backprop(g, x, baseline, d.variant); },
          [&](const method::ModifiedBackprop& b) { return modified_backprop_attribution(g, x, b.rule, baseline); },
      },
      m);
}

// ---------------------------------------------------------------------------
// Step selection and baseline checks

struct AdaptiveConfig {
  double tolerance_fraction = 0.05;
  std::size_t min_steps = 20;
  std::size_t max_steps = 300;
  RiemannRule rule = RiemannRule::Right;
};

struct StepSelection {
  /// Steps of the accepted result, or of the best attempt when not converged.
  std::size_t steps = 0;
  AttributionResult result;
  bool converged = false;
  /// (m, completeness gap) for every attempt, in order.
  std::vector<std::pair<std::size_t, double>> trajectory;
};

/// Integrated gradients with m doubled from min_steps until the completeness
/// gap is within tolerance_fraction * |F(x) - F(x')|. The last doubling is
/// clamped to max_steps; `converged` is false if no attempt passed.
inline StepSelection adaptive_steps(const ModelGraph& g, const Tensor& x, const BaselineSpec& baseline,
                                    const AdaptiveConfig& config = {}, const ExecutionOptions& exec = {}) {
  if (!(config.tolerance_fraction > 0.0 && config.tolerance_fraction < 1.0)) {
    throw ValidationError("tolerance fraction must lie in (0, 1)");
  }
  if (config.min_steps == 0 || config.min_steps > config.max_steps) {
    throw ValidationError("step bounds must satisfy 1 <= min <= max");
  }
  StepSelection best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t m = config.min_steps;; m = std::min(2 * m, config.max_steps)) {
    auto r = integrated_gradients(g, x, baseline, {m, config.rule}, exec);
    const double delta = std::abs(r.output_at_input - r.output_at_baseline);
    best.trajectory.emplace_back(m, r.completeness_gap);
    const bool pass = delta < 1e-12 || r.completeness_gap <= config.tolerance_fraction * delta;
    if (pass || r.completeness_gap < best_gap) {
      best_gap = r.completeness_gap;
      best.steps = m;
      best.result = std::move(r);
    }
    if (pass) {
      best.converged = true;
      break;
    }
    if (m == config.max_steps) break;
  }
  return best;
}

struct BaselineVerdict {
  double score = 0.0;  ///< |F(x')|
  double threshold = 0.0;
  bool pass = false;
};

/// A usable baseline should score near zero.
inline BaselineVerdict validate_baseline(const ModelGraph& g, const Tensor& baseline, double threshold) {
  const double score = std::abs(evaluate(g, baseline.span()));
  return {score, threshold, score <= threshold};
}

inline BaselineVerdict validate_baseline(const ModelGraph& g, const BaselineSpec& baseline, double threshold) {
  return validate_baseline(g, resolve_baseline(baseline, Tensor::zeros({g.input_arity()})), threshold);
}

}  // namespace intgrad
