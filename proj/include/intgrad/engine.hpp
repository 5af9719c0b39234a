#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "intgrad/error.hpp"
#include "intgrad/graph.hpp"
#include "intgrad/tensor.hpp"

namespace intgrad {

/// How a ReLU node passes the backward signal.
///  - standard:  pass iff the forward pre-activation is > 0 (derivative 0 at 0)
///  - deconvnet: pass iff the incoming signal is > 0, ignoring the forward pass
///  - guided:    pass iff both hold
enum class BackpropRule { Standard, Deconvnet, Guided };

inline std::string_view rule_name(BackpropRule r) {
  switch (r) {
    case BackpropRule::Standard: return "standard";
    case BackpropRule::Deconvnet: return "deconvnet";
    case BackpropRule::Guided: return "guided";
  }
  return "standard";
}

/// Per-node forward values for one input, indexed like ModelGraph::nodes().
struct EvalTrace {
  std::vector<std::vector<double>> values;

  double output(const ModelGraph& g) const { return values[g.output_index()][0]; }
};

struct ForwardResult {
  double value = 0.0;
  EvalTrace trace;
};

namespace detail {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double clamp_between(double x, double a, double b) { return std::clamp(x, a, b); }

/// 1 strictly inside (a, b); boundaries belong to the flat side.
inline double clamp_slope(double x, double a, double b) { return (a < x && x < b) ? 1.0 : 0.0; }

inline double symmetry_cex_value(const op::SymmetryCex& o, double xi, double xj) {
  return (clamp_between(xi, o.a, o.b) - o.a) * (clamp_between(xj, o.a, o.b) - o.a);
}

inline void check_input(const ModelGraph& g, std::span<const double> input) {
  if (input.size() != g.input_arity()) {
    throw ValidationError("input has " + std::to_string(input.size()) +
                          " features but the model expects " +
                          std::to_string(g.input_arity()));
  }
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (!std::isfinite(input[i])) {
      throw NumericError("input feature " + std::to_string(i) + " is not finite");
    }
  }
}

// Element e of an operand, broadcasting length-1 operands.
inline double elem(const std::vector<double>& v, std::size_t e) {
  return v.size() == 1 ? v[0] : v[e];
}

inline std::vector<double> evaluate_node(const ModelGraph& g, std::size_t p,
                                         const std::vector<std::vector<double>>& values,
                                         std::span<const double> input) {
  const auto& in = g.operands(p);
  const auto w = g.width(p);
  std::vector<double> out(w);
  auto binary = [&](auto fn) {
    const auto& a = values[in[0]];
    const auto& b = values[in[1]];
    for (std::size_t e = 0; e < w; ++e) out[e] = fn(elem(a, e), elem(b, e));
  };
  auto unary = [&](auto fn) {
    const auto& a = values[in[0]];
    for (std::size_t e = 0; e < w; ++e) out[e] = fn(a[e]);
  };
  std::visit(
      overloaded{
          [&](const op::Input& o) {
            std::copy_n(input.begin() + static_cast<std::ptrdiff_t>(o.offset), o.size, out.begin());
          },
          [&](const op::Constant& o) { out = o.values; },
          [&](const op::Dense& o) {
            const auto& x = values[in[0]];
            for (std::size_t r = 0; r < o.rows; ++r) {
              double acc = o.bias[r];
              for (std::size_t c = 0; c < o.cols; ++c) acc += o.weight(r, c) * x[c];
              out[r] = acc;
            }
          },
          [&](const op::Relu&) { unary([](double x) { return x > 0.0 ? x : 0.0; }); },
          [&](const op::Sigmoid&) { unary(sigmoid); },
          [&](const op::Tanh&) { unary([](double x) { return std::tanh(x); }); },
          [&](const op::Add&) { binary([](double a, double b) { return a + b; }); },
          [&](const op::Subtract&) { binary([](double a, double b) { return a - b; }); },
          [&](const op::Scale& o) { unary([f = o.factor](double x) { return f * x; }); },
          [&](const op::Multiply&) { binary([](double a, double b) { return a * b; }); },
          [&](const op::Min&) { binary([](double a, double b) { return b < a ? b : a; }); },
          [&](const op::Max&) { binary([](double a, double b) { return b > a ? b : a; }); },
          [&](const op::SumReduce&) {
            double acc = 0.0;
            for (double v : values[in[0]]) acc += v;
            out[0] = acc;
          },
          [&](const op::SymmetryCex& o) {
            const auto& x = values[in[0]];
            out[0] = symmetry_cex_value(o, x[o.i], x[o.j]);
          },
      },
      g.node(p).op);
  for (double v : out) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite value at node '" + g.node(p).id + "'");
    }
  }
  return out;
}

}  // namespace detail

/// Runs the graph on `input` and records every node's value.
inline EvalTrace trace(const ModelGraph& g, std::span<const double> input) {
  detail::check_input(g, input);
  EvalTrace t;
  t.values.resize(g.node_count());
  for (std::size_t p = 0; p < g.node_count(); ++p) {
    t.values[p] = detail::evaluate_node(g, p, t.values, input);
  }
  return t;
}

inline ForwardResult forward(const ModelGraph& g, const Tensor& input) {
  ForwardResult r;
  r.trace = trace(g, input.span());
  r.value = r.trace.output(g);
  return r;
}

/// F(input) without keeping the trace around.
inline double evaluate(const ModelGraph& g, std::span<const double> input) {
  return trace(g, input).output(g);
}

namespace detail {

/// Reverse-mode accumulation over a recorded trace. Min/max split the signal
/// evenly between tied operands; ReLU has derivative 0 at 0. `activation` decides the
/// backward signal of relu/sigmoid/tanh nodes:
///   double activation(std::size_t node, std::size_t elem, double upstream)
/// Every other op uses its exact local derivative. Returns d(output)/d(feature)
/// in external feature order.
template <class Activation>
std::vector<double> backpropagate(const ModelGraph& g, const EvalTrace& t,
                                  Activation&& activation) {
  std::vector<std::vector<double>> grad(g.node_count());
  for (std::size_t p = 0; p < g.node_count(); ++p) grad[p].assign(g.width(p), 0.0);
  grad[g.output_index()][0] = 1.0;

  std::vector<double> result(g.input_arity(), 0.0);
  for (std::size_t p = g.node_count(); p-- > 0;) {
    const auto& up = grad[p];
    const auto& in = g.operands(p);
    const auto w = g.width(p);
    // Accumulate into operand k at element e, folding broadcast operands.
    auto push = [&](std::size_t k, std::size_t e, double v) {
      auto& dst = grad[in[k]];
      dst[dst.size() == 1 ? 0 : e] += v;
    };
    std::visit(
        overloaded{
            [&](const op::Input& o) {
              for (std::size_t e = 0; e < w; ++e) result[o.offset + e] += up[e];
            },
            [&](const op::Constant&) {},
            [&](const op::Dense& o) {
              auto& dst = grad[in[0]];
              for (std::size_t r = 0; r < o.rows; ++r) {
                if (up[r] == 0.0) continue;
                for (std::size_t c = 0; c < o.cols; ++c) dst[c] += o.weight(r, c) * up[r];
              }
            },
            [&](const op::Relu&) {
              for (std::size_t e = 0; e < w; ++e) push(0, e, activation(p, e, up[e]));
            },
            [&](const op::Sigmoid&) {
              for (std::size_t e = 0; e < w; ++e) push(0, e, activation(p, e, up[e]));
            },
            [&](const op::Tanh&) {
              for (std::size_t e = 0; e < w; ++e) push(0, e, activation(p, e, up[e]));
            },
            [&](const op::Add&) {
              for (std::size_t e = 0; e < w; ++e) {
                push(0, e, up[e]);
                push(1, e, up[e]);
              }
            },
            [&](const op::Subtract&) {
              for (std::size_t e = 0; e < w; ++e) {
                push(0, e, up[e]);
                push(1, e, -up[e]);
              }
            },
            [&](const op::Scale& o) {
              for (std::size_t e = 0; e < w; ++e) push(0, e, o.factor * up[e]);
            },
            [&](const op::Multiply&) {
              const auto& a = t.values[in[0]];
              const auto& b = t.values[in[1]];
              for (std::size_t e = 0; e < w; ++e) {
                push(0, e, up[e] * elem(b, e));
                push(1, e, up[e] * elem(a, e));
              }
            },
            [&](const op::Min&) {
              const auto& a = t.values[in[0]];
              const auto& b = t.values[in[1]];
              for (std::size_t e = 0; e < w; ++e) {
                const double ae = elem(a, e);
                const double be = elem(b, e);
                if (ae == be) {
                  push(0, e, 0.5 * up[e]);
                  push(1, e, 0.5 * up[e]);
                } else {
                  push(be < ae ? 1 : 0, e, up[e]);
                }
              }
            },
            [&](const op::Max&) {
              const auto& a = t.values[in[0]];
              const auto& b = t.values[in[1]];
              for (std::size_t e = 0; e < w; ++e) {
                const double ae = elem(a, e);
                const double be = elem(b, e);
                if (ae == be) {
                  push(0, e, 0.5 * up[e]);
                  push(1, e, 0.5 * up[e]);
                } else {
                  push(be > ae ? 1 : 0, e, up[e]);
                }
              }
            },
            [&](const op::SumReduce&) {
              for (auto& v : grad[in[0]]) v += up[0];
            },
            [&](const op::SymmetryCex& o) {
              const auto& x = t.values[in[0]];
              const double xi = x[o.i];
              const double xj = x[o.j];
              auto& dst = grad[in[0]];
              dst[o.i] += up[0] * clamp_slope(xi, o.a, o.b) * (clamp_between(xj, o.a, o.b) - o.a);
              dst[o.j] += up[0] * clamp_slope(xj, o.a, o.b) * (clamp_between(xi, o.a, o.b) - o.a);
            },
        },
        g.node(p).op);
  }
  for (std::size_t i = 0; i < result.size(); ++i) {
    if (!std::isfinite(result[i])) {
      throw NumericError("non-finite gradient for feature " + std::to_string(i));
    }
  }
  return result;
}

/// Exact local derivative of relu/sigmoid/tanh at the traced point, with the
/// ReLU pass condition chosen by `rule`.
inline double activation_backward(const ModelGraph& g, const EvalTrace& t, std::size_t p,
                                  std::size_t e, double upstream, BackpropRule rule) {
  const double pre = t.values[g.operands(p)[0]][e];
  const double out = t.values[p][e];
  return std::visit(overloaded{
                        [&](const op::Relu&) {
                          bool pass = false;
                          switch (rule) {
                            case BackpropRule::Standard: pass = pre > 0.0; break;
                            case BackpropRule::Deconvnet: pass = upstream > 0.0; break;
                            case BackpropRule::Guided: pass = pre > 0.0 && upstream > 0.0; break;
                          }
                          return pass ? upstream : 0.0;
                        },
                        [&](const op::Sigmoid&) { return upstream * out * (1.0 - out); },
                        [&](const op::Tanh&) { return upstream * (1.0 - out * out); },
                        [](const auto&) { return 0.0; },
                    },
                    g.node(p).op);
}

}  // namespace detail

/// Backward signal of the output with respect to each feature, using the
/// trace of a previous forward pass.
inline std::vector<double> gradient_from_trace(const ModelGraph& g, const EvalTrace& t,
                                               BackpropRule rule = BackpropRule::Standard) {
  return detail::backpropagate(g, t, [&](std::size_t p, std::size_t e, double up) {
    return detail::activation_backward(g, t, p, e, up, rule);
  });
}

inline Tensor gradient(const ModelGraph& g, const Tensor& input,
                       BackpropRule rule = BackpropRule::Standard) {
  const auto t = trace(g, input.span());
  return Tensor(input.shape(), gradient_from_trace(g, t, rule));
}

/// Largest component-wise relative error between the reverse-mode gradient
/// and central finite differences with step epsilon * max(1, |x_i|). The
/// relative error is |ad - fd| / max(1, |ad|, |fd|).
inline double check_gradient(const ModelGraph& g, const Tensor& input, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ValidationError("finite-difference epsilon must be positive");
  }
  const auto analytic = gradient(g, input);
  std::vector<double> x = input.values();
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double h = epsilon * std::max(1.0, std::abs(xi));
    x[i] = xi + h;
    const double up = evaluate(g, x);
    x[i] = xi - h;
    const double down = evaluate(g, x);
    x[i] = xi;
    const double fd = (up - down) / ((xi + h) - (xi - h));
    const double ad = analytic[i];
    const double scale = std::max({1.0, std::abs(ad), std::abs(fd)});
    worst = std::max(worst, std::abs(ad - fd) / scale);
  }
  return worst;
}

}  // namespace intgrad
