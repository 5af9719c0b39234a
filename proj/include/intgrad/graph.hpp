#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "intgrad/error.hpp"

namespace intgrad {

namespace op {

/// Consumes `size` consecutive external features starting at `offset`.
struct Input {
  std::size_t offset = 0;
  std::size_t size = 1;
  friend bool operator==(const Input&, const Input&) = default;
};

struct Constant {
  std::vector<double> values;
  friend bool operator==(const Constant&, const Constant&) = default;
};

/// y = W x + b with W stored row-major as rows x cols.
struct Dense {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> weights;
  std::vector<double> bias;
  friend bool operator==(const Dense&, const Dense&) = default;

  double weight(std::size_t r, std::size_t c) const { return weights[r * cols + c]; }
};

struct Relu {
  friend bool operator==(const Relu&, const Relu&) = default;
};
struct Sigmoid {
  friend bool operator==(const Sigmoid&, const Sigmoid&) = default;
};
struct Tanh {
  friend bool operator==(const Tanh&, const Tanh&) = default;
};
struct Add {
  friend bool operator==(const Add&, const Add&) = default;
};
struct Subtract {
  friend bool operator==(const Subtract&, const Subtract&) = default;
};
struct Scale {
  double factor = 1.0;
  friend bool operator==(const Scale&, const Scale&) = default;
};
struct Multiply {
  friend bool operator==(const Multiply&, const Multiply&) = default;
};
struct Min {
  friend bool operator==(const Min&, const Min&) = default;
};
struct Max {
  friend bool operator==(const Max&, const Max&) = default;
};
struct SumReduce {
  friend bool operator==(const SumReduce&, const SumReduce&) = default;
};

/// Piecewise-quadratic function of two features of its input vector:
/// (clamp(x_i, a, b) - a) * (clamp(x_j, a, b) - a). It is symmetric in the
/// two features and is the witness function used against non-straight paths.
struct SymmetryCex {
  double a = 0.0;
  double b = 1.0;
  std::size_t i = 0;
  std::size_t j = 1;
  friend bool operator==(const SymmetryCex&, const SymmetryCex&) = default;
};

}  // namespace op

using Op = std::variant<op::Input, op::Constant, op::Dense, op::Relu,
                        op::Sigmoid, op::Tanh, op::Add, op::Subtract,
                        op::Scale, op::Multiply, op::Min, op::Max,
                        op::SumReduce, op::SymmetryCex>;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

/// Document name of an op.
inline std::string_view op_name(const Op& o) {
  return std::visit(
      overloaded{
          [](const op::Input&) { return std::string_view("input"); },
          [](const op::Constant&) { return std::string_view("constant"); },
          [](const op::Dense&) { return std::string_view("dense"); },
          [](const op::Relu&) { return std::string_view("relu"); },
          [](const op::Sigmoid&) { return std::string_view("sigmoid"); },
          [](const op::Tanh&) { return std::string_view("tanh"); },
          [](const op::Add&) { return std::string_view("add"); },
          [](const op::Subtract&) { return std::string_view("subtract"); },
          [](const op::Scale&) { return std::string_view("scale"); },
          [](const op::Multiply&) { return std::string_view("multiply"); },
          [](const op::Min&) { return std::string_view("min"); },
          [](const op::Max&) { return std::string_view("max"); },
          [](const op::SumReduce&) { return std::string_view("sum-reduce"); },
          [](const op::SymmetryCex&) {
            return std::string_view("piecewise-builtin");
          },
      },
      o);
}

inline std::size_t op_arity(const Op& o) {
  return std::visit(
      overloaded{
          [](const op::Input&) -> std::size_t { return 0; },
          [](const op::Constant&) -> std::size_t { return 0; },
          [](const op::Add&) -> std::size_t { return 2; },
          [](const op::Subtract&) -> std::size_t { return 2; },
          [](const op::Multiply&) -> std::size_t { return 2; },
          [](const op::Min&) -> std::size_t { return 2; },
          [](const op::Max&) -> std::size_t { return 2; },
          [](const auto&) -> std::size_t { return 1; },
      },
      o);
}

struct NodeSpec {
  std::string id;
  Op op;
  std::vector<std::string> inputs;
  friend bool operator==(const NodeSpec&, const NodeSpec&) = default;
};

/// A validated DAG of ops with a single scalar output. Immutable once built;
/// nodes are stored in a deterministic topological order (ties broken by
/// declaration order).
class ModelGraph {
 public:
  ModelGraph(std::vector<NodeSpec> nodes, std::string output) {
    build(std::move(nodes), std::move(output));
  }

  const std::vector<NodeSpec>& nodes() const noexcept { return nodes_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  const NodeSpec& node(std::size_t k) const { return nodes_[k]; }
  const std::vector<std::size_t>& operands(std::size_t k) const {
    return operands_[k];
  }
  std::size_t width(std::size_t k) const { return widths_[k]; }
  std::size_t output_index() const noexcept { return output_; }
  const std::string& output_id() const { return nodes_[output_].id; }
  std::size_t input_arity() const noexcept { return input_arity_; }

  std::optional<std::size_t> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Same nodes (compared by id) and same output.
  friend bool operator==(const ModelGraph& a, const ModelGraph& b) {
    if (a.output_id() != b.output_id() || a.nodes_.size() != b.nodes_.size()) {
      return false;
    }
    for (const auto& n : a.nodes_) {
      auto k = b.find(n.id);
      if (!k || !(b.nodes_[*k] == n)) return false;
    }
    return true;
  }

 private:
  void build(std::vector<NodeSpec> nodes, std::string output);

  std::vector<NodeSpec> nodes_;
  std::vector<std::vector<std::size_t>> operands_;
  std::vector<std::size_t> widths_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t output_ = 0;
  std::size_t input_arity_ = 0;
};

namespace detail {

inline std::string node_label(const NodeSpec& n) {
  return "node '" + n.id + "' (" + std::string(op_name(n.op)) + ")";
}

inline void check_params(const NodeSpec& n) {
  auto fail = [&](const std::string& what) {
    throw ValidationError(node_label(n) + ": " + what);
  };
  auto all_finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(),
                       [](double x) { return std::isfinite(x); });
  };
  std::visit(overloaded{
                 [&](const op::Input& p) {
                   if (p.size == 0) fail("input size must be positive");
                 },
                 [&](const op::Constant& p) {
                   if (p.values.empty()) fail("constant must hold at least one value");
                   if (!all_finite(p.values)) fail("constant values must be finite");
                 },
                 [&](const op::Dense& p) {
                   if (p.rows == 0 || p.cols == 0) fail("weight matrix must be non-empty");
                   if (p.weights.size() != p.rows * p.cols) {
                     fail("weight matrix holds " + std::to_string(p.weights.size()) +
                          " values, expected " + std::to_string(p.rows * p.cols));
                   }
                   if (p.bias.size() != p.rows) {
                     fail("bias length " + std::to_string(p.bias.size()) +
                          " does not match " + std::to_string(p.rows) + " rows");
                   }
                   if (!all_finite(p.weights) || !all_finite(p.bias)) {
                     fail("weights and bias must be finite");
                   }
                 },
                 [&](const op::Scale& p) {
                   if (!std::isfinite(p.factor)) fail("scale factor must be finite");
                 },
                 [&](const op::SymmetryCex& p) {
                   if (!std::isfinite(p.a) || !std::isfinite(p.b) || !(p.a < p.b)) {
                     fail("symmetry-cex requires finite a < b");
                   }
                   if (p.i == p.j) fail("symmetry-cex requires i != j");
                 },
                 [](const auto&) {},
             },
             n.op);
}

}  // namespace detail

inline void ModelGraph::build(std::vector<NodeSpec> nodes, std::string output) {
  if (nodes.empty()) throw ValidationError("model has no nodes");

  std::unordered_map<std::string, std::size_t> decl;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k].id.empty()) {
      throw ValidationError("nodes[" + std::to_string(k) + "] has an empty id");
    }
    if (!decl.emplace(nodes[k].id, k).second) {
      throw ValidationError("duplicate node id '" + nodes[k].id + "'");
    }
  }

  std::vector<std::vector<std::size_t>> deps(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const auto& n = nodes[k];
    detail::check_params(n);
    if (n.inputs.size() != op_arity(n.op)) {
      throw ValidationError(detail::node_label(n) + ": expects " +
                            std::to_string(op_arity(n.op)) + " inputs, got " +
                            std::to_string(n.inputs.size()));
    }
    for (const auto& in : n.inputs) {
      auto it = decl.find(in);
      if (it == decl.end()) {
        throw ValidationError(detail::node_label(n) +
                              ": references unknown node '" + in + "'");
      }
      deps[k].push_back(it->second);
    }
  }

  // Kahn's algorithm; the min-heap keeps the order stable w.r.t. declaration.
  std::vector<std::size_t> indegree(nodes.size(), 0);
  std::vector<std::vector<std::size_t>> users(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    indegree[k] = deps[k].size();
    for (auto d : deps[k]) users[d].push_back(k);
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (indegree[k] == 0) ready.push(k);
  }
  std::vector<std::size_t> order;
  order.reserve(nodes.size());
  while (!ready.empty()) {
    const auto k = ready.top();
    ready.pop();
    order.push_back(k);
    for (auto u : users[k]) {
      if (--indegree[u] == 0) ready.push(u);
    }
  }
  if (order.size() != nodes.size()) {
    std::string stuck;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (indegree[k] != 0) stuck += (stuck.empty() ? "'" : ", '") + nodes[k].id + "'";
    }
    throw ValidationError("cycle detected among nodes " + stuck);
  }

  std::vector<std::size_t> position(nodes.size());
  for (std::size_t p = 0; p < order.size(); ++p) position[order[p]] = p;

  nodes_.reserve(nodes.size());
  operands_.reserve(nodes.size());
  for (auto k : order) {
    std::vector<std::size_t> ops;
    for (auto d : deps[k]) ops.push_back(position[d]);
    operands_.push_back(std::move(ops));
    nodes_.push_back(std::move(nodes[k]));
  }
  for (std::size_t p = 0; p < nodes_.size(); ++p) index_.emplace(nodes_[p].id, p);

  // Widths, in topological order.
  widths_.assign(nodes_.size(), 0);
  std::vector<std::pair<std::size_t, std::size_t>> slices;
  for (std::size_t p = 0; p < nodes_.size(); ++p) {
    const auto& n = nodes_[p];
    const auto& in = operands_[p];
    auto fail = [&](const std::string& what) {
      throw ValidationError(detail::node_label(n) + ": " + what);
    };
    widths_[p] = std::visit(
        overloaded{
            [&](const op::Input& o) -> std::size_t {
              slices.emplace_back(o.offset, o.size);
              return o.size;
            },
            [&](const op::Constant& o) -> std::size_t { return o.values.size(); },
            [&](const op::Dense& o) -> std::size_t {
              if (widths_[in[0]] != o.cols) {
                fail("weight matrix has " + std::to_string(o.cols) +
                     " columns but input '" + nodes_[in[0]].id + "' has length " +
                     std::to_string(widths_[in[0]]));
              }
              return o.rows;
            },
            [&](const op::SumReduce&) -> std::size_t { return 1; },
            [&](const op::SymmetryCex& o) -> std::size_t {
              const auto w = widths_[in[0]];
              if (o.i >= w || o.j >= w) {
                fail("feature indices " + std::to_string(o.i) + ", " +
                     std::to_string(o.j) + " out of range for input length " +
                     std::to_string(w));
              }
              return 1;
            },
            [&](const auto& o) -> std::size_t {
              using T = std::decay_t<decltype(o)>;
              if constexpr (std::is_same_v<T, op::Add> || std::is_same_v<T, op::Subtract> ||
                            std::is_same_v<T, op::Multiply> || std::is_same_v<T, op::Min> ||
                            std::is_same_v<T, op::Max>) {
                const auto wa = widths_[in[0]];
                const auto wb = widths_[in[1]];
                if (wa != wb && wa != 1 && wb != 1) {
                  fail("operand lengths " + std::to_string(wa) + " and " +
                       std::to_string(wb) + " are incompatible");
                }
                return std::max(wa, wb);
              } else {
                return widths_[in[0]];
              }
            },
        },
        n.op);
  }

  std::sort(slices.begin(), slices.end());
  std::size_t next = 0;
  for (const auto& [offset, size] : slices) {
    if (offset != next) {
      throw ValidationError("input nodes do not tile the feature vector: expected a slice at offset " +
                            std::to_string(next) + ", found one at " + std::to_string(offset));
    }
    next += size;
  }
  if (slices.empty()) throw ValidationError("model declares no input nodes");
  input_arity_ = next;

  auto out = index_.find(output);
  if (out == index_.end()) throw ValidationError("output node '" + output + "' does not exist");
  output_ = out->second;
  if (widths_[output_] != 1) {
    throw ValidationError("output node '" + output + "' has length " +
                          std::to_string(widths_[output_]) + ", expected a scalar");
  }
}

/// Features that can structurally influence the output. A dense column of
/// zeros breaks the dependency; every other op propagates it.
inline std::vector<bool> structural_support(const ModelGraph& g) {
  const auto n = g.input_arity();
  std::vector<std::vector<std::vector<bool>>> deps(g.node_count());
  auto none = [n] { return std::vector<bool>(n, false); };
  auto unite = [](std::vector<bool>& into, const std::vector<bool>& from) {
    for (std::size_t f = 0; f < into.size(); ++f) into[f] = into[f] || from[f];
  };
  for (std::size_t p = 0; p < g.node_count(); ++p) {
    const auto& in = g.operands(p);
    const auto w = g.width(p);
    auto& d = deps[p];
    d.assign(w, none());
    auto at = [&](std::size_t operand, std::size_t e) -> const std::vector<bool>& {
      const auto& src = deps[in[operand]];
      return src[src.size() == 1 ? 0 : e];
    };
    std::visit(overloaded{
                   [&](const op::Input& o) {
                     for (std::size_t e = 0; e < w; ++e) d[e][o.offset + e] = true;
                   },
                   [&](const op::Constant&) {},
                   [&](const op::Dense& o) {
                     for (std::size_t r = 0; r < o.rows; ++r) {
                       for (std::size_t c = 0; c < o.cols; ++c) {
                         if (o.weight(r, c) != 0.0) unite(d[r], deps[in[0]][c]);
                       }
                     }
                   },
                   [&](const op::SumReduce&) {
                     for (const auto& s : deps[in[0]]) unite(d[0], s);
                   },
                   [&](const op::SymmetryCex& o) {
                     unite(d[0], deps[in[0]][o.i]);
                     unite(d[0], deps[in[0]][o.j]);
                   },
                   [&](const auto&) {
                     for (std::size_t e = 0; e < w; ++e) {
                       for (std::size_t k = 0; k < in.size(); ++k) unite(d[e], at(k, e));
                     }
                   },
               },
               g.node(p).op);
  }
  return deps[g.output_index()][0];
}

}  // namespace intgrad
