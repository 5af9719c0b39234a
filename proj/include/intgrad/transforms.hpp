#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "intgrad/error.hpp"
#include "intgrad/graph.hpp"

namespace intgrad {

namespace detail {

// Copies g's nodes under `prefix`, replacing each input node by a dense
// selector reading from the shared input node `shared`.
inline void append_prefixed(std::vector<NodeSpec>& out, const ModelGraph& g,
                            const std::string& prefix, const std::string& shared) {
  const auto n = g.input_arity();
  for (const auto& node : g.nodes()) {
    NodeSpec copy{prefix + node.id, node.op, {}};
    for (const auto& in : node.inputs) copy.inputs.push_back(prefix + in);
    if (const auto* in = std::get_if<op::Input>(&node.op)) {
      op::Dense sel{in->size, n, std::vector<double>(in->size * n, 0.0),
                    std::vector<double>(in->size, 0.0)};
      for (std::size_t e = 0; e < in->size; ++e) sel.weights[e * n + in->offset + e] = 1.0;
      copy.op = std::move(sel);
      copy.inputs = {shared};
    }
    out.push_back(std::move(copy));
  }
}

}  // namespace detail

/// Graph computing a * f1(x) + b * f2(x) over a shared input.
inline ModelGraph linear_combination(const ModelGraph& f1, const ModelGraph& f2, double a,
                                     double b) {
  if (f1.input_arity() != f2.input_arity()) {
    throw ValidationError("cannot combine models with input arity " +
                          std::to_string(f1.input_arity()) + " and " +
                          std::to_string(f2.input_arity()));
  }
  std::vector<NodeSpec> nodes{{"x", op::Input{0, f1.input_arity()}, {}}};
  detail::append_prefixed(nodes, f1, "f1/", "x");
  detail::append_prefixed(nodes, f2, "f2/", "x");
  nodes.push_back({"scaled_f1", op::Scale{a}, {"f1/" + f1.output_id()}});
  nodes.push_back({"scaled_f2", op::Scale{b}, {"f2/" + f2.output_id()}});
  nodes.push_back({"out", op::Add{}, {"scaled_f1", "scaled_f2"}});
  return ModelGraph(std::move(nodes), "out");
}

/// Functionally equivalent re-implementation: 0.5 * g(x) + 0.5 * g(x) with
/// the two halves computed by independent copies of the graph.
inline ModelGraph cloned_halves(const ModelGraph& g) { return linear_combination(g, g, 0.5, 0.5); }

/// g with one extra trailing feature that nothing reads. Returns the model;
/// the new feature's index is the old input arity.
inline ModelGraph with_unwired_feature(const ModelGraph& g) {
  std::vector<NodeSpec> nodes = g.nodes();
  std::string id = "unwired";
  while (g.find(id)) id += "_";
  nodes.push_back({id, op::Input{g.input_arity(), 1}, {}});
  return ModelGraph(std::move(nodes), g.output_id());
}

}  // namespace intgrad
