#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "intgrad/error.hpp"
#include "intgrad/graph.hpp"

namespace intgrad {

namespace fixture {

/// f(x) = 1 - relu(1 - x)
struct OneRelu {};
/// f(x1, x2) = relu(relu(x1) - 1 - relu(x2))
struct AppendixF {};
/// g(x1, x2) = relu(relu(x1 - 1) - relu(x2)); equal to AppendixF everywhere.
struct AppendixG {};
/// h(x1, x2) = relu(x1) - 1 - relu(x2)
struct AppendixH {};
/// k(x1, x2) = relu(x1 - 1) - relu(x2); differs from AppendixH when x1 < 1.
struct AppendixK {};
/// sigmoid(x1 + ... + xn)
struct LogisticSym {
  std::size_t n = 2;
};
/// min(x1, x2)
struct Min2 {};
/// w . x + b
struct Linear {
  std::vector<double> w;
  double b = 0.0;
};
/// (clamp(x_i,a,b) - a)(clamp(x_j,a,b) - a) over n features.
struct SymmetryCex {
  double a = 0.0;
  double b = 1.0;
  std::size_t i = 0;
  std::size_t j = 1;
  std::size_t n = 2;
};

}  // namespace fixture

using FixtureId = std::variant<fixture::OneRelu, fixture::AppendixF, fixture::AppendixG,
                               fixture::AppendixH, fixture::AppendixK, fixture::LogisticSym,
                               fixture::Min2, fixture::Linear, fixture::SymmetryCex>;

namespace detail {

inline NodeSpec input_node(std::string id, std::size_t n) {
  return {std::move(id), op::Input{0, n}, {}};
}

// 1 x n dense row picking feature k, plus bias.
inline NodeSpec select_node(std::string id, std::string from, std::size_t n, std::size_t k,
                            double bias = 0.0) {
  op::Dense d{1, n, std::vector<double>(n, 0.0), {bias}};
  d.weights[k] = 1.0;
  return {std::move(id), std::move(d), {std::move(from)}};
}

inline NodeSpec unary_node(std::string id, Op o, std::string from) {
  return {std::move(id), std::move(o), {std::move(from)}};
}

inline NodeSpec binary_node(std::string id, Op o, std::string a, std::string b) {
  return {std::move(id), std::move(o), {std::move(a), std::move(b)}};
}

// relu(x1) - 1 - relu(x2) as nodes ending at `id`.
inline std::vector<NodeSpec> appendix_h_nodes(const std::string& id) {
  return {
      input_node("x", 2),
      select_node("x1", "x", 2, 0),
      select_node("x2", "x", 2, 1),
      unary_node("relu_x1", op::Relu{}, "x1"),
      unary_node("relu_x2", op::Relu{}, "x2"),
      {"one", op::Constant{{1.0}}, {}},
      binary_node("relu_x1_minus_one", op::Subtract{}, "relu_x1", "one"),
      binary_node(id, op::Subtract{}, "relu_x1_minus_one", "relu_x2"),
  };
}

// relu(x1 - 1) - relu(x2) as nodes ending at `id`.
inline std::vector<NodeSpec> appendix_k_nodes(const std::string& id) {
  return {
      input_node("x", 2),
      select_node("x1_minus_one", "x", 2, 0, -1.0),
      select_node("x2", "x", 2, 1),
      unary_node("relu_x1_minus_one", op::Relu{}, "x1_minus_one"),
      unary_node("relu_x2", op::Relu{}, "x2"),
      binary_node(id, op::Subtract{}, "relu_x1_minus_one", "relu_x2"),
  };
}

}  // namespace detail

/// Graph computing exactly the named fixture function.
inline ModelGraph build_fixture(const FixtureId& id) {
  using namespace detail;
  return std::visit(
      overloaded{
          [](const fixture::OneRelu&) {
            // 1 - relu(1 - x), with both affine maps as 1x1 dense layers.
            return ModelGraph({input_node("x", 1),
                               {"one_minus_x", op::Dense{1, 1, {-1.0}, {1.0}}, {"x"}},
                               unary_node("relu", op::Relu{}, "one_minus_x"),
                               {"out", op::Dense{1, 1, {-1.0}, {1.0}}, {"relu"}}},
                              "out");
          },
          [](const fixture::AppendixF&) {
            auto nodes = appendix_h_nodes("h");
            nodes.push_back(unary_node("out", op::Relu{}, "h"));
            return ModelGraph(std::move(nodes), "out");
          },
          [](const fixture::AppendixG&) {
            auto nodes = appendix_k_nodes("k");
            nodes.push_back(unary_node("out", op::Relu{}, "k"));
            return ModelGraph(std::move(nodes), "out");
          },
          [](const fixture::AppendixH&) { return ModelGraph(appendix_h_nodes("out"), "out"); },
          [](const fixture::AppendixK&) { return ModelGraph(appendix_k_nodes("out"), "out"); },
          [](const fixture::LogisticSym& f) {
            if (f.n == 0) throw ValidationError("logistic_sym requires n >= 1");
            return ModelGraph({input_node("x", f.n), unary_node("sum", op::SumReduce{}, "x"),
                               unary_node("out", op::Sigmoid{}, "sum")},
                              "out");
          },
          [](const fixture::Min2&) {
            return ModelGraph({input_node("x", 2), select_node("x1", "x", 2, 0),
                               select_node("x2", "x", 2, 1),
                               binary_node("out", op::Min{}, "x1", "x2")},
                              "out");
          },
          [](const fixture::Linear& f) {
            if (f.w.empty()) throw ValidationError("linear fixture requires at least one weight");
            return ModelGraph({input_node("x", f.w.size()),
                               {"out", op::Dense{1, f.w.size(), f.w, {f.b}}, {"x"}}},
                              "out");
          },
          [](const fixture::SymmetryCex& f) {
            if (!(0.0 <= f.a && f.a < f.b)) throw ValidationError("symmetry_cex requires 0 <= a < b");
            if (f.i == f.j || f.i >= f.n || f.j >= f.n) {
              throw ValidationError("symmetry_cex requires distinct i, j < n");
            }
            return ModelGraph({input_node("x", f.n),
                               {"out", op::SymmetryCex{f.a, f.b, f.i, f.j}, {"x"}}},
                              "out");
          },
      },
      id);
}

/// File stem used when writing a fixture to disk.
inline std::string fixture_name(const FixtureId& id) {
  return std::visit(overloaded{
                        [](const fixture::OneRelu&) { return std::string("one_relu"); },
                        [](const fixture::AppendixF&) { return std::string("appendix_f"); },
                        [](const fixture::AppendixG&) { return std::string("appendix_g"); },
                        [](const fixture::AppendixH&) { return std::string("appendix_h"); },
                        [](const fixture::AppendixK&) { return std::string("appendix_k"); },
                        [](const fixture::LogisticSym& f) { return "logistic_sym" + std::to_string(f.n); },
                        [](const fixture::Min2&) { return std::string("min2"); },
                        [](const fixture::Linear&) { return std::string("linear"); },
                        [](const fixture::SymmetryCex&) { return std::string("symmetry_cex"); },
                    },
                    id);
}

/// The standard fixture set written by `intgrad fixtures`.
inline std::vector<FixtureId> standard_fixtures() {
  return {fixture::OneRelu{},
          fixture::AppendixF{},
          fixture::AppendixG{},
          fixture::AppendixH{},
          fixture::AppendixK{},
          fixture::LogisticSym{2},
          fixture::LogisticSym{4},
          fixture::LogisticSym{8},
          fixture::Min2{},
          fixture::Linear{{2.0, 3.0}, 0.0},
          fixture::SymmetryCex{0.0, 1.0, 0, 1, 2}};
}

}  // namespace intgrad
