#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "intgrad/engine.hpp"
#include "intgrad/graph.hpp"
#include "intgrad/tensor.hpp"

namespace intgrad::testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi) { return lo + (hi - lo) * static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }
  std::vector<double> vec(std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform(lo, hi);
    return v;
  }
  Tensor point(std::size_t n, double lo, double hi) { return Tensor::vector(vec(n, lo, hi)); }

 private:
  std::mt19937_64 gen_;
};

enum class Activation { Relu, Sigmoid, Tanh };

inline Op activation_op(Activation a) {
  switch (a) {
    case Activation::Relu: return op::Relu{};
    case Activation::Sigmoid: return op::Sigmoid{};
    case Activation::Tanh: return op::Tanh{};
  }
  return op::Relu{};
}

inline op::Dense random_dense(Rng& rng, std::size_t rows, std::size_t cols) {
  return op::Dense{rows, cols, rng.vec(rows * cols, -1.5, 1.5), rng.vec(rows, -0.5, 0.5)};
}

/// x -> dense(hidden) -> activation -> dense(1).
inline ModelGraph random_mlp(Rng& rng, std::size_t n, std::size_t hidden, Activation act) {
  return ModelGraph({{"x", op::Input{0, n}, {}},
                     {"h", random_dense(rng, hidden, n), {"x"}},
                     {"a", activation_op(act), {"h"}},
                     {"out", random_dense(rng, 1, hidden), {"a"}}},
                    "out");
}

/// Smooth model mixing tanh, sigmoid, products and sums.
inline ModelGraph random_smooth_model(Rng& rng, std::size_t n) {
  const std::size_t h = 2 + rng.index(4);
  return ModelGraph({{"x", op::Input{0, n}, {}},
                     {"h1", random_dense(rng, h, n), {"x"}},
                     {"t", op::Tanh{}, {"h1"}},
                     {"h2", random_dense(rng, h, n), {"x"}},
                     {"s", op::Sigmoid{}, {"h2"}},
                     {"prod", op::Multiply{}, {"t", "s"}},
                     {"scaled", op::Scale{rng.uniform(-2.0, 2.0)}, {"prod"}},
                     {"mix", op::Add{}, {"scaled", "t"}},
                     {"out", random_dense(rng, 1, h), {"mix"}}},
                    "out");
}

/// Piecewise-linear model using relu, min, max and subtraction.
inline ModelGraph random_piecewise_model(Rng& rng, std::size_t n) {
  const std::size_t h = 2 + rng.index(4);
  return ModelGraph({{"x", op::Input{0, n}, {}},
                     {"h1", random_dense(rng, h, n), {"x"}},
                     {"r", op::Relu{}, {"h1"}},
                     {"h2", random_dense(rng, h, n), {"x"}},
                     {"lo", op::Min{}, {"r", "h2"}},
                     {"hi", op::Max{}, {"r", "h2"}},
                     {"d", op::Subtract{}, {"hi", "lo"}},
                     {"s", op::Scale{0.5}, {"d"}},
                     {"sum", op::Add{}, {"s", "lo"}},
                     {"out", random_dense(rng, 1, h), {"sum"}}},
                    "out");
}

/// Smallest distance of any relu pre-activation or min/max operand gap from
/// its kink at `x`.
inline double kink_distance(const ModelGraph& g, const Tensor& x) {
  const auto t = trace(g, x.span());
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < g.node_count(); ++p) {
    const auto& o = g.node(p).op;
    const auto& in = g.operands(p);
    if (std::holds_alternative<op::Relu>(o)) {
      for (double v : t.values[in[0]]) d = std::min(d, std::abs(v));
    } else if (std::holds_alternative<op::Min>(o) || std::holds_alternative<op::Max>(o)) {
      const auto& a = t.values[in[0]];
      const auto& b = t.values[in[1]];
      for (std::size_t e = 0; e < g.width(p); ++e) {
        d = std::min(d, std::abs(a[a.size() == 1 ? 0 : e] - b[b.size() == 1 ? 0 : e]));
      }
    }
  }
  return d;
}

}  // namespace intgrad::testing
