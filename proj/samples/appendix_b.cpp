// Attributions for the two equivalent ReLU networks f and g at x = (3, 1).
#include <cstdio>

#include "intgrad/attribution.hpp"
#include "intgrad/fixtures.hpp"

int main() {
  using namespace intgrad;
  const auto x = Tensor::vector({3.0, 1.0});
  const MethodSpec methods[] = {
      method::IntegratedGradients{{1000, RiemannRule::Right}},
      method::DiscreteGradient{method::DiscreteVariant::DeepLiftRescale},
      method::DiscreteGradient{method::DiscreteVariant::LrpZeroBaseline},
      method::ModifiedBackprop{BackpropRule::Deconvnet},
      method::ModifiedBackprop{BackpropRule::Guided},
      method::GradTimesInput{},
      method::ShapleyShubik{method::ShapleyExact{}},
  };
  const auto f = build_fixture(fixture::AppendixF{});
  const auto g = build_fixture(fixture::AppendixG{});
  std::printf("%-22s %10s %10s   %10s %10s\n", "method", "f: x1", "f: x2", "g: x1", "g: x2");
  for (const auto& m : methods) {
    const auto rf = attribute(f, x, ZerosBaseline{}, m);
    const auto rg = attribute(g, x, ZerosBaseline{}, m);
    std::printf("%-22s %10.4f %10.4f   %10.4f %10.4f\n", method_name(m).c_str(), rf.values[0], rf.values[1],
                rg.values[0], rg.values[1]);
  }
}
