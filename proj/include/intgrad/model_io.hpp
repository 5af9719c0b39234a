#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "intgrad/detail/files.hpp"
#include "intgrad/error.hpp"
#include "intgrad/graph.hpp"

// Model documents are JSON:
//
//   {
//     "format_version": 1,
//     "input_arity": 2,
//     "output": "out",
//     "nodes": [
//       {"id": "x", "op": "input", "params": {"offset": 0, "size": 2}, "inputs": []},
//       {"id": "h", "op": "dense", "params": {"weights": [[1, 0]], "bias": [0]}, "inputs": ["x"]},
//       ...
//     ]
//   }
//
// save_model emits the canonical form: nodes sorted by id, every real written
// with 17 significant digits.

namespace intgrad {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

using nlohmann::json;

inline std::string line_column(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t k = 0; k < byte; ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

class FieldReader {
 public:
  FieldReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {}

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    throw ValidationError(where_ + (field.empty() ? "" : "." + field) + ": " + what);
  }

  const json& get(const std::string& field) const {
    if (!j_.is_object()) fail("", "expected an object");
    auto it = j_.find(field);
    if (it == j_.end()) fail(field, "missing field");
    return *it;
  }

  bool has(const std::string& field) const { return j_.is_object() && j_.contains(field); }

  double real(const std::string& field) const {
    const auto& v = get(field);
    if (!v.is_number()) fail(field, "expected a number");
    return v.get<double>();
  }

  std::size_t index(const std::string& field) const {
    const auto& v = get(field);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      fail(field, "expected a non-negative integer");
    }
    return v.get<std::size_t>();
  }

  std::string text(const std::string& field) const {
    const auto& v = get(field);
    if (!v.is_string()) fail(field, "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> reals(const std::string& field) const {
    const auto& v = get(field);
    if (!v.is_array()) fail(field, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!v[k].is_number()) fail(field + "[" + std::to_string(k) + "]", "expected a number");
      out.push_back(v[k].get<double>());
    }
    return out;
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
};

inline Op parse_op(const std::string& name, const FieldReader& params, const std::string& where) {
  if (name == "input") return op::Input{params.index("offset"), params.index("size")};
  if (name == "constant") return op::Constant{params.reals("values")};
  if (name == "dense") {
    const auto& rows = params.get("weights");
    if (!rows.is_array() || rows.empty()) params.fail("weights", "expected a non-empty array of rows");
    op::Dense d;
    d.rows = rows.size();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::string field = "weights[" + std::to_string(r) + "]";
      if (!rows[r].is_array()) params.fail(field, "expected an array of numbers");
      if (r == 0) d.cols = rows[r].size();
      if (rows[r].size() != d.cols) {
        params.fail(field, "row has " + std::to_string(rows[r].size()) + " entries, expected " +
                               std::to_string(d.cols));
      }
      for (const auto& v : rows[r]) {
        if (!v.is_number()) params.fail(field, "expected a number");
        d.weights.push_back(v.get<double>());
      }
    }
    d.bias = params.reals("bias");
    return d;
  }
  if (name == "relu") return op::Relu{};
  if (name == "sigmoid") return op::Sigmoid{};
  if (name == "tanh") return op::Tanh{};
  if (name == "add") return op::Add{};
  if (name == "subtract") return op::Subtract{};
  if (name == "scale") return op::Scale{params.real("factor")};
  if (name == "multiply") return op::Multiply{};
  if (name == "min") return op::Min{};
  if (name == "max") return op::Max{};
  if (name == "sum-reduce") return op::SumReduce{};
  if (name == "piecewise-builtin") {
    const auto kind = params.text("kind");
    if (kind != "symmetry-cex") params.fail("kind", "unknown piecewise kind '" + kind + "'");
    return op::SymmetryCex{params.real("a"), params.real("b"), params.index("i"), params.index("j")};
  }
  throw ValidationError(where + ": unknown op '" + name + "'");
}

inline void emit_reals(std::string& out, const std::vector<double>& v) {
  out += '[';
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) out += ", ";
    out += format_double(v[k]);
  }
  out += ']';
}

inline std::string emit_params(const Op& o) {
  std::string out = "{";
  std::visit(overloaded{
                 [&](const op::Input& p) {
                   out += "\"offset\": " + std::to_string(p.offset) + ", \"size\": " + std::to_string(p.size);
                 },
                 [&](const op::Constant& p) {
                   out += "\"values\": ";
                   emit_reals(out, p.values);
                 },
                 [&](const op::Dense& p) {
                   out += "\"weights\": [";
                   for (std::size_t r = 0; r < p.rows; ++r) {
                     if (r) out += ", ";
                     emit_reals(out, std::vector<double>(p.weights.begin() + static_cast<std::ptrdiff_t>(r * p.cols),
                                                         p.weights.begin() + static_cast<std::ptrdiff_t>((r + 1) * p.cols)));
                   }
                   out += "], \"bias\": ";
                   emit_reals(out, p.bias);
                 },
                 [&](const op::Scale& p) { out += "\"factor\": " + format_double(p.factor); },
                 [&](const op::SymmetryCex& p) {
                   out += "\"kind\": \"symmetry-cex\", \"a\": " + format_double(p.a) +
                          ", \"b\": " + format_double(p.b) + ", \"i\": " + std::to_string(p.i) +
                          ", \"j\": " + std::to_string(p.j);
                 },
                 [](const auto&) {},
             },
             o);
  out += '}';
  return out;
}

}  // namespace detail

/// Parses and validates a model document.
inline ModelGraph load_model(std::string_view document) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw ValidationError("parse error at " + detail::line_column(document, e.byte) + ": " + e.what());
  }
  detail::FieldReader root(doc, "document");
  const auto version = root.index("format_version");
  if (version != static_cast<std::size_t>(kModelFormatVersion)) {
    root.fail("format_version", "unsupported version " + std::to_string(version));
  }
  const auto arity = root.index("input_arity");
  const auto output = root.text("output");
  const auto& nodes = root.get("nodes");
  if (!nodes.is_array()) root.fail("nodes", "expected an array");

  std::vector<NodeSpec> specs;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const std::string where = "nodes[" + std::to_string(k) + "]";
    detail::FieldReader node(nodes[k], where);
    NodeSpec spec;
    spec.id = node.text("id");
    const auto op_name = node.text("op");
    static const json kEmpty = json::object();
    const json& params = node.has("params") ? node.get("params") : kEmpty;
    if (!params.is_object()) node.fail("params", "expected an object");
    spec.op = detail::parse_op(op_name, detail::FieldReader(params, where + ".params"), where);
    if (node.has("inputs")) {
      const auto& ins = node.get("inputs");
      if (!ins.is_array()) node.fail("inputs", "expected an array of node ids");
      for (const auto& in : ins) {
        if (!in.is_string()) node.fail("inputs", "expected an array of node ids");
        spec.inputs.push_back(in.get<std::string>());
      }
    }
    specs.push_back(std::move(spec));
  }

  ModelGraph g(std::move(specs), output);
  if (g.input_arity() != arity) {
    throw ValidationError("document declares input_arity " + std::to_string(arity) +
                          " but its input nodes cover " + std::to_string(g.input_arity()) + " features");
  }
  return g;
}

/// Canonical document for `g`.
inline std::string save_model(const ModelGraph& g) {
  using detail::json;
  std::vector<const NodeSpec*> sorted;
  for (const auto& n : g.nodes()) sorted.push_back(&n);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });

  std::string out = "{\n";
  out += "  \"format_version\": " + std::to_string(kModelFormatVersion) + ",\n";
  out += "  \"input_arity\": " + std::to_string(g.input_arity()) + ",\n";
  out += "  \"output\": " + json(g.output_id()).dump() + ",\n";
  out += "  \"nodes\": [\n";
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const auto& n = *sorted[k];
    out += "    {\"id\": " + json(n.id).dump() + ", \"op\": \"" + std::string(op_name(n.op)) +
           "\", \"params\": " + detail::emit_params(n.op) + ", \"inputs\": [";
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      if (i) out += ", ";
      out += json(n.inputs[i]).dump();
    }
    out += "]}";
    out += k + 1 < sorted.size() ? ",\n" : "\n";
  }
  out += "  ]\n}\n";
  return out;
}

inline ModelGraph load_model_file(const std::filesystem::path& path) {
  const auto text = detail::read_file(path);
  try {
    return load_model(text);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

inline void save_model_file(const std::filesystem::path& path, const ModelGraph& g) {
  detail::write_file_atomic(path, save_model(g));
}

/// Content hash of the canonical document.
inline std::string model_hash(const ModelGraph& g) {
  return detail::hex64(detail::fnv1a(save_model(g)));
}

}  // namespace intgrad
