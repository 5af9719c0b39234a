#pragma once

#include <chrono>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "intgrad/attribution.hpp"
#include "intgrad/audit.hpp"
#include "intgrad/axioms.hpp"
#include "intgrad/detail/files.hpp"
#include "intgrad/fixtures.hpp"
#include "intgrad/model_io.hpp"
#include "intgrad/render.hpp"

namespace intgrad::cli {

enum ExitCode : int { kOk = 0, kAuditFailed = 1, kValidation = 2, kNumeric = 3, kBudgetExhausted = 4 };

using nlohmann::json;

inline constexpr int kResultFormatVersion = 1;

// ---------------------------------------------------------------------------
// Argument parsing

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline double parse_real(std::string_view text, std::string_view what) {
  const auto t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw ValidationError(std::string(what) + ": '" + t + "' is not a finite number");
  }
  return v;
}

/// One row of comma-separated decimals.
inline std::vector<double> parse_csv_row(std::string_view text, std::string_view what = "csv") {
  std::vector<double> out;
  const auto t = trim(text);
  if (t.empty()) throw ValidationError(std::string(what) + " is empty");
  std::size_t start = 0;
  while (true) {
    const auto comma = t.find(',', start);
    out.push_back(parse_real(std::string_view(t).substr(start, comma - start), what));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

/// A literal csv row, a csv file, or a binary PGM (scaled to [0, 1]).
inline Tensor read_input(const std::string& arg) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(arg, ec)) {
    const auto data = detail::read_file(arg);
    if (data.rfind("P5", 0) == 0) return pgm_to_input(read_pgm(data));
    const auto first_line = data.substr(0, data.find('\n'));
    return Tensor::vector(parse_csv_row(first_line, arg));
  }
  return Tensor::vector(parse_csv_row(arg, "input"));
}

/// "zeros", "constant:<v>", or anything read_input accepts.
inline BaselineSpec parse_baseline(const std::string& arg) {
  if (arg.empty() || arg == "zeros") return ZerosBaseline{};
  if (arg.rfind("constant:", 0) == 0) return ConstantBaseline{parse_real(arg.substr(9), "baseline")};
  return ExplicitBaseline{read_input(arg)};
}

inline RiemannRule parse_rule(const std::string& name) {
  for (auto r : {RiemannRule::Left, RiemannRule::Right, RiemannRule::Midpoint, RiemannRule::Trapezoid}) {
    if (riemann_rule_name(r) == name) return r;
  }
  throw ValidationError("unknown Riemann rule '" + name + "' (expected left, right, midpoint or trapezoid)");
}

struct MethodFlags {
  std::string name = "ig";
  std::size_t steps = 50;
  std::string rule = "right";
  /// Waypoints separated by ';', each a csv row.
  std::string path;
  /// Feature order for an axis-sequential path, as a csv row.
  std::string axis_order;
  std::uint64_t seed = 0;
  std::optional<std::size_t> samples;
};

inline void add_method_flags(CLI::App& app, MethodFlags& f, bool required = true) {
  app.add_option("--method", f.name,
                 "ig, path, gradients, grad_times_input, shapley, deeplift, lrp, guided or deconvnet")
      ->required(required);
  app.add_option("--steps", f.steps, "Riemann steps m")->capture_default_str();
  app.add_option("--rule", f.rule, "left, right, midpoint or trapezoid")->capture_default_str();
  app.add_option("--path", f.path, "polyline waypoints, e.g. \"1,0\" or \"1,0;1,0.5\"");
  app.add_option("--axis-order", f.axis_order, "feature order for an axis-sequential path, e.g. \"1,0\"");
  app.add_option("--seed", f.seed, "seed for sampled methods and audits")->capture_default_str();
  app.add_option("--samples", f.samples, "orderings for sampled Shapley-Shubik");
}

inline MethodSpec make_method(const MethodFlags& f) {
  const RiemannConfig config{f.steps, parse_rule(f.rule)};
  const auto& n = f.name;
  if (n == "ig" || n == "integrated_gradients") return method::IntegratedGradients{config};
  if (n == "path" || n == "path_method") {
    if (!f.path.empty() && !f.axis_order.empty()) {
      throw ValidationError("give either --path or --axis-order, not both");
    }
    if (!f.axis_order.empty()) {
      std::vector<std::size_t> order;
      for (double v : parse_csv_row(f.axis_order, "axis order")) {
        if (v < 0 || v != std::floor(v)) throw ValidationError("axis order entries must be feature indices");
        order.push_back(static_cast<std::size_t>(v));
      }
      return method::PathMethod{path::AxisSequential{std::move(order)}, config};
    }
    if (f.path.empty()) return method::PathMethod{path::Straightline{}, config};
    path::Polyline poly;
    std::size_t start = 0;
    while (true) {
      const auto semi = f.path.find(';', start);
      poly.waypoints.push_back(Tensor::vector(parse_csv_row(f.path.substr(start, semi - start), "path waypoint")));
      if (semi == std::string::npos) break;
      start = semi + 1;
    }
    return method::PathMethod{std::move(poly), config};
  }
  if (n == "gradients") return method::Gradients{};
  if (n == "grad_times_input") return method::GradTimesInput{};
  if (n == "shapley" || n == "shapley_shubik" || n == "shapley_exact") {
    if (f.samples && n != "shapley_exact") {
      return method::ShapleyShubik{method::ShapleySampled{*f.samples, f.seed}};
    }
    return method::ShapleyShubik{method::ShapleyExact{}};
  }
  if (n == "shapley_sampled") return method::ShapleyShubik{method::ShapleySampled{f.samples.value_or(1000), f.seed}};
  if (n == "deeplift" || n == "deeplift_rescale") return method::DiscreteGradient{method::DiscreteVariant::DeepLiftRescale};
  if (n == "lrp" || n == "lrp_zero_baseline") return method::DiscreteGradient{method::DiscreteVariant::LrpZeroBaseline};
  if (n == "guided") return method::ModifiedBackprop{BackpropRule::Guided};
  if (n == "deconvnet") return method::ModifiedBackprop{BackpropRule::Deconvnet};
  throw ValidationError("unknown method '" + n + "'");
}

inline json method_config(const MethodSpec& m) {
  json j = {{"name", method_name(m)}};
  std::visit(overloaded{
                 [&](const method::IntegratedGradients& ig) {
                   j["steps"] = ig.config.steps;
                   j["rule"] = riemann_rule_name(ig.config.rule);
                 },
                 [&](const method::PathMethod& p) {
                   j["steps"] = p.config.steps;
                   j["rule"] = riemann_rule_name(p.config.rule);
                   std::visit(overloaded{
                                  [&](const path::Straightline&) { j["path"] = "straightline"; },
                                  [&](const path::Polyline& poly) {
                                    json w = json::array();
                                    for (const auto& t : poly.waypoints) w.push_back(t.values());
                                    j["path"] = {{"polyline", w}};
                                  },
                                  [&](const path::AxisSequential& a) { j["path"] = {{"axis_sequential", a.order}}; },
                              },
                              p.path);
                 },
                 [&](const method::ShapleyShubik& s) {
                   if (const auto* sampled = std::get_if<method::ShapleySampled>(&s.mode)) {
                     j["orderings"] = sampled->orderings;
                     j["seed"] = sampled->seed;
                   }
                 },
                 [](const auto&) {},
             },
             m);
  return j;
}

// ---------------------------------------------------------------------------
// Output

struct OutputFlags {
  std::string out;
  std::string format = "json";
  std::string record;
};

inline std::string format_csv(const AttributionResult& r) {
  std::string out = "feature,value\n";
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    out += std::to_string(i) + "," + detail::format_double(r.values[i], 12) + "\n";
  }
  return out;
}

inline json result_json(const AttributionResult& r, const Tensor& x, const Tensor& baseline,
                        const std::string& model_hash) {
  return {{"format_version", kResultFormatVersion},
          {"kind", "attribution"},
          {"method", method_config(r.method)},
          {"model_hash", model_hash},
          {"input", x.values()},
          {"baseline", baseline.values()},
          {"values", r.values.values()},
          {"output_at_input", r.output_at_input},
          {"output_at_baseline", r.output_at_baseline},
          {"completeness_gap", r.completeness_gap},
          {"model_calls", r.model_calls}};
}

/// Attribution values from a result document in either output format.
inline std::vector<double> read_attribution_values(const std::string& text) {
  const auto t = trim(text);
  if (!t.empty() && t.front() == '{') {
    try {
      return json::parse(t).at("values").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw ValidationError(std::string("result document: ") + e.what());
    }
  }
  std::vector<double> out;
  std::size_t start = 0;
  bool header = true;
  while (start < t.size()) {
    const auto end = std::min(t.find('\n', start), t.size());
    const auto line = trim(std::string_view(t).substr(start, end - start));
    start = end + 1;
    if (line.empty()) continue;
    if (header) {
      if (line != "feature,value") throw ValidationError("result csv must start with 'feature,value'");
      header = false;
      continue;
    }
    const auto row = parse_csv_row(line, "result csv");
    if (row.size() != 2 || row[0] != static_cast<double>(out.size())) {
      throw ValidationError("result csv rows must be 'index,value' in feature order");
    }
    out.push_back(row[1]);
  }
  return out;
}

/// Writes `data` to `path` atomically, or to `out` when path is empty.
inline void emit(const std::string& path, const std::string& data, std::ostream& out) {
  if (path.empty()) {
    out << data;
  } else {
    detail::write_file_atomic(path, data);
  }
}

struct RunContext {
  std::vector<std::string> command_line;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
};

inline void write_record(const std::string& path, const RunContext& ctx, json config, const std::string& model_hash,
                         const std::string& output) {
  if (path.empty()) return;
  const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - ctx.started);
  const json record = {{"command_line", ctx.command_line},
                       {"config", std::move(config)},
                       {"model_hash", model_hash},
                       {"result_digest", "fnv1a64:" + detail::hex64(detail::fnv1a(output))},
                       {"elapsed_ms", elapsed.count()}};
  detail::write_file_atomic(path, record.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Commands

struct AttributeFlags {
  std::string model;
  std::string input;
  std::string baseline = "zeros";
  MethodFlags method;
  OutputFlags output;
  unsigned threads = 1;
};

inline int cmd_attribute(const AttributeFlags& f, const RunContext& ctx, std::ostream& out) {
  const auto g = load_model_file(f.model);
  const auto x = read_input(f.input);
  const auto baseline = parse_baseline(f.baseline);
  const auto m = make_method(f.method);
  if (f.output.format != "json" && f.output.format != "csv") {
    throw ValidationError("unknown format '" + f.output.format + "' (expected json or csv)");
  }
  const auto r = attribute(g, x, baseline, m, {f.threads});
  const auto hash = model_hash(g);
  const auto doc = result_json(r, x, resolve_baseline(baseline, x), hash);
  const auto text = f.output.format == "json" ? doc.dump(2) + "\n" : format_csv(r);
  emit(f.output.out, text, out);
  json config = {{"command", "attribute"},
                 {"model", f.model},
                 {"method", doc["method"]},
                 {"input", doc["input"]},
                 {"baseline", doc["baseline"]},
                 {"format", f.output.format},
                 {"threads", f.threads}};
  write_record(f.output.record, ctx, std::move(config), hash, text);
  return kOk;
}

struct StepsFlags {
  std::string model;
  std::string input;
  std::string baseline = "zeros";
  double tol = 0.05;
  std::size_t min_steps = 20;
  std::size_t max_steps = 300;
  std::string rule = "right";
  OutputFlags output;
  unsigned threads = 1;
};

inline int cmd_steps(const StepsFlags& f, const RunContext& ctx, std::ostream& out) {
  const auto g = load_model_file(f.model);
  const auto x = read_input(f.input);
  const auto baseline = parse_baseline(f.baseline);
  const auto sel = adaptive_steps(g, x, baseline, {f.tol, f.min_steps, f.max_steps, parse_rule(f.rule)}, {f.threads});
  const double delta = std::abs(sel.result.output_at_input - sel.result.output_at_baseline);

  std::string text;
  text += sel.converged ? "chosen m: " + std::to_string(sel.steps) + "\n"
                        : "budget exhausted: best m " + std::to_string(sel.steps) + "\n";
  text += "target gap: " + detail::format_double(f.tol * delta, 6) + " (" + detail::format_double(f.tol, 6) +
          " of |F(x) - F(x')| = " + detail::format_double(delta, 6) + ")\n";
  text += "m,gap\n";
  json trajectory = json::array();
  for (const auto& [m, gap] : sel.trajectory) {
    text += std::to_string(m) + "," + detail::format_double(gap, 12) + "\n";
    trajectory.push_back({{"steps", m}, {"completeness_gap", gap}});
  }
  text += "attributions: ";
  for (std::size_t i = 0; i < sel.result.values.size(); ++i) {
    text += (i ? "," : "") + detail::format_double(sel.result.values[i], 12);
  }
  text += "\n";
  out << text;

  const auto hash = model_hash(g);
  json doc = result_json(sel.result, x, resolve_baseline(baseline, x), hash);
  doc["kind"] = "step_selection";
  doc["converged"] = sel.converged;
  doc["chosen_steps"] = sel.steps;
  doc["tolerance_fraction"] = f.tol;
  doc["trajectory"] = trajectory;
  const auto doc_text = doc.dump(2) + "\n";
  if (!f.output.out.empty()) detail::write_file_atomic(f.output.out, doc_text);
  json config = {{"command", "steps"}, {"model", f.model},     {"input", x.values()},
                 {"tol", f.tol},       {"min", f.min_steps},  {"max", f.max_steps},
                 {"rule", f.rule},     {"threads", f.threads}};
  write_record(f.output.record, ctx, std::move(config), hash, f.output.out.empty() ? text : doc_text);
  return sel.converged ? kOk : kBudgetExhausted;
}

struct AuditFlags {
  std::string model;
  std::string pair;
  MethodFlags method;
  std::string axioms;
  std::size_t trials = 100;
  std::string input;
  std::string baseline = "zeros";
  std::string symmetric;
  std::optional<std::size_t> dummy;
  double completeness_tol = 0.05;
  OutputFlags output;
  unsigned threads = 1;
};

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto at = s.find(sep, start);
    out.push_back(trim(std::string_view(s).substr(start, at - start)));
    if (at == std::string::npos) break;
    start = at + 1;
  }
  return out;
}

inline int cmd_audit(const AuditFlags& f, const RunContext& ctx, std::ostream& out) {
  if (f.model.empty() == f.pair.empty()) throw ValidationError("give exactly one of --model or --pair");
  std::string model_path = f.model;
  std::optional<ModelGraph> partner;
  std::string partner_path;
  if (!f.pair.empty()) {
    const auto parts = split(f.pair, ',');
    if (parts.size() != 2 || parts[0].empty() || parts[1].empty()) {
      throw ValidationError("--pair expects two model files separated by a comma");
    }
    model_path = parts[0];
    partner_path = parts[1];
    partner = load_model_file(partner_path);
  }
  const auto g = load_model_file(model_path);
  const auto m = make_method(f.method);

  AuditConfig config;
  config.seed = f.method.seed;
  config.trials = f.trials;
  config.baseline = parse_baseline(f.baseline);
  config.completeness_tolerance = f.completeness_tol;
  config.partner = partner;
  config.dummy_index = f.dummy;
  if (!f.input.empty()) config.input = read_input(f.input);
  if (!f.axioms.empty() && f.axioms != "all") {
    for (const auto& name : split(f.axioms, ',')) {
      const auto a = parse_axiom(name);
      if (!a) throw ValidationError("unknown axiom '" + name + "'");
      config.axioms.push_back(*a);
    }
  }
  if (!f.symmetric.empty()) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& item : split(f.symmetric, ',')) {
      const auto ij = split(item, ':');
      if (ij.size() != 2) throw ValidationError("--symmetric expects pairs like 0:1,2:3");
      const auto i = parse_real(ij[0], "symmetric pair");
      const auto j = parse_real(ij[1], "symmetric pair");
      if (i < 0 || j < 0 || i != std::floor(i) || j != std::floor(j)) {
        throw ValidationError("--symmetric entries must be feature indices");
      }
      pairs.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
    config.symmetric_pairs = std::move(pairs);
  }

  const auto reports = run_audit(g, m, config, {f.threads});
  const auto hash = model_hash(g);
  json doc = {{"format_version", kResultFormatVersion},
              {"kind", "audit_report"},
              {"model", model_path},
              {"model_hash", hash},
              {"partner", partner ? json(partner_path) : json(nullptr)},
              {"partner_hash", partner ? json(model_hash(*partner)) : json(nullptr)},
              {"method", method_config(m)},
              {"seed", f.method.seed},
              {"reports", json::array()}};
  bool failed = false;
  for (const auto& r : reports) {
    doc["reports"].push_back(report_to_json(r));
    failed = failed || r.verdict == Verdict::Fail;
  }
  const auto text = doc.dump(2) + "\n";
  if (f.output.out.empty()) {
    out << text;
  } else {
    detail::write_file_atomic(f.output.out, text);
    for (const auto& r : reports) {
      out << axiom_name(r.axiom) << ": " << verdict_name(r.verdict) << " (" << r.detail << ")\n";
    }
  }
  json record_config = {{"command", "audit"}, {"model", model_path},   {"partner", doc["partner"]},
                        {"method", doc["method"]}, {"axioms", f.axioms}, {"trials", f.trials},
                        {"seed", f.method.seed}, {"threads", f.threads}};
  write_record(f.output.record, ctx, std::move(record_config), hash, text);
  return failed ? kAuditFailed : kOk;
}

struct RenderFlags {
  std::string attrib;
  std::string shape;
  std::string base;
  std::string out;
};

inline int cmd_render(const RenderFlags& f, std::ostream& out) {
  const auto values = read_attribution_values(detail::read_file(f.attrib));
  const auto shape = parse_shape(f.shape);
  std::optional<GrayImage> base;
  if (!f.base.empty()) base = read_pgm(detail::read_file(f.base));
  const auto img = render_heatmap(values, shape, base ? &*base : nullptr);
  const auto normalization =
      "normalization max-abs, divisor " + detail::format_double(heatmap_divisor(aggregate_channels(values, shape)));
  detail::write_file_atomic(f.out, write_ppm(img, normalization));
  out << "wrote " << f.out << " (" << shape.height << "x" << shape.width << ", " << normalization << ")\n";
  return kOk;
}

inline int cmd_fixtures(const std::string& dir, std::ostream& out) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create directory '" + dir + "': " + ec.message());
  for (const auto& id : standard_fixtures()) {
    const auto path = std::filesystem::path(dir) / (fixture_name(id) + ".model");
    save_model_file(path, build_fixture(id));
    out << path.string() << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Feature attribution and axiom audits for small computational-graph models", "intgrad"};
  app.require_subcommand(1);

  RunContext ctx;
  for (int k = 0; k < argc; ++k) ctx.command_line.emplace_back(argv[k]);

  AttributeFlags attr;
  auto* attribute_cmd = app.add_subcommand("attribute", "Compute attributions for one input");
  attribute_cmd->add_option("--model", attr.model, "model document")->required();
  attribute_cmd->add_option("--input", attr.input, "csv row, csv file or PGM image")->required();
  attribute_cmd->add_option("--baseline", attr.baseline, "zeros, constant:<v>, csv row or file")->capture_default_str();
  add_method_flags(*attribute_cmd, attr.method);
  attribute_cmd->add_option("--out", attr.output.out, "result file (stdout when absent)");
  attribute_cmd->add_option("--format", attr.output.format, "json or csv")->capture_default_str();
  attribute_cmd->add_option("--record", attr.output.record, "run record file");
  attribute_cmd->add_option("--threads", attr.threads, "worker threads")->capture_default_str();

  StepsFlags steps;
  auto* steps_cmd = app.add_subcommand("steps", "Pick Riemann steps by doubling until completeness holds");
  steps_cmd->add_option("--model", steps.model, "model document")->required();
  steps_cmd->add_option("--input", steps.input, "csv row, csv file or PGM image")->required();
  steps_cmd->add_option("--baseline", steps.baseline, "zeros, constant:<v>, csv row or file")->capture_default_str();
  steps_cmd->add_option("--tol", steps.tol, "allowed gap as a fraction of |F(x) - F(x')|")->capture_default_str();
  steps_cmd->add_option("--min", steps.min_steps, "first step count")->capture_default_str();
  steps_cmd->add_option("--max", steps.max_steps, "largest step count")->capture_default_str();
  steps_cmd->add_option("--rule", steps.rule, "left, right, midpoint or trapezoid")->capture_default_str();
  steps_cmd->add_option("--out", steps.output.out, "JSON report file");
  steps_cmd->add_option("--record", steps.output.record, "run record file");
  steps_cmd->add_option("--threads", steps.threads, "worker threads")->capture_default_str();

  AuditFlags audit;
  auto* audit_cmd = app.add_subcommand("audit", "Audit a method against the attribution axioms");
  audit_cmd->add_option("--model", audit.model, "model document");
  audit_cmd->add_option("--pair", audit.pair, "two equivalent models a,b; b is the invariance partner");
  add_method_flags(*audit_cmd, audit.method);
  audit_cmd->add_option("--axioms", audit.axioms, "comma list of axioms, default all");
  audit_cmd->add_option("--trials", audit.trials, "random trials per audit")->capture_default_str();
  audit_cmd->add_option("--input", audit.input, "fixed evaluation point");
  audit_cmd->add_option("--baseline", audit.baseline, "zeros, constant:<v>, csv row or file")->capture_default_str();
  audit_cmd->add_option("--symmetric", audit.symmetric, "declared symmetric pairs, e.g. 0:1,2:3");
  audit_cmd->add_option("--dummy", audit.dummy, "declared dummy feature");
  audit_cmd->add_option("--completeness-tol", audit.completeness_tol, "completeness tolerance")->capture_default_str();
  audit_cmd->add_option("--out", audit.output.out, "report file (stdout when absent)");
  audit_cmd->add_option("--record", audit.output.record, "run record file");
  audit_cmd->add_option("--threads", audit.threads, "worker threads")->capture_default_str();

  RenderFlags render;
  auto* render_cmd = app.add_subcommand("render", "Render attributions as a green/red heatmap (PPM)");
  render_cmd->add_option("--attrib", render.attrib, "result file from 'attribute'")->required();
  render_cmd->add_option("--shape", render.shape, "HxW or HxWxC")->required();
  render_cmd->add_option("--base", render.base, "grayscale PGM base image");
  render_cmd->add_option("--out", render.out, "output PPM")->required();

  std::string fixtures_dir;
  auto* fixtures_cmd = app.add_subcommand("fixtures", "Write every built-in fixture as a model document");
  fixtures_cmd->add_option("--out-dir", fixtures_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kValidation;
  }

  try {
    if (*attribute_cmd) return cmd_attribute(attr, ctx, out);
    if (*steps_cmd) return cmd_steps(steps, ctx, out);
    if (*audit_cmd) return cmd_audit(audit, ctx, out);
    if (*render_cmd) return cmd_render(render, out);
    if (*fixtures_cmd) return cmd_fixtures(fixtures_dir, out);
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kValidation;
}

}  // namespace intgrad::cli
