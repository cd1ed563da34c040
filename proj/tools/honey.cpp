// honey: check, graph and run Honey programs.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "honey/compiler.hpp"
#include "honey/engine.hpp"
#include "honey/io.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kDiagnostics = 1;
constexpr int kRuntime = 2;

struct Settings {
  std::string program;
  std::string mode = "streaming";
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::size_t max_pending = 1000000;
  int max_depth = 1000;
  bool instrument = false;
  bool presort = false;
  std::string dot_path;
};

// Compiles and validates; prints diagnostics. Returns false on any error.
bool build(const Settings& s, honey::ExecMode mode, honey::CompiledProgram& out) {
  honey::CompileOptions opts;
  opts.mode = mode;
  opts.max_call_depth = s.max_depth;
  if (!s.inputs.empty()) opts.inputs = s.inputs;
  if (!s.outputs.empty()) opts.outputs = s.outputs;
  try {
    out = honey::compile_file(s.program, opts);
  } catch (const honey::Error& e) {
    std::cerr << e.what() << "\n";
    return false;
  }
  auto diags = honey::validate(out.graph, mode);
  for (const auto& d : diags) std::cerr << d.str() << "\n";
  return !honey::has_errors(diags);
}

int cmd_check(const Settings& s, honey::ExecMode mode) {
  honey::CompiledProgram prog;
  if (!build(s, mode, prog)) return kDiagnostics;
  std::cout << s.program << ": ok (" << prog.graph.nodes.size() << " nodes, " << prog.graph.pipes.size()
            << " pipes)\n";
  return kOk;
}

int cmd_graph(const Settings& s, honey::ExecMode mode) {
  honey::CompiledProgram prog;
  if (!build(s, mode, prog)) return kDiagnostics;
  std::string dot = honey::export_dot(prog.graph);
  if (s.dot_path.empty()) {
    std::cout << dot;
    return kOk;
  }
  std::ofstream out(s.dot_path);
  out << dot;
  if (!out) {
    std::cerr << "IoError: cannot write '" << s.dot_path << "'\n";
    return kRuntime;
  }
  return kOk;
}

int cmd_run(const Settings& s, honey::ExecMode mode) {
  if (s.presort && mode != honey::ExecMode::static_mode) {
    std::cerr << "ConfigError: --presort requires --mode static\n";
    return kDiagnostics;
  }
  honey::CompiledProgram prog;
  if (!build(s, mode, prog)) return kDiagnostics;

  honey::RunOptions opts;
  opts.max_pending = s.max_pending;
  honey::FileSinkProvider sinks;
  honey::RunReport report;
  try {
    if (mode == honey::ExecMode::realtime) {
      honey::LineStreamSource live(std::cin);
      honey::SystemClock clock;
      report = honey::run_realtime(prog.graph, live, sinks, clock, opts);
    } else {
      auto source = honey::open_datasets(prog.inputs, !s.presort);
      if (s.presort) {
        auto records = honey::read_all(*source);
        std::stable_sort(records.begin(), records.end(),
                         [](const honey::Record& a, const honey::Record& b) { return a.time < b.time; });
        source = std::make_unique<honey::VectorSource>(std::move(records));
      }
      report = mode == honey::ExecMode::static_mode ? honey::run_static(prog.graph, *source, sinks, opts)
                                                    : honey::run_streaming(prog.graph, *source, sinks, opts);
    }
  } catch (const honey::Error& e) {
    sinks.remove_all();
    std::cerr << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    sinks.remove_all();
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  for (const auto& d : report.diagnostics) std::cerr << d.str() << "\n";
  if (report.diagnostics_dropped > 0)
    std::cerr << report.diagnostics_dropped << " further runtime warning(s) suppressed\n";
  std::cout << report.str();
  if (s.instrument) std::cout << honey::memory_report(report);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Honey dataflow language for sparse time series"};
  app.require_subcommand(1);
  Settings s;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("program", s.program, "Honey program file")->required();
    sub->add_option("--mode", s.mode, "streaming, static or realtime")
        ->check(CLI::IsMember({"streaming", "static", "realtime"}));
    sub->add_option("--input", s.inputs, "Dataset file (repeatable); replaces @data input");
    sub->add_option("--max-depth", s.max_depth, "Function call depth limit");
  };

  CLI::App* check = app.add_subcommand("check", "Parse, compile and validate a program");
  add_common(check);
  CLI::App* graph = app.add_subcommand("graph", "Write the compiled flow graph as DOT");
  add_common(graph);
  graph->add_option("-o,--output", s.dot_path, "DOT file (standard output when omitted)");
  CLI::App* run = app.add_subcommand("run", "Execute a program");
  add_common(run);
  run->add_option("--output", s.outputs, "Output file (repeatable); replaces @data output");
  run->add_option("--max-pending", s.max_pending, "Pending record cap (recursion backstop)");
  run->add_flag("--instrument", s.instrument, "Print per-node memory occupancy");
  run->add_flag("--presort", s.presort, "Sort unordered input by time (static mode)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kDiagnostics;
  }

  honey::ExecMode mode = *honey::parse_mode(s.mode);
  if (check->parsed()) return cmd_check(s, mode);
  if (graph->parsed()) return cmd_graph(s, mode);
  return cmd_run(s, mode);
}
