// Helpers shared by the unit tests and the acceptance suite.
#ifndef HONEY_TESTS_SUPPORT_HPP
#define HONEY_TESTS_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "honey/compiler.hpp"
#include "honey/engine.hpp"
#include "honey/io.hpp"
#include "honey/parser.hpp"

namespace honey::test {

inline CompiledProgram compile_text(const std::string& text, ExecMode mode = ExecMode::streaming) {
  CompileOptions opts;
  opts.mode = mode;
  return compile_source(text, "prog.hny", opts);
}

inline RunReport run_graph(const FlowGraph& g, const std::vector<Record>& input, MemorySinkProvider& sinks,
                           ExecMode mode = ExecMode::streaming, RunOptions opts = {}) {
  VectorSource src(input);
  if (mode == ExecMode::static_mode) return run_static(g, src, sinks, opts);
  return run_streaming(g, src, sinks, opts);
}

// Runs `text` and returns the bytes written to `file`.
inline std::string run_text(const std::string& text, const std::vector<Record>& input,
                            ExecMode mode = ExecMode::streaming, const std::string& file = "out.evt") {
  CompiledProgram p = compile_text(text, mode);
  MemorySinkProvider sinks;
  run_graph(p.graph, input, sinks, mode);
  return sinks.content(file);
}

inline std::vector<Record> parse_evt(const std::string& text) {
  std::istringstream in(text);
  EvtReader reader(in, "<out>");
  reader.check_order = false;
  return read_all(reader);
}

inline std::vector<Record> run_records(const std::string& text, const std::vector<Record>& input,
                                       ExecMode mode = ExecMode::streaming) {
  return parse_evt(run_text(text, input, mode));
}

inline std::vector<Record> only(const std::vector<Record>& rs, const std::string& channel) {
  std::vector<Record> out;
  for (const Record& r : rs)
    if (r.channel == channel) out.push_back(r);
  return out;
}

inline Record rec(std::string c, double t, std::optional<double> v = std::nullopt) {
  Record r;
  r.channel = std::move(c);
  r.time = t;
  r.value = v;
  return r;
}

// Random sparse multichannel series: exponential inter-arrival times, values
// on a coarse grid so ties and repeated values both occur.
inline std::vector<Record> random_ssts(unsigned seed, int channels, std::size_t n, double rate = 10.0,
                                       bool with_ties = true) {
  std::mt19937_64 gen(seed);
  std::exponential_distribution<double> gap(rate);
  std::uniform_int_distribution<int> chan(0, channels - 1);
  std::normal_distribution<double> step(0.0, 1.0);
  std::bernoulli_distribution tie(with_ties ? 0.05 : 0.0);
  std::vector<double> level(static_cast<std::size_t>(channels), 0.0);
  std::vector<Record> out;
  double t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0 || !tie(gen)) t += gap(gen);
    t = std::round(t * 1e6) / 1e6;
    int c = chan(gen);
    level[static_cast<std::size_t>(c)] += step(gen);
    double v = std::round(level[static_cast<std::size_t>(c)] * 1000.0) / 1000.0;
    out.push_back(rec("c" + std::to_string(c), t, v));
  }
  return out;
}

inline std::string to_evt(const std::vector<Record>& rs) {
  std::ostringstream out;
  write_evt(out, rs);
  return out.str();
}

inline bool close(double a, double b, double rel = 1e-9) {
  double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) <= rel * scale;
}

}  // namespace honey::test

#endif  // HONEY_TESTS_SUPPORT_HPP
