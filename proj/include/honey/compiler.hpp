#ifndef HONEY_COMPILER_HPP
#define HONEY_COMPILER_HPP

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "honey/ast.hpp"
#include "honey/graph.hpp"

namespace honey {

enum class ExecMode { streaming, static_mode, realtime };

const char* mode_name(ExecMode mode);
std::optional<ExecMode> parse_mode(std::string_view name);

// Returns the text of an included file; throws Errc::io when missing.
using SourceLoader = std::function<std::string(const std::string& path)>;

std::string read_text_file(const std::string& path);

struct CompileOptions {
  ExecMode mode = ExecMode::streaming;
  // Replace the @data input / output lists when set (command line flags).
  std::optional<std::vector<std::string>> inputs;
  std::optional<std::vector<std::string>> outputs;
  int max_call_depth = 1000;
  std::size_t max_nodes = 100000;
  SourceLoader loader;  // read_text_file when empty
};

struct CompiledProgram {
  FlowGraph graph;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

// Lowers a parsed program. `file` anchors relative paths (includes, data
// files, save targets). Throws Error with a source location.
CompiledProgram compile(const Block& program, const std::string& file, const CompileOptions& options = {});
CompiledProgram compile_source(std::string_view source, const std::string& file,
                               const CompileOptions& options = {});
CompiledProgram compile_file(const std::string& path, const CompileOptions& options = {});

// Mode-specific checks plus the compiler's warnings. Never throws.
std::vector<Diagnostic> validate(const FlowGraph& graph, ExecMode mode);

// Deterministic Graphviz text. Groups become clusters, back edges are dashed.
std::string export_dot(const FlowGraph& graph);

}  // namespace honey

#endif  // HONEY_COMPILER_HPP
