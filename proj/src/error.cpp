#include "honey/error.hpp"

#include <algorithm>

namespace honey {

std::string SourceLocation::str() const {
  if (file.empty()) return "line " + std::to_string(line);
  return file + ":" + std::to_string(line);
}

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::syntax: return "SyntaxError";
    case Errc::parse: return "ParseError";
    case Errc::order: return "OrderError";
    case Errc::header: return "HeaderError";
    case Errc::io: return "IoError";
    case Errc::pattern: return "PatternError";
    case Errc::unbound_variable: return "UnboundVariable";
    case Errc::unknown_operator: return "UnknownOperator";
    case Errc::argument: return "ArgumentError";
    case Errc::infinite_recursion: return "InfiniteRecursion";
    case Errc::recursion: return "RecursionError";
    case Errc::include_cycle: return "IncludeCycle";
    case Errc::type: return "TypeError";
    case Errc::echo_past_in_realtime: return "EchoPastInRealtime";
    case Errc::regex: return "RegexError";
    case Errc::rename_collision: return "RenameCollision";
    case Errc::stack: return "StackError";
    case Errc::math: return "MathError";
    case Errc::unbound_arg: return "UnboundArg";
    case Errc::unknown_token: return "UnknownToken";
    case Errc::cycle: return "CycleError";
    case Errc::time_travel: return "TimeTravel";
    case Errc::pending_overflow: return "PendingOverflow";
    case Errc::config: return "ConfigError";
    case Errc::internal: return "InternalError";
  }
  return "Error";
}

Error::Error(Errc code, std::string message, std::optional<SourceLocation> loc)
    : std::runtime_error(render(code, message, loc)),
      code_(code),
      message_(std::move(message)),
      loc_(std::move(loc)) {}

std::string Error::render(Errc code, const std::string& message,
                          const std::optional<SourceLocation>& loc) {
  std::string out;
  if (loc) out += loc->str() + ": ";
  out += errc_name(code);
  out += ": ";
  out += message;
  return out;
}

std::string Diagnostic::str() const {
  std::string out;
  if (loc) out += loc->str() + ": ";
  out += severity == Severity::error ? "error: " : "warning: ";
  out += errc_name(code);
  out += ": ";
  out += message;
  return out;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(),
                     [](const Diagnostic& d) { return d.severity == Severity::error; });
}

}  // namespace honey
