#ifndef HONEY_ERROR_HPP
#define HONEY_ERROR_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace honey {

struct SourceLocation {
  std::string file;
  int line = 0;

  std::string str() const;
  friend bool operator==(const SourceLocation&, const SourceLocation&) = default;
};

enum class Errc {
  syntax,
  parse,
  order,
  header,
  io,
  pattern,
  unbound_variable,
  unknown_operator,
  argument,
  infinite_recursion,
  recursion,
  include_cycle,
  type,
  echo_past_in_realtime,
  regex,
  rename_collision,
  stack,
  math,
  unbound_arg,
  unknown_token,
  cycle,
  time_travel,
  pending_overflow,
  config,
  internal,
};

const char* errc_name(Errc code);

// Every failure raised by the toolchain. Compile-side errors always carry a
// location; runtime errors carry one when the offending node is known.
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string message, std::optional<SourceLocation> loc = std::nullopt);

  Errc code() const noexcept { return code_; }
  const std::optional<SourceLocation>& location() const noexcept { return loc_; }
  const std::string& message() const noexcept { return message_; }

 private:
  static std::string render(Errc code, const std::string& message,
                            const std::optional<SourceLocation>& loc);

  Errc code_;
  std::string message_;
  std::optional<SourceLocation> loc_;
};

enum class Severity { warning, error };

struct Diagnostic {
  Severity severity = Severity::error;
  Errc code = Errc::internal;
  std::string message;
  std::optional<SourceLocation> loc;

  std::string str() const;
};

bool has_errors(const std::vector<Diagnostic>& diags);

}  // namespace honey

#endif  // HONEY_ERROR_HPP
