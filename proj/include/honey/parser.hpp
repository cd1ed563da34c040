#ifndef HONEY_PARSER_HPP
#define HONEY_PARSER_HPP

#include <string>
#include <string_view>
#include <vector>

#include "honey/ast.hpp"

namespace honey {

// Whole-file parse. One statement per physical line; function / if / group
// blocks are matched and nested. Throws Errc::syntax with file and line.
Block parse_program(std::string_view source, const std::string& file = "<input>");

// One source line, classified without regard to block structure.
struct ParsedLine {
  enum class Kind { blank, statement, open_block, else_branch, close_function, close_if, close_group };
  Kind kind = Kind::blank;
  Statement stmt;           // set for statement and open_block
  std::string close_label;  // optional name after endgroup
};

ParsedLine parse_line(std::string_view line, const SourceLocation& loc);

// Simple (non-block) statements only; block keywords raise SyntaxError.
Statement parse_statement(std::string_view line, const SourceLocation& loc = {});

// Classifies one argument token (already unquoted when `quoted`).
ArgValue classify_argument(std::string_view token, bool quoted = false,
                           const SourceLocation& loc = {});

// Source form of an argument value (without quotes).
std::string raw_text(const ArgValue& v);

// Canonical pretty-printer: parse_program(print_program(b)) == b.
std::string print_program(const Block& block);
std::string print_argument(const Argument& a);

bool is_identifier(std::string_view s);

}  // namespace honey

#endif  // HONEY_PARSER_HPP
