#ifndef HONEY_AST_HPP
#define HONEY_AST_HPP

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "honey/error.hpp"

namespace honey {

struct ArgValue {
  enum class Kind {
    channel_var,       // $name
    channel_regex,     // #pattern
    string_literal,    // "quoted" or a bare word
    number_literal,    // 0.1
    numeric_equation,  // =2,3,+
    string_equation,   // &The ,cat,+
    record_equation,   // "value,3,*" once an operator claims it
    non_channel_ref,   // %name%
  };

  Kind kind = Kind::string_literal;
  // Variable name, pattern, literal text or equation body (sigil stripped).
  std::string text;
  double number = 0.0;
  // Written between double quotes in the source.
  bool quoted = false;

  friend bool operator==(const ArgValue&, const ArgValue&) = default;
};

struct Argument {
  std::string name;  // empty for anonymous (positional) arguments
  ArgValue value;

  friend bool operator==(const Argument&, const Argument&) = default;
};

struct Statement;
using Block = std::vector<Statement>;

struct Comment {
  std::string text;
  friend bool operator==(const Comment&, const Comment&) = default;
};

struct Config {
  std::string key;
  std::vector<Argument> args;
  friend bool operator==(const Config&, const Config&) = default;
};

struct OperatorStmt {
  std::optional<std::string> target;
  bool merge = false;  // "+="
  std::string op;
  std::vector<Argument> args;
  friend bool operator==(const OperatorStmt&, const OperatorStmt&) = default;
};

struct FunctionDef {
  std::string name;
  std::vector<ArgValue> params;  // channel_var or non_channel_ref
  Block body;
  friend bool operator==(const FunctionDef&, const FunctionDef&);
};

struct Return {
  ArgValue value;
  friend bool operator==(const Return&, const Return&) = default;
};

struct Call {
  std::optional<std::string> target;
  bool merge = false;
  std::string function;
  std::vector<Argument> args;
  friend bool operator==(const Call&, const Call&) = default;
};

struct Include {
  std::string path;
  friend bool operator==(const Include&, const Include&) = default;
};

struct SetVar {
  std::string name;
  ArgValue value;
  friend bool operator==(const SetVar&, const SetVar&) = default;
};

struct If {
  ArgValue condition;  // numeric_equation
  Block then_body;
  std::optional<Block> else_body;
  friend bool operator==(const If&, const If&);
};

struct Group {
  std::string name;
  Block body;
  friend bool operator==(const Group&, const Group&);
};

struct RecursiveDecl {
  std::string var;
  friend bool operator==(const RecursiveDecl&, const RecursiveDecl&) = default;
};

struct GlobalDecl {
  std::string var;
  friend bool operator==(const GlobalDecl&, const GlobalDecl&) = default;
};

struct Statement {
  using Node = std::variant<Comment, Config, OperatorStmt, FunctionDef, Return, Call, Include,
                            SetVar, If, Group, RecursiveDecl, GlobalDecl>;
  Node node;
  SourceLocation loc;

  template <class T>
  const T* as() const {
    return std::get_if<T>(&node);
  }

  // Structural equality; source locations are ignored.
  friend bool operator==(const Statement& a, const Statement& b) { return a.node == b.node; }
};

}  // namespace honey

#endif  // HONEY_AST_HPP
