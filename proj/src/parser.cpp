#include "honey/parser.hpp"

#include <cctype>
#include <sstream>

#include "honey/record.hpp"

namespace honey {

bool operator==(const FunctionDef& a, const FunctionDef& b) {
  return a.name == b.name && a.params == b.params && a.body == b.body;
}
bool operator==(const If& a, const If& b) {
  return a.condition == b.condition && a.then_body == b.then_body && a.else_body == b.else_body;
}
bool operator==(const Group& a, const Group& b) { return a.name == b.name && a.body == b.body; }

namespace {

struct Token {
  std::string text;  // raw, quotes included
};

[[noreturn]] void syntax(const std::string& msg, const SourceLocation& loc) {
  throw Error(Errc::syntax, msg, loc);
}

std::vector<std::string> tokenize(std::string_view line, const SourceLocation& loc) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) break;
    std::string tok;
    bool in_quote = false;
    while (i < line.size() && (in_quote || !std::isspace(static_cast<unsigned char>(line[i])))) {
      char c = line[i];
      if (in_quote && c == '\\' && i + 1 < line.size() && (line[i + 1] == '"' || line[i + 1] == '\\')) {
        tok += c;
        tok += line[i + 1];
        i += 2;
        continue;
      }
      if (c == '"') in_quote = !in_quote;
      tok += c;
      ++i;
    }
    if (in_quote) syntax("unterminated string", loc);
    out.push_back(std::move(tok));
  }
  return out;
}

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() && (s[i + 1] == '"' || s[i + 1] == '\\')) {
      out += s[i + 1];
      ++i;
    } else {
      out += s[i];
    }
  }
  return out;
}

std::string escape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '"') {
      out += "\\\"";
    } else if (c == '\\' && (i + 1 == s.size() || s[i + 1] == '"' || s[i + 1] == '\\')) {
      out += "\\\\";
    } else {
      out += c;
    }
  }
  return out;
}

// Splits `token` into its (unquoted) body; rejects stray quotes.
std::pair<std::string, bool> unquote(std::string_view token, const SourceLocation& loc) {
  if (token.size() >= 2 && token.front() == '"' && token.back() == '"') {
    std::string_view inner = token.substr(1, token.size() - 2);
    // An unescaped quote inside means two strings glued together.
    for (std::size_t i = 0; i < inner.size(); ++i) {
      if (inner[i] == '\\' && i + 1 < inner.size()) {
        ++i;
      } else if (inner[i] == '"') {
        syntax("malformed argument " + std::string(token), loc);
      }
    }
    return {unescape(inner), true};
  }
  if (token.find('"') != std::string_view::npos) syntax("malformed argument " + std::string(token), loc);
  return {std::string(token), false};
}

std::string var_name(std::string_view token, char sigil, const SourceLocation& loc) {
  if (token.empty() || token.front() != sigil) syntax("expected a channel variable, got '" + std::string(token) + "'", loc);
  std::string_view name = token.substr(1);
  if (!is_identifier(name)) syntax("malformed variable reference '" + std::string(token) + "'", loc);
  return std::string(name);
}

std::string non_channel_name(std::string_view token, const SourceLocation& loc) {
  if (token.size() >= 3 && token.front() == '%' && token.back() == '%' &&
      is_identifier(token.substr(1, token.size() - 2)))
    return std::string(token.substr(1, token.size() - 2));
  if (is_identifier(token)) return std::string(token);
  syntax("malformed non-channel variable '" + std::string(token) + "'", loc);
}

Argument parse_argument(const std::string& token, const SourceLocation& loc) {
  Argument arg;
  std::string_view body = token;
  std::size_t colon = token.find(':');
  if (colon != std::string::npos && colon > 0 && is_identifier(std::string_view(token).substr(0, colon))) {
    arg.name = token.substr(0, colon);
    body = std::string_view(token).substr(colon + 1);
  }
  auto [text, quoted] = unquote(body, loc);
  arg.value = classify_argument(text, quoted, loc);
  return arg;
}

std::vector<Argument> parse_arguments(const std::vector<std::string>& tokens, std::size_t from,
                                      const SourceLocation& loc) {
  std::vector<Argument> args;
  for (std::size_t i = from; i < tokens.size(); ++i) args.push_back(parse_argument(tokens[i], loc));
  return args;
}

void expect_count(const std::vector<std::string>& tokens, std::size_t n, const char* what,
                  const SourceLocation& loc) {
  if (tokens.size() != n) syntax(std::string(what) + " takes " + std::to_string(n - 1) + " argument(s)", loc);
}

ParsedLine block_open(Statement s) {
  ParsedLine out;
  out.kind = ParsedLine::Kind::open_block;
  out.stmt = std::move(s);
  return out;
}

ParsedLine simple(Statement s) {
  ParsedLine out;
  out.kind = ParsedLine::Kind::statement;
  out.stmt = std::move(s);
  return out;
}

}  // namespace

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return true;
}

ArgValue classify_argument(std::string_view token, bool quoted, const SourceLocation& loc) {
  ArgValue v;
  v.quoted = quoted;
  if (quoted) {
    if (!token.empty() && token.front() == '&') {
      v.kind = ArgValue::Kind::string_equation;
      v.text = std::string(token.substr(1));
    } else {
      v.kind = ArgValue::Kind::string_literal;
      v.text = std::string(token);
    }
    return v;
  }
  if (token.empty()) {
    v.kind = ArgValue::Kind::string_literal;
    return v;
  }
  switch (token.front()) {
    case '=':
      if (token.size() == 1) syntax("empty numeric equation", loc);
      v.kind = ArgValue::Kind::numeric_equation;
      v.text = std::string(token.substr(1));
      return v;
    case '&':
      v.kind = ArgValue::Kind::string_equation;
      v.text = std::string(token.substr(1));
      return v;
    case '#':
      v.kind = ArgValue::Kind::channel_regex;
      v.text = std::string(token.substr(1));
      return v;
    case '$':
      v.kind = ArgValue::Kind::channel_var;
      v.text = var_name(token, '$', loc);
      return v;
    default: break;
  }
  if (token.size() >= 3 && token.front() == '%' && token.back() == '%' &&
      is_identifier(token.substr(1, token.size() - 2))) {
    v.kind = ArgValue::Kind::non_channel_ref;
    v.text = std::string(token.substr(1, token.size() - 2));
    return v;
  }
  if (auto n = parse_number(token)) {
    v.kind = ArgValue::Kind::number_literal;
    v.number = *n;
    return v;
  }
  v.kind = ArgValue::Kind::string_literal;
  v.text = std::string(token);
  return v;
}

std::string raw_text(const ArgValue& v) {
  using K = ArgValue::Kind;
  switch (v.kind) {
    case K::channel_var: return "$" + v.text;
    case K::channel_regex: return "#" + v.text;
    case K::string_literal: return v.text;
    case K::number_literal: return format_number(v.number);
    case K::numeric_equation: return "=" + v.text;
    case K::string_equation: return "&" + v.text;
    case K::record_equation: return v.text;
    case K::non_channel_ref: return "%" + v.text + "%";
  }
  return v.text;
}

ParsedLine parse_line(std::string_view line, const SourceLocation& loc) {
  std::size_t first = line.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  std::string_view body = line.substr(first);
  while (!body.empty() && (body.back() == '\r' || body.back() == '\n' || body.back() == ' ' || body.back() == '\t'))
    body.remove_suffix(1);

  if (body.front() == '#') return simple(Statement{Comment{std::string(body.substr(1))}, loc});

  if (body.front() == '@') {
    auto tokens = tokenize(body.substr(1), loc);
    if (tokens.empty() || !is_identifier(tokens[0])) syntax("malformed configuration statement", loc);
    Config c{tokens[0], parse_arguments(tokens, 1, loc)};
    return simple(Statement{std::move(c), loc});
  }

  auto tokens = tokenize(body, loc);
  const std::string& head = tokens[0];

  if (head == "function") {
    if (tokens.size() < 2 || !is_identifier(tokens[1])) syntax("function needs a name", loc);
    FunctionDef f;
    f.name = tokens[1];
    for (std::size_t i = 2; i < tokens.size(); ++i) {
      ArgValue p = classify_argument(tokens[i], false, loc);
      if (p.kind != ArgValue::Kind::channel_var && p.kind != ArgValue::Kind::non_channel_ref)
        syntax("function parameter '" + tokens[i] + "' must be $name or %name%", loc);
      f.params.push_back(std::move(p));
    }
    return block_open(Statement{std::move(f), loc});
  }
  if (head == "endfunction") {
    expect_count(tokens, 1, "endfunction", loc);
    return ParsedLine{ParsedLine::Kind::close_function, {}, {}};
  }
  if (head == "if") {
    expect_count(tokens, 2, "if", loc);
    auto [text, quoted] = unquote(tokens[1], loc);
    ArgValue cond = classify_argument(text, quoted, loc);
    if (cond.kind != ArgValue::Kind::numeric_equation)
      syntax("if expects a numeric equation (=...)", loc);
    return block_open(Statement{If{std::move(cond), {}, std::nullopt}, loc});
  }
  if (head == "else") {
    expect_count(tokens, 1, "else", loc);
    return ParsedLine{ParsedLine::Kind::else_branch, {}, {}};
  }
  if (head == "endif") {
    expect_count(tokens, 1, "endif", loc);
    return ParsedLine{ParsedLine::Kind::close_if, {}, {}};
  }
  if (head == "group") {
    expect_count(tokens, 2, "group", loc);
    auto [name, quoted] = unquote(tokens[1], loc);
    return block_open(Statement{Group{name, {}}, loc});
  }
  if (head == "endgroup") {
    if (tokens.size() > 2) syntax("endgroup takes at most one argument", loc);
    ParsedLine out{ParsedLine::Kind::close_group, {}, {}};
    if (tokens.size() == 2) out.close_label = unquote(tokens[1], loc).first;
    return out;
  }
  if (head == "return") {
    expect_count(tokens, 2, "return", loc);
    ArgValue v = classify_argument(tokens[1], false, loc);
    if (v.kind != ArgValue::Kind::channel_var) syntax("return expects a channel variable", loc);
    return simple(Statement{Return{std::move(v)}, loc});
  }
  if (head == "call") {
    if (tokens.size() < 2 || !is_identifier(tokens[1])) syntax("call needs a function name", loc);
    return simple(Statement{Call{std::nullopt, false, tokens[1], parse_arguments(tokens, 2, loc)}, loc});
  }
  if (head == "include") {
    expect_count(tokens, 2, "include", loc);
    auto [path, quoted] = unquote(tokens[1], loc);
    if (path.empty()) syntax("include needs a path", loc);
    return simple(Statement{Include{path}, loc});
  }
  if (head == "set") {
    expect_count(tokens, 3, "set", loc);
    std::string name = non_channel_name(tokens[1], loc);
    auto [text, quoted] = unquote(tokens[2], loc);
    ArgValue v = classify_argument(text, quoted, loc);
    if (v.kind == ArgValue::Kind::channel_var || v.kind == ArgValue::Kind::channel_regex)
      syntax("set expects a number, a string or an equation", loc);
    return simple(Statement{SetVar{name, std::move(v)}, loc});
  }
  if (head == "recursive") {
    expect_count(tokens, 2, "recursive", loc);
    return simple(Statement{RecursiveDecl{var_name(tokens[1], '$', loc)}, loc});
  }
  if (head == "global") {
    expect_count(tokens, 2, "global", loc);
    return simple(Statement{GlobalDecl{var_name(tokens[1], '$', loc)}, loc});
  }

  std::optional<std::string> target;
  bool merge = false;
  std::size_t op_at = 0;
  if (head.front() == '$') {
    target = var_name(head, '$', loc);
    if (tokens.size() < 3 || (tokens[1] != "=" && tokens[1] != "+="))
      syntax("expected '$var = operator ...' or '$var += operator ...'", loc);
    merge = tokens[1] == "+=";
    op_at = 2;
    if (tokens.size() == 3 && tokens[2].front() == '$') {
      // "$b += $a" is "$b += echo $a".
      OperatorStmt s{target, merge, "echo", parse_arguments(tokens, 2, loc)};
      return simple(Statement{std::move(s), loc});
    }
  }
  const std::string& op = tokens[op_at];
  if (op == "call") {
    if (tokens.size() < op_at + 2 || !is_identifier(tokens[op_at + 1])) syntax("call needs a function name", loc);
    return simple(Statement{Call{target, merge, tokens[op_at + 1], parse_arguments(tokens, op_at + 2, loc)}, loc});
  }
  if (!is_identifier(op)) syntax("expected an operator name, got '" + op + "'", loc);
  static const char* const kReserved[] = {"function", "endfunction", "if", "else", "endif", "group",
                                          "endgroup", "return", "include", "set", "recursive", "global"};
  for (const char* kw : kReserved)
    if (op == kw) syntax("'" + op + "' cannot be used as an operator", loc);
  OperatorStmt s{target, merge, op, parse_arguments(tokens, op_at + 1, loc)};
  return simple(Statement{std::move(s), loc});
}

Statement parse_statement(std::string_view line, const SourceLocation& loc) {
  ParsedLine p = parse_line(line, loc);
  if (p.kind != ParsedLine::Kind::statement) syntax("expected a single statement", loc);
  return std::move(p.stmt);
}

Block parse_program(std::string_view source, const std::string& file) {
  struct Open {
    Statement stmt;
    bool in_else = false;
  };
  std::vector<Open> stack;
  Block top;

  auto current = [&]() -> Block& {
    if (stack.empty()) return top;
    Open& o = stack.back();
    if (auto* f = std::get_if<FunctionDef>(&o.stmt.node)) return f->body;
    if (auto* g = std::get_if<Group>(&o.stmt.node)) return g->body;
    auto& i = std::get<If>(o.stmt.node);
    return o.in_else ? *i.else_body : i.then_body;
  };

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= source.size()) {
    std::size_t end = source.find('\n', pos);
    if (end == std::string_view::npos) end = source.size();
    std::string_view line = source.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    SourceLocation loc{file, line_no};

    ParsedLine p = parse_line(line, loc);
    switch (p.kind) {
      case ParsedLine::Kind::blank: break;
      case ParsedLine::Kind::statement: current().push_back(std::move(p.stmt)); break;
      case ParsedLine::Kind::open_block:
        if (p.stmt.as<FunctionDef>()) {
          for (const Open& o : stack)
            if (o.stmt.as<FunctionDef>()) syntax("nested function definition", loc);
        }
        stack.push_back(Open{std::move(p.stmt), false});
        break;
      case ParsedLine::Kind::else_branch: {
        if (stack.empty() || !stack.back().stmt.as<If>() || stack.back().in_else)
          syntax("else without a matching if", loc);
        std::get<If>(stack.back().stmt.node).else_body.emplace();
        stack.back().in_else = true;
        break;
      }
      case ParsedLine::Kind::close_function:
      case ParsedLine::Kind::close_if:
      case ParsedLine::Kind::close_group: {
        const char* want = p.kind == ParsedLine::Kind::close_function ? "endfunction"
                           : p.kind == ParsedLine::Kind::close_if     ? "endif"
                                                                      : "endgroup";
        if (stack.empty()) syntax(std::string("stray ") + want, loc);
        const Statement& open = stack.back().stmt;
        bool ok = (p.kind == ParsedLine::Kind::close_function && open.as<FunctionDef>()) ||
                  (p.kind == ParsedLine::Kind::close_if && open.as<If>()) ||
                  (p.kind == ParsedLine::Kind::close_group && open.as<Group>());
        if (!ok) syntax(std::string(want) + " does not close the block opened at line " +
                            std::to_string(open.loc.line), loc);
        if (auto* g = open.as<Group>(); g && !p.close_label.empty() && p.close_label != g->name)
          syntax("endgroup \"" + p.close_label + "\" does not match group \"" + g->name + "\"", loc);
        Statement done = std::move(stack.back().stmt);
        stack.pop_back();
        current().push_back(std::move(done));
        break;
      }
    }
    if (end == source.size()) break;
  }
  if (!stack.empty()) {
    const Statement& open = stack.back().stmt;
    const char* what = open.as<FunctionDef>() ? "function" : open.as<If>() ? "if" : "group";
    syntax(std::string("unclosed ") + what + " block", open.loc);
  }
  return top;
}

namespace {

std::string print_value(const ArgValue& v) {
  if (v.quoted) return "\"" + escape(raw_text(v)) + "\"";
  return raw_text(v);
}

void print_block(const Block& block, int depth, std::ostringstream& out);

void print_args(const std::vector<Argument>& args, std::ostringstream& out) {
  for (const auto& a : args) out << ' ' << print_argument(a);
}

void print_statement(const Statement& s, int depth, std::ostringstream& out) {
  std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Comment>) {
          out << indent << '#' << n.text << '\n';
        } else if constexpr (std::is_same_v<T, Config>) {
          out << indent << '@' << n.key;
          print_args(n.args, out);
          out << '\n';
        } else if constexpr (std::is_same_v<T, OperatorStmt>) {
          out << indent;
          if (n.target) out << '$' << *n.target << (n.merge ? " += " : " = ");
          out << n.op;
          print_args(n.args, out);
          out << '\n';
        } else if constexpr (std::is_same_v<T, FunctionDef>) {
          out << indent << "function " << n.name;
          for (const auto& p : n.params) out << ' ' << raw_text(p);
          out << '\n';
          print_block(n.body, depth + 1, out);
          out << indent << "endfunction\n";
        } else if constexpr (std::is_same_v<T, Return>) {
          out << indent << "return " << raw_text(n.value) << '\n';
        } else if constexpr (std::is_same_v<T, Call>) {
          out << indent;
          if (n.target) out << '$' << *n.target << (n.merge ? " += " : " = ");
          out << "call " << n.function;
          print_args(n.args, out);
          out << '\n';
        } else if constexpr (std::is_same_v<T, Include>) {
          out << indent << "include \"" << escape(n.path) << "\"\n";
        } else if constexpr (std::is_same_v<T, SetVar>) {
          out << indent << "set %" << n.name << "% " << print_value(n.value) << '\n';
        } else if constexpr (std::is_same_v<T, If>) {
          out << indent << "if " << print_value(n.condition) << '\n';
          print_block(n.then_body, depth + 1, out);
          if (n.else_body) {
            out << indent << "else\n";
            print_block(*n.else_body, depth + 1, out);
          }
          out << indent << "endif\n";
        } else if constexpr (std::is_same_v<T, Group>) {
          out << indent << "group \"" << escape(n.name) << "\"\n";
          print_block(n.body, depth + 1, out);
          out << indent << "endgroup \"" << escape(n.name) << "\"\n";
        } else if constexpr (std::is_same_v<T, RecursiveDecl>) {
          out << indent << "recursive $" << n.var << '\n';
        } else if constexpr (std::is_same_v<T, GlobalDecl>) {
          out << indent << "global $" << n.var << '\n';
        }
      },
      s.node);
}

void print_block(const Block& block, int depth, std::ostringstream& out) {
  for (const auto& s : block) print_statement(s, depth, out);
}

}  // namespace

std::string print_argument(const Argument& a) {
  std::string out;
  if (!a.name.empty()) out = a.name + ":";
  return out + print_value(a.value);
}

std::string print_program(const Block& block) {
  std::ostringstream out;
  print_block(block, 0, out);
  return out.str();
}

}  // namespace honey
