#include "honey/rpn.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "honey/error.hpp"

namespace honey {

namespace {

struct OpInfo {
  std::string_view name;
  RpnProgram::Op op;
  int arity;
};

constexpr OpInfo kOps[] = {
    {"+", RpnProgram::Op::add, 2},  {"-", RpnProgram::Op::sub, 2},
    {"*", RpnProgram::Op::mul, 2},  {"/", RpnProgram::Op::div, 2},
    {"min", RpnProgram::Op::min, 2}, {"max", RpnProgram::Op::max, 2},
    {"neg", RpnProgram::Op::neg, 1}, {"abs", RpnProgram::Op::abs, 1},
    {"<", RpnProgram::Op::lt, 2},   {"<=", RpnProgram::Op::le, 2},
    {">", RpnProgram::Op::gt, 2},   {">=", RpnProgram::Op::ge, 2},
    {"==", RpnProgram::Op::eq, 2},  {"!=", RpnProgram::Op::ne, 2},
};

const OpInfo* find_op(std::string_view token) {
  for (const auto& info : kOps)
    if (info.name == token) return &info;
  return nullptr;
}

int arity(RpnProgram::Op op) {
  for (const auto& info : kOps)
    if (info.op == op) return info.arity;
  return 2;
}

std::vector<std::string_view> split_tokens(std::string_view source) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = source.find(',', start);
    out.push_back(source.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view strip_spaces(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

double apply(RpnProgram::Op op, double a, double b) {
  using Op = RpnProgram::Op;
  switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div:
      if (b == 0.0) throw Error(Errc::math, "division by zero");
      return a / b;
    case Op::min: return std::min(a, b);
    case Op::max: return std::max(a, b);
    case Op::lt: return a < b ? 1.0 : 0.0;
    case Op::le: return a <= b ? 1.0 : 0.0;
    case Op::gt: return a > b ? 1.0 : 0.0;
    case Op::ge: return a >= b ? 1.0 : 0.0;
    case Op::eq: return a == b ? 1.0 : 0.0;
    case Op::ne: return a != b ? 1.0 : 0.0;
    case Op::neg: return -a;
    case Op::abs: return std::fabs(a);
  }
  return 0.0;
}

}  // namespace

int rpn_operator_arity(std::string_view token) {
  const OpInfo* info = find_op(token);
  return info ? info->arity : -1;
}

RpnProgram RpnProgram::compile(std::string_view source, RpnKind kind) {
  RpnProgram prog;
  prog.kind_ = kind;
  prog.source_ = std::string(source);

  int depth = 0;
  for (std::string_view raw : split_tokens(source)) {
    Token tok;
    if (kind == RpnKind::string) {
      if (raw == "+") {
        tok.kind = Token::Kind::op;
        tok.op = Op::add;
      } else if (find_op(strip_spaces(raw)) && strip_spaces(raw) != "+") {
        throw Error(Errc::type, "numeric operator '" + std::string(raw) +
                                    "' in string equation '" + prog.source_ + "'");
      } else {
        // Literals keep their spaces: "The ,little ,+,cat,+".
        tok.kind = Token::Kind::text;
        tok.text = std::string(raw);
      }
    } else {
      std::string_view t = strip_spaces(raw);
      if (auto v = parse_number(t)) {
        tok.kind = Token::Kind::number;
        tok.number = *v;
      } else if (const OpInfo* info = find_op(t)) {
        tok.kind = Token::Kind::op;
        tok.op = info->op;
      } else if (kind == RpnKind::record && t == "value") {
        tok.kind = Token::Kind::value;
      } else if (kind == RpnKind::record && t == "time") {
        tok.kind = Token::Kind::time;
      } else if (kind == RpnKind::record && t.size() > 3 && t.substr(0, 3) == "arg" &&
                 t.size() <= 6 && t.find_first_not_of("0123456789", 3) == std::string_view::npos &&
                 t[3] != '0') {
        tok.kind = Token::Kind::arg;
        tok.arg = std::stoi(std::string(t.substr(3)));
        prog.max_arg_ = std::max(prog.max_arg_, tok.arg);
      } else {
        throw Error(Errc::unknown_token,
                    "unknown token '" + std::string(t) + "' in equation '" + prog.source_ + "'");
      }
    }

    if (tok.kind == Token::Kind::op) {
      int n = arity(tok.op);
      if (depth < n)
        throw Error(Errc::stack, "stack underflow at '" + std::string(raw) + "' in equation '" +
                                     prog.source_ + "'");
      depth -= n - 1;
    } else {
      ++depth;
    }
    prog.tokens_.push_back(std::move(tok));
  }
  if (depth != 1)
    throw Error(Errc::stack, "equation '" + prog.source_ + "' leaves " + std::to_string(depth) +
                                 " items on the stack");
  return prog;
}

RpnProgram RpnProgram::constant(double v) {
  RpnProgram prog;
  prog.kind_ = RpnKind::record;
  prog.source_ = format_number(v);
  Token tok;
  tok.number = v;
  prog.tokens_.push_back(tok);
  return prog;
}

double RpnProgram::eval(double value, Timestamp time,
                        std::span<const std::optional<double>> args) const {
  // Depth never exceeds the token count; well-formedness was checked.
  double stack[64];
  std::vector<double> heap;
  double* base = stack;
  if (tokens_.size() > 64) {
    heap.resize(tokens_.size());
    base = heap.data();
  }
  std::size_t top = 0;
  for (const Token& tok : tokens_) {
    switch (tok.kind) {
      case Token::Kind::number: base[top++] = tok.number; break;
      case Token::Kind::value: base[top++] = value; break;
      case Token::Kind::time: base[top++] = time; break;
      case Token::Kind::arg: {
        std::size_t k = static_cast<std::size_t>(tok.arg);
        if (k > args.size() || !args[k - 1])
          throw Error(Errc::unbound_arg, "arg" + std::to_string(k) + " has no sampled value yet");
        base[top++] = *args[k - 1];
        break;
      }
      case Token::Kind::op: {
        if (arity(tok.op) == 1) {
          base[top - 1] = apply(tok.op, base[top - 1], 0.0);
        } else {
          double b = base[--top];
          base[top - 1] = apply(tok.op, base[top - 1], b);
        }
        break;
      }
      case Token::Kind::text:
        throw Error(Errc::type, "string literal in numeric equation '" + source_ + "'");
    }
  }
  double result = base[0];
  if (!std::isfinite(result))
    throw Error(Errc::math, "equation '" + source_ + "' produced a non-finite value");
  return result;
}

double RpnProgram::eval_numeric() const {
  if (kind_ == RpnKind::string) throw Error(Errc::type, "string equation used as a number");
  if (kind_ == RpnKind::record && (max_arg_ > 0 || [&] {
        for (const auto& t : tokens_)
          if (t.kind == Token::Kind::value || t.kind == Token::Kind::time) return true;
        return false;
      }()))
    throw Error(Errc::type, "record variables in a non-channel equation '" + source_ + "'");
  return eval(0.0, 0.0, {});
}

std::string RpnProgram::eval_string() const {
  if (kind_ != RpnKind::string) throw Error(Errc::type, "numeric equation used as a string");
  std::vector<std::string> stack;
  for (const Token& tok : tokens_) {
    if (tok.kind == Token::Kind::text) {
      stack.push_back(tok.text);
    } else {
      std::string b = std::move(stack.back());
      stack.pop_back();
      stack.back() += b;
    }
  }
  return stack.front();
}

double RpnProgram::eval_record(double value, Timestamp time,
                               std::span<const std::optional<double>> args) const {
  if (kind_ == RpnKind::string) throw Error(Errc::type, "string equation used on records");
  return eval(value, time, args);
}

double eval_numeric(std::string_view source) {
  return RpnProgram::compile(source, RpnKind::numeric).eval_numeric();
}

std::string eval_string(std::string_view source) {
  return RpnProgram::compile(source, RpnKind::string).eval_string();
}

}  // namespace honey
