#ifndef HONEY_RPN_HPP
#define HONEY_RPN_HPP

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "honey/record.hpp"

namespace honey {

// Comma-separated Reverse Polish notation.
//
//   numeric: numbers and + - * / min max neg abs < <= > >= == !=
//   string:  literals joined with +
//   record:  numeric tokens plus the variables value, time and arg1..argN
//
// Programs are checked at construction: unknown tokens raise UnknownToken,
// and a stack-depth simulation must never underflow and must end at one item
// (StackError otherwise).
enum class RpnKind { numeric, string, record };

class RpnProgram {
 public:
  enum class Op { add, sub, mul, div, min, max, neg, abs, lt, le, gt, ge, eq, ne };

  struct Token {
    enum class Kind { number, text, value, time, arg, op };
    Kind kind = Kind::number;
    double number = 0.0;
    std::string text;
    int arg = 0;  // 1-based for Kind::arg
    Op op = Op::add;
  };

  static RpnProgram compile(std::string_view source, RpnKind kind);
  // A bare number used where a record equation is expected ("eq $a 3").
  static RpnProgram constant(double v);

  RpnKind kind() const { return kind_; }
  const std::vector<Token>& tokens() const { return tokens_; }
  const std::string& source() const { return source_; }
  // Highest argK referenced, 0 when none.
  int max_arg() const { return max_arg_; }

  double eval_numeric() const;
  std::string eval_string() const;
  // args[k-1] holds the latest value of the k-th auxiliary pipe, if any.
  double eval_record(double value, Timestamp time,
                     std::span<const std::optional<double>> args = {}) const;

 private:
  double eval(double value, Timestamp time, std::span<const std::optional<double>> args) const;

  RpnKind kind_ = RpnKind::numeric;
  std::vector<Token> tokens_;
  std::string source_;
  int max_arg_ = 0;
};

// Operator arity, or -1 when `token` is not a numeric operator.
int rpn_operator_arity(std::string_view token);

double eval_numeric(std::string_view source);
std::string eval_string(std::string_view source);

}  // namespace honey

#endif  // HONEY_RPN_HPP
