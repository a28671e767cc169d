#pragma once

#include <memory>
#include <string>
#include <vector>

namespace swjd {

/// Arithmetic expression over named real variables, compiled to a stack program.
///
/// Grammar (lowest precedence first):
///   cmp     := sum [('<' | '<=' | '>' | '>=' | '==' | '!=') sum]
///   sum     := product (('+' | '-') product)*
///   product := unary (('*' | '/') unary)*
///   unary   := ('-' | '+') unary | power
///   power   := primary ['^' unary]          right associative; -x^2 = -(x^2)
///   primary := number | name | name '(' cmp (',' cmp)* ')' | '(' cmp ')'
/// Comparisons yield 1 or 0. Constants: pi, e. Functions: abs sqrt exp log sin cos
/// tan tanh sinh cosh atan floor sign, pow(a,b) min(a,b) max(a,b) if(c,a,b).
class Expression {
 public:
  Expression() = default;

  /// Throws InvalidInput with the offending position on a syntax error or unknown name.
  static Expression parse(const std::string& text, const std::vector<std::string>& variables);

  /// vars[i] is the value of variables[i] given at parse time.
  double eval(const double* vars) const;

  bool uses(const std::string& variable) const;
  const std::string& text() const { return text_; }
  bool empty() const { return !program_; }

  struct Op;

 private:
  std::string text_;
  std::vector<std::string> variables_;
  std::vector<bool> used_;
  std::shared_ptr<const std::vector<Op>> program_;
  int max_depth_ = 0;
};

}  // namespace swjd
