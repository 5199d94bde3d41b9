#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace snfl {

/// Compiled arithmetic expression in the variables t and x.
///
/// Grammar: numbers, t, x, + - * / ^ (right associative), unary minus,
/// parentheses and the functions sin, cos, exp, tanh. Compiled to a flat
/// postfix program evaluated on a fixed-size stack.
class Expression {
public:
  Expression() = default;

  /// Throws ParseError with the offending position.
  static Expression compile(std::string_view text);

  double operator()(double t, double x) const noexcept;

  const std::string& text() const noexcept { return text_; }
  /// True when the program references neither t nor x.
  bool is_constant() const noexcept;
  bool empty() const noexcept { return code_.empty(); }

  enum class Op : std::uint8_t { Const, VarT, VarX, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Tanh };
  struct Instr {
    Op op;
    double value;
  };

private:
  std::string text_;
  std::vector<Instr> code_;
  int max_depth_ = 0;
};

}  // namespace snfl
