#include "snfl/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

#include "snfl/error.hpp"

namespace snfl {
namespace {

constexpr int kStackLimit = 64;

class Parser {
public:
  explicit Parser(std::string_view s) : s_(s) {}

  std::vector<Expression::Instr> run() {
    expr();
    skip();
    if (pos_ != s_.size()) throw ParseError("unexpected '" + std::string(1, s_[pos_]) + "'", pos_);
    return std::move(code_);
  }

private:
  using Op = Expression::Op;

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void emit(Op op, double v = 0.0) { code_.push_back({op, v}); }

  void expr() {
    term();
    for (;;) {
      if (eat('+')) {
        term();
        emit(Op::Add);
      } else if (eat('-')) {
        term();
        emit(Op::Sub);
      } else {
        return;
      }
    }
  }

  void term() {
    unary();
    for (;;) {
      if (eat('*')) {
        unary();
        emit(Op::Mul);
      } else if (eat('/')) {
        unary();
        emit(Op::Div);
      } else {
        return;
      }
    }
  }

  void unary() {
    if (eat('-')) {
      unary();
      emit(Op::Neg);
      return;
    }
    if (eat('+')) {
      unary();
      return;
    }
    power();
  }

  void power() {
    primary();
    if (eat('^')) {
      unary();
      emit(Op::Pow);
    }
  }

  void primary() {
    skip();
    if (pos_ >= s_.size()) throw ParseError("unexpected end of expression", pos_);
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      expr();
      if (!eat(')')) throw ParseError("expected ')'", pos_);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string_view id = s_.substr(start, pos_ - start);
      if (id == "t") return emit(Op::VarT);
      if (id == "x") return emit(Op::VarX);
      Op fn;
      if (id == "sin") fn = Op::Sin;
      else if (id == "cos") fn = Op::Cos;
      else if (id == "exp") fn = Op::Exp;
      else if (id == "tanh") fn = Op::Tanh;
      else throw ParseError("unknown identifier '" + std::string(id) + "'", start);
      if (!eat('(')) throw ParseError("expected '(' after " + std::string(id), pos_);
      expr();
      if (!eat(')')) throw ParseError("expected ')'", pos_);
      emit(fn);
      return;
    }
    throw ParseError("unexpected '" + std::string(1, c) + "'", pos_);
  }

  void number() {
    const std::size_t start = pos_;
    std::string buf(s_.substr(pos_));
    char* end = nullptr;
    const double v = std::strtod(buf.c_str(), &end);
    const std::size_t used = static_cast<std::size_t>(end - buf.c_str());
    if (used == 0) throw ParseError("malformed number", start);
    pos_ += used;
    emit(Op::Const, v);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::vector<Expression::Instr> code_;
};

int stack_depth(const std::vector<Expression::Instr>& code) {
  int depth = 0, peak = 0;
  for (const auto& in : code) {
    switch (in.op) {
      case Expression::Op::Const:
      case Expression::Op::VarT:
      case Expression::Op::VarX: ++depth; break;
      case Expression::Op::Add:
      case Expression::Op::Sub:
      case Expression::Op::Mul:
      case Expression::Op::Div:
      case Expression::Op::Pow: --depth; break;
      default: break;
    }
    if (depth > peak) peak = depth;
  }
  return peak;
}

}  // namespace

Expression Expression::compile(std::string_view text) {
  Expression e;
  e.text_ = std::string(text);
  e.code_ = Parser(text).run();
  e.max_depth_ = stack_depth(e.code_);
  if (e.max_depth_ > kStackLimit) throw ParseError("expression nests too deeply", 0);
  return e;
}

bool Expression::is_constant() const noexcept {
  for (const auto& in : code_)
    if (in.op == Op::VarT || in.op == Op::VarX) return false;
  return true;
}

double Expression::operator()(double t, double x) const noexcept {
  double st[kStackLimit];
  int sp = 0;
  for (const auto& in : code_) {
    switch (in.op) {
      case Op::Const: st[sp++] = in.value; break;
      case Op::VarT: st[sp++] = t; break;
      case Op::VarX: st[sp++] = x; break;
      case Op::Add: --sp; st[sp - 1] += st[sp]; break;
      case Op::Sub: --sp; st[sp - 1] -= st[sp]; break;
      case Op::Mul: --sp; st[sp - 1] *= st[sp]; break;
      case Op::Div: --sp; st[sp - 1] /= st[sp]; break;
      case Op::Pow: --sp; st[sp - 1] = std::pow(st[sp - 1], st[sp]); break;
      case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
      case Op::Sin: st[sp - 1] = std::sin(st[sp - 1]); break;
      case Op::Cos: st[sp - 1] = std::cos(st[sp - 1]); break;
      case Op::Exp: st[sp - 1] = std::exp(st[sp - 1]); break;
      case Op::Tanh: st[sp - 1] = std::tanh(st[sp - 1]); break;
    }
  }
  return sp == 1 ? st[0] : 0.0;
}

}  // namespace snfl
