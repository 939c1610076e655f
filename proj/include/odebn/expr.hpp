#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "odebn/error.hpp"

namespace odebn {

/// Immutable expression tree. Children are shared so whole models can be
/// copied cheaply.
struct Expr {
  enum class Kind { Constant, Symbol, Negate, Add, Sub, Mul, Div, Pow, Exp };

  Kind kind;
  double value = 0.0;             // Constant
  std::string name;               // Symbol
  std::shared_ptr<const Expr> lhs, rhs;  // Negate/Exp use lhs only
};

using ExprPtr = std::shared_ptr<const Expr>;

inline ExprPtr make_constant(double v) {
  return std::make_shared<Expr>(Expr{Expr::Kind::Constant, v, {}, nullptr, nullptr});
}

inline ExprPtr make_symbol(std::string name) {
  return std::make_shared<Expr>(
      Expr{Expr::Kind::Symbol, 0.0, std::move(name), nullptr, nullptr});
}

inline ExprPtr make_unary(Expr::Kind kind, ExprPtr operand) {
  return std::make_shared<Expr>(
      Expr{kind, 0.0, {}, std::move(operand), nullptr});
}

inline ExprPtr make_binary(Expr::Kind kind, ExprPtr lhs, ExprPtr rhs) {
  return std::make_shared<Expr>(
      Expr{kind, 0.0, {}, std::move(lhs), std::move(rhs)});
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

/// Character-level scanner over one expression string.
/// Keeps 1-based line/column so model-file errors point at the source.
class ExprParser {
 public:
  ExprParser(std::string_view text, int line, int col_offset)
      : text_(text), line_(line), col_offset_(col_offset) {}

  ExprPtr parse() {
    ExprPtr e = parse_sum();
    skip_ws();
    if (pos_ != text_.size()) {
      fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    }
    return e;
  }

 private:
  // sum := product (('+'|'-') product)*
  ExprPtr parse_sum() {
    ExprPtr left = parse_product();
    for (;;) {
      skip_ws();
      if (accept('+')) {
        left = make_binary(Expr::Kind::Add, left, parse_product());
      } else if (accept('-')) {
        left = make_binary(Expr::Kind::Sub, left, parse_product());
      } else {
        return left;
      }
    }
  }

  // product := unary (('*'|'/') unary)*
  ExprPtr parse_product() {
    ExprPtr left = parse_unary();
    for (;;) {
      skip_ws();
      if (accept('*')) {
        left = make_binary(Expr::Kind::Mul, left, parse_unary());
      } else if (accept('/')) {
        left = make_binary(Expr::Kind::Div, left, parse_unary());
      } else {
        return left;
      }
    }
  }

  // unary := '-' unary | power ; '^' binds tighter than unary minus,
  // so -x^2 parses as -(x^2).
  ExprPtr parse_unary() {
    skip_ws();
    if (accept('-')) {
      return make_unary(Expr::Kind::Negate, parse_unary());
    }
    return parse_power();
  }

  // power := atom ('^' unary)?  (right-associative via the unary recursion)
  ExprPtr parse_power() {
    ExprPtr base = parse_atom();
    skip_ws();
    if (accept('^')) {
      return make_binary(Expr::Kind::Pow, base, parse_unary());
    }
    return base;
  }

  ExprPtr parse_atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      ExprPtr inner = parse_sum();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return parse_number();
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string ident = parse_ident();
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == '(') {
        return parse_call(ident);
      }
      return make_symbol(std::move(ident));
    }
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  ExprPtr parse_number() {
    const char* begin = text_.data() + pos_;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - begin);
    if (!std::isfinite(v)) fail("numeric literal out of range");
    return make_constant(v);
  }

  std::string parse_ident() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
            text_[pos_] == '_')) {
      ++pos_;
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  ExprPtr parse_call(const std::string& fn) {
    expect('(');
    if (fn == "exp") {
      ExprPtr arg = parse_sum();
      expect(')');
      return make_unary(Expr::Kind::Exp, std::move(arg));
    }
    if (fn == "pow") {
      ExprPtr base = parse_sum();
      skip_ws();
      expect(',');
      ExprPtr exponent = parse_sum();
      expect(')');
      return make_binary(Expr::Kind::Pow, std::move(base), std::move(exponent));
    }
    fail("unknown function '" + fn + "' (supported: pow, exp)");
  }

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  bool accept(char c) {
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    skip_ws();
    if (!accept(c)) {
      fail(std::string("expected '") + c + "'");
    }
  }

  [[noreturn]] void fail(const std::string& why) {
    throw_validation("syntax error at line " + std::to_string(line_) +
                     ", column " +
                     std::to_string(col_offset_ + static_cast<int>(pos_) + 1) +
                     ": " + why);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_;
  int col_offset_;
};

}  // namespace detail

/// Parse a single arithmetic expression. line/col_offset locate the text
/// inside a larger source file for error reporting.
inline ExprPtr parse_expression(std::string_view text, int line = 1,
                                int col_offset = 0) {
  return detail::ExprParser(text, line, col_offset).parse();
}

// ---------------------------------------------------------------------------
// Evaluation

/// Tree-walk evaluation against a symbol table. Reference path; the
/// integrator and filter run the compiled form below instead.
inline double eval_expr(
    const Expr& e,
    const std::function<const double*(const std::string&)>& lookup) {
  switch (e.kind) {
    case Expr::Kind::Constant:
      return e.value;
    case Expr::Kind::Symbol: {
      const double* v = lookup(e.name);
      if (v == nullptr) throw_validation("unbound symbol '" + e.name + "'");
      return *v;
    }
    case Expr::Kind::Negate:
      return -eval_expr(*e.lhs, lookup);
    case Expr::Kind::Exp:
      return std::exp(eval_expr(*e.lhs, lookup));
    case Expr::Kind::Add:
      return eval_expr(*e.lhs, lookup) + eval_expr(*e.rhs, lookup);
    case Expr::Kind::Sub:
      return eval_expr(*e.lhs, lookup) - eval_expr(*e.rhs, lookup);
    case Expr::Kind::Mul:
      return eval_expr(*e.lhs, lookup) * eval_expr(*e.rhs, lookup);
    case Expr::Kind::Div:
      return eval_expr(*e.lhs, lookup) / eval_expr(*e.rhs, lookup);
    case Expr::Kind::Pow:
      return std::pow(eval_expr(*e.lhs, lookup), eval_expr(*e.rhs, lookup));
  }
  throw_validation("corrupt expression node");
}

inline double eval_expr(const Expr& e,
                        const std::unordered_map<std::string, double>& bindings) {
  double v = eval_expr(e, [&](const std::string& name) -> const double* {
    auto it = bindings.find(name);
    return it == bindings.end() ? nullptr : &it->second;
  });
  if (!std::isfinite(v)) {
    throw_numeric("expression evaluated to a non-finite value");
  }
  return v;
}

inline void collect_symbols(const Expr& e, std::set<std::string>& out) {
  switch (e.kind) {
    case Expr::Kind::Symbol:
      out.insert(e.name);
      return;
    default:
      if (e.lhs) collect_symbols(*e.lhs, out);
      if (e.rhs) collect_symbols(*e.rhs, out);
  }
}

// ---------------------------------------------------------------------------
// Compiled form: flat postfix program over a slot-indexed environment.
// This is what makes a 5000-particle filter over an interpreted model cheap.

struct Instr {
  enum class Op : std::uint8_t {
    PushConst,
    LoadSlot,
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    CallExp,
  };
  Op op;
  std::uint32_t slot = 0;
  double value = 0.0;
};

struct Program {
  std::vector<Instr> code;
  std::size_t stack_need = 0;
};

namespace detail {

inline void compile_node(const Expr& e,
                         const std::unordered_map<std::string, std::uint32_t>& slots,
                         std::vector<Instr>& out) {
  using Op = Instr::Op;
  switch (e.kind) {
    case Expr::Kind::Constant:
      out.push_back({Op::PushConst, 0, e.value});
      return;
    case Expr::Kind::Symbol: {
      auto it = slots.find(e.name);
      if (it == slots.end()) throw_validation("unbound symbol '" + e.name + "'");
      out.push_back({Op::LoadSlot, it->second, 0.0});
      return;
    }
    case Expr::Kind::Negate:
      compile_node(*e.lhs, slots, out);
      out.push_back({Op::Neg, 0, 0.0});
      return;
    case Expr::Kind::Exp:
      compile_node(*e.lhs, slots, out);
      out.push_back({Op::CallExp, 0, 0.0});
      return;
    case Expr::Kind::Add:
    case Expr::Kind::Sub:
    case Expr::Kind::Mul:
    case Expr::Kind::Div:
    case Expr::Kind::Pow: {
      compile_node(*e.lhs, slots, out);
      compile_node(*e.rhs, slots, out);
      Op op = e.kind == Expr::Kind::Add   ? Op::Add
              : e.kind == Expr::Kind::Sub ? Op::Sub
              : e.kind == Expr::Kind::Mul ? Op::Mul
              : e.kind == Expr::Kind::Div ? Op::Div
                                          : Op::Pow;
      out.push_back({op, 0, 0.0});
      return;
    }
  }
}

}  // namespace detail

inline Program compile_expr(
    const Expr& e,
    const std::unordered_map<std::string, std::uint32_t>& slots) {
  Program p;
  detail::compile_node(e, slots, p.code);
  std::size_t depth = 0, peak = 0;
  for (const Instr& ins : p.code) {
    switch (ins.op) {
      case Instr::Op::PushConst:
      case Instr::Op::LoadSlot:
        if (++depth > peak) peak = depth;
        break;
      case Instr::Op::Neg:
      case Instr::Op::CallExp:
        break;
      default:
        --depth;  // binary ops pop two, push one
    }
  }
  p.stack_need = peak;
  return p;
}

/// Run a compiled program. `stack` must hold at least p.stack_need doubles.
inline double run_program(const Program& p, const double* env, double* stack) {
  double* sp = stack;
  for (const Instr& ins : p.code) {
    switch (ins.op) {
      case Instr::Op::PushConst: *sp++ = ins.value; break;
      case Instr::Op::LoadSlot: *sp++ = env[ins.slot]; break;
      case Instr::Op::Neg: sp[-1] = -sp[-1]; break;
      case Instr::Op::CallExp: sp[-1] = std::exp(sp[-1]); break;
      case Instr::Op::Add: sp[-2] = sp[-2] + sp[-1]; --sp; break;
      case Instr::Op::Sub: sp[-2] = sp[-2] - sp[-1]; --sp; break;
      case Instr::Op::Mul: sp[-2] = sp[-2] * sp[-1]; --sp; break;
      case Instr::Op::Div: sp[-2] = sp[-2] / sp[-1]; --sp; break;
      case Instr::Op::Pow: sp[-2] = std::pow(sp[-2], sp[-1]); --sp; break;
    }
  }
  return sp[-1];
}

// ---------------------------------------------------------------------------
// Printing

namespace detail {

inline int precedence_of(Expr::Kind k) {
  switch (k) {
    case Expr::Kind::Add:
    case Expr::Kind::Sub: return 1;
    case Expr::Kind::Mul:
    case Expr::Kind::Div: return 2;
    case Expr::Kind::Negate: return 3;
    case Expr::Kind::Pow: return 4;
    default: return 5;  // atoms
  }
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void print_node(const Expr& e, std::string& out) {
  auto child = [&](const Expr& c, bool needs_parens) {
    if (needs_parens) out += '(';
    print_node(c, out);
    if (needs_parens) out += ')';
  };
  int prec = precedence_of(e.kind);
  switch (e.kind) {
    case Expr::Kind::Constant:
      out += format_double(e.value);
      return;
    case Expr::Kind::Symbol:
      out += e.name;
      return;
    case Expr::Kind::Negate:
      out += '-';
      child(*e.lhs, precedence_of(e.lhs->kind) < prec);
      return;
    case Expr::Kind::Exp:
      out += "exp(";
      print_node(*e.lhs, out);
      out += ')';
      return;
    case Expr::Kind::Add:
    case Expr::Kind::Sub:
    case Expr::Kind::Mul:
    case Expr::Kind::Div: {
      child(*e.lhs, precedence_of(e.lhs->kind) < prec);
      out += e.kind == Expr::Kind::Add   ? " + "
             : e.kind == Expr::Kind::Sub ? " - "
             : e.kind == Expr::Kind::Mul ? "*"
                                         : "/";
      // Right operand needs parens at equal precedence: a - (b + c), a/(b*c).
      child(*e.rhs, precedence_of(e.rhs->kind) <= prec);
      return;
    }
    case Expr::Kind::Pow:
      // '^' is right-associative, so the left side parenthesizes at equal
      // precedence and the right side does not.
      child(*e.lhs, precedence_of(e.lhs->kind) <= prec);
      out += '^';
      child(*e.rhs, precedence_of(e.rhs->kind) < prec);
      return;
  }
}

}  // namespace detail

inline std::string print_expr(const Expr& e) {
  std::string out;
  detail::print_node(e, out);
  return out;
}

}  // namespace odebn
