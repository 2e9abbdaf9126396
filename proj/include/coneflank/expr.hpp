#pragma once

// Surface-expression language:
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := '-' factor | atom ('^' integer)?
//   atom   := number | var | 'pi' | func '(' expr ')' | '(' expr ')'
//   func   := sin | cos | tan | atan | sqrt | exp | log
// Whitespace is insignificant. The two variable names default to x and y.

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "coneflank/jet.hpp"

namespace coneflank {

enum class ExprFunc { Sin, Cos, Tan, Atan, Sqrt, Exp, Log };

struct ExprNode {
  enum class Kind { Constant, Var0, Var1, Add, Sub, Mul, Div, Neg, Pow, Call };
  Kind kind = Kind::Constant;
  double value = 0.0;      // Constant
  int exponent = 0;        // Pow
  ExprFunc func = ExprFunc::Sin;  // Call
  int lhs = -1;            // child indices into ExprAst::nodes
  int rhs = -1;
};

/// Expression tree stored as a flat node array; `root` indexes the top node.
struct ExprAst {
  std::vector<ExprNode> nodes;
  int root = -1;
  std::string source;
  std::array<std::string, 2> variables{"x", "y"};
};

ExprAst parse_expression(std::string_view text,
                         std::array<std::string, 2> variables = {"x", "y"});

/// Plain evaluation. Throws DomainError on division by zero, sqrt/log
/// outside their domain, or a non-finite result.
double evaluate(const ExprAst& ast, double a, double b);

/// Exact 4-jet at (x, y) by truncated Taylor arithmetic.
Jet4 jet_of_expression(const ExprAst& ast, double x, double y);

}  // namespace coneflank
