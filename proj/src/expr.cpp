#include "coneflank/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <string>

#include "coneflank/error.hpp"
#include "coneflank/taylor.hpp"

namespace coneflank {

namespace {

using Kind = ExprNode::Kind;

class Parser {
 public:
  Parser(std::string_view text, const std::array<std::string, 2>& vars)
      : text_(text), vars_(vars) {}

  ExprAst run() {
    ExprAst ast;
    ast.source = std::string(text_);
    ast.variables = vars_;
    nodes_ = &ast.nodes;
    ast.root = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected character");
    return ast;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::SyntaxError,
                what + " at offset " + std::to_string(pos_), pos_);
  }

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int push(ExprNode n) {
    nodes_->push_back(n);
    return static_cast<int>(nodes_->size()) - 1;
  }

  int binary(Kind k, int lhs, int rhs) {
    ExprNode n;
    n.kind = k;
    n.lhs = lhs;
    n.rhs = rhs;
    return push(n);
  }

  int expr() {
    int lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = binary(Kind::Add, lhs, term());
      } else if (accept('-')) {
        lhs = binary(Kind::Sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  int term() {
    int lhs = factor();
    for (;;) {
      if (accept('*')) {
        lhs = binary(Kind::Mul, lhs, factor());
      } else if (accept('/')) {
        lhs = binary(Kind::Div, lhs, factor());
      } else {
        return lhs;
      }
    }
  }

  int factor() {
    if (accept('-')) {
      ExprNode n;
      n.kind = Kind::Neg;
      n.lhs = factor();
      return push(n);
    }
    const int base = atom();
    if (!accept('^')) return base;
    skip_ws();
    const std::size_t start = pos_;
    if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) ++pos_;
    const std::size_t digits = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    if (pos_ == digits) {
      pos_ = digits;
      fail("expected integer exponent");
    }
    if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E'))
      fail("exponent must be an integer");
    ExprNode n;
    n.kind = Kind::Pow;
    n.lhs = base;
    n.exponent = std::stoi(std::string(text_.substr(start, pos_ - start)));
    return push(n);
  }

  int atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      const int inner = expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  int number() {
    // string_view is not null-terminated, so parse from a copy.
    const std::string copy(text_.substr(pos_));
    char* end = nullptr;
    const double v = std::strtod(copy.c_str(), &end);
    const std::size_t used = static_cast<std::size_t>(end - copy.c_str());
    if (used == 0) fail("malformed number");
    pos_ += used;
    ExprNode n;
    n.kind = Kind::Constant;
    n.value = v;
    return push(n);
  }

  int identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string name(text_.substr(start, pos_ - start));
    ExprNode n;
    if (name == vars_[0]) {
      n.kind = Kind::Var0;
      return push(n);
    }
    if (name == vars_[1]) {
      n.kind = Kind::Var1;
      return push(n);
    }
    if (name == "pi") {
      n.kind = Kind::Constant;
      n.value = M_PI;
      return push(n);
    }
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != '(') {
      pos_ = start;
      fail("unknown identifier '" + name + "'");
    }
    static const std::pair<const char*, ExprFunc> kFuncs[] = {
        {"sin", ExprFunc::Sin},   {"cos", ExprFunc::Cos},   {"tan", ExprFunc::Tan},
        {"atan", ExprFunc::Atan}, {"sqrt", ExprFunc::Sqrt}, {"exp", ExprFunc::Exp},
        {"log", ExprFunc::Log}};
    bool found = false;
    for (const auto& [fname, f] : kFuncs) {
      if (name == fname) {
        n.func = f;
        found = true;
      }
    }
    if (!found) {
      throw Error(ErrorCode::UnknownFunction, "'" + name + "' at offset " +
                                                  std::to_string(start), start);
    }
    ++pos_;  // '('
    n.kind = Kind::Call;
    n.lhs = expr();
    if (!accept(')')) fail("expected ')'");
    return push(n);
  }

  std::string_view text_;
  std::array<std::string, 2> vars_;
  std::vector<ExprNode>* nodes_ = nullptr;
  std::size_t pos_ = 0;
};

[[noreturn]] void domain_error(const char* what) {
  throw Error(ErrorCode::DomainError, what);
}

// Scalar counterparts of the Taylor4 functions, with the same domain rules
// except that sqrt(0) is allowed for plain values.
double reciprocal(double v) {
  if (v == 0.0) domain_error("division by zero");
  return 1.0 / v;
}
double ipow(double v, int n) {
  if (n < 0) return reciprocal(std::pow(v, -n));
  return std::pow(v, n);
}
double apply(ExprFunc f, double v) {
  switch (f) {
    case ExprFunc::Sin: return std::sin(v);
    case ExprFunc::Cos: return std::cos(v);
    case ExprFunc::Tan: return std::tan(v);
    case ExprFunc::Atan: return std::atan(v);
    case ExprFunc::Sqrt:
      if (v < 0.0) domain_error("sqrt of a negative value");
      return std::sqrt(v);
    case ExprFunc::Exp: return std::exp(v);
    case ExprFunc::Log:
      if (!(v > 0.0)) domain_error("log of a non-positive value");
      return std::log(v);
  }
  return 0.0;
}
Taylor4 apply(ExprFunc f, const Taylor4& v) {
  switch (f) {
    case ExprFunc::Sin: return sin(v);
    case ExprFunc::Cos: return cos(v);
    case ExprFunc::Tan: return tan(v);
    case ExprFunc::Atan: return atan(v);
    case ExprFunc::Sqrt: return sqrt(v);
    case ExprFunc::Exp: return exp(v);
    case ExprFunc::Log: return log(v);
  }
  return v;
}

template <class T>
T eval_node(const ExprAst& ast, int idx, const T& a, const T& b) {
  const ExprNode& n = ast.nodes[static_cast<std::size_t>(idx)];
  switch (n.kind) {
    case Kind::Constant: return T(n.value);
    case Kind::Var0: return a;
    case Kind::Var1: return b;
    case Kind::Add: return eval_node(ast, n.lhs, a, b) + eval_node(ast, n.rhs, a, b);
    case Kind::Sub: return eval_node(ast, n.lhs, a, b) - eval_node(ast, n.rhs, a, b);
    case Kind::Mul: return eval_node(ast, n.lhs, a, b) * eval_node(ast, n.rhs, a, b);
    case Kind::Div:
      return eval_node(ast, n.lhs, a, b) * reciprocal(eval_node(ast, n.rhs, a, b));
    case Kind::Neg: return -eval_node(ast, n.lhs, a, b);
    case Kind::Pow: return ipow(eval_node(ast, n.lhs, a, b), n.exponent);
    case Kind::Call: return apply(n.func, eval_node(ast, n.lhs, a, b));
  }
  return T(0.0);
}

}  // namespace

ExprAst parse_expression(std::string_view text, std::array<std::string, 2> variables) {
  return Parser(text, variables).run();
}

double evaluate(const ExprAst& ast, double a, double b) {
  if (ast.root < 0) throw Error(ErrorCode::ConfigError, "empty expression");
  const double v = eval_node<double>(ast, ast.root, a, b);
  if (!std::isfinite(v)) domain_error("non-finite value");
  return v;
}

Jet4 jet_of_expression(const ExprAst& ast, double x, double y) {
  if (ast.root < 0) throw Error(ErrorCode::ConfigError, "empty expression");
  const Taylor4 t = eval_node<Taylor4>(ast, ast.root, Taylor4::variable(0, x),
                                       Taylor4::variable(1, y));
  Jet4 j = t.to_jet(x, y);
  if (!j.all_finite()) domain_error("non-finite derivative");
  return j;
}

}  // namespace coneflank
