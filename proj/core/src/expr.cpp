#include "sweep/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "sweep/errors.hpp"

namespace sweep {

SyntaxError::SyntaxError(std::size_t position, std::vector<std::string> expected,
                         const std::string& what)
    : Error(what), position_(position), expected_(std::move(expected)) {}

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Const: return "const";
    case Op::Time: return "t";
    case Op::State: return "x";
    case Op::Control: return "u";
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Pow: return "^";
    case Op::Neg: return "neg";
    case Op::Exp: return "exp";
    case Op::Ln: return "ln";
    case Op::Sqrt: return "sqrt";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Max2: return "max2";
  }
  return "?";
}

namespace {

bool is_unary_function(Op op) {
  return op == Op::Exp || op == Op::Ln || op == Op::Sqrt || op == Op::Sin || op == Op::Cos ||
         op == Op::Neg;
}

bool is_binary(Op op) {
  return op == Op::Add || op == Op::Sub || op == Op::Mul || op == Op::Div || op == Op::Max2;
}

std::string format_constant(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Parser {
 public:
  Parser(std::string_view src, int n, int m) : src_(src), n_(n), m_(m) {}

  Expr run() {
    skip_ws();
    if (pos_ >= src_.size()) fail({"expression"});
    int root = parse_expr();
    skip_ws();
    if (pos_ < src_.size()) fail({"operator", "end of input"});
    return std::move(builder_).build(root);
  }

 private:
  [[noreturn]] void fail(std::vector<std::string> expected) {
    std::string what = "syntax error at position " + std::to_string(pos_) + ": expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) what += " or ";
      what += expected[i];
    }
    throw SyntaxError(pos_, std::move(expected), what);
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail({std::string("'") + c + "'"});
  }

  int parse_expr() {
    int lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = builder_.binary(Op::Add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = builder_.binary(Op::Sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  int parse_term() {
    int lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = builder_.binary(Op::Mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = builder_.binary(Op::Div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  int parse_unary() {
    if (accept('-')) return builder_.unary(Op::Neg, parse_unary());
    return parse_power();
  }

  int parse_power() {
    int base = parse_primary();
    if (!accept('^')) return base;
    skip_ws();
    bool negative = false;
    bool paren = accept('(');
    skip_ws();
    if (pos_ < src_.size() && (src_[pos_] == '-' || src_[pos_] == '+')) {
      negative = src_[pos_] == '-';
      ++pos_;
    }
    std::size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (pos_ == start) fail({"integer exponent"});
    if (pos_ < src_.size() && (src_[pos_] == '.' || src_[pos_] == 'e' || src_[pos_] == 'E')) {
      fail({"integer exponent"});
    }
    int k = 0;
    auto res = std::from_chars(src_.data() + start, src_.data() + pos_, k);
    if (res.ec != std::errc()) {
      pos_ = start;
      fail({"integer exponent"});
    }
    if (paren) expect(')');
    return builder_.power(base, negative ? -k : k);
  }

  int parse_number() {
    std::size_t start = pos_;
    auto digits = [&] {
      std::size_t s = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      return pos_ - s;
    };
    std::size_t mantissa = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0) {
      pos_ = start;
      fail({"number"});
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) fail({"exponent digits"});
    }
    double value = 0.0;
    auto res = std::from_chars(src_.data() + start, src_.data() + pos_, value);
    if (res.ec != std::errc() || !std::isfinite(value)) {
      pos_ = start;
      fail({"finite number"});
    }
    return builder_.constant(value);
  }

  int parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail({"number", "identifier", "'('"});
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      int inner = parse_expr();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail({"number", "identifier", "'('"});
  }

  int parse_identifier() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
    }
    std::string name(src_.substr(start, pos_ - start));

    static constexpr std::pair<std::string_view, Op> kFunctions[] = {
        {"exp", Op::Exp}, {"ln", Op::Ln},   {"sqrt", Op::Sqrt},
        {"sin", Op::Sin}, {"cos", Op::Cos}, {"max2", Op::Max2},
    };
    for (auto [fname, op] : kFunctions) {
      if (name != fname) continue;
      expect('(');
      int a = parse_expr();
      if (op == Op::Max2) {
        expect(',');
        int b = parse_expr();
        expect(')');
        return builder_.binary(Op::Max2, a, b);
      }
      expect(')');
      return builder_.unary(op, a);
    }

    if (name == "t") return builder_.time();
    if (name.size() >= 2 && (name[0] == 'x' || name[0] == 'u')) {
      bool numeric = true;
      for (std::size_t i = 1; i < name.size(); ++i) {
        numeric = numeric && std::isdigit(static_cast<unsigned char>(name[i]));
      }
      if (numeric) {
        long idx = 0;
        auto res = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
        int limit = name[0] == 'x' ? n_ : m_;
        if (res.ec != std::errc() || idx < 1 || idx > limit) throw IndexOutOfRange(name);
        return name[0] == 'x' ? builder_.state(static_cast<int>(idx - 1))
                              : builder_.control(static_cast<int>(idx - 1));
      }
    }
    throw UnknownIdentifier(name);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int n_;
  int m_;
  ExprBuilder builder_{n_, m_};
};

bool equal_subtree(const Expr& a, int ia, const Expr& b, int ib) {
  const Node& x = a.node(ia);
  const Node& y = b.node(ib);
  if (x.op != y.op) return false;
  switch (x.op) {
    case Op::Const: return x.constant == y.constant;
    case Op::Time: return true;
    case Op::State:
    case Op::Control: return x.index == y.index;
    case Op::Pow: return x.index == y.index && equal_subtree(a, x.lhs, b, y.lhs);
    default: break;
  }
  if (!equal_subtree(a, x.lhs, b, y.lhs)) return false;
  if (is_binary(x.op)) return equal_subtree(a, x.rhs, b, y.rhs);
  return true;
}

}  // namespace

Expr Expr::parse(std::string_view src, int n, int m) { return Parser(src, n, m).run(); }

std::string Expr::str(int i) const {
  const Node& nd = node(i);
  switch (nd.op) {
    case Op::Const: return format_constant(nd.constant);
    case Op::Time: return "t";
    case Op::State: return "x" + std::to_string(nd.index + 1);
    case Op::Control: return "u" + std::to_string(nd.index + 1);
    case Op::Add: return "(" + str(nd.lhs) + " + " + str(nd.rhs) + ")";
    case Op::Sub: return "(" + str(nd.lhs) + " - " + str(nd.rhs) + ")";
    case Op::Mul: return "(" + str(nd.lhs) + " * " + str(nd.rhs) + ")";
    case Op::Div: return "(" + str(nd.lhs) + " / " + str(nd.rhs) + ")";
    case Op::Pow: return "(" + str(nd.lhs) + "^" + std::to_string(nd.index) + ")";
    case Op::Neg: return "(-" + str(nd.lhs) + ")";
    case Op::Max2: return "max2(" + str(nd.lhs) + ", " + str(nd.rhs) + ")";
    default: return std::string(op_name(nd.op)) + "(" + str(nd.lhs) + ")";
  }
}

bool Expr::contains(Op op) const {
  for (const Node& nd : *nodes_) {
    if (nd.op == op) return true;
  }
  return false;
}

bool operator==(const Expr& a, const Expr& b) {
  return a.n_ == b.n_ && a.m_ == b.m_ && equal_subtree(a, a.root_, b, b.root_);
}

int ExprBuilder::push(Node node) {
  nodes_.push_back(node);
  return static_cast<int>(nodes_.size()) - 1;
}

int ExprBuilder::constant(double value) {
  if (!std::isfinite(value) || value < 0.0) {
    throw InvalidField("expression constants must be finite and non-negative");
  }
  return push({Op::Const, -1, -1, value, 0});
}

int ExprBuilder::time() { return push({Op::Time}); }

int ExprBuilder::state(int i) {
  if (i < 0 || i >= n_) throw IndexOutOfRange("x" + std::to_string(i + 1));
  return push({Op::State, -1, -1, 0.0, i});
}

int ExprBuilder::control(int j) {
  if (j < 0 || j >= m_) throw IndexOutOfRange("u" + std::to_string(j + 1));
  return push({Op::Control, -1, -1, 0.0, j});
}

int ExprBuilder::unary(Op op, int arg) {
  if (!is_unary_function(op)) throw InvalidField("not a unary operator");
  return push({op, arg, -1, 0.0, 0});
}

int ExprBuilder::binary(Op op, int lhs, int rhs) {
  if (!is_binary(op)) throw InvalidField("not a binary operator");
  return push({op, lhs, rhs, 0.0, 0});
}

int ExprBuilder::power(int base, int exponent) { return push({Op::Pow, base, -1, 0.0, exponent}); }

Expr ExprBuilder::build(int root) && {
  auto nodes = std::make_shared<const std::vector<Node>>(std::move(nodes_));
  return Expr(std::move(nodes), root, n_, m_);
}

}  // namespace sweep
