#pragma once

// Arithmetic expressions over time t, states x1..xn and controls u1..um.
//
// Grammar (highest precedence first):
//   primary  := number | t | x<i> | u<j> | func '(' args ')' | '(' expr ')'
//   power    := primary [ '^' ['-'|'+'] integer ]
//   unary    := '-' unary | power
//   term     := unary { ('*' | '/') unary }
//   expr     := term { ('+' | '-') term }
// Functions: exp, ln, sqrt, sin, cos (one argument), max2 (two arguments).

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sweep {

enum class Op : std::uint8_t {
  Const,
  Time,
  State,
  Control,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Neg,
  Exp,
  Ln,
  Sqrt,
  Sin,
  Cos,
  Max2,
};

/// One AST node. Children are indices into the owning node array and always
/// precede their parent. `index` is the 0-based variable index for State and
/// Control nodes and the integer exponent for Pow.
struct Node {
  Op op = Op::Const;
  std::int32_t lhs = -1;
  std::int32_t rhs = -1;
  double constant = 0.0;
  std::int32_t index = 0;
};

/// Immutable expression tree. Copies share storage.
class Expr {
 public:
  /// Throws SyntaxError, UnknownIdentifier or IndexOutOfRange.
  static Expr parse(std::string_view src, int n, int m);

  int state_dim() const { return n_; }
  int control_dim() const { return m_; }
  std::span<const Node> nodes() const { return *nodes_; }
  int root() const { return root_; }
  const Node& node(int i) const { return (*nodes_)[static_cast<std::size_t>(i)]; }

  /// Fully parenthesized canonical text; parse(str()) reproduces this tree.
  std::string str() const { return str(root_); }
  std::string str(int node) const;

  bool contains(Op op) const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  friend class ExprBuilder;
  Expr(std::shared_ptr<const std::vector<Node>> nodes, int root, int n, int m)
      : nodes_(std::move(nodes)), root_(root), n_(n), m_(m) {}

  std::shared_ptr<const std::vector<Node>> nodes_;
  int root_ = 0;
  int n_ = 0;
  int m_ = 0;
};

/// Programmatic construction of expression trees (used for generated
/// constraints such as the augmentation ball and by property tests).
class ExprBuilder {
 public:
  ExprBuilder(int n, int m) : n_(n), m_(m) {}

  /// Constants must be finite and non-negative; negation is a separate node.
  int constant(double value);
  int time();
  int state(int i);    // 0-based
  int control(int j);  // 0-based
  int unary(Op op, int arg);
  int binary(Op op, int lhs, int rhs);
  int power(int base, int exponent);

  Expr build(int root) &&;

 private:
  int push(Node node);

  int n_;
  int m_;
  std::vector<Node> nodes_;
};

std::string_view op_name(Op op);

}  // namespace sweep
