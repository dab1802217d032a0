#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "messy/rng.hpp"

namespace messy {

enum class Op { Var, Const, Sin, Cos, Neg, Add, Sub, Mul };

bool is_unary(Op op);
bool is_binary(Op op);

/// Immutable symbolic expression tree over variables x_0 .. x_{d-1}.
///
/// Nodes are shared between trees; copying an Expr is cheap. The factory
/// functions fold constants and 0/1 identities, nothing more. Use the
/// `raw_*` factories when an exact tree shape matters (tests, parsing).
class Expr {
 public:
  /// The constant 0.
  Expr();

  static Expr var(int index);
  static Expr constant(double value);

  static Expr raw_unary(Op op, Expr child);
  static Expr raw_binary(Op op, Expr lhs, Expr rhs);

  Op op() const;
  int var_index() const;  ///< only for Op::Var
  double value() const;   ///< only for Op::Const
  const Expr& child() const;  ///< unary operand
  const Expr& lhs() const;
  const Expr& rhs() const;

  bool is_constant() const;  ///< contains no variable at all
  bool is_const_value(double v) const;
  int max_var() const;       ///< -1 when no variable occurs
  std::size_t node_count() const;
  std::size_t depth() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr sin(const Expr& a);
Expr cos(const Expr& a);

/// x_index^power as a product chain (power >= 1).
Expr power(int index, int power);

/// Value at one point; throws EvaluationError on a non-finite result.
double eval(const Expr& e, std::span<const double> x);

/// Values at every row of `points`; throws EvaluationError naming the first
/// offending row.
Eigen::ArrayXd eval_rows(const Expr& e, const Eigen::MatrixXd& points);

/// Same as eval_rows but returns non-finite entries instead of throwing.
Eigen::ArrayXd eval_rows_unchecked(const Expr& e, const Eigen::MatrixXd& points);

/// Flattened postfix form of an Expr for hot loops (MCMC, quadrature).
/// Evaluation does not check finiteness.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  explicit CompiledExpr(const Expr& e);

  double operator()(const double* x) const;
  int max_var() const { return max_var_; }

 private:
  struct Instr {
    Op op;
    int var;
    double value;
  };
  std::vector<Instr> code_;
  std::size_t stack_depth_ = 0;
  int max_var_ = -1;
};

/// Exact partial derivative d e / d x_var by structural rules.
Expr differentiate(const Expr& e, int var);

/// Structural polynomial growth exponent: variables 1, sin/cos 0, mul adds,
/// add/sub take the max.
struct GrowthOrder {
  int order = 0;
  bool even() const { return order % 2 == 0; }
  friend bool operator==(GrowthOrder, GrowthOrder) = default;
};

GrowthOrder growth_order(const Expr& e);

struct RandomExprOptions {
  int dimension = 1;
  int max_order = 2;
  std::vector<Op> ops{Op::Add, Op::Sub, Op::Mul};
  std::vector<Op> funcs{Op::Cos, Op::Sin};
  int max_depth = 4;
  int max_draws = 1000;
  std::vector<double> frequencies{0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5};
};

/// Random admissible basis expression: even growth order <= max_order,
/// non-constant. Throws ExhaustionError after `max_draws` rejected trees.
Expr random_expr(Rng& rng, const RandomExprOptions& options);

/// Infix text with constants to `precision` decimals; variables print as `x`
/// when dim == 1 and `x1`..`xd` otherwise. A negative precision prints the
/// shortest round-trip form of each constant.
std::string render(const Expr& e, int dim = 1, int precision = 3);

/// Parses the output of render(). Accepts `x`, `x1`.., sin, cos, + - * ^ and
/// parentheses. Throws ParseError.
Expr parse_expr(std::string_view text);

/// Monomials of total degree 1..max_order in `dim` variables, ordered by
/// degree then lexicographically (x1, x2, x1^2, x1*x2, x2^2, ...).
std::vector<Expr> polynomial_basis(int dim, int max_order);

}  // namespace messy
