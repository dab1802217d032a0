#include "messy/expr.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "messy/error.hpp"

namespace messy {

struct Expr::Node {
  Op op = Op::Const;
  int var = -1;
  double value = 0.0;
  Expr a{std::shared_ptr<const Node>()};
  Expr b{std::shared_ptr<const Node>()};
  int max_var = -1;
  std::size_t count = 1;
  std::size_t depth = 1;
};

bool is_unary(Op op) { return op == Op::Sin || op == Op::Cos || op == Op::Neg; }
bool is_binary(Op op) { return op == Op::Add || op == Op::Sub || op == Op::Mul; }

Expr::Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Expr::Expr() {
  static const auto zero = [] {
    auto n = std::make_shared<Node>();
    n->op = Op::Const;
    n->value = 0.0;
    return std::shared_ptr<const Node>(n);
  }();
  node_ = zero;
}

Expr Expr::var(int index) {
  if (index < 0) throw std::invalid_argument("variable index must be non-negative");
  auto n = std::make_shared<Node>();
  n->op = Op::Var;
  n->var = index;
  n->max_var = index;
  return Expr(std::move(n));
}

Expr Expr::constant(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("expression constants must be finite");
  auto n = std::make_shared<Node>();
  n->op = Op::Const;
  n->value = value;
  return Expr(std::move(n));
}

Expr Expr::raw_unary(Op op, Expr child) {
  if (!is_unary(op)) throw std::invalid_argument("not a unary operator");
  auto n = std::make_shared<Node>();
  n->op = op;
  n->max_var = child.max_var();
  n->count = 1 + child.node_count();
  n->depth = 1 + child.depth();
  n->a = std::move(child);
  return Expr(std::move(n));
}

Expr Expr::raw_binary(Op op, Expr lhs, Expr rhs) {
  if (!is_binary(op)) throw std::invalid_argument("not a binary operator");
  auto n = std::make_shared<Node>();
  n->op = op;
  n->max_var = std::max(lhs.max_var(), rhs.max_var());
  n->count = 1 + lhs.node_count() + rhs.node_count();
  n->depth = 1 + std::max(lhs.depth(), rhs.depth());
  n->a = std::move(lhs);
  n->b = std::move(rhs);
  return Expr(std::move(n));
}

Op Expr::op() const { return node_->op; }
int Expr::var_index() const { return node_->var; }
double Expr::value() const { return node_->value; }
const Expr& Expr::child() const { return node_->a; }
const Expr& Expr::lhs() const { return node_->a; }
const Expr& Expr::rhs() const { return node_->b; }
bool Expr::is_constant() const { return node_->max_var < 0; }
bool Expr::is_const_value(double v) const { return node_->op == Op::Const && node_->value == v; }
int Expr::max_var() const { return node_->max_var; }
std::size_t Expr::node_count() const { return node_->count; }
std::size_t Expr::depth() const { return node_->depth; }

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (a.op() != b.op() || a.node_count() != b.node_count()) return false;
  switch (a.op()) {
    case Op::Var:
      return a.var_index() == b.var_index();
    case Op::Const:
      return a.value() == b.value();
    case Op::Sin:
    case Op::Cos:
    case Op::Neg:
      return a.child() == b.child();
    default:
      return a.lhs() == b.lhs() && a.rhs() == b.rhs();
  }
}

Expr operator-(const Expr& a) {
  if (a.op() == Op::Const) return Expr::constant(-a.value());
  if (a.op() == Op::Neg) return a.child();
  if (a.op() == Op::Mul && a.lhs().op() == Op::Const) {
    return Expr::constant(-a.lhs().value()) * a.rhs();
  }
  return Expr::raw_unary(Op::Neg, a);
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.op() == Op::Const && b.op() == Op::Const) return Expr::constant(a.value() + b.value());
  if (a.is_const_value(0.0)) return b;
  if (b.is_const_value(0.0)) return a;
  return Expr::raw_binary(Op::Add, a, b);
}

Expr operator-(const Expr& a, const Expr& b) {
  if (a.op() == Op::Const && b.op() == Op::Const) return Expr::constant(a.value() - b.value());
  if (b.is_const_value(0.0)) return a;
  if (a.is_const_value(0.0)) return -b;
  return Expr::raw_binary(Op::Sub, a, b);
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.op() == Op::Const && b.op() == Op::Const) return Expr::constant(a.value() * b.value());
  if (a.is_const_value(0.0) || b.is_const_value(0.0)) return Expr::constant(0.0);
  if (a.is_const_value(1.0)) return b;
  if (b.is_const_value(1.0)) return a;
  if (b.op() == Op::Const) return b * a;
  if (a.op() == Op::Const) {
    if (a.value() == -1.0) return -b;
    if (b.op() == Op::Mul && b.lhs().op() == Op::Const) {
      return Expr::constant(a.value() * b.lhs().value()) * b.rhs();
    }
    if (b.op() == Op::Neg) return Expr::constant(-a.value()) * b.child();
  }
  return Expr::raw_binary(Op::Mul, a, b);
}

Expr sin(const Expr& a) {
  if (a.op() == Op::Const) return Expr::constant(std::sin(a.value()));
  return Expr::raw_unary(Op::Sin, a);
}

Expr cos(const Expr& a) {
  if (a.op() == Op::Const) return Expr::constant(std::cos(a.value()));
  return Expr::raw_unary(Op::Cos, a);
}

Expr power(int index, int power) {
  if (power < 1) throw std::invalid_argument("power must be >= 1");
  Expr out = Expr::var(index);
  for (int k = 1; k < power; ++k) out = Expr::raw_binary(Op::Mul, out, Expr::var(index));
  return out;
}

namespace {

double eval_node(const Expr& e, std::span<const double> x) {
  switch (e.op()) {
    case Op::Var:
      return x[static_cast<std::size_t>(e.var_index())];
    case Op::Const:
      return e.value();
    case Op::Sin:
      return std::sin(eval_node(e.child(), x));
    case Op::Cos:
      return std::cos(eval_node(e.child(), x));
    case Op::Neg:
      return -eval_node(e.child(), x);
    case Op::Add:
      return eval_node(e.lhs(), x) + eval_node(e.rhs(), x);
    case Op::Sub:
      return eval_node(e.lhs(), x) - eval_node(e.rhs(), x);
    case Op::Mul:
      return eval_node(e.lhs(), x) * eval_node(e.rhs(), x);
  }
  return 0.0;
}

Eigen::ArrayXd eval_batch(const Expr& e, const Eigen::MatrixXd& points) {
  switch (e.op()) {
    case Op::Var:
      return points.col(e.var_index()).array();
    case Op::Const:
      return Eigen::ArrayXd::Constant(points.rows(), e.value());
    case Op::Sin:
      return eval_batch(e.child(), points).sin();
    case Op::Cos:
      return eval_batch(e.child(), points).cos();
    case Op::Neg:
      return -eval_batch(e.child(), points);
    case Op::Add:
      return eval_batch(e.lhs(), points) + eval_batch(e.rhs(), points);
    case Op::Sub:
      return eval_batch(e.lhs(), points) - eval_batch(e.rhs(), points);
    case Op::Mul:
      return eval_batch(e.lhs(), points) * eval_batch(e.rhs(), points);
  }
  return {};
}

}  // namespace

double eval(const Expr& e, std::span<const double> x) {
  if (e.max_var() >= static_cast<int>(x.size())) {
    throw std::invalid_argument("point dimension smaller than expression dimension");
  }
  const double v = eval_node(e, x);
  if (!std::isfinite(v)) throw EvaluationError("expression evaluated to a non-finite value");
  return v;
}

Eigen::ArrayXd eval_rows_unchecked(const Expr& e, const Eigen::MatrixXd& points) {
  if (e.max_var() >= points.cols()) {
    throw std::invalid_argument("point dimension smaller than expression dimension");
  }
  return eval_batch(e, points);
}

Eigen::ArrayXd eval_rows(const Expr& e, const Eigen::MatrixXd& points) {
  Eigen::ArrayXd v = eval_rows_unchecked(e, points);
  if (!v.allFinite()) {
    Eigen::Index bad = 0;
    while (bad < v.size() && std::isfinite(v(bad))) ++bad;
    throw EvaluationError("expression is non-finite at sample " + std::to_string(bad));
  }
  return v;
}

Expr differentiate(const Expr& e, int var) {
  if (var < 0) throw std::invalid_argument("variable index must be non-negative");
  if (e.max_var() < var) return Expr::constant(0.0);
  switch (e.op()) {
    case Op::Var:
      return Expr::constant(e.var_index() == var ? 1.0 : 0.0);
    case Op::Const:
      return Expr::constant(0.0);
    case Op::Sin:
      return cos(e.child()) * differentiate(e.child(), var);
    case Op::Cos:
      return -(sin(e.child()) * differentiate(e.child(), var));
    case Op::Neg:
      return -differentiate(e.child(), var);
    case Op::Add:
      return differentiate(e.lhs(), var) + differentiate(e.rhs(), var);
    case Op::Sub:
      return differentiate(e.lhs(), var) - differentiate(e.rhs(), var);
    case Op::Mul: {
      const Expr dl = differentiate(e.lhs(), var);
      const Expr dr = differentiate(e.rhs(), var);
      return dl * e.rhs() + e.lhs() * dr;
    }
  }
  return Expr::constant(0.0);
}

GrowthOrder growth_order(const Expr& e) {
  switch (e.op()) {
    case Op::Var:
      return {1};
    case Op::Const:
    case Op::Sin:
    case Op::Cos:
      return {0};
    case Op::Neg:
      return growth_order(e.child());
    case Op::Add:
    case Op::Sub:
      return {std::max(growth_order(e.lhs()).order, growth_order(e.rhs()).order)};
    case Op::Mul:
      return {growth_order(e.lhs()).order + growth_order(e.rhs()).order};
  }
  return {0};
}

namespace {

class TreeSampler {
 public:
  TreeSampler(Rng& rng, const RandomExprOptions& o) : rng_(rng), o_(o) {}

  Expr grow(int depth) {
    const bool at_limit = depth >= o_.max_depth;
    if (at_limit) return leaf();
    // the root is never a bare variable: a lone x_i has odd order
    const double p_leaf = depth == 0 ? 0.0 : 0.3;
    const double p_func = o_.funcs.empty() ? 0.0 : 0.25;
    const double p_op = o_.ops.empty() ? 0.0 : 0.45;
    std::uniform_real_distribution<double> u(0.0, p_leaf + p_func + p_op);
    const double r = u(rng_);
    if (r < p_leaf || (p_func + p_op) == 0.0) return leaf();
    if (r < p_leaf + p_func) {
      const Op f = pick(o_.funcs);
      const double freq = pick(o_.frequencies);
      Expr arg = grow(depth + 1);
      if (freq != 1.0) arg = Expr::raw_binary(Op::Mul, Expr::constant(freq), arg);
      return Expr::raw_unary(f, arg);
    }
    const Op op = pick(o_.ops);
    Expr l = grow(depth + 1);
    Expr r2 = grow(depth + 1);
    return Expr::raw_binary(op, l, r2);
  }

 private:
  Expr leaf() {
    std::uniform_int_distribution<int> d(0, o_.dimension - 1);
    return Expr::var(d(rng_));
  }

  template <class T>
  T pick(const std::vector<T>& v) {
    std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
    return v[d(rng_)];
  }

  Rng& rng_;
  const RandomExprOptions& o_;
};

}  // namespace

Expr random_expr(Rng& rng, const RandomExprOptions& options) {
  if (options.dimension < 1) throw std::invalid_argument("dimension must be >= 1");
  if (options.max_order < 2 || options.max_order % 2 != 0) {
    throw std::invalid_argument("max_order must be even and >= 2");
  }
  if (options.ops.empty()) throw std::invalid_argument("operator set must be non-empty");
  for (Op op : options.ops) {
    if (!is_binary(op)) throw std::invalid_argument("ops must be binary operators");
  }
  for (Op f : options.funcs) {
    if (f != Op::Sin && f != Op::Cos) throw std::invalid_argument("funcs must be sin/cos");
  }
  if (options.frequencies.empty()) throw std::invalid_argument("frequency lattice is empty");
  TreeSampler sampler(rng, options);
  for (int draw = 0; draw < options.max_draws; ++draw) {
    Expr e = sampler.grow(0);
    const GrowthOrder g = growth_order(e);
    if (!g.even() || g.order > options.max_order || e.is_constant()) continue;
    return e;
  }
  throw ExhaustionError("no admissible expression after " + std::to_string(options.max_draws) +
                        " draws");
}

std::vector<Expr> polynomial_basis(int dim, int max_order) {
  if (dim < 1 || max_order < 1) throw std::invalid_argument("polynomial_basis: bad arguments");
  std::vector<Expr> out;
  // exponent vectors of total degree `deg`, lexicographically descending
  std::vector<int> exps(static_cast<std::size_t>(dim), 0);
  for (int deg = 1; deg <= max_order; ++deg) {
    std::vector<std::vector<int>> terms;
    auto rec = [&](auto&& self, int j, int left) -> void {
      if (j == dim - 1) {
        exps[static_cast<std::size_t>(j)] = left;
        terms.push_back(exps);
        return;
      }
      for (int k = left; k >= 0; --k) {
        exps[static_cast<std::size_t>(j)] = k;
        self(self, j + 1, left - k);
      }
    };
    rec(rec, 0, deg);
    for (const auto& t : terms) {
      Expr term;
      bool first = true;
      for (int j = 0; j < dim; ++j) {
        for (int k = 0; k < t[static_cast<std::size_t>(j)]; ++k) {
          term = first ? Expr::var(j) : Expr::raw_binary(Op::Mul, term, Expr::var(j));
          first = false;
        }
      }
      out.push_back(term);
    }
  }
  return out;
}

}  // namespace messy

namespace messy {

namespace {

void emit(const Expr& e, std::vector<std::pair<Op, Expr>>& out) {
  if (is_binary(e.op())) {
    emit(e.lhs(), out);
    emit(e.rhs(), out);
  } else if (is_unary(e.op())) {
    emit(e.child(), out);
  }
  out.emplace_back(e.op(), e);
}

}  // namespace

CompiledExpr::CompiledExpr(const Expr& e) : max_var_(e.max_var()) {
  std::vector<std::pair<Op, Expr>> flat;
  emit(e, flat);
  std::size_t depth = 0;
  for (const auto& [op, node] : flat) {
    Instr in{op, -1, 0.0};
    if (op == Op::Var) in.var = node.var_index();
    if (op == Op::Const) in.value = node.value();
    code_.push_back(in);
    if (op == Op::Var || op == Op::Const) {
      stack_depth_ = std::max(stack_depth_, ++depth);
    } else if (is_binary(op)) {
      --depth;
    }
  }
}

double CompiledExpr::operator()(const double* x) const {
  constexpr std::size_t kInline = 32;
  double inline_stack[kInline];
  std::vector<double> heap;
  double* st = inline_stack;
  if (stack_depth_ > kInline) {
    heap.resize(stack_depth_);
    st = heap.data();
  }
  std::size_t sp = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::Var:
        st[sp++] = x[in.var];
        break;
      case Op::Const:
        st[sp++] = in.value;
        break;
      case Op::Sin:
        st[sp - 1] = std::sin(st[sp - 1]);
        break;
      case Op::Cos:
        st[sp - 1] = std::cos(st[sp - 1]);
        break;
      case Op::Neg:
        st[sp - 1] = -st[sp - 1];
        break;
      case Op::Add:
        --sp;
        st[sp - 1] += st[sp];
        break;
      case Op::Sub:
        --sp;
        st[sp - 1] -= st[sp];
        break;
      case Op::Mul:
        --sp;
        st[sp - 1] *= st[sp];
        break;
    }
  }
  return sp ? st[0] : 0.0;
}

}  // namespace messy
