#include <cmath>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "messy/error.hpp"
#include "messy/expr.hpp"
#include "oracles.hpp"

using namespace messy;

namespace {

const Expr x = Expr::var(0);
const Expr y = Expr::var(1);

double at(const Expr& e, double v) {
  const double p[1] = {v};
  return eval(e, p);
}

double at2(const Expr& e, double a, double b) {
  const double p[2] = {a, b};
  return eval(e, p);
}

// x^2 * cos(x), built node by node.
Expr fig_tree() {
  return Expr::raw_binary(Op::Mul, Expr::raw_binary(Op::Mul, x, x), Expr::raw_unary(Op::Cos, x));
}

}  // namespace

TEST_SUITE("expr") {

TEST_CASE("eval on the product-cosine tree") {
  CHECK(at(fig_tree(), 0.0) == 0.0);
  CHECK(at(fig_tree(), std::numbers::pi) == doctest::Approx(-std::numbers::pi * std::numbers::pi));
  CHECK(at(Expr::constant(3.5), 12.0) == 3.5);
}

TEST_CASE("eval reports overflow") {
  Expr e = x;
  for (int i = 0; i < 12; ++i) e = Expr::raw_binary(Op::Mul, e, e);  // x^4096
  CHECK_THROWS_AS(at(e, 10.0), EvaluationError);
}

TEST_CASE("compiled form agrees with the tree walker") {
  Rng rng(7);
  RandomExprOptions opt;
  opt.dimension = 2;
  opt.max_order = 4;
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int t = 0; t < 200; ++t) {
    const Expr e = random_expr(rng, opt);
    const CompiledExpr c(e);
    for (int k = 0; k < 5; ++k) {
      const double p[2] = {u(rng), u(rng)};
      CHECK(c(p) == doctest::Approx(eval(e, p)).epsilon(1e-12));
    }
  }
}

TEST_CASE("differentiate: basic rules") {
  const Expr d = differentiate(power(0, 2), 0);
  for (double v : {-1.5, 0.0, 2.0}) CHECK(at(d, v) == doctest::Approx(2 * v));

  const Expr dfig = differentiate(fig_tree(), 0);
  for (double v : {-1.0, 0.3, 2.0}) {
    const double expect = 2 * v * std::cos(v) - v * v * std::sin(v);
    CHECK(at(dfig, v) == doctest::Approx(expect).epsilon(1e-12));
    const double fd = oracle::central_diff([](double t) { return t * t * std::cos(t); }, v);
    CHECK(at(dfig, v) == doctest::Approx(fd).epsilon(1e-7));
  }

  const Expr dx2 = differentiate(power(0, 2), 1);
  CHECK(dx2.is_constant());
  CHECK(at2(dx2, 1.3, -0.4) == 0.0);
}

TEST_CASE("differentiate matches central differences on random trees") {
  Rng rng(11);
  RandomExprOptions opt;
  opt.dimension = 2;
  opt.max_order = 4;
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int t = 0; t < 150; ++t) {
    const Expr e = random_expr(rng, opt);
    for (int var = 0; var < 2; ++var) {
      const Expr de = differentiate(e, var);
      for (int k = 0; k < 100; ++k) {
        double p[2] = {u(rng), u(rng)};
        const double exact = eval(de, p);
        auto f = [&](double v) {
          double q[2] = {p[0], p[1]};
          q[var] = v;
          return eval(e, q);
        };
        const double fd = oracle::central_diff(f, p[var], 1e-5);
        CHECK(std::fabs(exact - fd) <= 1e-6 * (std::fabs(exact) + 1.0) + 1e-6);
      }
    }
  }
}

TEST_CASE("growth order") {
  CHECK(growth_order(power(0, 2)).order == 2);
  CHECK(growth_order(fig_tree()).order == 2);
  const Expr cube = Expr::raw_binary(Op::Mul, Expr::raw_binary(Op::Mul, x, x), x);
  CHECK(growth_order(cube).order == 3);
  CHECK_FALSE(growth_order(cube).even());
  CHECK(growth_order(Expr::constant(2.0)).order == 0);
  CHECK(growth_order(cos(x * y)).order == 0);
}

TEST_CASE("growth order composes structurally") {
  Rng rng(3);
  RandomExprOptions opt;
  opt.dimension = 2;
  opt.max_order = 4;
  for (int t = 0; t < 300; ++t) {
    const Expr a = random_expr(rng, opt);
    const Expr b = random_expr(rng, opt);
    const int ga = growth_order(a).order;
    const int gb = growth_order(b).order;
    CHECK(growth_order(Expr::raw_binary(Op::Mul, a, b)).order == ga + gb);
    CHECK(growth_order(Expr::raw_binary(Op::Add, a, b)).order == std::max(ga, gb));
    CHECK(growth_order(Expr::raw_binary(Op::Sub, a, b)).order == std::max(ga, gb));
  }
}

TEST_CASE("random_expr output is always admissible") {
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    Rng rng(seed);
    RandomExprOptions opt;
    opt.max_order = seed % 2 ? 2 : 4;
    opt.funcs = seed % 3 ? std::vector<Op>{Op::Cos} : std::vector<Op>{Op::Cos, Op::Sin};
    const Expr e = random_expr(rng, opt);
    const GrowthOrder g = growth_order(e);
    REQUIRE(g.even());
    REQUIRE(g.order <= opt.max_order);
    REQUIRE_FALSE(e.is_constant());
    REQUIRE(e.max_var() == 0);
  }
}

TEST_CASE("random_expr respects the operator set") {
  std::function<bool(const Expr&)> only_mul = [&](const Expr& e) {
    if (e.op() == Op::Add || e.op() == Op::Sub) return false;
    if (is_binary(e.op())) return only_mul(e.lhs()) && only_mul(e.rhs());
    if (is_unary(e.op())) return only_mul(e.child());
    return true;
  };
  Rng rng(5);
  RandomExprOptions opt;
  opt.max_order = 4;
  opt.ops = {Op::Mul};
  for (int t = 0; t < 500; ++t) CHECK(only_mul(random_expr(rng, opt)));

  std::function<bool(const Expr&)> no_trig = [&](const Expr& e) {
    if (e.op() == Op::Sin || e.op() == Op::Cos) return false;
    if (is_binary(e.op())) return no_trig(e.lhs()) && no_trig(e.rhs());
    if (is_unary(e.op())) return no_trig(e.child());
    return true;
  };
  RandomExprOptions poly;
  poly.funcs = {};
  poly.ops = {Op::Add, Op::Mul};
  for (int t = 0; t < 500; ++t) {
    const Expr e = random_expr(rng, poly);
    CHECK(no_trig(e));
    CHECK(growth_order(e).order == 2);
  }
}

TEST_CASE("random_expr is seed deterministic") {
  RandomExprOptions opt;
  opt.dimension = 3;
  Rng a(99), b(99);
  for (int t = 0; t < 50; ++t) CHECK(random_expr(a, opt) == random_expr(b, opt));
}

TEST_CASE("random_expr gives up after its draw budget") {
  RandomExprOptions opt;
  opt.max_draws = 0;
  Rng rng(1);
  CHECK_THROWS_AS(random_expr(rng, opt), ExhaustionError);
}

TEST_CASE("render") {
  CHECK(render(fig_tree()) == "x^2*cos(x)");
  const Expr e = Expr::constant(-0.145) * power(0, 2) + Expr::constant(0.018) * x;
  CHECK(render(e) == "-0.145*x^2 + 0.018*x");
  CHECK(render(Expr::constant(1.0)) == "1.000");
  CHECK(render(power(0, 2) * y, 2) == "x1^2*x2");
}

TEST_CASE("render and parse round trip") {
  Rng rng(21);
  RandomExprOptions opt;
  opt.dimension = 2;
  opt.max_order = 4;
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int t = 0; t < 300; ++t) {
    const Expr e = Expr::constant(u(rng)) * random_expr(rng, opt);
    const Expr back = parse_expr(render(e, 2, -1));
    for (int k = 0; k < 5; ++k) {
      const double p[2] = {u(rng), u(rng)};
      CHECK(eval(back, p) == doctest::Approx(eval(e, p)).epsilon(1e-12));
    }
  }
}

TEST_CASE("parse rejects malformed text") {
  CHECK_THROWS_AS(parse_expr("x +"), ParseError);
  CHECK_THROWS_AS(parse_expr("cos(x"), ParseError);
  CHECK_THROWS_AS(parse_expr("exp(x)"), ParseError);
}

TEST_CASE("polynomial basis ordering") {
  const auto b = polynomial_basis(2, 2);
  REQUIRE(b.size() == 5);
  CHECK(render(b[0], 2) == "x1");
  CHECK(render(b[1], 2) == "x2");
  CHECK(render(b[2], 2) == "x1^2");
  CHECK(render(b[3], 2) == "x1*x2");
  CHECK(render(b[4], 2) == "x2^2");
  CHECK(polynomial_basis(1, 10).size() == 10);
  CHECK(polynomial_basis(10, 2).size() == 65);
}

}  // TEST_SUITE
