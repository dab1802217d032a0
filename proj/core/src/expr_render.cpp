#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "messy/error.hpp"
#include "messy/expr.hpp"

namespace messy {

namespace {

std::string format_number(double v, int precision) {
  char buf[64];
  if (precision < 0) {
    // shortest text that reads back to the same double
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, end);
  }
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string var_name(int index, int dim) {
  if (dim <= 1 && index == 0) return "x";
  return "x" + std::to_string(index + 1);
}

struct Renderer {
  int dim;
  int precision;

  // Sum as a list of signed terms.
  void collect_terms(const Expr& e, bool negate, std::vector<std::pair<bool, Expr>>& out) const {
    switch (e.op()) {
      case Op::Add:
        collect_terms(e.lhs(), negate, out);
        collect_terms(e.rhs(), negate, out);
        return;
      case Op::Sub:
        collect_terms(e.lhs(), negate, out);
        collect_terms(e.rhs(), !negate, out);
        return;
      case Op::Neg:
        collect_terms(e.child(), !negate, out);
        return;
      default:
        out.emplace_back(negate, e);
    }
  }

  struct Product {
    double coef = 1.0;
    std::map<int, int> powers;
    std::vector<Expr> others;
  };

  void collect_factors(const Expr& e, Product& p) const {
    switch (e.op()) {
      case Op::Mul:
        collect_factors(e.lhs(), p);
        collect_factors(e.rhs(), p);
        return;
      case Op::Neg:
        p.coef = -p.coef;
        collect_factors(e.child(), p);
        return;
      case Op::Const:
        p.coef *= e.value();
        return;
      case Op::Var:
        ++p.powers[e.var_index()];
        return;
      default:
        p.others.push_back(e);
    }
  }

  // Magnitude of a product term; the sign is reported separately.
  std::string term(const Expr& e, bool negate, bool& negative) const {
    Product p;
    collect_factors(e, p);
    if (negate) p.coef = -p.coef;
    negative = p.coef < 0.0;
    const double mag = std::fabs(p.coef);
    std::vector<std::string> parts;
    const bool bare = p.powers.empty() && p.others.empty();
    if (bare || mag != 1.0) parts.push_back(format_number(mag, precision));
    for (auto [var, k] : p.powers) {
      std::string s = var_name(var, dim);
      if (k > 1) s += "^" + std::to_string(k);
      parts.push_back(std::move(s));
    }
    for (const Expr& f : p.others) {
      const bool sum = f.op() == Op::Add || f.op() == Op::Sub;
      parts.push_back(sum ? "(" + sum_text(f) + ")" : atom(f));
    }
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) out += "*";
      out += parts[i];
    }
    return out;
  }

  std::string atom(const Expr& e) const {
    switch (e.op()) {
      case Op::Sin:
        return "sin(" + sum_text(e.child()) + ")";
      case Op::Cos:
        return "cos(" + sum_text(e.child()) + ")";
      default:
        return sum_text(e);
    }
  }

  std::string sum_text(const Expr& e) const {
    std::vector<std::pair<bool, Expr>> terms;
    collect_terms(e, false, terms);
    std::string out;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      bool negative = false;
      const std::string t = term(terms[i].second, terms[i].first, negative);
      if (i == 0) {
        out += negative ? "-" + t : t;
      } else {
        out += negative ? " - " : " + ";
        out += t;
      }
    }
    return out;
  }
};

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  Expr parse() {
    Expr e = sum();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(1, "expression parse error at column " + std::to_string(pos_ + 1) + ": " +
                            msg);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  Expr sum() {
    Expr e = product();
    for (;;) {
      if (accept('+')) {
        e = Expr::raw_binary(Op::Add, e, product());
      } else if (accept('-')) {
        e = Expr::raw_binary(Op::Sub, e, product());
      } else {
        return e;
      }
    }
  }

  Expr product() {
    Expr e = unary();
    while (accept('*')) e = Expr::raw_binary(Op::Mul, e, unary());
    return e;
  }

  Expr unary() {
    if (accept('-')) {
      Expr u = unary();
      if (u.op() == Op::Const) return Expr::constant(-u.value());
      return Expr::raw_unary(Op::Neg, u);
    }
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (!accept('^')) return base;
    skip_ws();
    int k = 0;
    const auto [end, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), k);
    if (ec != std::errc() || k < 1) fail("exponent must be a positive integer");
    pos_ = static_cast<std::size_t>(end - s_.data());
    Expr out = base;
    for (int i = 1; i < k; ++i) out = Expr::raw_binary(Op::Mul, out, base);
    return out;
  }

  Expr primary() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = sum();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double v = 0.0;
      const auto [end, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
      if (ec != std::errc()) fail("bad number");
      pos_ = static_cast<std::size_t>(end - s_.data());
      return Expr::constant(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string_view word = s_.substr(start, pos_ - start);
      if (word == "sin" || word == "cos") {
        expect('(');
        Expr arg = sum();
        expect(')');
        return Expr::raw_unary(word == "sin" ? Op::Sin : Op::Cos, arg);
      }
      if (word == "x") {
        if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
          int idx = 0;
          const auto [end, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), idx);
          if (ec != std::errc() || idx < 1) fail("variable index must be >= 1");
          pos_ = static_cast<std::size_t>(end - s_.data());
          return Expr::var(idx - 1);
        }
        return Expr::var(0);
      }
      pos_ = start;
      fail("unknown identifier '" + std::string(word) + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string render(const Expr& e, int dim, int precision) {
  return Renderer{dim, precision}.sum_text(e);
}

Expr parse_expr(std::string_view text) { return Parser(text).parse(); }

}  // namespace messy
