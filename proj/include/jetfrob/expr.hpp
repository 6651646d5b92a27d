/*
 * expr.hpp
 * --------
 * Exact rational expressions: a canonical pair numerator/denominator of sparse
 * polynomials with no common monomial or rational content, denominator
 * primitive with positive leading coefficient.  Full multivariate gcd is
 * applied only when both sides fit the term budget; above it, expressions stay
 * exact but equality testing should use the probabilistic mode.
 */
#pragma once

#include <functional>
#include <optional>
#include <string>

#include "jetfrob/poly.hpp"

namespace jetfrob {

struct EvalPoint;

class Expr {
 public:
  Expr() = default;
  explicit Expr(Universe* u) : num_(u), den_(u, Rat(1)) {}
  Expr(Universe* u, const Rat& c) : num_(u, c), den_(u, Rat(1)) {}
  Expr(Universe* u, SymId s) : num_(u, s), den_(u, Rat(1)) {}
  Expr(Poly num, Poly den, int term_budget = 500);
  static Expr from_poly(Poly p);

  Universe* universe() const { return num_.universe(); }
  const Poly& num() const { return num_; }
  const Poly& den() const { return den_; }
  bool is_zero() const { return num_.is_zero(); }
  bool is_constant() const { return num_.is_constant() && den_.is_constant(); }
  bool is_polynomial() const { return den_.is_one(); }
  std::optional<Rat> as_rational() const;

  Expr operator+(const Expr& o) const;
  Expr operator-(const Expr& o) const;
  Expr operator-() const;
  Expr operator*(const Expr& o) const;
  Expr operator/(const Expr& o) const;  // throws on zero divisor
  Expr mul_scalar(const Rat& c) const;
  Expr pow(int n) const;  // negative allowed for nonzero

  // exact structural equality of canonical forms of the cross product
  bool equals(const Expr& o) const;
  // probabilistic equality: `trials` agreeing evaluations at independently
  // drawn points (seeded); never contradicts exact equality on polynomially
  // bounded inputs
  bool equals_probabilistic(const Expr& o, int trials = 20, uint64_t seed = 0) const;
  bool is_zero_probabilistic(int trials = 20, uint64_t seed = 0) const;

  Expr partial(SymId s) const;
  bool depends_on(SymId s) const;
  std::vector<SymId> support() const;
  int max_jet_order(int dep = -1) const;  // -1: over all dependents
  int total_degree() const { return std::max(num_.total_degree(), den_.total_degree()); }

  // substitute symbols by Exprs (nullptr = keep)
  Expr substitute(const std::function<const Expr*(SymId)>& repl) const;

  // evaluation in the prime field; nullopt when the denominator vanishes
  std::optional<uint64_t> eval_mod(const std::function<uint64_t(SymId)>& point) const;

  std::string str() const;

 private:
  Poly num_, den_;
};

// deterministic pseudo-random evaluation points (splitmix64 over symbol ids)
struct EvalPoint {
  uint64_t seed;
  explicit EvalPoint(uint64_t s) : seed(s) {}
  uint64_t operator()(SymId s) const;
};

}  // namespace jetfrob
