/*
 * poly.hpp
 * --------
 * Exact sparse multivariate polynomials over the rationals in the symbols of a
 * Universe.  Terms are kept sorted in descending graded-lexicographic order on
 * the universe's canonical symbol order, giving a unique representation.
 *
 * Provides ring arithmetic, content extraction, exact division, a subresultant
 * PRS gcd (guarded by a term budget; callers fall back to probabilistic
 * identity testing above it), partial derivatives, substitution hooks, and
 * evaluation in a 61-bit prime field for Schwartz-Zippel style checks.
 */
#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "jetfrob/universe.hpp"

namespace jetfrob {

using Rat = mpq_class;

// prime field for probabilistic identity testing: 2^61 - 1
constexpr uint64_t kPrime = 2305843009213693951ULL;
uint64_t mulmod(uint64_t a, uint64_t b);
uint64_t powmod(uint64_t a, uint64_t e);
uint64_t invmod(uint64_t a);

// exponent vector, sorted ascending by the universe's canonical symbol order
struct Monomial {
  std::vector<std::pair<SymId, int>> e;
  int degree() const;
  bool is_one() const { return e.empty(); }
  int exponent(SymId s) const;
  bool operator==(const Monomial& o) const { return e == o.e; }
};

Monomial mono_mul(const Monomial& a, const Monomial& b);
// exact division; nullopt if not divisible
std::optional<Monomial> mono_div(const Monomial& a, const Monomial& b);
Monomial mono_gcd(const Monomial& a, const Monomial& b);

// strict "a < b" in graded-lex order (degree first, then earlier symbol with
// higher exponent wins)
bool mono_less(const Universe& u, const Monomial& a, const Monomial& b);

class Poly {
 public:
  Poly() = default;
  explicit Poly(Universe* u) : u_(u) {}
  Poly(Universe* u, const Rat& c);
  Poly(Universe* u, SymId s, int exp = 1);

  Universe* universe() const { return u_; }
  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const;
  bool is_one() const;
  int n_terms() const { return (int)terms_.size(); }
  int total_degree() const;
  // descending graded-lex
  const std::vector<std::pair<Monomial, Rat>>& terms() const { return terms_; }
  const Monomial& leading_monomial() const { return terms_.front().first; }
  const Rat& leading_coeff() const { return terms_.front().second; }

  Poly operator+(const Poly& o) const;
  Poly operator-(const Poly& o) const;
  Poly operator-() const;
  Poly operator*(const Poly& o) const;
  Poly mul_term(const Monomial& m, const Rat& c) const;
  Poly mul_scalar(const Rat& c) const;
  Poly pow(int n) const;
  bool operator==(const Poly& o) const { return terms_ == o.terms_; }

  // rational content (gcd of coefficients, sign of leading coeff)
  Rat content() const;
  // per-symbol minimum exponent over all terms
  Monomial monomial_content() const;
  Poly divide_monomial(const Monomial& m) const;

  // exact division; nullopt if remainder nonzero
  std::optional<Poly> divide_exact(const Poly& d) const;

  Poly partial(SymId s) const;
  // degree in one symbol; coefficient of s^k as a Poly
  int degree_in(SymId s) const;
  Poly coeff_of(SymId s, int k) const;
  bool depends_on(SymId s) const;
  std::vector<SymId> support() const;

  // substitute each listed symbol by a numerator/denominator pair of polys;
  // returns (num, den).  Used by Expr substitution.
  std::pair<Poly, Poly> substitute(
      const std::function<const std::pair<Poly, Poly>*(SymId)>& repl) const;

  uint64_t eval_mod(const std::function<uint64_t(SymId)>& point) const;

  std::string str() const;

  // construction helper: accumulate then canonicalize
  static Poly from_terms(Universe* u, std::vector<std::pair<Monomial, Rat>> ts);

 private:
  Universe* u_ = nullptr;
  std::vector<std::pair<Monomial, Rat>> terms_;
};

// gcd with term budget; returns 1 when either side exceeds the budget
Poly poly_gcd(const Poly& a, const Poly& b, int term_budget = 500);

}  // namespace jetfrob
