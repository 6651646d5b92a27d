/*
 * solver.hpp
 * ----------
 * Undetermined-coefficients machinery shared by bracket reconstruction, the
 * chain rule, and the weight-homogeneous search: candidate monomial pools
 * (optionally weight-filtered and with declared rational denominator blocks),
 * exact linear solving over the field of true parameters, and inversion of
 * A(chi) = v by coefficient matching.
 */
#pragma once

#include <map>
#include <optional>

#include "jetfrob/system.hpp"
#include "jetfrob/tdop.hpp"

namespace jetfrob {

// scaling weights: additive over products, D_x adds `dx` per derivative,
// the base variable x itself carries -dx
struct WeightSystem {
  Universe* u = nullptr;
  Rat dx = 1;
  std::map<int, Rat> dep_w;    // dependent index -> weight of u^i
  std::map<SymId, Rat> sym_w;  // extra symbols (parameters such as eps)

  Rat sym_weight(SymId s) const;
  // nullopt when a monomial mixes inhomogeneous pieces is impossible for
  // monomials; defined for any product of symbols
  Rat mono_weight(const Monomial& m) const;
  // weight of an expression; nullopt when terms disagree (inhomogeneous)
  std::optional<Rat> weight(const Expr& e) const;
};

struct PoolSpec {
  std::vector<int> deps;       // dependents whose pure-x jets may appear
  int max_jet_order = 2;       // highest jet order allowed
  int max_total_degree = 3;    // total degree of the numerator monomial
  int max_x_degree = 0;        // explicit powers of the base variable x
  std::vector<int> atoms;      // atom indices allowed as factors
  int max_atom_degree = 1;
  int x_index = 0;             // which independent is "x"
  bool include_constant = true;

  // optional weight filter: keep only monomials of exactly target_weight
  const WeightSystem* weights = nullptr;
  Rat target_weight = 0;

  // rational structure: candidate = monomial / prod blocks[i]^{e_i},
  // sum e_i <= max_denom_power (blocks must be weight-homogeneous if
  // weights are declared)
  std::vector<Expr> denom_blocks;
  int max_denom_power = 0;
};

// deterministic pool (graded-lex, lowest first; denominator powers after)
std::vector<Expr> make_pool(Universe* u, const PoolSpec& spec);

// linear system solving over the field of rational functions of the true
// parameters.  `unknowns` are auxiliary parameter symbols occurring linearly;
// the residuals must vanish identically in all non-parameter symbols.
struct LinearSolution {
  bool ok = false;
  std::map<SymId, Expr> assign;  // unknown -> value (free unknowns -> 0)
  // nonzero parameter polynomials that must vanish for consistency (empty
  // when ok); used for stratum branching by the search
  std::vector<Expr> conditions;
  // parametric pivots assumed nonzero during elimination
  std::vector<Expr> assumptions;
};
LinearSolution solve_linear(const std::vector<Expr>& residuals,
                            const std::vector<SymId>& unknowns);

// solve A(chi) = v by matching coefficients against the pool; component c of
// chi ranges over span(pool).  When `sys` is given residuals are reduced
// before matching.
struct OperatorSolution {
  bool ok = false;
  std::vector<Expr> chi;
  std::vector<Expr> conditions;
  std::vector<Expr> assumptions;
};
OperatorSolution solve_operator_linear(const TDOperator& A, const std::vector<Expr>& v,
                                       const PoolSpec& spec, const SystemModel* sys = nullptr);

// fresh auxiliary unknown (a parameter symbol with a reserved name)
SymId fresh_unknown(Universe* u);

}  // namespace jetfrob
