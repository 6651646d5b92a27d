/*
 * liouville.hpp
 * -------------
 * Euler-Lagrange Liouville-type pipeline: a Lagrangian density
 * L = -1/2 <kappa u_x, u_y> - H(u; x, y) with constant symmetric invertible
 * kappa, its hyperbolic system u_xy = kappa^{-1}(-dH/du), Dirac momenta,
 * the operator box = (adjoint linearization of the integrals w.r.t. the
 * momenta), Noether symmetries box(delta H / delta w), the induced
 * Hamiltonian operator box* o (l_m)* o box, the box-bracket, and the
 * determining-equation classification l_w o box.
 */
#pragma once

#include "jetfrob/bracket.hpp"

namespace jetfrob {

struct LagrangianModel {
  Universe* u = nullptr;
  std::vector<int> deps;
  std::vector<std::vector<Rat>> kappa;
  Expr H;          // interaction term
  SystemModel sys; // hyperbolic u_xy = kappa^{-1}(-dH/du)

  static LagrangianModel make(Universe* u, std::vector<int> deps,
                              std::vector<std::vector<Rat>> kappa, Expr H);
  Expr lagrangian() const;  // -1/2 <kappa u_x, u_y> - H
};

std::vector<std::vector<Rat>> rational_inverse(const std::vector<std::vector<Rat>>& M);

// Dirac momenta m = dL/du_y = -1/2 kappa u_x
Section momenta(const LagrangianModel& model);

// integral dictionary: auxiliary x_only dependents W_i standing for the
// integrals w_i[u], with the leading pure-x jet of each w_i (used for greedy
// re-expression of u-jet coefficients in terms of the W-jets)
struct WDict {
  std::vector<int> wdeps;    // auxiliary dependents
  std::vector<Expr> w_in_u;  // integrals as u-jet expressions
  std::vector<int> udeps;    // original dependents the integrals are built from
  std::vector<int> lead_order;  // per integral: order of its top pure-x jets
};
WDict make_wdict(Universe* u, const std::vector<Expr>& w_in_u, const std::string& name = "W");

// order-by-order elimination: rewrite a u-jet expression as a function of x
// and the W-jets, solving the lead rows of D^k(w_i) for the top-order jets at
// each order; *ok false (and the offending residual returned) when impossible
Expr reexpress(const Expr& e, const WDict& dict, bool* ok);
TDOperator reexpress(const TDOperator& A, const WDict& dict, bool* ok);
// inverse substitution W-jets -> u-jet expressions
Expr unexpress(const Expr& e, const WDict& dict);

// box = (l_w^{(m)})*: adjoint linearization of the integrals with respect to
// the momenta, re-expressed in u-jets; optional right diagonal rescaling of
// the columns (the hand normalizations applied to printed operators)
TDOperator square_operator(const std::vector<Expr>& w, const LagrangianModel& model,
                           const std::vector<Rat>& col_rescale = {});

// phi = box(delta H / delta W) with H a density in the W-jets
Section noether_symmetry(const TDOperator& square, const Expr& H_in_w, const WDict& dict,
                         const LagrangianModel& model);

// A_k = box* o (l_m^{(u)})* o box (u-jet coefficients; re-express separately)
TDOperator hamiltonian_Ak(const TDOperator& square, const LagrangianModel& model);

// {{,}}_box = dogma bracket of A_k in W-jets, cross-checked against the
// defining identity for box reduced on the system
struct SquareBracketResult {
  bool ok = false;
  BracketTable table;       // coefficients in W-jets
  Section residual;         // cross-check residual (zero on success)
  std::string message;
};
// square/Ak must be the natural pair square = (l_w^(m))*, Ak = hamiltonian_Ak;
// a nonempty col_rescale C transforms the result to the table of square o
// diag(C) (entry (k,i,j) scales by c_i c_j / c_k) and certifies against the
// rescaled operator
SquareBracketResult square_bracket(const TDOperator& square, const TDOperator& Ak_in_u,
                                   const WDict& dict, const LagrangianModel& model,
                                   const std::vector<Rat>& col_rescale = {},
                                   bool probabilistic = false, int trials = 20,
                                   uint64_t seed = 0);

// classification of l_w o box_column: every coefficient must be a function
// of (x, W-jets)
struct OpEqResult {
  bool ok = false;
  TDOperator rhs;   // the operator with W-jet coefficients
  Expr offending;   // first coefficient that failed re-expression
  std::string message;
};
OpEqResult op_eq_residual(const Expr& w_scalar, const TDOperator& box_column,
                          const WDict& dict, const LagrangianModel& model);

}  // namespace jetfrob
