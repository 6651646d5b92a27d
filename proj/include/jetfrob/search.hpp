/*
 * search.hpp
 * ----------
 * Bounded undetermined-coefficients classification of weight-homogeneous
 * operators with certified brackets.  An ansatz collects every operator term
 * of a prescribed weight with fresh parameter coefficients; classify runs the
 * bracket reconstruction with the parameters symbolic and branches on the
 * linear factors of the consistency conditions, emitting each parameter
 * stratum on which the certification succeeds.
 */
#pragma once

#include <string>

#include "jetfrob/bracket.hpp"
#include "jetfrob/solver.hpp"

namespace jetfrob {

struct AnsatzResult {
  TDOperator op;
  std::vector<SymId> params;  // fresh coefficient parameters, one per term
};

// every term c * monomial(u-jets) * Dx^k of exactly the target weight, for a
// rows x cols operator over the ordinary dependents; max_degree caps the
// monomial degree (jet order is implied by the weights)
AnsatzResult ansatz(Universe* u, const WeightSystem& weights, const Rat& target, int rows,
                    int cols, int maxord, int max_degree = 4);

struct SearchStratum {
  std::vector<std::string> conditions;  // constraints applied, innermost last
  TDOperator op;                        // ansatz after the substitutions
  BracketTable table;
  std::string status;  // "certified" | "unresolved" | "degenerate"
  std::vector<Expr> pending;            // unresolved conditions, if any
};

struct SearchCaps {
  ReconCaps recon;
  int max_depth = -1;  // -1: number of parameters plus two
  // when set, reconstruction pools are restricted to weight-homogeneous
  // coefficients; essential for keeping parametric solves small
  const WeightSystem* weights = nullptr;
};

// branch-and-certify over the parameter space; deterministic output, ordered
// by the substitution signature, deduplicated
std::vector<SearchStratum> classify(const TDOperator& A, const std::vector<SymId>& params,
                                    SearchCaps caps = {}, const SystemModel* sys = nullptr);

// linear (degree-1) factors of a parameter polynomial: monomial content
// first, then gcd-splitting on each parameter of degree one.  *complete is
// false when a non-linear factor remains.
std::vector<Expr> linear_factors(const Expr& cond, bool* complete);

std::string render_strata(const std::vector<SearchStratum>& strata, bool tensor_style);

}  // namespace jetfrob
