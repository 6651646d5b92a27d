/*
 * dsl.hpp
 * -------
 * Line-oriented problem files: symbol declarations, a system of equations,
 * named operators and sections, integrals, and a weight table.  `#` starts a
 * comment; a line beginning with a section keyword opens that section and the
 * following indented-or-plain lines belong to it.
 *
 *   INDEPENDENTS x y
 *   DEPENDENTS u v W:x
 *   PARAMS lam
 *   ATOMS E2 : u -> 2*E2
 *   SYSTEM hyperbolic            # or: evolution | lagrangian
 *     u_xy = E2
 *   SYSTEM lagrangian
 *     KAPPA 2 -1 ; -1 2
 *     HAMILTONIAN -E1 - E2
 *   OPERATORS
 *     square = u_x + 1/2*Dx
 *   SECTIONS
 *     phi = u_x
 *   INTEGRALS
 *     w1 = u_x^2 - u_xx
 *   WEIGHTS
 *     dx = 1
 *     u = 2
 */
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "jetfrob/liouville.hpp"
#include "jetfrob/solver.hpp"

namespace jetfrob {

struct ProblemFile {
  std::unique_ptr<Universe> universe;
  std::string system_kind;  // "", "evolution", "hyperbolic", "lagrangian"
  std::optional<SystemModel> sys;
  std::optional<LagrangianModel> lagrangian;
  std::vector<std::pair<std::string, TDOperator>> operators;
  std::vector<std::pair<std::string, Section>> sections;
  std::vector<Expr> integrals;
  std::optional<WeightSystem> weights;

  const TDOperator* find_operator(const std::string& name) const;
  const Section* find_section(const std::string& name) const;
};

// throws std::runtime_error with a "line N:" prefix on malformed input or
// unknown names
ProblemFile parse_problem(const std::string& text);
ProblemFile load_problem(const std::string& path);

}  // namespace jetfrob
