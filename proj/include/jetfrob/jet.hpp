/*
 * jet.hpp
 * -------
 * Differential-geometric primitives on the infinite jet space: total
 * derivatives D_x, evolutionary derivations E_phi, formal jet partials with
 * atom chain rule, linearizations (declared in tdop.hpp), commutators of
 * generating sections, and the Euler variational derivative in the active
 * direction x.
 */
#pragma once

#include <vector>

#include "jetfrob/expr.hpp"

namespace jetfrob {

// a section of (a sub-bundle of) the fibre: component i is attached to
// dependent variable deps[i]
struct Section {
  std::vector<int> deps;    // dependent indices of the bundle
  std::vector<Expr> comps;  // parallel to deps
  int size() const { return (int)comps.size(); }
};

Section make_section(Universe* u, std::vector<int> deps, std::vector<Expr> comps);
// section over all non-x_only dependents
std::vector<int> base_deps(const Universe& u);

struct Density {
  Expr value;
  int direction = 0;  // index of the independent variable whose volume it multiplies
};

// total derivative D_xi; expands atoms through their declared partials and
// throws if an atom has no rule contribution for that direction
Expr total_derivative(const Expr& e, int xi);
Expr total_derivative_n(const Expr& e, int xi, int n);
// D_sigma = product over directions
Expr total_derivative_multi(const Expr& e, const std::vector<int>& sigma);

// formal partials d e / d u^dep_sigma including the chain rule through atoms;
// returned as a list of ((dep, sigma), coefficient)
std::vector<std::pair<std::pair<int, std::vector<int>>, Expr>> jet_partials(
    const Expr& e, const std::vector<int>& deps);

// evolutionary derivation E_phi(e) = sum D_sigma(phi^i) de/du^i_sigma
Expr evolutionary(const Section& phi, const Expr& e);
Section evolutionary(const Section& phi, const Section& e);

// [phi1, phi2] = E_phi1(phi2) - E_phi2(phi1)
Section commutator(const Section& phi1, const Section& phi2);

// Euler variational derivative in the x-direction, component per dependent in
// `deps`: sum_sigma (-1)^{|sigma|} D_sigma (dh/du^i_sigma)
Section euler(const Density& h, const std::vector<int>& deps);

}  // namespace jetfrob
