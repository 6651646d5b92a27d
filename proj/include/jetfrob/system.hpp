/*
 * system.hpp
 * ----------
 * Differential equations as confluent rewrite tables on the jet space.
 * Evolution systems u_t = f[u] rewrite every t-jet; hyperbolic systems
 * u_xy = F(u, u_x, u_y) rewrite every mixed jet.  Replacements are computed
 * lazily by prolongation and cached, so the (infinite) table is materialized
 * only where expressions actually touch it.
 */
#pragma once

#include <map>

#include "jetfrob/jet.hpp"

namespace jetfrob {

class SystemModel {
 public:
  enum class Kind { Evolution, Hyperbolic };

  // u^i_t = f^i[x-jets], t being independent index t_dir
  static SystemModel evolution(std::vector<int> deps, std::vector<Expr> f, int x_dir = 0,
                               int t_dir = 1);
  // u^i_xy = F^i(u, u_x, u_y; atoms)
  static SystemModel hyperbolic(std::vector<int> deps, std::vector<Expr> F, int x_dir = 0,
                                int y_dir = 1);

  Kind kind() const { return kind_; }
  Universe* universe() const { return u_; }
  const std::vector<int>& deps() const { return deps_; }
  const std::vector<Expr>& rhs() const { return rhs_; }
  int x_dir() const { return x_; }
  int other_dir() const { return o_; }  // t for evolution, y for hyperbolic

  // normal form: no forbidden jets remain; idempotent
  Expr reduce(const Expr& e) const;
  Section reduce(const Section& s) const;

  // hyperbolic only: reduce(D_dir(w)) == 0
  bool is_integral(const Expr& w, int dir) const;
  bool is_integral_probabilistic(const Expr& w, int dir, int trials = 20,
                                 uint64_t seed = 0) const;

  // evolution: reduce(D_t(phi) - E_phi(f)) == 0;
  // hyperbolic: reduce(D_x D_y(phi) - E_phi(F)) == 0
  bool is_symmetry(const Section& phi) const;

 private:
  bool forbidden(SymId s, int* which_dep) const;
  const Expr& replacement(SymId s) const;

  Kind kind_ = Kind::Evolution;
  Universe* u_ = nullptr;
  std::vector<int> deps_;
  std::vector<Expr> rhs_;
  int x_ = 0, o_ = 1;
  mutable std::map<SymId, Expr> cache_;
};

}  // namespace jetfrob
