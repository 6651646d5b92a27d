/*
 * universe.hpp
 * ------------
 * The symbol universe: independent (base) variables, dependent variables with
 * their jet coordinates u^i_sigma, parameters (constants under all total
 * derivatives), and declared transcendental atoms (exp/sqrt terms with closed
 * derivative rules).
 *
 * Symbols are interned on demand and identified by a dense integer id.  The
 * canonical order used for monomial comparison is
 *   independents < jets ordered by (dependent, |sigma|, sigma lex) < parameters < atoms,
 * all within-kind breaks by declaration order.  Interning is append-only, so a
 * universe may be extended (covering variables, auxiliary parameters) without
 * invalidating existing expressions.
 */
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace jetfrob {

class Expr;
class Universe;

using SymId = int32_t;
constexpr SymId kNoSym = -1;

enum class SymKind : uint8_t { Independent, Jet, Parameter, Atom };

// A declared transcendental generator.  Its dependence on the jet coordinates
// is given by formal partial derivatives (Exprs over the same universe); both
// total-derivative rules and the evolutionary rule are derived from them:
//   D_xi(atom) = dx_dep[xi] + sum c_{i,sigma} * u^i_{sigma+1_xi}
//   E_phi(atom) = sum c_{i,sigma} * D_sigma(phi^i)
// Atoms without partials behave as pure constants under D and are rejected by
// evolutionary differentiation.
struct AtomDef {
  std::string name;
  // (dep index, sigma) -> coefficient Expr (formal partial); filled after the
  // atom symbol exists, via Universe::set_atom_partial.
  std::vector<std::pair<std::pair<int, std::vector<int>>, std::shared_ptr<Expr>>> partials;
  // optional explicit dependence on base variables: per-independent Expr
  std::vector<std::shared_ptr<Expr>> base_partials;
};

struct SymbolInfo {
  SymKind kind;
  std::string name;        // canonical print name
  int idx = 0;             // independent/dependent/parameter/atom index
  std::vector<int> sigma;  // jets only: derivative counts per independent
  int order = 0;           // |sigma|
};

class Universe {
 public:
  int add_independent(const std::string& name);
  // x_only: jets in directions other than the first independent are identically
  // zero symbols are never created in those directions D returns 0 (covering
  // variables p,q of the l-covering).
  int add_dependent(const std::string& name, bool x_only = false);
  int add_parameter(const std::string& name);
  int add_atom(const std::string& name);

  void set_atom_partial(int atom_idx, int dep, std::vector<int> sigma, const Expr& coeff);
  void set_atom_base_partial(int atom_idx, int ind, const Expr& coeff);

  int n_independents() const { return (int)independents_.size(); }
  int n_dependents() const { return (int)dependents_.size(); }
  int n_parameters() const { return (int)parameters_.size(); }
  int n_atoms() const { return (int)atoms_.size(); }

  const std::string& independent_name(int i) const { return independents_[i]; }
  const std::string& dependent_name(int i) const { return dependents_[i]; }
  bool dependent_x_only(int i) const { return dep_x_only_[i]; }

  SymId independent_sym(int i) const { return ind_syms_[i]; }
  SymId parameter_sym(int i) const { return par_syms_[i]; }
  SymId atom_sym(int i) const { return atom_syms_[i]; }
  // interned jet symbol u^dep_sigma (sigma sized to n_independents, all >= 0)
  SymId jet(int dep, const std::vector<int>& sigma);
  SymId jet0(int dep) { return jet(dep, std::vector<int>(n_independents(), 0)); }

  const SymbolInfo& info(SymId s) const { return table_[s]; }
  int n_symbols() const { return (int)table_.size(); }

  const AtomDef& atom(int i) const { return atoms_[i]; }

  // canonical order for monomials (see file comment)
  bool sym_less(SymId a, SymId b) const;

  // name lookup: declared symbols and jet grammar "u_xxy"
  SymId lookup(const std::string& name);
  int find_independent(const std::string& name) const;
  int find_dependent(const std::string& name) const;

 private:
  SymId intern(SymbolInfo si);
  std::vector<std::string> independents_, dependents_, parameters_;
  std::vector<bool> dep_x_only_;
  std::vector<AtomDef> atoms_;
  std::vector<SymId> ind_syms_, par_syms_, atom_syms_;
  std::vector<SymbolInfo> table_;
  std::map<std::pair<int, std::vector<int>>, SymId> jet_cache_;
  std::map<std::string, SymId> by_name_;
};

using UniversePtr = std::shared_ptr<Universe>;

}  // namespace jetfrob
