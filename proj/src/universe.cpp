#include "jetfrob/universe.hpp"

#include <algorithm>
#include <stdexcept>

#include "jetfrob/expr.hpp"

namespace jetfrob {

SymId Universe::intern(SymbolInfo si) {
  SymId id = (SymId)table_.size();
  table_.push_back(std::move(si));
  return id;
}

int Universe::add_independent(const std::string& name) {
  if (by_name_.count(name)) throw std::runtime_error("duplicate symbol name: " + name);
  int idx = (int)independents_.size();
  independents_.push_back(name);
  SymId s = intern({SymKind::Independent, name, idx, {}, 0});
  ind_syms_.push_back(s);
  by_name_[name] = s;
  return idx;
}

int Universe::add_dependent(const std::string& name, bool x_only) {
  if (by_name_.count(name)) throw std::runtime_error("duplicate symbol name: " + name);
  int idx = (int)dependents_.size();
  dependents_.push_back(name);
  dep_x_only_.push_back(x_only);
  // the order-0 jet carries the bare name
  by_name_[name] = jet(idx, std::vector<int>(std::max(1, n_independents()), 0));
  return idx;
}

int Universe::add_parameter(const std::string& name) {
  if (by_name_.count(name)) throw std::runtime_error("duplicate symbol name: " + name);
  int idx = (int)parameters_.size();
  parameters_.push_back(name);
  SymId s = intern({SymKind::Parameter, name, idx, {}, 0});
  par_syms_.push_back(s);
  by_name_[name] = s;
  return idx;
}

int Universe::add_atom(const std::string& name) {
  if (by_name_.count(name)) throw std::runtime_error("duplicate symbol name: " + name);
  int idx = (int)atoms_.size();
  atoms_.push_back(AtomDef{name, {}, {}});
  SymId s = intern({SymKind::Atom, name, idx, {}, 0});
  atom_syms_.push_back(s);
  by_name_[name] = s;
  return idx;
}

void Universe::set_atom_partial(int atom_idx, int dep, std::vector<int> sigma, const Expr& coeff) {
  atoms_[atom_idx].partials.push_back(
      {{dep, std::move(sigma)}, std::make_shared<Expr>(coeff)});
}

void Universe::set_atom_base_partial(int atom_idx, int ind, const Expr& coeff) {
  auto& bp = atoms_[atom_idx].base_partials;
  if ((int)bp.size() <= ind) bp.resize(ind + 1);
  bp[ind] = std::make_shared<Expr>(coeff);
}

SymId Universe::jet(int dep, const std::vector<int>& sigma) {
  std::vector<int> sg = sigma;
  sg.resize(n_independents(), 0);
  auto key = std::make_pair(dep, sg);
  auto it = jet_cache_.find(key);
  if (it != jet_cache_.end()) return it->second;
  int order = 0;
  for (int k : sg) {
    if (k < 0) throw std::runtime_error("negative multi-index");
    order += k;
  }
  std::string nm = dependents_[dep];
  if (order > 0) {
    nm += "_";
    for (int i = 0; i < (int)sg.size(); ++i)
      for (int k = 0; k < sg[i]; ++k) nm += independents_[i];
  }
  SymId s = intern({SymKind::Jet, nm, dep, sg, order});
  jet_cache_[key] = s;
  return s;
}

bool Universe::sym_less(SymId a, SymId b) const {
  const SymbolInfo& A = table_[a];
  const SymbolInfo& B = table_[b];
  auto rank = [](SymKind k) {
    switch (k) {
      case SymKind::Independent: return 0;
      case SymKind::Jet: return 1;
      case SymKind::Parameter: return 2;
      case SymKind::Atom: return 3;
    }
    return 4;
  };
  if (rank(A.kind) != rank(B.kind)) return rank(A.kind) < rank(B.kind);
  if (A.kind == SymKind::Jet) {
    if (A.idx != B.idx) return A.idx < B.idx;
    if (A.order != B.order) return A.order < B.order;
    return A.sigma < B.sigma;
  }
  return A.idx < B.idx;
}

int Universe::find_independent(const std::string& name) const {
  for (int i = 0; i < (int)independents_.size(); ++i)
    if (independents_[i] == name) return i;
  return -1;
}

int Universe::find_dependent(const std::string& name) const {
  for (int i = 0; i < (int)dependents_.size(); ++i)
    if (dependents_[i] == name) return i;
  return -1;
}

SymId Universe::lookup(const std::string& name) {
  auto it = by_name_.find(name);
  if (it != by_name_.end()) return it->second;
  // jet grammar: <dependent>_<suffix of single-letter independents>
  auto pos = name.rfind('_');
  if (pos != std::string::npos && pos > 0 && pos + 1 < name.size()) {
    int dep = find_dependent(name.substr(0, pos));
    if (dep >= 0) {
      std::vector<int> sigma(n_independents(), 0);
      bool ok = true;
      for (char c : name.substr(pos + 1)) {
        int ind = find_independent(std::string(1, c));
        if (ind < 0) { ok = false; break; }
        sigma[ind]++;
      }
      if (ok) return jet(dep, sigma);
    }
  }
  return kNoSym;
}

}  // namespace jetfrob
