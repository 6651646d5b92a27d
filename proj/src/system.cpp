#include "jetfrob/system.hpp"

#include <algorithm>
#include <stdexcept>

namespace jetfrob {

SystemModel SystemModel::evolution(std::vector<int> deps, std::vector<Expr> f, int x_dir,
                                   int t_dir) {
  SystemModel s;
  s.kind_ = Kind::Evolution;
  s.u_ = f.at(0).universe();
  s.deps_ = std::move(deps);
  s.rhs_ = std::move(f);
  s.x_ = x_dir;
  s.o_ = t_dir;
  return s;
}

SystemModel SystemModel::hyperbolic(std::vector<int> deps, std::vector<Expr> F, int x_dir,
                                    int y_dir) {
  SystemModel s;
  s.kind_ = Kind::Hyperbolic;
  s.u_ = F.at(0).universe();
  s.deps_ = std::move(deps);
  s.rhs_ = std::move(F);
  s.x_ = x_dir;
  s.o_ = y_dir;
  return s;
}

bool SystemModel::forbidden(SymId s, int* which_dep) const {
  const SymbolInfo& si = u_->info(s);
  if (si.kind != SymKind::Jet) return false;
  auto it = std::find(deps_.begin(), deps_.end(), si.idx);
  if (it == deps_.end()) return false;
  bool bad = (kind_ == Kind::Evolution) ? si.sigma[o_] > 0
                                        : si.sigma[x_] > 0 && si.sigma[o_] > 0;
  if (bad && which_dep) *which_dep = (int)(it - deps_.begin());
  return bad;
}

const Expr& SystemModel::replacement(SymId s) const {
  auto it = cache_.find(s);
  if (it != cache_.end()) return it->second;
  const SymbolInfo& si = u_->info(s);
  int wd = -1;
  forbidden(s, &wd);
  std::vector<int> sigma = si.sigma;
  sigma[o_] -= 1;
  if (kind_ == Kind::Hyperbolic) sigma[x_] -= 1;
  // prolong the right-hand side, then reduce the lower-order jets it creates
  Expr rep = reduce(total_derivative_multi(rhs_[wd], sigma));
  return cache_.emplace(s, std::move(rep)).first->second;
}

Expr SystemModel::reduce(const Expr& e) const {
  Expr cur = e;
  for (int guard = 0; guard < 1000; ++guard) {
    std::map<SymId, const Expr*> repl;
    for (SymId s : cur.support())
      if (forbidden(s, nullptr)) repl[s] = &replacement(s);
    if (repl.empty()) return cur;
    cur = cur.substitute([&](SymId s) -> const Expr* {
      auto it = repl.find(s);
      return it == repl.end() ? nullptr : it->second;
    });
  }
  throw std::runtime_error("reduce: rewrite did not reach a fixpoint");
}

Section SystemModel::reduce(const Section& s) const {
  Section r = s;
  for (auto& c : r.comps) c = reduce(c);
  return r;
}

bool SystemModel::is_integral(const Expr& w, int dir) const {
  if (kind_ != Kind::Hyperbolic) throw std::runtime_error("is_integral: hyperbolic systems only");
  return reduce(total_derivative(w, dir)).is_zero();
}

bool SystemModel::is_integral_probabilistic(const Expr& w, int dir, int trials,
                                            uint64_t seed) const {
  if (kind_ != Kind::Hyperbolic) throw std::runtime_error("is_integral: hyperbolic systems only");
  return reduce(total_derivative(w, dir)).is_zero_probabilistic(trials, seed);
}

bool SystemModel::is_symmetry(const Section& phi) const {
  for (int i = 0; i < (int)deps_.size(); ++i) {
    int ci = -1;
    for (int j = 0; j < phi.size(); ++j)
      if (phi.deps[j] == deps_[i]) ci = j;
    if (ci < 0) throw std::runtime_error("is_symmetry: section misses a system component");
    Expr lhs = (kind_ == Kind::Evolution)
                   ? total_derivative(phi.comps[ci], o_)
                   : total_derivative(total_derivative(phi.comps[ci], o_), x_);
    Expr res = reduce(lhs - evolutionary(phi, rhs_[i]));
    if (!res.is_zero()) return false;
  }
  return true;
}

}  // namespace jetfrob
