#include "jetfrob/jet.hpp"

#include <algorithm>
#include <stdexcept>

namespace jetfrob {

Section make_section(Universe* u, std::vector<int> deps, std::vector<Expr> comps) {
  (void)u;
  if (deps.size() != comps.size()) throw std::runtime_error("section: size mismatch");
  return Section{std::move(deps), std::move(comps)};
}

std::vector<int> base_deps(const Universe& u) {
  std::vector<int> out;
  for (int i = 0; i < u.n_dependents(); ++i)
    if (!u.dependent_x_only(i)) out.push_back(i);
  return out;
}

namespace {

// D_xi(symbol) as an Expr
Expr sym_total_derivative(Universe* u, SymId s, int xi) {
  const SymbolInfo& si = u->info(s);
  switch (si.kind) {
    case SymKind::Independent:
      return Expr(u, Rat(si.idx == xi ? 1 : 0));
    case SymKind::Parameter:
      return Expr(u);
    case SymKind::Jet: {
      if (u->dependent_x_only(si.idx) && xi != 0) return Expr(u);
      std::vector<int> sg = si.sigma;
      sg[xi] += 1;
      return Expr(u, u->jet(si.idx, sg));
    }
    case SymKind::Atom: {
      const AtomDef& ad = u->atom(si.idx);
      if (ad.partials.empty() && ((int)ad.base_partials.size() <= xi || !ad.base_partials[xi]))
        throw std::runtime_error("atom '" + ad.name + "' has no derivative rule for direction " +
                                 u->independent_name(xi));
      Expr acc(u);
      for (auto& [key, c] : ad.partials) {
        auto& [dep, sigma] = key;
        if (u->dependent_x_only(dep) && xi != 0) continue;
        std::vector<int> sg = sigma;
        sg[xi] += 1;
        acc = acc + *c * Expr(u, u->jet(dep, sg));
      }
      if ((int)ad.base_partials.size() > xi && ad.base_partials[xi])
        acc = acc + *ad.base_partials[xi];
      return acc;
    }
  }
  return Expr(u);
}

Expr poly_total_derivative(const Poly& p, int xi) {
  Universe* u = p.universe();
  Expr acc(u);
  for (SymId s : p.support()) {
    Poly ps = p.partial(s);
    if (ps.is_zero()) continue;
    Expr ds = sym_total_derivative(u, s, xi);
    if (ds.is_zero()) continue;
    acc = acc + Expr::from_poly(ps) * ds;
  }
  return acc;
}

}  // namespace

Expr total_derivative(const Expr& e, int xi) {
  Expr dn = poly_total_derivative(e.num(), xi);
  if (e.is_polynomial()) return dn;
  Expr dd = poly_total_derivative(e.den(), xi);
  Expr den = Expr::from_poly(e.den());
  return (dn * den - Expr::from_poly(e.num()) * dd) / (den * den);
}

Expr total_derivative_n(const Expr& e, int xi, int n) {
  Expr r = e;
  for (int k = 0; k < n; ++k) r = total_derivative(r, xi);
  return r;
}

Expr total_derivative_multi(const Expr& e, const std::vector<int>& sigma) {
  Expr r = e;
  for (int d = 0; d < (int)sigma.size(); ++d) r = total_derivative_n(r, d, sigma[d]);
  return r;
}

std::vector<std::pair<std::pair<int, std::vector<int>>, Expr>> jet_partials(
    const Expr& e, const std::vector<int>& deps) {
  Universe* u = e.universe();
  std::vector<std::pair<std::pair<int, std::vector<int>>, Expr>> out;
  auto add = [&](int dep, const std::vector<int>& sigma, const Expr& c) {
    if (c.is_zero()) return;
    for (auto& [k, v] : out)
      if (k.first == dep && k.second == sigma) {
        v = v + c;
        return;
      }
    out.push_back({{dep, sigma}, c});
  };
  for (SymId s : e.support()) {
    const SymbolInfo& si = u->info(s);
    if (si.kind == SymKind::Jet) {
      if (std::find(deps.begin(), deps.end(), si.idx) == deps.end()) continue;
      add(si.idx, si.sigma, e.partial(s));
    } else if (si.kind == SymKind::Atom) {
      const AtomDef& ad = u->atom(si.idx);
      bool relevant = false;
      for (auto& [key, c] : ad.partials)
        if (std::find(deps.begin(), deps.end(), key.first) != deps.end()) relevant = true;
      if (!relevant) continue;
      if (ad.partials.empty())
        throw std::runtime_error("atom '" + ad.name +
                                 "' has no evolutionary rule (no declared partials)");
      Expr pa = e.partial(s);
      if (pa.is_zero()) continue;
      for (auto& [key, c] : ad.partials) {
        if (std::find(deps.begin(), deps.end(), key.first) == deps.end()) continue;
        add(key.first, key.second, pa * *c);
      }
    }
  }
  return out;
}

Expr evolutionary(const Section& phi, const Expr& e) {
  Universe* u = e.universe();
  Expr acc(u);
  for (auto& [key, coeff] : jet_partials(e, phi.deps)) {
    auto& [dep, sigma] = key;
    int ci = -1;
    for (int i = 0; i < phi.size(); ++i)
      if (phi.deps[i] == dep) ci = i;
    if (ci < 0) continue;
    acc = acc + total_derivative_multi(phi.comps[ci], sigma) * coeff;
  }
  return acc;
}

Section evolutionary(const Section& phi, const Section& e) {
  Section r = e;
  for (auto& c : r.comps) c = evolutionary(phi, c);
  return r;
}

Section commutator(const Section& phi1, const Section& phi2) {
  if (phi1.deps != phi2.deps) throw std::runtime_error("commutator: bundle mismatch");
  Section r = phi2;
  for (int i = 0; i < r.size(); ++i)
    r.comps[i] = evolutionary(phi1, phi2.comps[i]) - evolutionary(phi2, phi1.comps[i]);
  return r;
}

Section euler(const Density& h, const std::vector<int>& deps) {
  Universe* u = h.value.universe();
  Section r;
  r.deps = deps;
  for (int dep : deps) {
    Expr acc(u);
    for (auto& [key, coeff] : jet_partials(h.value, {dep})) {
      auto& [d, sigma] = key;
      int n = sigma[0];
      for (size_t k = 1; k < sigma.size(); ++k)
        if (sigma[k] != 0)
          throw std::runtime_error("euler: density depends on non-x jets");
      Expr t = total_derivative_n(coeff, 0, n);
      acc = (n % 2 == 0) ? acc + t : acc - t;
    }
    r.comps.push_back(acc);
  }
  return r;
}

}  // namespace jetfrob
