#include "jetfrob/solver.hpp"

#include <algorithm>
#include <stdexcept>

namespace jetfrob {

Rat WeightSystem::sym_weight(SymId s) const {
  auto it = sym_w.find(s);
  if (it != sym_w.end()) return it->second;
  const SymbolInfo& si = u->info(s);
  switch (si.kind) {
    case SymKind::Independent:
      return si.idx == 0 ? -dx : Rat(0);
    case SymKind::Jet: {
      auto d = dep_w.find(si.idx);
      Rat base = d == dep_w.end() ? Rat(0) : d->second;
      return base + Rat(si.order) * dx;
    }
    case SymKind::Parameter:
      return Rat(0);
    case SymKind::Atom:
      return Rat(0);
  }
  return Rat(0);
}

Rat WeightSystem::mono_weight(const Monomial& m) const {
  Rat w(0);
  for (auto& [s, e] : m.e) w += sym_weight(s) * Rat(e);
  return w;
}

std::optional<Rat> WeightSystem::weight(const Expr& e) const {
  std::optional<Rat> w;
  auto scan = [&](const Poly& p, int sign) -> bool {
    for (auto& [m, c] : p.terms()) {
      Rat mw = mono_weight(m) * sign;
      if (!w)
        w = mw + (sign < 0 ? Rat(0) : Rat(0));
      else if (*w != mw)
        return false;
    }
    return true;
  };
  // weight(num/den) is well defined when both parts are homogeneous
  std::optional<Rat> wn, wd;
  for (auto& [m, c] : e.num().terms()) {
    Rat mw = mono_weight(m);
    if (!wn)
      wn = mw;
    else if (*wn != mw)
      return std::nullopt;
  }
  for (auto& [m, c] : e.den().terms()) {
    Rat mw = mono_weight(m);
    if (!wd)
      wd = mw;
    else if (*wd != mw)
      return std::nullopt;
  }
  (void)scan;
  if (!wn) return Rat(0);  // zero expression
  return *wn - *wd;
}

SymId fresh_unknown(Universe* u) {
  static const char* kPrefix = "@c";
  int n = u->n_parameters();
  // parameter names are globally unique; probe forward from the count
  for (int k = n;; ++k) {
    std::string name = std::string(kPrefix) + std::to_string(k);
    if (u->lookup(name) == kNoSym) return u->parameter_sym(u->add_parameter(name));
  }
}

namespace {

struct Gen {
  SymId s;
  Rat w;  // weight (0 when no weight system)
};

void enumerate(Universe* u, const PoolSpec& spec, const std::vector<Gen>& gens, size_t i,
               Monomial cur, int deg_left, int x_left, int atom_left, const Rat& wcur,
               std::vector<Monomial>& out) {
  if (i == gens.size()) {
    if (!spec.weights || wcur == spec.target_weight) {
      if (!cur.is_one() || spec.include_constant) out.push_back(cur);
    }
    return;
  }
  const Gen& g = gens[i];
  const SymbolInfo& si = u->info(g.s);
  int cap = deg_left;
  if (si.kind == SymKind::Independent) cap = std::min(cap, x_left);
  if (si.kind == SymKind::Atom) cap = std::min(cap, atom_left);
  for (int e = 0; e <= cap; ++e) {
    Monomial m = cur;
    if (e > 0) {
      Monomial f;
      f.e = {{g.s, e}};
      m = mono_mul(m, f);
    }
    enumerate(u, spec, gens, i + 1, m, deg_left - e,
              si.kind == SymKind::Independent ? x_left - e : x_left,
              si.kind == SymKind::Atom ? atom_left - e : atom_left, wcur + g.w * Rat(e), out);
  }
}

}  // namespace

std::vector<Expr> make_pool(Universe* u, const PoolSpec& spec) {
  std::vector<Gen> gens;
  auto wof = [&](SymId s) { return spec.weights ? spec.weights->sym_weight(s) : Rat(0); };
  if (spec.max_x_degree > 0) {
    SymId xs = u->independent_sym(spec.x_index);
    gens.push_back({xs, wof(xs)});
  }
  for (int d : spec.deps)
    for (int k = 0; k <= spec.max_jet_order; ++k) {
      std::vector<int> sigma(u->n_independents(), 0);
      sigma[spec.x_index] = k;
      SymId s = u->jet(d, sigma);
      gens.push_back({s, wof(s)});
    }
  for (int a : spec.atoms) {
    SymId s = u->atom_sym(a);
    gens.push_back({s, wof(s)});
  }
  // weighted parameters (e.g. eps) join the pool as genuine generators
  if (spec.weights)
    for (auto& [s, w] : spec.weights->sym_w)
      if (u->info(s).kind == SymKind::Parameter && w != 0) gens.push_back({s, w});

  std::vector<Expr> out;
  // denominator combinations: exponent vector over blocks, total <= cap
  std::vector<std::pair<Expr, Rat>> dens;  // (denominator expr, its weight)
  {
    std::vector<int> exps(spec.denom_blocks.size(), 0);
    std::function<void(size_t, int)> rec = [&](size_t i, int left) {
      if (i == spec.denom_blocks.size()) {
        Expr d(u, Rat(1));
        Rat w(0);
        for (size_t b = 0; b < exps.size(); ++b)
          if (exps[b] > 0) {
            d = d * spec.denom_blocks[b].pow(exps[b]);
            if (spec.weights) {
              auto bw = spec.weights->weight(spec.denom_blocks[b]);
              if (!bw) throw std::runtime_error("make_pool: inhomogeneous denominator block");
              w += *bw * Rat(exps[b]);
            }
          }
        dens.push_back({d, w});
        return;
      }
      for (int e = 0; e <= left; ++e) {
        exps[i] = e;
        rec(i + 1, left - e);
      }
      exps[i] = 0;
    };
    rec(0, spec.max_denom_power);
  }

  for (auto& [den, dw] : dens) {
    std::vector<Monomial> monos;
    PoolSpec s2 = spec;
    if (spec.weights) s2.target_weight = spec.target_weight + dw;
    enumerate(u, s2, gens, 0, Monomial{}, spec.max_total_degree, spec.max_x_degree,
              spec.max_atom_degree, Rat(0), monos);
    std::sort(monos.begin(), monos.end(),
              [&](const Monomial& a, const Monomial& b) { return mono_less(*u, a, b); });
    for (auto& m : monos) {
      Expr num = Expr::from_poly(Poly(u, Rat(1)).mul_term(m, Rat(1)));
      out.push_back(den.is_constant() && den.num().is_one() ? num : num / den);
    }
  }
  // drop duplicates introduced by block exponent patterns reducing to 1
  std::vector<Expr> uniq;
  for (auto& e : out) {
    bool dup = false;
    for (auto& f : uniq)
      if (f.num() == e.num() && f.den() == e.den()) {
        dup = true;
        break;
      }
    if (!dup) uniq.push_back(e);
  }
  return uniq;
}

namespace {

// one linear equation: sum coeff[unknown]*c + rhs = 0, entries in the
// parameter field
struct Row {
  std::map<int, Expr> a;  // unknown index -> coefficient
  Expr rhs;
};

}  // namespace

LinearSolution solve_linear(const std::vector<Expr>& residuals,
                            const std::vector<SymId>& unknowns) {
  if (residuals.empty() || unknowns.empty()) {
    LinearSolution out;
    out.ok = true;
    for (SymId s : unknowns) out.assign[s] = Expr();
    for (auto& r : residuals)
      if (!r.is_zero()) {
        out.ok = false;
        out.conditions.push_back(Expr::from_poly(r.num()));
      }
    return out;
  }
  Universe* u = residuals[0].universe();
  std::map<SymId, int> uidx;
  for (int i = 0; i < (int)unknowns.size(); ++i) uidx[unknowns[i]] = i;

  // rows keyed by the monomial in non-parameter symbols
  std::map<std::vector<std::pair<SymId, int>>, Row> rows;
  for (auto& r : residuals) {
    for (SymId s : r.den().support())
      if (uidx.count(s)) throw std::runtime_error("solve_linear: unknown in a denominator");
    for (auto& [m, c] : r.num().terms()) {
      Monomial key, par;
      int unk = -1;
      for (auto& [s, e] : m.e) {
        if (uidx.count(s)) {
          if (e != 1 || unk >= 0) throw std::runtime_error("solve_linear: nonlinear in unknowns");
          unk = uidx[s];
        } else if (u->info(s).kind == SymKind::Parameter) {
          par.e.push_back({s, e});
        } else {
          key.e.push_back({s, e});
        }
      }
      Expr val = Expr::from_poly(Poly(u, Rat(1)).mul_term(par, c));
      Row& row = rows[key.e];
      if (row.rhs.universe() == nullptr) row.rhs = Expr(u);
      if (unk >= 0) {
        auto it = row.a.find(unk);
        if (it == row.a.end())
          row.a[unk] = val;
        else
          it->second = it->second + val;
      } else {
        row.rhs = row.rhs + val;
      }
    }
  }

  std::vector<Row> sys;
  for (auto& [k, row] : rows) {
    for (auto it = row.a.begin(); it != row.a.end();)
      it = it->second.is_zero() ? row.a.erase(it) : std::next(it);
    if (!row.a.empty() || !row.rhs.is_zero()) sys.push_back(std::move(row));
  }

  LinearSolution out;
  // Gauss-Jordan; pivot preference: constant entries, then parameter-free is
  // impossible here (entries live in the parameter field), then anything
  // nonzero (recorded as a nonvanishing assumption)
  std::vector<int> pivot_of(unknowns.size(), -1);
  std::vector<bool> used(sys.size(), false);
  for (size_t col = 0; col < unknowns.size(); ++col) {
    int best = -1, best_rank = 3;
    for (size_t r = 0; r < sys.size(); ++r) {
      if (used[r]) continue;
      auto it = sys[r].a.find((int)col);
      if (it == sys[r].a.end()) continue;
      int rank = it->second.is_constant() ? 0 : 1;
      if (rank < best_rank) {
        best = (int)r;
        best_rank = rank;
        if (rank == 0) break;
      }
    }
    if (best < 0) continue;
    used[best] = true;
    pivot_of[col] = best;
    Expr p = sys[best].a[(int)col];
    if (!p.is_constant()) out.assumptions.push_back(Expr::from_poly(p.num()));
    for (size_t r = 0; r < sys.size(); ++r) {
      if ((int)r == best) continue;
      auto it = sys[r].a.find((int)col);
      if (it == sys[r].a.end()) continue;
      Expr f = it->second / p;
      sys[r].a.erase(it);
      for (auto& [cc, v] : sys[best].a) {
        if (cc == (int)col) continue;
        auto jt = sys[r].a.find(cc);
        Expr nv = (jt == sys[r].a.end() ? Expr(u) : jt->second) - f * v;
        if (nv.is_zero())
          sys[r].a.erase(cc);
        else
          sys[r].a[cc] = nv;
      }
      sys[r].rhs = sys[r].rhs - f * sys[best].rhs;
    }
  }

  // inconsistent rows: no unknowns left but nonzero rhs
  for (size_t r = 0; r < sys.size(); ++r)
    if (!used[r] && sys[r].a.empty() && !sys[r].rhs.is_zero())
      out.conditions.push_back(Expr::from_poly(sys[r].rhs.num()));
  if (!out.conditions.empty()) {
    out.ok = false;
    return out;
  }

  // back-read: free unknowns are zero, pivot unknowns from their row
  std::map<int, Expr> val;
  for (size_t col = 0; col < unknowns.size(); ++col)
    if (pivot_of[col] < 0) val[(int)col] = Expr(u);
  for (size_t col = 0; col < unknowns.size(); ++col) {
    if (pivot_of[col] < 0) continue;
    Row& row = sys[pivot_of[col]];
    Expr acc = -row.rhs;
    for (auto& [cc, v] : row.a) {
      if (cc == (int)col) continue;
      // after Gauss-Jordan only free columns remain, all set to zero
      auto it = val.find(cc);
      if (it != val.end() && !it->second.is_zero()) acc = acc - v * it->second;
    }
    val[(int)col] = acc / row.a[(int)col];
  }
  out.ok = true;
  for (size_t col = 0; col < unknowns.size(); ++col) out.assign[unknowns[col]] = val[(int)col];
  return out;
}

OperatorSolution solve_operator_linear(const TDOperator& A, const std::vector<Expr>& v,
                                       const PoolSpec& spec, const SystemModel* sys) {
  Universe* u = A.universe();
  OperatorSolution out;
  // fast path: zero-order square invertible operator
  if (A.zero_order() && A.rows() == A.cols()) {
    try {
      out.chi = invert_local(A).apply(v);
      if (sys)
        for (auto& c : out.chi) c = sys->reduce(c);
      out.ok = true;
      return out;
    } catch (const std::exception&) {
      // fall through to coefficient matching
    }
  }
  std::vector<Expr> pool = make_pool(u, spec);
  if (pool.empty()) throw std::runtime_error("solve_operator_linear: empty ansatz pool");
  std::vector<SymId> unknowns;
  std::vector<Expr> chi(A.cols(), Expr(u));
  for (int c = 0; c < A.cols(); ++c)
    for (auto& b : pool) {
      SymId s = fresh_unknown(u);
      unknowns.push_back(s);
      chi[c] = chi[c] + Expr(u, s) * b;
    }
  std::vector<Expr> res = A.apply(chi);
  for (int i = 0; i < A.rows(); ++i) {
    res[i] = res[i] - v[i];
    if (sys) res[i] = sys->reduce(res[i]);
  }
  LinearSolution ls = solve_linear(res, unknowns);
  out.conditions = ls.conditions;
  out.assumptions = ls.assumptions;
  if (!ls.ok) return out;
  out.ok = true;
  out.chi.assign(A.cols(), Expr(u));
  int idx = 0;
  for (int c = 0; c < A.cols(); ++c)
    for (auto& b : pool) out.chi[c] = out.chi[c] + ls.assign[unknowns[idx++]] * b;
  return out;
}

}  // namespace jetfrob
