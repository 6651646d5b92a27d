#include "jetfrob/bracket.hpp"

#include <algorithm>
#include <sstream>
#include <set>
#include <stdexcept>

namespace jetfrob {

namespace {

// dependents that are genuine equation unknowns: not covering, not x_only
std::vector<int> equation_deps(Universe* u, const CoveringContext* ctx) {
  std::vector<int> out;
  for (int i = 0; i < u->n_dependents(); ++i) {
    if (u->dependent_x_only(i)) continue;
    if (ctx && ctx->is_covering_dep(i)) continue;
    out.push_back(i);
  }
  return out;
}

Section base_section(Universe* u, const CoveringContext* ctx, std::vector<Expr> comps) {
  Section s;
  s.deps = equation_deps(u, ctx);
  if (s.deps.size() != comps.size())
    throw std::runtime_error("operator rows do not match the equation dependents");
  s.comps = std::move(comps);
  return s;
}

std::string dsigma_str(Universe* u, const std::vector<int>& sigma) {
  std::string s;
  for (int d = 0; d < (int)sigma.size(); ++d) {
    if (sigma[d] == 0) continue;
    std::string nm = "D" + u->independent_name(d);
    if (!s.empty()) s += " ";
    s += nm + (sigma[d] > 1 ? "^" + std::to_string(sigma[d]) : "");
  }
  return s.empty() ? "1" : s;
}

}  // namespace

CoveringContext CoveringContext::make(Universe* u, int r, bool x_only,
                                      const std::string& pname, const std::string& qname) {
  CoveringContext ctx;
  ctx.u = u;
  ctx.r = r;
  auto mk = [&](const std::string& base, std::vector<int>& out) {
    for (int i = 0; i < r; ++i) {
      std::string nm = (r == 1) ? base : base + std::to_string(i + 1);
      int found = u->find_dependent(nm);
      if (found >= 0) {
        if (u->dependent_x_only(found) != x_only)
          throw std::runtime_error("covering name clash with different jet restriction: " + nm);
        out.push_back(found);
      } else {
        out.push_back(u->add_dependent(nm, x_only));
      }
    }
  };
  mk(pname, ctx.p);
  mk(qname, ctx.q);
  return ctx;
}

Section CoveringContext::p_section() const {
  Section s;
  s.deps = p;
  for (int d : p) s.comps.push_back(Expr(u, u->jet0(d)));
  return s;
}

Section CoveringContext::q_section() const {
  Section s;
  s.deps = q;
  for (int d : q) s.comps.push_back(Expr(u, u->jet0(d)));
  return s;
}

bool CoveringContext::is_covering_dep(int dep) const {
  return std::find(p.begin(), p.end(), dep) != p.end() ||
         std::find(q.begin(), q.end(), dep) != q.end();
}

Expr BracketTable::get(const BKey& k) const {
  auto it = c_.find(k);
  return it == c_.end() ? Expr(u_) : it->second;
}

Expr BracketTable::get_x(int k, int i, int j, int alpha, int beta) const {
  int nd = u_->n_independents();
  BKey key{k, i, j, std::vector<int>(nd, 0), std::vector<int>(nd, 0)};
  key.a[0] = alpha;
  key.b[0] = beta;
  return get(key);
}

void BracketTable::set(const BKey& k, const Expr& v) {
  if (v.is_zero())
    c_.erase(k);
  else
    c_[k] = v;
}

void BracketTable::set_x(int k, int i, int j, int alpha, int beta, const Expr& v) {
  int nd = u_->n_independents();
  BKey key{k, i, j, std::vector<int>(nd, 0), std::vector<int>(nd, 0)};
  key.a[0] = alpha;
  key.b[0] = beta;
  set(key, v);
}

void BracketTable::set_antisym(const BKey& k, const Expr& v) {
  set(k, v);
  BKey m{k.k, k.j, k.i, k.b, k.a};
  set(m, -v);
}

std::vector<Expr> BracketTable::eval(const std::vector<Expr>& p,
                                     const std::vector<Expr>& q) const {
  std::vector<Expr> out(m_, Expr(u_));
  for (auto& [k, c] : c_)
    out[k.k] = out[k.k] + c * total_derivative_multi(p.at(k.i), k.a) *
                              total_derivative_multi(q.at(k.j), k.b);
  return out;
}

bool BracketTable::antisymmetric() const {
  for (auto& [k, c] : c_) {
    BKey m{k.k, k.j, k.i, k.b, k.a};
    if (!get(m).equals(-c)) return false;
  }
  return true;
}

int BracketTable::max_arg_order() const {
  int m = 0;
  for (auto& [k, c] : c_) {
    int a = 0, b = 0;
    for (int x : k.a) a += x;
    for (int x : k.b) b += x;
    m = std::max({m, a, b});
  }
  return m;
}

BracketTable BracketTable::operator+(const BracketTable& o) const {
  BracketTable r = *this;
  for (auto& [k, c] : o.c_) r.set(k, r.get(k) + c);
  return r;
}

BracketTable BracketTable::scale(const Expr& f) const {
  return map_coeffs([&](const Expr& c) { return f * c; });
}

BracketTable BracketTable::map_coeffs(const std::function<Expr(const Expr&)>& f) const {
  BracketTable r(u_, m_, r_);
  for (auto& [k, c] : c_) r.set(k, f(c));
  return r;
}

BracketTable BracketTable::rescale_components(const std::vector<Rat>& c) const {
  BracketTable r(u_, m_, r_);
  for (auto& [k, v] : c_) {
    if (c.at(k.k) == 0) throw std::runtime_error("rescale_components: zero factor");
    r.set(k, v.mul_scalar(c.at(k.i) * c.at(k.j) / c.at(k.k)));
  }
  return r;
}

bool BracketTable::equals(const BracketTable& o) const {
  for (auto& [k, c] : c_)
    if (!o.get(k).equals(c)) return false;
  for (auto& [k, c] : o.c_)
    if (!get(k).equals(c)) return false;
  return true;
}

bool BracketTable::equals_probabilistic(const BracketTable& o, int trials, uint64_t seed) const {
  int n = 0;
  for (auto& [k, c] : c_)
    if (!o.get(k).equals_probabilistic(c, trials, seed + 131 * ++n)) return false;
  for (auto& [k, c] : o.c_)
    if (!get(k).equals_probabilistic(c, trials, seed + 131 * ++n)) return false;
  return true;
}

namespace {
std::string json_escape(const std::string& s) {
  std::string o;
  for (char ch : s) {
    if (ch == '"' || ch == '\\') o += '\\';
    o += ch;
  }
  return o;
}
std::string sigma_json(const std::vector<int>& sigma) {
  int total = 0;
  for (size_t d = 1; d < sigma.size(); ++d) total += sigma[d];
  if (total == 0) return std::to_string(sigma.empty() ? 0 : sigma[0]);
  // non-x multi-index rendered as a string of direction letters
  std::string s = "\"";
  for (size_t d = 0; d < sigma.size(); ++d)
    for (int c = 0; c < sigma[d]; ++c) s += (d == 0 ? 'x' : d == 1 ? 'y' : 't');
  return s + "\"";
}
}  // namespace

std::string BracketTable::json() const {
  std::string s = "[";
  bool first = true;
  for (auto& [k, c] : c_) {
    if (!first) s += ",";
    first = false;
    s += "{\"k\":" + std::to_string(k.k) + ",\"i\":" + std::to_string(k.i) +
         ",\"j\":" + std::to_string(k.j) + ",\"alpha\":" + sigma_json(k.a) +
         ",\"beta\":" + sigma_json(k.b) + ",\"coeff\":\"" + json_escape(c.str()) + "\"}";
  }
  return s + "]";
}

std::string BracketTable::tensor() const {
  if (c_.empty()) return "0";
  std::ostringstream os;
  bool scalar = (m_ == 1 && r_ == 1);
  int last_k = -1, last_i = -1, last_j = -1;
  bool first_term = true;
  for (auto& [k, c] : c_) {
    if (!scalar && (k.k != last_k || k.i != last_i || k.j != last_j)) {
      if (last_k >= 0) os << "\n";
      os << "[k=" << k.k << ", i=" << k.i << ", j=" << k.j << "] ";
      last_k = k.k;
      last_i = k.i;
      last_j = k.j;
      first_term = true;
    }
    std::string cs = c.str();
    std::string term;
    if (cs == "1")
      term = "";
    else if (cs == "-1")
      term = "-";
    else
      term = (cs.find_first_of("+-", 1) == std::string::npos ? cs : "(" + cs + ")") + "*";
    term += dsigma_str(u_, k.a) + " (x) " + dsigma_str(u_, k.b);
    if (first_term)
      os << term;
    else if (term[0] == '-')
      os << " - " << term.substr(1);
    else
      os << " + " << term;
    first_term = false;
  }
  return os.str();
}

BracketTable table_from_values(const std::vector<Expr>& values, const CoveringContext& ctx) {
  Universe* u = ctx.u;
  BracketTable t(u, (int)values.size(), ctx.r);
  for (int k = 0; k < (int)values.size(); ++k) {
    for (SymId ps : values[k].support()) {
      const SymbolInfo& pi = u->info(ps);
      if (pi.kind != SymKind::Jet) continue;
      auto ip = std::find(ctx.p.begin(), ctx.p.end(), pi.idx);
      if (ip == ctx.p.end()) continue;
      Expr dp = values[k].partial(ps);
      for (SymId qs : dp.support()) {
        const SymbolInfo& qi = u->info(qs);
        if (qi.kind != SymKind::Jet) continue;
        auto iq = std::find(ctx.q.begin(), ctx.q.end(), qi.idx);
        if (iq == ctx.q.end()) continue;
        BKey key{k, (int)(ip - ctx.p.begin()), (int)(iq - ctx.q.begin()), pi.sigma, qi.sigma};
        t.set(key, dp.partial(qs));
      }
    }
  }
  return t;
}

Section koszul_evolutionary_part(const TDOperator& A, const Section& p, const Section& q) {
  Section Ap = A.apply(p), Aq = A.apply(q);
  Section r = q;
  for (int i = 0; i < r.size(); ++i)
    r.comps[i] = evolutionary(Ap, q.comps[i]) - evolutionary(Aq, p.comps[i]);
  return r;
}

namespace {

// default coefficient pool derived from the operator's own coefficients
PoolSpec default_pool_for(const TDOperator& A, const CoveringContext* ctx) {
  Universe* u = A.universe();
  PoolSpec ps;
  ps.deps = equation_deps(u, ctx);
  int maxord = 0, maxdeg = 1;
  std::vector<SymId> atoms;
  std::vector<Poly> dens;
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j)
      for (auto& [k, c] : A.entry(i, j)) {
        maxord = std::max(maxord, c.max_jet_order());
        maxdeg = std::max(maxdeg, c.total_degree());
        for (SymId s : c.support())
          if (u->info(s).kind == SymKind::Atom &&
              std::find(atoms.begin(), atoms.end(), s) == atoms.end())
            atoms.push_back(s);
        if (!c.den().is_one()) dens.push_back(c.den());
      }
  ps.max_jet_order = maxord + A.max_order();
  ps.max_total_degree = maxdeg + 1;
  for (SymId s : atoms) ps.atoms.push_back(u->info(s).idx);
  ps.max_atom_degree = 2;
  // denominator blocks: gcd-refined distinct factors of the coefficient
  // denominators
  std::vector<Poly> blocks;
  for (Poly d : dens) {
    for (size_t b = 0; b < blocks.size() && !d.is_constant(); ++b) {
      Poly g = poly_gcd(d, blocks[b]);
      if (g.is_constant()) continue;
      if (auto q = blocks[b].divide_exact(g); q && !q->is_constant()) {
        blocks[b] = g;
        blocks.push_back(*q);
      }
      while (true) {
        auto q = d.divide_exact(blocks[b]);
        if (!q) break;
        d = *q;
      }
    }
    if (!d.is_constant()) blocks.push_back(d);
  }
  for (auto& b : blocks) ps.denom_blocks.push_back(Expr::from_poly(b));
  if (!blocks.empty()) ps.max_denom_power = 4;
  return ps;
}

std::optional<Rat> operator_weight(const TDOperator& A, const WeightSystem& ws) {
  std::optional<Rat> w;
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j)
      for (auto& [k, c] : A.entry(i, j)) {
        auto cw = ws.weight(c);
        if (!cw) return std::nullopt;
        Rat tw = *cw + Rat(k) * ws.dx;
        if (!w)
          w = tw;
        else if (*w != tw)
          return std::nullopt;
      }
  return w;
}

// one reconstruction cell: solve A(s) = v with pool escalation
OperatorSolution cell_solve(const TDOperator& A, const std::vector<Expr>& v,
                            const PoolSpec& base, int x_deg, int escalations,
                            const SystemModel* sys) {
  bool all_zero = true;
  for (auto& e : v)
    if (!(sys ? sys->reduce(e) : e).is_zero()) all_zero = false;
  if (all_zero) {
    OperatorSolution out;
    out.ok = true;
    out.chi.assign(A.cols(), Expr(A.universe()));
    return out;
  }
  PoolSpec ps = base;
  ps.max_x_degree = std::max(ps.max_x_degree, x_deg);
  if (ps.weights) {
    // target weight fixed by wt(s) = wt(v) - wt(A)
    auto wa = operator_weight(A, *ps.weights);
    std::optional<Rat> wv;
    for (auto& e : v) {
      if (e.is_zero()) continue;
      auto w = ps.weights->weight(e);
      if (!w || (wv && *wv != *w)) {
        wv.reset();
        break;
      }
      wv = w;
    }
    if (wa && wv)
      ps.target_weight = *wv - *wa;
    else
      ps.weights = nullptr;  // inhomogeneous data: fall back to caps
  }
  OperatorSolution out;
  for (int round = 0; round <= escalations; ++round) {
    out = solve_operator_linear(A, v, ps, sys);
    if (out.ok || !out.conditions.empty()) return out;
    ps.max_jet_order *= 2;
    ps.max_total_degree *= 2;
    if (ps.max_denom_power > 0) ps.max_denom_power += 2;
  }
  return out;
}

// joint reconstruction: solve for all table entries at once.  The diagonal
// sweep determines each cell only modulo ker A and can pick a representative
// that poisons later diagonals; the joint solve is immune to that, at the
// price of a larger linear system.  Used as a fallback when the sweep fails.
ReconResult reconstruct_joint(const TDOperator& A, const PoolSpec& basepool, int diag,
                              const SystemModel* sys) {
  Universe* u = A.universe();
  ReconResult res;
  int r = A.cols();
  SymId xs = u->independent_sym(0);
  int nd = u->n_independents();
  std::vector<int> base = equation_deps(u, nullptr);

  // per-entry weight targets are only well defined in the scalar case
  std::optional<Rat> wa;
  bool weighted = false;
  Rat wu(0);
  if (basepool.weights && r == 1 && base.size() == 1) {
    wa = operator_weight(A, *basepool.weights);
    if (wa) {
      weighted = true;
      auto it = basepool.weights->dep_w.find(base[0]);
      wu = it == basepool.weights->dep_w.end() ? Rat(0) : it->second;
    }
  }

  struct JEntry {
    int k, i, j, a, b;
    std::vector<SymId> unk;
    std::vector<Expr> pool;
  };
  std::vector<JEntry> entries;
  std::vector<SymId> unknowns;
  for (int k = 0; k < r; ++k)
    for (int i = 0; i < r; ++i)
      for (int j = i; j < r; ++j)
        for (int d = 0; d <= diag; ++d)
          for (int a = 0; a <= d; ++a) {
            int b = d - a;
            if (i == j && a >= b) continue;
            PoolSpec ps = basepool;
            ps.max_x_degree = 0;
            if (weighted) {
              ps.target_weight = *wa - wu - Rat(d) * basepool.weights->dx;
              if (ps.target_weight < 0) continue;
              ps.include_constant = (ps.target_weight == 0);
            }
            JEntry e{k, i, j, a, b, {}, make_pool(u, ps)};
            for (size_t m = 0; m < e.pool.size(); ++m) {
              e.unk.push_back(fresh_unknown(u));
              unknowns.push_back(e.unk.back());
            }
            if (!e.pool.empty()) entries.push_back(std::move(e));
          }

  auto fact = [](int n) {
    Rat f(1);
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
  };

  std::vector<Expr> eqs;
  for (int d = 0; d <= diag; ++d)
    for (int i0 = 0; i0 < r; ++i0)
      for (int j0 = i0; j0 < r; ++j0)
        for (int alpha = 0; alpha <= d; ++alpha) {
          int beta = d - alpha;
          if (i0 == j0 && alpha >= beta) continue;
          std::vector<Expr> e1(r, Expr(u)), e2(r, Expr(u));
          e1[i0] = (alpha == 0) ? Expr(u, Rat(1)) : Expr::from_poly(Poly(u, xs, alpha));
          e2[j0] = (beta == 0) ? Expr(u, Rat(1)) : Expr::from_poly(Poly(u, xs, beta));
          Section f1 = base_section(u, nullptr, A.apply(e1));
          Section f2 = base_section(u, nullptr, A.apply(e2));
          std::vector<Expr> v = commutator(f1, f2).comps;
          std::vector<Expr> chi(r, Expr(u));
          auto add = [&](const JEntry& e, int a, int b, const Rat& sign) {
            if (a > alpha || b > beta) return;
            Rat cf = sign * (fact(alpha) / fact(alpha - a)) * (fact(beta) / fact(beta - b));
            int xp = (alpha - a) + (beta - b);
            Expr xe = (xp == 0) ? Expr(u, Rat(1)) : Expr::from_poly(Poly(u, xs, xp));
            for (size_t m = 0; m < e.pool.size(); ++m)
              chi[e.k] = chi[e.k] + (Expr(u, e.unk[m]) * e.pool[m] * xe).mul_scalar(cf);
          };
          for (const JEntry& e : entries) {
            if (e.i != i0 || e.j != j0) continue;
            add(e, e.a, e.b, Rat(1));
            // the mirrored entry (j,i,b,a) = -(i,j,a,b) also acts on the
            // same pair of components when i == j
            if (e.i == e.j) add(e, e.b, e.a, Rat(-1));
          }
          std::vector<Expr> Ac = A.apply(chi);
          for (int m = 0; m < r; ++m) {
            Expr rm = Ac[m] - v[m];
            if (sys) rm = sys->reduce(rm);
            if (!rm.is_zero()) eqs.push_back(rm);
          }
        }

  LinearSolution ls = solve_linear(eqs, unknowns);
  res.conditions = ls.conditions;
  res.assumptions = ls.assumptions;
  if (!ls.ok) {
    res.message = "joint reconstruction unsolvable within caps";
    return res;
  }
  BracketTable table(u, r, r);
  for (const JEntry& e : entries) {
    Expr c(u);
    for (size_t m = 0; m < e.pool.size(); ++m) c = c + ls.assign.at(e.unk[m]) * e.pool[m];
    if (c.is_zero()) continue;
    BKey key{e.k, e.i, e.j, std::vector<int>(nd, 0), std::vector<int>(nd, 0)};
    key.a[0] = e.a;
    key.b[0] = e.b;
    table.set_antisym(key, c);
  }
  res.table = table;
  res.ok = true;
  return res;
}

}  // namespace

ReconResult reconstruct_bracket(const TDOperator& A, ReconCaps caps, const SystemModel* sys) {
  Universe* u = A.universe();
  ReconResult res;
  if (!nondegenerate(A)) {
    res.message = "operator is degenerate: bracket reconstruction not applicable";
    return res;
  }
  int r = A.cols();
  // distinct parameters in the operator: the parametric joint retry is only
  // affordable for nearly-pinned operators
  std::set<SymId> op_params;
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j)
      for (auto& [k, c] : A.entry(i, j)) {
        (void)k;
        for (SymId s : c.support())
          if (u->info(s).kind == SymKind::Parameter) op_params.insert(s);
      }
  bool joint_param_ok = (int)op_params.size() <= 2;
  PoolSpec pool = caps.pool_given ? caps.pool : default_pool_for(A, nullptr);
  int diag = caps.diag;
  if (diag < 0) {
    int cord = 0;
    for (int i = 0; i < A.rows(); ++i)
      for (int j = 0; j < A.cols(); ++j)
        for (auto& [k, c] : A.entry(i, j)) cord = std::max(cord, c.max_jet_order());
    diag = A.max_order() + cord + 1;
  }
  std::vector<int> base = equation_deps(u, nullptr);
  if ((int)base.size() != A.rows()) {
    res.message = "operator rows do not match the equation dependents";
    return res;
  }
  BracketTable table(u, r, r);
  SymId xs = u->independent_sym(0);

  auto fact = [](int n) {
    Rat f(1);
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
  };

  for (int d = 0; d <= diag; ++d) {
    for (int i = 0; i < r; ++i)
      for (int j = i; j < r; ++j)
        for (int alpha = 0; alpha <= d; ++alpha) {
          int beta = d - alpha;
          if (i == j && alpha >= beta) continue;  // diagonal pairs by antisymmetry
          // arguments x^alpha 1_i and x^beta 1_j
          std::vector<Expr> e1(r, Expr(u)), e2(r, Expr(u));
          e1[i] = (alpha == 0) ? Expr(u, Rat(1)) : Expr::from_poly(Poly(u, xs, alpha));
          e2[j] = (beta == 0) ? Expr(u, Rat(1)) : Expr::from_poly(Poly(u, xs, beta));
          Section f1 = base_section(u, nullptr, A.apply(e1));
          Section f2 = base_section(u, nullptr, A.apply(e2));
          std::vector<Expr> v = commutator(f1, f2).comps;
          // subtract the known lower-diagonal contributions
          std::vector<Expr> lower(r, Expr(u));
          bool any_lower = false;
          for (int a2 = 0; a2 <= alpha; ++a2)
            for (int b2 = 0; b2 <= beta; ++b2) {
              if (a2 + b2 >= d) continue;
              // entry (a2,b2) against D^{a2}(x^alpha) D^{b2}(x^beta):
              // D^{a2}(x^alpha) = alpha!/(alpha-a2)! x^{alpha-a2}
              Rat cf = (fact(alpha) / fact(alpha - a2)) * (fact(beta) / fact(beta - b2));
              int xa_p = alpha - a2, xb_p = beta - b2;
              for (int k = 0; k < r; ++k) {
                Expr c = table.get_x(k, i, j, a2, b2);
                if (c.is_zero()) continue;
                Expr xa = (xa_p == 0) ? Expr(u, Rat(1)) : Expr::from_poly(Poly(u, xs, xa_p));
                Expr xb = (xb_p == 0) ? Expr(u, Rat(1)) : Expr::from_poly(Poly(u, xs, xb_p));
                lower[k] = lower[k] + (c * xa * xb).mul_scalar(cf);
                any_lower = true;
              }
            }
          if (any_lower) {
            std::vector<Expr> Al = A.apply(lower);
            for (int m = 0; m < (int)v.size(); ++m) v[m] = v[m] - Al[m];
          }
          if (sys)
            for (auto& e : v) e = sys->reduce(e);
          OperatorSolution cell = cell_solve(A, v, pool, d, caps.escalations, sys);
          bool param_conds = false;
          bool monomial_conds = true;
          for (const Expr& c : cell.conditions) {
            for (SymId s : c.support())
              if (u->info(s).kind == SymKind::Parameter) param_conds = true;
            // group the numerator by its non-parameter part; each group's
            // parameter polynomial must vanish independently
            std::map<std::vector<std::pair<SymId, int>>, int> gterms;
            for (const auto& [mono, coef] : c.num().terms()) {
              (void)coef;
              std::vector<std::pair<SymId, int>> key;
              for (auto& [s, kk] : mono.e)
                if (u->info(s).kind != SymKind::Parameter) key.emplace_back(s, kk);
              gterms[key]++;
            }
            for (auto& [key, n] : gterms)
              if (n > 1) monomial_conds = false;
          }
          // single-term parameter conditions can only hold by zeroing a
          // parameter, which degenerates the operator; treat like an
          // outright failure and retry jointly
          if (!cell.ok && (!param_conds || (monomial_conds && joint_param_ok))) {
            // the sweep determines cells only modulo ker A; an unconditional
            // failure may be a bad kernel representative, so retry jointly
            ReconResult jr = reconstruct_joint(A, pool, diag, sys);
            if (jr.ok || !jr.conditions.empty()) return jr;
          }
          if (!cell.ok) {
            res.conditions = cell.conditions;
            res.assumptions = cell.assumptions;
            res.message = "cell (" + std::to_string(i) + "," + std::to_string(j) + "," +
                          std::to_string(alpha) + "," + std::to_string(beta) +
                          ") unsolvable within caps";
            return res;
          }
          Rat norm = fact(alpha) * fact(beta);
          for (int k = 0; k < r; ++k) {
            Expr c = cell.chi[k].mul_scalar(Rat(1) / norm);
            if (c.is_zero()) continue;
            if (c.depends_on(xs)) {
              // a valid table coefficient is free of the base variable; the
              // x-dependent part must vanish, which yields parameter
              // constraints (or outright failure without parameters)
              bool den_x = c.den().depends_on(xs);
              std::map<std::vector<std::pair<SymId, int>>, Expr> groups;
              for (const auto& [mono, coef] : c.num().terms()) {
                std::vector<std::pair<SymId, int>> key;
                Monomial pmono;
                bool has_x = den_x;
                for (auto& [s, kk] : mono.e) {
                  if (u->info(s).kind == SymKind::Parameter)
                    pmono.e.emplace_back(s, kk);
                  else {
                    key.emplace_back(s, kk);
                    if (s == xs) has_x = true;
                  }
                }
                if (!has_x) continue;
                Expr t = Expr::from_poly(Poly::from_terms(u, {{pmono, coef}}));
                auto it = groups.find(key);
                if (it == groups.end())
                  groups.emplace(key, t);
                else
                  it->second = it->second + t;
              }
              bool gparams = false;
              bool gmono = true;
              for (auto& [kk, g] : groups) {
                for (SymId s : g.support())
                  if (u->info(s).kind == SymKind::Parameter) gparams = true;
                if (g.num().n_terms() > 1) gmono = false;
              }
              // without parameters the x-dependence is an outright failure;
              // with only single-term parameter groups it holds only by
              // degenerating the operator.  Either way the sweep may have
              // picked a bad kernel representative, so retry jointly first
              if (!gparams || (gmono && joint_param_ok)) {
                ReconResult jr = reconstruct_joint(A, pool, diag, sys);
                if (jr.ok || !jr.conditions.empty()) return jr;
              }
              for (auto& [kk, g] : groups)
                if (!g.is_zero()) res.conditions.push_back(g);
              res.message = "bracket coefficient depends on the base variable: cell (" +
                            std::to_string(i) + "," + std::to_string(j) + "," +
                            std::to_string(alpha) + "," + std::to_string(beta) +
                            ") k=" + std::to_string(k) + " -> " + c.str();
              return res;
            }
            int nd = u->n_independents();
            BKey key{k, i, j, std::vector<int>(nd, 0), std::vector<int>(nd, 0)};
            key.a[0] = alpha;
            key.b[0] = beta;
            table.set_antisym(key, c);
          }
          res.assumptions.insert(res.assumptions.end(), cell.assumptions.begin(),
                                 cell.assumptions.end());
        }
  }
  res.table = table;
  res.ok = true;
  return res;
}

Section certify_frobenius(const TDOperator& A, const BracketTable& table,
                          const CoveringContext& ctx, const SystemModel* sys) {
  Universe* u = A.universe();
  Section p = ctx.p_section(), q = ctx.q_section();
  Section f1 = base_section(u, &ctx, A.apply(p.comps));
  Section f2 = base_section(u, &ctx, A.apply(q.comps));
  Section lhs = commutator(f1, f2);
  std::vector<Expr> br = A.apply(table.eval(p.comps, q.comps));
  for (int i = 0; i < lhs.size(); ++i) {
    lhs.comps[i] = lhs.comps[i] - br[i];
    if (sys) lhs.comps[i] = sys->reduce(lhs.comps[i]);
  }
  return lhs;
}

BracketTable dogma_bracket(const TDOperator& A, const SystemModel* sys) {
  CoveringContext ctx = CoveringContext::make(A.universe(), A.cols());
  return dogma_bracket(A, equation_deps(A.universe(), &ctx), sys);
}

BracketTable dogma_bracket(const TDOperator& A, const std::vector<int>& base,
                           const SystemModel* sys) {
  Universe* u = A.universe();
  if (!A.adjoint().equals(-A))
    throw std::runtime_error("dogma_bracket: operator is not skew-adjoint");
  CoveringContext ctx = CoveringContext::make(u, A.cols());
  TDOperator L = ell_coeff(A, ctx.p_section(), base);
  std::vector<Expr> vals = L.adjoint().apply(ctx.q_section().comps);
  if (sys)
    for (auto& v : vals) v = sys->reduce(v);
  return table_from_values(vals, ctx);
}

Section hamiltonian_criterion_residual(const TDOperator& A, const CoveringContext& ctx,
                                       const SystemModel* sys) {
  Universe* u = A.universe();
  std::vector<int> base = equation_deps(u, &ctx);
  Section p = ctx.p_section(), q = ctx.q_section();
  TDOperator L1 = ell_coeff(A, p, base);
  TDOperator L2 = ell_coeff(A, q, base);
  std::vector<Expr> Ap = A.apply(p.comps), Aq = A.apply(q.comps);
  std::vector<Expr> t1 = L1.apply(Aq), t2 = L2.apply(Ap), t3 = A.apply(L2.adjoint().apply(p.comps));
  Section r;
  r.deps = base;
  for (size_t i = 0; i < t1.size(); ++i) {
    Expr e = t1[i] - t2[i] - t3[i];
    r.comps.push_back(sys ? sys->reduce(e) : e);
  }
  return r;
}

Section two_grads_bracket(const TDOperator& A, const Section& psi1, const Section& psi2) {
  Universe* u = A.universe();
  Section Ap1 = A.apply(psi1), Ap2 = A.apply(psi2);
  TDOperator l1 = linearize(Ap1, psi1.deps, A.direction());
  TDOperator l2 = linearize(Ap2, psi2.deps, A.direction());
  std::vector<Expr> a = l1.adjoint().apply(psi2.comps);
  std::vector<Expr> b = l2.adjoint().apply(psi1.comps);
  Expr pairing(u);
  for (int i = 0; i < psi1.size(); ++i)
    pairing = pairing + psi1.comps[i] * Ap2.comps[i] - Ap1.comps[i] * psi2.comps[i];
  Section eu = euler(Density{pairing, A.direction()}, psi1.deps);
  Section r = psi1;
  for (int i = 0; i < r.size(); ++i)
    r.comps[i] = evolutionary(Ap1, psi2.comps[i]) - evolutionary(Ap2, psi1.comps[i]) + a[i] -
                 b[i] + eu.comps[i].mul_scalar(Rat(1, 2));
  return r;
}

namespace {

// bilinear ansatz solve: find sections s_o (one per operator) bilinear in the
// covering jets with sum_o ops[o](s_o) = v; unknown blocks ordered by `order`
struct BilinearSolution {
  bool ok = false;
  std::vector<std::vector<Expr>> s;  // per operator, per component
  std::vector<Expr> conditions;
  std::string message;
};

BilinearSolution solve_bilinear(const std::vector<TDOperator>& ops, const std::vector<int>& order,
                                const std::vector<Expr>& v, const CoveringContext& ctx,
                                int argcap, const PoolSpec& coeff_pool, const SystemModel* sys) {
  Universe* u = ctx.u;
  std::vector<Expr> pool = make_pool(u, coeff_pool);
  // covering jet candidates: every multi-index of total order <= argcap over
  // the directions the covering variables actually carry
  std::vector<std::vector<int>> sigmas;
  bool x_only = u->dependent_x_only(ctx.p[0]);
  int nd = u->n_independents();
  {
    std::function<void(std::vector<int>&, int, int)> rec = [&](std::vector<int>& cur, int d,
                                                               int left) {
      if (d == nd) {
        sigmas.push_back(cur);
        return;
      }
      int cap = (x_only && d != 0) ? 0 : left;
      for (int e = 0; e <= cap; ++e) {
        cur[d] = e;
        rec(cur, d + 1, left - e);
      }
      cur[d] = 0;
    };
    std::vector<int> cur(nd, 0);
    rec(cur, 0, argcap);
  }

  std::vector<SymId> unknowns;
  std::vector<std::vector<Expr>> s(ops.size());
  for (int o : order) {
    s[o].assign(ops[o].cols(), Expr(u));
    for (int c = 0; c < ops[o].cols(); ++c)
      for (int pi = 0; pi < ctx.r; ++pi)
        for (auto& sa : sigmas)
          for (int qj = 0; qj < ctx.r; ++qj)
            for (auto& sb : sigmas) {
              Expr pj(u, u->jet(ctx.p[pi], sa));
              Expr qb(u, u->jet(ctx.q[qj], sb));
              for (auto& b : pool) {
                SymId un = fresh_unknown(u);
                unknowns.push_back(un);
                s[o][c] = s[o][c] + Expr(u, un) * b * pj * qb;
              }
            }
  }
  std::vector<Expr> res = v;
  for (auto& e : res) e = -e;
  for (size_t o = 0; o < ops.size(); ++o) {
    std::vector<Expr> img = ops[o].apply(s[o]);
    for (size_t i = 0; i < res.size(); ++i) res[i] = res[i] + img[i];
  }
  if (sys)
    for (auto& e : res) e = sys->reduce(e);
  LinearSolution ls = solve_linear(res, unknowns);
  BilinearSolution out;
  out.conditions = ls.conditions;
  if (!ls.ok) {
    out.message = "bilinear decomposition unsolvable";
    return out;
  }
  out.ok = true;
  out.s.resize(ops.size());
  // substitute the solved unknowns back
  for (size_t o = 0; o < ops.size(); ++o) {
    out.s[o].assign(ops[o].cols(), Expr(u));
    for (int c = 0; c < ops[o].cols(); ++c)
      out.s[o][c] = s[o][c].substitute([&](SymId sid) -> const Expr* {
        auto it = ls.assign.find(sid);
        return it == ls.assign.end() ? nullptr : &it->second;
      });
  }
  return out;
}

}  // namespace

ReconResult chain_bracket(const TDOperator& A, const TDOperator& Delta,
                          const BracketTable& tableA, ReconCaps caps, const SystemModel* sys) {
  Universe* u = A.universe();
  ReconResult res;
  CoveringContext ctx = CoveringContext::make(u, Delta.cols());
  std::vector<int> base = equation_deps(u, &ctx);
  Section p = ctx.p_section(), q = ctx.q_section();
  std::vector<Expr> Dp = Delta.apply(p.comps), Dq = Delta.apply(q.comps);
  std::vector<Expr> ADp = A.apply(Dp), ADq = A.apply(Dq);
  // E_{A Delta p}(Delta)(q) = ell_{Delta,q}(A Delta p)
  std::vector<Expr> t1 = ell_coeff(Delta, q, base).apply(ADp);
  std::vector<Expr> t2 = ell_coeff(Delta, p, base).apply(ADq);
  std::vector<Expr> br = tableA.eval(Dp, Dq);
  std::vector<Expr> rhs(Delta.rows(), Expr(u));
  for (int i = 0; i < Delta.rows(); ++i) {
    rhs[i] = t1[i] - t2[i] + br[i];
    if (sys) rhs[i] = sys->reduce(rhs[i]);
  }
  if (Delta.zero_order() && Delta.rows() == Delta.cols()) {
    std::vector<Expr> sVals = invert_local(Delta).apply(rhs);
    if (sys)
      for (auto& e : sVals) e = sys->reduce(e);
    res.table = table_from_values(sVals, ctx);
    res.ok = true;
    return res;
  }
  PoolSpec pool = caps.pool_given ? caps.pool : default_pool_for(A.compose(Delta), &ctx);
  int argcap = caps.diag >= 0 ? caps.diag : A.max_order() + Delta.max_order() + 1;
  BilinearSolution bs = solve_bilinear({Delta}, {0}, rhs, ctx, argcap, pool, sys);
  if (!bs.ok) {
    res.conditions = bs.conditions;
    res.message = bs.message;
    return res;
  }
  res.table = table_from_values(bs.s[0], ctx);
  res.ok = true;
  return res;
}

namespace {
BracketTable flip_antisym(const BracketTable& t) {
  BracketTable r(t.universe(), t.components(), t.r());
  for (auto& [k, c] : t.entries()) {
    BKey m{k.k, k.j, k.i, k.b, k.a};
    r.set(m, -c);
  }
  return r;
}
}  // namespace

GammaResult gamma_decompose(const std::vector<TDOperator>& ops, const CoveringContext& ctx,
                            ReconCaps caps, const SystemModel* sys) {
  Universe* u = ctx.u;
  int N = (int)ops.size();
  GammaResult out;
  out.gamma.N = N;
  PoolSpec pool = caps.pool_given ? caps.pool : default_pool_for(ops[0], &ctx);
  int argcap = caps.diag;
  if (argcap < 0) {
    argcap = 1;
    for (auto& A : ops) argcap = std::max(argcap, A.max_order() + 1);
  }
  for (int i = 0; i < N; ++i)
    for (int j = i; j < N; ++j) {
      Section p = ctx.p_section(), q = ctx.q_section();
      Section f1 = base_section(u, &ctx, ops[i].apply(p.comps));
      Section f2 = base_section(u, &ctx, ops[j].apply(q.comps));
      std::vector<Expr> v = commutator(f1, f2).comps;
      if (sys)
        for (auto& e : v) e = sys->reduce(e);
      // gauge: unknowns of blocks k=i, then k=j, then the rest
      std::vector<int> order;
      order.push_back(i);
      if (j != i) order.push_back(j);
      for (int k = 0; k < N; ++k)
        if (k != i && k != j) order.push_back(k);
      BilinearSolution bs = solve_bilinear(ops, order, v, ctx, argcap, pool, sys);
      if (!bs.ok) {
        out.message = "pair (" + std::to_string(i) + "," + std::to_string(j) +
                      "): commutator leaves the sum of images (not strong compatible)";
        return out;
      }
      std::vector<BracketTable> blocks;
      for (int k = 0; k < N; ++k) blocks.push_back(table_from_values(bs.s[k], ctx));
      out.gamma.blocks[{i, j}] = blocks;
      if (j != i) {
        std::vector<BracketTable> flipped;
        for (int k = 0; k < N; ++k) flipped.push_back(flip_antisym(blocks[k]));
        out.gamma.blocks[{j, i}] = flipped;
      }
    }
  out.ok = true;
  return out;
}

std::string GammaTable::json() const {
  std::string s = "{";
  bool first = true;
  for (auto& [ij, blk] : blocks) {
    if (!first) s += ",";
    first = false;
    s += "\"gamma_" + std::to_string(ij.first) + "_" + std::to_string(ij.second) + "\":[";
    for (size_t k = 0; k < blk.size(); ++k) s += (k ? "," : "") + blk[k].json();
    s += "]";
  }
  return s + "}";
}

bool linear_compat_check(const std::vector<TDOperator>& ops,
                         const std::vector<BracketTable>& tables, const SystemModel* sys,
                         bool probabilistic, int trials, uint64_t seed) {
  Universe* u = ops[0].universe();
  TDOperator pencil(u, ops[0].rows(), ops[0].cols(), ops[0].direction());
  BracketTable tpencil(u, tables[0].components(), tables[0].r());
  for (size_t i = 0; i < ops.size(); ++i) {
    SymId lam = kNoSym;
    std::string nm = "@lam" + std::to_string(i);
    lam = u->lookup(nm);
    if (lam == kNoSym) lam = u->parameter_sym(u->add_parameter(nm));
    Expr l(u, lam);
    pencil = pencil + ops[i].scale(l);
    tpencil = tpencil + tables[i].scale(l);
  }
  CoveringContext ctx = CoveringContext::make(u, pencil.cols());
  Section res = certify_frobenius(pencil, tpencil, ctx, sys);
  for (int i = 0; i < res.size(); ++i) {
    bool zero = probabilistic ? res.comps[i].is_zero_probabilistic(trials, seed + i)
                              : res.comps[i].is_zero();
    if (!zero) return false;
  }
  return true;
}

Section yang_baxter_residual(const TDOperator& R, const BracketTable& tableR,
                             const CoveringContext& ctx, const SystemModel* sys) {
  return certify_frobenius(R, tableR, ctx, sys);
}

Section power_bracket_residual(const TDOperator& R, const std::vector<BracketTable>& tables,
                               int ell, const CoveringContext& ctx, const SystemModel* sys) {
  Universe* u = R.universe();
  std::vector<int> base = equation_deps(u, &ctx);
  Section p = ctx.p_section(), q = ctx.q_section();
  // powers of R applied to the covering arguments
  std::vector<std::vector<Expr>> Rp{p.comps}, Rq{q.comps};
  for (int k = 1; k <= ell; ++k) {
    Rp.push_back(R.apply(Rp.back()));
    Rq.push_back(R.apply(Rq.back()));
  }
  TDOperator Rpow = TDOperator::identity(u, R.rows(), R.direction());
  std::vector<TDOperator> Rpows{Rpow};
  for (int k = 1; k <= ell; ++k) {
    Rpow = R.compose(Rpow);
    Rpows.push_back(Rpow);
  }
  std::vector<Expr> lhs = Rpows[ell - 1].apply(tables.at(ell - 1).eval(p.comps, q.comps));
  std::vector<Expr> rhs = tables.at(0).eval(Rp[ell - 1], Rq[ell - 1]);
  for (int i = 0; i <= ell - 2; ++i) {
    std::vector<Expr> a = ell_coeff(R, Section{base, Rq[i]}, base).apply(Rp[ell]);
    std::vector<Expr> b = ell_coeff(R, Section{base, Rp[i]}, base).apply(Rq[ell]);
    std::vector<Expr> term(a.size());
    for (size_t m = 0; m < a.size(); ++m) term[m] = a[m] - b[m];
    term = Rpows[ell - i - 2].apply(term);
    for (size_t m = 0; m < rhs.size(); ++m) rhs[m] = rhs[m] + term[m];
  }
  Section res;
  res.deps = base;
  for (size_t m = 0; m < lhs.size(); ++m) {
    Expr e = lhs[m] - rhs[m];
    res.comps.push_back(sys ? sys->reduce(e) : e);
  }
  return res;
}

Section flatness_residual(const TDOperator& A, const BracketTable& tableA, const Section& p,
                          const Section& q, const Section& phi) {
  Section Ap = A.apply(p), Aq = A.apply(q);
  Section t1 = commutator(Ap, commutator(Aq, phi));
  Section t2 = commutator(Aq, commutator(Ap, phi));
  // full Koszul bracket [p,q]_A on concrete sections
  Section pq = koszul_evolutionary_part(A, p, q);
  std::vector<Expr> br = tableA.eval(p.comps, q.comps);
  for (int i = 0; i < pq.size(); ++i) pq.comps[i] = pq.comps[i] + br[i];
  Section t3 = commutator(A.apply(pq), phi);
  Section r = phi;
  for (int i = 0; i < r.size(); ++i) r.comps[i] = t1.comps[i] - t2.comps[i] - t3.comps[i];
  return r;
}

}  // namespace jetfrob
