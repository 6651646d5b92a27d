#include "jetfrob/search.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace jetfrob {

namespace {

std::vector<int> ordinary_deps(Universe* u) {
  std::vector<int> out;
  for (int i = 0; i < u->n_dependents(); ++i)
    if (!u->dependent_x_only(i)) out.push_back(i);
  return out;
}

SymId fresh_param(Universe* u, int& counter) {
  for (;;) {
    std::string nm = "c" + std::to_string(++counter);
    if (u->lookup(nm) == kNoSym) return u->parameter_sym(u->add_parameter(nm));
  }
}

bool is_param(Universe* u, SymId s) { return u->info(s).kind == SymKind::Parameter; }

// split the numerator into parameter polynomials, one per non-parameter
// monomial part; these must all vanish for the expression to be zero
std::vector<Expr> param_conditions(const Expr& e) {
  Universe* u = e.universe();
  std::map<std::vector<std::pair<SymId, int>>, Expr> groups;
  for (const auto& [mono, coef] : e.num().terms()) {
    std::vector<std::pair<SymId, int>> key;
    Monomial pmono;
    for (auto& [s, k] : mono.e) {
      if (is_param(u, s))
        pmono.e.emplace_back(s, k);
      else
        key.emplace_back(s, k);
    }
    Expr t = Expr::from_poly(Poly::from_terms(u, {{pmono, coef}}));
    auto it = groups.find(key);
    if (it == groups.end())
      groups.emplace(key, t);
    else
      it->second = it->second + t;
  }
  std::vector<Expr> out;
  for (auto& [k, v] : groups)
    if (!v.is_zero()) out.push_back(v);
  return out;
}

// scale so coefficients are coprime integers and the leading term is positive
Poly normalize_content(const Poly& p) {
  if (p.is_zero()) return p;
  mpz_class g = 0, l = 1;
  for (const auto& [m, c] : p.terms()) {
    (void)m;
    g = gcd(g, c.get_num());
    l = lcm(l, c.get_den());
  }
  Rat s = Rat(l) / Rat(g);
  if (p.terms().front().second < 0) s = -s;
  return p * Poly(p.universe(), s);
}

}  // namespace

AnsatzResult ansatz(Universe* u, const WeightSystem& weights, const Rat& target, int rows,
                    int cols, int maxord, int max_degree) {
  AnsatzResult out;
  out.op = TDOperator(u, rows, cols, 0);
  std::vector<int> deps = ordinary_deps(u);
  // jet order cap implied by the weights: the lightest dependent plus
  // order*dx must not exceed the target
  Rat minw = weights.dx;
  for (int d : deps) {
    auto it = weights.dep_w.find(d);
    Rat w = it == weights.dep_w.end() ? Rat(0) : it->second;
    if (d == deps.front() || w < minw) minw = w;
  }
  int counter = 0;
  bool any = false;
  for (int k = 0; k <= maxord; ++k) {
    Rat cw = target - Rat(k) * weights.dx;
    if (cw < 0) break;
    PoolSpec spec;
    spec.deps = deps;
    spec.max_total_degree = max_degree;
    int maxjet = 0;
    if (weights.dx > 0) {
      Rat span = (cw - minw) / weights.dx;
      mpz_class fl = span.get_num() / span.get_den();
      maxjet = std::max(0, (int)fl.get_si());
    }
    spec.max_jet_order = maxjet;
    spec.weights = &weights;
    spec.target_weight = cw;
    spec.include_constant = (cw == 0);
    std::vector<Expr> pool = make_pool(u, spec);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j)
        for (const Expr& m : pool) {
          SymId p = fresh_param(u, counter);
          out.params.push_back(p);
          out.op.add_coeff(i, j, k, Expr(u, p) * m);
          any = true;
        }
  }
  if (!any) throw std::runtime_error("empty ansatz: no terms of the target weight");
  return out;
}

// exact polynomial square root; nullopt when p is not a perfect square
std::optional<Poly> poly_sqrt(const Poly& p) {
  Universe* u = p.universe();
  if (p.is_zero()) return Poly(u, Rat(0));
  const Monomial& lm = p.leading_monomial();
  for (auto& [s, k] : lm.e)
    if (k % 2 != 0) return std::nullopt;
  const Rat& lc = p.leading_coeff();
  if (lc < 0) return std::nullopt;
  mpz_class n = lc.get_num(), d = lc.get_den();
  if (!mpz_perfect_square_p(n.get_mpz_t()) ||
      !mpz_perfect_square_p(d.get_mpz_t()))
    return std::nullopt;
  mpz_class sn, sd;
  mpz_sqrt(sn.get_mpz_t(), n.get_mpz_t());
  mpz_sqrt(sd.get_mpz_t(), d.get_mpz_t());
  Monomial hm = lm;
  for (auto& [s, k] : hm.e) k /= 2;
  Rat hc(sn, sd);
  Poly q = Poly(u, Rat(1)).mul_term(hm, hc);
  Poly lead2 = q.mul_scalar(Rat(2));
  Poly r = p - q * q;
  int budget = 4 * p.n_terms() + 8;
  while (!r.is_zero() && budget-- > 0) {
    // next term t = lead(r) / (2 * lead(q)); must divide exactly
    const Monomial& rm = r.leading_monomial();
    Monomial tm = rm;
    bool ok = true;
    for (auto& [s, k] : hm.e) {
      bool found = false;
      for (auto& [rs, rk] : tm.e)
        if (rs == s) {
          rk -= k;
          if (rk < 0) ok = false;
          found = true;
        }
      if (!found) ok = false;
    }
    if (!ok) return std::nullopt;
    std::vector<std::pair<SymId, int>> te;
    for (auto& [s, k] : tm.e)
      if (k > 0) te.push_back({s, k});
    Monomial t;
    t.e = te;
    Rat tc = r.leading_coeff() / (Rat(2) * hc);
    q = q + Poly(u, Rat(1)).mul_term(t, tc);
    r = p - q * q;
  }
  if (!r.is_zero()) return std::nullopt;
  if (q.leading_coeff() < 0) q = -q;
  return q;
}

std::vector<Expr> linear_factors(const Expr& cond, bool* complete) {
  Universe* u = cond.universe();
  if (complete) *complete = true;
  std::vector<Expr> out;
  Poly p = cond.num();
  if (p.is_zero()) return out;
  // monomial content: parameters dividing every term
  std::map<SymId, int> content;
  bool first = true;
  for (const auto& [mono, coef] : p.terms()) {
    (void)coef;
    std::map<SymId, int> cur;
    for (auto& [s, k] : mono.e)
      if (is_param(u, s)) cur[s] = k;
    if (first) {
      content = cur;
      first = false;
    } else {
      for (auto it = content.begin(); it != content.end();) {
        auto jt = cur.find(it->first);
        if (jt == cur.end())
          it = content.erase(it);
        else {
          it->second = std::min(it->second, jt->second);
          ++it;
        }
      }
    }
  }
  for (auto& [s, k] : content) {
    out.push_back(Expr(u, s));
    for (int i = 0; i < k; ++i) p = *p.divide_exact(Poly(u, s, 1));
  }
  // repeatedly peel the factor containing a degree-one parameter
  bool progress = true;
  while (progress && p.total_degree() > 0) {
    progress = false;
    if (p.total_degree() == 1) {
      out.push_back(Expr::from_poly(normalize_content(p)));
      p = Poly(u, Rat(1));
      break;
    }
    for (SymId s : p.support()) {
      if (!is_param(u, s) || p.degree_in(s) != 1) continue;
      Poly a = p.coeff_of(s, 1), b = p.coeff_of(s, 0);
      Poly g = poly_gcd(a, b);
      auto aq = a.divide_exact(g), bq = b.divide_exact(g);
      if (!aq || !bq) continue;
      Poly lin = *aq * Poly(u, s, 1) + *bq;
      if (lin.total_degree() == 1) {
        out.push_back(Expr::from_poly(normalize_content(lin)));
        p = g;
        progress = true;
        break;
      }
    }
    // binary-quadratic split: a*s^2 + b*s + c with perfect-square
    // discriminant factors into two rational linear forms
    if (!progress && p.total_degree() == 2) {
      for (SymId s : p.support()) {
        if (!is_param(u, s) || p.degree_in(s) != 2) continue;
        Poly a = p.coeff_of(s, 2), b = p.coeff_of(s, 1), c = p.coeff_of(s, 0);
        if (!a.is_constant()) continue;
        Poly disc = b * b - (a * c).mul_scalar(Rat(4));
        auto q = poly_sqrt(disc);
        if (!q) continue;
        Poly two_a_s = a.mul_scalar(Rat(2)) * Poly(u, s, 1);
        Poly f1 = two_a_s + b - *q;
        Poly f2 = two_a_s + b + *q;
        if (f1.total_degree() != 1 || f2.total_degree() != 1) continue;
        out.push_back(Expr::from_poly(normalize_content(f1)));
        out.push_back(Expr::from_poly(normalize_content(f2)));
        p = Poly(u, Rat(1));
        progress = true;
        break;
      }
    }
  }
  if (p.total_degree() > 0 && complete) *complete = false;
  return out;
}

namespace {

struct Frame {
  std::map<SymId, Expr> subs;
  std::vector<std::string> conds;
};

Expr apply_subs(const Expr& e, const std::map<SymId, Expr>& subs) {
  return e.substitute([&](SymId s) -> const Expr* {
    auto it = subs.find(s);
    return it == subs.end() ? nullptr : &it->second;
  });
}

// solve a linear parameter polynomial for its highest parameter
bool solve_linear_form(const Expr& lin, SymId* pivot, Expr* value) {
  Universe* u = lin.universe();
  for (SymId s : lin.support()) {
    if (!is_param(u, s)) return false;
    Expr c = lin.partial(s);
    if (c.as_rational() && *c.as_rational() != 0) {
      *pivot = s;
      *value = (Expr(u, s) * c - lin) / c;
      return true;
    }
  }
  return false;
}

void classify_rec(const TDOperator& A, const std::vector<SymId>& params, const SearchCaps& caps,
                  const SystemModel* sys, Frame frame, int depth,
                  std::vector<SearchStratum>& out, std::set<std::string>& seen);

// recurse into the locus lin = 0; returns false when the factor cannot be
// solved for a parameter
bool branch_on(const Expr& lin, const TDOperator& A, const std::vector<SymId>& params,
               const SearchCaps& caps, const SystemModel* sys, const Frame& frame, int depth,
               std::vector<SearchStratum>& out, std::set<std::string>& seen) {
  SymId pivot = kNoSym;
  Expr value(lin.universe());
  if (!solve_linear_form(lin, &pivot, &value)) return false;
  Frame next = frame;
  // keep the substitution map triangular: resolve the new pivot inside the
  // recorded values before adding it
  for (auto& [s, v] : next.subs)
    v = v.substitute([&](SymId q) -> const Expr* { return q == pivot ? &value : nullptr; });
  next.subs.emplace(pivot, value);
  next.conds.push_back(lin.str() + " = 0");
  classify_rec(A, params, caps, sys, std::move(next), depth + 1, out, seen);
  return true;
}

void classify_rec(const TDOperator& A, const std::vector<SymId>& params, const SearchCaps& caps,
                  const SystemModel* sys, Frame frame, int depth,
                  std::vector<SearchStratum>& out, std::set<std::string>& seen) {
  TDOperator cur = A.map_coeffs([&](const Expr& c) { return apply_subs(c, frame.subs); });
  if (cur.is_zero()) return;
  std::string sig = cur.str();
  if (!seen.insert(sig).second) return;

  ReconCaps rc = caps.recon;
  if (caps.weights && !rc.pool_given) {
    Universe* u = cur.universe();
    PoolSpec ps;
    ps.deps = ordinary_deps(u);
    int cord = 0, cdeg = 1;
    for (int i = 0; i < cur.rows(); ++i)
      for (int j = 0; j < cur.cols(); ++j)
        for (auto& [k, c] : cur.entry(i, j)) {
          (void)k;
          cord = std::max(cord, c.max_jet_order());
          cdeg = std::max(cdeg, c.total_degree());
        }
    ps.max_jet_order = cord + cur.max_order();
    ps.max_total_degree = cdeg + 1;
    ps.weights = caps.weights;
    rc.pool = ps;
    rc.pool_given = true;
  }
  ReconResult r;
  std::string fail;
  try {
    r = reconstruct_bracket(cur, rc, sys);
  } catch (const std::exception& ex) {
    fail = ex.what();
  }
  std::vector<Expr> conds = r.conditions;
  if (r.ok && conds.empty()) {
    CoveringContext ctx = CoveringContext::make(cur.universe(), cur.cols());
    Section res = certify_frobenius(cur, r.table, ctx, sys);
    for (const Expr& c : res.comps)
      if (!c.is_zero())
        for (Expr& pc : param_conditions(c)) conds.push_back(pc);
    if (conds.empty()) {
      SearchStratum st;
      st.conditions = frame.conds;
      st.op = cur;
      st.table = r.table;
      st.status = "certified";
      out.push_back(std::move(st));
      // a certified family can still hide special strata where a pivot of
      // the reconstruction degenerates; explore those loci as well
      if (depth < caps.max_depth) {
        std::set<std::string> fs;
        for (const Expr& a : r.assumptions)
          for (const Expr& lin : linear_factors(a, nullptr))
            if (fs.insert(lin.str()).second)
              branch_on(lin, A, params, caps, sys, frame, depth, out, seen);
      }
      return;
    }
  }
  for (const Expr& c : conds)
    if (auto r2 = c.as_rational(); r2 && *r2 != 0) {
      // a nonzero constant requirement: this stratum is empty
      if (depth == 0) {
        SearchStratum st;
        st.conditions = frame.conds;
        st.op = cur;
        st.status = "degenerate";
        out.push_back(std::move(st));
      }
      return;
    }
  if (conds.empty()) {
    // degenerate or capped with no usable conditions: report only at the root
    if (depth == 0) {
      SearchStratum st;
      st.conditions = frame.conds;
      st.op = cur;
      st.status = "degenerate";
      if (!fail.empty()) st.conditions.push_back(fail);
      out.push_back(std::move(st));
    }
    return;
  }
  if (depth >= caps.max_depth) {
    SearchStratum st;
    st.conditions = frame.conds;
    st.op = cur;
    st.status = "unresolved";
    st.pending = conds;
    out.push_back(std::move(st));
    return;
  }
  bool branched = false, all_complete = true;
  std::set<std::string> factor_seen;
  for (const Expr& cond : conds) {
    bool complete = true;
    for (const Expr& lin : linear_factors(cond, &complete)) {
      if (!factor_seen.insert(lin.str()).second) continue;
      if (branch_on(lin, A, params, caps, sys, frame, depth, out, seen))
        branched = true;
      else
        all_complete = false;
    }
    if (!complete) all_complete = false;
  }
  // pivot-degeneracy loci can carry strata invisible from the generic
  // conditions (the cells solve differently there)
  for (const Expr& a : r.assumptions)
    for (const Expr& lin : linear_factors(a, nullptr))
      if (factor_seen.insert(lin.str()).second)
        branch_on(lin, A, params, caps, sys, frame, depth, out, seen);
  if (!branched || !all_complete) {
    SearchStratum st;
    st.conditions = frame.conds;
    st.op = cur;
    st.status = "unresolved";
    st.pending = conds;
    out.push_back(std::move(st));
  }
}

}  // namespace

std::vector<SearchStratum> classify(const TDOperator& A, const std::vector<SymId>& params,
                                    SearchCaps caps, const SystemModel* sys) {
  std::vector<SearchStratum> out;
  std::set<std::string> seen;
  if (caps.max_depth < 0) caps.max_depth = (int)params.size() + 2;
  classify_rec(A, params, caps, sys, Frame{}, 0, out, seen);
  std::stable_sort(out.begin(), out.end(), [](const SearchStratum& a, const SearchStratum& b) {
    if (a.status != b.status) return a.status < b.status;
    return a.conditions < b.conditions;
  });
  return out;
}

std::string render_strata(const std::vector<SearchStratum>& strata, bool tensor_style) {
  std::ostringstream os;
  int n = 0;
  for (const auto& st : strata) {
    os << "stratum " << ++n << " [" << st.status << "]\n";
    if (st.conditions.empty())
      os << "  conditions: (generic)\n";
    else {
      os << "  conditions:";
      for (const auto& c : st.conditions) os << " " << c << ";";
      os << "\n";
    }
    os << "  operator: " << st.op.str() << "\n";
    if (st.status == "certified")
      os << "  bracket: " << (tensor_style ? st.table.tensor() : st.table.json()) << "\n";
    for (const Expr& p : st.pending) os << "  pending: " << p.str() << "\n";
  }
  return os.str();
}

}  // namespace jetfrob
