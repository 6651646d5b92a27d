#include "jetfrob/liouville.hpp"

#include <algorithm>
#include <stdexcept>

namespace jetfrob {

std::vector<std::vector<Rat>> rational_inverse(const std::vector<std::vector<Rat>>& M) {
  int n = (int)M.size();
  std::vector<std::vector<Rat>> A = M, I(n, std::vector<Rat>(n, 0));
  for (int i = 0; i < n; ++i) I[i][i] = 1;
  for (int c = 0; c < n; ++c) {
    int piv = -1;
    for (int r = c; r < n; ++r)
      if (A[r][c] != 0) {
        piv = r;
        break;
      }
    if (piv < 0) throw std::runtime_error("singular matrix");
    std::swap(A[c], A[piv]);
    std::swap(I[c], I[piv]);
    Rat d = A[c][c];
    for (int j = 0; j < n; ++j) {
      A[c][j] /= d;
      I[c][j] /= d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == c || A[r][c] == 0) continue;
      Rat f = A[r][c];
      for (int j = 0; j < n; ++j) {
        A[r][j] -= f * A[c][j];
        I[r][j] -= f * I[c][j];
      }
    }
  }
  return I;
}

LagrangianModel LagrangianModel::make(Universe* u, std::vector<int> deps,
                                      std::vector<std::vector<Rat>> kappa, Expr H) {
  int n = (int)deps.size();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (kappa[i][j] != kappa[j][i]) throw std::runtime_error("kappa must be symmetric");
  // gradient dH/du^i (chain rule through atoms; H depends on fibre only)
  std::vector<Expr> grad(n, Expr(u));
  for (int i = 0; i < n; ++i)
    for (auto& [key, c] : jet_partials(H, {deps[i]})) {
      if (key.second != std::vector<int>(u->n_independents(), 0))
        throw std::runtime_error("interaction term may depend on the fibre only");
      grad[i] = grad[i] + c;
    }
  auto ki = rational_inverse(kappa);
  std::vector<Expr> F(n, Expr(u));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) F[i] = F[i] - grad[j].mul_scalar(ki[i][j]);
  LagrangianModel m;
  m.u = u;
  m.deps = deps;
  m.kappa = std::move(kappa);
  m.H = H;
  m.sys = SystemModel::hyperbolic(deps, F);
  return m;
}

Expr LagrangianModel::lagrangian() const {
  Expr L = -H;
  int n = (int)deps.size();
  std::vector<int> sx(u->n_independents(), 0), sy(u->n_independents(), 0);
  sx[0] = 1;
  sy[1] = 1;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      L = L - (Expr(u, u->jet(deps[i], sx)) * Expr(u, u->jet(deps[j], sy)))
                  .mul_scalar(kappa[i][j] / 2);
  return L;
}

Section momenta(const LagrangianModel& model) {
  Universe* u = model.u;
  int n = (int)model.deps.size();
  std::vector<int> sx(u->n_independents(), 0);
  sx[0] = 1;
  Section m;
  m.deps = model.deps;
  for (int i = 0; i < n; ++i) {
    Expr mi(u);
    for (int j = 0; j < n; ++j)
      mi = mi - Expr(u, u->jet(model.deps[j], sx)).mul_scalar(model.kappa[i][j] / 2);
    m.comps.push_back(mi);
  }
  return m;
}

namespace {

bool pure_x_jet(const SymbolInfo& si) {
  if (si.kind != SymKind::Jet) return false;
  for (int d = 1; d < (int)si.sigma.size(); ++d)
    if (si.sigma[d] != 0) return false;
  return true;
}

}  // namespace

WDict make_wdict(Universe* u, const std::vector<Expr>& w_in_u, const std::string& name) {
  WDict d;
  d.w_in_u = w_in_u;
  // dependents covered by the dictionary: everything the integrals touch
  for (const Expr& w : w_in_u)
    for (SymId s : w.support()) {
      const SymbolInfo& si = u->info(s);
      if (si.kind == SymKind::Jet &&
          std::find(d.udeps.begin(), d.udeps.end(), si.idx) == d.udeps.end())
        d.udeps.push_back(si.idx);
    }
  std::sort(d.udeps.begin(), d.udeps.end());
  for (size_t i = 0; i < w_in_u.size(); ++i) {
    std::string nm = w_in_u.size() == 1 ? name : name + std::to_string(i + 1);
    int found = u->find_dependent(nm);
    d.wdeps.push_back(found >= 0 ? found : u->add_dependent(nm, /*x_only=*/true));
    int top = -1;
    for (SymId s : w_in_u[i].support()) {
      const SymbolInfo& si = u->info(s);
      if (pure_x_jet(si)) top = std::max(top, si.order);
    }
    if (top < 0) throw std::runtime_error("integral has no pure-x jet; cannot build dictionary");
    d.lead_order.push_back(top);
  }
  return d;
}

Expr reexpress(const Expr& e, const WDict& dict, bool* ok) {
  Universe* u = e.universe();
  Expr cur = e;
  if (ok) *ok = true;
  int n = (int)dict.udeps.size();
  int min_lead = *std::min_element(dict.lead_order.begin(), dict.lead_order.end());
  // top order present in the input; substitution never raises the order
  int nmax = -1;
  for (SymId s : cur.support()) {
    const SymbolInfo& si = u->info(s);
    if (pure_x_jet(si) &&
        std::find(dict.udeps.begin(), dict.udeps.end(), si.idx) != dict.udeps.end())
      nmax = std::max(nmax, si.order);
  }
  for (int N = nmax; N >= min_lead; --N) {
    std::vector<SymId> jets(n);
    std::vector<int> sN(u->n_independents(), 0);
    sN[0] = N;
    for (int j = 0; j < n; ++j) jets[j] = u->jet(dict.udeps[j], sN);
    auto has_top_jet = [&](const Expr& e2) {
      for (SymId s : e2.support())
        if (std::find(jets.begin(), jets.end(), s) != jets.end()) return true;
      return false;
    };
    // equations W_{i,kx} - D^k(w_i) = 0 available at this order
    std::vector<Expr> eqs;
    for (size_t i = 0; i < dict.w_in_u.size(); ++i) {
      int k = N - dict.lead_order[i];
      if (k < 0) continue;
      std::vector<int> sk(u->n_independents(), 0);
      sk[0] = k;
      eqs.push_back(Expr(u, u->jet(dict.wdeps[i], sk)) -
                    total_derivative_n(dict.w_in_u[i], 0, k));
    }
    // sequentially solve each equation for a top-order jet it is linear in,
    // substituting already-solved jets first (handles nonlinear integrals
    // such as w1 + w2^2/4 whose lead becomes linear after the w2 jet is known)
    std::map<SymId, Expr> solved;
    auto apply_solved = [&](const Expr& e2) {
      return e2.substitute([&](SymId s) -> const Expr* {
        auto it = solved.find(s);
        return it == solved.end() ? nullptr : &it->second;
      });
    };
    bool progress = true;
    std::vector<bool> used(eqs.size(), false);
    while (progress) {
      progress = false;
      for (size_t i = 0; i < eqs.size(); ++i) {
        if (used[i]) continue;
        Expr eq = apply_solved(eqs[i]);
        for (int j = 0; j < n; ++j) {
          if (solved.count(jets[j])) continue;
          Expr c = eq.partial(jets[j]);
          if (c.is_zero() || has_top_jet(c)) continue;  // absent or nonlinear
          Expr rest = eq - c * Expr(u, jets[j]);
          solved.emplace(jets[j], -(rest / c));
          used[i] = true;
          progress = true;
          break;
        }
      }
    }
    for (size_t pass = 0; pass < solved.size() && has_top_jet(cur); ++pass)
      cur = apply_solved(cur);
  }
  // success iff no jets of the original dependents remain
  for (SymId s : cur.support()) {
    const SymbolInfo& si = u->info(s);
    if (si.kind == SymKind::Jet &&
        std::find(dict.wdeps.begin(), dict.wdeps.end(), si.idx) == dict.wdeps.end()) {
      if (ok) *ok = false;
      return cur;
    }
  }
  return cur;
}

TDOperator reexpress(const TDOperator& A, const WDict& dict, bool* ok) {
  bool all = true;
  TDOperator r = A.map_coeffs([&](const Expr& c) {
    bool o = true;
    Expr e = reexpress(c, dict, &o);
    all = all && o;
    return e;
  });
  if (ok) *ok = all;
  return r;
}

Expr unexpress(const Expr& e, const WDict& dict) {
  Section ch;
  ch.deps = dict.wdeps;
  ch.comps = dict.w_in_u;
  return substitute_jets(e, ch);
}

TDOperator square_operator(const std::vector<Expr>& w, const LagrangianModel& model,
                           const std::vector<Rat>& col_rescale) {
  Universe* u = model.u;
  int n = (int)model.deps.size();
  // auxiliary momenta dependents a_i (x-jets only)
  std::vector<int> adeps;
  for (int i = 0; i < n; ++i) {
    std::string nm = (n == 1) ? "@m" : "@m" + std::to_string(i + 1);
    int found = u->find_dependent(nm);
    adeps.push_back(found >= 0 ? found : u->add_dependent(nm, true));
  }
  // u^j_{(k+1)x} = sum_i (-2 kappa^{-1})_{ji} a^i_{kx}
  auto ki = rational_inverse(model.kappa);
  Section w_in_a;
  w_in_a.deps = adeps;  // placeholder; comps filled below
  std::vector<Expr> comps;
  for (const Expr& wi : w) {
    Expr cur = wi;
    for (int guard = 0; guard < 200; ++guard) {
      SymId top = kNoSym;
      int ord = 0, dep = -1;
      for (SymId s : cur.support()) {
        const SymbolInfo& si = u->info(s);
        if (si.kind != SymKind::Jet) continue;
        auto it = std::find(model.deps.begin(), model.deps.end(), si.idx);
        if (it == model.deps.end()) continue;
        if (si.order == 0)
          throw std::runtime_error("integral depends on the bare fibre variable; "
                                   "not expressible in the momenta");
        if (si.order > ord) {
          top = s;
          ord = si.order;
          dep = (int)(it - model.deps.begin());
        }
      }
      if (top == kNoSym) break;
      std::vector<int> sk(u->n_independents(), 0);
      sk[0] = ord - 1;
      Expr repl(u);
      for (int i = 0; i < n; ++i)
        repl = repl + Expr(u, u->jet(adeps[i], sk)).mul_scalar(ki[dep][i] * Rat(-2));
      cur = cur.substitute([&](SymId s) -> const Expr* { return s == top ? &repl : nullptr; });
    }
    comps.push_back(cur);
  }
  Section ws{adeps, comps};
  TDOperator box = linearize(ws, adeps).adjoint();
  // back to u-jets: a_i = m_i[u]
  Section m = momenta(model);
  Section back{adeps, m.comps};
  box = substitute_jets(box, back);
  if (!col_rescale.empty()) {
    TDOperator D(u, box.cols(), box.cols(), box.direction());
    for (int i = 0; i < box.cols(); ++i) D.set_coeff(i, i, 0, Expr(u, col_rescale.at(i)));
    box = box.compose(D);
  }
  return box;
}

Section noether_symmetry(const TDOperator& square, const Expr& H_in_w, const WDict& dict,
                         const LagrangianModel& model) {
  Section grad = euler(Density{H_in_w, 0}, dict.wdeps);
  std::vector<Expr> g;
  for (auto& c : grad.comps) g.push_back(unexpress(c, dict));
  Section phi;
  phi.deps = model.deps;
  phi.comps = square.apply(g);
  return phi;
}

TDOperator hamiltonian_Ak(const TDOperator& square, const LagrangianModel& model) {
  // The first structure for the modified hierarchy is the canonical momentum
  // operator -1/2*kappa*D_x, i.e. the linearization of m itself (skew since
  // kappa is symmetric and m is linear in u_x).
  Section m = momenta(model);
  TDOperator lm = linearize(m, model.deps);
  return square.adjoint().compose(lm).compose(square);
}

SquareBracketResult square_bracket(const TDOperator& square, const TDOperator& Ak_in_u,
                                   const WDict& dict, const LagrangianModel& model,
                                   const std::vector<Rat>& col_rescale, bool probabilistic,
                                   int trials, uint64_t seed) {
  SquareBracketResult out;
  bool ok = true;
  TDOperator Akw = reexpress(Ak_in_u, dict, &ok);
  if (!ok) {
    out.message = "Hamiltonian operator is not expressible in the integral jets";
    return out;
  }
  out.table = dogma_bracket(Akw, dict.wdeps);
  TDOperator certop = square;
  if (!col_rescale.empty()) {
    out.table = out.table.rescale_components(col_rescale);
    TDOperator D(model.u, square.cols(), square.cols(), square.direction());
    for (int i = 0; i < square.cols(); ++i)
      D.set_coeff(i, i, 0, Expr(model.u, col_rescale.at(i)));
    certop = square.compose(D);
  }
  // cross-check the defining identity for the operator itself, on the equation
  BracketTable back = out.table.map_coeffs([&](const Expr& c) { return unexpress(c, dict); });
  CoveringContext ctx = CoveringContext::make(model.u, square.cols());
  out.residual = certify_frobenius(certop, back, ctx, &model.sys);
  for (auto& c : out.residual.comps) {
    bool zero = probabilistic ? c.is_zero_probabilistic(trials, ++seed) : c.is_zero();
    if (!zero) {
      out.message = "cross-check failed: bracket does not certify against the operator";
      return out;
    }
  }
  out.ok = true;
  return out;
}

OpEqResult op_eq_residual(const Expr& w_scalar, const TDOperator& box_column,
                          const WDict& dict, const LagrangianModel& model) {
  OpEqResult out;
  Section w1;
  w1.deps = model.deps;
  w1.comps = {w_scalar};
  TDOperator lw = linearize(w1, model.deps);
  TDOperator comp = lw.compose(box_column);
  bool ok = true;
  TDOperator rhs = comp.map_coeffs([&](const Expr& c) {
    bool o = true;
    Expr r = reexpress(model.sys.reduce(c), dict, &o);
    if (!o && ok) {
      ok = false;
      out.offending = c;
    }
    return o ? r : c;
  });
  if (!ok) {
    out.message = "coefficient is not a function of x and the integral jets";
    return out;
  }
  out.rhs = rhs;
  out.ok = true;
  return out;
}

}  // namespace jetfrob
