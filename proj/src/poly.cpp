#include "jetfrob/poly.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

namespace jetfrob {

uint64_t mulmod(uint64_t a, uint64_t b) {
  return (uint64_t)((__uint128_t)a * b % kPrime);
}

uint64_t powmod(uint64_t a, uint64_t e) {
  uint64_t r = 1;
  a %= kPrime;
  while (e) {
    if (e & 1) r = mulmod(r, a);
    a = mulmod(a, a);
    e >>= 1;
  }
  return r;
}

uint64_t invmod(uint64_t a) { return powmod(a, kPrime - 2); }

int Monomial::degree() const {
  int d = 0;
  for (auto& [s, e] : e) d += e;
  return d;
}

int Monomial::exponent(SymId s) const {
  for (auto& [t, k] : e)
    if (t == s) return k;
  return 0;
}

Monomial mono_mul(const Monomial& a, const Monomial& b) {
  // exponent lists are kept sorted by symbol id only within one universe's
  // canonical order; we merge by matching ids (order preserved by caller)
  Monomial r;
  size_t i = 0, j = 0;
  // both are sorted by the same strict order; merge by scanning a, inserting b
  // entries at matching ids.  Fallback: collect and re-sort by id-stable order
  // is done by the Poly layer (which knows the universe); here we merge by id
  // equality assuming both inputs came from the same Poly layer ordering.
  std::vector<std::pair<SymId, int>> merged;
  merged.reserve(a.e.size() + b.e.size());
  // we cannot compare order without the universe, so do a map-based merge and
  // let the caller re-sort.  Poly-layer functions always pass through
  // canonicalize_monomial.
  (void)i;
  (void)j;
  merged = a.e;
  for (auto& [s, k] : b.e) {
    bool found = false;
    for (auto& [t, l] : merged)
      if (t == s) {
        l += k;
        found = true;
        break;
      }
    if (!found) merged.push_back({s, k});
  }
  r.e = std::move(merged);
  return r;
}

std::optional<Monomial> mono_div(const Monomial& a, const Monomial& b) {
  Monomial r;
  r.e = a.e;
  for (auto& [s, k] : b.e) {
    bool found = false;
    for (auto& [t, l] : r.e)
      if (t == s) {
        l -= k;
        if (l < 0) return std::nullopt;
        found = true;
        break;
      }
    if (!found) return std::nullopt;
  }
  r.e.erase(std::remove_if(r.e.begin(), r.e.end(), [](auto& p) { return p.second == 0; }),
            r.e.end());
  return r;
}

Monomial mono_gcd(const Monomial& a, const Monomial& b) {
  Monomial r;
  for (auto& [s, k] : a.e) {
    int l = b.exponent(s);
    if (l > 0) r.e.push_back({s, std::min(k, l)});
  }
  return r;
}

static void sort_mono(const Universe& u, Monomial& m) {
  std::sort(m.e.begin(), m.e.end(),
            [&u](auto& x, auto& y) { return u.sym_less(x.first, y.first); });
}

bool mono_less(const Universe& u, const Monomial& a, const Monomial& b) {
  int da = a.degree(), db = b.degree();
  if (da != db) return da < db;
  // lexicographic: inspect symbols in ascending canonical order; the monomial
  // with the higher exponent on the earliest differing symbol is the greater
  size_t i = 0, j = 0;
  while (i < a.e.size() && j < b.e.size()) {
    SymId sa = a.e[i].first, sb = b.e[j].first;
    if (sa == sb) {
      if (a.e[i].second != b.e[j].second) return a.e[i].second < b.e[j].second;
      ++i, ++j;
    } else if (u.sym_less(sa, sb)) {
      return false;  // a has positive exponent on an earlier symbol: a greater
    } else {
      return true;
    }
  }
  if (i < a.e.size()) return false;
  if (j < b.e.size()) return true;
  return false;
}

Poly::Poly(Universe* u, const Rat& c) : u_(u) {
  if (c != 0) terms_.push_back({Monomial{}, c});
}

Poly::Poly(Universe* u, SymId s, int exp) : u_(u) {
  if (exp == 0) {
    terms_.push_back({Monomial{}, Rat(1)});
  } else {
    terms_.push_back({Monomial{{{s, exp}}}, Rat(1)});
  }
}

bool Poly::is_constant() const {
  return terms_.empty() || (terms_.size() == 1 && terms_[0].first.is_one());
}

bool Poly::is_one() const {
  return terms_.size() == 1 && terms_[0].first.is_one() && terms_[0].second == 1;
}

int Poly::total_degree() const {
  int d = 0;
  for (auto& [m, c] : terms_) d = std::max(d, m.degree());
  return d;
}

Poly Poly::from_terms(Universe* u, std::vector<std::pair<Monomial, Rat>> ts) {
  for (auto& [m, c] : ts) sort_mono(*u, m);
  std::sort(ts.begin(), ts.end(), [u](auto& x, auto& y) {
    return mono_less(*u, y.first, x.first);  // descending
  });
  Poly r(u);
  for (auto& [m, c] : ts) {
    if (!r.terms_.empty() && r.terms_.back().first == m) {
      r.terms_.back().second += c;
      if (r.terms_.back().second == 0) r.terms_.pop_back();
    } else if (c != 0) {
      r.terms_.push_back({m, c});
    }
  }
  return r;
}

Poly Poly::operator+(const Poly& o) const {
  Universe* u = u_ ? u_ : o.u_;
  Poly r(u);
  r.terms_.reserve(terms_.size() + o.terms_.size());
  size_t i = 0, j = 0;
  while (i < terms_.size() && j < o.terms_.size()) {
    if (terms_[i].first == o.terms_[j].first) {
      Rat c = terms_[i].second + o.terms_[j].second;
      if (c != 0) r.terms_.push_back({terms_[i].first, c});
      ++i, ++j;
    } else if (mono_less(*u, o.terms_[j].first, terms_[i].first)) {
      r.terms_.push_back(terms_[i++]);
    } else {
      r.terms_.push_back(o.terms_[j++]);
    }
  }
  while (i < terms_.size()) r.terms_.push_back(terms_[i++]);
  while (j < o.terms_.size()) r.terms_.push_back(o.terms_[j++]);
  return r;
}

Poly Poly::operator-() const {
  Poly r = *this;
  for (auto& [m, c] : r.terms_) c = -c;
  return r;
}

Poly Poly::operator-(const Poly& o) const { return *this + (-o); }

Poly Poly::mul_term(const Monomial& m, const Rat& c) const {
  if (c == 0) return Poly(u_);
  Poly r(u_);
  r.terms_.reserve(terms_.size());
  for (auto& [tm, tc] : terms_) {
    Monomial nm = mono_mul(tm, m);
    sort_mono(*u_, nm);
    r.terms_.push_back({std::move(nm), tc * c});
  }
  // multiplying by a fixed monomial preserves the descending order
  return r;
}

Poly Poly::mul_scalar(const Rat& c) const {
  if (c == 0) return Poly(u_);
  Poly r = *this;
  for (auto& [m, co] : r.terms_) co *= c;
  return r;
}

Poly Poly::operator*(const Poly& o) const {
  Universe* u = u_ ? u_ : o.u_;
  if (is_zero() || o.is_zero()) return Poly(u);
  if (o.terms_.size() == 1) return mul_term(o.terms_[0].first, o.terms_[0].second);
  if (terms_.size() == 1) return o.mul_term(terms_[0].first, terms_[0].second);
  std::vector<std::pair<Monomial, Rat>> acc;
  acc.reserve(terms_.size() * o.terms_.size());
  for (auto& [ma, ca] : terms_)
    for (auto& [mb, cb] : o.terms_) acc.push_back({mono_mul(ma, mb), ca * cb});
  return from_terms(u, std::move(acc));
}

Poly Poly::pow(int n) const {
  Poly r(u_, Rat(1));
  Poly b = *this;
  while (n > 0) {
    if (n & 1) r = r * b;
    b = b * b;
    n >>= 1;
  }
  return r;
}

Rat Poly::content() const {
  if (terms_.empty()) return Rat(0);
  mpz_class num_gcd = 0, den_lcm = 1;
  for (auto& [m, c] : terms_) {
    mpz_gcd(num_gcd.get_mpz_t(), num_gcd.get_mpz_t(), c.get_num().get_mpz_t());
    mpz_lcm(den_lcm.get_mpz_t(), den_lcm.get_mpz_t(), c.get_den().get_mpz_t());
  }
  Rat c(num_gcd, den_lcm);
  c.canonicalize();
  if (terms_[0].second < 0) c = -c;
  return c;
}

Monomial Poly::monomial_content() const {
  if (terms_.empty()) return Monomial{};
  Monomial g = terms_[0].first;
  for (size_t i = 1; i < terms_.size() && !g.is_one(); ++i) g = mono_gcd(g, terms_[i].first);
  return g;
}

Poly Poly::divide_monomial(const Monomial& m) const {
  if (m.is_one()) return *this;
  Poly r(u_);
  r.terms_.reserve(terms_.size());
  for (auto& [tm, tc] : terms_) {
    auto q = mono_div(tm, m);
    if (!q) throw std::runtime_error("monomial content division failed");
    r.terms_.push_back({*q, tc});
  }
  return r;
}

std::optional<Poly> Poly::divide_exact(const Poly& d) const {
  if (d.is_zero()) return std::nullopt;
  Universe* u = u_ ? u_ : d.u_;
  Poly r = *this;
  Poly q(u);
  std::vector<std::pair<Monomial, Rat>> qterms;
  int guard = 0;
  while (!r.is_zero()) {
    if (++guard > 200000) return std::nullopt;
    auto mq = mono_div(r.leading_monomial(), d.leading_monomial());
    if (!mq) return std::nullopt;
    Rat cq = r.leading_coeff() / d.leading_coeff();
    sort_mono(*u, *mq);
    qterms.push_back({*mq, cq});
    r = r - d.mul_term(*mq, cq);
  }
  return from_terms(u, std::move(qterms));
}

Poly Poly::partial(SymId s) const {
  std::vector<std::pair<Monomial, Rat>> acc;
  for (auto& [m, c] : terms_) {
    int k = m.exponent(s);
    if (k == 0) continue;
    Monomial nm = m;
    for (auto& [t, e] : nm.e)
      if (t == s) e -= 1;
    nm.e.erase(std::remove_if(nm.e.begin(), nm.e.end(), [](auto& p) { return p.second == 0; }),
               nm.e.end());
    acc.push_back({nm, c * k});
  }
  return from_terms(u_, std::move(acc));
}

int Poly::degree_in(SymId s) const {
  int d = 0;
  for (auto& [m, c] : terms_) d = std::max(d, m.exponent(s));
  return d;
}

Poly Poly::coeff_of(SymId s, int k) const {
  std::vector<std::pair<Monomial, Rat>> acc;
  for (auto& [m, c] : terms_) {
    if (m.exponent(s) != k) continue;
    Monomial nm = m;
    nm.e.erase(std::remove_if(nm.e.begin(), nm.e.end(),
                              [s](auto& p) { return p.first == s; }),
               nm.e.end());
    acc.push_back({nm, c});
  }
  return from_terms(u_, std::move(acc));
}

bool Poly::depends_on(SymId s) const {
  for (auto& [m, c] : terms_)
    if (m.exponent(s) > 0) return true;
  return false;
}

std::vector<SymId> Poly::support() const {
  std::vector<SymId> out;
  for (auto& [m, c] : terms_)
    for (auto& [s, e] : m.e)
      if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  return out;
}

std::pair<Poly, Poly> Poly::substitute(
    const std::function<const std::pair<Poly, Poly>*(SymId)>& repl) const {
  // result accumulated as num/den with den = product of replacement dens used
  Poly num(u_), den(u_, Rat(1));
  for (auto& [m, c] : terms_) {
    Poly tnum(u_, c), tden(u_, Rat(1));
    for (auto& [s, e] : m.e) {
      const std::pair<Poly, Poly>* r = repl(s);
      if (!r) {
        tnum = tnum * Poly(u_, s, e);
      } else {
        tnum = tnum * r->first.pow(e);
        tden = tden * r->second.pow(e);
      }
    }
    // num/den + tnum/tden
    num = num * tden + tnum * den;
    den = den * tden;
  }
  return {num, den};
}

uint64_t Poly::eval_mod(const std::function<uint64_t(SymId)>& point) const {
  uint64_t acc = 0;
  for (auto& [m, c] : terms_) {
    uint64_t t = mulmod(mpz_fdiv_ui(c.get_num().get_mpz_t(), kPrime),
                        invmod(mpz_fdiv_ui(c.get_den().get_mpz_t(), kPrime)));
    bool neg = c < 0;
    if (neg) {
      // mpz_fdiv_ui returns the value of |...| reduction with floor semantics;
      // for negative numerators floor-mod already yields the correct residue
    }
    for (auto& [s, e] : m.e) t = mulmod(t, powmod(point(s) % kPrime, e));
    acc = (acc + t) % kPrime;
  }
  return acc;
}

std::string Poly::str() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (auto& [m, c] : terms_) {
    Rat a = c;
    if (first) {
      if (a < 0) {
        os << "-";
        a = -a;
      }
    } else {
      os << (a < 0 ? " - " : " + ");
      if (a < 0) a = -a;
    }
    first = false;
    bool coeff_printed = false;
    if (m.is_one() || a != 1) {
      os << a.get_str();
      coeff_printed = true;
    }
    bool firstf = !coeff_printed;
    for (auto& [s, e] : m.e) {
      if (!firstf || coeff_printed) os << "*";
      firstf = false;
      os << u_->info(s).name;
      if (e > 1) os << "^" << e;
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// gcd: primitive PRS in a chosen main variable, recursive in the coefficients
// ---------------------------------------------------------------------------

namespace {

// view p as univariate in s: degree -> coefficient poly
std::map<int, Poly> as_univariate(const Poly& p, SymId s) {
  std::map<int, Poly> out;
  for (int k = 0; k <= p.degree_in(s); ++k) {
    Poly c = p.coeff_of(s, k);
    if (!c.is_zero()) out[k] = c;
  }
  return out;
}

Poly gcd_rec(const Poly& a, const Poly& b, int budget, int depth);

// content of p w.r.t. main variable s = recursive gcd of the coefficients
Poly content_in(const Poly& p, SymId s, int budget, int depth) {
  Poly g(p.universe());
  for (auto& [k, c] : as_univariate(p, s)) {
    g = gcd_rec(g, c, budget, depth + 1);
    if (g.is_one()) break;
  }
  return g;
}

Poly make_primitive(const Poly& p) {
  if (p.is_zero()) return p;
  Rat c = p.content();
  return p.mul_scalar(1 / c);
}

// pseudo-remainder of a by b in variable s
Poly prem(const Poly& a, const Poly& b, SymId s) {
  Universe* u = a.universe();
  int db = b.degree_in(s);
  Poly lb = b.coeff_of(s, db);
  Poly r = a;
  int guard = 0;
  while (!r.is_zero() && r.degree_in(s) >= db) {
    if (++guard > 2000) throw std::runtime_error("prem: no convergence");
    int dr = r.degree_in(s);
    Poly lr = r.coeff_of(s, dr);
    r = r * lb - b * lr * Poly(u, s, dr - db);
  }
  return r;
}

Poly gcd_rec(const Poly& a, const Poly& b, int budget, int depth) {
  Universe* u = a.universe() ? a.universe() : b.universe();
  if (a.is_zero()) return make_primitive(b);
  if (b.is_zero()) return make_primitive(a);
  if (a.is_constant() || b.is_constant()) return Poly(u, Rat(1));
  if (a.n_terms() > budget || b.n_terms() > budget || depth > 12) return Poly(u, Rat(1));
  // main variable: smallest max-degree among shared symbols; if no shared
  // symbol, gcd is constant
  std::vector<SymId> sa = a.support();
  SymId best = kNoSym;
  int bestd = 1 << 30;
  for (SymId s : sa) {
    if (!b.depends_on(s)) continue;
    int d = std::max(a.degree_in(s), b.degree_in(s));
    if (d < bestd) {
      bestd = d;
      best = s;
    }
  }
  if (best == kNoSym) return Poly(u, Rat(1));
  SymId s = best;
  Poly ca = content_in(a, s, budget, depth);
  Poly cb = content_in(b, s, budget, depth);
  Poly pa = *a.divide_exact(ca);
  Poly pb = *b.divide_exact(cb);
  Poly cg = gcd_rec(ca, cb, budget, depth + 1);
  // primitive PRS
  Poly f = pa, g = pb;
  if (f.degree_in(s) < g.degree_in(s)) std::swap(f, g);
  int guard = 0;
  while (true) {
    if (++guard > 60) return cg;  // give up: gcd contributes content only
    Poly r = prem(f, g, s);
    if (r.is_zero()) break;
    if (r.n_terms() > 4 * budget) return cg;
    if (r.degree_in(s) == 0) return cg;  // coprime in s
    // primitive part w.r.t. s
    Poly cr = content_in(r, s, budget, depth);
    f = g;
    g = *r.divide_exact(cr);
  }
  Poly cgp = content_in(g, s, budget, depth);
  Poly pg = *g.divide_exact(cgp);
  return make_primitive(cg * pg);
}

}  // namespace

Poly poly_gcd(const Poly& a, const Poly& b, int term_budget) {
  return gcd_rec(a, b, term_budget, 0);
}

}  // namespace jetfrob
