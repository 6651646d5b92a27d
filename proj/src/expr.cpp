#include "jetfrob/expr.hpp"

#include <stdexcept>

namespace jetfrob {

namespace {
uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

uint64_t EvalPoint::operator()(SymId s) const {
  // nonzero values in [1, kPrime-1]
  return splitmix64(seed * 0x9e3779b97f4a7c15ULL + (uint64_t)(s + 1)) % (kPrime - 1) + 1;
}

Expr Expr::from_poly(Poly p) {
  Expr e;
  e.num_ = std::move(p);
  e.den_ = Poly(e.num_.universe(), Rat(1));
  return e;
}

Expr::Expr(Poly num, Poly den, int term_budget) : num_(std::move(num)), den_(std::move(den)) {
  Universe* u = num_.universe() ? num_.universe() : den_.universe();
  if (den_.is_zero()) throw std::runtime_error("division by identically-zero denominator");
  if (num_.is_zero()) {
    den_ = Poly(u, Rat(1));
    return;
  }
  // strip common monomial content
  Monomial mc = mono_gcd(num_.monomial_content(), den_.monomial_content());
  if (!mc.is_one()) {
    num_ = num_.divide_monomial(mc);
    den_ = den_.divide_monomial(mc);
  }
  // rational content: denominator primitive with positive leading coefficient
  Rat cd = den_.content();
  if (cd != 1) {
    den_ = den_.mul_scalar(1 / cd);
    num_ = num_.mul_scalar(1 / cd);
  }
  if (den_.is_one()) return;
  // gcd reduction under the term budget
  if (num_.n_terms() <= term_budget && den_.n_terms() <= term_budget) {
    Poly g = poly_gcd(num_, den_, term_budget);
    if (!g.is_constant()) {
      auto qn = num_.divide_exact(g);
      auto qd = den_.divide_exact(g);
      if (qn && qd) {
        num_ = *qn;
        den_ = *qd;
        Rat c2 = den_.content();
        if (c2 != 1) {
          den_ = den_.mul_scalar(1 / c2);
          num_ = num_.mul_scalar(1 / c2);
        }
      }
    }
  }
}

std::optional<Rat> Expr::as_rational() const {
  if (!num_.is_constant() || !den_.is_constant()) return std::nullopt;
  if (num_.is_zero()) return Rat(0);
  return num_.leading_coeff() / den_.leading_coeff();
}

Expr Expr::operator+(const Expr& o) const {
  if (is_zero()) return o;
  if (o.is_zero()) return *this;
  if (den_ == o.den_) return Expr(num_ + o.num_, den_);
  return Expr(num_ * o.den_ + o.num_ * den_, den_ * o.den_);
}

Expr Expr::operator-(const Expr& o) const { return *this + (-o); }

Expr Expr::operator-() const {
  Expr r = *this;
  r.num_ = -r.num_;
  return r;
}

Expr Expr::operator*(const Expr& o) const {
  Universe* u = universe() ? universe() : o.universe();
  if (is_zero() || o.is_zero()) return Expr(u);
  return Expr(num_ * o.num_, den_ * o.den_);
}

Expr Expr::operator/(const Expr& o) const {
  if (o.is_zero()) throw std::runtime_error("division by identically-zero denominator");
  return Expr(num_ * o.den_, den_ * o.num_);
}

Expr Expr::mul_scalar(const Rat& c) const {
  Universe* u = universe();
  if (c == 0 || is_zero()) return Expr(u);
  Expr r = *this;
  r.num_ = r.num_.mul_scalar(c);
  return r;
}

Expr Expr::pow(int n) const {
  Universe* u = universe();
  if (n == 0) return Expr(u, Rat(1));
  if (n < 0) {
    if (is_zero()) throw std::runtime_error("zero to negative power");
    return Expr(den_.pow(-n), num_.pow(-n));
  }
  return Expr(num_.pow(n), den_.pow(n));
}

bool Expr::equals(const Expr& o) const {
  if (num_ == o.num_ && den_ == o.den_) return true;
  return (num_ * o.den_ - o.num_ * den_).is_zero();
}

bool Expr::is_zero_probabilistic(int trials, uint64_t seed) const {
  if (num_.is_zero()) return true;
  int done = 0;
  uint64_t salt = seed;
  int attempts = 0;
  while (done < trials) {
    if (++attempts > 20 * trials + 100)
      throw std::runtime_error("probabilistic zero test: denominator vanishes persistently");
    EvalPoint pt(splitmix64(salt++ + 0x5bd1e995ULL));
    uint64_t dv = den_.eval_mod(pt);
    if (dv == 0) continue;
    if (num_.eval_mod(pt) != 0) return false;
    ++done;
  }
  return true;
}

bool Expr::equals_probabilistic(const Expr& o, int trials, uint64_t seed) const {
  if (num_ == o.num_ && den_ == o.den_) return true;
  int done = 0;
  uint64_t salt = seed;
  int attempts = 0;
  while (done < trials) {
    if (++attempts > 20 * trials + 100)
      throw std::runtime_error("probabilistic equality: denominator vanishes persistently");
    EvalPoint pt(splitmix64(salt++ + 0x5bd1e995ULL));
    uint64_t d1 = den_.eval_mod(pt), d2 = o.den_.eval_mod(pt);
    if (d1 == 0 || d2 == 0) continue;
    uint64_t v1 = mulmod(num_.eval_mod(pt), invmod(d1));
    uint64_t v2 = mulmod(o.num_.eval_mod(pt), invmod(d2));
    if (v1 != v2) return false;
    ++done;
  }
  return true;
}

Expr Expr::partial(SymId s) const {
  if (!num_.depends_on(s) && !den_.depends_on(s)) return Expr(universe());
  if (den_.is_one()) return Expr::from_poly(num_.partial(s));
  // (n/d)' = (n'd - nd')/d^2
  return Expr(num_.partial(s) * den_ - num_ * den_.partial(s), den_ * den_);
}

bool Expr::depends_on(SymId s) const { return num_.depends_on(s) || den_.depends_on(s); }

std::vector<SymId> Expr::support() const {
  std::vector<SymId> out = num_.support();
  for (SymId s : den_.support())
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  return out;
}

int Expr::max_jet_order(int dep) const {
  Universe* u = universe();
  int best = -1;
  for (SymId s : support()) {
    const SymbolInfo& si = u->info(s);
    if (si.kind != SymKind::Jet) continue;
    if (dep >= 0 && si.idx != dep) continue;
    best = std::max(best, si.order);
  }
  return best;
}

Expr Expr::substitute(const std::function<const Expr*(SymId)>& repl) const {
  Universe* u = universe();
  // cache of (num, den) pairs for the poly-level substitution
  std::map<SymId, std::pair<Poly, Poly>> cache;
  auto poly_repl = [&](SymId s) -> const std::pair<Poly, Poly>* {
    auto it = cache.find(s);
    if (it != cache.end()) return it->second.first.universe() ? &it->second : nullptr;
    const Expr* e = repl(s);
    if (!e) {
      cache[s] = {Poly(), Poly()};
      return nullptr;
    }
    cache[s] = {e->num(), e->den()};
    return &cache[s];
  };
  auto [nn, nd] = num_.substitute(poly_repl);
  auto [dn, dd] = den_.substitute(poly_repl);
  (void)u;
  // (nn/nd) / (dn/dd) = nn*dd / (nd*dn)
  return Expr(nn * dd, nd * dn);
}

std::optional<uint64_t> Expr::eval_mod(const std::function<uint64_t(SymId)>& point) const {
  uint64_t d = den_.eval_mod(point);
  if (d == 0) return std::nullopt;
  return mulmod(num_.eval_mod(point), invmod(d));
}

std::string Expr::str() const {
  if (den_.is_one()) return num_.str();
  std::string ns = num_.n_terms() > 1 ? "(" + num_.str() + ")" : num_.str();
  return ns + "/(" + den_.str() + ")";
}

}  // namespace jetfrob
