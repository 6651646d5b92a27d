#include "jetfrob/tdop.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include "jetfrob/parse.hpp"

namespace jetfrob {

TDOperator::TDOperator(Universe* u, int rows, int cols, int direction)
    : u_(u), rows_(rows), cols_(cols), dir_(direction), e_(rows * cols) {}

TDOperator TDOperator::identity(Universe* u, int n, int direction) {
  TDOperator a(u, n, n, direction);
  for (int i = 0; i < n; ++i) a.set_coeff(i, i, 0, Expr(u, Rat(1)));
  return a;
}

Expr TDOperator::coeff(int i, int j, int k) const {
  for (auto& [o, c] : entry(i, j))
    if (o == k) return c;
  return Expr(u_);
}

void TDOperator::set_coeff(int i, int j, int k, const Expr& c) {
  Entry& en = e_[i * cols_ + j];
  for (auto it = en.begin(); it != en.end(); ++it)
    if (it->first == k) {
      if (c.is_zero())
        en.erase(it);
      else
        it->second = c;
      return;
    }
  if (c.is_zero()) return;
  en.push_back({k, c});
  std::sort(en.begin(), en.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
}

void TDOperator::add_coeff(int i, int j, int k, const Expr& c) {
  set_coeff(i, j, k, coeff(i, j, k) + c);
}

int TDOperator::max_order() const {
  int m = 0;
  for (auto& en : e_)
    for (auto& [o, c] : en) m = std::max(m, o);
  return m;
}

bool TDOperator::is_zero() const {
  for (auto& en : e_)
    if (!en.empty()) return false;
  return true;
}

bool TDOperator::zero_order() const { return max_order() == 0; }

TDOperator TDOperator::operator+(const TDOperator& o) const {
  if (rows_ != o.rows_ || cols_ != o.cols_ || dir_ != o.dir_)
    throw std::runtime_error("operator sum: shape mismatch");
  TDOperator r = *this;
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j)
      for (auto& [k, c] : o.entry(i, j)) r.add_coeff(i, j, k, c);
  return r;
}

TDOperator TDOperator::operator-(const TDOperator& o) const { return *this + (-o); }

TDOperator TDOperator::operator-() const { return mul_scalar(Rat(-1)); }

TDOperator TDOperator::scale(const Expr& c) const {
  return map_coeffs([&](const Expr& a) { return c * a; });
}

TDOperator TDOperator::mul_scalar(const Rat& c) const {
  return map_coeffs([&](const Expr& a) { return a.mul_scalar(c); });
}

TDOperator TDOperator::map_coeffs(const std::function<Expr(const Expr&)>& f) const {
  TDOperator r(u_, rows_, cols_, dir_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j)
      for (auto& [k, c] : entry(i, j)) r.add_coeff(i, j, k, f(c));
  return r;
}

std::vector<Expr> TDOperator::apply(const std::vector<Expr>& s) const {
  if ((int)s.size() != cols_) throw std::runtime_error("operator apply: arity mismatch");
  std::vector<Expr> r(rows_, Expr(u_));
  for (int j = 0; j < cols_; ++j) {
    // derivative ladder shared across rows
    std::map<int, Expr> dcache;
    dcache[0] = s[j];
    auto dpow = [&](int k) -> const Expr& {
      int have = dcache.rbegin()->first;
      while (have < k) {
        dcache[have + 1] = total_derivative(dcache[have], dir_);
        ++have;
      }
      return dcache[k];
    };
    for (int i = 0; i < rows_; ++i)
      for (auto& [k, c] : entry(i, j)) r[i] = r[i] + c * dpow(k);
  }
  return r;
}

Section TDOperator::apply(const Section& s) const {
  Section r;
  r.comps = apply(s.comps);
  if (rows_ == cols_)
    r.deps = s.deps;
  else {
    r.deps.resize(rows_);
    for (int i = 0; i < rows_; ++i) r.deps[i] = i;
  }
  return r;
}

namespace {
Rat binom(int n, int k) {
  Rat r(1);
  for (int i = 0; i < k; ++i) r *= Rat(n - i) / Rat(i + 1);
  return r;
}
}  // namespace

TDOperator TDOperator::compose(const TDOperator& B) const {
  if (cols_ != B.rows_ || dir_ != B.dir_)
    throw std::runtime_error("operator compose: shape or direction mismatch");
  TDOperator r(u_, rows_, B.cols_, dir_);
  for (int i = 0; i < rows_; ++i)
    for (int l = 0; l < cols_; ++l) {
      const Entry& ail = entry(i, l);
      if (ail.empty()) continue;
      for (int j = 0; j < B.cols_; ++j)
        for (auto& [kb, b] : B.entry(l, j)) {
          // D^k o (b D^kb) = sum_m binom(k,m) D^m(b) D^{k-m+kb}
          std::map<int, Expr> db;
          db[0] = b;
          for (auto& [ka, a] : ail) {
            int have = db.rbegin()->first;
            while (have < ka) {
              db[have + 1] = total_derivative(db[have], dir_);
              ++have;
            }
            for (int m = 0; m <= ka; ++m)
              r.add_coeff(i, j, ka - m + kb, (a * db[m]).mul_scalar(binom(ka, m)));
          }
        }
    }
  return r;
}

TDOperator TDOperator::adjoint() const {
  TDOperator r(u_, cols_, rows_, dir_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j)
      for (auto& [k, c] : entry(i, j)) {
        // (-1)^k D^k o c = sum_m (-1)^k binom(k,m) D^m(c) D^{k-m}
        Expr dc = c;
        for (int m = 0; m <= k; ++m) {
          Rat sgn = (k % 2 == 0) ? binom(k, m) : -binom(k, m);
          r.add_coeff(j, i, k - m, dc.mul_scalar(sgn));
          if (m < k) dc = total_derivative(dc, dir_);
        }
      }
  return r;
}

TDOperator TDOperator::transpose_entries() const {
  TDOperator r(u_, cols_, rows_, dir_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j)
      for (auto& [k, c] : entry(i, j)) r.add_coeff(j, i, k, c);
  return r;
}

bool TDOperator::equals(const TDOperator& o) const {
  if (rows_ != o.rows_ || cols_ != o.cols_) return false;
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) {
      int top = std::max(entry(i, j).empty() ? 0 : entry(i, j).back().first,
                         o.entry(i, j).empty() ? 0 : o.entry(i, j).back().first);
      for (int k = 0; k <= top; ++k)
        if (!coeff(i, j, k).equals(o.coeff(i, j, k))) return false;
    }
  return true;
}

bool TDOperator::equals_probabilistic(const TDOperator& o, int trials, uint64_t seed) const {
  if (rows_ != o.rows_ || cols_ != o.cols_) return false;
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) {
      int top = std::max(entry(i, j).empty() ? 0 : entry(i, j).back().first,
                         o.entry(i, j).empty() ? 0 : o.entry(i, j).back().first);
      for (int k = 0; k <= top; ++k)
        if (!coeff(i, j, k).equals_probabilistic(o.coeff(i, j, k), trials,
                                                 seed + 7919 * (i * 31 + j * 17 + k)))
          return false;
    }
  return true;
}

std::string TDOperator::entry_str(int i, int j) const {
  const Entry& en = entry(i, j);
  if (en.empty()) return "0";
  std::string s;
  for (auto it = en.rbegin(); it != en.rend(); ++it) {
    auto& [k, c] = *it;
    std::string cs = c.str();
    std::string part;
    if (k == 0)
      part = cs;
    else {
      std::string d = (k == 1) ? "Dx" : "Dx^" + std::to_string(k);
      if (cs == "1")
        part = d;
      else if (cs == "-1")
        part = "-" + d;
      else {
        bool atomic = cs.find_first_of("+-") == std::string::npos ||
                      (cs[0] == '-' && cs.find_first_of("+-", 1) == std::string::npos);
        part = (atomic ? cs : "(" + cs + ")") + "*" + d;
      }
    }
    if (s.empty())
      s = part;
    else if (!part.empty() && part[0] == '-')
      s += " - " + part.substr(1);
    else
      s += " + " + part;
  }
  return s;
}

std::string TDOperator::str() const {
  if (rows_ == 1 && cols_ == 1) return entry_str(0, 0);
  std::string s = "[";
  for (int i = 0; i < rows_; ++i) {
    s += (i ? ", [" : "[");
    for (int j = 0; j < cols_; ++j) s += (j ? ", " : "") + entry_str(i, j);
    s += "]";
  }
  return s + "]";
}

TDOperator parse_operator(Universe* u, const std::string& text, int direction) {
  // the formal letter Dx is interned as a reserved parameter; entries are
  // parsed as expressions polynomial in it and split by Dx-degree
  SymId dsym = u->lookup("Dx");
  if (dsym == kNoSym) dsym = u->parameter_sym(u->add_parameter("Dx"));

  // split "[[a, b], [c]]" into entry strings
  std::vector<std::vector<std::string>> cells;
  size_t pos = text.find_first_not_of(" \t\n");
  if (pos == std::string::npos) throw std::runtime_error("empty operator text");
  if (text[pos] != '[') {
    cells.push_back({text});
  } else {
    int depth = 0;
    std::string cur;
    std::vector<std::string> row;
    bool in_row = false;
    for (size_t q = pos; q < text.size(); ++q) {
      char ch = text[q];
      if (ch == '[') {
        ++depth;
        if (depth == 1) continue;
        if (depth == 2) {
          in_row = true;
          cur.clear();
          row.clear();
          continue;
        }
      }
      if (ch == ']') {
        --depth;
        if (depth == 1 && in_row) {
          row.push_back(cur);
          cells.push_back(row);
          in_row = false;
          continue;
        }
        if (depth < 0) throw std::runtime_error("unbalanced brackets in operator text");
        if (depth == 0) break;
      }
      if (ch == ',' && depth == 2) {
        row.push_back(cur);
        cur.clear();
        continue;
      }
      if (depth >= 2) cur += ch;
    }
    if (cells.empty()) {
      // single bracket level: a row vector [a, b] is not accepted; treat
      // "[a]" as 1x1
      throw std::runtime_error("operator text must be [[...],[...]] or a bare entry");
    }
  }

  int rows = (int)cells.size(), cols = (int)cells[0].size();
  for (auto& r : cells)
    if ((int)r.size() != cols) throw std::runtime_error("ragged operator matrix");
  TDOperator A(u, rows, cols, direction);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      Expr e = parse_expr(u, cells[i][j]);
      if (e.den().depends_on(dsym))
        throw std::runtime_error("Dx may not appear in a denominator: " + cells[i][j]);
      int top = e.num().degree_in(dsym);
      for (int k = 0; k <= top; ++k) {
        Poly ck = e.num().coeff_of(dsym, k);
        if (ck.is_zero()) continue;
        A.add_coeff(i, j, k, Expr(ck, e.den()));
      }
    }
  return A;
}

TDOperator linearize(const Section& psi, const std::vector<int>& deps, int direction) {
  Universe* u = psi.comps.at(0).universe();
  TDOperator L(u, psi.size(), (int)deps.size(), direction);
  for (int i = 0; i < psi.size(); ++i)
    for (auto& [key, c] : jet_partials(psi.comps[i], deps)) {
      auto& [dep, sigma] = key;
      int k = 0;
      for (int d = 0; d < (int)sigma.size(); ++d) {
        if (sigma[d] != 0 && d != direction)
          throw std::runtime_error("linearize: section depends on jets outside the direction");
        if (d == direction) k = sigma[d];
      }
      int col = -1;
      for (int d = 0; d < (int)deps.size(); ++d)
        if (deps[d] == dep) col = d;
      L.add_coeff(i, col, k, c);
    }
  return L;
}

TDOperator ell_coeff(const TDOperator& A, const Section& psi, const std::vector<int>& deps) {
  if (A.cols() != psi.size()) throw std::runtime_error("ell_coeff: arity mismatch");
  Universe* u = A.universe();
  TDOperator L(u, A.rows(), (int)deps.size(), A.direction());
  for (int j = 0; j < A.cols(); ++j) {
    std::map<int, Expr> dpsi;
    dpsi[0] = psi.comps[j];
    auto dpow = [&](int k) -> const Expr& {
      int have = dpsi.rbegin()->first;
      while (have < k) {
        dpsi[have + 1] = total_derivative(dpsi[have], A.direction());
        ++have;
      }
      return dpsi[k];
    };
    for (int i = 0; i < A.rows(); ++i)
      for (auto& [k, a] : A.entry(i, j))
        for (auto& [key, c] : jet_partials(a, deps)) {
          auto& [dep, sigma] = key;
          int kk = 0;
          for (int d = 0; d < (int)sigma.size(); ++d) {
            if (sigma[d] != 0 && d != A.direction())
              throw std::runtime_error("ell_coeff: coefficient depends on jets outside the direction");
            if (d == A.direction()) kk = sigma[d];
          }
          int col = -1;
          for (int d = 0; d < (int)deps.size(); ++d)
            if (deps[d] == dep) col = d;
          L.add_coeff(i, col, kk, c * dpow(k));
        }
  }
  return L;
}

bool nondegenerate(const TDOperator& A, int trials, uint64_t seed) {
  int top = A.max_order();
  int m = A.rows() * (top + 1), n = A.cols();
  if (m < n) return false;
  for (int t = 0; t < trials; ++t) {
    EvalPoint pt(seed * 1000003ULL + 0x9e3779b97f4a7c15ULL * (t + 1));
    std::vector<std::vector<uint64_t>> M(m, std::vector<uint64_t>(n, 0));
    bool bad = false;
    for (int k = 0; k <= top && !bad; ++k)
      for (int i = 0; i < A.rows() && !bad; ++i)
        for (int j = 0; j < n && !bad; ++j) {
          auto v = A.coeff(i, j, k).eval_mod(pt);
          if (!v) {
            bad = true;
            break;
          }
          M[k * A.rows() + i][j] = *v;
        }
    if (bad) continue;
    // rank over F_p by Gaussian elimination
    int rank = 0;
    for (int col = 0; col < n && rank < m; ++col) {
      int piv = -1;
      for (int r = rank; r < m; ++r)
        if (M[r][col] != 0) {
          piv = r;
          break;
        }
      if (piv < 0) break;  // column without pivot: not full column rank here
      std::swap(M[rank], M[piv]);
      uint64_t inv = invmod(M[rank][col]);
      for (int r = 0; r < m; ++r) {
        if (r == rank || M[r][col] == 0) continue;
        uint64_t f = mulmod(M[r][col], inv);
        for (int cc = col; cc < n; ++cc)
          M[r][cc] = (M[r][cc] + kPrime - mulmod(f, M[rank][cc])) % kPrime;
      }
      ++rank;
      if (col == n - 1 && rank == n) return true;
    }
    if (rank == n) return true;
  }
  return false;
}

namespace {

// exact inverse of a zero-order square operator (matrix of Exprs)
TDOperator invert_zero_order(const TDOperator& A) {
  int n = A.rows();
  Universe* u = A.universe();
  std::vector<std::vector<Expr>> M(n), I(n);
  for (int i = 0; i < n; ++i) {
    M[i].resize(n, Expr(u));
    I[i].resize(n, Expr(u));
    I[i][i] = Expr(u, Rat(1));
    for (int j = 0; j < n; ++j) M[i][j] = A.coeff(i, j, 0);
  }
  for (int col = 0; col < n; ++col) {
    int piv = -1;
    for (int r = col; r < n; ++r)
      if (!M[r][col].is_zero()) {
        piv = r;
        break;
      }
    if (piv < 0) throw std::runtime_error("invert_local: singular zero-order operator");
    std::swap(M[col], M[piv]);
    std::swap(I[col], I[piv]);
    Expr d = M[col][col];
    for (int j = 0; j < n; ++j) {
      M[col][j] = M[col][j] / d;
      I[col][j] = I[col][j] / d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col || M[r][col].is_zero()) continue;
      Expr f = M[r][col];
      for (int j = 0; j < n; ++j) {
        M[r][j] = M[r][j] - f * M[col][j];
        I[r][j] = I[r][j] - f * I[col][j];
      }
    }
  }
  TDOperator R(u, n, n, A.direction());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) R.set_coeff(i, j, 0, I[i][j]);
  return R;
}

bool strictly_lower_empty(const TDOperator& A) {
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < i; ++j)
      if (!A.entry(i, j).empty()) return false;
  return true;
}
bool strictly_upper_empty(const TDOperator& A) {
  for (int i = 0; i < A.rows(); ++i)
    for (int j = i + 1; j < A.cols(); ++j)
      if (!A.entry(i, j).empty()) return false;
  return true;
}

}  // namespace

TDOperator invert_local(const TDOperator& A) {
  if (A.rows() != A.cols()) throw std::runtime_error("invert_local: non-square operator");
  int n = A.rows();
  Universe* u = A.universe();
  if (A.zero_order()) return invert_zero_order(A);
  if (!strictly_lower_empty(A) && !strictly_upper_empty(A))
    throw std::runtime_error(
        "invert_local: only zero-order or triangular operators with invertible zero-order "
        "diagonal are locally invertible");
  TDOperator Dg(u, n, n, A.direction());
  for (int i = 0; i < n; ++i) {
    const auto& en = A.entry(i, i);
    if (en.size() != 1 || en[0].first != 0)
      throw std::runtime_error("invert_local: triangular diagonal must be zero-order");
    Dg.set_coeff(i, i, 0, en[0].second);
  }
  TDOperator Di = invert_zero_order(Dg);
  TDOperator Nrm = Di.compose(A - Dg);  // nilpotent as a matrix
  // (I + N)^{-1} D^{-1} = sum_{k<n} (-N)^k D^{-1}
  TDOperator acc = TDOperator::identity(u, n, A.direction());
  TDOperator pw = acc;
  for (int k = 1; k < n; ++k) {
    pw = (-Nrm).compose(pw);
    acc = acc + pw;
  }
  return acc.compose(Di);
}

Expr substitute_jets(const Expr& e, const Section& change) {
  Universe* u = e.universe();
  std::map<SymId, Expr> cache;
  for (SymId s : e.support()) {
    const SymbolInfo& si = u->info(s);
    if (si.kind != SymKind::Jet) continue;
    for (int i = 0; i < change.size(); ++i)
      if (change.deps[i] == si.idx) {
        cache.emplace(s, total_derivative_multi(change.comps[i], si.sigma));
        break;
      }
  }
  if (cache.empty()) return e;
  return e.substitute([&](SymId s) -> const Expr* {
    auto it = cache.find(s);
    return it == cache.end() ? nullptr : &it->second;
  });
}

TDOperator substitute_jets(const TDOperator& A, const Section& change) {
  return A.map_coeffs([&](const Expr& c) { return substitute_jets(c, change); });
}

TDOperator transform(const TDOperator& A, TransformKind kind, const CoordChange& uch,
                     const CoordChange& wch) {
  TDOperator lu = linearize(uch.new_in_old, uch.new_in_old.deps, A.direction());
  TDOperator right;
  switch (kind) {
    case TransformKind::First:
      // right factor: linearization of w[w~] with respect to the new fibre
      right = linearize(wch.old_in_new, wch.old_in_new.deps, A.direction());
      break;
    case TransformKind::Second:
      right = invert_local(
          linearize(wch.new_in_old, wch.new_in_old.deps, A.direction()).adjoint());
      break;
    case TransformKind::Recursion:
      right = linearize(uch.old_in_new, uch.old_in_new.deps, A.direction());
      break;
    case TransformKind::Hamiltonian:
      right = lu.adjoint();
      break;
  }
  TDOperator res = lu.compose(A).compose(right);
  // back-substitute the old coordinates so the result lives in the new ones
  res = substitute_jets(res, uch.old_in_new);
  if (kind == TransformKind::First || kind == TransformKind::Second)
    res = substitute_jets(res, wch.old_in_new);
  return res;
}

}  // namespace jetfrob
