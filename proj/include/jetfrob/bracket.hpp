/*
 * bracket.hpp
 * -----------
 * The bracket engine: bi-differential bracket tables {{p,q}}^k =
 * sum c_{ijk}^{ab} D^a(p^i) D^b(q^j), their reconstruction by the
 * base/step/terminal algorithm on a covering, certification of the defining
 * identity [A(p),A(q)] = A({{p,q}}), the Hamiltonian shortcut and criterion,
 * the chain rule of composed operators, Christoffel-block decomposition of
 * operator families, recursion (Yang-Baxter) checks, and rendering.
 */
#pragma once

#include <tuple>

#include "jetfrob/solver.hpp"

namespace jetfrob {

// two families of covering dependents p^1..p^r, q^1..q^r; with x_only they
// carry only x-jets (their other derivatives vanish identically)
struct CoveringContext {
  Universe* u = nullptr;
  int r = 0;
  std::vector<int> p, q;  // dependent indices
  static CoveringContext make(Universe* u, int r, bool x_only = true,
                              const std::string& pname = "p", const std::string& qname = "q");
  Section p_section() const;
  Section q_section() const;
  bool is_covering_dep(int dep) const;
};

// key of one table entry: component k, argument slots (i, multi-index a) and
// (j, multi-index b)
struct BKey {
  int k = 0, i = 0, j = 0;
  std::vector<int> a, b;
  bool operator<(const BKey& o) const {
    return std::tie(k, i, j, a, b) < std::tie(o.k, o.i, o.j, o.a, o.b);
  }
};

class BracketTable {
 public:
  BracketTable() = default;
  BracketTable(Universe* u, int components, int r) : u_(u), m_(components), r_(r) {}

  Universe* universe() const { return u_; }
  int components() const { return m_; }
  int r() const { return r_; }
  const std::map<BKey, Expr>& entries() const { return c_; }

  Expr get(const BKey& k) const;
  Expr get_x(int k, int i, int j, int alpha, int beta) const;  // pure-x orders
  void set(const BKey& k, const Expr& v);
  void set_x(int k, int i, int j, int alpha, int beta, const Expr& v);
  // set v at (k,i,j,a,b) and -v at (k,j,i,b,a)
  void set_antisym(const BKey& k, const Expr& v);
  bool is_zero() const { return c_.empty(); }

  // evaluate the bracket on concrete argument component vectors
  std::vector<Expr> eval(const std::vector<Expr>& p, const std::vector<Expr>& q) const;

  bool antisymmetric() const;               // exact entrywise check
  int max_arg_order() const;
  BracketTable operator+(const BracketTable& o) const;
  BracketTable scale(const Expr& f) const;
  BracketTable map_coeffs(const std::function<Expr(const Expr&)>& f) const;
  // table of A o diag(c) from the table of A: entry (k,i,j) scaled by c_i c_j / c_k
  BracketTable rescale_components(const std::vector<Rat>& c) const;
  bool equals(const BracketTable& o) const;
  bool equals_probabilistic(const BracketTable& o, int trials = 20, uint64_t seed = 0) const;

  std::string json() const;    // [{"k":..,"i":..,"j":..,"alpha":..,"beta":..,"coeff":".."}]
  std::string tensor() const;  // bi-differential rendering  c * Dx^a (x) Dx^b
 private:
  Universe* u_ = nullptr;
  int m_ = 0, r_ = 0;
  std::map<BKey, Expr> c_;
};

// read a table off values bilinear in the covering jets: entry coefficient at
// (k, i, j, a, b) is  d^2 value_k / d p^i_a d q^j_b
BracketTable table_from_values(const std::vector<Expr>& values, const CoveringContext& ctx);

// evolutionary summands E_{A(p)}(q) - E_{A(q)}(p) of the full Koszul bracket;
// identically zero when p, q are covering sections
Section koszul_evolutionary_part(const TDOperator& A, const Section& p, const Section& q);

struct ReconCaps {
  int diag = -1;       // bound on alpha+beta; -1: ord(A) + coeff jet order + 1
  PoolSpec pool;       // coefficient ansatz (deps/atoms default from A)
  int escalations = 3; // pool-doubling rounds on UNSOLVABLE
  bool pool_given = false;
};

struct ReconResult {
  bool ok = false;
  BracketTable table;
  std::vector<Expr> conditions;   // parameter constraints collected on failure
  std::vector<Expr> assumptions;  // nonvanishing assumptions used by pivots
  std::string message;
};

// Appendix-style reconstruction: seed with constant sections, sweep the
// diagonals alpha+beta = d with polynomial sections x^alpha 1_i, subtracting
// known lower-diagonal contributions; each cell is one linear solve
ReconResult reconstruct_bracket(const TDOperator& A, ReconCaps caps = {},
                                const SystemModel* sys = nullptr);

// residual [A(p),A(q)] - A({{p,q}}_table) on a covering; zero certifies
Section certify_frobenius(const TDOperator& A, const BracketTable& table,
                          const CoveringContext& ctx, const SystemModel* sys = nullptr);

// Hamiltonian shortcut {{psi1,psi2}}_A = ell*_{A,psi1}(psi2) for skew-adjoint A;
// base picks the dependents the coefficients are linearized over (defaults to
// the ordinary equation dependents)
BracketTable dogma_bracket(const TDOperator& A, const SystemModel* sys = nullptr);
BracketTable dogma_bracket(const TDOperator& A, const std::vector<int>& base,
                           const SystemModel* sys = nullptr);

// ell_{A,psi1}(A(psi2)) - ell_{A,psi2}(A(psi1)) - A(ell*_{A,psi2}(psi1));
// zero iff the skew-adjoint A is Hamiltonian
Section hamiltonian_criterion_residual(const TDOperator& A, const CoveringContext& ctx,
                                       const SystemModel* sys = nullptr);

// E_{A(psi1)}(psi2) - E_{A(psi2)}(psi1) + ell*_{A(psi1)}(psi2) - ell*_{A(psi2)}(psi1)
//   + 1/2 euler(<psi1, A(psi2)> - <A(psi1), psi2>)
Section two_grads_bracket(const TDOperator& A, const Section& psi1, const Section& psi2);

// bracket of A o Delta from the bracket of A:
// Delta({{x1,x2}}_{AoDelta}) = E_{A Delta x1}(Delta)(x2) - E_{A Delta x2}(Delta)(x1)
//                              + {{Delta x1, Delta x2}}_A
ReconResult chain_bracket(const TDOperator& A, const TDOperator& Delta,
                          const BracketTable& tableA, ReconCaps caps = {},
                          const SystemModel* sys = nullptr);

// Christoffel blocks of an operator family:
// [A_i(p), A_j(q)] = sum_k A_k(Gamma^k_ij(p,q)) on the covering
struct GammaTable {
  int N = 0;
  // (i, j) -> per-k blocks; (j, i) entries filled by the graded symmetry
  std::map<std::pair<int, int>, std::vector<BracketTable>> blocks;
  std::string json() const;
};

struct GammaResult {
  bool ok = false;
  GammaTable gamma;
  std::string message;
};

GammaResult gamma_decompose(const std::vector<TDOperator>& ops, const CoveringContext& ctx,
                            ReconCaps caps = {}, const SystemModel* sys = nullptr);

// certify the pencil sum(lambda_i A_i) against sum(lambda_i table_i) with
// symbolic lambda
bool linear_compat_check(const std::vector<TDOperator>& ops,
                         const std::vector<BracketTable>& tables,
                         const SystemModel* sys = nullptr, bool probabilistic = false,
                         int trials = 20, uint64_t seed = 0);

// [R(p), R(q)] - R([p,q]_R) on the covering (classical Yang-Baxter shape for
// recursion operators); identical machinery to certify_frobenius
Section yang_baxter_residual(const TDOperator& R, const BracketTable& tableR,
                             const CoveringContext& ctx, const SystemModel* sys = nullptr);

// residual of the power relation at level ell >= 1:
// R^{ell-1}({{x1,x2}}_{R^ell}) - sum_{i=0}^{ell-2} R^{ell-i-2}[
//   E_{R^ell x1}(R)(R^i x2) - E_{R^ell x2}(R)(R^i x1)]
//   - {{R^{ell-1} x1, R^{ell-1} x2}}_R
Section power_bracket_residual(const TDOperator& R, const std::vector<BracketTable>& tables,
                               int ell, const CoveringContext& ctx,
                               const SystemModel* sys = nullptr);

// (nabla_p nabla_q - nabla_q nabla_p - nabla_{[p,q]_A})(phi) with
// nabla_p(phi) = [A(p), phi] and the full Koszul bracket [p,q]_A; vanishes by
// the Jacobi identity (regression guard)
Section flatness_residual(const TDOperator& A, const BracketTable& tableA, const Section& p,
                          const Section& q, const Section& phi);

}  // namespace jetfrob
