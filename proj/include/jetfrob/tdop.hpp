/*
 * tdop.hpp
 * --------
 * Matrix linear differential operators in total derivatives: each entry is a
 * finite sum  sum_k a_k * D^k  in a single tagged direction.  Provides
 * application to sections, Leibniz composition, the adjoint, linearizations
 * of sections, coefficient-variation operators, generic nondegeneracy, local
 * inversion (zero-order or triangular), and fibre coordinate transformations.
 */
#pragma once

#include <string>
#include <vector>

#include "jetfrob/jet.hpp"

namespace jetfrob {

class TDOperator {
 public:
  // one matrix entry: sorted (order, coefficient) pairs, zero coeffs absent
  using Entry = std::vector<std::pair<int, Expr>>;

  TDOperator() = default;
  TDOperator(Universe* u, int rows, int cols, int direction = 0);
  static TDOperator identity(Universe* u, int n, int direction = 0);

  Universe* universe() const { return u_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int direction() const { return dir_; }
  const Entry& entry(int i, int j) const { return e_[i * cols_ + j]; }

  Expr coeff(int i, int j, int k) const;
  void set_coeff(int i, int j, int k, const Expr& c);
  void add_coeff(int i, int j, int k, const Expr& c);
  int max_order() const;
  bool is_zero() const;
  // true iff no entry involves D (order >= 1)
  bool zero_order() const;

  TDOperator operator+(const TDOperator& o) const;
  TDOperator operator-(const TDOperator& o) const;
  TDOperator operator-() const;
  // left multiplication of every entry by a coefficient (c * A)
  TDOperator scale(const Expr& c) const;
  TDOperator mul_scalar(const Rat& c) const;

  std::vector<Expr> apply(const std::vector<Expr>& s) const;
  Section apply(const Section& s) const;
  // Leibniz composition this o B
  TDOperator compose(const TDOperator& B) const;
  TDOperator operator*(const TDOperator& B) const { return compose(B); }
  // entry (j,i) of A* = sum_k (-1)^k D^k o a_{ij,k}
  TDOperator adjoint() const;
  TDOperator transpose_entries() const;  // formal transpose, no adjoint signs

  bool equals(const TDOperator& o) const;
  bool equals_probabilistic(const TDOperator& o, int trials = 20, uint64_t seed = 0) const;

  // map every coefficient through f
  TDOperator map_coeffs(const std::function<Expr(const Expr&)>& f) const;

  // "[[Dx^2 + u*Dx + u_x, 0], [1, -Dx]]"; scalars print without brackets
  std::string str() const;
  std::string entry_str(int i, int j) const;

 private:
  Universe* u_ = nullptr;
  int rows_ = 0, cols_ = 0, dir_ = 0;
  std::vector<Entry> e_;
};

// parse an operator matrix; entries are expressions in the universe's symbols
// and the formal letter Dx (coefficients written to the left of Dx powers);
// a bare entry without brackets is a 1x1 operator
TDOperator parse_operator(Universe* u, const std::string& text, int direction = 0);

// linearization ell_psi with respect to the dependents `deps`:
// entry (i, d) has coefficient d psi^i / d u^d_{k x} at order k
TDOperator linearize(const Section& psi, const std::vector<int>& deps, int direction = 0);

// coefficient-variation operator: the operator L in phi with
// L(phi) = (E_phi-varied A)(psi); variation with respect to `deps`
TDOperator ell_coeff(const TDOperator& A, const Section& psi, const std::vector<int>& deps);

// generic full column rank of the stacked coefficient matrices, decided at
// random prime-field evaluation points
bool nondegenerate(const TDOperator& A, int trials = 8, uint64_t seed = 0);

// local inverse: zero-order invertible matrices, or triangular operators with
// a zero-order invertible diagonal (strictly triangular part is nilpotent);
// throws for other shapes
TDOperator invert_local(const TDOperator& A);

enum class TransformKind { First, Second, Recursion, Hamiltonian };

// fibre coordinate change: new coordinates expressed in the old ones and the
// inverse change, both as sections over the respective dependents (all within
// one universe that carries both sets)
struct CoordChange {
  Section new_in_old;  // deps = old dependents, comps = new coordinates
  Section old_in_new;  // deps = new dependents, comps = old coordinates
};

// transformation laws for the four operator kinds; `wch` is ignored for
// recursion/hamiltonian kinds.  Coefficients are back-substituted so the
// result lives in the new coordinates.
TDOperator transform(const TDOperator& A, TransformKind kind, const CoordChange& uch,
                     const CoordChange& wch = {});

// prolonged substitution: replace every jet of the dependents listed in
// `change.deps` by the corresponding total derivative of `change.comps`
Expr substitute_jets(const Expr& e, const Section& change);
TDOperator substitute_jets(const TDOperator& A, const Section& change);

}  // namespace jetfrob
