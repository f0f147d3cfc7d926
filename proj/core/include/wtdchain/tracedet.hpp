#pragma once

// Trace-determinant identities for products of exponentiated fermionic
// quadratic forms. For script-X = sum_ij X_ij c_i^dag c_j,
//
//   tr{e^X e^Y e^Z}                 = det(1 + e^X e^Y e^Z)            = D
//   tr{c_i^dag c_i' e^X e^Y e^Z}     = D T_{i'i},   T = (e^-Z e^-Y e^-X + 1)^{-1}
//
// plus five two-insertion variants. All identities hold for arbitrary
// (non-Hermitian) coefficient matrices; index arguments are zero-based.

#include <vector>

#include "wtdchain/matrix_core.hpp"

namespace wtdchain {

/// Ordered product e^{X_1} e^{X_2} ... e^{X_n}; order matters.
struct QuadraticFormChain {
  std::vector<CMatrix> factors;

  Eigen::Index dimension() const;
  /// Validates shapes and returns the left-to-right product of exponentials.
  CMatrix exponential_product() const;
};

/// log det(1 + prod_k e^{X_k}).
LogDet bss_trace(const QuadraticFormChain& chain);

/// tr{c_i^dag c_i' prod_k e^{X_k}}.
Complex trace_one_insert(Eigen::Index i, Eigen::Index i_prime,
                         const QuadraticFormChain& chain);

/// The same diagonal trace rebuilt through e^{a n_i} = 1 + (e^a - 1) n_i:
/// [det(1 + e^{a R_ii} P) - det(1 + P)] / (e^a - 1). Independent of a.
Complex trace_one_insert_alpha(Eigen::Index i, const QuadraticFormChain& chain,
                               double alpha);

/// Operator pattern of a two-insertion trace.
enum class TwoInsertKind {
  Adjacent,  // c_i^dag c_i' e^X c_j^dag c_j' e^Y e^Z
  SplitMP,   // c_i^dag c_i' e^X c_j^dag e^Y c_j'     e^Z
  SplitPP,   // c_i c_i'^dag e^X c_j^dag e^Y c_j'     e^Z
  SplitMM,   // c_i^dag c_i' e^X c_j     e^Y c_j'^dag e^Z
  SplitPM,   // c_i c_i'^dag e^X c_j     e^Y c_j'^dag e^Z
};

const char* to_string(TwoInsertKind kind);

struct InsertIndices {
  Eigen::Index i = 0;
  Eigen::Index i_prime = 0;
  Eigen::Index j = 0;
  Eigen::Index j_prime = 0;
};

Complex trace_two_insert(TwoInsertKind kind, const InsertIndices& idx,
                         const CMatrix& x, const CMatrix& y, const CMatrix& z);

/// det(A + psi phi^dag) via det(A) (1 + phi^dag A^{-1} psi).
LogDet sylvester_det(const CMatrix& a, const CVector& psi, const CVector& phi);

/// (A + psi phi^dag)^{-1} by the rank-one update of A^{-1}.
CMatrix sherman_morrison_inverse(const CMatrix& a, const CVector& psi,
                                 const CVector& phi);

}  // namespace wtdchain
