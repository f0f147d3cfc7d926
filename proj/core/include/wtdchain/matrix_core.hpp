#pragma once

// Dense complex linear algebra used throughout wtdchain: matrix exponential,
// LU with log-determinant, eigendecomposition and a Lyapunov solver.

#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace wtdchain {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Raised for malformed input (shape, range, parameter validity).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure cannot produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularMatrixError : public NumericalError {
 public:
  SingularMatrixError(const std::string& what, Eigen::Index pivot)
      : NumericalError(what), pivot_(pivot) {}
  Eigen::Index pivot() const noexcept { return pivot_; }

 private:
  Eigen::Index pivot_;
};

/// Determinant carried as log|det| and a unit-modulus phase.
struct LogDet {
  double log_abs = 0.0;
  Complex phase{1.0, 0.0};

  Complex value() const { return std::exp(log_abs) * phase; }

  LogDet& operator*=(const LogDet& other) {
    log_abs += other.log_abs;
    phase *= other.phase;
    return *this;
  }
  LogDet& operator/=(const LogDet& other) {
    log_abs -= other.log_abs;
    phase /= other.phase;
    return *this;
  }
  friend LogDet operator*(LogDet a, const LogDet& b) { return a *= b; }
  friend LogDet operator/(LogDet a, const LogDet& b) { return a /= b; }
};

void require_square(const CMatrix& a, const char* what);
void require_finite(const CMatrix& a, const char* what);

/// e^A by scaling and squaring with a degree-13 (or lower) Pade approximant.
CMatrix expm(const CMatrix& a);

/// Partial-pivoting LU factorization that remembers its determinant.
class LuFactors {
 public:
  explicit LuFactors(const CMatrix& a);

  const LogDet& logdet() const noexcept { return logdet_; }
  Eigen::Index size() const noexcept { return lu_.rows(); }
  /// Reciprocal condition number estimate in the 1-norm.
  double rcond() const { return lu_.rcond(); }

  CMatrix solve(const CMatrix& b) const;

 private:
  Eigen::PartialPivLU<CMatrix> lu_;
  LogDet logdet_;
};

/// Factorizes A; throws SingularMatrixError on an exactly zero pivot.
LuFactors lu_logdet(const CMatrix& a);

CMatrix solve(const LuFactors& lu, const CMatrix& b);

struct EigenDecomposition {
  CVector values;
  CMatrix vectors;
  /// ||V||_1 ||V^{-1}||_1, infinite when V is numerically singular.
  double condition = 1.0;
};

EigenDecomposition eig(const CMatrix& a);

struct LyapunovOptions {
  /// Eigenvector condition number above which the Kronecker solve is used.
  double condition_threshold = 1e8;
  bool force_kronecker = false;
};

/// Solves W C + C W^dag = F for C.
CMatrix lyapunov_solve(const CMatrix& w, const CMatrix& f,
                       const LyapunovOptions& options = {});

/// Induced 1-norm.
double norm1(const CMatrix& a);

}  // namespace wtdchain
