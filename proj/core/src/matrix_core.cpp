#include "wtdchain/matrix_core.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace wtdchain {

void require_square(const CMatrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    std::ostringstream os;
    os << what << ": expected a square matrix, got " << a.rows() << "x"
       << a.cols();
    throw ValidationError(os.str());
  }
}

void require_finite(const CMatrix& a, const char* what) {
  if (!a.allFinite()) {
    throw ValidationError(std::string(what) + ": matrix has non-finite entries");
  }
}

double norm1(const CMatrix& a) {
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

namespace {

// Pade coefficients b_0..b_m and the 1-norm bounds theta_m for which the
// [m/m] approximant is accurate to unit roundoff in double precision.
constexpr std::array<double, 4> kPade3 = {120.0, 60.0, 12.0, 1.0};
constexpr std::array<double, 6> kPade5 = {30240.0, 15120.0, 3360.0,
                                          420.0,   30.0,    1.0};
constexpr std::array<double, 8> kPade7 = {17297280.0, 8648640.0, 1995840.0,
                                          277200.0,   25200.0,   1512.0,
                                          56.0,       1.0};
constexpr std::array<double, 10> kPade9 = {
    17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
    2162160.0,     110880.0,     3960.0,       90.0,        1.0};
constexpr std::array<double, 14> kPade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0,  129060195264000.0,   10559470521600.0,
    670442572800.0,      33522128640.0,       1323241920.0,
    40840800.0,          960960.0,            16380.0,
    182.0,               1.0};

constexpr double kTheta3 = 1.495585217958292e-2;
constexpr double kTheta5 = 2.539398330063230e-1;
constexpr double kTheta7 = 9.504178996162932e-1;
constexpr double kTheta9 = 2.097847961257068e0;
constexpr double kTheta13 = 5.371920351148152e0;

template <std::size_t N>
void pade_low(const CMatrix& a, const std::array<double, N>& b, CMatrix& u,
              CMatrix& v) {
  const auto n = a.rows();
  const CMatrix ident = CMatrix::Identity(n, n);
  const CMatrix a2 = a * a;
  CMatrix odd = b[1] * ident;
  CMatrix even = b[0] * ident;
  CMatrix power = ident;
  for (std::size_t k = 2; k < N; k += 2) {
    power = power * a2;
    odd += b[k + 1] * power;
    even += b[k] * power;
  }
  u = a * odd;
  v = even;
}

void pade13(const CMatrix& a, CMatrix& u, CMatrix& v) {
  const auto& b = kPade13;
  const auto n = a.rows();
  const CMatrix ident = CMatrix::Identity(n, n);
  const CMatrix a2 = a * a;
  const CMatrix a4 = a2 * a2;
  const CMatrix a6 = a4 * a2;
  const CMatrix tmp_u = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) +
                        b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident;
  u = a * tmp_u;
  v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
      b[2] * a2 + b[0] * ident;
}

}  // namespace

CMatrix expm(const CMatrix& a) {
  require_square(a, "expm");
  require_finite(a, "expm");
  const auto n = a.rows();
  if (n == 0) return a;

  const double norm = norm1(a);
  CMatrix u, v;
  int squarings = 0;
  if (norm <= kTheta3) {
    pade_low(a, kPade3, u, v);
  } else if (norm <= kTheta5) {
    pade_low(a, kPade5, u, v);
  } else if (norm <= kTheta7) {
    pade_low(a, kPade7, u, v);
  } else if (norm <= kTheta9) {
    pade_low(a, kPade9, u, v);
  } else {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / kTheta13))));
    pade13(a * std::ldexp(1.0, -squarings), u, v);
  }
  CMatrix result = (v - u).partialPivLu().solve(v + u);
  for (int s = 0; s < squarings; ++s) result = result * result;

  if (!result.allFinite()) {
    std::ostringstream os;
    os << "expm: overflow (||A||_1 = " << norm << ", " << squarings
       << " squarings)";
    throw NumericalError(os.str());
  }
  return result;
}

LuFactors::LuFactors(const CMatrix& a) {
  require_square(a, "lu_logdet");
  require_finite(a, "lu_logdet");
  lu_.compute(a);
  const CMatrix& packed = lu_.matrixLU();
  for (Eigen::Index k = 0; k < packed.rows(); ++k) {
    const Complex pivot = packed(k, k);
    const double mag = std::abs(pivot);
    if (mag == 0.0) {
      std::ostringstream os;
      os << "lu_logdet: matrix is singular (zero pivot at index " << k << ")";
      throw SingularMatrixError(os.str(), k);
    }
    logdet_.log_abs += std::log(mag);
    logdet_.phase *= pivot / mag;
  }
  logdet_.phase *= static_cast<double>(lu_.permutationP().determinant());
  // Keep the phase on the unit circle after many multiplications.
  logdet_.phase /= std::abs(logdet_.phase);
}

CMatrix LuFactors::solve(const CMatrix& b) const {
  if (b.rows() != lu_.rows()) {
    std::ostringstream os;
    os << "solve: right-hand side has " << b.rows() << " rows, expected "
       << lu_.rows();
    throw ValidationError(os.str());
  }
  return lu_.solve(b);
}

LuFactors lu_logdet(const CMatrix& a) { return LuFactors(a); }

CMatrix solve(const LuFactors& lu, const CMatrix& b) { return lu.solve(b); }

EigenDecomposition eig(const CMatrix& a) {
  require_square(a, "eig");
  require_finite(a, "eig");
  Eigen::ComplexEigenSolver<CMatrix> solver(a, true);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eig: QR iteration failed to converge");
  }
  EigenDecomposition out{solver.eigenvalues(), solver.eigenvectors(), 1.0};
  if (a.rows() > 0) {
    Eigen::PartialPivLU<CMatrix> lu(out.vectors);
    const double rc = lu.rcond();
    out.condition = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
  }
  return out;
}

namespace {

CMatrix lyapunov_kronecker(const CMatrix& w, const CMatrix& f) {
  // Column-major vec: vec(W C) = (I (x) W) vec C, vec(C W^dag) = (conj W (x) I) vec C.
  const auto n = w.rows();
  CMatrix big = CMatrix::Zero(n * n, n * n);
  const CMatrix wc = w.conjugate();
  for (Eigen::Index col = 0; col < n; ++col) {
    big.block(col * n, col * n, n, n) += w;
    for (Eigen::Index row = 0; row < n; ++row) {
      big.block(row * n, col * n, n, n).diagonal().array() += wc(row, col);
    }
  }
  const LuFactors lu(big);
  const CVector rhs = Eigen::Map<const CVector>(f.data(), n * n);
  const CVector x = lu.solve(rhs);
  return Eigen::Map<const CMatrix>(x.data(), n, n);
}

}  // namespace

CMatrix lyapunov_solve(const CMatrix& w, const CMatrix& f,
                       const LyapunovOptions& options) {
  require_square(w, "lyapunov_solve(W)");
  require_square(f, "lyapunov_solve(F)");
  if (w.rows() != f.rows()) {
    throw ValidationError("lyapunov_solve: W and F dimensions differ");
  }
  require_finite(w, "lyapunov_solve(W)");
  require_finite(f, "lyapunov_solve(F)");
  const auto n = w.rows();
  if (n == 0) return f;

  const EigenDecomposition ed = eig(w);
  const double scale = std::max(ed.values.cwiseAbs().maxCoeff(), 1.0);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      const Complex denom = ed.values(a) + std::conj(ed.values(b));
      if (std::abs(denom) <= 1e-13 * scale) {
        std::ostringstream os;
        os << "lyapunov_solve: eigenvalues lambda_" << a << " = " << ed.values(a)
           << " and lambda_" << b << " = " << ed.values(b)
           << " satisfy lambda_a + conj(lambda_b) ~ 0; no unique solution";
        throw NumericalError(os.str());
      }
    }
  }

  CMatrix c;
  if (options.force_kronecker || ed.condition > options.condition_threshold) {
    c = lyapunov_kronecker(w, f);
  } else {
    const LuFactors s(ed.vectors);
    // F~ = S^{-1} F S^{-dag}
    const CMatrix left = s.solve(f);
    CMatrix ft = s.solve(left.adjoint()).adjoint();
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index b = 0; b < n; ++b) {
        ft(a, b) /= ed.values(a) + std::conj(ed.values(b));
      }
    }
    c = ed.vectors * ft * ed.vectors.adjoint();
  }
  if ((f - f.adjoint()).norm() <= 1e-12 * f.norm()) {
    c = (0.5 * (c + c.adjoint())).eval();
  }
  if (!c.allFinite()) throw NumericalError("lyapunov_solve: non-finite solution");
  return c;
}

}  // namespace wtdchain
