#include "wtdchain/tracedet.hpp"

#include <sstream>

namespace wtdchain {

namespace {

void require_index(Eigen::Index idx, Eigen::Index n, const char* name) {
  if (idx < 0 || idx >= n) {
    std::ostringstream os;
    os << "index " << name << " = " << idx << " out of range [0, " << n << ")";
    throw ValidationError(os.str());
  }
}

double delta(Eigen::Index a, Eigen::Index b) { return a == b ? 1.0 : 0.0; }

// D and T for a product P: D = det(1 + P), T = (1 + P)^{-1} P.
struct DetAndT {
  LogDet d;
  CMatrix t;
};

DetAndT det_and_t(const CMatrix& p) {
  const auto n = p.rows();
  const LuFactors lu(CMatrix::Identity(n, n) + p);
  return {lu.logdet(), lu.solve(p)};
}

}  // namespace

Eigen::Index QuadraticFormChain::dimension() const {
  if (factors.empty()) throw ValidationError("QuadraticFormChain: empty chain");
  return factors.front().rows();
}

CMatrix QuadraticFormChain::exponential_product() const {
  const auto n = dimension();
  CMatrix product = CMatrix::Identity(n, n);
  for (const CMatrix& x : factors) {
    require_square(x, "QuadraticFormChain");
    if (x.rows() != n) throw ValidationError("QuadraticFormChain: dimension mismatch");
    product = product * expm(x);
  }
  return product;
}

LogDet bss_trace(const QuadraticFormChain& chain) {
  const CMatrix p = chain.exponential_product();
  return lu_logdet(CMatrix::Identity(p.rows(), p.cols()) + p).logdet();
}

Complex trace_one_insert(Eigen::Index i, Eigen::Index i_prime,
                         const QuadraticFormChain& chain) {
  const CMatrix p = chain.exponential_product();
  require_index(i, p.rows(), "i");
  require_index(i_prime, p.rows(), "i'");
  const DetAndT dt = det_and_t(p);
  return dt.d.value() * dt.t(i_prime, i);
}

Complex trace_one_insert_alpha(Eigen::Index i, const QuadraticFormChain& chain,
                               double alpha) {
  if (alpha == 0.0) throw ValidationError("trace_one_insert_alpha: alpha must be nonzero");
  const CMatrix p = chain.exponential_product();
  const auto n = p.rows();
  require_index(i, n, "i");
  CMatrix projector_exp = CMatrix::Identity(n, n);
  projector_exp(i, i) = std::exp(alpha);
  const CMatrix ident = CMatrix::Identity(n, n);
  const Complex with_alpha = lu_logdet(ident + projector_exp * p).logdet().value();
  const Complex without = lu_logdet(ident + p).logdet().value();
  return (with_alpha - without) / std::expm1(alpha);
}

const char* to_string(TwoInsertKind kind) {
  switch (kind) {
    case TwoInsertKind::Adjacent: return "adjacent";
    case TwoInsertKind::SplitMP: return "split_mp";
    case TwoInsertKind::SplitPP: return "split_pp";
    case TwoInsertKind::SplitMM: return "split_mm";
    case TwoInsertKind::SplitPM: return "split_pm";
  }
  return "?";
}

Complex trace_two_insert(TwoInsertKind kind, const InsertIndices& idx,
                         const CMatrix& x, const CMatrix& y, const CMatrix& z) {
  const QuadraticFormChain chain{{x, y, z}};
  const CMatrix ex = expm(x);
  const CMatrix ey = expm(y);
  const CMatrix ez = expm(z);
  const auto n = ex.rows();
  const auto [i, ip, j, jp] = idx;
  require_index(i, n, "i");
  require_index(ip, n, "i'");
  require_index(j, n, "j");
  require_index(jp, n, "j'");

  const CMatrix emx = expm(-x);
  const CMatrix emy = expm(-y);
  const CMatrix emz = expm(-z);
  const DetAndT dt = det_and_t(ex * ey * ez);
  const CMatrix& t = dt.t;
  const Complex d = dt.d.value();

  Complex bracket;
  switch (kind) {
    case TwoInsertKind::Adjacent: {
      const CMatrix a = emx * t * ex;
      const CMatrix b = t * emz * emy;
      const CMatrix c = emx * t;
      bracket = a(jp, j) * t(ip, i) + b(ip, j) * c(jp, i);
      break;
    }
    case TwoInsertKind::SplitMP: {
      const CMatrix a = emy * emx * t * ex;
      const CMatrix b = t * emz * emy;
      const CMatrix c = emy * emx * t;
      bracket = a(jp, j) * t(ip, i) + b(ip, j) * c(jp, i);
      break;
    }
    case TwoInsertKind::SplitPP: {
      const CMatrix a = emy * emx * t * ex;
      const CMatrix b = t * emz * emy;
      const CMatrix c = emy * emx * t;
      bracket = a(jp, j) * (delta(i, ip) - t(i, ip)) - b(i, j) * c(jp, ip);
      break;
    }
    case TwoInsertKind::SplitMM: {
      const CMatrix a = emx * t * ex * ey;
      const CMatrix b = t * emz;
      const CMatrix c = emx * t;
      bracket = (ey(j, jp) - a(j, jp)) * t(ip, i) - b(ip, jp) * c(j, i);
      break;
    }
    case TwoInsertKind::SplitPM: {
      const CMatrix a = emx * t * ex * ey;
      const CMatrix b = t * emz;
      const CMatrix c = emx * t;
      bracket = (ey(j, jp) - a(j, jp)) * (delta(i, ip) - t(i, ip)) + b(i, jp) * c(j, ip);
      break;
    }
  }
  return d * bracket;
}

LogDet sylvester_det(const CMatrix& a, const CVector& psi, const CVector& phi) {
  const LuFactors lu(a);
  const Complex factor = Complex(1.0) + phi.dot(CVector(lu.solve(psi)));
  LogDet update{std::log(std::abs(factor)), factor / std::abs(factor)};
  return lu.logdet() * update;
}

CMatrix sherman_morrison_inverse(const CMatrix& a, const CVector& psi,
                                 const CVector& phi) {
  const LuFactors lu(a);
  const auto n = a.rows();
  const CMatrix a_inv = lu.solve(CMatrix::Identity(n, n));
  const CVector a_inv_psi = a_inv * psi;
  const Eigen::RowVectorXcd phi_a_inv = phi.adjoint() * a_inv;
  const Complex denom = Complex(1.0) + (phi_a_inv * psi).value();
  if (std::abs(denom) == 0.0) {
    throw SingularMatrixError("sherman_morrison_inverse: rank-one update is singular", -1);
  }
  return a_inv - (a_inv_psi * phi_a_inv) / denom;
}

}  // namespace wtdchain
