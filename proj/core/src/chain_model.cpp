#include "wtdchain/chain_model.hpp"

#include <cmath>
#include <sstream>

namespace wtdchain {

namespace {

bool is_hermitian(const CMatrix& a, double tol) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, a.cwiseAbs().maxCoeff());
}

void require_unit_interval(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    std::ostringstream os;
    os << name << " = " << value << " must lie in [0, 1]";
    throw ValidationError(os.str());
  }
}

void require_nonnegative(double value, const char* name) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    std::ostringstream os;
    os << name << " = " << value << " must be finite and >= 0";
    throw ValidationError(os.str());
  }
}

}  // namespace

void ChainSpec::validate() const {
  require_square(h, "ChainSpec.h");
  if (h.rows() < 2) {
    throw ValidationError("ChainSpec: need L >= 2 sites, got " + std::to_string(h.rows()));
  }
  require_finite(h, "ChainSpec.h");
  if (!is_hermitian(h, 1e-12)) throw ValidationError("ChainSpec: h is not Hermitian");
  require_nonnegative(gamma1, "gamma1");
  require_nonnegative(gammaL, "gammaL");
  require_unit_interval(f1, "f1");
  require_unit_interval(fL, "fL");
}

double Channel::rate(const ChainSpec& spec) const noexcept {
  const double gamma = site == Site::First ? spec.gamma1 : spec.gammaL;
  const double f = site == Site::First ? spec.f1 : spec.fL;
  return jump == Jump::Inject ? gamma * f : gamma * (1.0 - f);
}

std::string Channel::name() const {
  std::string out = site == Site::First ? "1" : "L";
  out += jump == Jump::Inject ? '+' : '-';
  return out;
}

Channel parse_channel(std::string_view text) {
  for (const Channel& ch : all_channels()) {
    if (ch.name() == text) return ch;
  }
  throw ValidationError("unknown channel '" + std::string(text) +
                        "' (expected one of 1-, 1+, L-, L+)");
}

std::string_view to_string(StateKind kind) {
  switch (kind) {
    case StateKind::Steady: return "steady";
    case StateKind::Vacuum: return "vacuum";
    case StateKind::Custom: return "custom";
  }
  return "custom";
}

CMatrix build_tight_binding(Eigen::Index size, double v, double j) {
  if (size < 2) {
    throw ValidationError("build_tight_binding: need L >= 2, got " + std::to_string(size));
  }
  CMatrix h = CMatrix::Zero(size, size);
  for (Eigen::Index i = 0; i < size; ++i) {
    h(i, i) = -v;
    if (i + 1 < size) {
      h(i, i + 1) = -j;
      h(i + 1, i) = -j;
    }
  }
  return h;
}

SingleParticleSet derive_single_particle(const ChainSpec& spec) {
  spec.validate();
  const auto n = spec.size();
  SingleParticleSet sp;
  sp.W = Complex(0.0, 1.0) * spec.h;
  sp.W(0, 0) += 0.5 * spec.gamma1;
  sp.W(n - 1, n - 1) += 0.5 * spec.gammaL;
  sp.F = CMatrix::Zero(n, n);
  sp.F(0, 0) = spec.gamma1 * spec.f1;
  sp.F(n - 1, n - 1) = spec.gammaL * spec.fL;
  sp.Q = sp.W - sp.F;
  sp.Gamma = spec.gamma1 * spec.f1 + spec.gammaL * spec.fL;
  return sp;
}

GaussianState steady_state(const ChainSpec& spec, const LyapunovOptions& options) {
  spec.validate();
  if (!(spec.gamma1 > 0.0 && spec.gammaL > 0.0)) {
    throw ValidationError("steady_state: requires gamma1 > 0 and gammaL > 0");
  }
  const SingleParticleSet sp = derive_single_particle(spec);
  return GaussianState{lyapunov_solve(sp.W, sp.F, options), StateKind::Steady, 0.0};
}

GaussianState vacuum_state(Eigen::Index size, double lambda) {
  if (size < 2) {
    throw ValidationError("vacuum_state: need L >= 2, got " + std::to_string(size));
  }
  if (!(lambda > 0.0 && lambda <= 1e-8)) {
    throw ValidationError("vacuum_state: regularization lambda must lie in (0, 1e-8]");
  }
  return GaussianState{lambda * CMatrix::Identity(size, size), StateKind::Vacuum, lambda};
}

GaussianState custom_state(const CMatrix& c) {
  require_square(c, "custom_state");
  require_finite(c, "custom_state");
  if (!is_hermitian(c, 1e-12)) throw ValidationError("custom_state: C is not Hermitian");
  const Eigen::SelfAdjointEigenSolver<CMatrix> es(c);
  const auto& ev = es.eigenvalues();
  if (ev.minCoeff() < -1e-10 || ev.maxCoeff() > 1.0 + 1e-10) {
    throw ValidationError("custom_state: eigenvalues of C must lie in [0, 1]");
  }
  return GaussianState{c, StateKind::Custom, 0.0};
}

CMatrix relax_covariance(const ChainSpec& spec, const CMatrix& c0, double t) {
  if (t < 0.0) throw ValidationError("relax_covariance: t must be >= 0");
  const SingleParticleSet sp = derive_single_particle(spec);
  if (c0.rows() != spec.size() || c0.cols() != spec.size()) {
    throw ValidationError("relax_covariance: C0 has the wrong dimension");
  }
  const CMatrix css = lyapunov_solve(sp.W, sp.F);
  const CMatrix g = expm(-t * sp.W);
  return css + g * (c0 - css) * g.adjoint();
}

ExponentFactors gaussian_exponent_factors(const GaussianState& state, double eps_occ) {
  if (state.kind == StateKind::Vacuum) {
    throw ValidationError(
        "gaussian_exponent_factors: the vacuum has no finite exponent; use the "
        "vacuum formulas");
  }
  const CMatrix& c = state.C;
  require_square(c, "gaussian_exponent_factors");
  require_finite(c, "gaussian_exponent_factors");
  const auto n = c.rows();

  const Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (c + c.adjoint()));
  Eigen::VectorXd occ = es.eigenvalues();
  ExponentFactors out;
  for (Eigen::Index k = 0; k < n; ++k) {
    double& nk = occ(k);
    if (nk < -1e-10 || nk > 1.0 + 1e-10) {
      std::ostringstream os;
      os << "gaussian_exponent_factors: covariance eigenvalue " << nk
         << " outside [0, 1]";
      throw ValidationError(os.str());
    }
    if (nk <= 0.0 || nk >= 1.0) {
      std::ostringstream os;
      os << "gaussian_exponent_factors: covariance eigenvalue " << nk
         << " is exactly pinned at 0 or 1; use the vacuum path for an empty "
            "chain or perturb C by more than eps_occ = "
         << eps_occ;
      throw NumericalError(os.str());
    }
    if (nk < eps_occ) {
      nk = eps_occ;
      ++out.clipped_eigenvalues;
    } else if (nk > 1.0 - eps_occ) {
      nk = 1.0 - eps_occ;
      ++out.clipped_eigenvalues;
    }
  }
  const CMatrix& u = es.eigenvectors();
  const Eigen::VectorXd ratio = occ.array() / (1.0 - occ.array());
  out.e_minus = u * ratio.cast<Complex>().asDiagonal() * u.adjoint();
  out.e_plus = u * ratio.cwiseInverse().cast<Complex>().asDiagonal() * u.adjoint();
  // log Z = -log det(1 - C)
  out.log_z.log_abs = -(1.0 - occ.array()).log().sum();
  out.log_z.phase = 1.0;
  return out;
}

}  // namespace wtdchain
