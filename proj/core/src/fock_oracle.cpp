#include "wtdchain/fock_oracle.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "wtdchain/tracedet.hpp"

namespace wtdchain::fock {

namespace {

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      out.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) = a(r, c) * b;
    }
  }
  return out;
}

CMatrix dissipator(const CMatrix& a) {
  // D[A] rho = A rho A^dag - (A^dag A rho + rho A^dag A)/2
  const CMatrix ada = a.adjoint() * a;
  return superop_sandwich(a, a.adjoint()) - 0.5 * (superop_left(ada) + superop_right(ada));
}

CVector vec(const CMatrix& m) { return Eigen::Map<const CVector>(m.data(), m.size()); }

CMatrix unvec(const CVector& v, Eigen::Index dim) {
  return Eigen::Map<const CMatrix>(v.data(), dim, dim);
}

}  // namespace

FockSpace::FockSpace(int sites, bool allow_large) : sites_(sites) {
  const int cap = allow_large ? kMaxSitesOverride : kMaxSites;
  if (sites < 1 || sites > cap) {
    std::ostringstream os;
    os << "Fock oracle supports 1 <= L <= " << cap << ", got L = " << sites;
    if (!allow_large && sites == kMaxSitesOverride) {
      os << " (L = 5 requires the large-oracle override)";
    }
    throw ValidationError(os.str());
  }
  CMatrix lower(2, 2);
  lower << 0.0, 1.0, 0.0, 0.0;  // basis {|0>, |1>}
  CMatrix parity(2, 2);
  parity << 1.0, 0.0, 0.0, -1.0;
  const CMatrix id2 = CMatrix::Identity(2, 2);
  for (int i = 0; i < sites; ++i) {
    CMatrix op = CMatrix::Identity(1, 1);
    for (int k = 0; k < sites; ++k) {
      op = kron(op, k < i ? parity : (k == i ? lower : id2));
    }
    c_.push_back(std::move(op));
  }
}

CMatrix FockSpace::quadratic_form(const CMatrix& x) const {
  if (x.rows() != sites_ || x.cols() != sites_) {
    throw ValidationError("quadratic_form: coefficient matrix has the wrong size");
  }
  CMatrix out = CMatrix::Zero(dim(), dim());
  for (int i = 0; i < sites_; ++i) {
    const CMatrix cdag = creator(i);
    for (int j = 0; j < sites_; ++j) {
      if (x(i, j) != Complex(0.0)) out += x(i, j) * (cdag * c_[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

double FockSpace::anticommutation_defect() const {
  double worst = 0.0;
  const CMatrix id = identity();
  for (int i = 0; i < sites_; ++i) {
    for (int j = 0; j < sites_; ++j) {
      const CMatrix& ci = annihilator(i);
      const CMatrix& cj = annihilator(j);
      const CMatrix cjd = creator(j);
      const CMatrix mixed = ci * cjd + cjd * ci - (i == j ? id : CMatrix::Zero(dim(), dim()));
      const CMatrix same = ci * cj + cj * ci;
      worst = std::max({worst, mixed.cwiseAbs().maxCoeff(), same.cwiseAbs().maxCoeff()});
    }
  }
  return worst;
}

std::vector<CMatrix> build_fermions(int sites, bool allow_large) {
  const FockSpace space(sites, allow_large);
  if (space.anticommutation_defect() > 1e-13) {
    throw NumericalError("build_fermions: canonical anticommutation check failed");
  }
  std::vector<CMatrix> out;
  for (int i = 0; i < sites; ++i) out.push_back(space.annihilator(i));
  return out;
}

CMatrix dense_expm(const CMatrix& a) {
  const EigenDecomposition ed = eig(a);
  if (ed.condition < 1e10) {
    const CMatrix recon_residual = a * ed.vectors - ed.vectors * ed.values.asDiagonal();
    if (recon_residual.cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, norm1(a))) {
      const LuFactors lu(ed.vectors);
      const CMatrix inverse = lu.solve(CMatrix::Identity(a.rows(), a.cols()));
      return ed.vectors * ed.values.array().exp().matrix().asDiagonal() * inverse;
    }
  }
  return expm(a);
}

CMatrix superop_left(const CMatrix& a) {
  return kron(CMatrix::Identity(a.rows(), a.cols()), a);
}

CMatrix superop_right(const CMatrix& b) {
  return kron(b.transpose(), CMatrix::Identity(b.rows(), b.cols()));
}

CMatrix superop_sandwich(const CMatrix& a, const CMatrix& b) {
  return kron(b.transpose(), a);
}

CMatrix many_body_hamiltonian(const ChainSpec& spec, const FockSpace& space) {
  return space.quadratic_form(spec.h);
}

CMatrix effective_hamiltonian(const ChainSpec& spec, const FockSpace& space) {
  const int last = space.sites() - 1;
  const CMatrix c1 = space.annihilator(0);
  const CMatrix cl = space.annihilator(last);
  const CMatrix loss = spec.gamma1 * (1.0 - spec.f1) * (c1.adjoint() * c1) +
                       spec.gamma1 * spec.f1 * (c1 * c1.adjoint()) +
                       spec.gammaL * (1.0 - spec.fL) * (cl.adjoint() * cl) +
                       spec.gammaL * spec.fL * (cl * cl.adjoint());
  return many_body_hamiltonian(spec, space) - Complex(0.0, 0.5) * loss;
}

Liouvillian build_liouvillian(const ChainSpec& spec, const FockSpace& space) {
  spec.validate();
  if (spec.size() != space.sites()) {
    throw ValidationError("build_liouvillian: chain and Fock space sizes differ");
  }
  const Complex minus_i(0.0, -1.0);
  const CMatrix h = many_body_hamiltonian(spec, space);
  Liouvillian out;
  out.full = minus_i * (superop_left(h) - superop_right(h));
  for (const Channel& ch : all_channels()) {
    const CMatrix& c = space.annihilator(static_cast<int>(ch.index(spec.size())));
    const CMatrix op = ch.jump == Jump::Extract ? c : CMatrix(c.adjoint());
    const double rate = ch.rate(spec);
    out.full += rate * dissipator(op);
    out.jumps[static_cast<std::size_t>(ch.ordinal())] =
        rate * superop_sandwich(op, op.adjoint());
  }
  const CMatrix he = effective_hamiltonian(spec, space);
  out.no_jump = minus_i * (superop_left(he) - superop_right(he.adjoint()));
  return out;
}

CMatrix covariance(const CMatrix& rho, const FockSpace& space) {
  const int n = space.sites();
  CMatrix c(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      c(i, j) = (rho * space.creator(j) * space.annihilator(i)).trace();
    }
  }
  return c;
}

CMatrix oracle_steady_state(const ChainSpec& spec, const FockSpace& space) {
  const Liouvillian l = build_liouvillian(spec, space);
  Eigen::BDCSVD<CMatrix> svd(l.full, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const auto last = sv.size() - 1;
  if (sv.size() >= 2 && sv(last - 1) <= 1e-10) {
    throw NumericalError("oracle_steady_state: Liouvillian null space is degenerate");
  }
  CMatrix rho = unvec(svd.matrixV().col(last), space.dim());
  rho = 0.5 * (rho + rho.adjoint());
  rho /= rho.trace();
  return rho;
}

CMatrix gaussian_density(const CMatrix& c, const FockSpace& space) {
  if (c.rows() != space.sites() || c.cols() != space.sites()) {
    throw ValidationError("gaussian_density: covariance has the wrong size");
  }
  const Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (c + c.adjoint()));
  const Eigen::VectorXd occ = es.eigenvalues();
  if (occ.minCoeff() <= 1e-12 || occ.maxCoeff() >= 1.0 - 1e-12) {
    throw NumericalError(
        "gaussian_density: covariance eigenvalues must lie strictly inside (0, 1)");
  }
  const Eigen::VectorXd m = ((1.0 - occ.array()) / occ.array()).log();
  const CMatrix m_mat = es.eigenvectors() * m.cast<Complex>().asDiagonal() *
                        es.eigenvectors().adjoint();
  const CMatrix exponent = space.quadratic_form(m_mat);
  const Eigen::SelfAdjointEigenSolver<CMatrix> mb(0.5 * (exponent + exponent.adjoint()));
  const Eigen::VectorXd weights = (-mb.eigenvalues().array()).exp();
  CMatrix rho = mb.eigenvectors() * weights.cast<Complex>().asDiagonal() *
                mb.eigenvectors().adjoint();
  rho /= rho.trace();
  return rho;
}

CMatrix vacuum_density(const FockSpace& space) {
  CMatrix rho = CMatrix::Zero(space.dim(), space.dim());
  rho(0, 0) = 1.0;
  return rho;
}

WtdOracle::WtdOracle(const ChainSpec& spec, const CMatrix& rho, bool allow_large)
    : spec_(spec),
      space_(static_cast<int>(spec.size()), allow_large),
      rho_(rho),
      liouvillian_(build_liouvillian(spec, space_)) {
  if (rho.rows() != space_.dim() || rho.cols() != space_.dim()) {
    throw ValidationError("WtdOracle: density matrix has the wrong dimension");
  }
  const EigenDecomposition ed = eig(liouvillian_.no_jump);
  const CMatrix residual =
      liouvillian_.no_jump * ed.vectors - ed.vectors * ed.values.asDiagonal();
  if (ed.condition < 1e10 &&
      residual.cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, norm1(liouvillian_.no_jump))) {
    diagonalized_ = true;
    eigenvalues_ = ed.values;
    eigenvectors_ = ed.vectors;
    eigenvector_lu_ = std::make_unique<LuFactors>(ed.vectors);
  }
}

CVector WtdOracle::propagate(double t, const CVector& vec_rho) const {
  if (diagonalized_) {
    const CVector coeff = eigenvector_lu_->solve(vec_rho);
    return eigenvectors_ * (eigenvalues_.array() * t).exp().matrix().cwiseProduct(coeff);
  }
  return expm(t * liouvillian_.no_jump) * vec_rho;
}

double WtdOracle::jump_weight(const Channel& q) const {
  const CMatrix& c = space_.annihilator(static_cast<int>(q.index(spec_.size())));
  const CMatrix jumped = q.jump == Jump::Extract ? CMatrix(c * rho_ * c.adjoint())
                                                 : CMatrix(c.adjoint() * rho_ * c);
  return jumped.trace().real();
}

double WtdOracle::survival(double t, const CMatrix& rho) const {
  return unvec(propagate(t, vec(rho)), space_.dim()).trace().real();
}

double WtdOracle::wtd(double t, const Channel& k, const Channel& q) const {
  const CMatrix& cq = space_.annihilator(static_cast<int>(q.index(spec_.size())));
  const CMatrix jumped = q.jump == Jump::Extract ? CMatrix(cq * rho_ * cq.adjoint())
                                                 : CMatrix(cq.adjoint() * rho_ * cq);
  const double weight = jumped.trace().real();
  if (!(weight > 1e-14)) {
    throw NumericalError("oracle_wtd: the " + q.name() +
                         " jump is impossible from this state (tr J_q(rho) = 0)");
  }
  const CVector evolved =
      liouvillian_.jumps[static_cast<std::size_t>(k.ordinal())] * propagate(t, vec(jumped));
  return unvec(evolved, space_.dim()).trace().real() / weight;
}

double oracle_wtd(double t, const Channel& k, const Channel& q, const CMatrix& rho,
                  const ChainSpec& spec) {
  return WtdOracle(spec, rho).wtd(t, k, q);
}

bool VerificationReport::all_pass() const {
  for (const auto& c : checks) {
    if (!c.pass()) return false;
  }
  return !checks.empty();
}

std::string VerificationReport::to_text() const {
  std::ostringstream os;
  os << std::left << std::setw(28) << "identity" << std::setw(4) << "L" << std::setw(7)
     << "draws" << std::setw(14) << "max_dev" << "result\n";
  for (const auto& c : checks) {
    os << std::left << std::setw(28) << c.identity << std::setw(4) << c.sites
       << std::setw(7) << c.draws << std::setw(14) << std::scientific
       << std::setprecision(3) << c.max_deviation << std::defaultfloat
       << (c.pass() ? "PASS" : "FAIL") << "\n";
  }
  return os.str();
}

namespace {

class Draws {
 public:
  explicit Draws(std::uint64_t seed) : rng_(seed) {}

  CMatrix matrix(int n) {
    CMatrix m(n, n);
    for (Eigen::Index k = 0; k < m.size(); ++k) m(k) = entry();
    return m;
  }
  CVector vector(int n) {
    CVector v(n);
    for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = entry();
    return v;
  }
  int index(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }

 private:
  Complex entry() {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    return std::polar(unit(rng_), 2.0 * std::numbers::pi * unit(rng_));
  }
  std::mt19937_64 rng_;
};

double rel_dev(Complex lhs, Complex rhs) {
  const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
  return std::abs(lhs - rhs) / scale;
}

double rel_dev(const CMatrix& lhs, const CMatrix& rhs) {
  const double scale = std::max({lhs.norm(), rhs.norm(), 1e-300});
  return (lhs - rhs).norm() / scale;
}

// Many-body operator of the given two-insertion pattern.
CMatrix two_insert_operator(TwoInsertKind kind, const FockSpace& fs,
                            const InsertIndices& idx, const CMatrix& ex,
                            const CMatrix& ey, const CMatrix& ez) {
  const auto i = static_cast<int>(idx.i);
  const auto ip = static_cast<int>(idx.i_prime);
  const auto j = static_cast<int>(idx.j);
  const auto jp = static_cast<int>(idx.j_prime);
  const CMatrix& ci = fs.annihilator(i);
  const CMatrix& cip = fs.annihilator(ip);
  const CMatrix& cj = fs.annihilator(j);
  const CMatrix& cjp = fs.annihilator(jp);
  switch (kind) {
    case TwoInsertKind::Adjacent:
      return ci.adjoint() * cip * ex * cj.adjoint() * cjp * ey * ez;
    case TwoInsertKind::SplitMP:
      return ci.adjoint() * cip * ex * cj.adjoint() * ey * cjp * ez;
    case TwoInsertKind::SplitPP:
      return ci * cip.adjoint() * ex * cj.adjoint() * ey * cjp * ez;
    case TwoInsertKind::SplitMM:
      return ci.adjoint() * cip * ex * cj * ey * cjp.adjoint() * ez;
    case TwoInsertKind::SplitPM:
      return ci * cip.adjoint() * ex * cj * ey * cjp.adjoint() * ez;
  }
  return {};
}

}  // namespace

VerificationReport verify_tracedet(std::uint64_t seed, int draws,
                                   const std::vector<int>& sizes, double threshold) {
  VerificationReport report;
  // Checks are referenced while they are filled; keep the storage stable.
  report.checks.reserve(sizes.size() * 14);
  constexpr std::array<TwoInsertKind, 5> kinds = {
      TwoInsertKind::Adjacent, TwoInsertKind::SplitMP, TwoInsertKind::SplitPP,
      TwoInsertKind::SplitMM, TwoInsertKind::SplitPM};
  for (int n : sizes) {
    if (n < 1 || n > kMaxSites) {
      throw ValidationError("verify_tracedet: sizes must lie in [1, 4]");
    }
    const FockSpace fs(n);
    Draws rng(seed + static_cast<std::uint64_t>(n) * 7919u);
    auto add = [&](std::string name) -> IdentityCheck& {
      report.checks.push_back({std::move(name), n, draws, 0.0, threshold});
      return report.checks.back();
    };
    IdentityCheck& bss = add("bss_trace");
    IdentityCheck& bss4 = add("bss_trace_4_factors");
    IdentityCheck& one = add("trace_one_insert");
    std::array<IdentityCheck*, 5> two{};
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      two[k] = &add(std::string("trace_two_insert/") + to_string(kinds[k]));
    }
    IdentityCheck& conj = add("conjugation_identity");
    IdentityCheck& alpha = add("alpha_independence");
    IdentityCheck& sylv = add("sylvester_determinant");
    IdentityCheck& sm = add("sherman_morrison");

    for (int d = 0; d < draws; ++d) {
      const CMatrix x = rng.matrix(n);
      const CMatrix y = rng.matrix(n);
      const CMatrix z = rng.matrix(n);
      const CMatrix w = rng.matrix(n);
      const CMatrix ex_mb = dense_expm(fs.quadratic_form(x));
      const CMatrix ey_mb = dense_expm(fs.quadratic_form(y));
      const CMatrix ez_mb = dense_expm(fs.quadratic_form(z));
      const CMatrix ew_mb = dense_expm(fs.quadratic_form(w));

      const QuadraticFormChain chain{{x, y, z}};
      bss.max_deviation = std::max(
          bss.max_deviation, rel_dev((ex_mb * ey_mb * ez_mb).trace(), bss_trace(chain).value()));
      bss4.max_deviation = std::max(
          bss4.max_deviation, rel_dev((ex_mb * ey_mb * ez_mb * ew_mb).trace(),
                                      bss_trace(QuadraticFormChain{{x, y, z, w}}).value()));

      const int i = rng.index(n), ip = rng.index(n), j = rng.index(n), jp = rng.index(n);
      const CMatrix ins = fs.creator(i) * fs.annihilator(ip);
      one.max_deviation = std::max(one.max_deviation,
                                   rel_dev((ins * ex_mb * ey_mb * ez_mb).trace(),
                                           trace_one_insert(i, ip, chain)));

      const InsertIndices idx{i, ip, j, jp};
      for (std::size_t k = 0; k < kinds.size(); ++k) {
        const Complex lhs =
            two_insert_operator(kinds[k], fs, idx, ex_mb, ey_mb, ez_mb).trace();
        two[k]->max_deviation = std::max(
            two[k]->max_deviation, rel_dev(lhs, trace_two_insert(kinds[k], idx, x, y, z)));
      }

      // e^{-X} T e^{-Z} e^{-Y} = 1 - e^{-X} T e^{X}
      {
        const CMatrix ex = expm(x), ey = expm(y), ez = expm(z);
        const CMatrix p = ex * ey * ez;
        const CMatrix ident = CMatrix::Identity(n, n);
        const CMatrix t = lu_logdet(ident + p).solve(p);
        const CMatrix lhs = expm(-x) * t * expm(-z) * expm(-y);
        const CMatrix rhs = ident - expm(-x) * t * ex;
        conj.max_deviation = std::max(conj.max_deviation, rel_dev(lhs, rhs));
      }

      const Complex direct = trace_one_insert(i, i, chain);
      for (double a : {0.1, 1.0, 10.0}) {
        alpha.max_deviation =
            std::max(alpha.max_deviation, rel_dev(direct, trace_one_insert_alpha(i, chain, a)));
      }

      {
        const CMatrix a = CMatrix::Identity(n, n) + rng.matrix(n);
        const CVector psi = rng.vector(n);
        const CVector phi = rng.vector(n);
        const CMatrix updated = a + psi * phi.adjoint();
        sylv.max_deviation =
            std::max(sylv.max_deviation,
                     rel_dev(updated.determinant(), sylvester_det(a, psi, phi).value()));
        sm.max_deviation = std::max(
            sm.max_deviation, rel_dev(CMatrix(updated.inverse()), sherman_morrison_inverse(a, psi, phi)));
      }
    }
  }
  return report;
}

}  // namespace wtdchain::fock
