#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "wtdchain/fock_oracle.hpp"

namespace {

using namespace wtdchain;
using wtdchain::testing::generic_chain;
using wtdchain::testing::random_covariance;
using wtdchain::testing::random_matrix;
using wtdchain::testing::reference_chain;

double max_abs(const CMatrix& a) { return a.cwiseAbs().maxCoeff(); }

CMatrix random_density(std::mt19937_64& rng, Eigen::Index dim) {
  const CMatrix a = random_matrix(rng, dim);
  CMatrix rho = a * a.adjoint();
  return rho / rho.trace();
}

CVector vec(const CMatrix& m) { return Eigen::Map<const CVector>(m.data(), m.size()); }

TEST(FockSpace, CanonicalAnticommutation) {
  for (int sites = 1; sites <= 4; ++sites) {
    EXPECT_LE(fock::FockSpace(sites).anticommutation_defect(), 1e-13);
  }
  EXPECT_EQ(fock::build_fermions(3).size(), 3u);
}

TEST(FockSpace, SizeLimits) {
  EXPECT_THROW(fock::FockSpace(5), ValidationError);
  EXPECT_NO_THROW(fock::FockSpace(5, true));
  EXPECT_THROW(fock::FockSpace(6, true), ValidationError);
  EXPECT_THROW(fock::FockSpace(0), ValidationError);
}

TEST(FockSpace, JordanWignerConvention) {
  // Site 1 is the most significant bit: c_1^dag |00> = |10>, index 2.
  const fock::FockSpace fs(2);
  CVector vac = CVector::Zero(4);
  vac(0) = 1.0;
  const CVector one = fs.creator(0) * vac;
  EXPECT_EQ(one(2), Complex(1.0));
  // c_2^dag c_1^dag |00> picks up the string sign of site 1.
  const CVector both = fs.creator(1) * one;
  EXPECT_EQ(both(3), Complex(-1.0));
}

TEST(FockSpace, QuadraticFormOfIdentityCountsParticles) {
  const fock::FockSpace fs(3);
  CMatrix total = CMatrix::Zero(8, 8);
  for (int i = 0; i < 3; ++i) total += fs.number(i);
  EXPECT_LT(max_abs(fs.quadratic_form(CMatrix::Identity(3, 3)) - total), 1e-15);
}

TEST(Superoperators, ColumnStackingConvention) {
  std::mt19937_64 rng(61);
  const CMatrix a = random_matrix(rng, 4), b = random_matrix(rng, 4), r = random_matrix(rng, 4);
  EXPECT_LT((fock::superop_sandwich(a, b) * vec(r) - vec(a * r * b)).cwiseAbs().maxCoeff(),
            1e-13);
  EXPECT_LT((fock::superop_left(a) * vec(r) - vec(a * r)).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT((fock::superop_right(b) * vec(r) - vec(r * b)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Liouvillian, NoJumpPartTwoWays) {
  // L0 from H_e must equal the full generator minus every jump term.
  for (const ChainSpec& spec : {reference_chain(3), generic_chain(3)}) {
    const fock::FockSpace fs(3);
    const fock::Liouvillian l = fock::build_liouvillian(spec, fs);
    CMatrix l0 = l.full;
    for (const CMatrix& j : l.jumps) l0 -= j;
    EXPECT_LT(max_abs(l0 - l.no_jump), 1e-13);
  }
}

TEST(Liouvillian, PreservesTraceAndHermiticity) {
  const ChainSpec spec = generic_chain(3);
  const fock::FockSpace fs(3);
  const fock::Liouvillian l = fock::build_liouvillian(spec, fs);
  std::mt19937_64 rng(62);
  const CMatrix rho = random_density(rng, 8);
  const CVector out = l.full * vec(rho);
  const CMatrix drho = Eigen::Map<const CMatrix>(out.data(), 8, 8);
  EXPECT_LT(std::abs(drho.trace()), 1e-13);
  EXPECT_LT(max_abs(drho - drho.adjoint()), 1e-13);
}

TEST(OracleSteadyState, MatchesLyapunovCovariance) {
  for (const ChainSpec& spec : {reference_chain(2), reference_chain(3), generic_chain(3)}) {
    const auto sites = static_cast<int>(spec.size());
    const fock::FockSpace fs(sites);
    const CMatrix rho = fock::oracle_steady_state(spec, fs);
    EXPECT_NEAR(rho.trace().real(), 1.0, 1e-12);
    const CVector residual = fock::build_liouvillian(spec, fs).full * vec(rho);
    EXPECT_LT(residual.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(max_abs(fock::covariance(rho, fs) - steady_state(spec).C), 1e-8);
  }
}

TEST(GaussianDensity, CovarianceRoundTrip) {
  std::mt19937_64 rng(63);
  const fock::FockSpace fs(3);
  const CMatrix c = random_covariance(rng, 3);
  const CMatrix rho = fock::gaussian_density(c, fs);
  EXPECT_NEAR(rho.trace().real(), 1.0, 1e-13);
  EXPECT_LT(max_abs(fock::covariance(rho, fs) - c), 1e-12);
}

TEST(GaussianDensity, PartitionFunctionIsDeterminant) {
  // tr e^{-sum M c^dag c} = det(1 + e^{-M}) = 1 / det(1 - C)
  std::mt19937_64 rng(64);
  const fock::FockSpace fs(3);
  const CMatrix c = random_covariance(rng, 3);
  const ExponentFactors ef = gaussian_exponent_factors(custom_state(c));
  const Eigen::SelfAdjointEigenSolver<CMatrix> es(c);
  const Eigen::VectorXd m = ((1.0 - es.eigenvalues().array()) / es.eigenvalues().array()).log();
  const CMatrix m_mat =
      es.eigenvectors() * m.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
  const Complex z = fock::dense_expm(-fs.quadratic_form(m_mat)).trace();
  EXPECT_NEAR(std::log(z.real()), ef.log_z.log_abs, 1e-12);
  EXPECT_NEAR(z.imag(), 0.0, 1e-12);
}

TEST(DenseExpm, AgreesWithPade) {
  std::mt19937_64 rng(65);
  const CMatrix a = random_matrix(rng, 8, 0.4);
  EXPECT_LT(max_abs(fock::dense_expm(a) - expm(a)), 1e-12);
}

TEST(WtdOracle, ImpossibleJumpIsAnError) {
  const ChainSpec spec = reference_chain(2);
  const fock::FockSpace fs(2);
  const fock::WtdOracle oracle(spec, fock::vacuum_density(fs));
  const Channel extract{Site::First, Jump::Extract};
  EXPECT_EQ(oracle.jump_weight(extract), 0.0);
  EXPECT_THROW(oracle.wtd(1.0, extract, extract), NumericalError);
}

TEST(WtdOracle, SurvivalDecays) {
  const ChainSpec spec = reference_chain(2);
  const fock::FockSpace fs(2);
  const CMatrix rho = fock::gaussian_density(steady_state(spec).C, fs);
  const fock::WtdOracle oracle(spec, rho);
  EXPECT_NEAR(oracle.survival(0.0, rho), 1.0, 1e-13);
  EXPECT_LT(oracle.survival(10.0, rho), oracle.survival(1.0, rho));
  EXPECT_GT(oracle.survival(10.0, rho), 0.0);
}

TEST(VerifyTracedet, AllIdentitiesPass) {
  const fock::VerificationReport r = fock::verify_tracedet(99, 4);
  EXPECT_TRUE(r.all_pass()) << r.to_text();
  EXPECT_NE(r.to_text().find("split_mm"), std::string::npos);
}

}  // namespace
