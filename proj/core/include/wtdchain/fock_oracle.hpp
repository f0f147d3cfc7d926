#pragma once

// Brute-force many-body reference for small chains. Operators act on the
// 2^L-dimensional occupation basis with site 1 as the leftmost tensor factor
// (most significant bit of the basis index); c_i carries the Jordan-Wigner
// string prod_{k<i} (1 - 2 n_k). Superoperators act on column-stacked
// density matrices, vec(A rho B) = (B^T (x) A) vec(rho).

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "wtdchain/chain_model.hpp"

namespace wtdchain::fock {

constexpr int kMaxSites = 4;
constexpr int kMaxSitesOverride = 5;

class FockSpace {
 public:
  /// 1 <= L <= 4, or L <= 5 when allow_large is set.
  explicit FockSpace(int sites, bool allow_large = false);

  int sites() const noexcept { return sites_; }
  Eigen::Index dim() const noexcept { return Eigen::Index{1} << sites_; }

  const CMatrix& annihilator(int i) const { return c_.at(static_cast<std::size_t>(i)); }
  CMatrix creator(int i) const { return annihilator(i).adjoint(); }
  CMatrix number(int i) const { return creator(i) * annihilator(i); }
  CMatrix identity() const { return CMatrix::Identity(dim(), dim()); }

  /// sum_ij X_ij c_i^dag c_j
  CMatrix quadratic_form(const CMatrix& x) const;

  /// Largest deviation from {c_i, c_j^dag} = delta_ij, {c_i, c_j} = 0.
  double anticommutation_defect() const;

 private:
  int sites_;
  std::vector<CMatrix> c_;
};

/// Annihilation operators c_1..c_L; throws if the algebra check fails.
std::vector<CMatrix> build_fermions(int sites, bool allow_large = false);

/// e^A through a dense eigendecomposition when it reconstructs A to 1e-10,
/// otherwise by scaling and squaring.
CMatrix dense_expm(const CMatrix& a);

CMatrix superop_left(const CMatrix& a);           // rho -> A rho
CMatrix superop_right(const CMatrix& b);          // rho -> rho B
CMatrix superop_sandwich(const CMatrix& a, const CMatrix& b);  // rho -> A rho B

struct Liouvillian {
  CMatrix full;      // -i[H, .] + sum of dissipators
  CMatrix no_jump;   // -i(H_e rho - rho H_e^dag)
  std::array<CMatrix, 4> jumps;  // indexed by Channel::ordinal()
};

CMatrix many_body_hamiltonian(const ChainSpec& spec, const FockSpace& space);
/// H - (i/2)[g1^- c1^dag c1 + g1^+ c1 c1^dag + gL^- cL^dag cL + gL^+ cL cL^dag]
CMatrix effective_hamiltonian(const ChainSpec& spec, const FockSpace& space);

Liouvillian build_liouvillian(const ChainSpec& spec, const FockSpace& space);

/// tr(rho c_j^dag c_i) for all i, j.
CMatrix covariance(const CMatrix& rho, const FockSpace& space);

/// Null vector of the full Liouvillian as a normalized density matrix.
CMatrix oracle_steady_state(const ChainSpec& spec, const FockSpace& space);

/// rho = e^{-sum M_ij c_i^dag c_j} / Z with e^M = (1 - C)/C; C eigenvalues
/// must lie strictly inside (0, 1).
CMatrix gaussian_density(const CMatrix& c, const FockSpace& space);

/// |0><0|
CMatrix vacuum_density(const FockSpace& space);

/// Direct evaluation of P(t, k|q) = tr J_k e^{L0 t} J_q(rho) / tr J_q(rho).
/// The q-jump enters without its rate, which cancels in the ratio.
class WtdOracle {
 public:
  WtdOracle(const ChainSpec& spec, const CMatrix& rho, bool allow_large = false);

  double wtd(double t, const Channel& k, const Channel& q) const;
  /// tr(e^{L0 t} rho') for a unit-trace state rho'.
  double survival(double t, const CMatrix& rho) const;
  /// Probability weight tr(c rho c^dag) or tr(c^dag rho c) of the bare q-jump.
  double jump_weight(const Channel& q) const;

  const FockSpace& space() const noexcept { return space_; }
  const Liouvillian& liouvillian() const noexcept { return liouvillian_; }

 private:
  CVector propagate(double t, const CVector& vec_rho) const;

  ChainSpec spec_;
  FockSpace space_;
  CMatrix rho_;
  Liouvillian liouvillian_;
  bool diagonalized_ = false;
  CVector eigenvalues_;
  CMatrix eigenvectors_;
  std::unique_ptr<LuFactors> eigenvector_lu_;
};

double oracle_wtd(double t, const Channel& k, const Channel& q, const CMatrix& rho,
                  const ChainSpec& spec);

struct IdentityCheck {
  std::string identity;
  int sites = 0;
  int draws = 0;
  double max_deviation = 0.0;
  double threshold = 1e-9;
  bool pass() const { return max_deviation <= threshold; }
};

struct VerificationReport {
  std::vector<IdentityCheck> checks;

  bool all_pass() const;
  /// Plain-text table: identity, L, draws, max deviation, PASS/FAIL.
  std::string to_text() const;
};

/// Fock-space left-hand side vs single-particle right-hand side for every
/// trace-determinant identity, on random complex coefficient matrices with
/// entries of modulus <= 1.
VerificationReport verify_tracedet(std::uint64_t seed, int draws,
                                   const std::vector<int>& sizes = {2, 3},
                                   double threshold = 1e-9);

}  // namespace wtdchain::fock
