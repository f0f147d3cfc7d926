#pragma once

#include <array>
#include <string>
#include <string_view>

#include "wtdchain/matrix_core.hpp"

namespace wtdchain {

/// A free-fermion chain H = sum_ij h_ij c_i^dag c_j with Lindblad baths
/// attached to the first and last site.
struct ChainSpec {
  CMatrix h;
  double gamma1 = 0.0;
  double gammaL = 0.0;
  double f1 = 0.0;
  double fL = 0.0;

  Eigen::Index size() const noexcept { return h.rows(); }

  /// Throws ValidationError unless L >= 2, h is Hermitian, rates are >= 0
  /// and the Fermi factors lie in [0, 1].
  void validate() const;
};

enum class Site { First, Last };
enum class Jump { Extract, Inject };  // D[c] (minus) and D[c^dag] (plus)

/// One of the four detector channels 1-, 1+, L-, L+.
struct Channel {
  Site site = Site::First;
  Jump jump = Jump::Extract;

  Eigen::Index index(Eigen::Index chain_size) const noexcept {
    return site == Site::First ? 0 : chain_size - 1;
  }
  /// gamma f for injection, gamma (1 - f) for extraction.
  double rate(const ChainSpec& spec) const noexcept;
  std::string name() const;
  /// Position in all_channels().
  int ordinal() const noexcept {
    return 2 * (site == Site::Last ? 1 : 0) + (jump == Jump::Inject ? 1 : 0);
  }

  friend bool operator==(const Channel&, const Channel&) = default;
};

/// {1-, 1+, L-, L+}
constexpr std::array<Channel, 4> all_channels() {
  return {Channel{Site::First, Jump::Extract}, Channel{Site::First, Jump::Inject},
          Channel{Site::Last, Jump::Extract}, Channel{Site::Last, Jump::Inject}};
}

/// Parses "1-", "1+", "L-", "L+".
Channel parse_channel(std::string_view text);

/// W = i h + diag(gamma1, 0, ..., gammaL)/2, F = diag(gamma1 f1, 0, ..., gammaL fL),
/// Q = W - F and Gamma = gamma1 f1 + gammaL fL.
struct SingleParticleSet {
  CMatrix W;
  CMatrix F;
  CMatrix Q;
  double Gamma = 0.0;
};

enum class StateKind { Steady, Vacuum, Custom };

std::string_view to_string(StateKind kind);

/// Gaussian state described by its covariance C_ij = <c_j^dag c_i>.
struct GaussianState {
  CMatrix C;
  StateKind kind = StateKind::Custom;
  /// Regularization C = lambda I, only meaningful for the vacuum marker.
  double lambda = 0.0;
};

/// h_ii = -V, h_{i,i+1} = h_{i+1,i} = -J.
CMatrix build_tight_binding(Eigen::Index size, double v, double j);

SingleParticleSet derive_single_particle(const ChainSpec& spec);

/// Fixed point of dC/dt = -(W C + C W^dag) + F.
GaussianState steady_state(const ChainSpec& spec,
                           const LyapunovOptions& options = {});

constexpr double kDefaultVacuumLambda = 1e-10;

GaussianState vacuum_state(Eigen::Index size,
                           double lambda = kDefaultVacuumLambda);

/// Builds a Custom state after checking C is Hermitian with spectrum in [0, 1].
GaussianState custom_state(const CMatrix& c);

/// C(t) = C_ss + e^{-Wt} (C0 - C_ss) e^{-W^dag t}, the exact solution of the
/// covariance dynamics started from C0.
CMatrix relax_covariance(const ChainSpec& spec, const CMatrix& c0, double t);

constexpr double kDefaultOccupationClip = 1e-12;

/// e^{+M} = (1 - C) C^{-1}, e^{-M} = C (1 - C)^{-1} and log Z, where
/// Z = det(1 + e^{-M}) = 1 / det(1 - C). M itself is never formed.
struct ExponentFactors {
  CMatrix e_plus;
  CMatrix e_minus;
  LogDet log_z;
  int clipped_eigenvalues = 0;
};

ExponentFactors gaussian_exponent_factors(
    const GaussianState& state, double eps_occ = kDefaultOccupationClip);

}  // namespace wtdchain
