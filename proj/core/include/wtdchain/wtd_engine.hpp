#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "wtdchain/chain_model.hpp"

namespace wtdchain {

/// Diagnostic bits attached to a density value.
enum WtdFlag : std::uint32_t {
  kWtdOk = 0,
  kWtdClamped = 1u << 0,          // tiny negative roundoff clamped to zero
  kWtdIllConditioned = 1u << 1,   // (1 + K) solve above the condition threshold
  kWtdImaginaryResidue = 1u << 2, // imaginary part above tolerance
  kWtdNegative = 1u << 3,         // negative beyond roundoff; value kept as is
};

struct WtdOptions {
  double condition_threshold = 1e12;
  double imaginary_tolerance = 1e-9;
  /// Recompute e^{-Q^dag t} by a second exponential instead of taking the
  /// adjoint of e^{-Qt}. Only useful for consistency checks.
  bool independent_adjoint_propagator = false;
};

struct WtdPoint {
  double t = 0.0;
  double value = 0.0;
  double cond_estimate = 1.0;
  std::uint32_t flags = kWtdOk;
};

/// All sixteen densities P(t, k|q) at one time: entry (k.ordinal(), q.ordinal()).
struct WtdTable {
  double t = 0.0;
  Eigen::Matrix4d value = Eigen::Matrix4d::Zero();
  Eigen::Matrix<std::uint32_t, 4, 4> flags = Eigen::Matrix<std::uint32_t, 4, 4>::Zero();
  double cond_estimate = 1.0;

  double operator()(const Channel& k, const Channel& q) const {
    return value(k.ordinal(), q.ordinal());
  }
  WtdPoint point(const Channel& k, const Channel& q) const {
    return {t, value(k.ordinal(), q.ordinal()), cond_estimate,
            flags(k.ordinal(), q.ordinal())};
  }
};

/// Evaluates the closed-form waiting-time densities for one initial state.
/// State-dependent factors are prepared once; evaluate() is const and
/// thread-safe.
class WtdEvaluator {
 public:
  WtdEvaluator(const ChainSpec& spec, const GaussianState& state,
               WtdOptions options = {});

  WtdTable evaluate(double t) const;

  /// Whether P(., ., q) is defined for this state (tr of the q-jump > 0).
  bool admissible(const Channel& q) const;

  const ChainSpec& spec() const noexcept { return spec_; }
  const SingleParticleSet& single_particle() const noexcept { return sp_; }
  const GaussianState& state() const noexcept { return state_; }

 private:
  WtdTable evaluate_vacuum(double t) const;

  ChainSpec spec_;
  SingleParticleSet sp_;
  GaussianState state_;
  WtdOptions options_;
  CMatrix e_minus_;          // C (1 - C)^{-1}
  double log_det_one_minus_c_ = 0.0;
};

/// P(t, k|q) from a Gaussian initial state (dispatches to the vacuum formula
/// for StateKind::Vacuum).
double wtd_density(double t, const Channel& k, const Channel& q,
                   const GaussianState& state, const ChainSpec& spec,
                   const WtdOptions& options = {});

/// Same, with diagnostics.
WtdPoint wtd_point(double t, const Channel& k, const Channel& q,
                   const GaussianState& state, const ChainSpec& spec,
                   const WtdOptions& options = {});

/// Exact lambda -> 0 densities from the empty chain:
///   P(t, i-|j+) = g_i^- e^{-Gamma t} (e^{-Qt})_ij (e^{-Q^dag t})_ji
///   P(t, i+|j+) = g_i^+ e^{-Gamma t} [(e^{-Q^dag t} e^{-Qt})_jj - (e^{-Qt})_ij (e^{-Q^dag t})_ji]
/// and zero when q is an extraction channel.
double wtd_density_vacuum(double t, const Channel& k, const Channel& q,
                          const ChainSpec& spec);

struct TimeGrid {
  std::vector<double> times;

  static TimeGrid uniform(double t_max, std::size_t points);
  /// [0, max(20/Gamma, 4L/J_eff)] with 400 points by default.
  static TimeGrid default_for(const ChainSpec& spec, std::size_t points = 400);
};

struct WtdCurve {
  Channel to_channel;
  Channel from_channel;
  StateKind state_kind = StateKind::Custom;
  std::vector<WtdPoint> points;

  std::size_t flagged_points() const;
};

/// Samples P(t, k|q) on the grid; points are evaluated on a worker pool and
/// returned in grid order.
WtdCurve wtd_curve(const Channel& k, const Channel& q, const WtdEvaluator& evaluator,
                   const TimeGrid& grid, unsigned workers = 0);

/// Applies fn(index) for index in [0, count) on up to `workers` threads
/// (0 = hardware concurrency).
void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace wtdchain
