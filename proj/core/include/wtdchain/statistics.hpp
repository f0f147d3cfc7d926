#pragma once

#include <cstddef>
#include <array>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "wtdchain/wtd_engine.hpp"

namespace wtdchain {

struct QuadratureResult {
  double value = 0.0;
  double abs_error_estimate = 0.0;
  std::size_t evaluations = 0;
  double truncation_tail_bound = 0.0;
  double cutoff = 0.0;
};

struct QuadratureOptions {
  /// Absolute tolerance on each density integral; moments get tol / r^n.
  double tolerance = 1e-8;
  /// Integrate on [0, forced_cutoff] only, with no tail extension. The tail
  /// bound is still reported. Used to demonstrate truncation in audits.
  std::optional<double> forced_cutoff;
  std::size_t max_panels = 200000;
  unsigned workers = 0;
};

/// Component-wise result of a vector quadrature.
struct VectorQuadratureResult {
  Eigen::VectorXd value;
  Eigen::VectorXd abs_error_estimate;
  Eigen::VectorXd truncation_tail_bound;
  std::size_t evaluations = 0;
  double cutoff = 0.0;

  QuadratureResult component(Eigen::Index c) const {
    return {value(c), abs_error_estimate(c), evaluations, truncation_tail_bound(c), cutoff};
  }
};

/// f maps t to a vector of integrands. Component c is assumed to be bounded
/// by B_c t^{power_c} e^{-decay t}; B_c is estimated on the last panel and the
/// range is extended until B_c * int_T^inf t^n e^{-decay t} dt < tol_c / 10.
struct VectorIntegrand {
  std::function<Eigen::VectorXd(double)> f;
  Eigen::Index dimension = 0;
  Eigen::VectorXd tolerances;
  std::vector<int> tail_powers;  // 0, 1 or 2
  double decay_rate = 0.0;
  /// Bound on |f| used for the first cutoff guess.
  double amplitude = 1.0;
  /// Target panel width for the initial partition.
  double initial_panel = 1.0;
};

VectorQuadratureResult integrate_semiinfinite(const VectorIntegrand& integrand,
                                              const QuadratureOptions& options = {});

/// Scalar form; decay_rate is the exponential envelope of f.
QuadratureResult integrate_semiinfinite(const std::function<double(double)>& f,
                                        double decay_rate,
                                        const QuadratureOptions& options = {});

/// Slowest decay of the no-jump evolution: Gamma + 2 sum_k min(0, Re q_k)
/// over eigenvalues q_k of Q. Throws NumericalError when it is not positive.
double tail_decay_rate(const ChainSpec& spec);

/// Jump frequencies tr J_q rho for the channels in all_channels() order,
/// normalized to sum 1.
Eigen::Vector4d jump_frequencies(const GaussianState& state, const ChainSpec& spec);

struct StatisticsOptions {
  QuadratureOptions quadrature;
  WtdOptions wtd;
  /// Conditional moments need p(k|q) above this.
  double min_probability = 1e-12;
};

struct ChannelStats {
  Eigen::Matrix4d p_kq = Eigen::Matrix4d::Zero();      // row k, column q
  Eigen::Matrix4d mean = Eigen::Matrix4d::Zero();
  Eigen::Matrix4d variance = Eigen::Matrix4d::Zero();
  Eigen::Vector4d p_q = Eigen::Vector4d::Zero();
  Eigen::Matrix4d p_error = Eigen::Matrix4d::Zero();   // quadrature + tail bound
  /// Conditional moments exist (p(k|q) above min_probability).
  Eigen::Matrix<bool, 4, 4> defined = Eigen::Matrix<bool, 4, 4>::Constant(false);
  std::array<bool, 4> admissible{};
  std::size_t evaluations = 0;
  double cutoff = 0.0;
};

/// p(k|q), E(T|k,q) and var(T|k,q) for all 16 pairs from one quadrature.
ChannelStats channel_statistics(const WtdEvaluator& evaluator,
                                const StatisticsOptions& options = {});
ChannelStats channel_statistics(const GaussianState& state, const ChainSpec& spec,
                                const StatisticsOptions& options = {});

double channel_probability(const Channel& k, const Channel& q, const GaussianState& state,
                           const ChainSpec& spec, const StatisticsOptions& options = {});

/// (E(T|k,q), var(T|k,q)); throws ValidationError if p(k|q) <= min_probability.
std::pair<double, double> conditional_moments(const Channel& k, const Channel& q,
                                              const GaussianState& state,
                                              const ChainSpec& spec,
                                              const StatisticsOptions& options = {});

/// Sum_k p(k|q); passes when within kAuditTolerance of 1.
double normalization_audit(const Channel& q, const GaussianState& state,
                           const ChainSpec& spec, const StatisticsOptions& options = {});

constexpr double kAuditTolerance = 1e-6;

/// Net activity density sum_{k,q} P(t,k|q) p(q); the state must be steady.
double natd(double t, const GaussianState& state, const ChainSpec& spec,
            const WtdOptions& options = {});
double natd(double t, const WtdEvaluator& evaluator);

struct NatdMoments {
  double mean = 0.0;
  double variance = 0.0;
  double normalization = 0.0;  // integral of the density, ~1
  QuadratureResult mean_quadrature;
};

NatdMoments natd_moments(const GaussianState& state, const ChainSpec& spec,
                         const StatisticsOptions& options = {});
NatdMoments natd_moments(const WtdEvaluator& evaluator,
                         const StatisticsOptions& options = {});

}  // namespace wtdchain
