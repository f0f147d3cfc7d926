#include "wtdchain/wtd_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

namespace wtdchain {

namespace {

double occupation(const GaussianState& state, Eigen::Index j) {
  return state.C(j, j).real();
}

// Applies the sign/clamp/imaginary policy to prefactor * bracket.
void finalize(double prefactor, Complex bracket, double term_scale,
              const WtdOptions& options, double& value, std::uint32_t& flags) {
  if (std::abs(bracket.imag()) >
      options.imaginary_tolerance * std::abs(bracket) + 1e-13 * term_scale) {
    flags |= kWtdImaginaryResidue;
  }
  value = prefactor * bracket.real();
  if (value < 0.0) {
    if (bracket.real() >= -1e-12 * std::max(term_scale, 1.0)) {
      value = 0.0;
      flags |= kWtdClamped;
    } else {
      flags |= kWtdNegative;
    }
  }
}

// Vacuum densities after an injection at j, given G = e^{-Qt}.
double vacuum_density(const CMatrix& g, double envelope, double rate,
                      const Channel& k, Eigen::Index i, Eigen::Index j) {
  if (rate == 0.0) return 0.0;
  // (e^{-Qt})_ij (e^{-Q^dag t})_ji = |G_ij|^2
  const double transfer = std::norm(g(i, j));
  if (k.jump == Jump::Extract) return rate * envelope * transfer;
  const double stay = g.col(j).squaredNorm();  // (G^dag G)_jj
  return rate * envelope * std::max(stay - transfer, 0.0);
}

}  // namespace

WtdEvaluator::WtdEvaluator(const ChainSpec& spec, const GaussianState& state,
                           WtdOptions options)
    : spec_(spec), sp_(derive_single_particle(spec)), state_(state), options_(options) {
  if (state_.C.rows() != spec_.size() || state_.C.cols() != spec_.size()) {
    throw ValidationError("WtdEvaluator: state dimension does not match the chain");
  }
  if (state_.kind != StateKind::Vacuum) {
    const ExponentFactors factors = gaussian_exponent_factors(state_);
    e_minus_ = factors.e_minus;
    log_det_one_minus_c_ = -factors.log_z.log_abs;
  }
}

bool WtdEvaluator::admissible(const Channel& q) const {
  if (state_.kind == StateKind::Vacuum) return q.jump == Jump::Inject;
  const double n = occupation(state_, q.index(spec_.size()));
  return q.jump == Jump::Inject ? (1.0 - n) > 1e-14 : n > 1e-14;
}

WtdTable WtdEvaluator::evaluate_vacuum(double t) const {
  WtdTable table;
  table.t = t;
  const auto n = spec_.size();
  const CMatrix g = expm(-t * sp_.Q);
  const double envelope = std::exp(-sp_.Gamma * t);
  for (const Channel& q : all_channels()) {
    if (q.jump == Jump::Extract) continue;
    const Eigen::Index j = q.index(n);
    for (const Channel& k : all_channels()) {
      table.value(k.ordinal(), q.ordinal()) =
          vacuum_density(g, envelope, k.rate(spec_), k, k.index(n), j);
    }
  }
  return table;
}

WtdTable WtdEvaluator::evaluate(double t) const {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw ValidationError("wtd: time must be finite and >= 0");
  }
  if (state_.kind == StateKind::Vacuum) return evaluate_vacuum(t);

  const auto n = spec_.size();
  const CMatrix g = expm(-t * sp_.Q);
  const CMatrix g_adj = options_.independent_adjoint_propagator
                            ? expm(-t * sp_.Q.adjoint())
                            : CMatrix(g.adjoint());
  const CMatrix ga = g * e_minus_;
  // K = e^{-Qt} e^{-M} e^{-Q^dag t}; D = det(1 + K); S = (1 + K)^{-1}; T = S K.
  const CMatrix k_mat = ga * g_adj;
  const CMatrix ident = CMatrix::Identity(n, n);

  WtdTable table;
  table.t = t;
  std::unique_ptr<LuFactors> lu;
  try {
    lu = std::make_unique<LuFactors>(ident + k_mat);
  } catch (const SingularMatrixError& e) {
    std::ostringstream os;
    os << "wtd: singular (1 + K) system at t = " << t << ": " << e.what();
    throw NumericalError(os.str());
  }
  const CMatrix s = lu->solve(ident);
  const double rc = lu->rcond();
  table.cond_estimate = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
  const bool ill = table.cond_estimate > options_.condition_threshold;

  // log(D / Z) - Gamma t, with Z = 1 / det(1 - C).
  const double log_envelope =
      lu->logdet().log_abs + log_det_one_minus_c_ - sp_.Gamma * t;
  const double envelope = std::exp(log_envelope);

  for (const Channel& q : all_channels()) {
    const Eigen::Index j = q.index(n);
    const double n_j = occupation(state_, j);
    const bool after_injection = q.jump == Jump::Inject;
    const double denom = after_injection ? 1.0 - n_j : n_j;
    if (!(denom > 1e-14)) {
      // The q-jump cannot occur from this state; the conditional law is empty.
      for (const Channel& k : all_channels()) {
        table.value(k.ordinal(), q.ordinal()) = 0.0;
      }
      continue;
    }
    // Column vector entering the q-jump: e^{-Qt} e_j after injection,
    // e^{-Qt} e^{-M} e_j after extraction.
    const CVector u = after_injection ? CVector(g.col(j)) : CVector(ga.col(j));
    const CVector su = s * u;
    const Eigen::RowVectorXcd us = u.adjoint() * s;
    const Complex usu = us * u;
    const Complex first = after_injection ? usu : e_minus_(j, j) - usu;

    for (const Channel& k : all_channels()) {
      const Eigen::Index i = k.index(n);
      const double rate = k.rate(spec_);
      double& value = table.value(k.ordinal(), q.ordinal());
      std::uint32_t& flags = table.flags(k.ordinal(), q.ordinal());
      if (rate == 0.0) {
        value = 0.0;
        continue;
      }
      const Complex s_ii = s(i, i);
      const Complex t_ii = s.row(i) * k_mat.col(i);
      const Complex cross = su(i) * us(i);
      // Extraction at i weighs by T_ii, injection by S_ii = 1 - T_ii; the
      // cross term enters with + for (-|+), (+|-) and - for (+|+), (-|-).
      const Complex occ = k.jump == Jump::Extract ? t_ii : s_ii;
      const double sign = (k.jump == Jump::Extract) == after_injection ? 1.0 : -1.0;
      const Complex bracket = first * occ + sign * cross;
      const double scale = std::abs(first * occ) + std::abs(cross);
      finalize(rate * envelope / denom, bracket, scale, options_, value, flags);
      if (ill) flags |= kWtdIllConditioned;
    }
  }
  return table;
}

double wtd_density_vacuum(double t, const Channel& k, const Channel& q,
                          const ChainSpec& spec) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw ValidationError("wtd: time must be finite and >= 0");
  }
  if (q.jump == Jump::Extract) return 0.0;
  const SingleParticleSet sp = derive_single_particle(spec);
  const auto n = spec.size();
  return vacuum_density(expm(-t * sp.Q), std::exp(-sp.Gamma * t), k.rate(spec), k,
                        k.index(n), q.index(n));
}

WtdPoint wtd_point(double t, const Channel& k, const Channel& q,
                   const GaussianState& state, const ChainSpec& spec,
                   const WtdOptions& options) {
  return WtdEvaluator(spec, state, options).evaluate(t).point(k, q);
}

double wtd_density(double t, const Channel& k, const Channel& q,
                   const GaussianState& state, const ChainSpec& spec,
                   const WtdOptions& options) {
  return wtd_point(t, k, q, state, spec, options).value;
}

TimeGrid TimeGrid::uniform(double t_max, std::size_t points) {
  if (!(t_max > 0.0) || points < 2) {
    throw ValidationError("TimeGrid: need t_max > 0 and at least 2 points");
  }
  TimeGrid grid;
  grid.times.resize(points);
  for (std::size_t p = 0; p < points; ++p) {
    grid.times[p] = t_max * static_cast<double>(p) / static_cast<double>(points - 1);
  }
  return grid;
}

TimeGrid TimeGrid::default_for(const ChainSpec& spec, std::size_t points) {
  const SingleParticleSet sp = derive_single_particle(spec);
  const auto n = spec.size();
  double j_eff = 0.0;
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      if (a != b) j_eff = std::max(j_eff, std::abs(spec.h(a, b)));
    }
  }
  double decay = sp.Gamma;
  if (decay <= 0.0) decay = std::max(spec.gamma1, spec.gammaL);
  double t_max = 0.0;
  if (decay > 0.0) t_max = 20.0 / decay;
  if (j_eff > 0.0) t_max = std::max(t_max, 4.0 * static_cast<double>(n) / j_eff);
  if (t_max <= 0.0) t_max = 1.0;
  return uniform(t_max, points);
}

std::size_t WtdCurve::flagged_points() const {
  return static_cast<std::size_t>(std::count_if(
      points.begin(), points.end(), [](const WtdPoint& p) { return p.flags != kWtdOk; }));
}

void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t)>& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  if (workers <= 1) {
    for (std::size_t idx = 0; idx < count; ++idx) fn(idx);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t idx = next++; idx < count; idx = next++) {
        try {
          fn(idx);
        } catch (...) {
          const std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

WtdCurve wtd_curve(const Channel& k, const Channel& q, const WtdEvaluator& evaluator,
                   const TimeGrid& grid, unsigned workers) {
  for (std::size_t p = 1; p < grid.times.size(); ++p) {
    if (!(grid.times[p] > grid.times[p - 1])) {
      throw ValidationError("wtd_curve: time grid must be strictly increasing");
    }
  }
  if (!grid.times.empty() && grid.times.front() < 0.0) {
    throw ValidationError("wtd_curve: time grid must start at t >= 0");
  }
  WtdCurve curve{k, q, evaluator.state().kind, {}};
  curve.points.resize(grid.times.size());
  parallel_for(grid.times.size(), workers, [&](std::size_t p) {
    curve.points[p] = evaluator.evaluate(grid.times[p]).point(k, q);
  });
  return curve;
}

}  // namespace wtdchain
