// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <stdexcept>
#include <utility>
#include <string>
#include <vector>

#include "wtdchain/chain_model.hpp"
#include "wtdchain/fock_oracle.hpp"
#include "wtdchain/statistics.hpp"
#include "wtdchain/wtd_engine.hpp"

namespace {

using namespace wtdchain;

// Tolerances, pinned.
constexpr double kOracleRel = 1e-8;
constexpr double kOracleAbs = 1e-12;
constexpr double kTracedetDev = 1e-9;
constexpr double kNormTol = 1e-6;
constexpr double kNatdPointwise = 1e-8;
constexpr double kNatdMeanTol = 1e-4;
constexpr double kPeakR2 = 0.95;
constexpr double kTailSlopeRel = 0.10;
constexpr double kSuppressionR2 = 0.95;
constexpr double kPlateauVariation = 0.10;
constexpr double kMeanFlatness = 0.01;
constexpr double kSdToMean = 0.25;
constexpr double kVacuumLimitErr = 1e-6;
constexpr double kSymmetryTol = 1e-9;
constexpr double kMaxSecondsPerPoint = 10.0;
constexpr double kMaxSlope = 3.5;

const Channel k1p{Site::First, Jump::Inject};
const Channel kLm{Site::Last, Jump::Extract};

ChainSpec reference_chain(Eigen::Index sites, double gamma = 0.1) {
  return ChainSpec{build_tight_binding(sites, 1.0, 1.0), gamma, gamma, 1.0, 0.0};
}

ChainSpec generic_chain(Eigen::Index sites) {
  CMatrix h = build_tight_binding(sites, 0.3, 0.8);
  h(0, 1) = Complex(-0.8, 0.25);
  h(1, 0) = std::conj(h(0, 1));
  return ChainSpec{h, 0.37, 0.21, 0.7, 0.2};
}

struct Fit {
  double slope = 0.0;
  double r2 = 0.0;
};

Fit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sx += x[i], sy += y[i];
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  Fit f;
  f.slope = sxy / sxx;
  f.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int failures = 0;

void report(const std::string& id, bool pass, const std::string& detail, double secs) {
  if (!pass) ++failures;
  std::printf("%-4s %s  %s  (%.1f s)\n", pass ? "PASS" : "FAIL", id.c_str(), detail.c_str(),
              secs);
  std::fflush(stdout);
}

template <typename Fn>
bool run_guarded(const std::string& id, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    std::string detail;
    const bool ok = fn(detail);
    report(id, ok, detail, seconds_since(t0));
    return ok;
  } catch (const std::exception& e) {
    report(id, false, std::string("exception: ") + e.what(), seconds_since(t0));
    return false;
  }
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// 1: closed form vs brute-force master equation.
bool criterion1(std::string& detail) {
  std::mt19937_64 rng(20240601);
  double worst_rel = 0.0;
  int compared = 0, bad = 0;
  const std::vector<ChainSpec> chains{reference_chain(2), reference_chain(3), generic_chain(2),
                                      generic_chain(3)};
  for (const ChainSpec& spec : chains) {
    const int sites = static_cast<int>(spec.size());
    const fock::FockSpace space(sites);
    const double t_max = 20.0 / std::min(spec.gamma1, spec.gammaL);
    std::uniform_real_distribution<double> times(0.0, t_max);
    for (const StateKind kind : {StateKind::Steady, StateKind::Vacuum}) {
      const GaussianState state =
          kind == StateKind::Steady ? steady_state(spec) : vacuum_state(spec.size());
      const CMatrix rho = kind == StateKind::Steady ? fock::gaussian_density(state.C, space)
                                                    : fock::vacuum_density(space);
      const fock::WtdOracle oracle(spec, rho);
      const WtdEvaluator evaluator(spec, state);
      for (int n = 0; n < 10; ++n) {
        const double t = times(rng);
        const WtdTable table = evaluator.evaluate(t);
        for (const Channel& q : all_channels()) {
          if (oracle.jump_weight(q) < 1e-14) continue;  // P(.|q) undefined
          for (const Channel& k : all_channels()) {
            const double a = table(k, q);
            const double b = oracle.wtd(t, k, q);
            const double diff = std::abs(a - b);
            ++compared;
            if (diff > std::max(kOracleRel * std::abs(b), kOracleAbs)) ++bad;
            if (std::abs(b) > kOracleAbs) worst_rel = std::max(worst_rel, diff / std::abs(b));
          }
        }
      }
    }
  }
  detail = "oracle equivalence: " + std::to_string(compared) + " values, " +
           std::to_string(bad) + " outside tolerance, max rel dev " + fmt("%.2e", worst_rel);
  return bad == 0 && compared > 0;
}

// 2: trace-determinant identities vs Fock space.
bool criterion2(std::string& detail) {
  const fock::VerificationReport r = fock::verify_tracedet(777, 20, {2, 3}, kTracedetDev);
  double worst = 0.0;
  for (const auto& c : r.checks) worst = std::max(worst, c.max_deviation);
  std::printf("%s", r.to_text().c_str());
  detail = "trace-det identities: " + std::to_string(r.checks.size()) + " checks, max dev " +
           fmt("%.2e", worst);
  return r.all_pass();
}

// 3: sum_k p(k|q) = 1.
bool criterion3(std::string& detail) {
  double worst = 0.0;
  int audited = 0;
  for (const int sites : {2, 5, 10}) {
    const ChainSpec spec = reference_chain(sites);
    for (const StateKind kind : {StateKind::Steady, StateKind::Vacuum}) {
      const GaussianState state =
          kind == StateKind::Steady ? steady_state(spec) : vacuum_state(sites);
      const ChannelStats s = channel_statistics(state, spec);
      for (int q = 0; q < 4; ++q) {
        if (!s.admissible[q]) continue;
        worst = std::max(worst, std::abs(s.p_kq.col(q).sum() - 1.0));
        ++audited;
      }
    }
  }
  detail = "normalization: " + std::to_string(audited) + " (L, state, q) audits, max |sum-1| " +
           fmt("%.2e", worst);
  return audited > 0 && worst <= kNormTol;
}

// 4: two-site NATD in closed form.
bool criterion4(std::string& detail) {
  const double g = 0.1, j = 1.0;
  const ChainSpec spec = reference_chain(2, g);
  const GaussianState state = steady_state(spec);
  const WtdEvaluator evaluator(spec, state);
  double worst = 0.0;
  const double w = std::sqrt(4 * j * j - g * g);
  for (int n = 0; n <= 5000; ++n) {
    const double t = 0.01 * n;
    const double exact = g / (2 * (g * g - 4 * j * j)) * std::exp(-g * t) *
                         (g * g - 8 * j * j + 4 * j * j * std::cos(t * w));
    worst = std::max(worst, std::abs(natd(t, evaluator) - exact));
  }
  const NatdMoments m = natd_moments(evaluator);
  const double expected = 1 / g + g / (4 * j * j);
  detail = fmt("L=2 NATD: max pointwise dev %.2e on [0,50]; E(T) = %.8f (expect %.6f)", worst,
               m.mean, expected);
  return worst <= kNatdPointwise && std::abs(m.mean - expected) <= kNatdMeanTol;
}

// 5a: first arrival peak of the vacuum P(t, L-|1+) moves linearly with L.
bool criterion5a(std::string& detail) {
  std::vector<double> ls, peaks;
  for (const int sites : {5, 10, 20}) {
    const ChainSpec spec = reference_chain(sites);
    const double dt = 0.005;
    std::vector<double> f;
    for (double t = 0.0; t <= 4.0 * sites + 20.0; t += dt) {
      f.push_back(wtd_density_vacuum(t, kLm, k1p, spec));
    }
    const double top = *std::max_element(f.begin(), f.end());
    double peak = -1.0;
    for (std::size_t i = 1; i + 1 < f.size(); ++i) {
      if (f[i] > 1e-3 * top && f[i] >= f[i - 1] && f[i] > f[i + 1]) {
        peak = dt * static_cast<double>(i);
        break;
      }
    }
    if (peak < 0) throw std::runtime_error("no peak found at L = " + std::to_string(sites));
    ls.push_back(sites);
    peaks.push_back(peak);
  }
  const Fit fit = linear_fit(ls, peaks);
  detail = fmt("5a first peak t* = %.3f, %.3f, %.3f for L = 5, 10, 20; R^2 = %.4f", peaks[0],
               peaks[1], peaks[2], fit.r2);
  return fit.slope > 0 && fit.r2 > kPeakR2;
}

// 5b: steady tail of P(t, L-|1+) at L = 50 decays at rate gamma.
bool criterion5b(std::string& detail) {
  const double g = 0.1;
  const ChainSpec spec = reference_chain(50, g);
  const WtdEvaluator evaluator(spec, steady_state(spec));
  std::vector<double> ts, logs;
  for (double t = 100.0; t <= 300.0 + 1e-9; t += 2.0) {
    const double v = evaluator.evaluate(t)(kLm, k1p);
    if (v <= 0) throw std::runtime_error("non-positive density in tail");
    ts.push_back(t);
    logs.push_back(std::log(v));
  }
  const Fit fit = linear_fit(ts, logs);
  detail = fmt("5b L=50 tail slope %.5f (expect %.3f), R^2 = %.4f", fit.slope, -g, fit.r2);
  return std::abs(fit.slope + g) <= kTailSlopeRel * g;
}

// 5c: vacuum p(L-|1+) is exponentially suppressed in L.
bool criterion5c(std::string& detail) {
  std::vector<double> ls, logp;
  bool monotone = true;
  double prev = 2.0;
  for (int sites = 4; sites <= 12; ++sites) {
    const ChainSpec spec = reference_chain(sites);
    const double p = channel_probability(kLm, k1p, vacuum_state(sites), spec);
    monotone = monotone && p < prev;
    prev = p;
    ls.push_back(sites);
    logp.push_back(std::log(p));
  }
  const Fit fit = linear_fit(ls, logp);
  detail = fmt("5c vacuum p(L-|1+): %.4f at L=4, %.4f at L=12; ln p vs L slope %.4f, R^2 = %.4f",
               std::exp(logp.front()), std::exp(logp.back()), fit.slope, fit.r2);
  return monotone && fit.slope < 0 && fit.r2 > kSuppressionR2;
}

// 5d: steady p(L-|1+) plateaus.
bool criterion5d(std::string& detail) {
  std::vector<double> p;
  for (const int sites : {10, 20, 40}) {
    const ChainSpec spec = reference_chain(sites);
    p.push_back(channel_probability(kLm, k1p, steady_state(spec), spec));
  }
  const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
  const double mean = (p[0] + p[1] + p[2]) / 3.0;
  const double variation = (*hi - *lo) / mean;
  detail = fmt("5d steady p(L-|1+) = %.4f, %.4f, %.4f for L = 10, 20, 40; variation %.3f", p[0],
               p[1], p[2], variation);
  return variation < kPlateauVariation;
}

// 5e: NATD mean independent of L, SD close to the mean.
bool criterion5e(std::string& detail) {
  std::vector<double> means, sds;
  for (const int sites : {2, 5, 10, 20}) {
    const ChainSpec spec = reference_chain(sites);
    const NatdMoments m = natd_moments(steady_state(spec), spec);
    means.push_back(m.mean);
    sds.push_back(std::sqrt(m.variance));
  }
  const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
  const double spread = (*hi - *lo) / *lo;
  double sd_dev = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    sd_dev = std::max(sd_dev, std::abs(sds[i] - means[i]) / means[i]);
  }
  detail = fmt("5e NATD E(T) in [%.5f, %.5f] (spread %.2e), max |SD-E|/E = %.3f", *lo, *hi,
               spread, sd_dev);
  return spread < kMeanFlatness && sd_dev <= kSdToMean;
}

// 6: C = lambda I approaches the exact vacuum formulas.
bool criterion6(std::string& detail) {
  std::vector<double> errors;
  const std::vector<ChainSpec> chains{reference_chain(4), generic_chain(4)};
  for (const double lambda : {1e-4, 1e-6, 1e-8}) {
    double err = 0.0;
    for (const ChainSpec& spec : chains) {
      const CMatrix c = CMatrix::Identity(spec.size(), spec.size()) * lambda;
      const WtdEvaluator evaluator(spec, custom_state(c));
      std::vector<WtdTable> tables;
      Eigen::Matrix4d peak = Eigen::Matrix4d::Zero();
      Eigen::Matrix4d dev = Eigen::Matrix4d::Zero();
      for (int n = 0; n <= 200; ++n) {
        const double t = 0.5 * n;
        const WtdTable table = evaluator.evaluate(t);
        for (const Channel& q : all_channels()) {
          if (q.jump != Jump::Inject || q.rate(spec) <= 0) continue;
          for (const Channel& k : all_channels()) {
            const double exact = wtd_density_vacuum(t, k, q, spec);
            peak(k.ordinal(), q.ordinal()) =
                std::max(peak(k.ordinal(), q.ordinal()), std::abs(exact));
            dev(k.ordinal(), q.ordinal()) = std::max(dev(k.ordinal(), q.ordinal()),
                                                     std::abs(table(k, q) - exact));
          }
        }
      }
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          if (peak(a, b) > 0) err = std::max(err, dev(a, b) / peak(a, b));
        }
      }
    }
    errors.push_back(err);
  }
  detail = fmt("vacuum limit: peak-relative error %.2e, %.2e, %.2e at lambda = 1e-4, 1e-6, 1e-8",
               errors[0], errors[1], errors[2]);
  return errors[0] > errors[1] && errors[1] > errors[2] && errors[2] <= kVacuumLimitErr;
}

// 7: left-right symmetry of the reference chain.
bool criterion7(std::string& detail) {
  double worst = 0.0;
  for (const int sites : {5, 10}) {
    const ChainSpec spec = reference_chain(sites);
    const WtdEvaluator evaluator(spec, steady_state(spec));
    for (int n = 0; n <= 400; ++n) {
      const WtdTable w = evaluator.evaluate(0.5 * n);
      worst = std::max(worst, std::abs(w(kLm, k1p) - w(k1p, kLm)));
      worst = std::max(worst, std::abs(w(k1p, k1p) - w(kLm, kLm)));
    }
  }
  detail = fmt("symmetry: max |P(L-|1+) - P(1+|L-)|, |P(1+|1+) - P(L-|L-)| = %.2e", worst);
  return worst <= kSymmetryTol;
}

// 8: cost per density point.
bool criterion8(std::string& detail) {
  std::vector<double> ls, logs;
  double at200 = 0.0;
  std::string rows;
  for (const int sites : {10, 50, 100, 200}) {
    const ChainSpec spec = reference_chain(sites);
    const GaussianState state = steady_state(spec);
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
      int calls = 0;
      const auto t0 = std::chrono::steady_clock::now();
      double sink = 0.0;
      do {
        sink += wtd_density(37.0 + calls, kLm, k1p, state, spec);
        ++calls;
      } while (seconds_since(t0) < 0.05);
      best = std::min(best, seconds_since(t0) / calls);
      if (sink < 0) std::printf("negative\n");
    }
    ls.push_back(std::log(sites));
    logs.push_back(std::log(best));
    if (sites == 200) at200 = best;
    rows += fmt(" L=%g:%.2es", sites, best);
  }
  const Fit fit = linear_fit(ls, logs);
  detail = "scalability:" + rows + fmt("; log-log slope %.2f", fit.slope);
  return at200 < kMaxSecondsPerPoint && fit.slope <= kMaxSlope;
}

}  // namespace

int main() {
  run_guarded("1", criterion1);
  run_guarded("2", criterion2);
  run_guarded("3", criterion3);
  run_guarded("4", criterion4);
  const auto t5 = std::chrono::steady_clock::now();
  int sub_failures = 0;
  for (const auto& [id, fn] : std::vector<std::pair<std::string, bool (*)(std::string&)>>{
           {"5a", criterion5a}, {"5b", criterion5b}, {"5c", criterion5c},
           {"5d", criterion5d}, {"5e", criterion5e}}) {
    if (!run_guarded(id, fn)) ++sub_failures;
  }
  // Sub-lines already counted; the aggregate line only summarizes.
  failures -= sub_failures;
  report("5", sub_failures == 0,
         "figure-level checks: " + std::to_string(5 - sub_failures) + "/5 pass",
         seconds_since(t5));
  run_guarded("6", criterion6);
  run_guarded("7", criterion7);
  run_guarded("8", criterion8);
  std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
