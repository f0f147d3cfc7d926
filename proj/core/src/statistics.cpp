#include "wtdchain/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace wtdchain {

namespace {

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1]. Odd entries of kXgk
// are the Gauss nodes; the last one is the centre.
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082,
                           0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975,
                           0.417959183673469387755102040816327};

struct Panel {
  double a = 0.0;
  double b = 0.0;
  Eigen::VectorXd integral;
  Eigen::VectorXd error;
  Eigen::VectorXd envelope;  // max over nodes of |f| e^{r(t-b)} (b/t)^n
  bool evaluated = false;
};

void evaluate_panel(Panel& panel, const VectorIntegrand& in) {
  const double centre = 0.5 * (panel.a + panel.b);
  const double half = 0.5 * (panel.b - panel.a);
  const Eigen::Index dim = in.dimension;
  Eigen::VectorXd kronrod = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd gauss = Eigen::VectorXd::Zero(dim);
  panel.envelope = Eigen::VectorXd::Zero(dim);

  auto accumulate_envelope = [&](double t, const Eigen::VectorXd& fx) {
    if (t <= 0.0) return;
    const double decay = std::exp(in.decay_rate * (t - panel.b));
    for (Eigen::Index c = 0; c < dim; ++c) {
      const double ratio = std::pow(panel.b / t, in.tail_powers[static_cast<std::size_t>(c)]);
      panel.envelope(c) = std::max(panel.envelope(c), std::abs(fx(c)) * decay * ratio);
    }
  };
  auto sample = [&](double t) {
    Eigen::VectorXd fx = in.f(t);
    if (fx.size() != dim) throw ValidationError("integrand returned the wrong dimension");
    if (!fx.allFinite()) {
      std::ostringstream os;
      os << "integrand is not finite at t = " << t;
      throw NumericalError(os.str());
    }
    accumulate_envelope(t, fx);
    return fx;
  };

  const Eigen::VectorXd fc = sample(centre);
  kronrod += kWgk[7] * fc;
  gauss += kWg[3] * fc;
  for (int p = 0; p < 7; ++p) {
    const double dx = half * kXgk[p];
    const Eigen::VectorXd sum = sample(centre - dx) + sample(centre + dx);
    kronrod += kWgk[p] * sum;
    if (p % 2 == 1) gauss += kWg[p / 2] * sum;
  }
  panel.integral = half * kronrod;
  panel.error = (half * (kronrod - gauss)).cwiseAbs();
  panel.evaluated = true;
}

// int_b^inf (t/b)^n e^{-r(t-b)} dt
double tail_integral(double b, double r, int n) {
  double sum = 1.0 / r;
  if (n >= 1) sum += n / (b * r * r);
  if (n >= 2) sum += n * (n - 1) / (b * b * r * r * r);
  return sum;
}

void append_panels(std::vector<Panel>& panels, double from, double to, double width) {
  const auto count = static_cast<std::size_t>(std::max(1.0, std::ceil((to - from) / width)));
  const double step = (to - from) / static_cast<double>(count);
  for (std::size_t p = 0; p < count; ++p) {
    Panel panel;
    panel.a = from + step * static_cast<double>(p);
    panel.b = p + 1 == count ? to : from + step * static_cast<double>(p + 1);
    panels.push_back(std::move(panel));
  }
}

std::size_t evaluate_pending(std::vector<Panel>& panels, const VectorIntegrand& in,
                             unsigned workers) {
  std::vector<std::size_t> pending;
  for (std::size_t p = 0; p < panels.size(); ++p) {
    if (!panels[p].evaluated) pending.push_back(p);
  }
  parallel_for(pending.size(), workers,
               [&](std::size_t idx) { evaluate_panel(panels[pending[idx]], in); });
  return pending.size() * 15;
}

}  // namespace

VectorQuadratureResult integrate_semiinfinite(const VectorIntegrand& in,
                                              const QuadratureOptions& options) {
  const Eigen::Index dim = in.dimension;
  if (dim <= 0 || in.tolerances.size() != dim ||
      static_cast<Eigen::Index>(in.tail_powers.size()) != dim) {
    throw ValidationError("integrate_semiinfinite: inconsistent integrand dimensions");
  }
  if ((in.tolerances.array() <= 0.0).any()) {
    throw ValidationError("integrate_semiinfinite: tolerances must be positive");
  }
  for (int n : in.tail_powers) {
    if (n < 0 || n > 2) throw ValidationError("integrate_semiinfinite: tail power must be 0..2");
  }
  if (!(in.decay_rate > 0.0) || !std::isfinite(in.decay_rate)) {
    throw NumericalError(
        "integrate_semiinfinite: no dissipative decay scale (decay rate <= 0), the "
        "tail of the integral cannot be bounded");
  }
  const double r = in.decay_rate;
  const double tol_min = in.tolerances.minCoeff();

  double cutoff = 0.0;
  if (options.forced_cutoff) {
    cutoff = *options.forced_cutoff;
    if (!(cutoff > 0.0)) throw ValidationError("integrate_semiinfinite: forced cutoff must be > 0");
  } else {
    const double amplitude = std::max(in.amplitude, 1e-300);
    cutoff = std::max(std::log(std::max(10.0 * amplitude / (r * tol_min), 1.0)) / r, 1.0 / r);
  }
  double width = in.initial_panel > 0.0 ? in.initial_panel : cutoff / 16.0;
  width = std::min(width, cutoff / 4.0);

  std::vector<Panel> panels;
  append_panels(panels, 0.0, cutoff, width);
  std::size_t evaluations = 0;
  Eigen::VectorXd tail = Eigen::VectorXd::Zero(dim);

  for (;;) {
    evaluations += evaluate_pending(panels, in, options.workers);

    // Local criterion: each panel gets its share of 0.9 tol by length.
    bool split_any = false;
    std::vector<Panel> next;
    next.reserve(panels.size());
    for (Panel& panel : panels) {
      const double share = 0.9 * (panel.b - panel.a) / cutoff;
      bool split = false;
      if (panel.b - panel.a > 1e-10 * cutoff) {
        for (Eigen::Index c = 0; c < dim && !split; ++c) {
          split = panel.error(c) > share * in.tolerances(c);
        }
      }
      if (split) {
        split_any = true;
        const double mid = 0.5 * (panel.a + panel.b);
        Panel left, right;
        left.a = panel.a;
        left.b = mid;
        right.a = mid;
        right.b = panel.b;
        next.push_back(std::move(left));
        next.push_back(std::move(right));
      } else {
        next.push_back(std::move(panel));
      }
    }
    panels = std::move(next);
    if (panels.size() > options.max_panels) {
      std::ostringstream os;
      os << "integrate_semiinfinite: refinement did not converge within "
         << options.max_panels << " panels (cutoff " << cutoff << ")";
      throw NumericalError(os.str());
    }
    if (split_any) continue;

    const Panel& last = panels.back();
    double extend = 0.0;
    for (Eigen::Index c = 0; c < dim; ++c) {
      tail(c) = last.envelope(c) *
                tail_integral(last.b, r, in.tail_powers[static_cast<std::size_t>(c)]);
      if (tail(c) > 0.1 * in.tolerances(c)) {
        extend = std::max(extend, std::log(10.0 * tail(c) / in.tolerances(c)) / r);
      }
    }
    if (options.forced_cutoff || extend == 0.0) break;
    const double new_cutoff = cutoff + std::max(extend * 1.25, width);
    append_panels(panels, cutoff, new_cutoff, width);
    cutoff = new_cutoff;
  }

  VectorQuadratureResult result;
  result.value = Eigen::VectorXd::Zero(dim);
  result.abs_error_estimate = Eigen::VectorXd::Zero(dim);
  for (const Panel& panel : panels) {
    result.value += panel.integral;
    result.abs_error_estimate += panel.error;
  }
  result.truncation_tail_bound = tail;
  result.evaluations = evaluations;
  result.cutoff = cutoff;
  return result;
}

QuadratureResult integrate_semiinfinite(const std::function<double(double)>& f,
                                        double decay_rate,
                                        const QuadratureOptions& options) {
  VectorIntegrand in;
  in.dimension = 1;
  in.f = [&f](double t) { return Eigen::VectorXd::Constant(1, f(t)); };
  in.tolerances = Eigen::VectorXd::Constant(1, options.tolerance);
  in.tail_powers = {0};
  in.decay_rate = decay_rate;
  in.amplitude = std::max(std::abs(f(0.0)), 1.0);
  in.initial_panel = decay_rate > 0.0 ? 1.0 / decay_rate : 1.0;
  return integrate_semiinfinite(in, options).component(0);
}

double tail_decay_rate(const ChainSpec& spec) {
  const SingleParticleSet sp = derive_single_particle(spec);
  const EigenDecomposition ed = eig(sp.Q);
  double rate = sp.Gamma;
  for (Eigen::Index k = 0; k < ed.values.size(); ++k) {
    rate += 2.0 * std::min(0.0, ed.values(k).real());
  }
  if (!(rate > 1e-14)) {
    std::ostringstream os;
    os << "no dissipative decay scale: the no-jump evolution decays at rate " << rate
       << ", so waiting-time integrals cannot be bounded";
    throw NumericalError(os.str());
  }
  return rate;
}

Eigen::Vector4d jump_frequencies(const GaussianState& state, const ChainSpec& spec) {
  const auto n = spec.size();
  if (state.C.rows() != n) throw ValidationError("jump_frequencies: state dimension mismatch");
  Eigen::Vector4d w;
  for (const Channel& q : all_channels()) {
    const double occ = state.C(q.index(n), q.index(n)).real();
    const double weight = q.jump == Jump::Inject ? 1.0 - occ : occ;
    w(q.ordinal()) = q.rate(spec) * std::max(weight, 0.0);
  }
  const double total = w.sum();
  if (!(total > 0.0)) throw ValidationError("jump_frequencies: no channel can fire from this state");
  return w / total;
}

namespace {

double max_rate(const ChainSpec& spec) {
  double m = 0.0;
  for (const Channel& c : all_channels()) m = std::max(m, c.rate(spec));
  return m;
}

double panel_width(const ChainSpec& spec, double decay) {
  const EigenDecomposition ed = eig(derive_single_particle(spec).Q);
  double omega = decay;
  for (Eigen::Index k = 0; k < ed.values.size(); ++k) {
    omega = std::max(omega, std::abs(ed.values(k)));
  }
  return 1.5 / omega;
}

}  // namespace

ChannelStats channel_statistics(const WtdEvaluator& evaluator,
                                const StatisticsOptions& options) {
  const ChainSpec& spec = evaluator.spec();
  const double r = tail_decay_rate(spec);
  const double scale = std::max(1.0, 1.0 / r);

  VectorIntegrand in;
  in.dimension = 48;
  in.tolerances.resize(48);
  in.tail_powers.resize(48);
  for (int n = 0; n < 3; ++n) {
    for (int c = 0; c < 16; ++c) {
      in.tolerances(16 * n + c) = options.quadrature.tolerance * std::pow(scale, n);
      in.tail_powers[static_cast<std::size_t>(16 * n + c)] = n;
    }
  }
  in.decay_rate = r;
  in.amplitude = 10.0 * max_rate(spec);
  in.initial_panel = panel_width(spec, r);
  in.f = [&evaluator](double t) {
    const WtdTable table = evaluator.evaluate(t);
    Eigen::VectorXd out(48);
    for (int k = 0; k < 4; ++k) {
      for (int q = 0; q < 4; ++q) {
        const double v = table.value(k, q);
        out(4 * k + q) = v;
        out(16 + 4 * k + q) = t * v;
        out(32 + 4 * k + q) = t * t * v;
      }
    }
    return out;
  };
  const VectorQuadratureResult res = integrate_semiinfinite(in, options.quadrature);

  ChannelStats stats;
  stats.evaluations = res.evaluations;
  stats.cutoff = res.cutoff;
  stats.p_q = jump_frequencies(evaluator.state(), spec);
  for (const Channel& q : all_channels()) {
    stats.admissible[static_cast<std::size_t>(q.ordinal())] = evaluator.admissible(q);
  }
  for (int k = 0; k < 4; ++k) {
    for (int q = 0; q < 4; ++q) {
      const int c = 4 * k + q;
      const double p = res.value(c);
      stats.p_kq(k, q) = p;
      stats.p_error(k, q) = res.abs_error_estimate(c) + res.truncation_tail_bound(c);
      if (p > options.min_probability) {
        const double m1 = res.value(16 + c) / p;
        const double m2 = res.value(32 + c) / p;
        stats.mean(k, q) = m1;
        stats.variance(k, q) = std::max(m2 - m1 * m1, 0.0);
        stats.defined(k, q) = true;
      }
    }
  }
  return stats;
}

ChannelStats channel_statistics(const GaussianState& state, const ChainSpec& spec,
                                const StatisticsOptions& options) {
  return channel_statistics(WtdEvaluator(spec, state, options.wtd), options);
}

double channel_probability(const Channel& k, const Channel& q, const GaussianState& state,
                           const ChainSpec& spec, const StatisticsOptions& options) {
  return channel_statistics(state, spec, options).p_kq(k.ordinal(), q.ordinal());
}

std::pair<double, double> conditional_moments(const Channel& k, const Channel& q,
                                              const GaussianState& state,
                                              const ChainSpec& spec,
                                              const StatisticsOptions& options) {
  const ChannelStats stats = channel_statistics(state, spec, options);
  if (!stats.defined(k.ordinal(), q.ordinal())) {
    std::ostringstream os;
    os << "conditional_moments: p(" << k.name() << "|" << q.name()
       << ") = " << stats.p_kq(k.ordinal(), q.ordinal())
       << " vanishes; the conditional waiting-time law is undefined";
    throw ValidationError(os.str());
  }
  return {stats.mean(k.ordinal(), q.ordinal()), stats.variance(k.ordinal(), q.ordinal())};
}

double normalization_audit(const Channel& q, const GaussianState& state,
                           const ChainSpec& spec, const StatisticsOptions& options) {
  const WtdEvaluator evaluator(spec, state, options.wtd);
  if (!evaluator.admissible(q)) {
    std::ostringstream os;
    os << "normalization_audit: channel " << q.name()
       << " cannot fire from this state, P(t,k|" << q.name() << ") is undefined";
    throw ValidationError(os.str());
  }
  return channel_statistics(evaluator, options).p_kq.col(q.ordinal()).sum();
}

namespace {

void require_steady(const GaussianState& state) {
  if (state.kind != StateKind::Steady) {
    throw ValidationError(
        "natd: the net activity distribution is defined for the steady state only (got " +
        std::string(to_string(state.kind)) + ")");
  }
}

}  // namespace

double natd(double t, const WtdEvaluator& evaluator) {
  require_steady(evaluator.state());
  const Eigen::Vector4d p_q = jump_frequencies(evaluator.state(), evaluator.spec());
  return (evaluator.evaluate(t).value * p_q).sum();
}

double natd(double t, const GaussianState& state, const ChainSpec& spec,
            const WtdOptions& options) {
  require_steady(state);
  return natd(t, WtdEvaluator(spec, state, options));
}

NatdMoments natd_moments(const WtdEvaluator& evaluator, const StatisticsOptions& options) {
  require_steady(evaluator.state());
  const ChainSpec& spec = evaluator.spec();
  const Eigen::Vector4d p_q = jump_frequencies(evaluator.state(), spec);
  const double r = tail_decay_rate(spec);
  const double scale = std::max(1.0, 1.0 / r);

  VectorIntegrand in;
  in.dimension = 3;
  in.tolerances = Eigen::Vector3d(options.quadrature.tolerance,
                                  options.quadrature.tolerance * scale,
                                  options.quadrature.tolerance * scale * scale);
  in.tail_powers = {0, 1, 2};
  in.decay_rate = r;
  in.amplitude = 10.0 * max_rate(spec);
  in.initial_panel = panel_width(spec, r);
  in.f = [&](double t) {
    const double p = (evaluator.evaluate(t).value * p_q).sum();
    return Eigen::VectorXd(Eigen::Vector3d(p, t * p, t * t * p));
  };
  const VectorQuadratureResult res = integrate_semiinfinite(in, options.quadrature);

  NatdMoments m;
  m.normalization = res.value(0);
  if (!(m.normalization > options.min_probability)) {
    throw NumericalError("natd_moments: the net activity density integrates to zero");
  }
  m.mean = res.value(1) / m.normalization;
  m.variance = std::max(res.value(2) / m.normalization - m.mean * m.mean, 0.0);
  m.mean_quadrature = res.component(1);
  return m;
}

NatdMoments natd_moments(const GaussianState& state, const ChainSpec& spec,
                         const StatisticsOptions& options) {
  require_steady(state);
  return natd_moments(WtdEvaluator(spec, state, options.wtd), options);
}

}  // namespace wtdchain
