#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"

#include "wtdchain/fock_oracle.hpp"
#include "wtdchain/statistics.hpp"

namespace wtdchain::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) { return format_double(v); }

GaussianState initial_state(const RunConfig& config, const ChainSpec& spec) {
  if (config.initial_state == StateKind::Vacuum) return vacuum_state(spec.size());
  return steady_state(spec);
}

TimeGrid grid_for(const RunConfig& config, const ChainSpec& spec) {
  const auto points = static_cast<std::size_t>(config.points);
  if (config.t_max) return TimeGrid::uniform(*config.t_max, points);
  return TimeGrid::default_for(spec, points);
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  return out;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out = open_output(path);
  out << j.dump(2) << '\n';
}

json config_json(const RunConfig& c) {
  json j;
  j["model"] = {{"kind", c.model == ModelKind::TightBinding ? "tight_binding" : "custom_h"},
                {"L", c.sites},
                {"V", c.v},
                {"J", c.j},
                {"h_file", c.h_file}};
  j["baths"] = {{"gamma1", c.gamma1}, {"gammaL", c.gammaL}, {"f1", c.f1}, {"fL", c.fL}};
  j["run"] = {{"initial_state", std::string(to_string(c.initial_state))}};
  j["grid"] = {{"t_max", c.t_max ? json(*c.t_max) : json(nullptr)}, {"points", c.points}};
  j["tolerances"] = {{"quadrature", c.quadrature_tol}, {"oracle", c.oracle_tol}};
  j["output"] = {{"directory", c.output_dir}};
  return j;
}

json matrix_json(const Eigen::Matrix4d& m, const Eigen::Matrix<bool, 4, 4>* defined = nullptr) {
  json rows = json::array();
  for (int k = 0; k < 4; ++k) {
    json row = json::array();
    for (int q = 0; q < 4; ++q) {
      if (defined && !(*defined)(k, q)) {
        row.push_back(nullptr);
      } else {
        row.push_back(m(k, q));
      }
    }
    rows.push_back(row);
  }
  return rows;
}

json channel_names() {
  json names = json::array();
  for (const Channel& c : all_channels()) names.push_back(c.name());
  return names;
}

}  // namespace

std::string channel_tag(const Channel& ch) {
  return std::string(ch.site == Site::First ? "1" : "L") + (ch.jump == Jump::Inject ? "p" : "m");
}

fs::path cmd_wtd(const RunConfig& config, const Channel& to, const Channel& from,
                 const fs::path& out_dir, std::ostream& log) {
  const ChainSpec spec = build_spec(config);
  const GaussianState state = initial_state(config, spec);
  const WtdEvaluator evaluator(spec, state);
  if (!evaluator.admissible(from)) {
    throw ValidationError("--from " + from.name() + ": this jump cannot occur from the " +
                          std::string(to_string(state.kind)) +
                          " state, so P(t, k|" + from.name() + ") is undefined");
  }
  const TimeGrid grid = grid_for(config, spec);
  const WtdCurve curve = wtd_curve(to, from, evaluator, grid);

  const fs::path path = out_dir / ("wtd_" + std::string(to_string(state.kind)) + "_L" +
                                   std::to_string(spec.size()) + "_" + channel_tag(to) + "_" +
                                   channel_tag(from) + ".csv");
  std::ofstream out = open_output(path);
  out << "# wtdchain wtd: P(t, " << to.name() << "|" << from.name() << ")\n";
  out << to_ini(config, "# ");
  out << "t,density,flag\n";
  for (const WtdPoint& p : curve.points) {
    out << fmt(p.t) << ',' << fmt(p.value) << ',' << p.flags << '\n';
  }
  log << "wrote " << path.string() << " (" << curve.points.size() << " points";
  if (curve.flagged_points() > 0) log << ", " << curve.flagged_points() << " flagged";
  log << ")\n";
  return path;
}

fs::path cmd_natd(const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
  if (config.initial_state != StateKind::Steady) {
    throw ValidationError(
        "[run] initial_state: natd is defined for the steady state only, got " +
        std::string(to_string(config.initial_state)));
  }
  const ChainSpec spec = build_spec(config);
  const GaussianState state = steady_state(spec);
  const WtdEvaluator evaluator(spec, state);
  const Eigen::Vector4d p_q = jump_frequencies(state, spec);
  const TimeGrid grid = grid_for(config, spec);

  std::vector<double> values(grid.times.size());
  std::vector<std::uint32_t> flags(grid.times.size());
  parallel_for(grid.times.size(), 0, [&](std::size_t p) {
    const WtdTable table = evaluator.evaluate(grid.times[p]);
    values[p] = (table.value * p_q).sum();
    std::uint32_t f = kWtdOk;
    for (int k = 0; k < 4; ++k) {
      for (int q = 0; q < 4; ++q) {
        if (p_q(q) > 0.0) f |= table.flags(k, q);
      }
    }
    flags[p] = f;
  });

  const fs::path path = out_dir / ("natd_L" + std::to_string(spec.size()) + ".csv");
  std::ofstream out = open_output(path);
  out << "# wtdchain natd: sum_{k,q} P(t, k|q) p(q)\n";
  out << to_ini(config, "# ");
  out << "t,density,flag\n";
  for (std::size_t p = 0; p < grid.times.size(); ++p) {
    out << fmt(grid.times[p]) << ',' << fmt(values[p]) << ',' << flags[p] << '\n';
  }
  log << "wrote " << path.string() << " (" << grid.times.size() << " points)\n";
  return path;
}

StatsOutcome cmd_stats(const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
  const ChainSpec spec = build_spec(config);
  const GaussianState state = initial_state(config, spec);
  StatisticsOptions options;
  options.quadrature.tolerance = config.quadrature_tol;
  const WtdEvaluator evaluator(spec, state, options.wtd);
  const ChannelStats stats = channel_statistics(evaluator, options);

  StatsOutcome outcome;
  json& j = outcome.report;
  j["channels"] = channel_names();
  j["p_kq"] = matrix_json(stats.p_kq);
  j["mean"] = matrix_json(stats.mean, &stats.defined);
  j["variance"] = matrix_json(stats.variance, &stats.defined);
  j["p_q"] = json::array();
  for (int q = 0; q < 4; ++q) j["p_q"].push_back(stats.p_q(q));

  json audit = json::object();
  for (const Channel& q : all_channels()) {
    if (!stats.admissible[static_cast<std::size_t>(q.ordinal())]) {
      audit[q.name()] = nullptr;
      continue;
    }
    const double sum = stats.p_kq.col(q.ordinal()).sum();
    audit[q.name()] = sum;
    if (!(std::abs(sum - 1.0) <= kAuditTolerance)) outcome.audit_pass = false;
  }
  j["normalization_audit"] = audit;
  j["audit_pass"] = outcome.audit_pass;

  if (state.kind == StateKind::Steady) {
    const NatdMoments m = natd_moments(evaluator, options);
    j["natd_mean"] = m.mean;
    j["natd_variance"] = m.variance;
  } else {
    j["natd_mean"] = nullptr;
    j["natd_variance"] = nullptr;
  }
  j["quadrature"] = {{"tolerance", options.quadrature.tolerance},
                     {"cutoff", stats.cutoff},
                     {"evaluations", stats.evaluations}};
  j["config"] = config_json(config);

  outcome.path = out_dir / ("stats_" + std::string(to_string(state.kind)) + "_L" +
                            std::to_string(spec.size()) + ".json");
  write_json(outcome.path, j);
  log << "wrote " << outcome.path.string();
  if (state.kind == StateKind::Steady) log << " (natd_mean " << fmt(j["natd_mean"].get<double>()) << ")";
  log << "\n";
  if (!outcome.audit_pass) {
    log << "normalization audit failed: " << audit.dump() << "\n";
  }
  return outcome;
}

VerifyOutcome cmd_verify(const RunConfig& config, const fs::path& out_dir,
                         const VerifyOptions& options, std::ostream& log) {
  const ChainSpec spec = build_spec(config);
  const auto sites = static_cast<int>(spec.size());
  const int limit = options.allow_large_oracle ? fock::kMaxSitesOverride : fock::kMaxSites;
  if (sites > limit) {
    std::ostringstream os;
    os << "verify: L = " << sites << " exceeds the Fock-space oracle limit of " << limit
       << " sites (the oracle works with 4^L x 4^L superoperators)";
    if (!options.allow_large_oracle && sites <= fock::kMaxSitesOverride) {
      os << "; pass --allow-large-oracle to run L = " << fock::kMaxSitesOverride;
    }
    throw ValidationError(os.str());
  }

  VerifyOutcome outcome;
  json& j = outcome.report;
  bool pass = true;

  const fock::VerificationReport td =
      fock::verify_tracedet(options.seed, options.tracedet_draws, {2, 3});
  json checks = json::array();
  for (const auto& c : td.checks) {
    checks.push_back({{"identity", c.identity},
                      {"L", c.sites},
                      {"draws", c.draws},
                      {"max_deviation", c.max_deviation},
                      {"threshold", c.threshold},
                      {"pass", c.pass()}});
  }
  j["tracedet"] = {{"checks", checks}, {"pass", td.all_pass()}};
  pass = pass && td.all_pass();
  log << td.to_text();

  const fock::FockSpace space(sites, options.allow_large_oracle);
  std::mt19937_64 rng(options.seed);
  const double gamma_min = std::min(spec.gamma1, spec.gammaL);
  const double t_max = config.t_max ? *config.t_max : (gamma_min > 0.0 ? 20.0 / gamma_min : 20.0);
  std::uniform_real_distribution<double> time_dist(0.0, t_max);
  std::vector<double> times(static_cast<std::size_t>(options.oracle_times));
  for (double& t : times) t = time_dist(rng);

  json equivalence = json::array();
  std::vector<StateKind> kinds{StateKind::Vacuum};
  if (spec.gamma1 > 0.0 && spec.gammaL > 0.0) kinds.insert(kinds.begin(), StateKind::Steady);
  for (const StateKind kind : kinds) {
    const GaussianState state =
        kind == StateKind::Steady ? steady_state(spec) : vacuum_state(spec.size());
    const CMatrix rho = kind == StateKind::Steady ? fock::gaussian_density(state.C, space)
                                                  : fock::vacuum_density(space);
    const fock::WtdOracle oracle(spec, rho, options.allow_large_oracle);
    const WtdEvaluator evaluator(spec, state);
    double max_rel = 0.0;
    double max_abs = 0.0;
    int compared = 0;
    int failures = 0;
    for (const double t : times) {
      const Eigen::Matrix4d closed = options.densities ? options.densities(evaluator, t)
                                                       : evaluator.evaluate(t).value;
      for (const Channel& q : all_channels()) {
        if (oracle.jump_weight(q) < 1e-14) continue;
        for (const Channel& k : all_channels()) {
          const double a = closed(k.ordinal(), q.ordinal());
          const double b = oracle.wtd(t, k, q);
          const double diff = std::abs(a - b);
          max_abs = std::max(max_abs, diff);
          if (std::abs(b) > 0.0) max_rel = std::max(max_rel, diff / std::abs(b));
          ++compared;
          if (diff > std::max(config.oracle_tol * std::abs(b), 1e-12)) ++failures;
        }
      }
    }
    const bool ok = failures == 0;
    pass = pass && ok;
    equivalence.push_back({{"state", std::string(to_string(kind))},
                           {"compared", compared},
                           {"failures", failures},
                           {"max_relative_deviation", max_rel},
                           {"max_absolute_deviation", max_abs},
                           {"pass", ok}});
    log << "oracle equivalence (" << to_string(kind) << "): " << compared << " values, "
        << failures << " failures, max rel dev " << fmt(max_rel) << " -> "
        << (ok ? "PASS" : "FAIL") << "\n";
  }
  j["oracle_equivalence"] = equivalence;

  if (spec.gamma1 > 0.0 && spec.gammaL > 0.0) {
    const CMatrix c_closed = steady_state(spec).C;
    const CMatrix c_oracle = fock::covariance(fock::oracle_steady_state(spec, space), space);
    const double dev = (c_closed - c_oracle).cwiseAbs().maxCoeff();
    const bool ok = dev <= 1e-8;
    pass = pass && ok;
    j["steady_state_covariance"] = {{"max_deviation", dev}, {"threshold", 1e-8}, {"pass", ok}};
    log << "steady-state covariance: max dev " << fmt(dev) << " -> " << (ok ? "PASS" : "FAIL")
        << "\n";
  }

  j["seed"] = options.seed;
  j["times"] = times;
  j["pass"] = pass;
  j["config"] = config_json(config);
  outcome.pass = pass;
  outcome.path = out_dir / ("verify_L" + std::to_string(sites) + ".json");
  write_json(outcome.path, j);
  log << "verify: " << (pass ? "PASS" : "FAIL") << " (report " << outcome.path.string() << ")\n";
  return outcome;
}

double loglog_slope(const std::vector<BenchRow>& rows) {
  if (rows.size() < 2) return 0.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const auto n = static_cast<double>(rows.size());
  for (const BenchRow& r : rows) {
    const double x = std::log(static_cast<double>(r.sites));
    const double y = std::log(r.seconds_per_point);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

BenchOutcome cmd_bench(const RunConfig& config, const std::vector<int>& sizes,
                       const fs::path& out_dir, std::ostream& log) {
  if (config.model != ModelKind::TightBinding) {
    throw ValidationError("[model] kind: bench sweeps L and needs a tight_binding model");
  }
  if (sizes.size() < 2) throw ValidationError("--sizes: need at least two chain sizes");
  using clock = std::chrono::steady_clock;
  BenchOutcome outcome;
  const Channel to{Site::Last, Jump::Extract};
  const Channel from{Site::First, Jump::Inject};
  for (const int sites : sizes) {
    if (sites < 2) throw ValidationError("--sizes: chain sizes must be >= 2");
    RunConfig c = config;
    c.sites = sites;
    const ChainSpec spec = build_spec(c);
    const GaussianState state = initial_state(c, spec);
    const double t = 10.0 / std::max(std::max(spec.gamma1, spec.gammaL), 1e-3);
    // Best of a few repetitions; small sizes repeat until 50 ms accumulate.
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < 3; ++rep) {
      int calls = 0;
      const auto start = clock::now();
      double elapsed = 0.0;
      do {
        volatile double sink = wtd_density(t, to, from, state, spec);
        (void)sink;
        ++calls;
        elapsed = std::chrono::duration<double>(clock::now() - start).count();
      } while (elapsed < 0.05);
      best = std::min(best, elapsed / calls);
    }
    outcome.rows.push_back({sites, best});
    log << "L = " << sites << ": " << fmt(best) << " s per point\n";
  }
  outcome.slope = loglog_slope(outcome.rows);
  outcome.pass = outcome.slope <= kMaxScalingSlope;

  outcome.path = out_dir / "bench.csv";
  std::ofstream out = open_output(outcome.path);
  out << "# wtdchain bench: seconds per wtd_density point, P(t, L-|1+)\n";
  out << to_ini(config, "# ");
  out << "# loglog_slope = " << fmt(outcome.slope) << " (limit " << kMaxScalingSlope << ")\n";
  out << "L,seconds_per_point\n";
  for (const BenchRow& r : outcome.rows) out << r.sites << ',' << fmt(r.seconds_per_point) << '\n';
  log << "log-log slope " << fmt(outcome.slope) << " -> " << (outcome.pass ? "PASS" : "FAIL")
      << "\n";
  return outcome;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Waiting-time distributions of boundary-driven free-fermion chains", "wtdchain"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "INI config file (defaults to the built-in L=2 model)")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory (overrides [output] directory)");
  };

  std::string from_name, to_name;
  auto* wtd = app.add_subcommand("wtd", "Write P(t, to|from) on the time grid as CSV");
  add_common(wtd);
  wtd->add_option("--from", from_name, "Conditioning jump q: 1-, 1+, L-, L+")->required();
  wtd->add_option("--to", to_name, "Next jump k: 1-, 1+, L-, L+")->required();

  auto* natd_cmd = app.add_subcommand("natd", "Write the steady-state net activity density as CSV");
  add_common(natd_cmd);

  std::vector<int> sweep;
  bool allow_audit_failure = false;
  auto* stats = app.add_subcommand("stats", "Channel probabilities, moments and audits as JSON");
  add_common(stats);
  stats->add_option("--sweep", sweep, "Comma-separated chain sizes, one JSON per L")
      ->delimiter(',');
  stats->add_flag("--allow-audit-failure", allow_audit_failure,
                  "Report a failed normalization audit as a warning");

  VerifyOptions verify_options;
  auto* verify = app.add_subcommand("verify", "Compare against the Fock-space oracle");
  add_common(verify);
  verify->add_option("--seed", verify_options.seed, "Seed for the random draws");
  verify->add_flag("--allow-large-oracle", verify_options.allow_large_oracle,
                   "Permit L = 5 in the oracle");

  std::vector<int> sizes{10, 50, 100, 200};
  auto* bench = app.add_subcommand("bench", "Time one density point across chain sizes");
  add_common(bench);
  bench->add_option("--sizes", sizes, "Comma-separated chain sizes")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
    const fs::path dir = out_dir.empty() ? fs::path(config.output_dir) : fs::path(out_dir);

    if (*wtd) {
      cmd_wtd(config, parse_channel(to_name), parse_channel(from_name), dir, out);
    } else if (*natd_cmd) {
      cmd_natd(config, dir, out);
    } else if (*stats) {
      bool audit_ok = true;
      if (sweep.empty()) sweep.push_back(config.sites);
      for (const int sites : sweep) {
        if (sites < 2) throw ValidationError("--sweep: chain sizes must be >= 2");
        if (config.model != ModelKind::TightBinding && sites != config.sites) {
          throw ValidationError("--sweep: a custom_h model has a fixed size");
        }
        RunConfig c = config;
        c.sites = sites;
        audit_ok = cmd_stats(c, dir, out).audit_pass && audit_ok;
      }
      if (!audit_ok) {
        if (!allow_audit_failure) {
          err << "error: normalization audit outside 1 +- " << kAuditTolerance << "\n";
          return kExitAudit;
        }
        err << "warning: normalization audit outside 1 +- " << kAuditTolerance << "\n";
      }
    } else if (*verify) {
      if (!cmd_verify(config, dir, verify_options, out).pass) return kExitAudit;
    } else if (*bench) {
      if (!cmd_bench(config, sizes, dir, out).pass) {
        err << "error: scaling slope above " << kMaxScalingSlope << "\n";
        return kExitAudit;
      }
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace wtdchain::cli
