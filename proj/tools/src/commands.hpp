#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "config.hpp"
#include "wtdchain/wtd_engine.hpp"

namespace wtdchain::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitNumerical = 2,
  kExitAudit = 3,
};

/// Writes the resolved config as a '#' comment block, then `t,density,flag`.
/// Returns the path written.
std::filesystem::path cmd_wtd(const RunConfig& config, const Channel& to, const Channel& from,
                              const std::filesystem::path& out_dir, std::ostream& log);

std::filesystem::path cmd_natd(const RunConfig& config, const std::filesystem::path& out_dir,
                               std::ostream& log);

struct StatsOutcome {
  nlohmann::json report;
  std::filesystem::path path;
  bool audit_pass = true;
};

StatsOutcome cmd_stats(const RunConfig& config, const std::filesystem::path& out_dir,
                       std::ostream& log);

/// Closed-form densities fed to the oracle comparison; tests swap in a
/// corrupted one to check that verify notices.
using DensityTableFn = std::function<Eigen::Matrix4d(const WtdEvaluator&, double)>;

struct VerifyOptions {
  std::uint64_t seed = 12345;
  int tracedet_draws = 20;
  int oracle_times = 10;
  bool allow_large_oracle = false;
  DensityTableFn densities;  // empty: WtdEvaluator::evaluate
};

struct VerifyOutcome {
  nlohmann::json report;
  std::filesystem::path path;
  bool pass = false;
};

VerifyOutcome cmd_verify(const RunConfig& config, const std::filesystem::path& out_dir,
                         const VerifyOptions& options, std::ostream& log);

struct BenchRow {
  int sites = 0;
  double seconds_per_point = 0.0;
};

struct BenchOutcome {
  std::vector<BenchRow> rows;
  double slope = 0.0;
  std::filesystem::path path;
  bool pass = false;
};

constexpr double kMaxScalingSlope = 3.5;

BenchOutcome cmd_bench(const RunConfig& config, const std::vector<int>& sizes,
                       const std::filesystem::path& out_dir, std::ostream& log);

/// Least-squares slope of log(seconds) against log(L).
double loglog_slope(const std::vector<BenchRow>& rows);

/// File-name-safe channel label: 1m, 1p, Lm, Lp.
std::string channel_tag(const Channel& ch);

/// Entry point shared by main() and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wtdchain::cli
