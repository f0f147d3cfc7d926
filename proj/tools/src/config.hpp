#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>

#include "wtdchain/chain_model.hpp"

namespace wtdchain::cli {

enum class ModelKind { TightBinding, CustomH };

struct RunConfig {
  ModelKind model = ModelKind::TightBinding;
  int sites = 2;
  double v = 1.0;
  double j = 1.0;
  std::string h_file;

  double gamma1 = 0.1;
  double gammaL = 0.1;
  double f1 = 1.0;
  double fL = 0.0;

  StateKind initial_state = StateKind::Steady;

  std::optional<double> t_max;
  int points = 400;

  double quadrature_tol = 1e-8;
  double oracle_tol = 1e-8;

  std::string output_dir = "out";

  // Where relative paths (h_file) are resolved from.
  std::filesystem::path base_dir = ".";
};

/// Parses INI text. Every error message names the source, the line and the
/// [section] key it refers to.
RunConfig parse_config(std::istream& in, const std::string& source_name,
                       const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

/// Builds and validates the chain described by the config.
ChainSpec build_spec(const RunConfig& config);

/// Reads an L x L matrix stored as one row per line of re,im pairs.
CMatrix read_h_matrix(const std::filesystem::path& path);

/// Shortest text that reads back to the same double.
std::string format_double(double v);

/// Resolved config in INI form; with a prefix ("# ") it doubles as the
/// provenance block of output files.
std::string to_ini(const RunConfig& config, const std::string& prefix = "");

}  // namespace wtdchain::cli
