#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "config.hpp"

namespace {

namespace fs = std::filesystem;
using namespace wtdchain;
using namespace wtdchain::cli;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("wtdchain_cli_" + std::to_string(rd()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  int invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "wtdchain");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(CliTest, WtdIsDeterministicWithProvenance) {
  const std::string out = (dir_ / "o").string();
  ASSERT_EQ(invoke({"wtd", "--from", "1+", "--to", "L-", "--out", out}), kExitOk) << err_.str();
  const fs::path file = dir_ / "o" / "wtd_steady_L2_Lm_1p.csv";
  const std::string first = slurp(file);
  ASSERT_EQ(invoke({"wtd", "--from", "1+", "--to", "L-", "--out", out}), kExitOk);
  EXPECT_EQ(first, slurp(file));

  EXPECT_EQ(first.find('\r'), std::string::npos);
  EXPECT_EQ(first.rfind("# ", 0), 0u);
  EXPECT_NE(first.find("# gamma1 = 0.1\n"), std::string::npos);
  EXPECT_NE(first.find("\nt,density,flag\n"), std::string::npos);

  std::istringstream lines(first);
  std::string line;
  int rows = 0;
  bool header = false;
  while (std::getline(lines, line)) {
    if (line.rfind('#', 0) == 0) continue;
    if (!header) {
      header = true;
      continue;
    }
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 2) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 400);
}

TEST_F(CliTest, ZeroRateChannelGivesZeroColumn) {
  // f1 = 1 in the default config, so 1- never fires.
  ASSERT_EQ(invoke({"wtd", "--from", "L-", "--to", "1-", "--out", dir_.string()}), kExitOk);
  std::istringstream lines(slurp(dir_ / "wtd_steady_L2_1m_Lm.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 't') continue;
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    EXPECT_EQ(std::stod(line.substr(a + 1, b - a - 1)), 0.0);
    ++rows;
  }
  EXPECT_GT(rows, 0);
}

TEST_F(CliTest, StatsOnDefaultConfig) {
  ASSERT_EQ(invoke({"stats", "--out", dir_.string()}), kExitOk) << err_.str();
  const auto j = nlohmann::json::parse(slurp(dir_ / "stats_steady_L2.json"));
  for (const char* key : {"p_kq", "p_q", "mean", "variance", "natd_mean", "natd_variance",
                          "normalization_audit", "config"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_NEAR(j["natd_mean"].get<double>(), 10.025, 1e-4);
  EXPECT_NEAR(j["normalization_audit"]["1+"].get<double>(), 1.0, 1e-6);
  EXPECT_TRUE(j["mean"][0][1].is_null());  // 1- never follows anything
}

TEST_F(CliTest, StatsSweepWritesOneFilePerSize) {
  const fs::path cfg = write("vac.ini", "[run]\ninitial_state = vacuum\n");
  ASSERT_EQ(invoke({"stats", "--config", cfg.string(), "--sweep", "3,4", "--out",
                    dir_.string()}),
            kExitOk)
      << err_.str();
  EXPECT_TRUE(fs::exists(dir_ / "stats_vacuum_L3.json"));
  EXPECT_TRUE(fs::exists(dir_ / "stats_vacuum_L4.json"));
  const auto j = nlohmann::json::parse(slurp(dir_ / "stats_vacuum_L3.json"));
  EXPECT_TRUE(j["natd_mean"].is_null());
  EXPECT_TRUE(j["normalization_audit"]["L-"].is_null());
}

TEST_F(CliTest, ConfigErrorsNameLineAndField) {
  const fs::path cfg = write("bad.ini", "[model]\nL = 3\n\n[baths]\ngamma1 = 0.1\nf1 = 1.5\n");
  EXPECT_EQ(invoke({"stats", "--config", cfg.string()}), kExitValidation);
  EXPECT_NE(err_.str().find("bad.ini:6: [baths] f1"), std::string::npos) << err_.str();

  const fs::path unknown = write("unknown.ini", "[model]\nsites = 3\n");
  EXPECT_EQ(invoke({"stats", "--config", unknown.string()}), kExitValidation);
  EXPECT_NE(err_.str().find("unknown.ini:2: [model] sites: unknown key"), std::string::npos)
      << err_.str();

  const fs::path number = write("number.ini", "[grid]\npoints = many\n");
  EXPECT_EQ(invoke({"wtd", "--config", number.string(), "--from", "1+", "--to", "L-"}),
            kExitValidation);
  EXPECT_NE(err_.str().find("number.ini:2: [grid] points"), std::string::npos) << err_.str();

  const fs::path syntax = write("syntax.ini", "[model\nL = 3\n");
  EXPECT_EQ(invoke({"stats", "--config", syntax.string()}), kExitValidation);
  EXPECT_NE(err_.str().find("syntax.ini:1"), std::string::npos) << err_.str();
}

TEST_F(CliTest, CustomHamiltonianFile) {
  write("h.csv", "0,0,-1,0.5\n-1,-0.5,0.2,0\n");
  const fs::path cfg = write("custom.ini",
                             "[model]\nkind = custom_h\nh_file = h.csv\n[baths]\n"
                             "gamma1 = 0.3\ngammaL = 0.2\nf1 = 0.9\nfL = 0.1\n");
  const RunConfig c = load_config(cfg);
  const ChainSpec spec = build_spec(c);
  EXPECT_EQ(spec.size(), 2);
  EXPECT_EQ(spec.h(0, 1), Complex(-1.0, 0.5));
  EXPECT_EQ(invoke({"verify", "--config", cfg.string(), "--out", dir_.string()}), kExitOk)
      << err_.str();

  write("h.csv", "0,0,-1,0.5\n-1,-0.5,oops,0\n");
  EXPECT_EQ(invoke({"stats", "--config", cfg.string()}), kExitValidation);
  EXPECT_NE(err_.str().find("h.csv:2"), std::string::npos) << err_.str();
}

TEST_F(CliTest, VerifyPassesOnDefault) {
  EXPECT_EQ(invoke({"verify", "--out", dir_.string(), "--seed", "7"}), kExitOk) << out_.str();
  const auto j = nlohmann::json::parse(slurp(dir_ / "verify_L2.json"));
  EXPECT_TRUE(j["pass"].get<bool>());
  EXPECT_EQ(j["seed"].get<std::uint64_t>(), 7u);
}

TEST_F(CliTest, VerifyCatchesCorruptedFormula) {
  VerifyOptions options;
  options.tracedet_draws = 2;
  // Flip the sign of one density, as a broken cross term would.
  options.densities = [](const WtdEvaluator& ev, double t) {
    Eigen::Matrix4d v = ev.evaluate(t).value;
    v(2, 1) = -v(2, 1);
    return v;
  };
  std::ostringstream log;
  const VerifyOutcome outcome = cmd_verify(RunConfig{}, dir_, options, log);
  EXPECT_FALSE(outcome.pass);
  EXPECT_FALSE(outcome.report["oracle_equivalence"][0]["pass"].get<bool>());
}

TEST_F(CliTest, VerifyRefusesLargeChains) {
  const fs::path cfg = write("l5.ini", "[model]\nL = 5\n");
  EXPECT_EQ(invoke({"verify", "--config", cfg.string()}), kExitValidation);
  EXPECT_NE(err_.str().find("--allow-large-oracle"), std::string::npos) << err_.str();
  const fs::path cfg6 = write("l6.ini", "[model]\nL = 6\n");
  EXPECT_EQ(invoke({"verify", "--config", cfg6.string(), "--allow-large-oracle"}),
            kExitValidation);
}

TEST_F(CliTest, NatdNeedsSteadyState) {
  const fs::path cfg = write("vac.ini", "[run]\ninitial_state = vacuum\n");
  EXPECT_EQ(invoke({"natd", "--config", cfg.string()}), kExitValidation);
  ASSERT_EQ(invoke({"natd", "--out", dir_.string()}), kExitOk);
  EXPECT_TRUE(fs::exists(dir_ / "natd_L2.csv"));
}

TEST_F(CliTest, ImpossibleConditioningJump) {
  const fs::path cfg = write("vac.ini", "[run]\ninitial_state = vacuum\n");
  EXPECT_EQ(invoke({"wtd", "--config", cfg.string(), "--from", "L-", "--to", "1+"}),
            kExitValidation);
  EXPECT_EQ(invoke({"wtd", "--from", "2+", "--to", "1+"}), kExitValidation);
  EXPECT_EQ(invoke({"wtd", "--to", "1+"}), kExitValidation);
}

TEST_F(CliTest, NumericalFailureExitCode) {
  // Both baths only inject: the chain fills and no waiting time is finite.
  const fs::path cfg =
      write("full.ini", "[baths]\ngamma1 = 0.1\ngammaL = 0.1\nf1 = 1\nfL = 1\n");
  EXPECT_EQ(invoke({"stats", "--config", cfg.string(), "--out", dir_.string()}),
            kExitNumerical)
      << err_.str();
}

TEST_F(CliTest, BenchWritesCsv) {
  std::ostringstream log;
  const BenchOutcome b = cmd_bench(RunConfig{}, {6, 12, 24}, dir_, log);
  ASSERT_EQ(b.rows.size(), 3u);
  const std::string csv = slurp(b.path);
  EXPECT_NE(csv.find("\nL,seconds_per_point\n"), std::string::npos);
  EXPECT_NE(csv.find("\n24,"), std::string::npos);
  EXPECT_GT(b.rows.back().seconds_per_point, 0.0);
}

TEST(LogLogSlope, RecoversPowerLaw) {
  std::vector<BenchRow> rows;
  for (int l : {10, 20, 40, 80}) rows.push_back({l, 1e-6 * l * l * l});
  EXPECT_NEAR(loglog_slope(rows), 3.0, 1e-12);
}

TEST(ConfigText, RoundTrip) {
  RunConfig c;
  c.sites = 7;
  c.f1 = 0.25;
  c.t_max = 80.0;
  c.initial_state = StateKind::Vacuum;
  std::istringstream in(to_ini(c));
  const RunConfig back = parse_config(in, "roundtrip");
  EXPECT_EQ(back.sites, 7);
  EXPECT_EQ(back.f1, 0.25);
  ASSERT_TRUE(back.t_max.has_value());
  EXPECT_EQ(*back.t_max, 80.0);
  EXPECT_EQ(back.initial_state, StateKind::Vacuum);
}

}  // namespace
