// Copyright 2026 The CLOL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "clol/commands.hpp"
#include "clol/config.hpp"
#include "test_config_support.hpp"

namespace clol {
namespace {

using testing::default_config;
using testing::scratch_dir;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CLOL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

RunConfig fast_config(const std::string& name) {
  RunConfig cfg = default_config();
  cfg.oversample = 4;
  cfg.workers = 2;
  cfg.out_dir = scratch_dir(name).string();
  return cfg;
}

TEST(Config, DefaultFileValues) {
  const RunConfig cfg = default_config();
  EXPECT_EQ(cfg.system, "twoqubit");
  EXPECT_EQ(cfg.horizon, 1.0);
  EXPECT_EQ(cfg.gain, 1.0);
  EXPECT_EQ(cfg.grids, (std::vector<int>{64, 128, 256, 512, 1024, 2048, 4096}));
  EXPECT_EQ(cfg.orders, (std::vector<int>{1, 2, 3, 4, 5}));
  EXPECT_EQ(cfg.n_ref(), 64 * 4096);
  EXPECT_EQ(cfg.t_long, 0.3);
  EXPECT_EQ(cfg.thresholds.eps_pass, 1e-3);
  EXPECT_EQ(cfg.thresholds.decrease_factor, 16.0);
  EXPECT_EQ(cfg.thresholds.overlap_orders, (std::vector<int>{3, 4, 5}));
  EXPECT_EQ(std::filesystem::path(cfg.out_dir).lexically_normal(),
            (testing::source_dir() / "out").lexically_normal());
}

TEST(Config, ParsesCommentsAndWhitespace) {
  const RunConfig cfg = parse_config(
      "# header\n  horizon = 2.5   # trailing\n\norders=2,4\ngrids = 8, 16\noversample = 2\n");
  EXPECT_EQ(cfg.horizon, 2.5);
  EXPECT_EQ(cfg.orders, (std::vector<int>{2, 4}));
  EXPECT_EQ(cfg.n_ref(), 32);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config("colour = blue\n"), ConfigError);
  EXPECT_THROW(parse_config("horizon\n"), ConfigError);
  EXPECT_THROW(parse_config("horizon = abc\n"), ConfigError);
  EXPECT_THROW(parse_config("horizon = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("horizon = -1\n"), ConfigError);
  EXPECT_THROW(parse_config("orders = \n"), ConfigError);
  EXPECT_THROW(parse_config("orders = 6\n"), ConfigError);
  EXPECT_THROW(parse_config("grids = 64, 96\noversample = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("system = lattice\n"), ConfigError);
  EXPECT_THROW(parse_config("tableau_order = 2\n"), ConfigError);
  EXPECT_THROW(parse_config("system = file\nrho0 = a.txt\nsigma0 = rho0\n"), ConfigError);
  EXPECT_NO_THROW(parse_config("grids = 64, 96\noversample = 2\n"));
}

TEST(Config, TableauOverride) {
  const RunConfig cfg = parse_config(
      "orders = 2, 3\ntableau_order = 2\ntableau_a = 0, 0; 0.5, 0\ntableau_b = 0, 1\n"
      "tableau_c = 0, 0.5\n");
  ASSERT_TRUE(cfg.tableau_override.has_value());
  const auto methods = cfg.methods();
  ASSERT_EQ(methods.size(), 2u);
  EXPECT_EQ(methods[0].b, (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(methods[0].a[1][0], 0.5);
  EXPECT_NO_THROW(methods[0].validate());
  EXPECT_EQ(methods[1].stages, 3);
}

TEST(Config, MatrixFiles) {
  const auto dir = scratch_dir("matrix");
  write_text(dir / "m.txt", "1 0  0 -1\n0 1  2 0\n");
  const RunConfig cfg = parse_config("target = m.txt\n", dir);
  EXPECT_EQ(cfg.target_path, (dir / "m.txt").string());
  const ComplexMatrix m = load_matrix_file(dir / "m.txt");
  ASSERT_EQ(m.rows(), 2);
  EXPECT_EQ(m(0, 1), Complex(0.0, -1.0));
  EXPECT_EQ(m(1, 0), Complex(0.0, 1.0));
  EXPECT_THROW(parse_matrix("1 0 2"), ConfigError);
  EXPECT_THROW(parse_matrix("1 0 2 0 3 0"), ConfigError);
  EXPECT_THROW(parse_matrix("1 0 x 0 0 0 1 0"), ConfigError);
  EXPECT_THROW(load_matrix_file(dir / "missing.txt"), ConfigError);
}

TEST(Csv, ShortestRoundTripNumbers) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(-2.0), "-2");
  EXPECT_EQ(format_number(1e-300), "1e-300");
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<int>(u(rng) * 30));
    EXPECT_EQ(std::strtod(format_number(x).c_str(), nullptr), x);
  }
}

TEST(Csv, AtomicWriteLeavesNoTemporary) {
  const auto dir = scratch_dir("atomic");
  write_atomically(dir / "sub" / "x.csv", "a,b\n");
  EXPECT_EQ(slurp(dir / "sub" / "x.csv"), "a,b\n");
  EXPECT_FALSE(std::filesystem::exists(dir / "sub" / "x.csv.tmp"));
}

TEST(SweepCommand, RowsHeaderAndDeterminism) {
  RunConfig cfg = fast_config("sweep_a");
  std::ostringstream log;
  ASSERT_EQ(cmd_sweep(cfg, log), kExitOk) << log.str();
  const auto first = slurp(std::filesystem::path(cfg.out_dir) / "sweep.csv");
  const auto rows = read_csv(std::filesystem::path(cfg.out_dir) / "sweep.csv");
  ASSERT_EQ(rows.size(), 36u);
  EXPECT_EQ(first.substr(0, first.find('\n')), "order,N,h,norm_e,norm_f,bound,max_Enn,sum_Enn_h");
  for (std::size_t i = 2; i < rows.size(); ++i) {
    if (rows[i][0] == rows[i - 1][0]) {
      EXPECT_LT(std::stod(rows[i][4]), std::stod(rows[i - 1][4]));
    }
    EXPECT_LE(std::stod(rows[i][3]), std::stod(rows[i][5]));
  }
  cfg.workers = 1;
  cfg.out_dir = scratch_dir("sweep_b").string();
  ASSERT_EQ(cmd_sweep(cfg, log), kExitOk);
  EXPECT_EQ(slurp(std::filesystem::path(cfg.out_dir) / "sweep.csv"), first);
}

TEST(TraceCommand, InitialRowAndConservation) {
  RunConfig cfg = fast_config("trace");
  std::ostringstream log;
  ASSERT_EQ(cmd_trace(cfg, log), kExitOk) << log.str();
  const auto rows = read_csv(std::filesystem::path(cfg.out_dir) / "trace.csv");
  ASSERT_GT(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"t", "V", "fidelity", "u1", "purity"}));
  EXPECT_EQ(std::stod(rows[1][0]), 0.0);
  EXPECT_NEAR(std::stod(rows[1][1]), 0.5, 1e-12);
  EXPECT_NEAR(std::stod(rows[1][3]), -2.0, 1e-12);
  EXPECT_NEAR(std::stod(rows[1][4]), 1.0, 1e-12);
  EXPECT_NEAR(std::stod(rows.back()[0]), cfg.t_long, 1e-12);
  for (std::size_t i = 2; i < rows.size(); ++i) {
    EXPECT_LE(std::stod(rows[i][1]), std::stod(rows[i - 1][1]) + 1e-9);
    EXPECT_NEAR(std::stod(rows[i][4]), 1.0, 1e-9);
  }
}

TEST(TraceCommand, StartAtTarget) {
  RunConfig cfg = fast_config("trace_target");
  cfg.trace_start = "target";
  std::ostringstream log;
  ASSERT_EQ(cmd_trace(cfg, log), kExitOk) << log.str();
  const auto rows = read_csv(std::filesystem::path(cfg.out_dir) / "trace.csv");
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(std::abs(std::stod(rows[i][1])), 1e-12);
}

TEST(BoundCommand, Columns) {
  RunConfig cfg = fast_config("bound");
  std::ostringstream log;
  ASSERT_EQ(cmd_bound(cfg, log), kExitOk) << log.str();
  const auto rows = read_csv(std::filesystem::path(cfg.out_dir) / "bound.csv");
  ASSERT_EQ(rows.size(), 36u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"order", "N", "h", "norm_e", "bound", "term_init",
                                               "term_E", "term_T2overN"}));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_NEAR(std::stod(rows[i][5]), 0.05 * std::sqrt(2.0), 1e-15);
    EXPECT_LE(std::stod(rows[i][3]), std::stod(rows[i][4]));
    if (i > 1 && rows[i][0] == rows[i - 1][0]) {
      EXPECT_EQ(std::stod(rows[i][7]) * 2.0, std::stod(rows[i - 1][7]));
    }
  }
  // Orders >= 3: bound is affine in h with intercept term_init.
  for (const std::string order : {"3", "4", "5"}) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0, init = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i][0] != order) continue;
      const double h = std::stod(rows[i][2]);
      const double b = std::stod(rows[i][4]);
      init = std::stod(rows[i][5]);
      sx += h;
      sy += b;
      sxx += h * h;
      sxy += h * b;
      n += 1;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    EXPECT_NEAR(intercept, init, 1e-3 * init) << order;
    EXPECT_GT(slope, 0.0);
  }
}

TEST(VerifyCommand, BrokenTableauFailsBeforeSweep) {
  RunConfig cfg = fast_config("verify_broken");
  ButcherTableau t = tableau(3);
  t.b[2] += 0.25;
  cfg.tableau_override = t;
  std::ostringstream log;
  EXPECT_EQ(cmd_verify(cfg, log), kExitVerifyFail);
  const std::string report = slurp(std::filesystem::path(cfg.out_dir) / "verify.txt");
  EXPECT_EQ(report.rfind("FAIL tableau", 0), 0u) << report;
  EXPECT_EQ(report.find("reference"), std::string::npos);
  EXPECT_NE(report.find("first failing item: tableau"), std::string::npos);
  EXPECT_EQ(log.str().find("n_ref"), std::string::npos);
}

TEST(VerifyCommand, InitialStateMatchedToPlant) {
  RunConfig cfg = default_config();
  cfg.oversample = 16;
  cfg.sigma0 = "rho0";
  cfg.out_dir = scratch_dir("verify_matched").string();
  std::ostringstream log;
  EXPECT_EQ(cmd_verify(cfg, log), kExitOk) << log.str();
  const std::string report = slurp(std::filesystem::path(cfg.out_dir) / "verify.txt");
  EXPECT_NE(report.find("PASS theorem1"), std::string::npos);
  EXPECT_NE(report.find("RESULT: PASS"), std::string::npos);
}

TEST(FileSystem, TwoLevelSweepAndVerify) {
  const auto dir = scratch_dir("file_system");
  write_text(dir / "h0.txt", "1 0 0 0\n0 0 -1 0\n");
  write_text(dir / "h1.txt", "0 0 1 0\n1 0 0 0\n");
  write_text(dir / "m.txt", "0 0 0 -0.5\n0 0.5 0 0\n");
  write_text(dir / "rho0.txt", "1 0 0 0\n0 0 0 0\n");
  write_text(dir / "sigma0.txt", "0.9 0 0 0\n0 0 0.1 0\n");
  write_text(dir / "run.cfg",
             "system = file\nh0 = h0.txt\ncontrols = h1.txt\nprotocols = m.txt\noffsets = 0.1\n"
             "rho0 = rho0.txt\nsigma0 = sigma0.txt\ngrids = 64, 128, 256, 512, 1024\n"
             "oversample = 16\nout = out\n");
  const RunConfig cfg = load_config(dir / "run.cfg");
  const Problem p = build_problem(cfg);
  EXPECT_EQ(p.sys.dim(), 2);
  EXPECT_FALSE(p.setup.has_value());
  std::ostringstream log;
  ASSERT_EQ(cmd_sweep(cfg, log), kExitOk) << log.str();
  EXPECT_EQ(read_csv(dir / "out" / "sweep.csv").size(), 26u);
  EXPECT_EQ(cmd_trace(cfg, log), kExitConfig);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch_dir("cli");
  EXPECT_EQ(run_cli("sweep --config " + (dir / "nope.cfg").string()), kExitConfig);
  write_text(dir / "bad.cfg", "colour = blue\n");
  EXPECT_EQ(run_cli("sweep --config " + (dir / "bad.cfg").string()), kExitConfig);
  EXPECT_EQ(run_cli("launch --config " + (dir / "bad.cfg").string()), kExitConfig);
  write_text(dir / "h0.txt", "1e200 0 0 0\n0 0 -1e200 0\n");
  write_text(dir / "rho0.txt", "0.5 0 0.5 0\n0.5 0 0.5 0\n");
  write_text(dir / "m.txt", "1e200 0 0 0\n0 0 0 0\n");
  write_text(dir / "div.cfg",
             "system = file\nh0 = h0.txt\ncontrols = h0.txt\nprotocols = m.txt\nrho0 = rho0.txt\n"
             "sigma0 = rho0\nhorizon = 1e100\ngrids = 1, 2\noversample = 2\n");
  EXPECT_EQ(run_cli("sweep --config " + (dir / "div.cfg").string() + " --out " +
                    (dir / "o").string()),
            kExitDivergence);
  EXPECT_FALSE(std::filesystem::exists(dir / "o" / "sweep.csv"));

  write_text(dir / "ok.cfg",
             "grids = 64, 128, 256\noversample = 2\norders = 1, 2\nt_long = 0.05\ntrace_steps = 100\n"
             "v_threshold = 1\n");
  EXPECT_EQ(run_cli("trace --config " + (dir / "ok.cfg").string() + " --out " +
                    (dir / "o2").string() + " --workers 1 --seed 3"),
            kExitOk);
  EXPECT_TRUE(std::filesystem::exists(dir / "o2" / "trace.csv"));
  EXPECT_EQ(run_cli("bound --config " + (dir / "ok.cfg").string() + " --out " +
                    (dir / "o2").string()),
            kExitOk);
  EXPECT_TRUE(std::filesystem::exists(dir / "o2" / "bound.csv"));
}

}  // namespace
}  // namespace clol
