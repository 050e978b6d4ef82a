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

// Command layer behind the `clol` executable. Each cmd_* returns the
// process exit code and never throws.

#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "clol/analysis.hpp"
#include "clol/config.hpp"
#include "clol/control_model.hpp"
#include "clol/linalg.hpp"
#include "clol/pipeline.hpp"
#include "clol/two_qubit.hpp"

namespace clol {

enum ExitCode : int {
  kExitOk = 0,
  kExitVerifyFail = 1,
  kExitConfig = 2,
  kExitDivergence = 3,
};

struct Problem {
  BilinearSystem sys;
  DensityMatrix rho0;
  DensityMatrix sigma0;
  std::optional<ComplexMatrix> target;
  /// Present for the built-in two-qubit system only.
  std::optional<twoqubit::Setup> setup;
};

/// Throws ConfigError (or std::invalid_argument from the model) on bad input.
Problem build_problem(const RunConfig& cfg);

struct SweepSession {
  Problem problem;
  ReferenceTrajectory ref;
  BoundConstants constants;
  std::vector<SweepRecord> records;
};

SweepSession run_sweep(const RunConfig& cfg, std::ostream& log);

/// Shortest round-trip decimal form.
std::string format_number(double x);
std::string sweep_csv(const std::vector<SweepRecord>& records);
std::string bound_csv(const std::vector<SweepRecord>& records);
std::string trace_csv(const twoqubit::Proposition1Report& report, int stride);

/// Writes via a temporary file in the same directory and renames it.
void write_atomically(const std::filesystem::path& path, const std::string& content);

twoqubit::Proposition1Report run_trace(const RunConfig& cfg, const Problem& problem);

struct VerifyOutcome {
  std::vector<CheckReport> items;
  /// Empty when everything passed.
  std::string first_failure;
  std::string text;
  bool pass() const { return first_failure.empty(); }
};

/// Tableau validation first (no sweep on failure), then the reference,
/// invariants, the three theorems, the appendix identities and the
/// Lyapunov trace.
VerifyOutcome run_verify(const RunConfig& cfg, std::ostream& log);

int cmd_sweep(const RunConfig& cfg, std::ostream& log);
int cmd_trace(const RunConfig& cfg, std::ostream& log);
int cmd_verify(const RunConfig& cfg, std::ostream& log);
int cmd_bound(const RunConfig& cfg, std::ostream& log);

/// Dispatches by name ("sweep", "trace", "verify", "bound").
int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log);

}  // namespace clol
