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

// Run configuration: flat `key = value` text with `#` comments. Matrices
// are read from sidecar files of whitespace-separated `re im` pairs in
// row-major order.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "clol/analysis.hpp"
#include "clol/integrators.hpp"
#include "clol/linalg.hpp"

namespace clol {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  /// "twoqubit" or "file".
  std::string system = "twoqubit";

  // file-backed systems; paths are resolved against the config directory
  std::string h0_path;
  std::vector<std::string> control_paths;
  std::vector<std::string> protocol_paths;
  std::vector<double> protocol_offsets;
  std::string target_path;

  /// "default", "target" or a matrix path.
  std::string rho0 = "default";
  /// "default", "rho0" or a matrix path.
  std::string sigma0 = "default";

  double horizon = 1.0;
  double gain = 1.0;
  std::vector<int> grids{64, 128, 256, 512, 1024, 2048, 4096};
  std::vector<int> orders{1, 2, 3, 4, 5};
  int oversample = 64;
  double tol_ref = 1e-9;
  unsigned workers = 0;  // 0: hardware concurrency
  std::uint64_t seed = 20240601;
  std::string out_dir = ".";

  VerifyThresholds thresholds;
  int appendix_times = 16;
  int appendix_pairs = 50;

  // Lyapunov trace; t_long is the smallest round horizon with V <= v_threshold.
  double t_long = 0.3;
  double v_threshold = 0.01;
  int trace_steps = 4800;
  int trace_stride = 16;
  /// "rho0" or "target".
  std::string trace_start = "rho0";

  /// Replaces the built-in tableau of the same order when set.
  std::optional<ButcherTableau> tableau_override;

  std::filesystem::path base_dir = ".";

  int n_ref() const;
  unsigned effective_workers() const;
  std::vector<ButcherTableau> methods() const;
  /// Throws ConfigError if an invariant fails (positive horizon, nonempty
  /// orders in 1..5, grids nesting in oversample * max(grids), ...).
  void validate() const;
};

/// Parses config text; relative paths are resolved against base_dir.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

/// Square matrix from a file of `re im` pairs, row-major.
ComplexMatrix load_matrix_file(const std::filesystem::path& path);
ComplexMatrix parse_matrix(const std::string& text);

}  // namespace clol
