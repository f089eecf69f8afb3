/*
 * Copyright 2026 The SHE Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "she/snowball.hpp"

namespace she {

// Tunable knobs shared by the CLI subcommands, resolved in precedence
// order: explicit CLI flag > SHE_-prefixed environment variable > config
// file value > built-in default.
struct ToolConfig {
  double alpha_base = 4.5;
  double gamma = 0.5;
  double theta = 0.5;

  void validate() const;
};

// Optional JSON object with keys alpha_base / gamma / theta; unknown keys
// are rejected.
ToolConfig read_tool_config(std::istream& in);
ToolConfig read_tool_config(const std::string& path);

// Overrides from SHE_ALPHA_BASE / SHE_GAMMA / SHE_THETA.  `get_env`
// abstracts ::getenv for testability; a set but unparsable variable is a
// validation error.
void apply_env_overrides(ToolConfig& config,
                         const std::function<const char*(const char*)>& get_env);

// Overrides from parsed command-line flags.
struct CliOverrides {
  std::optional<double> alpha_base;
  std::optional<double> gamma;
  std::optional<double> theta;
};

void apply_cli_overrides(ToolConfig& config, const CliOverrides& overrides);

// Full chain: defaults -> file (if given) -> environment -> CLI.
ToolConfig resolve_tool_config(const std::optional<std::string>& config_path,
                               const std::function<const char*(const char*)>& get_env,
                               const CliOverrides& overrides);

// Parameters of one staged-perturbation run, read from the `snowball`
// subcommand's JSON config.  Fields and defaults:
//
//   {"kind": "gaussian"|"occlusion", "sigma": 1.5, "fraction": 0.2,
//    "carryover": 0.5, "emission_threshold": 0.6, "trials": 20,
//    "text_layer": <int, default: first default-scanned layer>,
//    "seed": 1}
struct SnowballRunConfig {
  PerturbKind kind = PerturbKind::kGaussianNoise;
  double sigma = 1.5;
  double fraction = 0.2;
  double carryover = 0.5;
  double emission_threshold = 0.6;
  int trials = 20;
  std::optional<int> text_layer;
  std::uint64_t seed = 1;

  // One spec per segment, in segment order.
  std::vector<PerturbSpec> stage_specs() const;
};

SnowballRunConfig read_snowball_config(std::istream& in);
SnowballRunConfig read_snowball_config(const std::string& path);

}  // namespace she
