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

#include "she/config.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "she/errors.hpp"

namespace she {

namespace {

using nlohmann::ordered_json;

double parse_env_double(const char* name, const char* text) {
  try {
    std::size_t used = 0;
    const std::string value(text);
    const double parsed = std::stod(value, &used);
    if (used != value.size() || !std::isfinite(parsed)) {
      throw std::invalid_argument(value);
    }
    return parsed;
  } catch (const std::exception&) {
    throw ValidationError(std::string("config: environment variable ") + name +
                          " is not a finite number: \"" + text + "\"");
  }
}

double json_number(const ordered_json& root, const char* key, double fallback) {
  if (!root.contains(key)) return fallback;
  const ordered_json& v = root.at(key);
  if (!v.is_number()) {
    throw ValidationError(std::string("config: \"") + key + "\" must be a number");
  }
  return v.get<double>();
}

}  // namespace

void ToolConfig::validate() const {
  if (!(std::isfinite(alpha_base) && alpha_base >= 0.0)) {
    throw ValidationError("config: alpha_base must be finite and non-negative");
  }
  if (!(std::isfinite(gamma) && gamma > 0.0 && gamma <= 2.0)) {
    throw ValidationError("config: gamma must lie in (0, 2]");
  }
  if (!(std::isfinite(theta) && theta >= 0.0 && theta <= 1.0)) {
    throw ValidationError("config: theta must lie in [0, 1]");
  }
}

ToolConfig read_tool_config(std::istream& in) {
  ordered_json root;
  try {
    root = ordered_json::parse(in);
  } catch (const ordered_json::parse_error& e) {
    throw ValidationError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ValidationError("config: top level must be an object");
  for (const auto& [key, value] : root.items()) {
    if (key != "alpha_base" && key != "gamma" && key != "theta") {
      throw ValidationError("config: unknown field \"" + key + "\"");
    }
  }
  ToolConfig config;
  config.alpha_base = json_number(root, "alpha_base", config.alpha_base);
  config.gamma = json_number(root, "gamma", config.gamma);
  config.theta = json_number(root, "theta", config.theta);
  return config;
}

ToolConfig read_tool_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("config: cannot open \"" + path + "\"");
  return read_tool_config(in);
}

void apply_env_overrides(ToolConfig& config,
                         const std::function<const char*(const char*)>& get_env) {
  if (const char* text = get_env("SHE_ALPHA_BASE")) {
    config.alpha_base = parse_env_double("SHE_ALPHA_BASE", text);
  }
  if (const char* text = get_env("SHE_GAMMA")) {
    config.gamma = parse_env_double("SHE_GAMMA", text);
  }
  if (const char* text = get_env("SHE_THETA")) {
    config.theta = parse_env_double("SHE_THETA", text);
  }
}

void apply_cli_overrides(ToolConfig& config, const CliOverrides& overrides) {
  if (overrides.alpha_base) config.alpha_base = *overrides.alpha_base;
  if (overrides.gamma) config.gamma = *overrides.gamma;
  if (overrides.theta) config.theta = *overrides.theta;
}

ToolConfig resolve_tool_config(const std::optional<std::string>& config_path,
                               const std::function<const char*(const char*)>& get_env,
                               const CliOverrides& overrides) {
  ToolConfig config = config_path ? read_tool_config(*config_path) : ToolConfig{};
  apply_env_overrides(config, get_env);
  apply_cli_overrides(config, overrides);
  config.validate();
  return config;
}

std::vector<PerturbSpec> SnowballRunConfig::stage_specs() const {
  std::vector<PerturbSpec> specs;
  specs.reserve(kSnowballSegments);
  for (int segment = 1; segment <= kSnowballSegments; ++segment) {
    PerturbSpec spec;
    spec.kind = kind;
    spec.sigma = sigma;
    spec.fraction = fraction;
    spec.segment_index = segment;
    specs.push_back(spec);
  }
  return specs;
}

SnowballRunConfig read_snowball_config(std::istream& in) {
  ordered_json root;
  try {
    root = ordered_json::parse(in);
  } catch (const ordered_json::parse_error& e) {
    throw ValidationError(std::string("snowball config: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) {
    throw ValidationError("snowball config: top level must be an object");
  }
  SnowballRunConfig config;
  for (const auto& [key, value] : root.items()) {
    if (key == "kind") {
      if (!value.is_string()) {
        throw ValidationError("snowball config: \"kind\" must be a string");
      }
      const std::string kind_name = value.get<std::string>();
      if (kind_name == "gaussian") {
        config.kind = PerturbKind::kGaussianNoise;
      } else if (kind_name == "occlusion") {
        config.kind = PerturbKind::kOcclusion;
      } else {
        throw ValidationError("snowball config: kind must be \"gaussian\" or "
                              "\"occlusion\", got \"" +
                              kind_name + "\"");
      }
    } else if (key == "sigma" || key == "fraction" || key == "carryover" ||
               key == "emission_threshold") {
      if (!value.is_number()) {
        throw ValidationError("snowball config: \"" + key + "\" must be a number");
      }
      const double number = value.get<double>();
      if (key == "sigma") config.sigma = number;
      if (key == "fraction") config.fraction = number;
      if (key == "carryover") config.carryover = number;
      if (key == "emission_threshold") config.emission_threshold = number;
    } else if (key == "trials") {
      if (!value.is_number_integer()) {
        throw ValidationError("snowball config: \"trials\" must be an integer");
      }
      config.trials = value.get<int>();
    } else if (key == "text_layer") {
      if (!value.is_number_integer()) {
        throw ValidationError("snowball config: \"text_layer\" must be an integer");
      }
      config.text_layer = value.get<int>();
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) {
        throw ValidationError("snowball config: \"seed\" must be a non-negative integer");
      }
      config.seed = value.get<std::uint64_t>();
    } else {
      throw ValidationError("snowball config: unknown field \"" + key + "\"");
    }
  }
  if (config.trials < 1) {
    throw ValidationError("snowball config: trials must be >= 1");
  }
  return config;
}

SnowballRunConfig read_snowball_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("snowball config: cannot open \"" + path + "\"");
  return read_snowball_config(in);
}

}  // namespace she
