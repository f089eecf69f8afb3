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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "she/bundle_io.hpp"
#include "she/config.hpp"
#include "she/errors.hpp"
#include "she/reports.hpp"
#include "test_support.hpp"

using namespace she;
using testutil::bundles_equal;
using testutil::random_bundle;

namespace {

// Distinctly named copy of a random bundle, so corpora can be archived.
SequenceBundle named_bundle(std::uint64_t seed, const std::string& sequence_id,
                            std::size_t frames = 4, std::size_t layers = 2,
                            std::size_t patches = 5, std::size_t dim = 6) {
  SequenceBundle bundle = random_bundle(seed, frames, layers, patches, dim);
  bundle.sequence_id = sequence_id;
  bundle.captions[0].caption_id = sequence_id + ":c0";
  return bundle;
}

std::string temp_file(const std::string& name, const std::string& contents) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << contents;
  REQUIRE(out.good());
  return path.string();
}

const char* no_env(const char*) { return nullptr; }

BehaviorDetection sample_detection(const std::string& id) {
  BehaviorDetection det;
  det.behavior_id = id;
  det.confidence = 1.0 / 3.0;
  det.entropy = 1.3862943611198906;
  det.tau = 1;
  det.verdict = Verdict::kHallucinated;
  det.per_frame_scores = {0.25, -0.125, 1e-17};
  return det;
}

bool detections_match(const BehaviorDetection& a, const BehaviorDetection& b) {
  return a.behavior_id == b.behavior_id && a.confidence == b.confidence &&
         a.entropy == b.entropy && a.tau == b.tau && a.verdict == b.verdict &&
         a.per_frame_scores == b.per_frame_scores;
}

}  // namespace

TEST_CASE("bundles round-trip through archives and annotations") {
  const std::vector<SequenceBundle> corpus = {named_bundle(3, "alpha"),
                                              named_bundle(4, "beta", 3)};
  const TensorArchive archive = bundles_to_archive(corpus);
  const AnnotationFile annotations = bundles_to_annotations(corpus);

  SUBCASE("tensor names and shapes follow the documented layout") {
    REQUIRE(archive.entries.size() == 4);
    CHECK(archive.entries[0].name == "seq/alpha/patches");
    CHECK(archive.entries[0].shape == std::vector<std::uint64_t>{4, 2, 5, 6});
    CHECK(archive.entries[1].name == "seq/alpha/cap/alpha:c0/tokens");
    CHECK(archive.entries[1].shape == std::vector<std::uint64_t>{2, 3, 6});
    CHECK(archive.entries[2].name == "seq/beta/patches");
    CHECK(archive.entries[3].name == "seq/beta/cap/beta:c0/tokens");
  }
  SUBCASE("assembly restores every bundle exactly") {
    const auto assembled = assemble_bundles(archive, annotations);
    REQUIRE(assembled.size() == 2);
    CHECK(bundles_equal(assembled[0], corpus[0]));
    CHECK(bundles_equal(assembled[1], corpus[1]));
  }
  SUBCASE("assembly follows annotation order and ignores unused tensors") {
    AnnotationFile reversed = annotations;
    std::swap(reversed.sequences[0], reversed.sequences[1]);
    TensorArchive padded = archive;
    padded.entries.push_back(TensorEntry{"junk", {1}, {0.0f}});
    const auto assembled = assemble_bundles(padded, reversed);
    REQUIRE(assembled.size() == 2);
    CHECK(assembled[0].sequence_id == "beta");
    CHECK(assembled[1].sequence_id == "alpha");
  }
  SUBCASE("duplicate sequence ids cannot be archived") {
    CHECK_THROWS_AS(bundles_to_archive({corpus[0], corpus[0]}), ValidationError);
  }
  SUBCASE("layer indices must be contiguous from zero to archive") {
    SequenceBundle shifted = corpus[0];
    for (auto& frame : shifted.frames) {
      for (auto& slice : frame) slice.layer_index += 1;
    }
    CHECK_THROWS_WITH_AS(bundles_to_archive({shifted}),
                         doctest::Contains("contiguous"), ValidationError);
  }
  SUBCASE("a missing patch tensor is reported by name") {
    CHECK_THROWS_WITH_AS(assemble_bundles(TensorArchive{}, annotations),
                         doctest::Contains("seq/alpha/patches"), ValidationError);
  }
  SUBCASE("a missing token tensor is reported by name") {
    TensorArchive partial;
    partial.entries.push_back(archive.entries[0]);
    AnnotationFile only_alpha;
    only_alpha.sequences.push_back(annotations.sequences[0]);
    CHECK_THROWS_WITH_AS(assemble_bundles(partial, only_alpha),
                         doctest::Contains("seq/alpha/cap/alpha:c0/tokens"),
                         ValidationError);
  }
  SUBCASE("patch tensors must have rank 4") {
    TensorArchive bad = archive;
    bad.entries[0].shape = {4, 2, 30};
    CHECK_THROWS_WITH_AS(assemble_bundles(bad, annotations), doctest::Contains("rank"),
                         ValidationError);
  }
  SUBCASE("token tensors must agree with the caption's token count") {
    AnnotationFile extra = annotations;
    extra.sequences[0].captions[0].tokens.push_back("ghost");
    CHECK_THROWS_AS(assemble_bundles(archive, extra), ValidationError);
  }
  SUBCASE("mismatched embedding widths fail bundle validation") {
    TensorArchive bad = archive;
    TensorEntry& tokens = bad.entries[1];
    tokens.shape = {2, 3, 5};
    tokens.data.resize(2 * 3 * 5, 0.5f);
    CHECK_THROWS_AS(assemble_bundles(bad, annotations), ValidationError);
  }
}

TEST_CASE("tool configuration resolves in precedence order") {
  SUBCASE("built-in defaults") {
    const ToolConfig config = resolve_tool_config(std::nullopt, no_env, {});
    CHECK(config.alpha_base == 4.5);
    CHECK(config.gamma == 0.5);
    CHECK(config.theta == 0.5);
  }
  SUBCASE("a config file overrides the defaults") {
    const std::string path =
        temp_file("she_io_config.json", R"({"alpha_base": 2.0, "gamma": 1.0})");
    const ToolConfig config = resolve_tool_config(path, no_env, {});
    CHECK(config.alpha_base == 2.0);
    CHECK(config.gamma == 1.0);
    CHECK(config.theta == 0.5);
  }
  SUBCASE("environment variables override the file") {
    const std::string path =
        temp_file("she_io_config.json", R"({"alpha_base": 2.0, "gamma": 1.0})");
    const auto env = [](const char* name) -> const char* {
      return std::strcmp(name, "SHE_ALPHA_BASE") == 0 ? "3.25" : nullptr;
    };
    const ToolConfig config = resolve_tool_config(path, env, {});
    CHECK(config.alpha_base == 3.25);
    CHECK(config.gamma == 1.0);
  }
  SUBCASE("command-line flags override everything") {
    const auto env = [](const char* name) -> const char* {
      return std::strcmp(name, "SHE_ALPHA_BASE") == 0 ? "3.25" : nullptr;
    };
    CliOverrides overrides;
    overrides.alpha_base = 1.25;
    overrides.theta = 0.75;
    const ToolConfig config = resolve_tool_config(std::nullopt, env, overrides);
    CHECK(config.alpha_base == 1.25);
    CHECK(config.theta == 0.75);
  }
  SUBCASE("unparsable environment values are rejected") {
    for (const char* bad : {"abc", "1.5x", "", "inf", "1.5 "}) {
      const auto env = [bad](const char* name) -> const char* {
        return std::strcmp(name, "SHE_GAMMA") == 0 ? bad : nullptr;
      };
      CHECK_THROWS_AS(resolve_tool_config(std::nullopt, env, {}), ValidationError);
    }
  }
  SUBCASE("the resolved configuration is validated") {
    CliOverrides gamma_high;
    gamma_high.gamma = 3.0;
    CHECK_THROWS_AS(resolve_tool_config(std::nullopt, no_env, gamma_high),
                    ValidationError);
    CliOverrides theta_high;
    theta_high.theta = 1.5;
    CHECK_THROWS_AS(resolve_tool_config(std::nullopt, no_env, theta_high),
                    ValidationError);
    CliOverrides alpha_negative;
    alpha_negative.alpha_base = -1.0;
    CHECK_THROWS_AS(resolve_tool_config(std::nullopt, no_env, alpha_negative),
                    ValidationError);
  }
  SUBCASE("config files reject unknown fields and malformed JSON") {
    std::istringstream unknown(R"({"thete": 0.5})");
    CHECK_THROWS_WITH_AS(read_tool_config(unknown), doctest::Contains("unknown field"),
                         ValidationError);
    std::istringstream list("[1, 2]");
    CHECK_THROWS_AS(read_tool_config(list), ValidationError);
    std::istringstream broken("{");
    CHECK_THROWS_AS(read_tool_config(broken), ValidationError);
    CHECK_THROWS_AS(read_tool_config(std::string("/nonexistent/config.json")), IoError);
  }
}

TEST_CASE("snowball run configs parse with defaults and stage fan-out") {
  SUBCASE("an empty object keeps the defaults") {
    std::istringstream in("{}");
    const SnowballRunConfig config = read_snowball_config(in);
    CHECK(config.kind == PerturbKind::kGaussianNoise);
    CHECK(config.sigma == 1.5);
    CHECK(config.fraction == 0.2);
    CHECK(config.carryover == 0.5);
    CHECK(config.emission_threshold == 0.6);
    CHECK(config.trials == 20);
    CHECK_FALSE(config.text_layer.has_value());
    CHECK(config.seed == 1);
  }
  SUBCASE("every field parses") {
    std::istringstream in(R"({"kind": "occlusion", "fraction": 0.4, "sigma": 2.5,
                              "carryover": 0.25, "emission_threshold": 0.8,
                              "trials": 5, "text_layer": 3, "seed": 12})");
    const SnowballRunConfig config = read_snowball_config(in);
    CHECK(config.kind == PerturbKind::kOcclusion);
    CHECK(config.fraction == 0.4);
    CHECK(config.sigma == 2.5);
    CHECK(config.carryover == 0.25);
    CHECK(config.emission_threshold == 0.8);
    CHECK(config.trials == 5);
    REQUIRE(config.text_layer.has_value());
    CHECK(*config.text_layer == 3);
    CHECK(config.seed == 12);
  }
  SUBCASE("stage_specs fans out one spec per segment") {
    SnowballRunConfig config;
    config.kind = PerturbKind::kOcclusion;
    config.fraction = 0.3;
    const auto specs = config.stage_specs();
    REQUIRE(specs.size() == static_cast<std::size_t>(kSnowballSegments));
    for (int s = 0; s < kSnowballSegments; ++s) {
      CHECK(specs[s].segment_index == s + 1);
      CHECK(specs[s].kind == PerturbKind::kOcclusion);
      CHECK(specs[s].fraction == 0.3);
    }
  }
  SUBCASE("malformed configs are rejected") {
    std::istringstream unknown(R"({"sigmaa": 1.0})");
    CHECK_THROWS_WITH_AS(read_snowball_config(unknown),
                         doctest::Contains("unknown field"), ValidationError);
    std::istringstream kind(R"({"kind": "blur"})");
    CHECK_THROWS_AS(read_snowball_config(kind), ValidationError);
    std::istringstream trials(R"({"trials": 0})");
    CHECK_THROWS_AS(read_snowball_config(trials), ValidationError);
    std::istringstream trials_text(R"({"trials": "three"})");
    CHECK_THROWS_AS(read_snowball_config(trials_text), ValidationError);
    std::istringstream seed(R"({"seed": -1})");
    CHECK_THROWS_AS(read_snowball_config(seed), ValidationError);
    CHECK_THROWS_AS(read_snowball_config(std::string("/nonexistent/run.json")), IoError);
  }
}

TEST_CASE("detections survive the JSON-lines round trip") {
  std::vector<SequenceDetections> results;
  results.push_back(SequenceDetections{
      "s0",
      {CaptionDetections{"c0", {sample_detection("b0"), sample_detection("b1")}},
       CaptionDetections{"c1", {sample_detection("b0")}}}});
  results.push_back(
      SequenceDetections{"s1", {CaptionDetections{"c2", {sample_detection("bX")}}}});

  std::ostringstream out;
  write_detections(out, results);

  SUBCASE("one line per behavior") {
    std::istringstream lines(out.str());
    std::string line;
    std::size_t count = 0;
    while (std::getline(lines, line)) ++count;
    CHECK(count == 4);
  }
  SUBCASE("reading restores the grouping and every numeric field exactly") {
    std::istringstream in(out.str());
    const auto restored = read_detections(in);
    REQUIRE(restored.size() == results.size());
    for (std::size_t s = 0; s < results.size(); ++s) {
      CHECK(restored[s].sequence_id == results[s].sequence_id);
      REQUIRE(restored[s].captions.size() == results[s].captions.size());
      for (std::size_t c = 0; c < results[s].captions.size(); ++c) {
        CHECK(restored[s].captions[c].caption_id == results[s].captions[c].caption_id);
        REQUIRE(restored[s].captions[c].detections.size() ==
                results[s].captions[c].detections.size());
        for (std::size_t d = 0; d < results[s].captions[c].detections.size(); ++d) {
          CHECK(detections_match(restored[s].captions[c].detections[d],
                                 results[s].captions[c].detections[d]));
        }
      }
    }
  }
  SUBCASE("the line format is stable") {
    BehaviorDetection det;
    det.behavior_id = "b0";
    det.confidence = 0.5;
    det.entropy = 0.75;
    det.tau = 1;
    det.verdict = Verdict::kGrounded;
    det.per_frame_scores = {0.5};
    std::ostringstream one;
    write_detections(one, {SequenceDetections{"s0", {CaptionDetections{"c0", {det}}}}});
    CHECK(one.str() ==
          "{\"sequence_id\":\"s0\",\"caption_id\":\"c0\",\"behavior_id\":\"b0\","
          "\"confidence\":0.5,\"entropy\":0.75,\"tau\":1,\"verdict\":\"Grounded\","
          "\"per_frame_scores\":[0.5]}\n");
  }
  SUBCASE("interleaved lines regroup by first appearance") {
    std::istringstream in(
        "{\"sequence_id\":\"s0\",\"caption_id\":\"c0\",\"behavior_id\":\"b0\","
        "\"confidence\":0.5,\"entropy\":0,\"tau\":0,\"verdict\":\"Grounded\","
        "\"per_frame_scores\":[]}\n"
        "{\"sequence_id\":\"s1\",\"caption_id\":\"c1\",\"behavior_id\":\"b1\","
        "\"confidence\":0.5,\"entropy\":0,\"tau\":0,\"verdict\":\"Grounded\","
        "\"per_frame_scores\":[]}\n"
        "\n"
        "{\"sequence_id\":\"s0\",\"caption_id\":\"c0\",\"behavior_id\":\"b2\","
        "\"confidence\":0.5,\"entropy\":0,\"tau\":0,\"verdict\":\"Grounded\","
        "\"per_frame_scores\":[]}\n");
    const auto restored = read_detections(in);
    REQUIRE(restored.size() == 2);
    CHECK(restored[0].sequence_id == "s0");
    REQUIRE(restored[0].captions.size() == 1);
    REQUIRE(restored[0].captions[0].detections.size() == 2);
    CHECK(restored[0].captions[0].detections[0].behavior_id == "b0");
    CHECK(restored[0].captions[0].detections[1].behavior_id == "b2");
    CHECK(restored[1].sequence_id == "s1");
  }
  SUBCASE("parse errors carry the line number") {
    std::istringstream in(
        "{\"sequence_id\":\"s0\",\"caption_id\":\"c0\",\"behavior_id\":\"b0\","
        "\"confidence\":0.5,\"entropy\":0,\"tau\":0,\"verdict\":\"Grounded\","
        "\"per_frame_scores\":[]}\n"
        "{oops\n");
    CHECK_THROWS_WITH_AS(read_detections(in), doctest::Contains("line 2"),
                         ValidationError);
  }
  SUBCASE("field errors are rejected") {
    auto reject = [](const std::string& line) {
      std::istringstream in(line);
      CHECK_THROWS_AS(read_detections(in), ValidationError);
    };
    reject("{\"caption_id\":\"c0\",\"behavior_id\":\"b0\",\"confidence\":0.5,"
           "\"entropy\":0,\"tau\":0,\"verdict\":\"Grounded\",\"per_frame_scores\":[]}");
    reject("{\"sequence_id\":\"s0\",\"caption_id\":\"c0\",\"behavior_id\":\"b0\","
           "\"confidence\":0.5,\"entropy\":0,\"tau\":0.5,\"verdict\":\"Grounded\","
           "\"per_frame_scores\":[]}");
    reject("{\"sequence_id\":\"s0\",\"caption_id\":\"c0\",\"behavior_id\":\"b0\","
           "\"confidence\":0.5,\"entropy\":0,\"tau\":0,\"verdict\":\"Maybe\","
           "\"per_frame_scores\":[]}");
    reject("{\"sequence_id\":\"s0\",\"caption_id\":\"c0\",\"behavior_id\":\"b0\","
           "\"confidence\":0.5,\"entropy\":0,\"tau\":0,\"verdict\":\"Grounded\","
           "\"per_frame_scores\":[\"x\"]}");
    reject("{\"sequence_id\":\"s0\",\"caption_id\":\"c0\",\"behavior_id\":\"b0\","
           "\"confidence\":0.5,\"entropy\":0,\"tau\":0,\"verdict\":\"Grounded\","
           "\"per_frame_scores\":[],\"mood\":1}");
  }
}

TEST_CASE("CSV reports freeze their layout") {
  SUBCASE("co-mention scores") {
    CoSReport with_control;
    with_control.caption_id = "c0";
    with_control.cos_bh = 0.5;
    with_control.cos_bo = 0.25;
    with_control.control_cos_bh = 0.125;
    with_control.control_cos_bo = 0.0;
    with_control.n_h = 1;
    with_control.n_r = 2;
    with_control.m = 3;
    CoSReport bare;
    bare.caption_id = "c1";
    bare.cos_bh = 0.0;
    bare.cos_bo = 0.0;
    bare.n_h = 0;
    bare.n_r = 4;
    bare.m = 0;
    std::ostringstream out;
    write_cos_csv(out, {with_control, bare});
    CHECK(out.str() ==
          "caption_id,cos_bh,cos_bo,control_cos_bh,control_cos_bo,n_h,n_r,m\n"
          "c0,0.5,0.25,0.125,0,1,2,3\n"
          "c1,0,0,,,0,4,0\n");
  }
  SUBCASE("correction records") {
    CorrectionRecord applied;
    applied.behavior_id = "b0";
    applied.caption_id = "c0";
    applied.affected = {AffectedFeature{0, 1, 2}, AffectedFeature{1, 1, 2}};
    applied.alpha_used = 1.5;
    applied.residual_alignment = 1e-06;
    applied.skipped = false;
    CorrectionRecord skipped;
    skipped.behavior_id = "b1";
    skipped.caption_id = "c0";
    skipped.alpha_used = 0.0;
    skipped.residual_alignment = 0.0;
    skipped.skipped = true;
    std::ostringstream out;
    write_corrections_csv(out, {applied, skipped});
    CHECK(out.str() ==
          "caption_id,behavior_id,alpha_used,residual_alignment,affected_count,skipped\n"
          "c0,b0,1.5,1e-06,2,false\n"
          "c0,b1,0,0,0,true\n");
  }
  SUBCASE("stage tables") {
    std::ostringstream out;
    write_stage_csv(out, {StageResult{1, 0.5, 0.0625}, StageResult{2, -0.25, 0.0}});
    CHECK(out.str() ==
          "segment,mean_delta_bh,std_delta_bh\n"
          "1,0.5,0.0625\n"
          "2,-0.25,0\n");
  }
  SUBCASE("metric summaries leave undefined cells empty") {
    MetricSummary summary;
    summary.beach_i = 0.25;
    summary.beach_s = 0.5;
    summary.bh_rate = 0.5;
    summary.oh_rate = 0.0;
    std::ostringstream out;
    write_metrics_csv(out, summary);
    CHECK(out.str() ==
          "beach_i,beach_s,chair_i,chair_s,map,bh_rate,oh_rate\n"
          "0.25,0.5,,,,0.5,0\n");
  }
}

TEST_CASE("metric summaries serialize to JSON with null for undefined") {
  MetricSummary summary;
  summary.beach_i = 0.25;
  summary.map = 1.0;
  std::ostringstream out;
  write_metrics_json(out, summary);

  const auto root = nlohmann::ordered_json::parse(out.str());
  CHECK(root.at("beach_i").get<double>() == 0.25);
  CHECK(root.at("map").get<double>() == 1.0);
  CHECK(root.at("beach_s").is_null());
  CHECK(root.at("chair_i").is_null());
  CHECK(root.at("chair_s").is_null());
  CHECK(root.at("bh_rate").is_null());
  CHECK(root.at("oh_rate").is_null());

  SUBCASE("keys keep a fixed order") {
    std::vector<std::string> keys;
    for (const auto& [key, value] : root.items()) keys.push_back(key);
    CHECK(keys == std::vector<std::string>{"beach_i", "beach_s", "chair_i", "chair_s",
                                           "map", "bh_rate", "oh_rate"});
  }
}
