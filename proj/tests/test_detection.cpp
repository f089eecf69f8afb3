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
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "she/detection.hpp"
#include "she/errors.hpp"
#include "test_support.hpp"

using namespace she;
using testutil::ann;
using testutil::make_bundle;
using testutil::random_bundle;
using testutil::random_vector;

namespace {

DetectionConfig config(int text_layer, std::vector<int> layers, double gamma = 0.5,
                       double theta = 0.5) {
  DetectionConfig cfg;
  cfg.text_layer = text_layer;
  cfg.layer_set = std::move(layers);
  cfg.gamma = gamma;
  cfg.theta = theta;
  return cfg;
}

Vec32 vec(std::vector<float> v) { return Vec32(std::move(v)); }

// Reference recomputation of one behavior's detection record using nothing
// from detection.cpp except the shared cosine/entropy primitives.
struct OracleRow {
  double confidence;
  std::vector<double> per_frame;
  int tau;
  bool hallucinated;
};

OracleRow oracle_detect(const SequenceBundle& bundle, std::size_t caption,
                        const Annotation& behavior, const DetectionConfig& cfg) {
  const LayerTokenEmbeddings* text = bundle.token_layer(caption, cfg.text_layer);
  REQUIRE(text != nullptr);
  const std::size_t dim = text->token_embeddings.front().dim();
  std::vector<double> acc(dim, 0.0);
  const std::size_t count = behavior.span.end - behavior.span.start + 1;
  for (std::uint32_t i = behavior.span.start; i <= behavior.span.end; ++i) {
    for (std::size_t j = 0; j < dim; ++j) acc[j] += text->token_embeddings[i][j];
  }
  std::vector<float> mean(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    mean[j] = static_cast<float>(acc[j] / static_cast<double>(count));
  }
  const Vec32 e_beh(std::move(mean));

  OracleRow row;
  row.confidence = -1.0;
  for (std::size_t t = 0; t < bundle.frame_count(); ++t) {
    double best = -1.0;
    for (int layer : cfg.layer_set) {
      const LayerPatchEmbeddings* slice = bundle.patch_layer(t, layer);
      REQUIRE(slice != nullptr);
      for (const Vec32& patch : slice->patch_embeddings) {
        best = std::max(best, cosine(e_beh, patch));
      }
    }
    row.per_frame.push_back(best);
    row.confidence = std::max(row.confidence, best);
  }
  const double entropy = embedding_entropy(e_beh);
  row.tau = static_cast<int>(std::ceil(cfg.gamma * entropy));
  row.hallucinated = row.confidence < cfg.theta;
  return row;
}

}  // namespace

TEST_CASE("depth defaults select the middle-to-late layers") {
  const DetectionConfig deep = DetectionConfig::defaults_for_depth(32);
  CHECK(deep.text_layer == 22);
  REQUIRE(deep.layer_set.size() == 10);
  CHECK(deep.layer_set.front() == 22);
  CHECK(deep.layer_set.back() == 31);

  const DetectionConfig shallow = DetectionConfig::defaults_for_depth(6);
  CHECK(shallow.text_layer == 4);
  CHECK(shallow.layer_set == std::vector<int>{4, 5});

  CHECK_THROWS_AS(DetectionConfig::defaults_for_depth(1), ValidationError);
}

TEST_CASE("config validation rejects out-of-range parameters") {
  CHECK_NOTHROW(config(0, {0}, 2.0, 1.0).validate());
  CHECK_THROWS_AS(config(0, {0}, 0.0).validate(), ValidationError);
  CHECK_THROWS_AS(config(0, {0}, 2.5).validate(), ValidationError);
  CHECK_THROWS_AS(config(0, {0}, 0.5, -0.1).validate(), ValidationError);
  CHECK_THROWS_AS(config(0, {0}, 0.5, 1.1).validate(), ValidationError);
  CHECK_THROWS_AS(config(0, {}).validate(), ValidationError);
  CHECK_THROWS_AS(config(0, {1, 1}).validate(), ValidationError);
}

TEST_CASE("verdict names round-trip") {
  CHECK(to_string(Verdict::kGrounded) == "Grounded");
  CHECK(verdict_from_string("Hallucinated") == Verdict::kHallucinated);
  CHECK_THROWS_AS(verdict_from_string("grounded"), ValidationError);
}

TEST_CASE("behavior embeddings average the span tokens") {
  const SequenceBundle bundle = make_bundle(
      {{{vec({1, 1}), vec({0, 1})}}},
      {vec({1, 0}), vec({0, 1}), vec({4, 6})},
      {ann("b0", 0, 0, Label::kUnknown, "waves")});
  const DetectionConfig cfg = config(0, {0});

  CHECK(behavior_embedding(bundle, 0, ann("one", 0, 0, Label::kUnknown, "x"), cfg) ==
        vec({1, 0}));
  CHECK(behavior_embedding(bundle, 0, ann("two", 0, 1, Label::kUnknown, "x"), cfg) ==
        vec({0.5f, 0.5f}));
  // Hand-averaged three-token span: (1+0+4)/3 and (0+1+6)/3 in float64,
  // rounded to float32 at the end.
  const Vec32 three =
      behavior_embedding(bundle, 0, ann("three", 0, 2, Label::kUnknown, "x"), cfg);
  CHECK(three[0] == static_cast<float>(5.0 / 3.0));
  CHECK(three[1] == static_cast<float>(7.0 / 3.0));

  CHECK_THROWS_AS(
      behavior_embedding(bundle, 0, ann("b", 0, 0, Label::kUnknown, "x"), config(9, {0})),
      ValidationError);
  CHECK_THROWS_AS(
      behavior_embedding(bundle, 0, ann("b", 0, 9, Label::kUnknown, "x"), cfg),
      ValidationError);
}

TEST_CASE("patch scores take the best layer") {
  const Vec32 e_beh = vec({1, 2, 2});
  SUBCASE("a matching patch scores exactly one") {
    CHECK(patch_score(e_beh, {e_beh}) == 1.0);
  }
  SUBCASE("the maximum layer wins") {
    // Three layer embeddings whose cosines against the probe are about
    // 0.2, -0.1, and 0.7; the score must pick the 0.7 layer.
    const Vec32 probe = vec({1, 0, 0});
    const std::vector<Vec32> layers = {vec({0.2f, 0.979795897f, 0.0f}),
                                       vec({-0.1f, 0.994987437f, 0.0f}),
                                       vec({0.7f, 0.714142843f, 0.0f})};
    const double expected = std::max(
        {cosine(probe, layers[0]), cosine(probe, layers[1]), cosine(probe, layers[2])});
    CHECK(patch_score(probe, layers) == expected);
    CHECK(patch_score(probe, layers) == doctest::Approx(0.7).epsilon(1e-6));
  }
  SUBCASE("five random layers match an exhaustive scan") {
    std::mt19937_64 rng(3);
    const Vec32 probe = random_vector(rng, 6);
    std::vector<Vec32> layers;
    double best = -1.0;
    for (int i = 0; i < 5; ++i) {
      layers.push_back(random_vector(rng, 6));
      best = std::max(best, cosine(probe, layers.back()));
    }
    CHECK(patch_score(probe, layers) == best);
  }
  SUBCASE("an empty layer list is an error") {
    CHECK_THROWS_AS(patch_score(e_beh, {}), ValidationError);
  }
}

TEST_CASE("the bundle form of patch_score scans the configured layers") {
  const SequenceBundle bundle = random_bundle(11, 3, 4, 5, 8);
  const DetectionConfig cfg = config(0, {1, 3});
  const Vec32 e_beh = behavior_embedding(bundle, 0, bundle.captions[0].behaviors[0], cfg);
  for (std::size_t p = 0; p < bundle.patch_count(); ++p) {
    std::vector<Vec32> by_layer;
    for (int layer : cfg.layer_set) {
      by_layer.push_back(bundle.patch_layer(1, layer)->patch_embeddings[p]);
    }
    CHECK(patch_score(bundle, 1, p, e_beh, cfg) == patch_score(e_beh, by_layer));
  }
  CHECK_THROWS_AS(patch_score(bundle, 0, 0, e_beh, config(0, {0, 9})), ValidationError);
}

TEST_CASE("frame scores take the best patch") {
  const Vec32 e_beh = vec({1, 2, 2});
  SUBCASE("a single patch is its own maximum") {
    const SequenceBundle bundle =
        make_bundle({{{vec({3, 0, 0})}}}, {vec({1, 2, 2})});
    CHECK(frame_score(bundle, 0, e_beh, config(0, {0})) ==
          cosine(e_beh, vec({3, 0, 0})));
  }
  SUBCASE("one planted high patch dominates the lows") {
    const SequenceBundle bundle = make_bundle(
        {{{vec({0, 0, 1}), vec({2, 4, 4}), vec({0, 1, 0})}}}, {vec({1, 2, 2})});
    CHECK(frame_score(bundle, 0, e_beh, config(0, {0})) == 1.0);
  }
  SUBCASE("a 64-patch frame matches the brute-force maximum") {
    const SequenceBundle bundle = random_bundle(21, 1, 2, 64, 8);
    const DetectionConfig cfg = config(0, {0, 1});
    const Vec32 probe =
        behavior_embedding(bundle, 0, bundle.captions[0].behaviors[0], cfg);
    double best = -1.0;
    for (int layer : cfg.layer_set) {
      for (const Vec32& patch : bundle.patch_layer(0, layer)->patch_embeddings) {
        best = std::max(best, cosine(probe, patch));
      }
    }
    CHECK(frame_score(bundle, 0, probe, cfg) == best);
  }
}

TEST_CASE("confidence is the best frame score") {
  SUBCASE("a planted exact copy yields exactly one") {
    const SequenceBundle bundle = make_bundle(
        {{{vec({0, 1, 0}), vec({0, 0, 1})}}, {{vec({2, 4, 4}), vec({0, 0, 1})}}},
        {vec({1, 2, 2})});
    CHECK(confidence(bundle, vec({1, 2, 2}), config(0, {0})) == 1.0);
  }
  SUBCASE("an all-orthogonal sequence yields exactly zero") {
    const SequenceBundle bundle = make_bundle(
        {{{vec({0, 1, 0}), vec({0, 0, 1})}}, {{vec({0, 2, 0}), vec({0, 5, 5})}}},
        {vec({1, 0, 0})});
    CHECK(confidence(bundle, vec({1, 0, 0}), config(0, {0})) == 0.0);
  }
  SUBCASE("adding a patch never lowers confidence") {
    std::mt19937_64 rng(31);
    SequenceBundle bundle = random_bundle(31, 3, 2, 4, 6);
    const DetectionConfig cfg = config(0, {0, 1});
    const Vec32 probe =
        behavior_embedding(bundle, 0, bundle.captions[0].behaviors[0], cfg);
    const double before = confidence(bundle, probe, cfg);
    for (auto& frame : bundle.frames) {
      for (auto& slice : frame) slice.patch_embeddings.push_back(random_vector(rng, 6));
    }
    CHECK(confidence(bundle, probe, cfg) >= before);
  }
}

TEST_CASE("entropy measures how spread the embedding mass is") {
  CHECK(embedding_entropy(vec({0, 0, 3, 0})) == 0.0);
  CHECK(embedding_entropy(Vec32::zeros(5)) == 0.0);
  CHECK(embedding_entropy(vec({1, 1, 1, 1})) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(embedding_entropy(vec({1, 1, 2})) ==
        doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-12));

  std::mt19937_64 rng(41);
  for (int i = 0; i < 50; ++i) {
    const Vec32 v = random_vector(rng, 10);
    std::vector<float> scaled(v.values());
    for (float& x : scaled) x *= -4.0f;  // sign flip and power-of-two scale
    CHECK(embedding_entropy(v) == embedding_entropy(Vec32(scaled)));
  }
}

TEST_CASE("window widths grow with entropy and gamma") {
  CHECK(window_radius(vec({0, 7, 0}), config(0, {0})) == 0);
  // H = ln 4 with gamma 0.5 gives ceil(0.6931...) = 1.
  CHECK(window_radius(vec({1, 1, 1, 1}), config(0, {0}, 0.5)) == 1);

  std::mt19937_64 rng(43);
  const Vec32 e_beh = random_vector(rng, 16);
  int previous = 0;
  for (int i = 1; i <= 10; ++i) {
    const double gamma = 0.2 * i;
    const int tau = window_radius(e_beh, config(0, {0}, gamma));
    CHECK(tau >= previous);
    previous = tau;
  }

  CHECK(window_half_span(0) == 0);
  CHECK(window_half_span(1) == 1);
  CHECK(window_half_span(2) == 1);
  CHECK(window_half_span(3) == 2);
  CHECK(window_half_span(4) == 2);
  CHECK_THROWS_AS(window_half_span(-1), ValidationError);
}

TEST_CASE("aggregation windows clip to the sequence") {
  const SequenceBundle bundle = random_bundle(51, 5, 2, 3, 4);
  const DetectionConfig cfg = config(0, {0, 1});

  SUBCASE("zero width keeps only the center frame") {
    const AggregatedWindow w = aggregate_window(bundle, 2, 1, 0, cfg);
    CHECK(w.radius == 0);
    REQUIRE(w.members.size() == 2);  // one per layer
    for (const WindowMember& m : w.members) {
      CHECK(m.frame == 2);
      CHECK(m.patch == 1);
    }
  }
  SUBCASE("a left-edge window clips to frames zero and one") {
    const AggregatedWindow w = aggregate_window(bundle, 0, 0, 2, cfg);
    CHECK(w.radius == 1);
    REQUIRE(w.members.size() == 4);
    CHECK(w.members.front().frame == 0);
    CHECK(w.members.back().frame == 1);
  }
  SUBCASE("a wide mid-sequence window covers five frames at every layer") {
    const AggregatedWindow w = aggregate_window(bundle, 2, 2, 4, cfg);
    REQUIRE(w.members.size() == 5 * 2);
    std::size_t expected_frame = 0;
    for (std::size_t i = 0; i < w.members.size(); i += 2) {
      CHECK(w.members[i].frame == expected_frame);
      CHECK(w.members[i].layer_index == 0);
      CHECK(w.members[i + 1].layer_index == 1);
      CHECK(w.members[i].embedding ==
            &bundle.patch_layer(expected_frame, 0)->patch_embeddings[2]);
      ++expected_frame;
    }
  }
}

TEST_CASE("thresholds at the extremes behave as documented") {
  SUBCASE("theta zero grounds everything with nonnegative embeddings") {
    std::mt19937_64 rng(61);
    std::vector<std::vector<std::vector<Vec32>>> grid(3);
    for (auto& frame : grid) {
      frame.resize(2);
      for (auto& layer : frame) {
        for (int p = 0; p < 4; ++p) layer.push_back(random_vector(rng, 5, 0.0f, 1.0f));
      }
    }
    const SequenceBundle bundle = make_bundle(
        std::move(grid), {random_vector(rng, 5, 0.0f, 1.0f)},
        {ann("b0", 0, 0, Label::kUnknown, "waves")});
    const auto results = detect_behaviors(bundle, config(0, {0, 1}, 0.5, 0.0));
    REQUIRE(results.size() == 1);
    for (const BehaviorDetection& det : results[0].detections) {
      CHECK(det.verdict == Verdict::kGrounded);
    }
  }
  SUBCASE("theta one grounds only exact matches") {
    const SequenceBundle bundle = make_bundle(
        {{{vec({2, 4, 4}), vec({0, 1, 0})}}},
        {vec({1, 2, 2}), vec({2, 1, 2})},
        {ann("match", 0, 0, Label::kUnknown, "waves"),
         ann("drift", 1, 1, Label::kUnknown, "jumps")});
    const auto results = detect_behaviors(bundle, config(0, {0}, 0.5, 1.0));
    REQUIRE(results[0].detections.size() == 2);
    CHECK(results[0].detections[0].confidence == 1.0);
    CHECK(results[0].detections[0].verdict == Verdict::kGrounded);
    CHECK(results[0].detections[1].confidence < 1.0);
    CHECK(results[0].detections[1].verdict == Verdict::kHallucinated);
  }
  SUBCASE("a separated corpus is classified perfectly at theta 0.5") {
    const SequenceBundle bundle = make_bundle(
        {{{vec({9, 2, 0, 0}), vec({5, 1, 0, 0})}},
         {{vec({7, 1, 0, 0}), vec({8, 0, 0, 0})}}},
        {vec({1, 0, 0, 0}), vec({0, 0, 1, 0})},
        {ann("grounded", 0, 0, Label::kUnknown, "runs"),
         ann("phantom", 1, 1, Label::kUnknown, "flies")});
    const auto results = detect_behaviors(bundle, config(0, {0}, 0.5, 0.5));
    CHECK(results[0].detections[0].confidence >= 0.8);
    CHECK(results[0].detections[0].verdict == Verdict::kGrounded);
    CHECK(results[0].detections[1].confidence <= 0.2);
    CHECK(results[0].detections[1].verdict == Verdict::kHallucinated);
  }
}

TEST_CASE("detection equals the exhaustive oracle on small bundles") {
  for (std::uint64_t seed : {71ULL, 72ULL, 73ULL}) {
    SequenceBundle bundle = random_bundle(seed, 5, 4, 16, 8, 4);
    bundle.captions[0].behaviors = {
        ann("b0", 0, 3, Label::kUnknown, "waves"),
        ann("b1", 1, 2, Label::kUnknown, "runs"),
        ann("b2", 2, 2, Label::kUnknown, "jumps"),
    };
    const DetectionConfig cfg = config(2, {1, 2, 3}, 0.7, 0.4);
    const auto results = detect_behaviors(bundle, cfg);
    REQUIRE(results.size() == 1);
    REQUIRE(results[0].detections.size() == 3);
    for (std::size_t b = 0; b < 3; ++b) {
      const BehaviorDetection& det = results[0].detections[b];
      const OracleRow row =
          oracle_detect(bundle, 0, bundle.captions[0].behaviors[b], cfg);
      CHECK(det.confidence == row.confidence);
      CHECK(det.per_frame_scores == row.per_frame);
      CHECK(det.tau == row.tau);
      CHECK((det.verdict == Verdict::kHallucinated) == row.hallucinated);
      CHECK(det.entropy == embedding_entropy(det.e_beh));
    }
  }
}

TEST_CASE("verdicts are invariant under positive power-of-two scaling") {
  SequenceBundle bundle = random_bundle(81, 4, 3, 6, 8);
  const DetectionConfig cfg = config(1, {0, 2});
  const auto before = detect_behaviors(bundle, cfg);

  for (auto& frame : bundle.frames) {
    for (auto& slice : frame) {
      for (Vec32& patch : slice.patch_embeddings) {
        std::vector<float> scaled = patch.values();
        for (float& x : scaled) x *= 4.0f;
        patch = Vec32(std::move(scaled));
      }
    }
  }
  for (auto& caption : bundle.text_layers) {
    for (auto& slice : caption) {
      for (Vec32& tok : slice.token_embeddings) {
        std::vector<float> scaled = tok.values();
        for (float& x : scaled) x *= 4.0f;
        tok = Vec32(std::move(scaled));
      }
    }
  }
  const auto after = detect_behaviors(bundle, cfg);
  REQUIRE(after.size() == before.size());
  const BehaviorDetection& a = before[0].detections[0];
  const BehaviorDetection& b = after[0].detections[0];
  CHECK(a.confidence == b.confidence);
  CHECK(a.per_frame_scores == b.per_frame_scores);
  CHECK(a.tau == b.tau);
  CHECK((a.verdict == Verdict::kGrounded) == (b.verdict == Verdict::kGrounded));
}

TEST_CASE("missing configured layers are reported") {
  const SequenceBundle bundle = random_bundle(91, 2, 2, 3, 4);
  CHECK_THROWS_AS(detect_behaviors(bundle, config(0, {0, 7})), ValidationError);
  CHECK_THROWS_AS(
      frame_score(bundle, 0, bundle.text_layers[0][0].token_embeddings[0],
                  config(0, {7})),
      ValidationError);
}
