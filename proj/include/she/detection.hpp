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

#include <cstddef>
#include <string>
#include <vector>

#include "she/core.hpp"

namespace she {

// Detection parameters.
//
//   text_layer   tokenizer layer whose token embeddings form behavior vectors
//   gamma        entropy-to-window scale, in (0, 2]
//   theta        verdict threshold in [0, 1]; confidence below it flags a
//                behavior as hallucinated
//   layer_set    image layers scanned by the max-alignment score (non-empty)
struct DetectionConfig {
  int text_layer = 0;
  double gamma = 0.5;
  double theta = 0.5;
  std::vector<int> layer_set;

  // Middle-to-late defaults for a model with `depth` layers (0-based
  // indices): layer_set covers [ceil(2*depth/3), depth-1] and text_layer is
  // the first layer of that range.
  static DetectionConfig defaults_for_depth(int depth);

  void validate() const;
};

enum class Verdict { kGrounded, kHallucinated };

std::string to_string(Verdict verdict);
Verdict verdict_from_string(const std::string& text);

// Detection outcome for one annotated behavior.
struct BehaviorDetection {
  std::string behavior_id;
  Vec32 e_beh;             // span-averaged behavior embedding
  double confidence = 0.0; // max alignment across frames/patches/layers
  double entropy = 0.0;    // Shannon entropy of |e_beh| mass, in nats
  int tau = 0;             // aggregation window width, ceil(gamma * entropy)
  Verdict verdict = Verdict::kGrounded;
  std::vector<double> per_frame_scores;  // one max-alignment score per frame
};

struct CaptionDetections {
  std::string caption_id;
  std::vector<BehaviorDetection> detections;
};

// Mean of the text-layer token embeddings across the behavior's span.
Vec32 behavior_embedding(const SequenceBundle& bundle, std::size_t caption_index,
                         const Annotation& behavior, const DetectionConfig& cfg);

// Max cosine between e_beh and one patch across the configured layers.
// `patch_by_layer` holds that patch's embedding at each scanned layer.
double patch_score(const Vec32& e_beh, const std::vector<Vec32>& patch_by_layer);
double patch_score(const SequenceBundle& bundle, std::size_t frame, std::size_t patch,
                   const Vec32& e_beh, const DetectionConfig& cfg);

// Max patch score within a frame; max frame score across the sequence.
double frame_score(const SequenceBundle& bundle, std::size_t frame, const Vec32& e_beh,
                   const DetectionConfig& cfg);
double confidence(const SequenceBundle& bundle, const Vec32& e_beh,
                  const DetectionConfig& cfg);

// Shannon entropy (nats) of the normalized magnitude mass p_k = |e_k| /
// sum_j |e_j|; zero vector yields 0.
double embedding_entropy(const Vec32& e);

// Window width tau = ceil(gamma * entropy(e_beh)); the aggregation window
// spans ceil(tau / 2) frames on each side of its center.
int window_radius(const Vec32& e_beh, const DetectionConfig& cfg);
int window_half_span(int tau);

// Patch-feature window: embeddings of one patch index over the frames
// within [center - radius, center + radius] (clipped to the sequence) at
// every configured layer.
struct WindowMember {
  std::size_t frame = 0;
  std::size_t patch = 0;
  int layer_index = 0;
  const Vec32* embedding = nullptr;
};

struct AggregatedWindow {
  std::size_t center = 0;
  int radius = 0;
  std::vector<WindowMember> members;  // frames ascending, layers ascending
};

AggregatedWindow aggregate_window(const SequenceBundle& bundle, std::size_t center,
                                  std::size_t patch, int tau, const DetectionConfig& cfg);

// Scores every annotated behavior of every caption; a behavior is flagged
// hallucinated exactly when its confidence falls below cfg.theta.
std::vector<CaptionDetections> detect_behaviors(const SequenceBundle& bundle,
                                                const DetectionConfig& cfg);

}  // namespace she
