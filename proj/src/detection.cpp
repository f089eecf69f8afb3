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

#include "she/detection.hpp"

#include <algorithm>
#include <cmath>

namespace she {

namespace {

// Every configured image layer must exist in the bundle; checked once per
// entry point so scoring loops can assume presence.
void check_layers(const SequenceBundle& bundle, const DetectionConfig& cfg) {
  for (int layer : cfg.layer_set) {
    if (bundle.patch_layer(0, layer) == nullptr) {
      throw ValidationError("detection: image layer " + std::to_string(layer) +
                            " absent from bundle \"" + bundle.sequence_id + "\"");
    }
  }
}

}  // namespace

DetectionConfig DetectionConfig::defaults_for_depth(int depth) {
  if (depth < 2) throw ValidationError("defaults_for_depth: depth must be at least 2");
  const int first = static_cast<int>(std::ceil(2.0 * depth / 3.0));
  DetectionConfig cfg;
  cfg.text_layer = first;
  for (int layer = first; layer < depth; ++layer) cfg.layer_set.push_back(layer);
  cfg.validate();
  return cfg;
}

void DetectionConfig::validate() const {
  if (!(gamma > 0.0) || gamma > 2.0) {
    throw ValidationError("detection: gamma must lie in (0, 2], got " +
                          std::to_string(gamma));
  }
  if (theta < 0.0 || theta > 1.0) {
    throw ValidationError("detection: theta must lie in [0, 1], got " +
                          std::to_string(theta));
  }
  if (layer_set.empty()) throw ValidationError("detection: layer_set must be non-empty");
  std::vector<int> sorted = layer_set;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("detection: layer_set contains a repeated layer");
  }
}

std::string to_string(Verdict verdict) {
  return verdict == Verdict::kHallucinated ? "Hallucinated" : "Grounded";
}

Verdict verdict_from_string(const std::string& text) {
  if (text == "Hallucinated") return Verdict::kHallucinated;
  if (text == "Grounded") return Verdict::kGrounded;
  throw ValidationError("unknown verdict \"" + text + "\"");
}

Vec32 behavior_embedding(const SequenceBundle& bundle, std::size_t caption_index,
                         const Annotation& behavior, const DetectionConfig& cfg) {
  if (caption_index >= bundle.captions.size()) {
    throw ValidationError("behavior_embedding: caption index out of range");
  }
  const LayerTokenEmbeddings* layer = bundle.token_layer(caption_index, cfg.text_layer);
  if (layer == nullptr) {
    throw ValidationError("behavior_embedding: text layer " +
                          std::to_string(cfg.text_layer) + " absent from caption \"" +
                          bundle.captions[caption_index].caption_id + "\"");
  }
  if (behavior.span.end >= layer->token_embeddings.size()) {
    throw ValidationError("behavior_embedding: span of \"" + behavior.id +
                          "\" exceeds token count");
  }
  std::vector<Vec32> span;
  span.reserve(behavior.span.end - behavior.span.start + 1);
  for (std::uint32_t i = behavior.span.start; i <= behavior.span.end; ++i) {
    span.push_back(layer->token_embeddings[i]);
  }
  return mean_vectors(span);
}

double patch_score(const Vec32& e_beh, const std::vector<Vec32>& patch_by_layer) {
  if (patch_by_layer.empty()) {
    throw ValidationError("patch_score: no layers supplied");
  }
  double best = -1.0;
  for (const Vec32& embedding : patch_by_layer) {
    best = std::max(best, cosine(e_beh, embedding));
  }
  return best;
}

double patch_score(const SequenceBundle& bundle, std::size_t frame, std::size_t patch,
                   const Vec32& e_beh, const DetectionConfig& cfg) {
  cfg.validate();
  check_layers(bundle, cfg);
  if (frame >= bundle.frame_count() || patch >= bundle.patch_count()) {
    throw ValidationError("patch_score: frame or patch index out of range");
  }
  double best = -1.0;
  for (int layer : cfg.layer_set) {
    const LayerPatchEmbeddings* slice = bundle.patch_layer(frame, layer);
    best = std::max(best, cosine(e_beh, slice->patch_embeddings[patch]));
  }
  return best;
}

double frame_score(const SequenceBundle& bundle, std::size_t frame, const Vec32& e_beh,
                   const DetectionConfig& cfg) {
  cfg.validate();
  check_layers(bundle, cfg);
  if (frame >= bundle.frame_count()) {
    throw ValidationError("frame_score: frame index out of range");
  }
  double best = -1.0;
  for (int layer : cfg.layer_set) {
    const LayerPatchEmbeddings* slice = bundle.patch_layer(frame, layer);
    for (const Vec32& patch : slice->patch_embeddings) {
      best = std::max(best, cosine(e_beh, patch));
    }
  }
  return best;
}

double confidence(const SequenceBundle& bundle, const Vec32& e_beh,
                  const DetectionConfig& cfg) {
  double best = -1.0;
  for (std::size_t t = 0; t < bundle.frame_count(); ++t) {
    best = std::max(best, frame_score(bundle, t, e_beh, cfg));
  }
  return best;
}

double embedding_entropy(const Vec32& e) {
  double mass = 0.0;
  for (std::size_t i = 0; i < e.dim(); ++i) mass += std::abs(static_cast<double>(e[i]));
  if (mass == 0.0) return 0.0;
  double entropy = 0.0;
  for (std::size_t i = 0; i < e.dim(); ++i) {
    const double p = std::abs(static_cast<double>(e[i])) / mass;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return entropy;
}

int window_radius(const Vec32& e_beh, const DetectionConfig& cfg) {
  cfg.validate();
  return static_cast<int>(std::ceil(cfg.gamma * embedding_entropy(e_beh)));
}

int window_half_span(int tau) {
  if (tau < 0) throw ValidationError("window_half_span: negative tau");
  return (tau + 1) / 2;
}

AggregatedWindow aggregate_window(const SequenceBundle& bundle, std::size_t center,
                                  std::size_t patch, int tau,
                                  const DetectionConfig& cfg) {
  cfg.validate();
  check_layers(bundle, cfg);
  if (center >= bundle.frame_count() || patch >= bundle.patch_count()) {
    throw ValidationError("aggregate_window: center or patch index out of range");
  }
  AggregatedWindow window;
  window.center = center;
  window.radius = window_half_span(tau);

  std::vector<int> layers = cfg.layer_set;
  std::sort(layers.begin(), layers.end());

  const std::size_t first =
      center >= static_cast<std::size_t>(window.radius) ? center - window.radius : 0;
  const std::size_t last =
      std::min(bundle.frame_count() - 1, center + static_cast<std::size_t>(window.radius));
  for (std::size_t t = first; t <= last; ++t) {
    for (int layer : layers) {
      const LayerPatchEmbeddings* slice = bundle.patch_layer(t, layer);
      window.members.push_back(
          WindowMember{t, patch, layer, &slice->patch_embeddings[patch]});
    }
  }
  return window;
}

std::vector<CaptionDetections> detect_behaviors(const SequenceBundle& bundle,
                                                const DetectionConfig& cfg) {
  cfg.validate();
  validate_bundle(bundle);
  check_layers(bundle, cfg);

  std::vector<CaptionDetections> results;
  results.reserve(bundle.captions.size());
  for (std::size_t c = 0; c < bundle.captions.size(); ++c) {
    CaptionDetections caption_result;
    caption_result.caption_id = bundle.captions[c].caption_id;
    for (const Annotation& behavior : bundle.captions[c].behaviors) {
      BehaviorDetection det;
      det.behavior_id = behavior.id;
      det.e_beh = behavior_embedding(bundle, c, behavior, cfg);
      det.per_frame_scores.reserve(bundle.frame_count());
      double best = -1.0;
      for (std::size_t t = 0; t < bundle.frame_count(); ++t) {
        const double score = frame_score(bundle, t, det.e_beh, cfg);
        det.per_frame_scores.push_back(score);
        best = std::max(best, score);
      }
      det.confidence = best;
      det.entropy = embedding_entropy(det.e_beh);
      det.tau = static_cast<int>(std::ceil(cfg.gamma * det.entropy));
      det.verdict =
          det.confidence < cfg.theta ? Verdict::kHallucinated : Verdict::kGrounded;
      caption_result.detections.push_back(std::move(det));
    }
    results.push_back(std::move(caption_result));
  }
  return results;
}

}  // namespace she
