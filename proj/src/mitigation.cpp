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

#include "she/mitigation.hpp"

#include <algorithm>
#include <cmath>

namespace she {

namespace {

constexpr double kDegenerateNorm = 1e-12;

std::size_t argmax_frame(const std::vector<double>& scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

LayerPatchEmbeddings* mutable_patch_layer(SequenceBundle& bundle, std::size_t frame,
                                          int layer_index) {
  for (LayerPatchEmbeddings& slice : bundle.frames[frame]) {
    if (slice.layer_index == layer_index) return &slice;
  }
  return nullptr;
}

}  // namespace

void MitigationConfig::validate() const {
  if (alpha_base < 0.0) {
    throw ValidationError("mitigation: alpha_base must be non-negative, got " +
                          std::to_string(alpha_base));
  }
  if (fixed_alpha && *fixed_alpha < 0.0) {
    throw ValidationError("mitigation: fixed_alpha must be non-negative");
  }
}

Vec32 project_out(const Vec32& e, const Vec32& direction, double alpha) {
  if (e.dim() != direction.dim()) {
    throw ValidationError("project_out: dimension mismatch");
  }
  if (alpha == 0.0) return e;

  double dot = 0.0, dd = 0.0;
  for (std::size_t i = 0; i < e.dim(); ++i) {
    dot += static_cast<double>(e[i]) * direction[i];
    dd += static_cast<double>(direction[i]) * direction[i];
  }
  if (std::sqrt(dd) < kDegenerateNorm) {
    throw ValidationError("project_out: degenerate direction");
  }
  const double scale = alpha * dot / dd;
  std::vector<float> out(e.dim());
  for (std::size_t i = 0; i < e.dim(); ++i) {
    out[i] = static_cast<float>(e[i] - scale * direction[i]);
  }
  return Vec32(std::move(out));
}

Vec32 behavior_direction(const SequenceBundle& bundle, std::size_t caption_index,
                         const Annotation& behavior, const MitigationConfig& cfg) {
  DetectionConfig text_cfg;
  text_cfg.text_layer = cfg.text_layer;
  Annotation span = behavior;
  if (cfg.single_token_direction) span.span.start = span.span.end;
  const Vec32 direction = behavior_embedding(bundle, caption_index, span, text_cfg);
  double norm = 0.0;
  for (std::size_t i = 0; i < direction.dim(); ++i) {
    norm += static_cast<double>(direction[i]) * direction[i];
  }
  if (std::sqrt(norm) < kDegenerateNorm) {
    throw ValidationError("behavior_direction: \"" + behavior.id +
                          "\" has a zero-norm span average; projection undefined");
  }
  return direction;
}

double correction_alpha(const MitigationConfig& cfg, double confidence_max) {
  if (confidence_max < 0.0 || confidence_max > 1.0) {
    throw ValidationError("correction_alpha: confidence_max must be clamped to [0, 1]");
  }
  return cfg.alpha_base * (1.0 - confidence_max);
}

MitigationResult mitigate(const SequenceBundle& bundle,
                          const std::vector<CaptionDetections>& detections,
                          const MitigationConfig& cfg, const DetectionConfig& det_cfg) {
  cfg.validate();
  det_cfg.validate();
  validate_bundle(bundle);

  MitigationResult result;
  result.bundle = bundle;

  // Correction plans are derived entirely from the input bundle (the state
  // the detections describe); only the applications below are sequential.
  struct PlannedCorrection {
    std::size_t caption_index = 0;
    const BehaviorDetection* detection = nullptr;
  };
  std::vector<PlannedCorrection> planned;
  for (const CaptionDetections& caption : detections) {
    std::size_t caption_index = bundle.captions.size();
    for (std::size_t i = 0; i < bundle.captions.size(); ++i) {
      if (bundle.captions[i].caption_id == caption.caption_id) {
        caption_index = i;
        break;
      }
    }
    if (caption_index == bundle.captions.size()) {
      throw ValidationError("mitigate: detections reference unknown caption \"" +
                            caption.caption_id + "\"");
    }
    for (const BehaviorDetection& det : caption.detections) {
      if (det.verdict != Verdict::kHallucinated) continue;
      if (det.per_frame_scores.size() != bundle.frame_count()) {
        throw ValidationError("mitigate: detection \"" + det.behavior_id +
                              "\" does not match the bundle's frame count");
      }
      planned.push_back(PlannedCorrection{caption_index, &det});
    }
  }

  for (const PlannedCorrection& plan : planned) {
    const BehaviorDetection& det = *plan.detection;
    const CaptionRecord& caption = bundle.captions[plan.caption_index];

    CorrectionRecord record;
    record.behavior_id = det.behavior_id;
    record.caption_id = caption.caption_id;

    const Annotation* behavior = nullptr;
    for (const Annotation& a : caption.behaviors) {
      if (a.id == det.behavior_id) {
        behavior = &a;
        break;
      }
    }
    if (behavior == nullptr) {
      throw ValidationError("mitigate: detection references unknown behavior \"" +
                            det.behavior_id + "\"");
    }

    Vec32 direction;
    try {
      direction = behavior_direction(bundle, plan.caption_index, *behavior, cfg);
    } catch (const ValidationError&) {
      record.skipped = true;
      result.records.push_back(std::move(record));
      continue;
    }

    const std::size_t center = argmax_frame(det.per_frame_scores);
    for (std::size_t patch = 0; patch < bundle.patch_count(); ++patch) {
      // Window members and the alignment that scales alpha come from the
      // detection-time (input) bundle.
      const AggregatedWindow window =
          aggregate_window(bundle, center, patch, det.tau, det_cfg);
      double alignment = -1.0;
      for (const WindowMember& member : window.members) {
        alignment = std::max(alignment, cosine(det.e_beh, *member.embedding));
      }
      const double alpha = cfg.fixed_alpha
                               ? *cfg.fixed_alpha
                               : correction_alpha(cfg, std::clamp(alignment, 0.0, 1.0));
      record.alpha_used = std::max(record.alpha_used, alpha);
      for (const WindowMember& member : window.members) {
        LayerPatchEmbeddings* slice =
            mutable_patch_layer(result.bundle, member.frame, member.layer_index);
        slice->patch_embeddings[member.patch] =
            project_out(slice->patch_embeddings[member.patch], direction, alpha);
        record.affected.push_back(
            AffectedFeature{member.frame, member.patch, member.layer_index});
      }
    }

    for (const AffectedFeature& feature : record.affected) {
      const LayerPatchEmbeddings* slice =
          mutable_patch_layer(result.bundle, feature.frame, feature.layer_index);
      record.residual_alignment =
          std::max(record.residual_alignment,
                   std::abs(cosine(slice->patch_embeddings[feature.patch], direction)));
    }
    result.records.push_back(std::move(record));
  }
  return result;
}

}  // namespace she
