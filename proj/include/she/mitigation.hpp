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
#include <optional>
#include <string>
#include <vector>

#include "she/detection.hpp"

namespace she {

// Mitigation parameters.
//
//   alpha_base   correction gain; effective alpha is alpha_base scaled by
//                (1 - per-patch confidence), so weakly supported content is
//                removed aggressively.  Values above 1 over-subtract past
//                orthogonality on purpose.
//   text_layer   tokenizer layer used to form the projection direction
//   fixed_alpha  when set, bypasses confidence scaling and applies this
//                alpha to every affected feature (exactness experiments)
//   single_token_direction
//                use only the span's last token (the phrase head) as the
//                projection direction instead of the span average
struct MitigationConfig {
  double alpha_base = 4.5;
  int text_layer = 0;
  std::optional<double> fixed_alpha;
  bool single_token_direction = false;

  void validate() const;
};

// E - alpha * (E . d / |d|^2) d, accumulated in float64 and stored back to
// float32.  alpha = 1 removes the component along d entirely; alpha = 0
// returns E bitwise unchanged.  Throws when d is degenerate (norm < 1e-12).
Vec32 project_out(const Vec32& e, const Vec32& direction, double alpha);

// Span-averaged text-layer direction for a behavior; degenerate (near-zero)
// results are a ValidationError because no projection is defined.
Vec32 behavior_direction(const SequenceBundle& bundle, std::size_t caption_index,
                         const Annotation& behavior, const MitigationConfig& cfg);

// alpha_base * (1 - confidence_max); confidence_max must be pre-clamped to
// [0, 1].
double correction_alpha(const MitigationConfig& cfg, double confidence_max);

struct AffectedFeature {
  std::size_t frame = 0;
  std::size_t patch = 0;
  int layer_index = 0;

  bool operator==(const AffectedFeature&) const = default;
};

// Audit record for one corrected (or skipped) behavior.
struct CorrectionRecord {
  std::string behavior_id;
  std::string caption_id;
  std::vector<AffectedFeature> affected;
  double alpha_used = 0.0;          // strongest alpha applied to any patch
  double residual_alignment = 0.0;  // max |cos(corrected, direction)| over affected
  bool skipped = false;             // degenerate direction: nothing applied
};

struct MitigationResult {
  SequenceBundle bundle;
  std::vector<CorrectionRecord> records;
};

// Applies feature-space corrections for every behavior flagged Hallucinated
// in `detections`, sequentially in annotation order, and returns a new
// bundle (inputs are never modified; untouched features stay bitwise
// identical).
//
// For each flagged behavior the window center is the frame with the highest
// detection-time frame score, the radius is ceil(tau / 2) with tau taken
// from the detection, and every patch index is corrected across the
// detection layer set.  Per-patch alpha derives from the patch's maximum
// detection-time alignment within the window, clamped to [0, 1]; the
// affected member set and the alphas are computed against the input bundle
// so repeated application with a fixed alpha is stable.
MitigationResult mitigate(const SequenceBundle& bundle,
                          const std::vector<CaptionDetections>& detections,
                          const MitigationConfig& cfg, const DetectionConfig& det_cfg);

}  // namespace she
