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
#include <string>
#include <utility>
#include <vector>

#include "she/core.hpp"

namespace she {

// Number of per-sequence stages in the staged-perturbation experiment.
inline constexpr int kSnowballSegments = 10;

enum class PerturbKind { kGaussianNoise, kOcclusion };

// One staged perturbation.
//
//   kind           GaussianNoise adds seeded iid noise (stddev sigma) to
//                  every patch embedding of the segment's frames at every
//                  layer; Occlusion zeroes round(fraction * patches)
//                  seeded patch indices per frame, across all layers.
//   segment_index  1-based stage in [1, kSnowballSegments]
struct PerturbSpec {
  PerturbKind kind = PerturbKind::kGaussianNoise;
  double sigma = 1.5;
  double fraction = 0.2;
  int segment_index = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

// Splits `frame_count` frames into `k` contiguous half-open [begin, end)
// ranges whose sizes differ by at most one, longer ranges first.
std::vector<std::pair<std::size_t, std::size_t>> segment_sequence(std::size_t frame_count,
                                                                  int k = kSnowballSegments);

// Applies the perturbation to a copy; frames outside the segment stay
// bitwise identical to the input.
SequenceBundle perturb(const SequenceBundle& bundle, const PerturbSpec& spec);

// Minimal captioner surrogate with a recurrence bias.  Per frame, each
// library behavior scores
//
//   max cosine against the frame's patches (all layers)
//     + carryover * (times the behavior was emitted in earlier frames)
//
// and is emitted when the score exceeds emission_threshold.  Emission
// counts update after the whole frame is scored.
struct StubModel {
  std::vector<std::pair<std::string, Vec32>> behavior_library;  // (surface, unit direction)
  double carryover = 0.0;         // in [0, 1)
  double emission_threshold = 0.5;

  void validate(std::size_t expected_dim) const;
};

// One caption per frame; emitted behaviors become Unknown-labeled
// single-token annotations in library order.
std::vector<CaptionRecord> stub_generate(const SequenceBundle& bundle,
                                         const StubModel& model);

// Behavior-hallucination rate of generated captions against a reference
// emission set: the fraction of frames emitting at least one behavior that
// a carryover-free model would not emit from the clean bundle.
double stub_bh_rate(const std::vector<CaptionRecord>& generated,
                    const std::vector<CaptionRecord>& reference);

struct StageResult {
  int segment_index = 0;
  double mean_delta_bh = 0.0;  // mean over trials of (perturbed - clean) BH rate
  double std_delta_bh = 0.0;   // sample standard deviation over trials
};

// Runs `trials` seeded repetitions of every spec and reports per-stage
// change in BH rate relative to the unperturbed bundle.  Fully
// deterministic for a fixed (bundle, model, specs, trials, seed).
std::vector<StageResult> run_stage_experiment(const SequenceBundle& bundle,
                                              const StubModel& model,
                                              const std::vector<PerturbSpec>& specs,
                                              int trials, std::uint64_t seed);

// Builds a stub library from a bundle's annotated behaviors: one entry per
// distinct normalized surface, direction = normalized span average at
// `text_layer`.  Surfaces with degenerate averages are skipped.
StubModel stub_from_annotations(const SequenceBundle& bundle, int text_layer,
                                double carryover, double emission_threshold);

// Deterministic lab sequence tuned so recurrence bias amplifies
// early-stage corruption.
//
// All behavior directions are orthonormal axes.  Lure behaviors never
// truly appear, but each distractor patch leaks an exact cosine
// (lure_leak) toward half of them, alternating by patch parity; optional
// grounded behaviors appear once each, with exact cosine grounded_cos in
// a single home frame.  With lure_leak < emission_threshold the clean
// sequence emits only home behaviors, while added noise occasionally
// pushes a lure over threshold; once emitted, a lure's carryover plus the
// ever-present ambient leak keeps it above threshold for every remaining
// frame (lure_leak + carryover > emission_threshold), so one early slip
// snowballs down the whole sequence.
struct CascadeLabSpec {
  std::size_t frames = 30;
  std::size_t patches = 12;
  std::size_t layers = 2;
  std::size_t dim = 12;
  std::size_t lure_behaviors = 8;
  std::size_t grounded_behaviors = 0;
  double lure_leak = 0.35;
  double grounded_cos = 0.95;
  double patch_scale = 1.5;
  double carryover = 0.5;
  double emission_threshold = 0.6;
};

struct CascadeLab {
  SequenceBundle bundle;
  StubModel model;
};

CascadeLab build_cascade_lab(const CascadeLabSpec& spec);

}  // namespace she
