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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "she/core.hpp"

namespace she {

// Inverted mention index over a caption corpus: normalized surface form to
// the set of caption ids mentioning it.  Behaviors and objects are indexed
// separately because the same word can name either.
struct CaptionIndex {
  std::map<std::string, std::set<std::string>> behavior_mentions;
  std::map<std::string, std::set<std::string>> object_mentions;

  // Captions mentioning the given (un-normalized) surface; empty set when
  // the surface is unknown.
  const std::set<std::string>& behavior_captions(const std::string& surface) const;
  const std::set<std::string>& object_captions(const std::string& surface) const;
};

// Builds the index over the corpus.  Caption ids must be unique.
CaptionIndex build_index(const std::vector<CaptionRecord>& corpus);

// Co-occurrence score between the hallucinated behaviors of `c` and its
// real behaviors:
//
//   sum over hallucinated b_i, real b_j of |C(b_i) n C(b_j)| / (|C(b_i)| + |C(b_j)|)
//
// where C(x) is the set of captions mentioning x.  Pairs with an empty
// union contribute zero.
double cos_bh(const CaptionRecord& c, const CaptionIndex& idx);

// Same shape, but pairing hallucinated behaviors against the caption's
// hallucinated objects.
double cos_bo(const CaptionRecord& c, const CaptionIndex& idx);

// Control counterpart of `c`: its hallucinated slots are re-filled with
// distinct Real-labeled behavior surfaces sampled uniformly (without
// replacement, seeded) from the corpus, excluding c's own hallucinated
// surfaces.  Throws ControlSampleError when fewer candidates exist than
// hallucinated slots.  A caption without hallucinated behaviors is
// returned unchanged.
CaptionRecord sample_control(const CaptionRecord& c,
                             const std::vector<CaptionRecord>& corpus,
                             std::uint64_t seed);

// Per-caption co-occurrence summary.  Control columns stay empty when the
// corpus cannot supply a control sample.
struct CoSReport {
  std::string caption_id;
  double cos_bh = 0.0;
  double cos_bo = 0.0;
  std::optional<double> control_cos_bh;
  std::optional<double> control_cos_bo;
  std::size_t n_h = 0;  // hallucinated behaviors
  std::size_t n_r = 0;  // real behaviors
  std::size_t m = 0;    // hallucinated objects
};

// Scores every caption in corpus order.  When `control_seed` is set, each
// caption also gets a control score drawn from an independent substream.
std::vector<CoSReport> compute_cos_reports(const std::vector<CaptionRecord>& corpus,
                                           std::optional<std::uint64_t> control_seed);

// Fixed-width histogram over [0, max(values)]; bin width defaults to 0.05.
// Returns per-bin counts; empty input yields a single empty bin.
std::vector<std::size_t> histogram_counts(const std::vector<double>& values,
                                          double bin_width = 0.05);

}  // namespace she
