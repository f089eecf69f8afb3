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
#include <iosfwd>
#include <string>
#include <vector>

#include "she/core.hpp"

namespace she {

// Generator parameters for ground-truth-known corpora.
//
// Every sequence gets an orthonormal direction per behavior.  A grounded
// behavior receives one planted patch whose cosine against its direction
// is exactly midway between planted_grounded_cos and 1, at a known frame
// and the first default-scanned layer; a hallucinated behavior's strongest
// patch has cosine exactly 0.9 * planted_hallucinated_cos.  All remaining
// patches are built inside the orthogonal complement of the behavior
// subspace, so the planted values are also exact global bounds.
struct SynthSpec {
  std::size_t sequences = 8;
  std::size_t frames = 6;
  std::size_t patches = 12;
  std::size_t layers = 6;
  std::size_t dim = 32;
  std::size_t grounded_behaviors = 3;
  std::size_t hallucinated_behaviors = 2;
  std::size_t grounded_objects = 2;
  std::size_t hallucinated_objects = 1;
  double planted_grounded_cos = 0.8;
  double planted_hallucinated_cos = 0.2;
  std::uint64_t seed = 7;

  void validate() const;
};

// Reads a SynthSpec from JSON: an object whose (all optional) keys match
// the field names above; unknown keys are rejected.
SynthSpec read_synth_spec(std::istream& in);
SynthSpec read_synth_spec(const std::string& path);

// Deterministic corpus of annotated bundles; labels are the ground truth.
std::vector<SequenceBundle> generate_synthetic(const SynthSpec& spec);

// Corpus that plants correlated evidence to exercise correction:
//
//   - one hallucinated behavior per sequence whose only support comes from
//     patches that mix its direction (cosine hallucinated_evidence_cos)
//     with a distinct grounded behavior's direction (grounded_evidence_cos);
//   - those grounded behaviors have no other support, so their detection
//     confidence starts below a theta of 0.5 (false positives) and rises
//     once the hallucinated component is projected away.
struct ContaminationSpec {
  std::size_t sequences = 20;
  std::size_t frames = 8;
  std::size_t patches = 10;
  std::size_t layers = 3;
  std::size_t dim = 24;
  std::size_t contaminated_grounded = 3;  // per sequence
  double grounded_evidence_cos = 0.45;
  double hallucinated_evidence_cos = 0.75;
  std::uint64_t seed = 11;

  void validate() const;
};

std::vector<SequenceBundle> generate_contaminated_corpus(const ContaminationSpec& spec);

}  // namespace she
