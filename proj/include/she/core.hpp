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
#include <cstdint>
#include <string>
#include <vector>

#include "she/errors.hpp"

namespace she {

// Dense float32 vector.  Entries are checked finite on construction; all
// downstream accumulation (dot products, means, entropies) runs in float64
// and results are rounded back to float32 only when stored.
class Vec32 {
 public:
  Vec32() = default;
  explicit Vec32(std::vector<float> values);

  static Vec32 zeros(std::size_t dim);

  std::size_t dim() const { return values_.size(); }
  const std::vector<float>& values() const { return values_; }
  float operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const Vec32&) const = default;

 private:
  std::vector<float> values_;
};

// Cosine similarity in [-1, 1].  Degenerate inputs (either norm below
// 1e-12) yield 0 rather than NaN so dead patches never poison a max
// reduction.  Dimensions must agree.
double cosine(const Vec32& v, const Vec32& w);

// Component-wise mean of a non-empty list of equal-dimension vectors.
Vec32 mean_vectors(const std::vector<Vec32>& vs);

// Canonical surface form used for co-mention lookups: ASCII lowercase,
// punctuation stripped, runs of whitespace collapsed to single spaces,
// leading/trailing whitespace removed.
std::string normalize_surface(const std::string& surface);

// Deterministic 64-bit seed derivation (splitmix64 finalizer) so nested
// experiments can branch independent streams from one user-facing seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

enum class Label { kReal, kHallucinated, kUnknown };

std::string to_string(Label label);
Label label_from_string(const std::string& text);

// Inclusive token index range [start, end] into a caption's token list.
struct TokenSpan {
  std::uint32_t start = 0;
  std::uint32_t end = 0;

  bool operator==(const TokenSpan&) const = default;
};

// One annotated behavior or object mention inside a caption.
struct Annotation {
  std::string id;
  TokenSpan span;
  Label label = Label::kUnknown;
  std::string surface;

  bool operator==(const Annotation&) const = default;
};

// One caption with its annotated behavior and object mentions.
struct CaptionRecord {
  std::string caption_id;
  std::vector<std::string> tokens;
  std::vector<Annotation> behaviors;
  std::vector<Annotation> objects;

  bool operator==(const CaptionRecord&) const = default;
};

// Token embeddings at one tokenizer layer; one vector per caption token.
struct LayerTokenEmbeddings {
  int layer_index = 0;
  std::vector<Vec32> token_embeddings;

  bool operator==(const LayerTokenEmbeddings&) const = default;
};

// Patch embeddings for one (frame, layer) slice; one vector per patch.
struct LayerPatchEmbeddings {
  int layer_index = 0;
  int frame_index = 0;
  std::vector<Vec32> patch_embeddings;

  bool operator==(const LayerPatchEmbeddings&) const = default;
};

// All exported embeddings for one image sequence plus its captions.
//
//   frames[t]        layer slices for frame t, ascending layer_index
//   text_layers[i]   layer slices for caption i's tokens
//   captions[i]      annotation record paired with text_layers[i]
struct SequenceBundle {
  std::string sequence_id;
  std::vector<std::vector<LayerPatchEmbeddings>> frames;
  std::vector<std::vector<LayerTokenEmbeddings>> text_layers;
  std::vector<CaptionRecord> captions;

  std::size_t frame_count() const { return frames.size(); }
  std::size_t patch_count() const;
  std::size_t embedding_dim() const;

  // Layer indices available on the image side, ascending.
  std::vector<int> image_layer_indices() const;

  // Slice lookups; return nullptr when the layer is absent.
  const LayerPatchEmbeddings* patch_layer(std::size_t frame, int layer_index) const;
  const LayerTokenEmbeddings* token_layer(std::size_t caption, int layer_index) const;
};

// Structural checks; throw ValidationError describing the first violation.
void validate_caption(const CaptionRecord& caption);
void validate_bundle(const SequenceBundle& bundle);

}  // namespace she
