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

#include "she/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <unordered_set>

namespace she {

namespace {

constexpr double kDegenerateNorm = 1e-12;

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

}  // namespace

const char* to_string(ArchiveErrorCode code) {
  switch (code) {
    case ArchiveErrorCode::kBadMagic: return "bad magic";
    case ArchiveErrorCode::kTruncated: return "truncated";
    case ArchiveErrorCode::kDuplicateName: return "duplicate name";
    case ArchiveErrorCode::kShapeMismatch: return "shape mismatch";
    case ArchiveErrorCode::kTrailingData: return "trailing data";
  }
  return "unknown archive error";
}

Vec32::Vec32(std::vector<float> values) : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw ValidationError("vector entry " + std::to_string(i) + " is not finite");
    }
  }
}

Vec32 Vec32::zeros(std::size_t dim) {
  return Vec32(std::vector<float>(dim, 0.0f));
}

double cosine(const Vec32& v, const Vec32& w) {
  require(v.dim() == w.dim(), "cosine: dimension mismatch (" + std::to_string(v.dim()) +
                                  " vs " + std::to_string(w.dim()) + ")");
  double dot = 0.0, vv = 0.0, ww = 0.0;
  for (std::size_t i = 0; i < v.dim(); ++i) {
    const double a = v[i], b = w[i];
    dot += a * b;
    vv += a * a;
    ww += b * b;
  }
  const double nv = std::sqrt(vv), nw = std::sqrt(ww);
  if (nv < kDegenerateNorm || nw < kDegenerateNorm) return 0.0;
  return std::clamp(dot / (nv * nw), -1.0, 1.0);
}

Vec32 mean_vectors(const std::vector<Vec32>& vs) {
  require(!vs.empty(), "mean_vectors: empty input");
  const std::size_t dim = vs.front().dim();
  std::vector<double> acc(dim, 0.0);
  for (const Vec32& v : vs) {
    require(v.dim() == dim, "mean_vectors: dimension mismatch");
    for (std::size_t i = 0; i < dim; ++i) acc[i] += v[i];
  }
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    out[i] = static_cast<float>(acc[i] / static_cast<double>(vs.size()));
  }
  return Vec32(std::move(out));
}

std::string normalize_surface(const std::string& surface) {
  std::string out;
  out.reserve(surface.size());
  bool pending_space = false;
  for (unsigned char c : surface) {
    if (std::isspace(c)) {
      pending_space = true;
      continue;
    }
    if (std::ispunct(c)) continue;
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer over the combined word.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string to_string(Label label) {
  switch (label) {
    case Label::kReal: return "Real";
    case Label::kHallucinated: return "Hallucinated";
    case Label::kUnknown: return "Unknown";
  }
  return "Unknown";
}

Label label_from_string(const std::string& text) {
  if (text == "Real") return Label::kReal;
  if (text == "Hallucinated") return Label::kHallucinated;
  if (text == "Unknown") return Label::kUnknown;
  throw ValidationError("unknown label \"" + text + "\" (expected Real, Hallucinated, or Unknown)");
}

std::size_t SequenceBundle::patch_count() const {
  if (frames.empty() || frames.front().empty()) return 0;
  return frames.front().front().patch_embeddings.size();
}

std::size_t SequenceBundle::embedding_dim() const {
  if (frames.empty() || frames.front().empty() ||
      frames.front().front().patch_embeddings.empty()) {
    return 0;
  }
  return frames.front().front().patch_embeddings.front().dim();
}

std::vector<int> SequenceBundle::image_layer_indices() const {
  std::vector<int> out;
  if (frames.empty()) return out;
  out.reserve(frames.front().size());
  for (const LayerPatchEmbeddings& slice : frames.front()) out.push_back(slice.layer_index);
  std::sort(out.begin(), out.end());
  return out;
}

const LayerPatchEmbeddings* SequenceBundle::patch_layer(std::size_t frame,
                                                        int layer_index) const {
  if (frame >= frames.size()) return nullptr;
  for (const LayerPatchEmbeddings& slice : frames[frame]) {
    if (slice.layer_index == layer_index) return &slice;
  }
  return nullptr;
}

const LayerTokenEmbeddings* SequenceBundle::token_layer(std::size_t caption,
                                                        int layer_index) const {
  if (caption >= text_layers.size()) return nullptr;
  for (const LayerTokenEmbeddings& slice : text_layers[caption]) {
    if (slice.layer_index == layer_index) return &slice;
  }
  return nullptr;
}

void validate_caption(const CaptionRecord& caption) {
  require(!caption.caption_id.empty(), "caption with empty caption_id");
  const std::string where = "caption \"" + caption.caption_id + "\": ";
  auto check_annotations = [&](const std::vector<Annotation>& annotations,
                               const char* kind) {
    std::unordered_set<std::string> ids;
    for (const Annotation& a : annotations) {
      require(!a.id.empty(), where + std::string(kind) + " with empty id");
      require(ids.insert(a.id).second, where + "duplicate " + kind + " id \"" + a.id + "\"");
      require(a.span.start <= a.span.end,
              where + kind + " \"" + a.id + "\" has inverted span");
      require(a.span.end < caption.tokens.size(),
              where + kind + " \"" + a.id + "\" span end " + std::to_string(a.span.end) +
                  " exceeds token count " + std::to_string(caption.tokens.size()));
      require(!normalize_surface(a.surface).empty(),
              where + kind + " \"" + a.id + "\" surface is empty after normalization");
    }
  };
  check_annotations(caption.behaviors, "behavior");
  check_annotations(caption.objects, "object");
}

void validate_bundle(const SequenceBundle& bundle) {
  require(!bundle.sequence_id.empty(), "bundle with empty sequence_id");
  const std::string where = "bundle \"" + bundle.sequence_id + "\": ";
  require(!bundle.frames.empty(), where + "no frames");
  require(!bundle.captions.empty(), where + "no captions");
  require(bundle.captions.size() == bundle.text_layers.size(),
          where + "caption/token-embedding count mismatch");

  // The (sorted) image layer set, patch count and dimension must agree
  // across every frame.
  std::set<int> reference_layers;
  for (const LayerPatchEmbeddings& slice : bundle.frames.front()) {
    require(reference_layers.insert(slice.layer_index).second,
            where + "duplicate image layer " + std::to_string(slice.layer_index));
  }
  require(!reference_layers.empty(), where + "no image layers");
  const std::size_t patches = bundle.frames.front().front().patch_embeddings.size();
  require(patches > 0, where + "no patches");
  const std::size_t dim = bundle.embedding_dim();
  require(dim > 0, where + "zero-dimensional embeddings");

  for (std::size_t t = 0; t < bundle.frames.size(); ++t) {
    std::set<int> layers;
    for (const LayerPatchEmbeddings& slice : bundle.frames[t]) {
      layers.insert(slice.layer_index);
      require(slice.frame_index == static_cast<int>(t),
              where + "frame " + std::to_string(t) + " carries mislabeled frame_index");
      require(slice.patch_embeddings.size() == patches,
              where + "frame " + std::to_string(t) + " patch count mismatch");
      for (const Vec32& p : slice.patch_embeddings) {
        require(p.dim() == dim, where + "patch dimension mismatch");
      }
    }
    require(layers == reference_layers,
            where + "frame " + std::to_string(t) + " has a different layer set");
  }

  for (std::size_t i = 0; i < bundle.captions.size(); ++i) {
    validate_caption(bundle.captions[i]);
    const std::size_t tokens = bundle.captions[i].tokens.size();
    require(!bundle.text_layers[i].empty(),
            where + "caption \"" + bundle.captions[i].caption_id + "\" has no token layers");
    std::set<int> layers;
    for (const LayerTokenEmbeddings& slice : bundle.text_layers[i]) {
      require(layers.insert(slice.layer_index).second,
              where + "duplicate text layer " + std::to_string(slice.layer_index));
      require(slice.token_embeddings.size() == tokens,
              where + "caption \"" + bundle.captions[i].caption_id +
                  "\" token embedding count mismatch");
      for (const Vec32& e : slice.token_embeddings) {
        require(e.dim() == dim, where + "token dimension mismatch");
      }
    }
  }
}

}  // namespace she
