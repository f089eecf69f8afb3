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

#include "she/synth.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <utility>

#include "json.hpp"
#include "she/detection.hpp"
#include "she/errors.hpp"

namespace she {

namespace {

using nlohmann::ordered_json;

constexpr std::array<const char*, 20> kBehaviorWords = {
    "walking",  "running",  "jumping",  "sitting",   "standing",
    "waving",   "eating",   "drinking", "climbing",  "pointing",
    "reading",  "writing",  "dancing",  "kneeling",  "stretching",
    "throwing", "catching", "pushing",  "pulling",   "bowing"};

constexpr std::array<const char*, 20> kObjectWords = {
    "cup",    "book",  "chair", "table",  "ball",   "bag",    "phone",
    "bottle", "hat",   "door",  "window", "lamp",   "plate",  "spoon",
    "camera", "towel", "shoe",  "clock",  "basket", "pen"};

double dot(const Vec32& a, const Vec32& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    sum += static_cast<double>(a[i]) * b[i];
  }
  return sum;
}

Vec32 gaussian_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<float> v(dim);
  for (float& x : v) x = static_cast<float>(normal(rng));
  return Vec32(std::move(v));
}

// Removes the components of `v` along each (unit) direction, then scales
// the remainder to unit length.  Returns false when the remainder is
// degenerate and the caller should redraw.
bool orthonormalize_against(Vec32& v, const std::vector<Vec32>& directions) {
  std::vector<double> out(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) out[i] = v[i];
  for (const Vec32& d : directions) {
    const double coeff = dot(v, d);
    for (std::size_t i = 0; i < v.dim(); ++i) out[i] -= coeff * d[i];
  }
  double norm = 0.0;
  for (double x : out) norm += x * x;
  norm = std::sqrt(norm);
  if (norm < 1e-6) return false;
  std::vector<float> unit(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) {
    unit[i] = static_cast<float>(out[i] / norm);
  }
  v = Vec32(std::move(unit));
  return true;
}

// `count` orthonormal random directions in `dim` dimensions.
std::vector<Vec32> orthonormal_directions(std::mt19937_64& rng, std::size_t count,
                                          std::size_t dim) {
  std::vector<Vec32> directions;
  directions.reserve(count);
  while (directions.size() < count) {
    Vec32 candidate = gaussian_vector(rng, dim);
    if (orthonormalize_against(candidate, directions)) {
      directions.push_back(std::move(candidate));
    }
  }
  return directions;
}

// Random unit vector in the orthogonal complement of `directions`.
Vec32 complement_unit(std::mt19937_64& rng, std::size_t dim,
                      const std::vector<Vec32>& directions) {
  for (;;) {
    Vec32 candidate = gaussian_vector(rng, dim);
    if (orthonormalize_against(candidate, directions)) return candidate;
  }
}

Vec32 scaled(const Vec32& unit, double scale) {
  std::vector<float> v(unit.dim());
  for (std::size_t i = 0; i < unit.dim(); ++i) {
    v[i] = static_cast<float>(unit[i] * scale);
  }
  return Vec32(std::move(v));
}

// unit vector at exact cosine `target` to `direction`, mixed with `filler`
// (both unit, mutually orthogonal).
Vec32 planted_mix(const Vec32& direction, const Vec32& filler, double target) {
  std::vector<float> v(direction.dim());
  const double rest = std::sqrt(1.0 - target * target);
  for (std::size_t i = 0; i < direction.dim(); ++i) {
    v[i] = static_cast<float>(target * direction[i] + rest * filler[i]);
  }
  return Vec32(std::move(v));
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

}  // namespace

void SynthSpec::validate() const {
  require(sequences > 0 && frames > 0 && patches > 0 && layers > 0 && dim > 0,
          "synth: sequences, frames, patches, layers and dim must be positive");
  require(std::isfinite(planted_grounded_cos) && planted_grounded_cos >= 0.0 &&
              planted_grounded_cos <= 1.0,
          "synth: planted_grounded_cos must lie in [0, 1]");
  require(std::isfinite(planted_hallucinated_cos) && planted_hallucinated_cos >= 0.0 &&
              planted_hallucinated_cos <= 1.0,
          "synth: planted_hallucinated_cos must lie in [0, 1]");
  require(planted_hallucinated_cos < planted_grounded_cos,
          "synth: planted_hallucinated_cos must be below planted_grounded_cos");
  const std::size_t behaviors = grounded_behaviors + hallucinated_behaviors;
  require(behaviors > 0, "synth: need at least one behavior per sequence");
  require(behaviors <= kBehaviorWords.size(),
          "synth: at most " + std::to_string(kBehaviorWords.size()) +
              " behaviors per sequence");
  require(grounded_objects + hallucinated_objects <= kObjectWords.size(),
          "synth: at most " + std::to_string(kObjectWords.size()) +
              " objects per sequence");
  require(behaviors <= patches,
          "synth: behaviors per sequence must not exceed the patch count");
  require(behaviors + 2 <= dim,
          "synth: dim must exceed the behavior count by at least 2");
}

SynthSpec read_synth_spec(std::istream& in) {
  ordered_json root;
  try {
    root = ordered_json::parse(in);
  } catch (const ordered_json::parse_error& e) {
    throw ValidationError(std::string("synth spec: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ValidationError("synth spec: top level must be an object");

  SynthSpec spec;
  auto take_size = [&](const char* key, std::size_t& field) {
    if (!root.contains(key)) return;
    const ordered_json& v = root.at(key);
    if (!v.is_number_unsigned()) {
      throw ValidationError(std::string("synth spec: \"") + key +
                            "\" must be a non-negative integer");
    }
    field = v.get<std::size_t>();
  };
  auto take_double = [&](const char* key, double& field) {
    if (!root.contains(key)) return;
    const ordered_json& v = root.at(key);
    if (!v.is_number()) {
      throw ValidationError(std::string("synth spec: \"") + key + "\" must be a number");
    }
    field = v.get<double>();
  };
  take_size("sequences", spec.sequences);
  take_size("frames", spec.frames);
  take_size("patches", spec.patches);
  take_size("layers", spec.layers);
  take_size("dim", spec.dim);
  take_size("grounded_behaviors", spec.grounded_behaviors);
  take_size("hallucinated_behaviors", spec.hallucinated_behaviors);
  take_size("grounded_objects", spec.grounded_objects);
  take_size("hallucinated_objects", spec.hallucinated_objects);
  take_double("planted_grounded_cos", spec.planted_grounded_cos);
  take_double("planted_hallucinated_cos", spec.planted_hallucinated_cos);
  if (root.contains("seed")) {
    const ordered_json& v = root.at("seed");
    if (!v.is_number_unsigned()) {
      throw ValidationError("synth spec: \"seed\" must be a non-negative integer");
    }
    spec.seed = v.get<std::uint64_t>();
  }
  static const std::array<const char*, 12> kKnown = {
      "sequences",          "frames",
      "patches",            "layers",
      "dim",                "grounded_behaviors",
      "hallucinated_behaviors", "grounded_objects",
      "hallucinated_objects",   "planted_grounded_cos",
      "planted_hallucinated_cos", "seed"};
  for (const auto& [key, value] : root.items()) {
    bool known = false;
    for (const char* k : kKnown) known = known || key == k;
    if (!known) throw ValidationError("synth spec: unknown field \"" + key + "\"");
  }
  spec.validate();
  return spec;
}

SynthSpec read_synth_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("synth spec: cannot open \"" + path + "\"");
  return read_synth_spec(in);
}

std::vector<SequenceBundle> generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  const std::size_t behaviors = spec.grounded_behaviors + spec.hallucinated_behaviors;
  const int planted_layer =
      DetectionConfig::defaults_for_depth(static_cast<int>(spec.layers)).layer_set.front();
  const double grounded_target = 0.5 * (spec.planted_grounded_cos + 1.0);
  const double hallucinated_target = 0.9 * spec.planted_hallucinated_cos;

  std::vector<SequenceBundle> bundles;
  bundles.reserve(spec.sequences);
  for (std::size_t s = 0; s < spec.sequences; ++s) {
    std::mt19937_64 rng(mix_seed(spec.seed, s));
    std::uniform_real_distribution<double> patch_scale(0.5, 2.0);
    const std::vector<Vec32> directions = orthonormal_directions(rng, behaviors, spec.dim);

    char sid[32];
    std::snprintf(sid, sizeof sid, "synth-%03zu", s);

    SequenceBundle bundle;
    bundle.sequence_id = sid;
    bundle.frames.resize(spec.frames);

    // Background first: every slot starts as a scaled direction from the
    // orthogonal complement, so it scores exactly 0 against every behavior.
    for (std::size_t t = 0; t < spec.frames; ++t) {
      for (std::size_t layer = 0; layer < spec.layers; ++layer) {
        LayerPatchEmbeddings slice;
        slice.layer_index = static_cast<int>(layer);
        slice.frame_index = static_cast<int>(t);
        slice.patch_embeddings.reserve(spec.patches);
        for (std::size_t p = 0; p < spec.patches; ++p) {
          slice.patch_embeddings.push_back(
              scaled(complement_unit(rng, spec.dim, directions), patch_scale(rng)));
        }
        bundle.frames[t].push_back(std::move(slice));
      }
    }

    // Planted evidence: behavior i owns patch slot i at a known frame and
    // the first scanned layer.
    for (std::size_t i = 0; i < behaviors; ++i) {
      const bool grounded = i < spec.grounded_behaviors;
      const double target = grounded ? grounded_target : hallucinated_target;
      const std::size_t frame = i % spec.frames;
      const Vec32 filler = complement_unit(rng, spec.dim, directions);
      Vec32 planted = planted_mix(directions[i], filler, target);
      for (LayerPatchEmbeddings& slice : bundle.frames[frame]) {
        if (slice.layer_index == planted_layer) {
          slice.patch_embeddings[i] = scaled(planted, patch_scale(rng));
        }
      }
    }

    // One caption: a token per behavior mention, then per object mention.
    CaptionRecord caption;
    caption.caption_id = bundle.sequence_id + ":c0";
    std::vector<Vec32> token_embeddings;
    for (std::size_t i = 0; i < behaviors; ++i) {
      const auto token = static_cast<std::uint32_t>(caption.tokens.size());
      Annotation mention;
      mention.id = "b" + std::to_string(i);
      mention.span = TokenSpan{token, token};
      mention.label = i < spec.grounded_behaviors ? Label::kReal : Label::kHallucinated;
      mention.surface = kBehaviorWords[(s + i) % kBehaviorWords.size()];
      caption.tokens.push_back(mention.surface);
      caption.behaviors.push_back(std::move(mention));
      token_embeddings.push_back(directions[i]);
    }
    const std::size_t objects = spec.grounded_objects + spec.hallucinated_objects;
    for (std::size_t k = 0; k < objects; ++k) {
      const auto token = static_cast<std::uint32_t>(caption.tokens.size());
      Annotation mention;
      mention.id = "o" + std::to_string(k);
      mention.span = TokenSpan{token, token};
      mention.label = k < spec.grounded_objects ? Label::kReal : Label::kHallucinated;
      mention.surface = kObjectWords[(s + k) % kObjectWords.size()];
      caption.tokens.push_back(mention.surface);
      caption.objects.push_back(std::move(mention));
      token_embeddings.push_back(complement_unit(rng, spec.dim, directions));
    }

    std::vector<LayerTokenEmbeddings> text;
    text.reserve(spec.layers);
    for (std::size_t layer = 0; layer < spec.layers; ++layer) {
      text.push_back(LayerTokenEmbeddings{static_cast<int>(layer), token_embeddings});
    }
    bundle.captions.push_back(std::move(caption));
    bundle.text_layers.push_back(std::move(text));

    validate_bundle(bundle);
    bundles.push_back(std::move(bundle));
  }
  return bundles;
}

void ContaminationSpec::validate() const {
  require(sequences > 0 && frames > 0 && layers > 0,
          "contamination: sequences, frames and layers must be positive");
  require(contaminated_grounded > 0, "contamination: need at least one grounded behavior");
  require(patches > contaminated_grounded,
          "contamination: need more patches than contaminated behaviors");
  require(1 + contaminated_grounded <= kBehaviorWords.size(),
          "contamination: behavior vocabulary exhausted");
  require(dim >= contaminated_grounded + 3,
          "contamination: dim too small for the behavior subspace");
  require(grounded_evidence_cos > 0.0 && hallucinated_evidence_cos > 0.0 &&
              grounded_evidence_cos * grounded_evidence_cos +
                      hallucinated_evidence_cos * hallucinated_evidence_cos <
                  1.0,
          "contamination: evidence cosines must be positive with squares summing "
          "below 1");
}

std::vector<SequenceBundle> generate_contaminated_corpus(const ContaminationSpec& spec) {
  spec.validate();
  const int planted_layer =
      DetectionConfig::defaults_for_depth(static_cast<int>(spec.layers)).layer_set.front();
  const std::size_t center_frame = spec.frames / 2;

  std::vector<SequenceBundle> bundles;
  bundles.reserve(spec.sequences);
  for (std::size_t s = 0; s < spec.sequences; ++s) {
    std::mt19937_64 rng(mix_seed(spec.seed, s));
    std::uniform_real_distribution<double> patch_scale(0.5, 2.0);
    // Direction 0 is the hallucinated behavior; the rest are grounded.
    const std::vector<Vec32> directions =
        orthonormal_directions(rng, 1 + spec.contaminated_grounded, spec.dim);

    char sid[32];
    std::snprintf(sid, sizeof sid, "contam-%03zu", s);

    SequenceBundle bundle;
    bundle.sequence_id = sid;
    bundle.frames.resize(spec.frames);
    for (std::size_t t = 0; t < spec.frames; ++t) {
      for (std::size_t layer = 0; layer < spec.layers; ++layer) {
        LayerPatchEmbeddings slice;
        slice.layer_index = static_cast<int>(layer);
        slice.frame_index = static_cast<int>(t);
        slice.patch_embeddings.reserve(spec.patches);
        for (std::size_t p = 0; p < spec.patches; ++p) {
          slice.patch_embeddings.push_back(
              scaled(complement_unit(rng, spec.dim, directions), patch_scale(rng)));
        }
        bundle.frames[t].push_back(std::move(slice));
      }
    }

    // Each contaminated patch mixes one grounded direction with the
    // hallucinated one; together they are the only support either gets.
    const double a = spec.grounded_evidence_cos;
    const double b = spec.hallucinated_evidence_cos;
    const double rest = std::sqrt(1.0 - a * a - b * b);
    for (std::size_t g = 0; g < spec.contaminated_grounded; ++g) {
      const Vec32& grounded_dir = directions[1 + g];
      const Vec32& hallucinated_dir = directions[0];
      const Vec32 filler = complement_unit(rng, spec.dim, directions);
      std::vector<float> v(spec.dim);
      for (std::size_t i = 0; i < spec.dim; ++i) {
        v[i] = static_cast<float>(a * grounded_dir[i] + b * hallucinated_dir[i] +
                                  rest * filler[i]);
      }
      const Vec32 contaminated(std::move(v));
      for (LayerPatchEmbeddings& slice : bundle.frames[center_frame]) {
        if (slice.layer_index == planted_layer) {
          slice.patch_embeddings[g] = contaminated;
        }
      }
    }

    CaptionRecord caption;
    caption.caption_id = bundle.sequence_id + ":c0";
    std::vector<Vec32> token_embeddings;
    auto add_behavior = [&](std::size_t direction_index, Label label,
                            const std::string& surface) {
      const auto token = static_cast<std::uint32_t>(caption.tokens.size());
      Annotation mention;
      mention.id = "b" + std::to_string(direction_index);
      mention.span = TokenSpan{token, token};
      mention.label = label;
      mention.surface = surface;
      caption.tokens.push_back(surface);
      caption.behaviors.push_back(std::move(mention));
      token_embeddings.push_back(directions[direction_index]);
    };
    add_behavior(0, Label::kHallucinated, kBehaviorWords[s % kBehaviorWords.size()]);
    for (std::size_t g = 0; g < spec.contaminated_grounded; ++g) {
      add_behavior(1 + g, Label::kReal,
                   kBehaviorWords[(s + 1 + g) % kBehaviorWords.size()]);
    }

    std::vector<LayerTokenEmbeddings> text;
    text.reserve(spec.layers);
    for (std::size_t layer = 0; layer < spec.layers; ++layer) {
      text.push_back(LayerTokenEmbeddings{static_cast<int>(layer), token_embeddings});
    }
    bundle.captions.push_back(std::move(caption));
    bundle.text_layers.push_back(std::move(text));

    validate_bundle(bundle);
    bundles.push_back(std::move(bundle));
  }
  return bundles;
}

}  // namespace she
