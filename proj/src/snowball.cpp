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

#include "she/snowball.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <utility>

#include "she/detection.hpp"
#include "she/errors.hpp"

namespace she {

namespace {

double vector_norm(const Vec32& v) {
  double sum = 0.0;
  for (float x : v.values()) sum += static_cast<double>(x) * x;
  return std::sqrt(sum);
}

}  // namespace

void PerturbSpec::validate() const {
  if (segment_index < 1 || segment_index > kSnowballSegments) {
    throw ValidationError("snowball: segment_index " + std::to_string(segment_index) +
                          " outside [1, " + std::to_string(kSnowballSegments) + "]");
  }
  if (kind == PerturbKind::kGaussianNoise && !(std::isfinite(sigma) && sigma > 0.0)) {
    throw ValidationError("snowball: noise sigma must be finite and positive, got " +
                          std::to_string(sigma));
  }
  if (kind == PerturbKind::kOcclusion && !(fraction > 0.0 && fraction < 1.0)) {
    throw ValidationError("snowball: occlusion fraction must lie in (0, 1), got " +
                          std::to_string(fraction));
  }
}

std::vector<std::pair<std::size_t, std::size_t>> segment_sequence(std::size_t frame_count,
                                                                  int k) {
  if (k < 1) {
    throw ValidationError("snowball: segment count must be >= 1, got " + std::to_string(k));
  }
  const auto segments = static_cast<std::size_t>(k);
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  ranges.reserve(segments);
  const std::size_t base = frame_count / segments;
  const std::size_t remainder = frame_count % segments;
  std::size_t begin = 0;
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t length = base + (s < remainder ? 1 : 0);
    ranges.emplace_back(begin, begin + length);
    begin += length;
  }
  return ranges;
}

SequenceBundle perturb(const SequenceBundle& bundle, const PerturbSpec& spec) {
  spec.validate();
  validate_bundle(bundle);
  const auto ranges = segment_sequence(bundle.frame_count(), kSnowballSegments);
  const auto [begin, end] = ranges[static_cast<std::size_t>(spec.segment_index - 1)];

  SequenceBundle out = bundle;
  for (std::size_t t = begin; t < end; ++t) {
    std::mt19937_64 rng(mix_seed(spec.seed, t));
    if (spec.kind == PerturbKind::kGaussianNoise) {
      std::normal_distribution<double> noise(0.0, spec.sigma);
      for (LayerPatchEmbeddings& slice : out.frames[t]) {
        for (Vec32& patch : slice.patch_embeddings) {
          std::vector<float> values = patch.values();
          for (float& x : values) x = static_cast<float>(x + noise(rng));
          patch = Vec32(std::move(values));
        }
      }
    } else {
      const std::size_t patches = bundle.patch_count();
      const auto zeroed =
          static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(patches)));
      std::vector<std::size_t> order(patches);
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = 0; i < zeroed && patches > 0; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, patches - 1);
        std::swap(order[i], order[pick(rng)]);
      }
      const Vec32 blank = Vec32::zeros(bundle.embedding_dim());
      for (std::size_t i = 0; i < zeroed; ++i) {
        for (LayerPatchEmbeddings& slice : out.frames[t]) {
          slice.patch_embeddings[order[i]] = blank;
        }
      }
    }
  }
  return out;
}

void StubModel::validate(std::size_t expected_dim) const {
  // An empty library is legal: the stub then emits empty captions.
  if (!(carryover >= 0.0 && carryover < 1.0)) {
    throw ValidationError("stub: carryover must lie in [0, 1), got " +
                          std::to_string(carryover));
  }
  if (!std::isfinite(emission_threshold)) {
    throw ValidationError("stub: emission threshold must be finite");
  }
  std::set<std::string> seen;
  for (const auto& [surface, direction] : behavior_library) {
    const std::string normalized = normalize_surface(surface);
    if (normalized.empty()) {
      throw ValidationError("stub: behavior surface \"" + surface +
                            "\" is empty after normalization");
    }
    if (!seen.insert(normalized).second) {
      throw ValidationError("stub: duplicate behavior surface \"" + normalized + "\"");
    }
    if (direction.dim() != expected_dim) {
      throw ValidationError("stub: behavior \"" + surface + "\" has dimension " +
                            std::to_string(direction.dim()) + ", embeddings have " +
                            std::to_string(expected_dim));
    }
    if (vector_norm(direction) < 1e-12) {
      throw ValidationError("stub: behavior \"" + surface + "\" has a degenerate direction");
    }
  }
}

std::vector<CaptionRecord> stub_generate(const SequenceBundle& bundle,
                                         const StubModel& model) {
  validate_bundle(bundle);
  model.validate(bundle.embedding_dim());

  std::vector<int> emission_counts(model.behavior_library.size(), 0);
  std::vector<CaptionRecord> out;
  out.reserve(bundle.frame_count());
  for (std::size_t t = 0; t < bundle.frame_count(); ++t) {
    std::vector<std::size_t> emitted;
    for (std::size_t b = 0; b < model.behavior_library.size(); ++b) {
      const Vec32& direction = model.behavior_library[b].second;
      double best = -1.0;
      for (const LayerPatchEmbeddings& slice : bundle.frames[t]) {
        for (const Vec32& patch : slice.patch_embeddings) {
          best = std::max(best, cosine(direction, patch));
        }
      }
      const double score = best + model.carryover * emission_counts[b];
      if (score > model.emission_threshold) emitted.push_back(b);
    }

    CaptionRecord caption;
    caption.caption_id = bundle.sequence_id + ":frame" + std::to_string(t);
    for (std::size_t b : emitted) {
      const auto token = static_cast<std::uint32_t>(caption.tokens.size());
      Annotation mention;
      mention.id = "g" + std::to_string(token);
      mention.span = TokenSpan{token, token};
      mention.label = Label::kUnknown;
      mention.surface = model.behavior_library[b].first;
      caption.tokens.push_back(mention.surface);
      caption.behaviors.push_back(std::move(mention));
      emission_counts[b] += 1;
    }
    out.push_back(std::move(caption));
  }
  return out;
}

double stub_bh_rate(const std::vector<CaptionRecord>& generated,
                    const std::vector<CaptionRecord>& reference) {
  if (generated.size() != reference.size()) {
    throw ValidationError("stub: generated and reference traces differ in length (" +
                          std::to_string(generated.size()) + " vs " +
                          std::to_string(reference.size()) + ")");
  }
  if (generated.empty()) {
    throw ValidationError("stub: cannot rate an empty trace");
  }
  std::size_t hallucinating = 0;
  for (std::size_t t = 0; t < generated.size(); ++t) {
    std::set<std::string> allowed;
    for (const Annotation& mention : reference[t].behaviors) {
      allowed.insert(normalize_surface(mention.surface));
    }
    for (const Annotation& mention : generated[t].behaviors) {
      if (!allowed.count(normalize_surface(mention.surface))) {
        ++hallucinating;
        break;
      }
    }
  }
  return static_cast<double>(hallucinating) / static_cast<double>(generated.size());
}

std::vector<StageResult> run_stage_experiment(const SequenceBundle& bundle,
                                              const StubModel& model,
                                              const std::vector<PerturbSpec>& specs,
                                              int trials, std::uint64_t seed) {
  if (trials < 1) {
    throw ValidationError("snowball: trials must be >= 1, got " + std::to_string(trials));
  }
  validate_bundle(bundle);
  model.validate(bundle.embedding_dim());
  for (const PerturbSpec& spec : specs) spec.validate();

  StubModel unbiased = model;
  unbiased.carryover = 0.0;
  const std::vector<CaptionRecord> reference = stub_generate(bundle, unbiased);
  const double clean_bh = stub_bh_rate(stub_generate(bundle, model), reference);

  std::vector<StageResult> results;
  results.reserve(specs.size());
  for (std::size_t si = 0; si < specs.size(); ++si) {
    std::vector<double> deltas;
    deltas.reserve(static_cast<std::size_t>(trials));
    for (int trial = 0; trial < trials; ++trial) {
      PerturbSpec trial_spec = specs[si];
      trial_spec.seed = mix_seed(mix_seed(seed, si), static_cast<std::uint64_t>(trial));
      const SequenceBundle noisy = perturb(bundle, trial_spec);
      deltas.push_back(stub_bh_rate(stub_generate(noisy, model), reference) - clean_bh);
    }
    double mean = std::accumulate(deltas.begin(), deltas.end(), 0.0) /
                  static_cast<double>(deltas.size());
    double variance = 0.0;
    for (double d : deltas) variance += (d - mean) * (d - mean);
    const double std_dev =
        deltas.size() > 1 ? std::sqrt(variance / static_cast<double>(deltas.size() - 1)) : 0.0;
    results.push_back(StageResult{specs[si].segment_index, mean, std_dev});
  }
  return results;
}

StubModel stub_from_annotations(const SequenceBundle& bundle, int text_layer,
                                double carryover, double emission_threshold) {
  validate_bundle(bundle);
  DetectionConfig cfg;
  cfg.text_layer = text_layer;

  std::map<std::string, std::vector<Vec32>> span_means;
  for (std::size_t ci = 0; ci < bundle.captions.size(); ++ci) {
    for (const Annotation& mention : bundle.captions[ci].behaviors) {
      span_means[normalize_surface(mention.surface)].push_back(
          behavior_embedding(bundle, ci, mention, cfg));
    }
  }

  StubModel model;
  model.carryover = carryover;
  model.emission_threshold = emission_threshold;
  for (const auto& [surface, means] : span_means) {
    const Vec32 mean = mean_vectors(means);
    const double norm = vector_norm(mean);
    if (norm < 1e-12) continue;
    std::vector<float> unit(mean.dim());
    for (std::size_t i = 0; i < mean.dim(); ++i) {
      unit[i] = static_cast<float>(mean[i] / norm);
    }
    model.behavior_library.emplace_back(surface, Vec32(std::move(unit)));
  }
  if (model.behavior_library.empty()) {
    throw ValidationError("stub: bundle has no usable behavior annotations");
  }
  return model;
}

CascadeLab build_cascade_lab(const CascadeLabSpec& spec) {
  if (spec.frames < static_cast<std::size_t>(kSnowballSegments)) {
    throw ValidationError("cascade lab: need at least " +
                          std::to_string(kSnowballSegments) + " frames");
  }
  if (spec.patches < 2 || spec.layers < 1) {
    throw ValidationError("cascade lab: need at least 2 patches and 1 layer");
  }
  if (spec.lure_behaviors < 2) {
    throw ValidationError("cascade lab: need at least 2 lure behaviors");
  }
  if (spec.dim < spec.lure_behaviors + spec.grounded_behaviors + 1) {
    throw ValidationError("cascade lab: dim must exceed the behavior count");
  }
  if (!(spec.lure_leak >= 0.0 && spec.lure_leak < 1.0) ||
      !(spec.grounded_cos > 0.0 && spec.grounded_cos < 1.0) || !(spec.patch_scale > 0.0)) {
    throw ValidationError("cascade lab: lure_leak in [0,1), grounded_cos in (0,1), "
                          "patch_scale > 0 required");
  }
  const std::size_t lures = spec.lure_behaviors;
  const std::size_t half = (lures + 1) / 2;
  if (spec.lure_leak * spec.lure_leak * static_cast<double>(half) >= 1.0) {
    throw ValidationError("cascade lab: lure_leak too large for the lure group size");
  }
  if (!(spec.carryover >= 0.0 && spec.carryover < 1.0) ||
      !(spec.emission_threshold > 0.0 && spec.emission_threshold < 1.0)) {
    throw ValidationError("cascade lab: carryover in [0,1) and emission_threshold in "
                          "(0,1) required");
  }

  const std::size_t grounded = spec.grounded_behaviors;
  const std::size_t fillers = spec.dim - lures - grounded;
  auto axis = [&](std::size_t i) {
    std::vector<float> v(spec.dim, 0.0f);
    v[i] = 1.0f;
    return Vec32(std::move(v));
  };
  auto filler_axis = [&](std::size_t i) { return lures + grounded + (i % fillers); };

  // Distractor patches leak exactly lure_leak onto one half of the lure
  // group (by patch parity) and are orthogonal to everything else.
  auto distractor = [&](std::size_t patch) {
    std::vector<float> v(spec.dim, 0.0f);
    const std::size_t lo = (patch % 2 == 0) ? 0 : half;
    const std::size_t hi = (patch % 2 == 0) ? half : lures;
    for (std::size_t i = lo; i < hi; ++i) {
      v[i] = static_cast<float>(spec.lure_leak);
    }
    const double used =
        spec.lure_leak * spec.lure_leak * static_cast<double>(hi - lo);
    v[filler_axis(patch)] = static_cast<float>(std::sqrt(1.0 - used));
    for (float& x : v) x = static_cast<float>(x * spec.patch_scale);
    return Vec32(std::move(v));
  };

  // Home patches realize one grounded behavior with exact cosine.
  auto home_patch = [&](std::size_t j) {
    std::vector<float> v(spec.dim, 0.0f);
    v[lures + j] = static_cast<float>(spec.grounded_cos);
    v[filler_axis(j)] =
        static_cast<float>(std::sqrt(1.0 - spec.grounded_cos * spec.grounded_cos));
    for (float& x : v) x = static_cast<float>(x * spec.patch_scale);
    return Vec32(std::move(v));
  };

  std::map<std::size_t, std::size_t> home_of_frame;  // frame -> grounded index
  for (std::size_t j = 0; j < grounded; ++j) {
    const std::size_t frame = ((j + 1) * spec.frames) / (grounded + 1);
    if (!home_of_frame.emplace(frame, j).second) {
      throw ValidationError("cascade lab: too many grounded behaviors for the "
                            "frame count");
    }
  }

  SequenceBundle bundle;
  bundle.sequence_id = "cascade-lab";
  bundle.frames.resize(spec.frames);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    std::vector<Vec32> patches;
    patches.reserve(spec.patches);
    for (std::size_t p = 0; p < spec.patches; ++p) patches.push_back(distractor(p));
    const auto home = home_of_frame.find(t);
    if (home != home_of_frame.end()) {
      patches[home->second % spec.patches] = home_patch(home->second);
    }
    for (std::size_t layer = 0; layer < spec.layers; ++layer) {
      LayerPatchEmbeddings slice;
      slice.layer_index = static_cast<int>(layer);
      slice.frame_index = static_cast<int>(t);
      slice.patch_embeddings = patches;
      bundle.frames[t].push_back(std::move(slice));
    }
  }

  // One caption lists the whole behavior library so the bundle round-trips
  // through annotation-driven tooling: lures are labeled Hallucinated
  // (they never truly appear), homes Real.
  CaptionRecord caption;
  caption.caption_id = "cascade-lab:library";
  LayerTokenEmbeddings tokens;
  tokens.layer_index = 0;
  StubModel model;
  model.carryover = spec.carryover;
  model.emission_threshold = spec.emission_threshold;
  auto add_behavior = [&](const std::string& surface, const Vec32& direction, Label label) {
    const auto token = static_cast<std::uint32_t>(caption.tokens.size());
    Annotation mention;
    mention.id = surface;
    mention.span = TokenSpan{token, token};
    mention.label = label;
    mention.surface = surface;
    caption.tokens.push_back(surface);
    caption.behaviors.push_back(std::move(mention));
    tokens.token_embeddings.push_back(direction);
    model.behavior_library.emplace_back(surface, direction);
  };
  for (std::size_t i = 0; i < lures; ++i) {
    add_behavior("lure" + std::to_string(i), axis(i), Label::kHallucinated);
  }
  for (std::size_t j = 0; j < grounded; ++j) {
    add_behavior("act" + std::to_string(j), axis(lures + j), Label::kReal);
  }
  bundle.captions.push_back(std::move(caption));
  bundle.text_layers.push_back({std::move(tokens)});

  validate_bundle(bundle);
  return CascadeLab{std::move(bundle), std::move(model)};
}

}  // namespace she
