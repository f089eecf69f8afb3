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

#include "she/cooccurrence.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

namespace she {

namespace {

const std::set<std::string> kEmptySet;

std::size_t intersection_size(const std::set<std::string>& a,
                              const std::set<std::string>& b) {
  std::size_t n = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++n;
      ++ia;
      ++ib;
    }
  }
  return n;
}

// Shared pair-sum kernel: hallucinated group against a reference group.
double pair_sum(const std::vector<const Annotation*>& hallucinated,
                const std::vector<const Annotation*>& reference,
                const std::map<std::string, std::set<std::string>>& hall_index,
                const std::map<std::string, std::set<std::string>>& ref_index) {
  auto captions_of = [](const std::map<std::string, std::set<std::string>>& index,
                        const std::string& surface) -> const std::set<std::string>& {
    auto it = index.find(normalize_surface(surface));
    return it == index.end() ? kEmptySet : it->second;
  };

  double total = 0.0;
  for (const Annotation* h : hallucinated) {
    const std::set<std::string>& ch = captions_of(hall_index, h->surface);
    for (const Annotation* r : reference) {
      const std::set<std::string>& cr = captions_of(ref_index, r->surface);
      const std::size_t denom = ch.size() + cr.size();
      if (denom == 0) continue;
      total += static_cast<double>(intersection_size(ch, cr)) / static_cast<double>(denom);
    }
  }
  return total;
}

std::vector<const Annotation*> with_label(const std::vector<Annotation>& annotations,
                                          Label label) {
  std::vector<const Annotation*> out;
  for (const Annotation& a : annotations) {
    if (a.label == label) out.push_back(&a);
  }
  return out;
}

}  // namespace

const std::set<std::string>& CaptionIndex::behavior_captions(
    const std::string& surface) const {
  auto it = behavior_mentions.find(normalize_surface(surface));
  return it == behavior_mentions.end() ? kEmptySet : it->second;
}

const std::set<std::string>& CaptionIndex::object_captions(
    const std::string& surface) const {
  auto it = object_mentions.find(normalize_surface(surface));
  return it == object_mentions.end() ? kEmptySet : it->second;
}

CaptionIndex build_index(const std::vector<CaptionRecord>& corpus) {
  CaptionIndex index;
  std::unordered_set<std::string> seen_ids;
  for (const CaptionRecord& caption : corpus) {
    validate_caption(caption);
    if (!seen_ids.insert(caption.caption_id).second) {
      throw ValidationError("build_index: duplicate caption_id \"" + caption.caption_id +
                            "\"");
    }
    for (const Annotation& a : caption.behaviors) {
      index.behavior_mentions[normalize_surface(a.surface)].insert(caption.caption_id);
    }
    for (const Annotation& a : caption.objects) {
      index.object_mentions[normalize_surface(a.surface)].insert(caption.caption_id);
    }
  }
  return index;
}

double cos_bh(const CaptionRecord& c, const CaptionIndex& idx) {
  return pair_sum(with_label(c.behaviors, Label::kHallucinated),
                  with_label(c.behaviors, Label::kReal), idx.behavior_mentions,
                  idx.behavior_mentions);
}

double cos_bo(const CaptionRecord& c, const CaptionIndex& idx) {
  return pair_sum(with_label(c.behaviors, Label::kHallucinated),
                  with_label(c.objects, Label::kHallucinated), idx.behavior_mentions,
                  idx.object_mentions);
}

CaptionRecord sample_control(const CaptionRecord& c,
                             const std::vector<CaptionRecord>& corpus,
                             std::uint64_t seed) {
  std::vector<Annotation*> slots;
  CaptionRecord control = c;
  for (Annotation& a : control.behaviors) {
    if (a.label == Label::kHallucinated) slots.push_back(&a);
  }
  if (slots.empty()) return control;  // nothing to resample
  control.caption_id = c.caption_id + "~control";

  // Candidate pool: distinct normalized Real-labeled behavior surfaces
  // anywhere in the corpus, minus the caption's own hallucinated surfaces.
  // Sorted so the draw does not depend on corpus order.
  std::unordered_set<std::string> excluded;
  for (const Annotation* slot : slots) excluded.insert(normalize_surface(slot->surface));
  std::set<std::string> pool;
  for (const CaptionRecord& caption : corpus) {
    for (const Annotation& a : caption.behaviors) {
      if (a.label != Label::kReal) continue;
      const std::string surface = normalize_surface(a.surface);
      if (!excluded.count(surface)) pool.insert(surface);
    }
  }
  if (pool.size() < slots.size()) {
    throw ControlSampleError(
        "sample_control: caption \"" + c.caption_id + "\" needs " +
        std::to_string(slots.size()) + " Real behavior surfaces but the corpus offers " +
        std::to_string(pool.size()));
  }

  std::vector<std::string> candidates(pool.begin(), pool.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
    slots[i]->surface = candidates[i];
    slots[i]->id += "~control";
  }
  return control;
}

std::vector<CoSReport> compute_cos_reports(const std::vector<CaptionRecord>& corpus,
                                           std::optional<std::uint64_t> control_seed) {
  const CaptionIndex index = build_index(corpus);
  std::vector<CoSReport> reports;
  reports.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const CaptionRecord& caption = corpus[i];
    CoSReport report;
    report.caption_id = caption.caption_id;
    report.cos_bh = cos_bh(caption, index);
    report.cos_bo = cos_bo(caption, index);
    report.n_h = with_label(caption.behaviors, Label::kHallucinated).size();
    report.n_r = with_label(caption.behaviors, Label::kReal).size();
    report.m = with_label(caption.objects, Label::kHallucinated).size();
    if (control_seed && report.n_h > 0) {
      try {
        const CaptionRecord control =
            sample_control(caption, corpus, mix_seed(*control_seed, i));
        report.control_cos_bh = cos_bh(control, index);
        report.control_cos_bo = cos_bo(control, index);
      } catch (const ControlSampleError&) {
        // Not enough Real candidates: leave the control columns empty.
      }
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

std::vector<std::size_t> histogram_counts(const std::vector<double>& values,
                                          double bin_width) {
  if (bin_width <= 0.0) throw ValidationError("histogram_counts: bin width must be positive");
  double max_value = 0.0;
  for (double v : values) {
    if (v < 0.0) throw ValidationError("histogram_counts: negative value");
    max_value = std::max(max_value, v);
  }
  const std::size_t bins =
      static_cast<std::size_t>(std::floor(max_value / bin_width)) + 1;
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) {
    std::size_t bin = static_cast<std::size_t>(std::floor(v / bin_width));
    if (bin >= bins) bin = bins - 1;  // v == max on the closing edge
    ++counts[bin];
  }
  return counts;
}

}  // namespace she
