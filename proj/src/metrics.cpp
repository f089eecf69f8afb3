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

#include "she/metrics.hpp"

#include <algorithm>

namespace she {

namespace {

bool any_hallucinated(const std::vector<Annotation>& annotations) {
  return std::any_of(annotations.begin(), annotations.end(),
                     [](const Annotation& a) { return a.label == Label::kHallucinated; });
}

// Average precision with the positive class ranked by ascending confidence:
// mean of precision-at-k over the positive hits.  Ties keep input order.
std::optional<double> average_precision(std::vector<ScoredBehavior> group) {
  std::erase_if(group, [](const ScoredBehavior& s) { return s.truth == Label::kUnknown; });
  std::stable_sort(group.begin(), group.end(),
                   [](const ScoredBehavior& a, const ScoredBehavior& b) {
                     return a.confidence < b.confidence;
                   });
  std::size_t positives = 0;
  double sum = 0.0;
  for (std::size_t rank = 0; rank < group.size(); ++rank) {
    if (group[rank].truth != Label::kHallucinated) continue;
    ++positives;
    sum += static_cast<double>(positives) / static_cast<double>(rank + 1);
  }
  if (positives == 0) return std::nullopt;
  return sum / static_cast<double>(positives);
}

}  // namespace

double beach_i(const std::vector<CaptionRecord>& corpus) {
  std::size_t total = 0, hallucinated = 0;
  for (const CaptionRecord& caption : corpus) {
    for (const Annotation& a : caption.behaviors) {
      ++total;
      if (a.label == Label::kHallucinated) ++hallucinated;
    }
  }
  if (total == 0) {
    throw UndefinedMetricError("beach_i: corpus has no behavior annotations");
  }
  return static_cast<double>(hallucinated) / static_cast<double>(total);
}

double beach_s(const std::vector<CaptionRecord>& corpus, double scale) {
  if (corpus.empty()) throw UndefinedMetricError("beach_s: empty corpus");
  std::size_t flagged = 0;
  for (const CaptionRecord& caption : corpus) {
    if (any_hallucinated(caption.behaviors)) ++flagged;
  }
  return scale * static_cast<double>(flagged) / static_cast<double>(corpus.size());
}

double chair_i(const std::vector<CaptionRecord>& corpus) {
  std::size_t total = 0, hallucinated = 0;
  for (const CaptionRecord& caption : corpus) {
    for (const Annotation& a : caption.objects) {
      ++total;
      if (a.label == Label::kHallucinated) ++hallucinated;
    }
  }
  if (total == 0) {
    throw UndefinedMetricError("chair_i: corpus has no object annotations");
  }
  return static_cast<double>(hallucinated) / static_cast<double>(total);
}

double chair_s(const std::vector<CaptionRecord>& corpus) {
  if (corpus.empty()) throw UndefinedMetricError("chair_s: empty corpus");
  std::size_t flagged = 0;
  for (const CaptionRecord& caption : corpus) {
    if (any_hallucinated(caption.objects)) ++flagged;
  }
  return static_cast<double>(flagged) / static_cast<double>(corpus.size());
}

double mean_average_precision(const std::vector<std::vector<ScoredBehavior>>& groups) {
  double sum = 0.0;
  std::size_t counted = 0;
  for (const std::vector<ScoredBehavior>& group : groups) {
    const std::optional<double> ap = average_precision(group);
    if (!ap) continue;  // no positives in this sequence
    sum += *ap;
    ++counted;
  }
  if (counted == 0) {
    throw UndefinedMetricError(
        "mean_average_precision: no sequence contains a hallucinated behavior");
  }
  return sum / static_cast<double>(counted);
}

std::pair<double, double> hallucination_rates(
    const std::vector<std::pair<bool, bool>>& responses) {
  if (responses.empty()) {
    throw UndefinedMetricError("hallucination_rates: no responses");
  }
  std::size_t bh = 0, oh = 0;
  for (const auto& [has_bh, has_oh] : responses) {
    if (has_bh) ++bh;
    if (has_oh) ++oh;
  }
  const double n = static_cast<double>(responses.size());
  return {static_cast<double>(bh) / n, static_cast<double>(oh) / n};
}

double beach_i_from_verdicts(const std::vector<CaptionDetections>& detections) {
  std::size_t total = 0, flagged = 0;
  for (const CaptionDetections& caption : detections) {
    for (const BehaviorDetection& det : caption.detections) {
      ++total;
      if (det.verdict == Verdict::kHallucinated) ++flagged;
    }
  }
  if (total == 0) {
    throw UndefinedMetricError("beach_i_from_verdicts: no detections");
  }
  return static_cast<double>(flagged) / static_cast<double>(total);
}

MetricSummary summarize_metrics(const std::vector<CaptionRecord>& corpus,
                                const std::vector<std::vector<ScoredBehavior>>& map_groups,
                                double beach_s_scale) {
  MetricSummary summary;
  auto try_metric = [](std::optional<double>& slot, auto&& compute) {
    try {
      slot = compute();
    } catch (const UndefinedMetricError&) {
      slot.reset();
    }
  };
  try_metric(summary.beach_s, [&] { return beach_s(corpus, beach_s_scale); });
  try_metric(summary.beach_i, [&] { return beach_i(corpus); });
  try_metric(summary.chair_s, [&] { return chair_s(corpus); });
  try_metric(summary.chair_i, [&] { return chair_i(corpus); });
  if (!map_groups.empty()) {
    try_metric(summary.map, [&] { return mean_average_precision(map_groups); });
  }
  if (!corpus.empty()) {
    std::vector<std::pair<bool, bool>> responses;
    responses.reserve(corpus.size());
    for (const CaptionRecord& caption : corpus) {
      responses.emplace_back(any_hallucinated(caption.behaviors),
                             any_hallucinated(caption.objects));
    }
    const auto [bh, oh] = hallucination_rates(responses);
    summary.bh_rate = bh;
    summary.oh_rate = oh;
  }
  return summary;
}

}  // namespace she
