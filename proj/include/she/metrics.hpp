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

#include <optional>
#include <utility>
#include <vector>

#include "she/core.hpp"
#include "she/detection.hpp"

namespace she {

// Instance-level behavior hallucination: hallucinated behavior annotations
// over all behavior annotations.  Undefined (throws UndefinedMetricError)
// when the corpus has no behavior annotations.
double beach_i(const std::vector<CaptionRecord>& corpus);

// Sentence-level: captions containing at least one hallucinated behavior
// over all captions, times an optional scale (default 1).  Undefined on an
// empty corpus.
double beach_s(const std::vector<CaptionRecord>& corpus, double scale = 1.0);

// Object-mention counterparts with the same conventions.
double chair_i(const std::vector<CaptionRecord>& corpus);
double chair_s(const std::vector<CaptionRecord>& corpus);

// One behavior's ranking inputs: detector confidence plus ground truth.
struct ScoredBehavior {
  double confidence = 0.0;
  Label truth = Label::kUnknown;
};

// Mean average precision of hallucination retrieval.  Within each sequence
// group, behaviors are ranked by ascending confidence (least visual support
// first) and scored against Hallucinated as the positive class; Unknown
// labels are left out of the ranking.  Groups without positives are
// skipped; if every group is skipped the metric is undefined.
double mean_average_precision(const std::vector<std::vector<ScoredBehavior>>& groups);

// Response-level hallucination rates: fraction of responses containing a
// behavioral hallucination and fraction containing an object hallucination.
// Undefined on an empty list.
std::pair<double, double> hallucination_rates(
    const std::vector<std::pair<bool, bool>>& responses);

// Share of detector verdicts that flag a behavior, over every detection:
// the detector's own estimate of instance-level behavior hallucination.
// Undefined when there are no detections.
double beach_i_from_verdicts(const std::vector<CaptionDetections>& detections);

// Bundle of corpus metrics; absent values mean the metric was undefined on
// the given inputs (e.g. no object annotations).
struct MetricSummary {
  std::optional<double> beach_s;
  std::optional<double> beach_i;
  std::optional<double> chair_s;
  std::optional<double> chair_i;
  std::optional<double> map;
  std::optional<double> bh_rate;
  std::optional<double> oh_rate;
};

// Summary over annotated captions; mAP groups are supplied by the caller
// (typically one group per sequence), or empty to leave mAP unset.
MetricSummary summarize_metrics(const std::vector<CaptionRecord>& corpus,
                                const std::vector<std::vector<ScoredBehavior>>& map_groups,
                                double beach_s_scale = 1.0);

}  // namespace she
