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

#include <iosfwd>
#include <string>
#include <vector>

#include "she/cooccurrence.hpp"
#include "she/detection.hpp"
#include "she/metrics.hpp"
#include "she/mitigation.hpp"
#include "she/snowball.hpp"

namespace she {

// Detection results for one sequence.
struct SequenceDetections {
  std::string sequence_id;
  std::vector<CaptionDetections> captions;
};

// JSON-lines interchange: one object per behavior, keys sequence_id,
// caption_id, behavior_id, confidence, entropy, tau, verdict,
// per_frame_scores.  Doubles survive the round-trip exactly; the
// span-averaged behavior embedding is recomputable from the bundle and is
// not serialized.
void write_detections(std::ostream& out, const std::vector<SequenceDetections>& results);
std::vector<SequenceDetections> read_detections(std::istream& in);

// CSV reports.  Numeric cells use "%.9g"; optional cells are left empty.
void write_cos_csv(std::ostream& out, const std::vector<CoSReport>& reports);
void write_corrections_csv(std::ostream& out, const std::vector<CorrectionRecord>& records);
void write_stage_csv(std::ostream& out, const std::vector<StageResult>& stages);
void write_metrics_csv(std::ostream& out, const MetricSummary& summary);

// JSON object with a fixed key order; undefined metrics serialize as null.
void write_metrics_json(std::ostream& out, const MetricSummary& summary);

// "%.9g" rendering shared by the CSV writers.
std::string format_report_double(double value);

}  // namespace she
