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

#include "she/reports.hpp"

#include <cstdio>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "she/errors.hpp"

namespace she {

namespace {

using nlohmann::ordered_json;

ordered_json optional_number(const std::optional<double>& value) {
  if (value) return *value;
  return nullptr;
}

}  // namespace

std::string format_report_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.9g", value);
  return buffer;
}

void write_detections(std::ostream& out, const std::vector<SequenceDetections>& results) {
  for (const SequenceDetections& sequence : results) {
    for (const CaptionDetections& caption : sequence.captions) {
      for (const BehaviorDetection& det : caption.detections) {
        ordered_json line{{"sequence_id", sequence.sequence_id},
                          {"caption_id", caption.caption_id},
                          {"behavior_id", det.behavior_id},
                          {"confidence", det.confidence},
                          {"entropy", det.entropy},
                          {"tau", det.tau},
                          {"verdict", to_string(det.verdict)},
                          {"per_frame_scores", det.per_frame_scores}};
        out << line.dump() << '\n';
      }
    }
  }
  if (!out) throw IoError("detections: write failed");
}

std::vector<SequenceDetections> read_detections(std::istream& in) {
  std::vector<SequenceDetections> results;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const std::string where = "detections line " + std::to_string(line_number) + ": ";
    ordered_json node;
    try {
      node = ordered_json::parse(line);
    } catch (const ordered_json::parse_error& e) {
      throw ValidationError(where + "invalid JSON: " + e.what());
    }
    if (!node.is_object()) throw ValidationError(where + "expected an object");
    for (const auto& [key, value] : node.items()) {
      if (key != "sequence_id" && key != "caption_id" && key != "behavior_id" &&
          key != "confidence" && key != "entropy" && key != "tau" && key != "verdict" &&
          key != "per_frame_scores") {
        throw ValidationError(where + "unknown field \"" + key + "\"");
      }
    }
    auto text_field = [&](const char* key) {
      if (!node.contains(key) || !node.at(key).is_string()) {
        throw ValidationError(where + "missing string field \"" + std::string(key) + "\"");
      }
      return node.at(key).get<std::string>();
    };
    auto number_field = [&](const char* key) {
      if (!node.contains(key) || !node.at(key).is_number()) {
        throw ValidationError(where + "missing numeric field \"" + std::string(key) + "\"");
      }
      return node.at(key).get<double>();
    };

    const std::string sequence_id = text_field("sequence_id");
    const std::string caption_id = text_field("caption_id");

    BehaviorDetection det;
    det.behavior_id = text_field("behavior_id");
    det.confidence = number_field("confidence");
    det.entropy = number_field("entropy");
    if (!node.contains("tau") || !node.at("tau").is_number_integer()) {
      throw ValidationError(where + "missing integer field \"tau\"");
    }
    det.tau = node.at("tau").get<int>();
    try {
      det.verdict = verdict_from_string(text_field("verdict"));
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
    if (!node.contains("per_frame_scores") || !node.at("per_frame_scores").is_array()) {
      throw ValidationError(where + "missing array field \"per_frame_scores\"");
    }
    for (const ordered_json& score : node.at("per_frame_scores")) {
      if (!score.is_number()) {
        throw ValidationError(where + "per_frame_scores entries must be numbers");
      }
      det.per_frame_scores.push_back(score.get<double>());
    }

    SequenceDetections* sequence = nullptr;
    for (SequenceDetections& existing : results) {
      if (existing.sequence_id == sequence_id) {
        sequence = &existing;
        break;
      }
    }
    if (sequence == nullptr) {
      results.push_back(SequenceDetections{sequence_id, {}});
      sequence = &results.back();
    }
    CaptionDetections* caption = nullptr;
    for (CaptionDetections& existing : sequence->captions) {
      if (existing.caption_id == caption_id) {
        caption = &existing;
        break;
      }
    }
    if (caption == nullptr) {
      sequence->captions.push_back(CaptionDetections{caption_id, {}});
      caption = &sequence->captions.back();
    }
    caption->detections.push_back(std::move(det));
  }
  return results;
}

void write_cos_csv(std::ostream& out, const std::vector<CoSReport>& reports) {
  out << "caption_id,cos_bh,cos_bo,control_cos_bh,control_cos_bo,n_h,n_r,m\n";
  for (const CoSReport& report : reports) {
    out << report.caption_id << ',' << format_report_double(report.cos_bh) << ','
        << format_report_double(report.cos_bo) << ',';
    if (report.control_cos_bh) out << format_report_double(*report.control_cos_bh);
    out << ',';
    if (report.control_cos_bo) out << format_report_double(*report.control_cos_bo);
    out << ',' << report.n_h << ',' << report.n_r << ',' << report.m << '\n';
  }
  if (!out) throw IoError("cos report: write failed");
}

void write_corrections_csv(std::ostream& out,
                           const std::vector<CorrectionRecord>& records) {
  out << "caption_id,behavior_id,alpha_used,residual_alignment,affected_count,skipped\n";
  for (const CorrectionRecord& record : records) {
    out << record.caption_id << ',' << record.behavior_id << ','
        << format_report_double(record.alpha_used) << ','
        << format_report_double(record.residual_alignment) << ','
        << record.affected.size() << ',' << (record.skipped ? "true" : "false") << '\n';
  }
  if (!out) throw IoError("corrections report: write failed");
}

void write_stage_csv(std::ostream& out, const std::vector<StageResult>& stages) {
  out << "segment,mean_delta_bh,std_delta_bh\n";
  for (const StageResult& stage : stages) {
    out << stage.segment_index << ',' << format_report_double(stage.mean_delta_bh) << ','
        << format_report_double(stage.std_delta_bh) << '\n';
  }
  if (!out) throw IoError("stage report: write failed");
}

void write_metrics_csv(std::ostream& out, const MetricSummary& summary) {
  out << "beach_i,beach_s,chair_i,chair_s,map,bh_rate,oh_rate\n";
  const std::optional<double> columns[] = {summary.beach_i, summary.beach_s,
                                           summary.chair_i, summary.chair_s, summary.map,
                                           summary.bh_rate, summary.oh_rate};
  bool first = true;
  for (const std::optional<double>& column : columns) {
    if (!first) out << ',';
    first = false;
    if (column) out << format_report_double(*column);
  }
  out << '\n';
  if (!out) throw IoError("metrics report: write failed");
}

void write_metrics_json(std::ostream& out, const MetricSummary& summary) {
  ordered_json root{{"beach_i", optional_number(summary.beach_i)},
                    {"beach_s", optional_number(summary.beach_s)},
                    {"chair_i", optional_number(summary.chair_i)},
                    {"chair_s", optional_number(summary.chair_s)},
                    {"map", optional_number(summary.map)},
                    {"bh_rate", optional_number(summary.bh_rate)},
                    {"oh_rate", optional_number(summary.oh_rate)}};
  out << root.dump(2) << '\n';
  if (!out) throw IoError("metrics report: write failed");
}

}  // namespace she
