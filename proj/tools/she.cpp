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

// Command-line front end wiring the library modules into pipelines:
//
//   she synth    --spec spec.json --out-archive a.she1 --out-annotations a.json
//   she detect   --archive a.she1 --annotations a.json --out det.jsonl
//   she mitigate --archive a.she1 --annotations a.json --detections det.jsonl
//                --out-archive fixed.she1 --out-log corrections.csv
//   she eval     --annotations a.json --detections det.jsonl --out metrics.json
//   she cooccur  --annotations a.json --seed 7 --out cos.csv
//   she snowball --archive a.she1 --annotations a.json --config run.json --out stages.csv
//
// Exit codes: 0 success, 2 validation error (including bad flags), 3 I/O
// error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "she/annotations.hpp"
#include "she/archive.hpp"
#include "she/bundle_io.hpp"
#include "she/config.hpp"
#include "she/cooccurrence.hpp"
#include "she/detection.hpp"
#include "she/errors.hpp"
#include "she/metrics.hpp"
#include "she/mitigation.hpp"
#include "she/reports.hpp"
#include "she/snowball.hpp"
#include "she/synth.hpp"

namespace {

using namespace she;

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open \"" + path + "\" for writing");
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open \"" + path + "\" for reading");
  return in;
}

std::vector<SequenceBundle> load_bundles(const std::string& archive_path,
                                         const std::string& annotations_path,
                                         bool lenient) {
  const TensorArchive archive = read_archive(archive_path);
  auto annotations_in = open_input(annotations_path);
  const AnnotationReadResult annotations = read_annotations(annotations_in, !lenient);
  for (const std::string& warning : annotations.warnings) {
    std::cerr << "warning: " << warning << '\n';
  }
  return assemble_bundles(archive, annotations.file);
}

int bundle_depth(const SequenceBundle& bundle) {
  return static_cast<int>(bundle.image_layer_indices().size());
}

// Detection parameters for one bundle: depth-derived defaults overridden
// by explicit flags and the resolved gamma/theta.
DetectionConfig detection_config(const SequenceBundle& bundle, const ToolConfig& tool,
                                 const std::optional<int>& text_layer,
                                 const std::vector<int>& layers) {
  DetectionConfig cfg = DetectionConfig::defaults_for_depth(bundle_depth(bundle));
  cfg.gamma = tool.gamma;
  cfg.theta = tool.theta;
  if (text_layer) cfg.text_layer = *text_layer;
  if (!layers.empty()) cfg.layer_set = layers;
  cfg.validate();
  return cfg;
}

struct CommonOptions {
  std::optional<std::string> config_path;
  CliOverrides overrides;
};

ToolConfig resolve(const CommonOptions& options) {
  return resolve_tool_config(options.config_path, [](const char* name) {
    return std::getenv(name);
  }, options.overrides);
}

void add_config_flag(CLI::App* cmd, CommonOptions& options) {
  cmd->add_option("--config", [&options](const std::vector<std::string>& values) {
        options.config_path = values.front();
        return true;
      }, "JSON config file with alpha_base / gamma / theta defaults")
      ->type_name("FILE")
      ->expected(1);
}

void add_gamma_theta_flags(CLI::App* cmd, CommonOptions& options) {
  cmd->add_option("--gamma", [&options](const std::vector<std::string>& values) {
        options.overrides.gamma = std::stod(values.front());
        return true;
      }, "entropy-to-window scale in (0, 2]")
      ->type_name("FLOAT")
      ->expected(1)
      ->check(CLI::Number);
  cmd->add_option("--theta", [&options](const std::vector<std::string>& values) {
        options.overrides.theta = std::stod(values.front());
        return true;
      }, "verdict threshold in [0, 1]")
      ->type_name("FLOAT")
      ->expected(1)
      ->check(CLI::Number);
}

int run(int argc, char** argv) {
  CLI::App app{"behavioral-hallucination detection and mitigation toolkit"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a ground-truth-known corpus");
  std::string synth_spec_path;
  std::string synth_out_archive;
  std::string synth_out_annotations;
  synth->add_option("--spec", synth_spec_path, "JSON generator spec (defaults if omitted)")
      ->type_name("FILE");
  synth->add_option("--out-archive", synth_out_archive, "output tensor archive")
      ->type_name("FILE")
      ->required();
  synth
      ->add_option("--out-annotations", synth_out_annotations, "output annotation JSON")
      ->type_name("FILE")
      ->required();

  // ---- detect ----
  auto* detect = app.add_subcommand("detect", "score annotated behaviors against patches");
  std::string detect_archive;
  std::string detect_annotations;
  std::string detect_out;
  std::optional<int> detect_text_layer;
  std::vector<int> detect_layers;
  bool detect_lenient = false;
  CommonOptions detect_common;
  detect->add_option("--archive", detect_archive, "input tensor archive")
      ->type_name("FILE")
      ->required();
  detect->add_option("--annotations", detect_annotations, "input annotation JSON")
      ->type_name("FILE")
      ->required();
  detect->add_option("--text-layer",
                     [&detect_text_layer](const std::vector<std::string>& values) {
                       detect_text_layer = std::stoi(values.front());
                       return true;
                     },
                     "tokenizer layer for behavior embeddings (default: depth-derived)")
      ->type_name("INT")
      ->expected(1)
      ->check(CLI::Number);
  detect->add_option("--layers", detect_layers, "image layers to scan (default: depth-derived)")
      ->type_name("INT ...");
  detect->add_flag("--lenient", detect_lenient, "warn on unknown annotation fields");
  detect->add_option("--out", detect_out, "output detections JSONL")
      ->type_name("FILE")
      ->required();
  add_config_flag(detect, detect_common);
  add_gamma_theta_flags(detect, detect_common);

  // ---- mitigate ----
  auto* mitigate_cmd = app.add_subcommand("mitigate", "project hallucinated directions "
                                                      "out of patch features");
  std::string mit_archive;
  std::string mit_annotations;
  std::string mit_detections;
  std::string mit_out_archive;
  std::string mit_out_log;
  std::optional<int> mit_text_layer;
  std::vector<int> mit_layers;
  bool mit_lenient = false;
  CommonOptions mit_common;
  mitigate_cmd->add_option("--archive", mit_archive, "input tensor archive")
      ->type_name("FILE")
      ->required();
  mitigate_cmd->add_option("--annotations", mit_annotations, "input annotation JSON")
      ->type_name("FILE")
      ->required();
  mitigate_cmd
      ->add_option("--detections", mit_detections,
                   "detections JSONL whose verdicts select the corrections")
      ->type_name("FILE")
      ->required();
  mitigate_cmd->add_option("--alpha-base",
                           [&mit_common](const std::vector<std::string>& values) {
                             mit_common.overrides.alpha_base = std::stod(values.front());
                             return true;
                           },
                           "correction strength scale (default 4.5)")
      ->type_name("FLOAT")
      ->expected(1)
      ->check(CLI::Number);
  mitigate_cmd->add_option("--text-layer",
                           [&mit_text_layer](const std::vector<std::string>& values) {
                             mit_text_layer = std::stoi(values.front());
                             return true;
                           },
                           "tokenizer layer for behavior embeddings (default: depth-derived)")
      ->type_name("INT")
      ->expected(1)
      ->check(CLI::Number);
  mitigate_cmd->add_option("--layers", mit_layers,
                           "image layers to scan (default: depth-derived)")
      ->type_name("INT ...");
  mitigate_cmd->add_flag("--lenient", mit_lenient, "warn on unknown annotation fields");
  mitigate_cmd->add_option("--out-archive", mit_out_archive, "corrected tensor archive")
      ->type_name("FILE")
      ->required();
  mitigate_cmd->add_option("--out-log", mit_out_log, "corrections CSV")
      ->type_name("FILE")
      ->required();
  add_config_flag(mitigate_cmd, mit_common);
  add_gamma_theta_flags(mitigate_cmd, mit_common);

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "score annotations and detections");
  std::string eval_annotations;
  std::string eval_detections;
  std::string eval_out;
  std::string eval_out_csv;
  bool eval_lenient = false;
  eval_cmd->add_option("--annotations", eval_annotations, "input annotation JSON")
      ->type_name("FILE")
      ->required();
  eval_cmd->add_option("--detections", eval_detections, "detections JSONL")
      ->type_name("FILE")
      ->required();
  eval_cmd->add_flag("--lenient", eval_lenient, "warn on unknown annotation fields");
  eval_cmd->add_option("--out", eval_out, "output metrics JSON")
      ->type_name("FILE")
      ->required();
  eval_cmd->add_option("--out-csv", eval_out_csv, "optional one-row metrics CSV")
      ->type_name("FILE");

  // ---- cooccur ----
  auto* cooccur_cmd = app.add_subcommand("cooccur", "per-caption co-occurrence scores");
  std::string cooccur_annotations;
  std::string cooccur_out;
  std::optional<std::uint64_t> cooccur_seed;
  bool cooccur_lenient = false;
  cooccur_cmd->add_option("--annotations", cooccur_annotations, "input annotation JSON")
      ->type_name("FILE")
      ->required();
  cooccur_cmd->add_option("--seed",
                          [&cooccur_seed](const std::vector<std::string>& values) {
                            cooccur_seed = std::stoull(values.front());
                            return true;
                          },
                          "enables control sampling with this seed")
      ->type_name("UINT")
      ->expected(1)
      ->check(CLI::Number);
  cooccur_cmd->add_flag("--lenient", cooccur_lenient, "warn on unknown annotation fields");
  cooccur_cmd->add_option("--out", cooccur_out, "output CSV")
      ->type_name("FILE")
      ->required();

  // ---- snowball ----
  auto* snowball_cmd = app.add_subcommand("snowball", "staged-perturbation experiment "
                                                      "against the stub captioner");
  std::string snow_archive;
  std::string snow_annotations;
  std::string snow_config;
  std::string snow_out;
  bool snow_lenient = false;
  snowball_cmd->add_option("--archive", snow_archive, "input tensor archive")
      ->type_name("FILE")
      ->required();
  snowball_cmd->add_option("--annotations", snow_annotations, "input annotation JSON")
      ->type_name("FILE")
      ->required();
  snowball_cmd->add_option("--config", snow_config, "JSON run config (defaults if omitted)")
      ->type_name("FILE");
  snowball_cmd->add_flag("--lenient", snow_lenient, "warn on unknown annotation fields");
  snowball_cmd->add_option("--out", snow_out, "output per-stage CSV")
      ->type_name("FILE")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  if (synth->parsed()) {
    const SynthSpec spec =
        synth_spec_path.empty() ? SynthSpec{} : read_synth_spec(synth_spec_path);
    const std::vector<SequenceBundle> bundles = generate_synthetic(spec);
    write_archive(bundles_to_archive(bundles), synth_out_archive);
    write_annotations_file(bundles_to_annotations(bundles), synth_out_annotations);
    return 0;
  }

  if (detect->parsed()) {
    const ToolConfig tool = resolve(detect_common);
    const std::vector<SequenceBundle> bundles =
        load_bundles(detect_archive, detect_annotations, detect_lenient);
    std::vector<SequenceDetections> results;
    results.reserve(bundles.size());
    for (const SequenceBundle& bundle : bundles) {
      const DetectionConfig cfg =
          detection_config(bundle, tool, detect_text_layer, detect_layers);
      results.push_back(SequenceDetections{bundle.sequence_id, detect_behaviors(bundle, cfg)});
    }
    auto out = open_output(detect_out);
    write_detections(out, results);
    return 0;
  }

  if (mitigate_cmd->parsed()) {
    const ToolConfig tool = resolve(mit_common);
    const std::vector<SequenceBundle> bundles =
        load_bundles(mit_archive, mit_annotations, mit_lenient);
    auto detections_in = open_input(mit_detections);
    const std::vector<SequenceDetections> requested = read_detections(detections_in);

    std::vector<SequenceBundle> corrected;
    std::vector<CorrectionRecord> log;
    corrected.reserve(bundles.size());
    for (const SequenceBundle& bundle : bundles) {
      const DetectionConfig det_cfg =
          detection_config(bundle, tool, mit_text_layer, mit_layers);
      // Detections are recomputed from the bundle (the file does not carry
      // embeddings); the file's verdicts then decide what gets corrected.
      std::vector<CaptionDetections> detections = detect_behaviors(bundle, det_cfg);
      const SequenceDetections* overrides = nullptr;
      for (const SequenceDetections& sequence : requested) {
        if (sequence.sequence_id == bundle.sequence_id) {
          overrides = &sequence;
          break;
        }
      }
      if (overrides != nullptr) {
        for (CaptionDetections& caption : detections) {
          for (const CaptionDetections& wanted : overrides->captions) {
            if (wanted.caption_id != caption.caption_id) continue;
            for (BehaviorDetection& det : caption.detections) {
              for (const BehaviorDetection& requested_det : wanted.detections) {
                if (requested_det.behavior_id == det.behavior_id) {
                  det.verdict = requested_det.verdict;
                }
              }
            }
          }
        }
      }
      MitigationConfig cfg;
      cfg.alpha_base = tool.alpha_base;
      cfg.text_layer = det_cfg.text_layer;
      MitigationResult result = mitigate(bundle, detections, cfg, det_cfg);
      corrected.push_back(std::move(result.bundle));
      log.insert(log.end(), result.records.begin(), result.records.end());
    }
    write_archive(bundles_to_archive(corrected), mit_out_archive);
    auto log_out = open_output(mit_out_log);
    write_corrections_csv(log_out, log);
    return 0;
  }

  if (eval_cmd->parsed()) {
    auto annotations_in = open_input(eval_annotations);
    const AnnotationReadResult annotations = read_annotations(annotations_in, !eval_lenient);
    for (const std::string& warning : annotations.warnings) {
      std::cerr << "warning: " << warning << '\n';
    }
    auto detections_in = open_input(eval_detections);
    const std::vector<SequenceDetections> detections = read_detections(detections_in);

    // Ranking groups pair each sequence's detection confidences with the
    // annotated truth labels.
    std::vector<std::vector<ScoredBehavior>> groups;
    for (const SequenceAnnotations& sequence : annotations.file.sequences) {
      const SequenceDetections* found = nullptr;
      for (const SequenceDetections& candidate : detections) {
        if (candidate.sequence_id == sequence.sequence_id) {
          found = &candidate;
          break;
        }
      }
      if (found == nullptr) continue;
      std::vector<ScoredBehavior> group;
      for (const CaptionRecord& caption : sequence.captions) {
        for (const CaptionDetections& detected : found->captions) {
          if (detected.caption_id != caption.caption_id) continue;
          for (const Annotation& behavior : caption.behaviors) {
            for (const BehaviorDetection& det : detected.detections) {
              if (det.behavior_id == behavior.id) {
                group.push_back(ScoredBehavior{det.confidence, behavior.label});
              }
            }
          }
        }
      }
      if (!group.empty()) groups.push_back(std::move(group));
    }

    const MetricSummary summary =
        summarize_metrics(annotations.file.all_captions(), groups, 1.0);
    auto out = open_output(eval_out);
    write_metrics_json(out, summary);
    if (!eval_out_csv.empty()) {
      auto csv_out = open_output(eval_out_csv);
      write_metrics_csv(csv_out, summary);
    }
    return 0;
  }

  if (cooccur_cmd->parsed()) {
    auto annotations_in = open_input(cooccur_annotations);
    const AnnotationReadResult annotations =
        read_annotations(annotations_in, !cooccur_lenient);
    for (const std::string& warning : annotations.warnings) {
      std::cerr << "warning: " << warning << '\n';
    }
    const std::vector<CoSReport> reports =
        compute_cos_reports(annotations.file.all_captions(), cooccur_seed);
    auto out = open_output(cooccur_out);
    write_cos_csv(out, reports);
    return 0;
  }

  if (snowball_cmd->parsed()) {
    const std::vector<SequenceBundle> bundles =
        load_bundles(snow_archive, snow_annotations, snow_lenient);
    SnowballRunConfig config;
    if (!snow_config.empty()) config = read_snowball_config(snow_config);

    auto out = open_output(snow_out);
    out << "sequence_id,segment,mean_delta_bh,std_delta_bh\n";
    for (std::size_t i = 0; i < bundles.size(); ++i) {
      const SequenceBundle& bundle = bundles[i];
      const int text_layer =
          config.text_layer
              ? *config.text_layer
              : DetectionConfig::defaults_for_depth(bundle_depth(bundle)).text_layer;
      const StubModel model = stub_from_annotations(bundle, text_layer, config.carryover,
                                                    config.emission_threshold);
      const std::vector<StageResult> stages = run_stage_experiment(
          bundle, model, config.stage_specs(), config.trials, mix_seed(config.seed, i));
      for (const StageResult& stage : stages) {
        out << bundle.sequence_id << ',' << stage.segment_index << ','
            << format_report_double(stage.mean_delta_bh) << ','
            << format_report_double(stage.std_delta_bh) << '\n';
      }
    }
    if (!out) throw IoError("stage report: write failed");
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
