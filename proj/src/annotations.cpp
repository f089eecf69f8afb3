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

#include "she/annotations.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace she {

namespace {

using nlohmann::ordered_json;

// Context-carrying parse state so schema errors point at the offending node.
struct Parser {
  bool strict = true;
  std::vector<std::string>* warnings = nullptr;

  [[noreturn]] void fail(const std::string& where, const std::string& what) const {
    throw ValidationError("annotations: " + where + ": " + what);
  }

  void check_fields(const ordered_json& node, const std::string& where,
                    std::initializer_list<const char*> allowed) const {
    for (const auto& item : node.items()) {
      bool known = false;
      for (const char* name : allowed) {
        if (item.key() == name) {
          known = true;
          break;
        }
      }
      if (known) continue;
      if (strict) fail(where, "unknown field \"" + item.key() + "\"");
      warnings->push_back(where + ": ignoring unknown field \"" + item.key() + "\"");
    }
  }

  const ordered_json& field(const ordered_json& node, const std::string& where,
                            const char* name) const {
    auto it = node.find(name);
    if (it == node.end()) fail(where, std::string("missing field \"") + name + "\"");
    return *it;
  }

  Annotation annotation(const ordered_json& node, const std::string& where) const {
    if (!node.is_object()) fail(where, "expected an object");
    check_fields(node, where, {"id", "span", "label", "surface"});
    Annotation out;
    const ordered_json& id = field(node, where, "id");
    if (!id.is_string()) fail(where, "\"id\" must be a string");
    out.id = id.get<std::string>();
    const ordered_json& span = field(node, where, "span");
    if (!span.is_array() || span.size() != 2 || !span[0].is_number_unsigned() ||
        !span[1].is_number_unsigned()) {
      fail(where, "\"span\" must be a [start, end] pair of non-negative integers");
    }
    out.span.start = span[0].get<std::uint32_t>();
    out.span.end = span[1].get<std::uint32_t>();
    const ordered_json& label = field(node, where, "label");
    if (!label.is_string()) fail(where, "\"label\" must be a string");
    try {
      out.label = label_from_string(label.get<std::string>());
    } catch (const ValidationError& e) {
      fail(where, e.what());
    }
    const ordered_json& surface = field(node, where, "surface");
    if (!surface.is_string()) fail(where, "\"surface\" must be a string");
    out.surface = surface.get<std::string>();
    return out;
  }

  CaptionRecord caption(const ordered_json& node, const std::string& where) const {
    if (!node.is_object()) fail(where, "expected an object");
    check_fields(node, where, {"caption_id", "tokens", "behaviors", "objects"});
    CaptionRecord out;
    const ordered_json& id = field(node, where, "caption_id");
    if (!id.is_string()) fail(where, "\"caption_id\" must be a string");
    out.caption_id = id.get<std::string>();
    const ordered_json& tokens = field(node, where, "tokens");
    if (!tokens.is_array()) fail(where, "\"tokens\" must be an array");
    for (const ordered_json& token : tokens) {
      if (!token.is_string()) fail(where, "tokens must be strings");
      out.tokens.push_back(token.get<std::string>());
    }
    const ordered_json& behaviors = field(node, where, "behaviors");
    if (!behaviors.is_array()) fail(where, "\"behaviors\" must be an array");
    for (std::size_t i = 0; i < behaviors.size(); ++i) {
      out.behaviors.push_back(
          annotation(behaviors[i], where + ".behaviors[" + std::to_string(i) + "]"));
    }
    const ordered_json& objects = field(node, where, "objects");
    if (!objects.is_array()) fail(where, "\"objects\" must be an array");
    for (std::size_t i = 0; i < objects.size(); ++i) {
      out.objects.push_back(
          annotation(objects[i], where + ".objects[" + std::to_string(i) + "]"));
    }
    try {
      validate_caption(out);
    } catch (const ValidationError& e) {
      fail(where, e.what());
    }
    return out;
  }
};

// Line/column of a byte offset, so parse errors come with a usable hint.
std::pair<std::size_t, std::size_t> line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

ordered_json annotation_to_json(const Annotation& a) {
  return ordered_json{{"id", a.id},
                      {"span", {a.span.start, a.span.end}},
                      {"label", to_string(a.label)},
                      {"surface", a.surface}};
}

}  // namespace

std::vector<CaptionRecord> AnnotationFile::all_captions() const {
  std::vector<CaptionRecord> out;
  for (const SequenceAnnotations& seq : sequences) {
    out.insert(out.end(), seq.captions.begin(), seq.captions.end());
  }
  return out;
}

AnnotationReadResult read_annotations(std::istream& in, bool strict) {
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  ordered_json root;
  try {
    root = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, column] = line_of(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ValidationError("annotations: JSON parse error at line " + std::to_string(line) +
                          ", column " + std::to_string(column) + ": " + e.what());
  }

  AnnotationReadResult result;
  Parser parser{strict, &result.warnings};
  if (!root.is_object()) parser.fail("$", "top level must be an object");
  parser.check_fields(root, "$", {"version", "sequences"});

  const ordered_json& version = parser.field(root, "$", "version");
  if (!version.is_number_integer()) parser.fail("$", "\"version\" must be an integer");
  result.file.version = version.get<int>();
  if (result.file.version != 1) {
    parser.fail("$", "unsupported version " + std::to_string(result.file.version));
  }

  const ordered_json& sequences = parser.field(root, "$", "sequences");
  if (!sequences.is_array()) parser.fail("$", "\"sequences\" must be an array");

  std::unordered_set<std::string> sequence_ids;
  std::unordered_set<std::string> caption_ids;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const std::string where = "sequences[" + std::to_string(s) + "]";
    const ordered_json& node = sequences[s];
    if (!node.is_object()) parser.fail(where, "expected an object");
    parser.check_fields(node, where, {"sequence_id", "captions"});
    SequenceAnnotations seq;
    const ordered_json& id = parser.field(node, where, "sequence_id");
    if (!id.is_string()) parser.fail(where, "\"sequence_id\" must be a string");
    seq.sequence_id = id.get<std::string>();
    if (seq.sequence_id.empty()) parser.fail(where, "empty sequence_id");
    if (!sequence_ids.insert(seq.sequence_id).second) {
      parser.fail(where, "duplicate sequence_id \"" + seq.sequence_id + "\"");
    }
    const ordered_json& captions = parser.field(node, where, "captions");
    if (!captions.is_array()) parser.fail(where, "\"captions\" must be an array");
    for (std::size_t c = 0; c < captions.size(); ++c) {
      CaptionRecord record =
          parser.caption(captions[c], where + ".captions[" + std::to_string(c) + "]");
      if (!caption_ids.insert(record.caption_id).second) {
        parser.fail(where, "duplicate caption_id \"" + record.caption_id + "\"");
      }
      seq.captions.push_back(std::move(record));
    }
    result.file.sequences.push_back(std::move(seq));
  }
  return result;
}

AnnotationReadResult read_annotations_file(const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open \"" + path + "\" for reading");
  return read_annotations(in, strict);
}

void write_annotations(const AnnotationFile& file, std::ostream& out) {
  ordered_json root;
  root["version"] = file.version;
  root["sequences"] = ordered_json::array();
  for (const SequenceAnnotations& seq : file.sequences) {
    ordered_json seq_json;
    seq_json["sequence_id"] = seq.sequence_id;
    seq_json["captions"] = ordered_json::array();
    for (const CaptionRecord& caption : seq.captions) {
      ordered_json caption_json;
      caption_json["caption_id"] = caption.caption_id;
      caption_json["tokens"] = caption.tokens;
      caption_json["behaviors"] = ordered_json::array();
      for (const Annotation& a : caption.behaviors) {
        caption_json["behaviors"].push_back(annotation_to_json(a));
      }
      caption_json["objects"] = ordered_json::array();
      for (const Annotation& a : caption.objects) {
        caption_json["objects"].push_back(annotation_to_json(a));
      }
      seq_json["captions"].push_back(std::move(caption_json));
    }
    root["sequences"].push_back(std::move(seq_json));
  }
  out << root.dump(2) << '\n';
  if (!out) throw IoError("annotation write failed");
}

void write_annotations_file(const AnnotationFile& file, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open \"" + path + "\" for writing");
  write_annotations(file, out);
}

}  // namespace she
