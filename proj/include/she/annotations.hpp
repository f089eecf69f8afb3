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

#include "she/core.hpp"

namespace she {

// Annotations for all captions of one sequence.
struct SequenceAnnotations {
  std::string sequence_id;
  std::vector<CaptionRecord> captions;

  bool operator==(const SequenceAnnotations&) const = default;
};

// Versioned annotation document.  JSON layout:
//
//   {
//     "version": 1,
//     "sequences": [
//       {
//         "sequence_id": "s0",
//         "captions": [
//           {
//             "caption_id": "s0/c0",
//             "tokens": ["a", "person", "waves"],
//             "behaviors": [
//               {"id": "b0", "span": [2, 2], "label": "Real", "surface": "waves"}
//             ],
//             "objects": [
//               {"id": "o0", "span": [1, 1], "label": "Real", "surface": "person"}
//             ]
//           }
//         ]
//       }
//     ]
//   }
//
// Spans are inclusive token index pairs.  Caption ids must be unique across
// the whole document.  In strict mode (the default) unknown fields are
// rejected; with strict=false they are collected as warnings instead.
struct AnnotationFile {
  int version = 1;
  std::vector<SequenceAnnotations> sequences;

  // All captions flattened in document order.
  std::vector<CaptionRecord> all_captions() const;

  bool operator==(const AnnotationFile&) const = default;
};

struct AnnotationReadResult {
  AnnotationFile file;
  std::vector<std::string> warnings;  // non-empty only with strict=false
};

AnnotationReadResult read_annotations(std::istream& in, bool strict = true);
AnnotationReadResult read_annotations_file(const std::string& path, bool strict = true);

void write_annotations(const AnnotationFile& file, std::ostream& out);
void write_annotations_file(const AnnotationFile& file, const std::string& path);

}  // namespace she
