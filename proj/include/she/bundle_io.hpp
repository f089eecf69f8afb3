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

#include <vector>

#include "she/annotations.hpp"
#include "she/archive.hpp"
#include "she/core.hpp"

namespace she {

// Tensor naming inside archives:
//
//   seq/<sequence_id>/patches              [frames, layers, patches, dim]
//   seq/<sequence_id>/cap/<caption_id>/tokens   [layers, tokens, dim]
//
// Layer slot l maps to layer_index l, so exported bundles must use
// contiguous 0-based layer indices on both the image and text side.

// Packs bundles into one archive, sequences and captions in input order.
TensorArchive bundles_to_archive(const std::vector<SequenceBundle>& bundles);

// Extracts the annotation view (ids, tokens, mention records) of bundles.
AnnotationFile bundles_to_annotations(const std::vector<SequenceBundle>& bundles);

// Joins annotations with their embedding tensors into validated bundles,
// in annotation-file order.  Archive entries that no sequence references
// are ignored; a missing or mis-shaped tensor is a validation error.
std::vector<SequenceBundle> assemble_bundles(const TensorArchive& archive,
                                             const AnnotationFile& annotations);

}  // namespace she
