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

#include "she/bundle_io.hpp"

#include <set>
#include <string>
#include <utility>

#include "she/errors.hpp"

namespace she {

namespace {

std::string patches_name(const std::string& sequence_id) {
  return "seq/" + sequence_id + "/patches";
}

std::string tokens_name(const std::string& sequence_id, const std::string& caption_id) {
  return "seq/" + sequence_id + "/cap/" + caption_id + "/tokens";
}

void require_contiguous_layers(int layer_index, std::size_t slot,
                               const std::string& sequence_id) {
  if (layer_index != static_cast<int>(slot)) {
    throw ValidationError("bundle io: sequence \"" + sequence_id +
                          "\" needs contiguous 0-based layer indices to be archived "
                          "(slot " +
                          std::to_string(slot) + " holds layer " +
                          std::to_string(layer_index) + ")");
  }
}

}  // namespace

TensorArchive bundles_to_archive(const std::vector<SequenceBundle>& bundles) {
  TensorArchive archive;
  std::set<std::string> seen_ids;
  for (const SequenceBundle& bundle : bundles) {
    validate_bundle(bundle);
    if (!seen_ids.insert(bundle.sequence_id).second) {
      throw ValidationError("bundle io: duplicate sequence_id \"" + bundle.sequence_id +
                            "\"");
    }
    const std::size_t frames = bundle.frame_count();
    const std::size_t layers = bundle.frames.front().size();
    const std::size_t patches = bundle.patch_count();
    const std::size_t dim = bundle.embedding_dim();

    TensorEntry entry;
    entry.name = patches_name(bundle.sequence_id);
    entry.shape = {frames, layers, patches, dim};
    entry.data.reserve(frames * layers * patches * dim);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t l = 0; l < layers; ++l) {
        require_contiguous_layers(bundle.frames[t][l].layer_index, l, bundle.sequence_id);
        for (const Vec32& patch : bundle.frames[t][l].patch_embeddings) {
          entry.data.insert(entry.data.end(), patch.values().begin(), patch.values().end());
        }
      }
    }
    archive.entries.push_back(std::move(entry));

    for (std::size_t ci = 0; ci < bundle.captions.size(); ++ci) {
      const CaptionRecord& caption = bundle.captions[ci];
      const std::size_t text_layers = bundle.text_layers[ci].size();
      const std::size_t tokens = caption.tokens.size();
      TensorEntry text;
      text.name = tokens_name(bundle.sequence_id, caption.caption_id);
      text.shape = {text_layers, tokens, dim};
      text.data.reserve(text_layers * tokens * dim);
      for (std::size_t l = 0; l < text_layers; ++l) {
        require_contiguous_layers(bundle.text_layers[ci][l].layer_index, l,
                                  bundle.sequence_id);
        for (const Vec32& token : bundle.text_layers[ci][l].token_embeddings) {
          text.data.insert(text.data.end(), token.values().begin(), token.values().end());
        }
      }
      archive.entries.push_back(std::move(text));
    }
  }
  return archive;
}

AnnotationFile bundles_to_annotations(const std::vector<SequenceBundle>& bundles) {
  AnnotationFile file;
  for (const SequenceBundle& bundle : bundles) {
    file.sequences.push_back(SequenceAnnotations{bundle.sequence_id, bundle.captions});
  }
  return file;
}

std::vector<SequenceBundle> assemble_bundles(const TensorArchive& archive,
                                             const AnnotationFile& annotations) {
  std::vector<SequenceBundle> bundles;
  bundles.reserve(annotations.sequences.size());
  for (const SequenceAnnotations& seq : annotations.sequences) {
    const TensorEntry* patches = archive.find(patches_name(seq.sequence_id));
    if (patches == nullptr) {
      throw ValidationError("bundle io: archive has no tensor \"" +
                            patches_name(seq.sequence_id) + "\"");
    }
    if (patches->shape.size() != 4) {
      throw ValidationError("bundle io: tensor \"" + patches->name + "\" must have rank 4 "
                            "[frames, layers, patches, dim], got rank " +
                            std::to_string(patches->shape.size()));
    }
    const auto frames = static_cast<std::size_t>(patches->shape[0]);
    const auto layers = static_cast<std::size_t>(patches->shape[1]);
    const auto patch_count = static_cast<std::size_t>(patches->shape[2]);
    const auto dim = static_cast<std::size_t>(patches->shape[3]);

    SequenceBundle bundle;
    bundle.sequence_id = seq.sequence_id;
    bundle.captions = seq.captions;
    bundle.frames.resize(frames);
    const float* cursor = patches->data.data();
    for (std::size_t t = 0; t < frames; ++t) {
      bundle.frames[t].reserve(layers);
      for (std::size_t l = 0; l < layers; ++l) {
        LayerPatchEmbeddings slice;
        slice.layer_index = static_cast<int>(l);
        slice.frame_index = static_cast<int>(t);
        slice.patch_embeddings.reserve(patch_count);
        for (std::size_t p = 0; p < patch_count; ++p) {
          slice.patch_embeddings.push_back(
              Vec32(std::vector<float>(cursor, cursor + dim)));
          cursor += dim;
        }
        bundle.frames[t].push_back(std::move(slice));
      }
    }

    for (const CaptionRecord& caption : seq.captions) {
      const TensorEntry* tokens =
          archive.find(tokens_name(seq.sequence_id, caption.caption_id));
      if (tokens == nullptr) {
        throw ValidationError("bundle io: archive has no tensor \"" +
                              tokens_name(seq.sequence_id, caption.caption_id) + "\"");
      }
      if (tokens->shape.size() != 3) {
        throw ValidationError("bundle io: tensor \"" + tokens->name + "\" must have rank "
                              "3 [layers, tokens, dim], got rank " +
                              std::to_string(tokens->shape.size()));
      }
      const auto text_layers = static_cast<std::size_t>(tokens->shape[0]);
      const auto token_count = static_cast<std::size_t>(tokens->shape[1]);
      const auto text_dim = static_cast<std::size_t>(tokens->shape[2]);
      if (token_count != caption.tokens.size()) {
        throw ValidationError("bundle io: tensor \"" + tokens->name + "\" holds " +
                              std::to_string(token_count) + " tokens but caption \"" +
                              caption.caption_id + "\" has " +
                              std::to_string(caption.tokens.size()));
      }
      std::vector<LayerTokenEmbeddings> slices;
      slices.reserve(text_layers);
      const float* text_cursor = tokens->data.data();
      for (std::size_t l = 0; l < text_layers; ++l) {
        LayerTokenEmbeddings slice;
        slice.layer_index = static_cast<int>(l);
        slice.token_embeddings.reserve(token_count);
        for (std::size_t tok = 0; tok < token_count; ++tok) {
          slice.token_embeddings.push_back(
              Vec32(std::vector<float>(text_cursor, text_cursor + text_dim)));
          text_cursor += text_dim;
        }
        slices.push_back(std::move(slice));
      }
      bundle.text_layers.push_back(std::move(slices));
    }

    validate_bundle(bundle);
    bundles.push_back(std::move(bundle));
  }
  return bundles;
}

}  // namespace she
