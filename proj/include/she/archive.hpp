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

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "she/errors.hpp"

namespace she {

// On-disk tensor container, little-endian throughout:
//
//   offset 0   magic bytes 0x53 0x48 0x45 0x31 ("SHE1")
//   offset 4   u32 entry count
//   entries    repeated:
//                u16   name length
//                ...   name bytes (UTF-8, no terminator)
//                u8    rank
//                u64   dims[rank]
//                f32   payload, row-major, product(dims) values
//
// An empty archive is exactly 8 bytes.  Nothing is aligned or padded, so
// identical archives serialize to identical bytes.
struct TensorEntry {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<float> data;  // row-major, size == product(shape)

  bool operator==(const TensorEntry&) const = default;
};

struct TensorArchive {
  std::vector<TensorEntry> entries;

  const TensorEntry* find(const std::string& name) const;

  bool operator==(const TensorArchive&) const = default;
};

// Serialization.  Writing validates entry consistency (unique names, shape
// product matching the payload size) and throws ArchiveError on violation.
void write_archive(const TensorArchive& archive, std::ostream& out);
void write_archive(const TensorArchive& archive, const std::string& path);

// Deserialization.  Corrupt input throws ArchiveError carrying one of the
// ArchiveErrorCode values; no input may crash the decoder.
TensorArchive read_archive(std::istream& in);
TensorArchive read_archive(const std::string& path);

}  // namespace she
