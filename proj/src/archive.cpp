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

#include "she/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_set>

namespace she {

namespace {

constexpr unsigned char kMagic[4] = {0x53, 0x48, 0x45, 0x31};  // "SHE1"

// Hard sanity cap on one payload: a declared shape whose element count
// exceeds this is reported as a shape mismatch rather than attempted.
constexpr std::uint64_t kMaxElements = 1ULL << 40;

static_assert(std::endian::native == std::endian::little,
              "serialization below assumes a little-endian host");
static_assert(sizeof(float) == 4, "payload format requires 32-bit floats");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::istream& in, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw ArchiveError(ArchiveErrorCode::kTruncated,
                       std::string("file ended inside ") + what);
  }
  return value;
}

std::uint64_t element_count(const std::vector<std::uint64_t>& shape) {
  std::uint64_t n = 1;
  for (std::uint64_t d : shape) {
    if (d != 0 && n > kMaxElements / d) return std::numeric_limits<std::uint64_t>::max();
    n *= d;
  }
  return n;
}

}  // namespace

const TensorEntry* TensorArchive::find(const std::string& name) const {
  for (const TensorEntry& entry : entries) {
    if (entry.name == name) return &entry;
  }
  return nullptr;
}

void write_archive(const TensorArchive& archive, std::ostream& out) {
  if (archive.entries.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw ArchiveError(ArchiveErrorCode::kShapeMismatch, "too many entries");
  }
  std::unordered_set<std::string> names;
  for (const TensorEntry& entry : archive.entries) {
    if (!names.insert(entry.name).second) {
      throw ArchiveError(ArchiveErrorCode::kDuplicateName,
                         "entry \"" + entry.name + "\" repeated");
    }
    if (entry.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw ArchiveError(ArchiveErrorCode::kShapeMismatch,
                         "entry name longer than 65535 bytes");
    }
    if (entry.shape.size() > std::numeric_limits<std::uint8_t>::max()) {
      throw ArchiveError(ArchiveErrorCode::kShapeMismatch,
                         "entry \"" + entry.name + "\" rank exceeds 255");
    }
    if (element_count(entry.shape) != entry.data.size()) {
      throw ArchiveError(ArchiveErrorCode::kShapeMismatch,
                         "entry \"" + entry.name + "\" shape disagrees with payload size");
    }
  }

  out.write(reinterpret_cast<const char*>(kMagic), sizeof(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(archive.entries.size()));
  for (const TensorEntry& entry : archive.entries) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(entry.name.size()));
    out.write(entry.name.data(), static_cast<std::streamsize>(entry.name.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(entry.shape.size()));
    for (std::uint64_t d : entry.shape) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(entry.data.data()),
              static_cast<std::streamsize>(entry.data.size() * sizeof(float)));
  }
  if (!out) throw IoError("archive write failed");
}

void write_archive(const TensorArchive& archive, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open \"" + path + "\" for writing");
  write_archive(archive, out);
  out.flush();
  if (!out) throw IoError("failed writing \"" + path + "\"");
}

TensorArchive read_archive(std::istream& in) {
  unsigned char magic[4] = {0, 0, 0, 0};
  in.read(reinterpret_cast<char*>(magic), sizeof(magic));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(magic))) {
    throw ArchiveError(ArchiveErrorCode::kTruncated, "file shorter than the magic header");
  }
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ArchiveError(ArchiveErrorCode::kBadMagic, "leading bytes are not \"SHE1\"");
  }

  const auto count = take<std::uint32_t>(in, "the entry count");
  TensorArchive archive;
  archive.entries.reserve(std::min<std::uint32_t>(count, 1024));
  std::unordered_set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorEntry entry;
    const auto name_len = take<std::uint16_t>(in, "a name length");
    entry.name.resize(name_len);
    in.read(entry.name.data(), name_len);
    if (in.gcount() != static_cast<std::streamsize>(name_len)) {
      throw ArchiveError(ArchiveErrorCode::kTruncated, "file ended inside an entry name");
    }
    if (!names.insert(entry.name).second) {
      throw ArchiveError(ArchiveErrorCode::kDuplicateName,
                         "entry \"" + entry.name + "\" repeated");
    }
    const auto rank = take<std::uint8_t>(in, "a rank byte");
    entry.shape.reserve(rank);
    for (std::uint8_t r = 0; r < rank; ++r) {
      entry.shape.push_back(take<std::uint64_t>(in, "a dimension"));
    }
    const std::uint64_t elements = element_count(entry.shape);
    if (elements > kMaxElements) {
      throw ArchiveError(ArchiveErrorCode::kShapeMismatch,
                         "entry \"" + entry.name + "\" declares an implausible shape");
    }
    // Chunked payload read: memory stays proportional to the bytes actually
    // present, so a shape lying about a huge payload fails as truncation
    // instead of attempting the full allocation up front.
    constexpr std::uint64_t kChunkElements = 1ULL << 20;
    entry.data.reserve(static_cast<std::size_t>(std::min(elements, kChunkElements)));
    for (std::uint64_t done = 0; done < elements;) {
      const std::uint64_t batch = std::min(elements - done, kChunkElements);
      const std::size_t old_size = entry.data.size();
      entry.data.resize(old_size + static_cast<std::size_t>(batch));
      in.read(reinterpret_cast<char*>(entry.data.data() + old_size),
              static_cast<std::streamsize>(batch * sizeof(float)));
      if (in.gcount() != static_cast<std::streamsize>(batch * sizeof(float))) {
        throw ArchiveError(ArchiveErrorCode::kTruncated,
                           "file ended inside the payload of \"" + entry.name + "\"");
      }
      done += batch;
    }
    archive.entries.push_back(std::move(entry));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ArchiveError(ArchiveErrorCode::kTrailingData,
                       "bytes remain after the last declared entry");
  }
  return archive;
}

TensorArchive read_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open \"" + path + "\" for reading");
  return read_archive(in);
}

}  // namespace she
