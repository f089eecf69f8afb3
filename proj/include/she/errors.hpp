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

#include <stdexcept>
#include <string>

namespace she {

// Bad inputs: schema violations, out-of-range parameters, inconsistent
// shapes, undefined metrics.  The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failures and corrupt binary files.  The CLI maps these to
// exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Distinct failure modes when decoding a tensor archive.  Every decode
// failure carries exactly one of these codes so callers (and fuzz tests)
// can tell corruption classes apart.
enum class ArchiveErrorCode {
  kBadMagic,       // leading magic bytes are not "SHE1"
  kTruncated,      // file ended inside a header field or payload
  kDuplicateName,  // two entries share a name
  kShapeMismatch,  // declared shape is absurd or disagrees with the payload
  kTrailingData,   // bytes remain after the last declared entry
};

const char* to_string(ArchiveErrorCode code);

class ArchiveError : public IoError {
 public:
  ArchiveError(ArchiveErrorCode code, const std::string& what)
      : IoError(std::string(to_string(code)) + ": " + what), code_(code) {}

  ArchiveErrorCode code() const noexcept { return code_; }

 private:
  ArchiveErrorCode code_;
};

// A metric whose denominator is empty has no value; callers decide whether
// that is fatal or rendered as a missing cell.
class UndefinedMetricError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Control sampling could not find enough distinct Real-labeled behaviors.
class ControlSampleError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace she
