// Copyright 2026 The topoprobe authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace topoprobe {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments to an operation (empty sample, alpha out of range, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// A device spec violated its invariants; carries one message per violation.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "device spec validation failed:";
    for (const auto& s : v) out += "\n  - " + s;
    return out;
  }
  std::vector<std::string> violations_;
};

// The backend cannot perform the requested measurement (missing peak
// bandwidth, no paired-actor support, ...).
class UnsupportedMeasurementError : public Error {
 public:
  using Error::Error;
};

// The doubling search hit its cap without seeing misses. Carries the
// scanned range so callers can retry with a larger cap.
class UnboundedSearchError : public Error {
 public:
  UnboundedSearchError(std::uint64_t lo, std::uint64_t hi)
      : Error("no misses observed while doubling from " + std::to_string(lo) +
              " to " + std::to_string(hi) + " bytes"),
        lo_bytes_(lo),
        hi_bytes_(hi) {}

  std::uint64_t lo_bytes() const { return lo_bytes_; }
  std::uint64_t hi_bytes() const { return hi_bytes_; }

 private:
  std::uint64_t lo_bytes_;
  std::uint64_t hi_bytes_;
};

}  // namespace topoprobe
