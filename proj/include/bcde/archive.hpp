/* Copyright 2026 The BCDE Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
        limitations under the License.
==============================================================================*/

#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bcde/tensor.hpp"

namespace bcde {

/// Malformed or incompatible file contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Named tensors stored in a little-endian binary container:
///
///   magic (5 bytes)
///   header entry count (u64), then per entry: key length (u64), key bytes,
///     value length (u64), value bytes          [only when has_header]
///   record count (u64), then per record:
///     name length (u64), name bytes, rank (u64), dims (u64 x rank),
///     values (f64 x prod(dims))
///
/// Checkpoints use magic "BCDE1" without a header block; prepared-split
/// caches use "BCDS1" with one.
struct TensorArchive {
  std::map<std::string, std::string> header;
  std::vector<std::pair<std::string, Tensor>> records;

  void add(std::string name, const Tensor& value);
  bool contains(std::string_view name) const;
  const Tensor& get(std::string_view name) const;
  /// Records whose names start with `prefix`.
  std::vector<std::pair<std::string, Tensor>> with_prefix(std::string_view prefix) const;
};

inline constexpr std::string_view kCheckpointMagic = "BCDE1";
inline constexpr std::string_view kSplitCacheMagic = "BCDS1";

void write_archive(const std::string& path, std::string_view magic, const TensorArchive& archive,
                   bool has_header);
/// Throws FormatError on a magic mismatch ("version mismatch") or a
/// truncated file, std::runtime_error when the file cannot be opened.
TensorArchive read_archive(const std::string& path, std::string_view magic, bool has_header);

}  // namespace bcde
