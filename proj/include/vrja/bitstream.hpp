// Copyright 2026 the vrja authors
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
#include <optional>
#include <vector>

#include "vrja/types.hpp"

namespace vrja {

// Container layout (all multi-byte integers big-endian):
//
//   offset  size  field
//        0     4  magic "VRJA"
//        4     1  version (1)
//        5     2  source height H
//        7     2  source width W
//        9     1  y channel count
//       10     1  uv channel count
//       11     3  delta_beta_y | delta_beta_uv, two signed 12-bit
//                 two's-complement fields packed high-bits-first
//       14     1  flags (bit 0: spatial-map substream present; others 0)
//
// then, in order: optional spatial substream, Y substream, UV substream,
// each prefixed by a 32-bit payload length.
inline constexpr int kHeaderSize = 15;
inline constexpr std::uint8_t kVersion = 1;
inline constexpr char kMagic[4] = {'V', 'R', 'J', 'A'};

struct PictureHeader {
  int src_h = 0;
  int src_w = 0;
  int c_y = 0;
  int c_uv = 0;
  int delta_beta_y = 0;
  int delta_beta_uv = 0;
  bool spatial_present = false;
};

struct ParsedStream {
  PictureHeader header;
  std::optional<std::vector<std::uint8_t>> spatial;
  std::vector<std::uint8_t> y;
  std::vector<std::uint8_t> uv;
};

// Throws StreamError{RangeViolation} when a header field cannot be signaled
// (delta outside [-1069, 702], dims outside 16-bit, channel counts outside
// 8-bit or zero).
std::vector<std::uint8_t> write_stream(
    const PictureHeader& header,
    const std::optional<std::vector<std::uint8_t>>& spatial_bytes,
    const std::vector<std::uint8_t>& y_bytes,
    const std::vector<std::uint8_t>& uv_bytes);

// Exact inverse of write_stream. Every malformed input maps to a typed
// StreamError; parsing never reads past declared lengths and requires the
// stream to end exactly after the last substream.
ParsedStream read_stream(const std::vector<std::uint8_t>& bytes);

}  // namespace vrja
