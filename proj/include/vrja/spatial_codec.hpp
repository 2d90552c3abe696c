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
#include <vector>

#include "vrja/quality_map.hpp"

namespace vrja {

// Lossless coding of SpatialQualityMap: causal linear predictor, then
// zigzag-mapped residuals as order-0 Exp-Golomb, MSB-first, zero-padded.

struct ResidualGrid {
  IndexGrid residuals;  // same (h x w) as the source map
};

// Causal prediction from already-scanned neighbors (raster order):
// floor((left+up)/2) in the interior, the single neighbor on the first
// row/column, 0 at the origin. Division is floor toward -inf.
int predict(const SpatialQualityMap& map, int i, int j);

ResidualGrid compute_residuals(const SpatialQualityMap& map);

// Exact inverse of compute_residuals. A reconstructed index outside [-8, 8]
// raises StreamError{Corrupt}.
SpatialQualityMap reconstruct(const ResidualGrid& residuals);

std::vector<std::uint8_t> serialize(const SpatialQualityMap& map);

// Requires the exact substream: trailing padding bits must be zero and every
// byte must be consumed. Truncation raises StreamError{Truncated}; other
// inconsistencies raise StreamError{Corrupt}.
SpatialQualityMap deserialize(const std::vector<std::uint8_t>& bytes, int h,
                              int w);

// MSB-first bit I/O used by the Exp-Golomb layer.
class BitWriter {
 public:
  void put_bit(int b);
  void put_bits(std::uint32_t v, int n);  // n high bits of v's low n bits
  std::vector<std::uint8_t> finish();     // zero-pads to a byte boundary

 private:
  std::vector<std::uint8_t> bytes_;
  int bit_pos_ = 0;  // bits used in the last byte, 0 = byte-aligned
};

class BitReader {
 public:
  explicit BitReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  int get_bit();  // StreamError{Truncated} past the end
  long bits_read() const { return bits_read_; }
  // Remaining bits in the current padding tail; zero-padding check helper.
  bool padding_is_zero() const;
  long total_bits() const { return static_cast<long>(bytes_.size()) * 8; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  long bits_read_ = 0;
};

// Zigzag: 0 -> 0, -1 -> 1, 1 -> 2, -2 -> 3, ...
inline std::uint32_t zigzag(int v) {
  return v > 0 ? 2u * static_cast<std::uint32_t>(v)
               : 2u * static_cast<std::uint32_t>(-v) - (v < 0 ? 1u : 0u);
}

inline int unzigzag(std::uint32_t u) {
  return (u & 1u) ? -static_cast<int>((u + 1) / 2) : static_cast<int>(u / 2);
}

void exp_golomb_put(BitWriter& bw, std::uint32_t u);
std::uint32_t exp_golomb_get(BitReader& br);

}  // namespace vrja
