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

#include "vrja/spatial_codec.hpp"

#include <bit>
#include <stdexcept>

namespace vrja {

int predict(const SpatialQualityMap& map, int i, int j) {
  if (i < 0 || j < 0 || i >= map.h() || j >= map.w())
    throw std::out_of_range("prediction position outside the map");
  if (i == 0 && j == 0) return 0;
  if (i == 0) return map.indices(0, j - 1);
  if (j == 0) return map.indices(i - 1, 0);
  // floor((left + up) / 2); arithmetic shift floors toward -inf
  return (map.indices(i, j - 1) + map.indices(i - 1, j)) >> 1;
}

ResidualGrid compute_residuals(const SpatialQualityMap& map) {
  ResidualGrid out;
  out.residuals.resize(map.indices.rows(), map.indices.cols());
  for (int i = 0; i < map.h(); ++i)
    for (int j = 0; j < map.w(); ++j)
      out.residuals(i, j) = map.indices(i, j) - predict(map, i, j);
  return out;
}

SpatialQualityMap reconstruct(const ResidualGrid& residuals) {
  SpatialQualityMap out;
  const int h = static_cast<int>(residuals.residuals.rows());
  const int w = static_cast<int>(residuals.residuals.cols());
  out.indices.resize(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      // raster order: the causal neighbors are already reconstructed
      const int q = predict(out, i, j) + residuals.residuals(i, j);
      if (q < kSpatialIndexMin || q > kSpatialIndexMax)
        throw StreamError(StreamErrc::Corrupt,
                          "reconstructed index outside [-8, 8]");
      out.indices(i, j) = q;
    }
  return out;
}

void BitWriter::put_bit(int b) {
  if (bit_pos_ == 0) bytes_.push_back(0);
  bytes_.back() |= static_cast<std::uint8_t>((b & 1) << (7 - bit_pos_));
  bit_pos_ = (bit_pos_ + 1) & 7;
}

void BitWriter::put_bits(std::uint32_t v, int n) {
  for (int k = n - 1; k >= 0; --k) put_bit(static_cast<int>((v >> k) & 1u));
}

std::vector<std::uint8_t> BitWriter::finish() {
  bit_pos_ = 0;  // padding bits are already zero
  return std::move(bytes_);
}

int BitReader::get_bit() {
  if (bits_read_ >= total_bits())
    throw StreamError(StreamErrc::Truncated, "bit stream underrun");
  const std::uint8_t byte = bytes_[static_cast<std::size_t>(bits_read_ >> 3)];
  const int bit = (byte >> (7 - (bits_read_ & 7))) & 1;
  ++bits_read_;
  return bit;
}

bool BitReader::padding_is_zero() const {
  for (long k = bits_read_; k < total_bits(); ++k) {
    const std::uint8_t byte = bytes_[static_cast<std::size_t>(k >> 3)];
    if ((byte >> (7 - (k & 7))) & 1) return false;
  }
  return true;
}

void exp_golomb_put(BitWriter& bw, std::uint32_t u) {
  const std::uint64_t n = static_cast<std::uint64_t>(u) + 1;
  const int width = std::bit_width(n);
  for (int k = 1; k < width; ++k) bw.put_bit(0);
  for (int k = width - 1; k >= 0; --k)
    bw.put_bit(static_cast<int>((n >> k) & 1u));
}

std::uint32_t exp_golomb_get(BitReader& br) {
  int zeros = 0;
  while (br.get_bit() == 0) {
    if (++zeros > 31)
      throw StreamError(StreamErrc::Corrupt, "oversized codeword");
  }
  std::uint64_t n = 1;
  for (int k = 0; k < zeros; ++k) n = (n << 1) | static_cast<unsigned>(br.get_bit());
  return static_cast<std::uint32_t>(n - 1);
}

std::vector<std::uint8_t> serialize(const SpatialQualityMap& map) {
  if (!map.valid())
    throw std::invalid_argument("spatial map empty or indices out of range");
  const ResidualGrid res = compute_residuals(map);
  BitWriter bw;
  for (int i = 0; i < map.h(); ++i)
    for (int j = 0; j < map.w(); ++j)
      exp_golomb_put(bw, zigzag(res.residuals(i, j)));
  return bw.finish();
}

SpatialQualityMap deserialize(const std::vector<std::uint8_t>& bytes, int h,
                              int w) {
  if (h < 1 || w < 1) throw std::invalid_argument("non-positive map dims");
  BitReader br(bytes);
  ResidualGrid res;
  res.residuals.resize(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      res.residuals(i, j) = unzigzag(exp_golomb_get(br));
  if (br.total_bits() - br.bits_read() >= 8)
    throw StreamError(StreamErrc::Corrupt, "unconsumed bytes after map");
  if (!br.padding_is_zero())
    throw StreamError(StreamErrc::Corrupt, "nonzero padding bits");
  return reconstruct(res);
}

}  // namespace vrja
