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

#include "vrja/bitstream.hpp"

#include <cstring>

namespace vrja {

namespace {

constexpr int kDelta12Bias = 4096;  // two's-complement width of the field

void put_u16(std::vector<std::uint8_t>& out, int v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

struct Cursor {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;

  std::uint32_t u8() {
    if (pos >= bytes.size())
      throw StreamError(StreamErrc::Truncated, "container underrun");
    return bytes[pos++];
  }
  std::uint32_t u16() { return (u8() << 8) | u8(); }
  std::uint32_t u32() { return (u16() << 16) | u16(); }

  std::vector<std::uint8_t> blob(std::uint32_t len) {
    if (bytes.size() - pos < len)
      throw StreamError(StreamErrc::Truncated, "substream underrun");
    std::vector<std::uint8_t> out(bytes.begin() + static_cast<long>(pos),
                                  bytes.begin() + static_cast<long>(pos + len));
    pos += len;
    return out;
  }
};

}  // namespace

std::vector<std::uint8_t> write_stream(
    const PictureHeader& header,
    const std::optional<std::vector<std::uint8_t>>& spatial_bytes,
    const std::vector<std::uint8_t>& y_bytes,
    const std::vector<std::uint8_t>& uv_bytes) {
  if (header.src_h < 1 || header.src_h > 0xFFFF || header.src_w < 1 ||
      header.src_w > 0xFFFF)
    throw StreamError(StreamErrc::RangeViolation, "source dims");
  if (header.c_y < 1 || header.c_y > 0xFF || header.c_uv < 1 ||
      header.c_uv > 0xFF)
    throw StreamError(StreamErrc::RangeViolation, "channel counts");
  if (header.delta_beta_y < kDeltaMin || header.delta_beta_y > kDeltaMax ||
      header.delta_beta_uv < kDeltaMin || header.delta_beta_uv > kDeltaMax)
    throw StreamError(StreamErrc::RangeViolation, "delta beta");
  if (header.spatial_present != spatial_bytes.has_value())
    throw StreamError(StreamErrc::FlagMismatch,
                      "spatial flag vs payload presence");

  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + 12 + y_bytes.size() + uv_bytes.size() +
              (spatial_bytes ? spatial_bytes->size() : 0));
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kVersion);
  put_u16(out, header.src_h);
  put_u16(out, header.src_w);
  out.push_back(static_cast<std::uint8_t>(header.c_y));
  out.push_back(static_cast<std::uint8_t>(header.c_uv));

  const int dy = header.delta_beta_y < 0 ? header.delta_beta_y + kDelta12Bias
                                         : header.delta_beta_y;
  const int du = header.delta_beta_uv < 0 ? header.delta_beta_uv + kDelta12Bias
                                          : header.delta_beta_uv;
  out.push_back(static_cast<std::uint8_t>(dy >> 4));
  out.push_back(static_cast<std::uint8_t>(((dy & 0xF) << 4) | (du >> 8)));
  out.push_back(static_cast<std::uint8_t>(du & 0xFF));
  out.push_back(header.spatial_present ? 0x01 : 0x00);

  if (spatial_bytes) {
    put_u32(out, static_cast<std::uint32_t>(spatial_bytes->size()));
    out.insert(out.end(), spatial_bytes->begin(), spatial_bytes->end());
  }
  put_u32(out, static_cast<std::uint32_t>(y_bytes.size()));
  out.insert(out.end(), y_bytes.begin(), y_bytes.end());
  put_u32(out, static_cast<std::uint32_t>(uv_bytes.size()));
  out.insert(out.end(), uv_bytes.begin(), uv_bytes.end());
  return out;
}

ParsedStream read_stream(const std::vector<std::uint8_t>& bytes) {
  Cursor cur{bytes};

  char magic[4];
  for (char& c : magic) c = static_cast<char>(cur.u8());
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw StreamError(StreamErrc::BadMagic);
  if (cur.u8() != kVersion) throw StreamError(StreamErrc::BadVersion);

  ParsedStream ps;
  ps.header.src_h = static_cast<int>(cur.u16());
  ps.header.src_w = static_cast<int>(cur.u16());
  ps.header.c_y = static_cast<int>(cur.u8());
  ps.header.c_uv = static_cast<int>(cur.u8());
  if (ps.header.src_h < 1 || ps.header.src_w < 1 || ps.header.c_y < 1 ||
      ps.header.c_uv < 1)
    throw StreamError(StreamErrc::RangeViolation, "zero dims or channels");

  const std::uint32_t b0 = cur.u8(), b1 = cur.u8(), b2 = cur.u8();
  int dy = static_cast<int>((b0 << 4) | (b1 >> 4));
  int du = static_cast<int>(((b1 & 0xF) << 8) | b2);
  if (dy >= kDelta12Bias / 2) dy -= kDelta12Bias;
  if (du >= kDelta12Bias / 2) du -= kDelta12Bias;
  if (dy < kDeltaMin || dy > kDeltaMax || du < kDeltaMin || du > kDeltaMax)
    throw StreamError(StreamErrc::RangeViolation, "delta beta");
  ps.header.delta_beta_y = dy;
  ps.header.delta_beta_uv = du;

  const std::uint32_t flags = cur.u8();
  if (flags & ~0x01u)
    throw StreamError(StreamErrc::FlagMismatch, "reserved flag bits set");
  ps.header.spatial_present = flags & 0x01;

  if (ps.header.spatial_present) ps.spatial = cur.blob(cur.u32());
  ps.y = cur.blob(cur.u32());
  ps.uv = cur.blob(cur.u32());
  if (cur.pos != bytes.size())
    throw StreamError(StreamErrc::LengthMismatch, "trailing bytes");
  return ps;
}

}  // namespace vrja
