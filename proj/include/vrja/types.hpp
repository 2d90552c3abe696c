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

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace vrja {

using Scalar = double;

// Latent-space tensors are stored as (channels x h*w) arrays; spatial
// positions flatten row-major, column index = i*w + j.
template <typename T>
using Array2D = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic>;
using Tensor = Array2D<Scalar>;
using IndexGrid = Eigen::ArrayXXi;  // (h x w), entry (i,j) addressed directly

// Signaling range of the global quality displacement (signed 12-bit field,
// clamped further by the encoder).
inline constexpr int kDeltaMin = -1069;
inline constexpr int kDeltaMax = 702;

inline constexpr int kSpatialIndexMin = -8;
inline constexpr int kSpatialIndexMax = 8;

struct TensorShape {
  int channels = 0;
  int h = 0;  // latent rows   = ceil(src_h / 16)
  int w = 0;  // latent cols   = ceil(src_w / 16)
  int src_h = 0;
  int src_w = 0;

  long source_pixels() const { return static_cast<long>(src_h) * src_w; }
  long elements() const { return static_cast<long>(channels) * h * w; }
  bool valid() const {
    return channels >= 1 && h >= 1 && w >= 1 && src_h >= 1 && src_w >= 1;
  }
};

// Latent grid dimensions use ceiling division so arbitrary source sizes map
// deterministically.
inline TensorShape latent_shape(int src_h, int src_w, int channels) {
  return TensorShape{channels, (src_h + 15) / 16, (src_w + 15) / 16, src_h,
                     src_w};
}

// Typed stream errors. Every malformed input to the container reader or the
// substream decoders maps onto exactly one of these.
enum class StreamErrc {
  BadMagic,
  BadVersion,
  Truncated,
  LengthMismatch,
  FlagMismatch,
  RangeViolation,
  Corrupt,
};

inline const char* to_string(StreamErrc e) {
  switch (e) {
    case StreamErrc::BadMagic: return "bad magic";
    case StreamErrc::BadVersion: return "unsupported version";
    case StreamErrc::Truncated: return "truncated stream";
    case StreamErrc::LengthMismatch: return "length mismatch";
    case StreamErrc::FlagMismatch: return "flag/payload inconsistency";
    case StreamErrc::RangeViolation: return "field out of range";
    case StreamErrc::Corrupt: return "corrupt stream";
  }
  return "unknown stream error";
}

class StreamError : public std::runtime_error {
 public:
  StreamError(StreamErrc errc, const std::string& detail)
      : std::runtime_error(std::string(to_string(errc)) +
                           (detail.empty() ? "" : ": " + detail)),
        errc_(errc) {}
  explicit StreamError(StreamErrc errc) : StreamError(errc, "") {}
  StreamErrc errc() const { return errc_; }

 private:
  StreamErrc errc_;
};

}  // namespace vrja
