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
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "vrja/types.hpp"

namespace vrja {

// Integer-precision entropy coding of quantized latent symbols under a
// discretized-Gaussian model. All coder state is integral; the only floating
// point is in table construction.

inline constexpr int kSymbolMin = -255;
inline constexpr int kSymbolMax = 255;
inline constexpr int kSymbolCount = kSymbolMax - kSymbolMin + 1;  // 511
inline constexpr std::uint32_t kTotalFreq = 1u << 16;

struct CdfTable {
  // cumulative[0] = 0, cumulative[kSymbolCount] = 65536, strictly increasing
  // (every symbol keeps frequency >= 1).
  std::vector<std::uint32_t> cumulative;
  int symbol_offset = kSymbolMin;  // symbol value of index 0

  std::uint32_t freq(int symbol) const {
    int idx = symbol - symbol_offset;
    return cumulative[idx + 1] - cumulative[idx];
  }
};

// Discretized Gaussian over [-255, 255] with the tail mass folded into the
// extreme bins, quantized to a 16-bit total by largest remainder with a
// minimum frequency of 1. Throws std::domain_error for sigma <= 0.
CdfTable build_cdf(double sigma);

// Tables are cached per sigma quantized to the 0.2-step natural-log grid, the
// same grid the integer quality arithmetic lives on. Both encoder and decoder
// quantize identically, so the cache is transparent.
class CdfCache {
 public:
  const CdfTable* get(double sigma);
  static int key_for_sigma(double sigma);
  static double sigma_for_key(int key);

 private:
  std::map<int, std::unique_ptr<CdfTable>> tables_;
  std::mutex mu_;
};

// Shared process-wide cache (tables are immutable once built).
CdfCache& global_cdf_cache();

// Encodes symbols[i] under models[i]. Values beyond [-255, 255] are clamped
// to the extreme bin first; *clamped (if given) counts those events. An empty
// sequence encodes to zero bytes.
std::vector<std::uint8_t> rc_encode(const std::vector<int>& symbols,
                                    const std::vector<const CdfTable*>& models,
                                    long* clamped = nullptr);

// Exact inverse of rc_encode for the same model sequence. Byte underrun
// raises StreamError{Truncated}; value inconsistencies (bad lead byte,
// frequency overflow, unconsumed bytes) raise StreamError{Corrupt}.
std::vector<int> rc_decode(const std::vector<std::uint8_t>& bytes,
                           const std::vector<const CdfTable*>& models);

// Ideal code length sum(-log2 freq/65536) after the same clamping as
// rc_encode.
double estimate_bits(const std::vector<int>& symbols,
                     const std::vector<const CdfTable*>& models);

double table_entropy_bits(const CdfTable& table);  // per-symbol Shannon bits

}  // namespace vrja
