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

#include "vrja/range_coder.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vrja {

namespace {

constexpr std::uint32_t kTopValue = 1u << 24;

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

int clamp_symbol(int s) {
  return s < kSymbolMin ? kSymbolMin : (s > kSymbolMax ? kSymbolMax : s);
}

}  // namespace

CdfTable build_cdf(double sigma) {
  if (!(sigma > 0)) throw std::domain_error("sigma must be positive");

  // Quantize the non-negative half and mirror it, which makes
  // frequency(k) == frequency(-k) hold exactly. Masses come from the
  // Gaussian truncated to the support [-255.5, 255.5]; the excluded mass is
  // vanishing at every operational sigma and the truncation keeps the
  // wide-sigma limit uniform instead of piling onto the extreme bins.
  constexpr int kHalf = kSymbolMax + 1;  // bins 0..255; bin 0 at half weight
  const double denom =
      normal_cdf(255.5 / sigma) - normal_cdf(-255.5 / sigma);
  std::array<double, kHalf> p;
  double prev = normal_cdf(0.5 / sigma);
  p[0] = (prev - 0.5) / denom;
  for (int k = 1; k < kHalf; ++k) {
    const double edge = normal_cdf((k + 0.5) / sigma);
    p[k] = (edge - prev) / denom;
    prev = edge;
  }

  // largest-remainder quantization of the half to half the 16-bit total
  constexpr std::uint32_t kHalfFreq = kTotalFreq / 2;
  std::array<std::uint32_t, kHalf> f;
  std::array<double, kHalf> rem;
  long total = 0;
  for (int i = 0; i < kHalf; ++i) {
    const double t = p[i] * kTotalFreq;  // p sums to 0.5 across the half
    f[i] = static_cast<std::uint32_t>(t);
    rem[i] = t - f[i];
    total += f[i];
  }
  long deficit = static_cast<long>(kHalfFreq) - total;
  std::array<int, kHalf> order;
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return rem[a] > rem[b]; });
  for (int i = 0; deficit > 0 && i < kHalf; ++i, --deficit) ++f[order[i]];
  while (deficit < 0) {  // defensive; floating-point sum never overshoots
    int arg =
        static_cast<int>(std::max_element(f.begin(), f.end()) - f.begin());
    --f[arg];
    ++deficit;
  }

  // minimum frequency 1 everywhere, stolen from the current largest bin
  for (int i = 0; i < kHalf; ++i) {
    if (f[i] != 0) continue;
    int arg =
        static_cast<int>(std::max_element(f.begin(), f.end()) - f.begin());
    --f[arg];
    f[i] = 1;
  }

  CdfTable table;
  table.symbol_offset = kSymbolMin;
  table.cumulative.resize(kSymbolCount + 1);
  table.cumulative[0] = 0;
  for (int i = 0; i < kSymbolCount; ++i) {
    const int k = std::abs(i + kSymbolMin);  // mirror: freq(i) keyed by |k|
    const std::uint32_t fi = k == 0 ? 2 * f[0] : f[k];
    table.cumulative[i + 1] = table.cumulative[i] + fi;
  }
  return table;
}

int CdfCache::key_for_sigma(double sigma) {
  const long k = std::lround(std::log(sigma) / 0.2);
  return static_cast<int>(std::clamp(k, -45L, 45L));
}

double CdfCache::sigma_for_key(int key) { return std::exp(0.2 * key); }

const CdfTable* CdfCache::get(double sigma) {
  if (!(sigma > 0)) throw std::domain_error("sigma must be positive");
  const int key = key_for_sigma(sigma);
  std::lock_guard<std::mutex> lock(mu_);
  auto it = tables_.find(key);
  if (it == tables_.end())
    it = tables_
             .emplace(key, std::make_unique<CdfTable>(
                               build_cdf(sigma_for_key(key))))
             .first;
  return it->second.get();
}

CdfCache& global_cdf_cache() {
  static CdfCache cache;
  return cache;
}

namespace {

// Carry-propagating byte emitter shared by the encoder paths. `low` holds 33
// significant bits; the pending 0xFF run collapses once the carry resolves.
struct RangeEncoder {
  std::vector<std::uint8_t> out;
  std::uint64_t low = 0;
  std::uint32_t range = 0xFFFFFFFFu;
  std::uint8_t cache = 0;
  long cache_size = 1;

  void shift_low() {
    if (static_cast<std::uint32_t>(low) < 0xFF000000u || (low >> 32) != 0) {
      std::uint8_t carry = static_cast<std::uint8_t>(low >> 32);
      std::uint8_t byte = cache;
      do {
        out.push_back(static_cast<std::uint8_t>(byte + carry));
        byte = 0xFF;
      } while (--cache_size != 0);
      cache = static_cast<std::uint8_t>(low >> 24);
    }
    ++cache_size;
    low = (low << 8) & 0xFFFFFFFFu;
  }

  void encode(std::uint32_t cum, std::uint32_t freq) {
    range /= kTotalFreq;
    low += static_cast<std::uint64_t>(cum) * range;
    range *= freq;
    while (range < kTopValue) {
      shift_low();
      range <<= 8;
    }
  }

  void flush() {
    for (int i = 0; i < 5; ++i) shift_low();
  }
};

}  // namespace

std::vector<std::uint8_t> rc_encode(const std::vector<int>& symbols,
                                    const std::vector<const CdfTable*>& models,
                                    long* clamped) {
  if (symbols.size() != models.size())
    throw std::invalid_argument("symbol/model count mismatch");
  if (clamped) *clamped = 0;
  if (symbols.empty()) return {};

  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const int s = clamp_symbol(symbols[i]);
    if (clamped && s != symbols[i]) ++*clamped;
    const CdfTable& t = *models[i];
    const int idx = s - t.symbol_offset;
    enc.encode(t.cumulative[idx], t.cumulative[idx + 1] - t.cumulative[idx]);
  }
  enc.flush();
  return std::move(enc.out);
}

std::vector<int> rc_decode(const std::vector<std::uint8_t>& bytes,
                           const std::vector<const CdfTable*>& models) {
  if (models.empty()) {
    if (!bytes.empty())
      throw StreamError(StreamErrc::Corrupt, "payload for empty sequence");
    return {};
  }
  std::size_t pos = 0;
  auto next_byte = [&]() -> std::uint32_t {
    if (pos >= bytes.size())
      throw StreamError(StreamErrc::Truncated, "range-coded payload underrun");
    return bytes[pos++];
  };

  // the encoder's first emitted byte is the zero-initialized cache
  if (next_byte() != 0)
    throw StreamError(StreamErrc::Corrupt, "bad range-coder lead byte");
  std::uint32_t code = 0;
  for (int i = 0; i < 4; ++i) code = (code << 8) | next_byte();
  std::uint32_t range = 0xFFFFFFFFu;

  std::vector<int> symbols(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    const CdfTable& t = *models[i];
    range /= kTotalFreq;
    const std::uint32_t value = code / range;
    if (value >= kTotalFreq)
      throw StreamError(StreamErrc::Corrupt, "cumulative frequency overflow");
    auto it = std::upper_bound(t.cumulative.begin(), t.cumulative.end(), value);
    const int idx = static_cast<int>(it - t.cumulative.begin()) - 1;
    symbols[i] = idx + t.symbol_offset;
    code -= t.cumulative[idx] * range;
    range *= t.cumulative[idx + 1] - t.cumulative[idx];
    while (range < kTopValue) {
      code = (code << 8) | next_byte();
      range <<= 8;
    }
  }
  if (pos != bytes.size())
    throw StreamError(StreamErrc::Corrupt, "unconsumed range-coded bytes");
  return symbols;
}

double estimate_bits(const std::vector<int>& symbols,
                     const std::vector<const CdfTable*>& models) {
  if (symbols.size() != models.size())
    throw std::invalid_argument("symbol/model count mismatch");
  double bits = 0.0;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const double f = models[i]->freq(clamp_symbol(symbols[i]));
    bits -= std::log2(f / kTotalFreq);
  }
  return bits;
}

double table_entropy_bits(const CdfTable& table) {
  double h = 0.0;
  for (int i = 0; i < kSymbolCount; ++i) {
    const double p =
        static_cast<double>(table.cumulative[i + 1] - table.cumulative[i]) /
        kTotalFreq;
    h -= p * std::log2(p);
  }
  return h;
}

}  // namespace vrja
