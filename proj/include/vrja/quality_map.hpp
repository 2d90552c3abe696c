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

#include <cmath>

#include "vrja/types.hpp"

namespace vrja {

// Integer log-domain configuration. Quality ratios are quantized to steps of
// log_unit() = sigma_step / beta_precision in the natural-log domain; adding
// integers there multiplies scales in the linear domain.
struct LogDomainConfig {
  Scalar sigma_step = 0.2;
  int beta_precision = 128;

  Scalar log_unit() const { return sigma_step / beta_precision; }
  bool valid() const { return sigma_step > 0 && beta_precision > 0; }
};

// Global quality displacement in log-domain integer units. Total arithmetic
// is defined over the whole int range; clamping to [kDeltaMin, kDeltaMax]
// happens at signal time.
struct DeltaBeta {
  int value = 0;
};

inline int clamp_delta(int v) {
  return v < kDeltaMin ? kDeltaMin : (v > kDeltaMax ? kDeltaMax : v);
}

enum class Component { Y, UV };

struct ChannelGainVector {
  Eigen::ArrayXi gains;  // one log-domain integer per latent channel
  Component component = Component::Y;
};

// Grid of quantization indices in [-8, 8]; governs spatial bit allocation.
struct SpatialQualityMap {
  IndexGrid indices;  // (h x w)

  int h() const { return static_cast<int>(indices.rows()); }
  int w() const { return static_cast<int>(indices.cols()); }
  bool valid() const {
    return indices.size() > 0 &&
           (indices >= kSpatialIndexMin && indices <= kSpatialIndexMax).all();
  }
};

// Linear-domain per-element scale tensor m[c,i,j], materialized after all
// integer log-domain composition. Strictly positive by construction.
struct QualityMap3D {
  Tensor scales;  // (channels x h*w)
  int h = 0;
  int w = 0;
};

struct RateControlParams {
  Scalar beta_train = 1.0;
  Scalar beta_test = 1.0;

  Scalar delta_ratio() const { return beta_test / beta_train; }
};

// floor(ln(delta_ratio) / log_unit), floor toward -inf so the mapping stays
// monotone for ratios below 1. Throws std::domain_error for ratios <= 0.
DeltaBeta delta_beta_from_quality(const RateControlParams& params,
                                  const LogDomainConfig& cfg);

inline Scalar log_to_linear(int v, const LogDomainConfig& cfg) {
  return std::exp(v * cfg.log_unit());
}

// The 17-entry quantization-scale lookup for spatial indices -8..8.
// Throws std::out_of_range outside that interval.
Scalar quant_scale_for_index(int idx);

QualityMap3D extend_channel_map(const ChannelGainVector& gain, DeltaBeta delta,
                                int h, int w, const LogDomainConfig& cfg);

QualityMap3D extend_spatial_map(const SpatialQualityMap& map, int channels);

// Elementwise product of the two single-source extensions.
QualityMap3D combine_joint(const ChannelGainVector& gain, DeltaBeta delta,
                           const SpatialQualityMap& map,
                           const LogDomainConfig& cfg);

// r' = m .* r  /  r = r' ./ m. Expression-friendly; shape checks live in the
// eager overloads below.
template <typename D1, typename D2>
auto apply_map_expr(const Eigen::ArrayBase<D1>& residual,
                    const Eigen::ArrayBase<D2>& scales) {
  return residual.derived() * scales.derived();
}

template <typename D1, typename D2>
auto unapply_map_expr(const Eigen::ArrayBase<D1>& scaled,
                      const Eigen::ArrayBase<D2>& scales) {
  return scaled.derived() / scales.derived();
}

Tensor apply_map(const Tensor& residual, const QualityMap3D& map);
Tensor unapply_map(const Tensor& scaled, const QualityMap3D& map);

}  // namespace vrja
