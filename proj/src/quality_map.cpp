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

#include "vrja/quality_map.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace vrja {

DeltaBeta delta_beta_from_quality(const RateControlParams& params,
                                  const LogDomainConfig& cfg) {
  const Scalar ratio = params.delta_ratio();
  if (!(ratio > 0) || !std::isfinite(ratio))
    throw std::domain_error("quality ratio must be positive and finite");
  return DeltaBeta{
      static_cast<int>(std::floor(std::log(ratio) / cfg.log_unit()))};
}

Scalar quant_scale_for_index(int idx) {
  static constexpr std::array<Scalar, 17> kScale = {
      0.25, 0.3125, 0.375, 0.4375, 0.5,    0.625,  0.75, 0.875, 1.0,
      1.25, 1.4375, 1.6875, 2.0,   2.4375, 2.875,  3.375, 4.0};
  if (idx < kSpatialIndexMin || idx > kSpatialIndexMax)
    throw std::out_of_range("quantization index outside [-8, 8]");
  return kScale[idx - kSpatialIndexMin];
}

QualityMap3D extend_channel_map(const ChannelGainVector& gain, DeltaBeta delta,
                                int h, int w, const LogDomainConfig& cfg) {
  const long channels = gain.gains.size();
  if (channels < 1) throw std::invalid_argument("empty gain vector");
  if (h < 1 || w < 1) throw std::invalid_argument("non-positive map dims");

  QualityMap3D out;
  out.h = h;
  out.w = w;
  out.scales.resize(channels, static_cast<long>(h) * w);
  for (long c = 0; c < channels; ++c)
    out.scales.row(c).setConstant(
        log_to_linear(gain.gains(c) + delta.value, cfg));
  return out;
}

QualityMap3D extend_spatial_map(const SpatialQualityMap& map, int channels) {
  if (channels < 1) throw std::invalid_argument("non-positive channel count");
  if (map.indices.size() == 0) throw std::invalid_argument("empty map");

  const int h = map.h(), w = map.w();
  Eigen::Array<Scalar, 1, Eigen::Dynamic> row(static_cast<long>(h) * w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      row(static_cast<long>(i) * w + j) = quant_scale_for_index(map.indices(i, j));

  QualityMap3D out;
  out.h = h;
  out.w = w;
  out.scales = row.replicate(channels, 1);
  return out;
}

QualityMap3D combine_joint(const ChannelGainVector& gain, DeltaBeta delta,
                           const SpatialQualityMap& map,
                           const LogDomainConfig& cfg) {
  QualityMap3D ch = extend_channel_map(gain, delta, map.h(), map.w(), cfg);
  QualityMap3D sp =
      extend_spatial_map(map, static_cast<int>(gain.gains.size()));
  ch.scales *= sp.scales;
  return ch;
}

namespace {
void check_dims(const Tensor& t, const QualityMap3D& map) {
  if (t.rows() != map.scales.rows() || t.cols() != map.scales.cols())
    throw std::invalid_argument("tensor/map shape mismatch");
}
}  // namespace

Tensor apply_map(const Tensor& residual, const QualityMap3D& map) {
  check_dims(residual, map);
  return apply_map_expr(residual, map.scales);
}

Tensor unapply_map(const Tensor& scaled, const QualityMap3D& map) {
  check_dims(scaled, map);
  if (!(map.scales > 0).all())
    throw std::domain_error("map scales must be strictly positive");
  return unapply_map_expr(scaled, map.scales);
}

}  // namespace vrja
