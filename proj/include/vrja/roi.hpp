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

#include <optional>

#include "vrja/brm.hpp"
#include "vrja/surrogate.hpp"

namespace vrja {

// Region-of-interest bit allocation: a spatial map that raises quality inside
// a latent-grid rectangle and lowers it outside, optionally rate-compensated
// through the bit-rate matcher.

struct RoiRect {
  int x = 0;  // latent-grid column of the left edge
  int y = 0;  // latent-grid row of the top edge
  int w = 0;
  int h = 0;
};

// +roi_index inside the rectangle, bg_index outside. Throws
// std::invalid_argument for an empty or out-of-bounds rectangle or indices
// outside [-8, 8].
SpatialQualityMap build_roi_map(const RoiRect& rect, int map_h, int map_w,
                                int roi_index, int bg_index);

// Pooled squared reconstruction error over both components, restricted to
// latent cells inside (or outside) the rectangle.
double region_mse(const LatentPicture& latent, const Tensor& recon_y,
                  const Tensor& recon_uv, const RoiRect& rect, bool inside);

struct RoiOutcome {
  RateReport base;        // no spatial map, delta from `delta` or BRM
  RateReport mapped;      // with the ROI map
  double roi_mse_base = 0.0;
  double roi_mse_mapped = 0.0;
  double bg_mse_base = 0.0;
  double bg_mse_mapped = 0.0;
  std::optional<BrmResult> brm;  // set when a target bpp was given
};

// Encodes the same seeded picture with and without the ROI map at equal
// delta; with a target, the mapped encode's delta comes from match_rate on
// the joint map.
RoiOutcome roi_demo(std::uint64_t seed, const TensorShape& y_shape,
                    const TensorShape& uv_shape,
                    const std::array<SurrogateModel, 4>& models, int model_id,
                    const RoiRect& rect, int roi_index, int bg_index,
                    std::optional<double> target_bpp, const BrmConfig& cfg);

}  // namespace vrja
