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

#include "vrja/roi.hpp"

#include <stdexcept>

namespace vrja {

SpatialQualityMap build_roi_map(const RoiRect& rect, int map_h, int map_w,
                                int roi_index, int bg_index) {
  if (map_h < 1 || map_w < 1) throw std::invalid_argument("empty map");
  if (rect.w < 1 || rect.h < 1) throw std::invalid_argument("empty rectangle");
  if (rect.x < 0 || rect.y < 0 || rect.x + rect.w > map_w ||
      rect.y + rect.h > map_h)
    throw std::invalid_argument("rectangle outside the map");
  for (int idx : {roi_index, bg_index})
    if (idx < kSpatialIndexMin || idx > kSpatialIndexMax)
      throw std::invalid_argument("quality index outside the signal range");

  SpatialQualityMap map;
  map.indices = IndexGrid::Constant(map_h, map_w, bg_index);
  map.indices.block(rect.y, rect.x, rect.h, rect.w) = roi_index;
  return map;
}

double region_mse(const LatentPicture& latent, const Tensor& recon_y,
                  const Tensor& recon_uv, const RoiRect& rect, bool inside) {
  const int h = latent.y_shape.h, w = latent.y_shape.w;
  if (rect.x < 0 || rect.y < 0 || rect.x + rect.w > w || rect.y + rect.h > h)
    throw std::invalid_argument("rectangle outside the latent grid");

  double sum = 0.0;
  long count = 0;
  auto accumulate = [&](const Tensor& src, const Tensor& rec) {
    for (int i = 0; i < h; ++i) {
      const bool row_in = i >= rect.y && i < rect.y + rect.h;
      for (int j = 0; j < w; ++j) {
        const bool in = row_in && j >= rect.x && j < rect.x + rect.w;
        if (in != inside) continue;
        const Eigen::Index col = static_cast<Eigen::Index>(i) * w + j;
        sum += (src.col(col) - rec.col(col)).square().sum();
        count += src.rows();
      }
    }
  };
  accumulate(latent.y_latent, recon_y);
  accumulate(latent.uv_latent, recon_uv);
  if (count == 0) throw std::domain_error("empty region");
  return sum / static_cast<double>(count);
}

RoiOutcome roi_demo(std::uint64_t seed, const TensorShape& y_shape,
                    const TensorShape& uv_shape,
                    const std::array<SurrogateModel, 4>& models, int model_id,
                    const RoiRect& rect, int roi_index, int bg_index,
                    std::optional<double> target_bpp, const BrmConfig& cfg) {
  if (model_id < 0 || model_id > 3)
    throw std::invalid_argument("model id outside the suite");
  const SpatialQualityMap map =
      build_roi_map(rect, y_shape.h, y_shape.w, roi_index, bg_index);

  RoiOutcome out;
  int delta = 0;
  int mid = model_id;
  if (target_bpp) {
    out.brm = match_rate(seed, y_shape, uv_shape, models, *target_bpp, map,
                         cfg);
    delta = out.brm->delta_beta.value;
    mid = out.brm->model_id;
  }

  EncodedPicture base = encode_picture(seed, y_shape, uv_shape, models[mid],
                                       {delta}, {delta}, std::nullopt);
  EncodedPicture mapped =
      encode_picture(seed, y_shape, uv_shape, models[mid], {delta}, {delta},
                     map);
  out.base = base.report;
  out.mapped = mapped.report;

  const LatentPicture lat = synthesize_latent(y_shape, uv_shape, seed);
  out.roi_mse_base = region_mse(lat, base.recon_y, base.recon_uv, rect, true);
  out.roi_mse_mapped =
      region_mse(lat, mapped.recon_y, mapped.recon_uv, rect, true);
  out.bg_mse_base = region_mse(lat, base.recon_y, base.recon_uv, rect, false);
  out.bg_mse_mapped =
      region_mse(lat, mapped.recon_y, mapped.recon_uv, rect, false);
  return out;
}

}  // namespace vrja
