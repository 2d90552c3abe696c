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
#include <vector>

#include "vrja/surrogate.hpp"

namespace vrja {

struct RdPoint {
  double bpp = 0.0;
  double quality = 0.0;  // PSNR in dB for the surrogate
};

// One point per grid delta via the cached latent, sorted by bpp.
std::vector<RdPoint> rd_curve(const SurrogateModel& model,
                              const std::vector<int>& delta_grid,
                              std::uint64_t seed, const TensorShape& y_shape,
                              const TensorShape& uv_shape);

// The published evaluation grid for rate sweeps.
const std::vector<int>& default_delta_grid();

// Classic Bjontegaard delta rate: per-curve cubic fit of ln(bpp) against
// quality, integrated in closed form over the common quality interval;
// returns 100*(exp(mean difference) - 1). Curves need >= 4 points with
// strictly increasing bpp (std::invalid_argument otherwise); disjoint
// quality ranges throw std::domain_error.
double bd_rate(const std::vector<RdPoint>& anchor,
               const std::vector<RdPoint>& test);

}  // namespace vrja
