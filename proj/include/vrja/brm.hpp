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

#include <array>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "vrja/surrogate.hpp"

namespace vrja {

// Bit-rate matching: pick a model and an integer displacement delta_beta so
// the achieved bpp lands within tolerance of the target while staying as
// close as possible to the selected model's default rate.

struct BrmConfig {
  double max_rate_diff = 0.10;
  int delta_min = kDeltaMin;
  int delta_max = kDeltaMax;
  int bisection_halfwidth = 100;
};

struct LinearFit {
  double a = 0.0;  // ln R ~ a * delta + b
  double b = 0.0;
};

struct BrmResult {
  int model_id = 0;
  DeltaBeta delta_beta;
  double achieved_bpp = 0.0;
  double relative_diff = 0.0;  // |achieved - target| / target
  // Distinct validated (delta, bpp) pairs for the selected model, in
  // evaluation order. achieved_bpp always equals one of these rates.
  std::vector<std::pair<int, double>> evaluations;
  bool met_threshold = false;
};

// argmin over models of D_r = |R_d - R_t| / R_d; exact ties resolve to the
// higher-rate model. Throws std::domain_error on non-positive inputs.
int select_model(const std::array<double, 4>& default_rates, double target);

// Two-point fit of ln R over delta. Throws std::invalid_argument for
// coincident deltas or non-positive rates.
LinearFit fit_linear(std::pair<int, double> p1, std::pair<int, double> p2);

// round((ln target - b) / a), clamped to the signaling interval. Zero slope
// throws std::domain_error (degenerate fit).
int initial_delta(const LinearFit& fit, double target);

// Interval-halving search over the integer window
// [max(delta1-100, delta_min), min(delta1+100, delta_max)] for a monotone
// non-decreasing rate oracle. Among validated points with
// relative_diff <= max_rate_diff it returns the one minimizing |bpp - R_d|
// (ties: smaller |delta|, then smaller delta); with no qualifier it returns
// the minimum-relative-diff point with met_threshold = false. The result is
// identical to an exhaustive scan of every window point under the same
// selection rule, including across plateaus of a step-shaped oracle.
BrmResult bisection_search(const std::function<double(int)>& validate,
                           int delta1, double target, double anchor_rate,
                           const BrmConfig& cfg);

// Full pipeline: model selection from the four anchor rates, endpoint fit,
// initial delta, then bisection. Synthesis runs exactly once per component;
// every validation reuses the cached latent, and Y/UV share the delta. The
// returned trace covers the selected model: anchor, both fit endpoints,
// delta1, the bisection probes, and the final point.
BrmResult match_rate(std::uint64_t seed, const TensorShape& y_shape,
                     const TensorShape& uv_shape,
                     const std::array<SurrogateModel, 4>& models,
                     double target_bpp,
                     const std::optional<SpatialQualityMap>& spatial,
                     const BrmConfig& cfg);

}  // namespace vrja
