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

#include "vrja/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace vrja {

std::vector<RdPoint> rd_curve(const SurrogateModel& model,
                              const std::vector<int>& delta_grid,
                              std::uint64_t seed, const TensorShape& y_shape,
                              const TensorShape& uv_shape) {
  if (delta_grid.empty()) throw std::invalid_argument("empty delta grid");
  for (int d : delta_grid)
    if (d < kDeltaMin || d > kDeltaMax)
      throw std::invalid_argument("grid delta outside signaling range");

  const LatentPicture lat = synthesize_latent(y_shape, uv_shape, seed);
  std::vector<RdPoint> curve;
  curve.reserve(delta_grid.size());
  for (int d : delta_grid) {
    const RateReport r = rate_for_delta(lat, model, {d}, {d}, std::nullopt);
    curve.push_back({r.bpp, r.psnr});
  }
  std::sort(curve.begin(), curve.end(),
            [](const RdPoint& a, const RdPoint& b) { return a.bpp < b.bpp; });
  return curve;
}

const std::vector<int>& default_delta_grid() {
  static const std::vector<int> grid = {-1069, -860, -660, -460, -260,
                                        0,     200,  400,  600,  702};
  return grid;
}

namespace {

// cubic least-squares fit of ln(bpp) on (quality - shift)
Eigen::Vector4d fit_log_rate(const std::vector<RdPoint>& curve, double shift) {
  const Eigen::Index n = static_cast<Eigen::Index>(curve.size());
  Eigen::MatrixXd vand(n, 4);
  Eigen::VectorXd lr(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double q = curve[i].quality - shift;
    vand(i, 0) = 1.0;
    vand(i, 1) = q;
    vand(i, 2) = q * q;
    vand(i, 3) = q * q * q;
    lr(i) = std::log(curve[i].bpp);
  }
  return vand.colPivHouseholderQr().solve(lr);
}

double integrate_cubic(const Eigen::Vector4d& c, double lo, double hi) {
  auto anti = [&](double x) {
    return x * (c(0) + x * (c(1) / 2 + x * (c(2) / 3 + x * c(3) / 4)));
  };
  return anti(hi) - anti(lo);
}

void check_curve(const std::vector<RdPoint>& curve) {
  if (curve.size() < 4)
    throw std::invalid_argument("curve needs at least 4 points");
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (!(curve[i].bpp > 0))
      throw std::invalid_argument("curve rates must be positive");
    if (i > 0 && !(curve[i].bpp > curve[i - 1].bpp))
      throw std::invalid_argument("curve rates must be strictly increasing");
  }
}

}  // namespace

double bd_rate(const std::vector<RdPoint>& anchor,
               const std::vector<RdPoint>& test) {
  check_curve(anchor);
  check_curve(test);

  auto quality_range = [](const std::vector<RdPoint>& c) {
    auto [mn, mx] = std::minmax_element(
        c.begin(), c.end(), [](const RdPoint& a, const RdPoint& b) {
          return a.quality < b.quality;
        });
    return std::pair<double, double>{mn->quality, mx->quality};
  };
  const auto [a_lo, a_hi] = quality_range(anchor);
  const auto [t_lo, t_hi] = quality_range(test);
  const double lo = std::max(a_lo, t_lo);
  const double hi = std::min(a_hi, t_hi);
  if (!(lo < hi)) throw std::domain_error("no common quality interval");

  // centering the fits keeps the Vandermonde system well conditioned and is
  // exactly neutral: the same shift applies to both curves
  const double shift = 0.5 * (lo + hi);
  const Eigen::Vector4d ca = fit_log_rate(anchor, shift);
  const Eigen::Vector4d ct = fit_log_rate(test, shift);
  const double ia = integrate_cubic(ca, lo - shift, hi - shift);
  const double it = integrate_cubic(ct, lo - shift, hi - shift);
  return 100.0 * std::expm1((it - ia) / (hi - lo));
}

}  // namespace vrja
