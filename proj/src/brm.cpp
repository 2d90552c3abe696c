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

#include "vrja/brm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace vrja {

int select_model(const std::array<double, 4>& default_rates, double target) {
  if (!(target > 0)) throw std::domain_error("target rate must be positive");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int m = 0; m < 4; ++m) {
    if (!(default_rates[m] > 0))
      throw std::domain_error("default rates must be positive");
    const double d = std::abs(default_rates[m] - target) / default_rates[m];
    if (d <= best_d) {  // ties prefer the higher-rate model
      best_d = d;
      best = m;
    }
  }
  return best;
}

LinearFit fit_linear(std::pair<int, double> p1, std::pair<int, double> p2) {
  if (p1.first == p2.first)
    throw std::invalid_argument("coincident fit abscissae");
  if (!(p1.second > 0) || !(p2.second > 0))
    throw std::invalid_argument("rates must be positive");
  LinearFit fit;
  fit.a = (std::log(p2.second) - std::log(p1.second)) /
          static_cast<double>(p2.first - p1.first);
  fit.b = std::log(p1.second) - fit.a * p1.first;
  return fit;
}

int initial_delta(const LinearFit& fit, double target) {
  if (!(target > 0)) throw std::domain_error("target rate must be positive");
  if (fit.a == 0.0) throw std::domain_error("degenerate rate fit");
  const long raw = std::lround((std::log(target) - fit.b) / fit.a);
  return static_cast<int>(
      std::clamp(raw, static_cast<long>(kDeltaMin), static_cast<long>(kDeltaMax)));
}

// The search below reproduces, with O(log window) validations, the point an
// exhaustive window scan would select for a monotone non-decreasing oracle:
//   qualified  = points whose rate lies within max_rate_diff of the target;
//   if any qualify: minimize |rate - anchor|, ties toward smaller |delta|,
//   then smaller delta; otherwise minimize |rate - target| with the same
//   tie chain. It halves on the aim value (the anchor clamped into the
//   tolerance band): the winning RATE is always one of the two rates
//   adjacent to the aim, and the winning POINT is the plateau point of that
//   rate nearest zero, so only a plateau edge lying between zero and an
//   already-known edge ever needs a further search.
BrmResult bisection_search(const std::function<double(int)>& validate,
                           int delta1, double target, double anchor_rate,
                           const BrmConfig& cfg) {
  if (!(target > 0)) throw std::domain_error("target rate must be positive");
  if (!(anchor_rate > 0))
    throw std::domain_error("anchor rate must be positive");
  if (cfg.delta_min > cfg.delta_max || cfg.bisection_halfwidth < 0)
    throw std::invalid_argument("bad search configuration");

  const int d1 = std::clamp(delta1, cfg.delta_min, cfg.delta_max);
  const int lo = std::max(d1 - cfg.bisection_halfwidth, cfg.delta_min);
  const int hi = std::min(d1 + cfg.bisection_halfwidth, cfg.delta_max);

  std::map<int, double> memo;
  std::vector<std::pair<int, double>> trace;
  auto eval = [&](int d) {
    auto it = memo.find(d);
    if (it != memo.end()) return it->second;
    const double v = validate(d);
    memo.emplace(d, v);
    trace.emplace_back(d, v);
    return v;
  };

  const double band_lo = target * (1.0 - cfg.max_rate_diff);
  const double band_hi = target * (1.0 + cfg.max_rate_diff);
  const double aim = std::clamp(anchor_rate, band_lo, band_hi);

  // bracket the aim with virtual sentinels f(lo-1) = -inf, f(hi+1) = +inf
  int l = lo - 1, h = hi + 1;
  while (h - l > 1) {
    const int mid = l + (h - l) / 2;
    if (eval(mid) < aim)
      l = mid;
    else
      h = mid;
  }

  // smallest x in [lo, p] with f(x) == f(p), seeded from memoized bounds;
  // the adjacent point is probed first so a width-1 plateau (the strictly
  // increasing case) costs a single validation
  auto plateau_left = [&](int p) {
    const double b = memo.at(p);
    int lb = lo - 1, ub = p;
    for (const auto& [d, v] : memo) {
      if (d >= p || d < lo) continue;
      if (v < b)
        lb = std::max(lb, d);
      else if (v == b)
        ub = std::min(ub, d);
    }
    if (ub - lb > 1) {
      if (eval(ub - 1) < b) return ub;
      --ub;
    }
    while (ub - lb > 1) {
      const int mid = lb + (ub - lb) / 2;
      if (eval(mid) < b)
        lb = mid;
      else
        ub = mid;
    }
    return ub;
  };
  // largest x in [p, hi] with f(x) == f(p)
  auto plateau_right = [&](int p) {
    const double b = memo.at(p);
    int lb = p, ub = hi + 1;
    for (const auto& [d, v] : memo) {
      if (d <= p || d > hi) continue;
      if (v > b)
        ub = std::min(ub, d);
      else if (v == b)
        lb = std::max(lb, d);
    }
    if (ub - lb > 1) {
      if (eval(lb + 1) > b) return lb;
      ++lb;
    }
    while (ub - lb > 1) {
      const int mid = lb + (ub - lb) / 2;
      if (eval(mid) > b)
        ub = mid;
      else
        lb = mid;
    }
    return lb;
  };
  // the plateau point of f(p) nearest zero (ties break toward smaller delta
  // automatically: a plateau containing both -k and +k also contains 0)
  auto plateau_winner = [&](int p) {
    if (p > 0) return std::max(plateau_left(p), 0);
    if (p < 0) return std::min(plateau_right(p), 0);
    return 0;
  };

  int winner;
  double best;
  if (l == lo - 1) {
    // every window rate >= aim: the smallest rate f(lo) is the best value
    best = memo.at(lo);
    winner = plateau_winner(lo);
  } else if (h == hi + 1) {
    // every window rate < aim
    best = memo.at(hi);
    winner = plateau_winner(hi);
  } else {
    const double va = memo.at(l), vb = memo.at(h);  // va < aim <= vb
    const bool qa = va >= band_lo;  // va <= band_hi holds since va < aim
    const bool qb = vb <= band_hi;  // vb >= band_lo holds since vb >= aim
    int choice;  // -1 plateau of l, +1 plateau of h, 0 distance tie
    if (qa && qb) {
      const double da = std::abs(va - anchor_rate);
      const double db = std::abs(vb - anchor_rate);
      choice = da < db ? -1 : (db < da ? 1 : 0);
    } else if (qa) {
      choice = -1;
    } else if (qb) {
      choice = 1;
    } else {
      // the rate function jumps over the whole tolerance band
      const double da = target - va, db = vb - target;
      choice = da < db ? -1 : (db < da ? 1 : 0);
    }
    if (choice == -1) {
      best = va;
      winner = plateau_winner(l);
    } else if (choice == 1) {
      best = vb;
      winner = plateau_winner(h);
    } else {
      const int wa = plateau_winner(l), wb = plateau_winner(h);
      const bool pick_a =
          std::abs(wa) != std::abs(wb) ? std::abs(wa) < std::abs(wb) : wa < wb;
      winner = pick_a ? wa : wb;
      best = pick_a ? va : vb;
    }
  }

  eval(winner);  // the final point; a memo hit except when a plateau spans 0

  BrmResult result;
  result.delta_beta = DeltaBeta{winner};
  result.achieved_bpp = best;
  result.relative_diff = std::abs(best - target) / target;
  result.met_threshold = best >= band_lo && best <= band_hi;
  result.evaluations = std::move(trace);
  return result;
}

BrmResult match_rate(std::uint64_t seed, const TensorShape& y_shape,
                     const TensorShape& uv_shape,
                     const std::array<SurrogateModel, 4>& models,
                     double target_bpp,
                     const std::optional<SpatialQualityMap>& spatial,
                     const BrmConfig& cfg) {
  if (!(target_bpp > 0))
    throw std::domain_error("target rate must be positive");

  const LatentPicture lat = synthesize_latent(y_shape, uv_shape, seed);

  std::array<double, 4> anchors;
  for (int m = 0; m < 4; ++m)
    anchors[m] =
        rate_for_delta(lat, models[m], {0}, {0}, spatial).bpp;
  const int model_id = select_model(anchors, target_bpp);
  const SurrogateModel& model = models[model_id];

  std::map<int, double> memo;
  std::vector<std::pair<int, double>> trace;
  auto validate = [&](int d) {
    auto it = memo.find(d);
    if (it != memo.end()) return it->second;
    const double bpp = rate_for_delta(lat, model, {d}, {d}, spatial).bpp;
    memo.emplace(d, bpp);
    trace.emplace_back(d, bpp);
    return bpp;
  };
  // the selection probe at delta 0 is the first validation of this model
  memo.emplace(0, anchors[model_id]);
  trace.emplace_back(0, anchors[model_id]);

  const double r_min = validate(cfg.delta_min);
  const double r_max = validate(cfg.delta_max);
  const LinearFit fit =
      fit_linear({cfg.delta_min, r_min}, {cfg.delta_max, r_max});
  const int d1 = initial_delta(fit, target_bpp);
  validate(d1);

  BrmResult result =
      bisection_search(validate, d1, target_bpp, anchors[model_id], cfg);
  result.model_id = model_id;
  result.evaluations = std::move(trace);
  return result;
}

}  // namespace vrja
