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
//
// Command-line front end. Exit codes: 0 success, 2 flag errors, 3 range
// violations or unreadable inputs, 4 rate matching finished outside the
// requested tolerance (the best effort is still printed).

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vrja/bitstream.hpp"
#include "vrja/brm.hpp"
#include "vrja/metrics.hpp"
#include "vrja/quality_map.hpp"
#include "vrja/roi.hpp"
#include "vrja/surrogate.hpp"

using namespace vrja;

namespace {

struct RunConfig {
  std::uint64_t seed = 2026;
  int height = 256;  // source pixels
  int width = 256;
  int channels_y = 64;
  int channels_uv = 32;

  TensorShape y_shape() const { return latent_shape(height, width, channels_y); }
  TensorShape uv_shape() const {
    return latent_shape(height, width, channels_uv);
  }
  std::array<SurrogateModel, 4> suite() const {
    return make_default_suite(seed, y_shape(), uv_shape());
  }
};

void add_run_options(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--seed", rc.seed, "picture seed");
  cmd->add_option("--height", rc.height, "source height in pixels")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--width", rc.width, "source width in pixels")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--channels-y", rc.channels_y, "luma latent channels")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--channels-uv", rc.channels_uv, "chroma latent channels")
      ->check(CLI::PositiveNumber);
}

void require_delta_in_range(int v, const char* which) {
  if (v < kDeltaMin || v > kDeltaMax)
    throw std::out_of_range(std::string(which) + " " + std::to_string(v) +
                            " outside [" + std::to_string(kDeltaMin) + ", " +
                            std::to_string(kDeltaMax) + "]");
}

// whitespace-separated integer grid, one map row per line
SpatialQualityMap load_spatial_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open map file " + path);
  std::vector<std::vector<int>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<int> row;
    int v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) throw std::invalid_argument("non-integer entry in " + path);
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("empty map file " + path);
  SpatialQualityMap map;
  map.indices.resize(static_cast<int>(rows.size()),
                     static_cast<int>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw std::invalid_argument("ragged rows in " + path);
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      map.indices(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  }
  if (!map.valid())
    throw std::out_of_range("map indices outside [" +
                            std::to_string(kSpatialIndexMin) + ", " +
                            std::to_string(kSpatialIndexMax) + "]");
  return map;
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& b) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open output file " + path);
  out.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
  if (!out) throw std::invalid_argument("write failed for " + path);
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open input file " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

void print_report(const RateReport& r) {
  std::printf("bpp,mse,psnr,bits_y,bits_uv\n");
  std::printf("%.6f,%.6f,%.3f,%ld,%ld\n", r.bpp, r.mse, r.psnr, r.bits_y,
              r.bits_uv);
}

std::vector<RdPoint> load_curve(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open curve file " + path);
  std::vector<RdPoint> curve;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    RdPoint p;
    if (std::sscanf(line.c_str(), "%lf,%lf", &p.bpp, &p.quality) == 2)
      curve.push_back(p);  // header and comment lines simply fail the scan
  }
  if (curve.empty())
    throw std::invalid_argument("no bpp,quality rows in " + path);
  return curve;
}

void write_curve(const std::string& path, const std::vector<RdPoint>& curve) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open output file " + path);
  out << "bpp,quality\n";
  char buf[80];
  for (const RdPoint& p : curve) {
    std::snprintf(buf, sizeof buf, "%.6f,%.3f\n", p.bpp, p.quality);
    out << buf;
  }
}

int cmd_encode(const RunConfig& rc, int model_id, int delta_y, int delta_uv,
               const std::string& map_path, const std::string& out_path) {
  require_delta_in_range(delta_y, "--delta-beta-y");
  require_delta_in_range(delta_uv, "--delta-beta-uv");
  std::optional<SpatialQualityMap> spatial;
  if (!map_path.empty()) spatial = load_spatial_map(map_path);

  const auto suite = rc.suite();
  EncodedPicture enc =
      encode_picture(rc.seed, rc.y_shape(), rc.uv_shape(), suite[model_id],
                     {delta_y}, {delta_uv}, spatial);
  if (!out_path.empty()) write_bytes(out_path, enc.container);
  print_report(enc.report);
  std::printf("container_bytes=%zu out=%s\n", enc.container.size(),
              out_path.empty() ? "(none)" : out_path.c_str());
  return 0;
}

int cmd_decode(const RunConfig& rc, int model_id, const std::string& in_path) {
  const auto bytes = read_bytes(in_path);
  const ParsedStream parsed = read_stream(bytes);  // for the header echo
  const PictureHeader& hd = parsed.header;
  const TensorShape hy = latent_shape(hd.src_h, hd.src_w, hd.c_y);
  const TensorShape huv = latent_shape(hd.src_h, hd.src_w, hd.c_uv);
  const auto suite = make_default_suite(rc.seed, hy, huv);
  DecodedPicture dec = decode_picture(bytes, suite[model_id]);

  std::printf("source=%dx%d channels_y=%d channels_uv=%d\n", hd.src_h,
              hd.src_w, hd.c_y, hd.c_uv);
  std::printf("delta_beta_y=%d delta_beta_uv=%d spatial_map=%s\n", dec.delta_y,
              dec.delta_uv, dec.spatial ? "yes" : "no");

  // with the seed at hand the original latent is reproducible, so the
  // decode can report distortion like the encoder does
  const LatentPicture lat = synthesize_latent(hy, huv, rc.seed);
  const double se = (lat.y_latent - dec.y).square().sum() +
                    (lat.uv_latent - dec.uv).square().sum();
  const double mse =
      se / static_cast<double>(lat.y_latent.size() + lat.uv_latent.size());
  std::printf("mse=%.6f psnr=%.3f\n", mse, psnr_from_mse(mse));
  return 0;
}

int cmd_match_rate(const RunConfig& rc, double target, double max_diff,
                   const std::string& map_path, const std::string& trace_path) {
  std::optional<SpatialQualityMap> spatial;
  if (!map_path.empty()) spatial = load_spatial_map(map_path);
  BrmConfig cfg;
  cfg.max_rate_diff = max_diff;

  BrmResult r = match_rate(rc.seed, rc.y_shape(), rc.uv_shape(), rc.suite(),
                           target, spatial, cfg);
  std::printf("model_id=%d delta_beta=%d achieved_bpp=%.6f\n", r.model_id,
              r.delta_beta.value, r.achieved_bpp);
  std::printf("relative_diff=%.4f validations=%zu met=%s\n", r.relative_diff,
              r.evaluations.size(), r.met_threshold ? "yes" : "no");
  if (!trace_path.empty()) {
    std::ofstream out(trace_path);
    if (!out)
      throw std::invalid_argument("cannot open output file " + trace_path);
    out << "delta_beta,bpp\n";
    char buf[64];
    for (const auto& [d, bpp] : r.evaluations) {
      std::snprintf(buf, sizeof buf, "%d,%.6f\n", d, bpp);
      out << buf;
    }
  }
  return r.met_threshold ? 0 : 4;
}

int cmd_rd_curve(const RunConfig& rc, const std::string& model_sel,
                 std::vector<int> grid, const std::string& out_path) {
  if (grid.empty())
    grid = default_delta_grid();
  for (int d : grid) require_delta_in_range(d, "--grid entry");

  std::vector<int> model_ids;
  if (model_sel == "all") {
    model_ids = {0, 1, 2, 3};
  } else {
    const int m = std::stoi(model_sel);
    if (m < 0 || m > 3) throw std::out_of_range("--model outside 0..3");
    model_ids = {m};
  }

  const auto suite = rc.suite();
  for (int m : model_ids) {
    const auto curve = rd_curve(suite[m], grid, rc.seed, rc.y_shape(),
                                rc.uv_shape());
    if (!out_path.empty()) {
      std::string path = out_path;
      if (model_ids.size() > 1) {
        const auto dot = path.rfind('.');
        const std::string suffix = "_m" + std::to_string(m);
        if (dot == std::string::npos)
          path += suffix;
        else
          path.insert(dot, suffix);
      }
      write_curve(path, curve);
    }
    for (const RdPoint& p : curve)
      std::printf("%.6f,%.3f\n", p.bpp, p.quality);
  }
  return 0;
}

int cmd_bd_rate(const std::string& anchor_path, const std::string& test_path) {
  const double pct = bd_rate(load_curve(anchor_path), load_curve(test_path));
  std::printf("%.2f%%\n", pct);
  return 0;
}

int cmd_roi_demo(const RunConfig& rc, int model_id,
                 const std::vector<int>& rect_vals, int roi_index,
                 int bg_index, std::optional<double> target, double max_diff) {
  if (rect_vals.size() != 4)
    throw std::invalid_argument("--roi-rect needs x,y,w,h");
  const RoiRect rect{rect_vals[0], rect_vals[1], rect_vals[2], rect_vals[3]};
  BrmConfig cfg;
  cfg.max_rate_diff = max_diff;

  RoiOutcome out = roi_demo(rc.seed, rc.y_shape(), rc.uv_shape(), rc.suite(),
                            model_id, rect, roi_index, bg_index, target, cfg);
  std::printf("encode,bpp,roi_mse,bg_mse\n");
  std::printf("base,%.6f,%.6f,%.6f\n", out.base.bpp, out.roi_mse_base,
              out.bg_mse_base);
  std::printf("mapped,%.6f,%.6f,%.6f\n", out.mapped.bpp, out.roi_mse_mapped,
              out.bg_mse_mapped);
  if (out.brm) {
    std::printf("brm: model_id=%d delta_beta=%d relative_diff=%.4f met=%s\n",
                out.brm->model_id, out.brm->delta_beta.value,
                out.brm->relative_diff, out.brm->met_threshold ? "yes" : "no");
    if (!out.brm->met_threshold) return 4;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"variable-rate control plane for a dual-stream latent codec"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value configuration file");

  RunConfig rc;

  auto* enc = app.add_subcommand("encode", "encode a seeded picture");
  add_run_options(enc, rc);
  int model_id = 0, delta_y = 0, delta_uv = 0;
  std::string map_path, out_path;
  enc->add_option("--model", model_id, "suite model 0..3")
      ->check(CLI::Range(0, 3));
  enc->add_option("--delta-beta-y", delta_y, "luma displacement");
  enc->add_option("--delta-beta-uv", delta_uv, "chroma displacement");
  enc->add_option("--spatial-map", map_path, "text grid of indices");
  enc->add_option("--out", out_path, "container output path");

  auto* dec = app.add_subcommand("decode", "decode a container");
  add_run_options(dec, rc);
  std::string in_path;
  dec->add_option("--model", model_id, "suite model 0..3")
      ->check(CLI::Range(0, 3));
  dec->add_option("--in", in_path, "container input path")->required();

  auto* mr = app.add_subcommand("match-rate", "search for a target rate");
  add_run_options(mr, rc);
  double target = 0.5, max_diff = 0.10;
  std::string trace_path;
  mr->add_option("--target-bpp", target, "rate target")
      ->required()
      ->check(CLI::PositiveNumber);
  mr->add_option("--max-diff", max_diff, "relative tolerance (0.10 or 0.01)")
      ->check(CLI::PositiveNumber);
  mr->add_option("--spatial-map", map_path, "text grid of indices");
  mr->add_option("--trace", trace_path, "validation trace CSV path");

  auto* rd = app.add_subcommand("rd-curve", "sweep rate-distortion points");
  add_run_options(rd, rc);
  std::string model_sel = "0";
  std::vector<int> grid;
  rd->add_option("--model", model_sel, "suite model 0..3 or 'all'");
  rd->add_option("--grid", grid, "displacement grid")->delimiter(',');
  rd->add_option("--out", out_path, "curve CSV path (_mN suffix for 'all')");

  auto* bd = app.add_subcommand("bd-rate", "compare two RD curves");
  std::string anchor_path, test_path;
  bd->add_option("--anchor", anchor_path, "anchor curve CSV")->required();
  bd->add_option("--test", test_path, "test curve CSV")->required();

  auto* roi = app.add_subcommand("roi-demo", "region-weighted allocation");
  add_run_options(roi, rc);
  std::vector<int> rect_vals;
  int roi_index = 3, bg_index = -3;
  double roi_target = 0.0;
  roi->add_option("--model", model_id, "suite model 0..3")
      ->check(CLI::Range(0, 3));
  roi->add_option("--roi-rect", rect_vals, "x,y,w,h in latent cells")
      ->required()
      ->delimiter(',');
  roi->add_option("--roi-index", roi_index, "index inside the rectangle");
  roi->add_option("--bg-index", bg_index, "index outside the rectangle");
  roi->add_option("--target-bpp", roi_target, "optional joint rate target");
  roi->add_option("--max-diff", max_diff, "relative tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (enc->parsed())
      return cmd_encode(rc, model_id, delta_y, delta_uv, map_path, out_path);
    if (dec->parsed()) return cmd_decode(rc, model_id, in_path);
    if (mr->parsed())
      return cmd_match_rate(rc, target, max_diff, map_path, trace_path);
    if (rd->parsed()) return cmd_rd_curve(rc, model_sel, grid, out_path);
    if (bd->parsed()) return cmd_bd_rate(anchor_path, test_path);
    if (roi->parsed())
      return cmd_roi_demo(rc, model_id, rect_vals, roi_index, bg_index,
                          roi_target > 0 ? std::optional<double>(roi_target)
                                         : std::nullopt,
                          max_diff);
  } catch (const StreamError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
