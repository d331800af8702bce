// Times the OpenMP kernels against their single-thread reference
// implementations on medium-sized inputs and checks that both sides produce
// the same result. Run with no arguments; wall times go to stdout.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "orthoforge/dsm_fusion.hpp"
#include "orthoforge/grid.hpp"
#include "orthoforge/labels.hpp"
#include "orthoforge/mv_fusion.hpp"
#include "orthoforge/ncc.hpp"
#include "orthoforge/rng.hpp"
#include "orthoforge/rpc.hpp"
#include "orthoforge/true_ortho.hpp"

using namespace orthoforge;

namespace {

const LocalFrame kFrame(32.0, -106.0);

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

bool grids_equal(const Grid& a, const Grid& b) {
  if (a.nrows() != b.nrows() || a.ncols() != b.ncols()) return false;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    if (a.data()[i] != b.data()[i]) return false;
  return true;
}

void report(const std::string& name, double serial_ms, double parallel_ms,
            bool same) {
  std::printf("%-18s serial %8.1f ms  parallel %8.1f ms  speedup %.2fx  %s\n",
              name.c_str(), serial_ms, parallel_ms,
              parallel_ms > 0.0 ? serial_ms / parallel_ms : 0.0,
              same ? "outputs match" : "OUTPUTS DIFFER");
}

// Affine stand-in camera, same mapping the test fixtures use.
RpcCamera bench_camera(double tan, double gsd, double s0, double l0) {
  RpcCamera c;
  c.image_id = "bench";
  double lat, lon;
  kFrame.to_geo(200.0, 200.0, lat, lon);
  c.lat_off = lat;
  c.lon_off = lon;
  c.lat_scale = 2000.0 / kFrame.meters_per_deg_lat();
  c.lon_scale = 2000.0 / kFrame.meters_per_deg_lon();
  c.height_off = 15.0;
  c.height_scale = 30.0;
  c.samp_off = s0 + 200.0 / gsd;
  c.samp_scale = 1000.0;
  c.line_off = l0 - 200.0 / gsd;
  c.line_scale = 1000.0;
  c.samp_den[0] = 1.0;
  c.line_den[0] = 1.0;
  c.samp_num[0] = tan * 15.0 / (1000.0 * gsd);
  c.samp_num[1] = 2.0 / gsd;
  c.samp_num[3] = tan * 30.0 / (1000.0 * gsd);
  c.line_num[2] = -2.0 / gsd;
  return c;
}

}  // namespace

int main() {
  Rng rng(31337);

  {
    GridHeader gh;
    gh.ncols = 1000;
    gh.nrows = 1000;
    gh.cellsize = 1.0;
    std::vector<GeoPoint> pts(2000000);
    for (auto& p : pts) {
      const double x = uniform_range(rng, 0.0, 1000.0);
      const double y = uniform_range(rng, 0.0, 1000.0);
      p.h = 10.0 + 5.0 * normal(rng);
      kFrame.to_geo(x, y, p.lat, p.lon);
    }
    auto t0 = std::chrono::steady_clock::now();
    const Grid s = serial::bin_top_median(pts, kFrame, gh, 3);
    const double ts = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    const Grid p = bin_top_median(pts, kFrame, gh, 3, 0);
    report("bin_top_median", ts, ms_since(t0), grids_equal(s, p));

    t0 = std::chrono::steady_clock::now();
    const Grid fs = serial::median_filter(s, 5);
    const double tfs = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    const Grid fp = median_filter(s, 5, 0);
    report("median_filter", tfs, ms_since(t0), grids_equal(fs, fp));
  }

  {
    GridHeader gh;
    gh.ncols = 400;
    gh.nrows = 400;
    gh.cellsize = 1.0;
    Grid dsm(gh, 0.0), dem(gh, 0.0);
    for (int r = 0; r < gh.nrows; ++r)
      for (int col = 0; col < gh.ncols; ++col)
        dsm.at(r, col) = 4.0 + 3.0 * std::sin(0.05 * r) * std::cos(0.07 * col);
    for (int r = 100; r < 160; ++r)
      for (int col = 120; col < 200; ++col) dsm.at(r, col) = 18.0;

    const RpcCamera cam = bench_camera(0.45, 1.0, 500.0, 900.0);
    ImagePatch patch;
    patch.image_id = "bench";
    patch.sample0 = 480;
    patch.line0 = 480;
    patch.width = 640;
    patch.height = 440;
    patch.data.assign(1, std::vector<double>(
                             static_cast<std::size_t>(640) * 440));
    for (auto& v : patch.data[0]) v = uniform_real(rng);

    OrthoConfig cfg;
    cfg.resolution = 1.0;
    auto t0 = std::chrono::steady_clock::now();
    const OrthoResult s =
        serial::true_orthorectify(patch, cam, {}, dsm, dem, kFrame, cfg);
    const double ts = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    const OrthoResult p =
        true_orthorectify(patch, cam, {}, dsm, dem, kFrame, cfg, 0);
    report("true_ortho", ts, ms_since(t0),
           grids_equal(s.mask, p.mask) && grids_equal(s.bands[0], p.bands[0]));
  }

  {
    GridHeader gh;
    gh.ncols = 256;
    gh.nrows = 256;
    gh.cellsize = 1.0;
    Grid ref(gh, 0.0);
    for (auto& v : ref.data()) v = normal(rng);
    Grid feat = Grid::filled_nodata(gh);
    for (int r = 0; r < 256; ++r)
      for (int col = 0; col < 256; ++col) {
        const int rr = r - 4, cc = col + 3;
        if (rr >= 0 && rr < 256 && cc >= 0 && cc < 256)
          feat.at(r, col) = ref.at(rr, cc);
      }
    auto t0 = std::chrono::steady_clock::now();
    const NccResult s = serial::ncc_align(feat, ref, 10);
    const double ts = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    const NccResult p = ncc_align(feat, ref, 10, 0);
    report("ncc_align", ts, ms_since(t0),
           s.dx == p.dx && s.dy == p.dy && s.score == p.score);
  }

  {
    std::vector<PredictionMap> views(4);
    const int h = 96, w = 96;
    for (int v = 0; v < 4; ++v) {
      views[v].view_id = "v" + std::to_string(v);
      views[v].height = h;
      views[v].width = w;
      views[v].scores.resize(static_cast<std::size_t>(kNumClasses) * h * w);
      views[v].visible.assign(static_cast<std::size_t>(h) * w, 1);
      for (auto& sc : views[v].scores) sc = normal(rng);
    }
    const ViewStack stack =
        assemble_stack(views, 4, ViewStack::Layout::PER_CLASS_VIEWS);
    const FusionWeights fw =
        FusionWeights::uniform(ViewStack::Layout::PER_CLASS_VIEWS, 4,
                               kNumClasses);
    GroundTruthWindow gt;
    gt.height = h;
    gt.width = w;
    gt.labels.resize(static_cast<std::size_t>(h) * w);
    for (auto& l : gt.labels)
      l = static_cast<std::uint8_t>(uniform_u64(rng, kNumClasses));
    const LossConfig cfg;

    auto t0 = std::chrono::steady_clock::now();
    const LossResult s = serial::total_loss(stack, fw, gt, cfg);
    const double ts = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    const LossResult p = total_loss(stack, fw, gt, cfg, 0);
    bool same = s.total == p.total && s.sv == p.sv && s.mv == p.mv;
    for (std::size_t i = 0; i < s.grad_data.size() && same; ++i)
      same = s.grad_data[i] == p.grad_data[i];
    report("total_loss", ts, ms_since(t0), same);
  }

  return 0;
}
