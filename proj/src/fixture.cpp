#include "orthoforge/fixture.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "orthoforge/error.hpp"
#include "orthoforge/geo.hpp"
#include "orthoforge/grid.hpp"
#include "orthoforge/manifest.hpp"
#include "orthoforge/point_cloud.hpp"
#include "orthoforge/rpc.hpp"
#include "orthoforge/textio.hpp"
#include "orthoforge/tie_points.hpp"
#include "orthoforge/tiling.hpp"
#include "orthoforge/true_ortho.hpp"
#include "orthoforge/vectors.hpp"

namespace orthoforge {
namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// World model. Local-plane meters; x east, y north, z up.

constexpr double kAnchorLat = 32.0;
constexpr double kAnchorLon = -106.0;
constexpr double kAoiM = 3000.0;
constexpr double kCellM = 2.0;

// Smooth bare terrain. Slope never exceeds ~0.012, which keeps the ground
// intersection of a tilted view ray a strong contraction (see cast()).
double dem_z(double x, double y) {
  return 20.0 + 8.0 * std::sin(x / 700.0) * std::cos(y / 900.0);
}

// Flat-roofed blocks (x0, y0, dx, dy, height above local terrain). Every
// edge sits on an even meter coordinate so 2 m cell centers (odd
// coordinates) never land exactly on one. All blocks keep >= 50 m clear of
// the road strips; the longest occlusion shadow at tan 0.45 and 13 m height
// is under 6 m, so roads stay unshadowed in every view.
struct Box {
  double x0, y0, dx, dy, h;
  double z_top = 0.0;
};

constexpr int kNumBoxes = 14;
const double kBoxTable[kNumBoxes][5] = {
    {120, 240, 60, 80, 10},   {400, 600, 80, 60, 12},
    {1000, 300, 70, 70, 9},   {1500, 700, 90, 50, 11},
    {2100, 200, 60, 60, 13},  {2600, 500, 80, 80, 10},
    {300, 1700, 70, 90, 12},  {900, 2000, 60, 70, 10},
    {1600, 1800, 80, 60, 9},  {2150, 1700, 90, 90, 11},
    {2700, 2200, 60, 80, 13}, {500, 2600, 80, 60, 10},
    {1200, 2700, 70, 80, 12}, {2000, 2500, 60, 60, 9}};

// Axis-parallel road strips, 16 m wide, overshooting the AOI on both ends.
struct Road {
  bool vertical;
  double c;  // centerline x (vertical) or y (horizontal)
};
constexpr double kRoadHalfWidth = 8.0;
constexpr double kRoadLo = -200.0;
constexpr double kRoadHi = 3200.0;
const Road kRoads[3] = {{true, 820.0}, {true, 2300.0}, {false, 1480.0}};

bool on_road(double x, double y) {
  for (const Road& r : kRoads) {
    const double along = r.vertical ? y : x;
    const double across = r.vertical ? x - r.c : y - r.c;
    if (std::fabs(across) <= kRoadHalfWidth && along >= kRoadLo &&
        along <= kRoadHi)
      return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Cameras. Four views tilted only in the east-west plane:
//   sample = 180 + (x + tan * z) / 2 + d_s
//   line   = 1700.5 - y / 2        + d_l
// A shared line equation across views means epipolar lines are image rows
// and stereo disparity is horizontal, which is what the disparity grids
// assume. gsd is 2 m, matching the output cell size. The half-cell line
// base together with whole-pixel line biases puts every output cell center
// exactly on a patch line center, so the nearest-neighbor ortho lookup is
// lattice-exact in the line direction instead of sitting on a rounding tie.

constexpr int kNumImages = 4;
const double kTanTilt[kNumImages] = {-0.45, -0.18, 0.18, 0.45};
constexpr double kSampBase = 180.0;
constexpr double kLineBase = 1700.5;

// Shared patch window, generous enough for the AOI plus tile padding at
// every view angle.
constexpr int kPatchSample0 = -10;
constexpr int kPatchLine0 = 20;
constexpr int kPatchWidth = 1880;
constexpr int kPatchHeight = 1860;

std::string image_id(int i) { return "img0" + fmt_int(i); }

struct PairDef {
  const char* id;
  int a, b;
};
constexpr int kNumPairs = 3;
const PairDef kPairs[kNumPairs] = {{"p00", 0, 3}, {"p01", 1, 2}, {"p02", 0, 2}};

// Surface intensities: background 10, road 50, roof and wall 90 in the
// red-edge band. The coastal band copies it except on road asphalt (20),
// so the band ratio (b0-b1)/(b0+b1) is 0.43 on roads and 0 elsewhere.
void shade(double x, double y, bool built, double& b0, double& b1) {
  if (built) {
    b0 = 90.0;
    b1 = 90.0;
  } else if (on_road(x, y)) {
    b0 = 50.0;
    b1 = 20.0;
  } else {
    b0 = 10.0;
    b1 = 10.0;
  }
}

struct World {
  std::array<Box, kNumBoxes> boxes;
  std::array<ImageBias, kNumImages> bias;

  World() {
    for (int i = 0; i < kNumBoxes; ++i) {
      Box& b = boxes[i];
      b.x0 = kBoxTable[i][0];
      b.y0 = kBoxTable[i][1];
      b.dx = kBoxTable[i][2];
      b.dy = kBoxTable[i][3];
      b.h = kBoxTable[i][4];
      b.z_top = dem_z(b.x0 + 0.5 * b.dx, b.y0 + 0.5 * b.dy) + b.h;
    }

    // Hand-picked per-image offsets of a few pixels, then projected off the
    // null space of the adjustment problem. A common sample shift, a common
    // line shift, and a sample shift proportional to tan(tilt) are each
    // indistinguishable from moving every ground point, so only the
    // remainder is recoverable and only the remainder is injected.
    double ds[kNumImages] = {4.0, -5.0, 3.5, -2.5};
    double dl[kNumImages] = {-3.0, 2.0, 5.0, -4.0};
    double mean_s = 0.0, mean_l = 0.0, dot_t = 0.0, norm_t = 0.0;
    for (int i = 0; i < kNumImages; ++i) {
      mean_s += ds[i] / kNumImages;
      mean_l += dl[i] / kNumImages;
      norm_t += kTanTilt[i] * kTanTilt[i];
    }
    for (int i = 0; i < kNumImages; ++i) dot_t += (ds[i] - mean_s) * kTanTilt[i];
    for (int i = 0; i < kNumImages; ++i) {
      bias[i].d_sample = ds[i] - mean_s - dot_t / norm_t * kTanTilt[i];
      bias[i].d_line = dl[i] - mean_l;
    }
  }

  PixelCoord project(int img, double x, double y, double z) const {
    return {kSampBase + 0.5 * (x + kTanTilt[img] * z) + bias[img].d_sample,
            kLineBase - 0.5 * y + bias[img].d_line};
  }

  struct Hit {
    double x = 0.0, y = 0.0, z = 0.0;
    bool built = false;  // roof or wall
  };

  // First surface met by the view ray through pixel (s, l), found as the
  // highest-z intersection; the ray tilts only in x, so candidates are the
  // terrain, each roof plane, and each wall plane in the y slab of a block.
  Hit cast(int img, double s, double l) const {
    const double tan = kTanTilt[img];
    const double y = 2.0 * (kLineBase + bias[img].d_line - l);
    const double xray = 2.0 * (s - kSampBase - bias[img].d_sample);

    // x = xray - tan * z; terrain height feeds back with factor
    // |tan * dz/dx| < 0.006, four sweeps land far below millimeters
    double xg = xray - tan * 24.0;
    for (int it = 0; it < 4; ++it) xg = xray - tan * dem_z(xg, y);
    Hit best{xg, y, dem_z(xg, y), false};

    for (const Box& b : boxes) {
      if (y < b.y0 || y > b.y0 + b.dy) continue;
      const double xr = xray - tan * b.z_top;
      if (xr >= b.x0 && xr <= b.x0 + b.dx && b.z_top > best.z)
        best = {xr, y, b.z_top, true};
      if (std::fabs(tan) < 1e-12) continue;
      for (const double xw : {b.x0, b.x0 + b.dx}) {
        const double zw = (xray - xw) / tan;
        // quarter-meter slack below the local terrain absorbs the slope
        // between the wall base and the interior ground point
        if (zw <= b.z_top && zw >= dem_z(xw, y) - 0.25 && zw > best.z)
          best = {xw, y, zw, true};
      }
    }
    return best;
  }
};

// ---------------------------------------------------------------------------
// Deterministic draws. Distribution adapters in <random> are not pinned by
// the standard, so uniform and gaussian values are derived from raw engine
// output directly.

double u01(std::mt19937_64& g) { return (g() >> 11) * 0x1.0p-53; }

double gauss(std::mt19937_64& g) {
  const double u1 = std::max(u01(g), 1e-300);
  const double u2 = u01(g);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(6.283185307179586 * u2);
}

// ---------------------------------------------------------------------------
// Artifact builders.

RpcCamera make_rpc(const LocalFrame& frame, int img) {
  RpcCamera c;
  c.image_id = image_id(img);

  double lat_c = 0.0, lon_c = 0.0;
  frame.to_geo(0.5 * kAoiM, 0.5 * kAoiM, lat_c, lon_c);
  c.lat_off = lat_c;
  c.lon_off = lon_c;
  // +-2000 m of normalized range puts the AOI plus padding well inside the
  // +-1.5 validity box
  c.lat_scale = 2000.0 / frame.meters_per_deg_lat();
  c.lon_scale = 2000.0 / frame.meters_per_deg_lon();
  c.height_off = 30.0;
  c.height_scale = 60.0;
  c.samp_off = 930.0;
  c.samp_scale = 1000.0;
  c.line_off = 950.0;
  c.line_scale = 1000.0;

  // The affine camera written as a degenerate rational cubic: denominators
  // are 1 and only the constant, L, P and H numerator terms are set. With
  // L = (x-1500)/2000 and H = (z-30)/60 this reduces exactly to
  // sample = 180 + (x + tan*z)/2 and line = 1700.5 - y/2.
  const double tan = kTanTilt[img];
  c.samp_den[0] = 1.0;
  c.line_den[0] = 1.0;
  c.samp_num[0] = 0.015 * tan;
  c.samp_num[1] = 1.0;          // L term
  c.samp_num[3] = 0.03 * tan;   // H term
  c.line_num[0] = 0.0005;       // the half-pixel part of the line base
  c.line_num[2] = -1.0;         // P term
  return c;
}

ImagePatch render_patch(const World& w, int img) {
  ImagePatch p;
  p.image_id = image_id(img);
  p.sample0 = kPatchSample0;
  p.line0 = kPatchLine0;
  p.width = kPatchWidth;
  p.height = kPatchHeight;
  p.nbands = 2;
  const std::size_t n =
      static_cast<std::size_t>(kPatchWidth) * kPatchHeight;
  p.data.assign(2, std::vector<double>(n, 0.0));

  for (int r = 0; r < kPatchHeight; ++r) {
    for (int c = 0; c < kPatchWidth; ++c) {
      const World::Hit h =
          w.cast(img, kPatchSample0 + c, kPatchLine0 + r);
      double b0 = 0.0, b1 = 0.0;
      shade(h.x, h.y, h.built, b0, b1);
      const std::size_t at = static_cast<std::size_t>(r) * kPatchWidth + c;
      p.data[0][at] = b0;
      p.data[1][at] = b1;
    }
  }
  return p;
}

bool in_patch(double s, double l) {
  return s >= kPatchSample0 && s <= kPatchSample0 + kPatchWidth - 1 &&
         l >= kPatchLine0 && l <= kPatchLine0 + kPatchHeight - 1;
}

// One stereo grid per (tile, pair) over the image-a pixels seeing the tile
// core plus a 24 m apron (enough for the DSM filter and hole-fill support
// beyond the core edge). A pixel carries a disparity when its parity slot
// matches the pair, the surface point is unoccluded in image b, and the
// match lands inside patch b.
DisparityMap make_disparity(const World& w, const Tile& t, int pair_idx,
                            std::mt19937_64& rng) {
  const PairDef& pd = kPairs[pair_idx];
  const double x0 = t.core.x0 - 24.0, x1 = t.core.x1 + 24.0;
  const double y0 = t.core.y0 - 24.0, y1 = t.core.y1 + 24.0;
  const double tan_a = kTanTilt[pd.a];

  double smin = 1e30, smax = -1e30;
  for (const double x : {x0, x1})
    for (const double z : {8.0, 45.0}) {
      const double s = kSampBase + 0.5 * (x + tan_a * z) +
                       w.bias[pd.a].d_sample;
      smin = std::min(smin, s);
      smax = std::max(smax, s);
    }
  double lmin = 1e30, lmax = -1e30;
  for (const double y : {y0, y1}) {
    const double l = kLineBase - 0.5 * y + w.bias[pd.a].d_line;
    lmin = std::min(lmin, l);
    lmax = std::max(lmax, l);
  }
  const int s0 = std::max(kPatchSample0, (int)std::floor(smin) - 2);
  const int s1 = std::min(kPatchSample0 + kPatchWidth - 1,
                          (int)std::ceil(smax) + 2);
  const int l0 = std::max(kPatchLine0, (int)std::floor(lmin) - 2);
  const int l1 = std::min(kPatchLine0 + kPatchHeight - 1,
                          (int)std::ceil(lmax) + 2);

  DisparityMap d;
  d.pair_id = pd.id;
  d.image_a = image_id(pd.a);
  d.image_b = image_id(pd.b);
  d.width = s1 - s0 + 1;
  d.height = l1 - l0 + 1;
  d.a_sample0 = s0;
  d.a_line0 = l0;
  d.b_sample0 = s0;
  d.b_line0 = l0 + (w.bias[pd.b].d_line - w.bias[pd.a].d_line);
  d.data.assign(static_cast<std::size_t>(d.width) * d.height, d.invalid);

  for (int r = 0; r < d.height; ++r) {
    for (int c = 0; c < d.width; ++c) {
      if ((r + c) % 2 != pair_idx % 2) continue;
      const World::Hit h = w.cast(pd.a, s0 + c, l0 + r);
      const PixelCoord pb = w.project(pd.b, h.x, h.y, h.z);
      if (!in_patch(pb.sample, pb.line)) continue;
      const World::Hit hb = w.cast(pd.b, pb.sample, pb.line);
      if (std::fabs(hb.z - h.z) > 0.3 || std::fabs(hb.x - h.x) > 0.6)
        continue;  // occluded in image b
      d.data[static_cast<std::size_t>(r) * d.width + c] =
          pb.sample - (c + d.b_sample0) + 0.01 * gauss(rng);
    }
  }
  return d;
}

bool near_box(const World& w, double x, double y, double margin) {
  for (const Box& b : w.boxes)
    if (x >= b.x0 - margin && x <= b.x0 + b.dx + margin &&
        y >= b.y0 - margin && y <= b.y0 + b.dy + margin)
      return true;
  return false;
}

// Well-distributed ground features seen by all four views; 30 m of
// clearance from the blocks keeps every observation unoccluded.
std::vector<TieObservation> make_tie_points(const World& w,
                                            std::mt19937_64& rng) {
  std::vector<TieObservation> obs;
  const int tracks = 150;
  for (int t = 0; t < tracks; ++t) {
    double x = 0.0, y = 0.0;
    do {
      x = 60.0 + u01(rng) * (kAoiM - 120.0);
      y = 60.0 + u01(rng) * (kAoiM - 120.0);
    } while (near_box(w, x, y, 30.0));
    const double z = dem_z(x, y);
    for (int i = 0; i < kNumImages; ++i) {
      const PixelCoord px = w.project(i, x, y, z);
      TieObservation o;
      o.image_id = image_id(i);
      o.pixel = {px.sample + 0.02 * gauss(rng), px.line + 0.02 * gauss(rng)};
      o.track_id = t;
      obs.push_back(o);
    }
  }
  return obs;
}

VectorLayer make_vectors(const LocalFrame& frame) {
  // Centerlines carry a deliberate (-6, +4) m misregistration; the raster
  // alignment step must recover (+3, +2) cells at 2 m and undo it.
  const double shift_x = -6.0, shift_y = 4.0;
  VectorLayer layer;
  for (int k = 0; k < 3; ++k) {
    const Road& r = kRoads[k];
    VectorFeature f;
    f.id = "road0" + fmt_int(k);
    f.cls = LabelClass::ROAD;
    f.is_polygon = false;
    for (int i = 0; i <= 4; ++i) {
      const double a = kRoadLo + i * 850.0;
      const double x = (r.vertical ? r.c : a) + shift_x;
      const double y = (r.vertical ? a : r.c) + shift_y;
      double lat = 0.0, lon = 0.0;
      frame.to_geo(x, y, lat, lon);
      f.points.push_back({lon, lat});
    }
    layer.features.push_back(f);
  }
  return layer;
}

Grid make_dem_grid() {
  GridHeader h;
  h.ncols = 364;
  h.nrows = 364;
  h.xll = -320.0;
  h.yll = -320.0;
  h.cellsize = 10.0;
  Grid g(h, h.nodata);
  for (int r = 0; r < h.nrows; ++r)
    for (int c = 0; c < h.ncols; ++c)
      g.at(r, c) = dem_z(h.x_center(c), h.y_center(r));
  return g;
}

Grid make_truth_labels(const World& w) {
  GridHeader h;
  h.ncols = (int)(kAoiM / kCellM);
  h.nrows = (int)(kAoiM / kCellM);
  h.xll = 0.0;
  h.yll = 0.0;
  h.cellsize = kCellM;
  Grid g(h, 0.0);
  for (int r = 0; r < h.nrows; ++r) {
    for (int c = 0; c < h.ncols; ++c) {
      const double x = h.x_center(c), y = h.y_center(r);
      bool built = false;
      for (const Box& b : w.boxes)
        if (x > b.x0 && x < b.x0 + b.dx && y > b.y0 && y < b.y0 + b.dy) {
          built = true;
          break;
        }
      if (built)
        g.at(r, c) = (double)(int)LabelClass::BUILDING;
      else if (on_road(x, y))
        g.at(r, c) = (double)(int)LabelClass::ROAD;
    }
  }
  return g;
}

Manifest make_manifest(const std::string& dir) {
  Manifest m;
  m.set("project", "name", "boxworld");

  m.set("aoi", "lat0", fmt_double(kAnchorLat));
  m.set("aoi", "lon0", fmt_double(kAnchorLon));
  m.set("aoi", "x0", "0");
  m.set("aoi", "y0", "0");
  m.set("aoi", "x1", fmt_double(kAoiM));
  m.set("aoi", "y1", fmt_double(kAoiM));

  std::string ids = image_id(0);
  for (int i = 1; i < kNumImages; ++i) ids += "," + image_id(i);
  m.set("images", "ids", ids);
  m.set("images", "rpc_dir", "input/rpc");
  m.set("images", "patch_dir", "input/patch");

  m.set("inputs", "dem", "input/dem.asc");
  m.set("inputs", "pairs", "input/pairs.csv");
  m.set("inputs", "tie_points", "input/tie_points.csv");
  m.set("inputs", "vectors", "input/vectors.geojson");
  m.set("inputs", "truth_labels", "input/truth_labels.asc");
  m.set("inputs", "plan", "input/plan.txt");
  m.set("inputs", "disparity_dir", "input/disp");

  m.set("params", "resolution", fmt_double(kCellM));
  m.set("params", "tile_m", "1000");
  m.set("params", "pad_m", "300");
  m.set("params", "h_init", "20");
  m.set("params", "top_y", "3");
  m.set("params", "filter_window", "3");
  m.set("params", "fill_radius", "11");
  m.set("params", "h_step", "1");
  m.set("params", "gamma", "1");
  m.set("params", "interp", "nearest");
  m.set("params", "min_building_height", "2");
  m.set("params", "road_width", "16");
  m.set("params", "ncc_radius", "6");
  m.set("params", "window", "32");
  m.set("params", "windows", "24");
  m.set("params", "subset_size", "4");
  m.set("params", "alpha", "1");
  m.set("params", "beta", "1");
  m.set("params", "layout", "A");
  m.set("params", "lr", "0.05");
  m.set("params", "epochs", "20");
  m.set("params", "iou_slack", "0.05");
  m.set("params", "seed", "17");

  m.set("stage.partition", "tiles", "work/tiles.csv");
  m.set("stage.align", "biases", "work/biases.csv");
  m.set("stage.align", "quality", "work/tie_quality.txt");
  m.set("stage.align", "report", "work/align_report.txt");
  m.set("stage.dsm", "tile_dir", "work/dsm_tiles");
  m.set("stage.dsm", "dsm", "work/dsm.asc");
  m.set("stage.dsm", "report", "work/dsm_report.txt");
  m.set("stage.ortho", "dir", "work/ortho");
  m.set("stage.ortho", "report", "work/ortho_report.txt");
  m.set("stage.labels", "labels", "work/labels.asc");
  m.set("stage.labels", "views_dir", "work/views");
  m.set("stage.labels", "report", "work/labels_report.txt");
  m.set("stage.windows", "windows", "work/windows.csv");
  m.set("stage.windows", "report", "work/windows_report.txt");
  m.set("stage.fuse-train", "weights", "work/fusion_weights.csv");
  m.set("stage.fuse-train", "report", "work/fuse_train_report.txt");
  m.set("stage.vote", "vote", "work/vote.asc");
  m.set("stage.vote", "report", "work/vote_report.txt");
  m.set("stage.schedule-sim", "timeline", "work/timeline.csv");
  m.set("stage.schedule-sim", "report", "work/schedule_report.txt");
  m.set("stage.validate", "report", "work/validate_report.txt");

  m.set("truth", "expected_dx", "3");
  m.set("truth", "expected_dy", "2");
  m.set("truth", "biases", "input/truth_biases.csv");

  m.set_origin_dir(dir);
  return m;
}

}  // namespace

std::string make_fixture(const FixtureOptions& opt) {
  if (opt.dir.empty()) throw InvalidInput("fixture directory not set");
  fs::create_directories(opt.dir + "/input/rpc");
  fs::create_directories(opt.dir + "/input/patch");
  fs::create_directories(opt.dir + "/input/disp");

  const LocalFrame frame(kAnchorLat, kAnchorLon);
  const World w;

  for (int i = 0; i < kNumImages; ++i) {
    write_rpc_file(make_rpc(frame, i),
                   opt.dir + "/input/rpc/" + image_id(i) + ".rpc");
    write_patch(render_patch(w, i),
                opt.dir + "/input/patch/" + image_id(i) + ".asc");
  }

  BiasTable truth_biases;
  for (int i = 0; i < kNumImages; ++i) {
    truth_biases.image_ids.push_back(image_id(i));
    truth_biases.biases.push_back(w.bias[i]);
  }
  write_bias_csv(truth_biases, opt.dir + "/input/truth_biases.csv");

  const RectM aoi{0.0, 0.0, kAoiM, kAoiM};
  const std::vector<Tile> tiles = partition_aoi(aoi, TilingConfig{});
  for (std::size_t ti = 0; ti < tiles.size(); ++ti) {
    for (int pi = 0; pi < kNumPairs; ++pi) {
      std::mt19937_64 rng(opt.seed * 1000003ULL +
                          static_cast<std::uint64_t>(ti) * 131ULL + pi);
      const DisparityMap d = make_disparity(w, tiles[ti], pi, rng);
      write_disparity(d, opt.dir + "/input/disp/" + tiles[ti].id() + "_" +
                             kPairs[pi].id + ".asc");
    }
  }

  std::mt19937_64 rng(opt.seed);
  write_tie_points_csv(make_tie_points(w, rng),
                       opt.dir + "/input/tie_points.csv");

  write_geojson(make_vectors(frame), opt.dir + "/input/vectors.geojson");
  write_ascii_grid(make_dem_grid(), opt.dir + "/input/dem.asc");
  write_ascii_grid(make_truth_labels(w), opt.dir + "/input/truth_labels.asc");

  std::string pairs_csv = "pair_id,image_a,image_b\n";
  for (const PairDef& pd : kPairs)
    pairs_csv += std::string(pd.id) + "," + image_id(pd.a) + "," +
                 image_id(pd.b) + "\n";
  write_text_file(opt.dir + "/input/pairs.csv", pairs_csv);

  write_text_file(opt.dir + "/input/plan.txt",
                  "tiles = 100\n"
                  "pairs_per_tile = 80\n"
                  "pair_minutes = 20\n"
                  "fusion_minutes = 60\n"
                  "failure_prob = 0\n"
                  "seed = 0\n"
                  "vms = 10\n"
                  "large_vms = 0\n");

  const std::string manifest_path = opt.dir + "/manifest.txt";
  make_manifest(opt.dir).write(manifest_path);
  return manifest_path;
}

}  // namespace orthoforge
