#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "orthoforge/dsm_fusion.hpp"
#include "orthoforge/error.hpp"
#include "orthoforge/geo.hpp"
#include "orthoforge/grid.hpp"
#include "orthoforge/point_cloud.hpp"
#include "orthoforge/rng.hpp"
#include "orthoforge/tiling.hpp"
#include "test_util.hpp"

using namespace orthoforge;

namespace {

const LocalFrame kFrame(32.0, -106.0);

GeoPoint pt(double x, double y, double h) {
  GeoPoint p;
  p.h = h;
  kFrame.to_geo(x, y, p.lat, p.lon);
  return p;
}

GridHeader header(int ncols, int nrows, double xll, double yll, double cs) {
  GridHeader h;
  h.ncols = ncols;
  h.nrows = nrows;
  h.xll = xll;
  h.yll = yll;
  h.cellsize = cs;
  return h;
}

// Reference for the per-cell reduction: keep the top_y largest heights,
// take their median, averaging the two middles when the kept count is even.
Grid oracle_bin(const std::vector<GeoPoint>& pts, const GridHeader& h,
                int top_y) {
  std::vector<std::vector<double>> cells(
      static_cast<std::size_t>(h.ncols) * h.nrows);
  for (const auto& p : pts) {
    double x, y;
    kFrame.to_local(p.lat, p.lon, x, y);
    int r, c;
    if (!h.cell_of(x, y, r, c)) continue;
    cells[static_cast<std::size_t>(r) * h.ncols + c].push_back(p.h);
  }
  Grid out = Grid::filled_nodata(h);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto& v = cells[i];
    if (v.empty()) continue;
    std::sort(v.begin(), v.end(), std::greater<double>());
    const std::size_t m = std::min<std::size_t>(v.size(), top_y);
    out.data()[i] =
        m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
  }
  return out;
}

bool grids_equal(const Grid& a, const Grid& b, double tol) {
  if (!a.header().same_layout(b.header())) return false;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    if (std::fabs(a.data()[i] - b.data()[i]) > tol) return false;
  return true;
}

}  // namespace

TEST_CASE("per-cell surface estimate keeps the largest heights") {
  const GridHeader h = header(3, 1, 0.0, 0.0, 10.0);
  std::vector<GeoPoint> pts;
  for (double v : {1.0, 2.0, 3.0, 4.0, 5.0}) pts.push_back(pt(5.0, 5.0, v));
  for (double v : {5.0, 4.0, 3.0, 2.0}) pts.push_back(pt(15.0, 5.0, v));
  pts.push_back(pt(25.0, 5.0, 7.0));

  const Grid g3 = bin_top_median(pts, kFrame, h, 3);
  CHECK(g3.at(0, 0) == 4.0);  // top 3 of {5,4,3,2,1}, median 4
  CHECK(g3.at(0, 1) == 4.0);  // top 3 of {5,4,3,2}
  CHECK(g3.at(0, 2) == 7.0);  // fewer points than the cap

  const Grid g4 = bin_top_median(pts, kFrame, h, 4);
  CHECK(g4.at(0, 0) == doctest::Approx(3.5));  // even kept count averages
  CHECK(g4.at(0, 1) == doctest::Approx(3.5));
}

TEST_CASE("surface binning matches the sort oracle on random clouds") {
  const GridHeader h = header(12, 10, -20.0, 30.0, 2.5);
  Rng rng(811);
  std::vector<GeoPoint> pts;
  for (int i = 0; i < 5000; ++i) {
    // some points deliberately outside the raster
    const double x = uniform_range(rng, -30.0, 20.0);
    const double y = uniform_range(rng, 20.0, 60.0);
    pts.push_back(pt(x, y, uniform_range(rng, -5.0, 40.0)));
  }
  for (int top_y : {1, 2, 3, 5, 9}) {
    const Grid got = bin_top_median(pts, kFrame, h, top_y);
    const Grid want = oracle_bin(pts, h, top_y);
    CHECK(grids_equal(got, want, 1e-12));
  }
}

TEST_CASE("parallel kernels agree with the serial reference") {
  const GridHeader h = header(40, 30, 0.0, 0.0, 1.0);
  Rng rng(271);
  std::vector<GeoPoint> pts;
  for (int i = 0; i < 20000; ++i)
    pts.push_back(pt(uniform_range(rng, 0.0, 40.0),
                     uniform_range(rng, 0.0, 30.0),
                     uniform_range(rng, 0.0, 25.0)));
  const Grid b_par = bin_top_median(pts, kFrame, h, 3, 4);
  const Grid b_ser = serial::bin_top_median(pts, kFrame, h, 3);
  CHECK(grids_equal(b_par, b_ser, 0.0));

  // punch holes so the fill stage has work
  Grid holed = b_ser;
  for (int i = 0; i < 200; ++i) {
    const int r = static_cast<int>(uniform_u64(rng, 30));
    const int c = static_cast<int>(uniform_u64(rng, 40));
    holed.at(r, c) = holed.nodata();
  }
  CHECK(grids_equal(median_filter(holed, 3, 4), serial::median_filter(holed, 3),
                    0.0));
  CHECK(grids_equal(fill_holes(holed, 4, 4), serial::fill_holes(holed, 4),
                    0.0));
}

TEST_CASE("median filter conventions") {
  const GridHeader h = header(3, 3, 0.0, 0.0, 1.0);
  Grid g(h, 0.0);
  // column-major values 1..9 with a nodata corner
  double v = 1.0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) g.at(r, c) = v++;
  g.at(0, 2) = g.nodata();

  CHECK_THROWS_AS(median_filter(g, 2), InvalidInput);
  const Grid same = median_filter(g, 1);
  CHECK(grids_equal(same, g, 0.0));

  const Grid f = median_filter(g, 3);
  CHECK(f.at(0, 2) == g.nodata());  // nodata cells are left alone
  // center window holds {1,2,4,5,6,7,8,9}, median 5.5
  CHECK(f.at(1, 1) == doctest::Approx(5.5));
  // corner window holds {1,2,4,5}
  CHECK(f.at(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("hole filling closes pockets up to the pass budget") {
  const GridHeader h = header(11, 11, 0.0, 0.0, 1.0);
  Grid g(h, 4.0);
  for (int r = 2; r <= 8; ++r)
    for (int c = 2; c <= 8; ++c) g.at(r, c) = g.nodata();

  // a 7x7 pocket shrinks one ring per pass: 7 -> 5 -> 3 -> 1 -> closed
  const Grid full = fill_holes(g, 4);
  int open = 0;
  for (double x : full.data())
    if (x == full.nodata()) ++open;
  CHECK(open == 0);
  CHECK(full.at(5, 5) == doctest::Approx(4.0));

  const Grid partial = fill_holes(g, 3);
  open = 0;
  for (double x : partial.data())
    if (x == partial.nodata()) ++open;
  CHECK(open == 1);
  CHECK(partial.at(5, 5) == partial.nodata());

  const Grid two = fill_holes(g, 2);
  open = 0;
  for (double x : two.data())
    if (x == two.nodata()) ++open;
  CHECK(open == 9);
}

namespace {

Tile make_tile(int row, int col, const RectM& core, double pad) {
  Tile t;
  t.row = row;
  t.col = col;
  t.core = core;
  t.padded = {core.x0 - pad, core.y0 - pad, core.x1 + pad, core.y1 + pad};
  return t;
}

Grid const_grid(const RectM& extent, double cs, double value) {
  GridHeader h = header(static_cast<int>(std::llround(extent.width() / cs)),
                        static_cast<int>(std::llround(extent.height() / cs)),
                        extent.x0, extent.y0, cs);
  return Grid(h, value);
}

}  // namespace

TEST_CASE("tile merge keeps each cell from its owning core") {
  const Tile ta = make_tile(0, 0, {0.0, 0.0, 10.0, 10.0}, 2.0);
  const Tile tb = make_tile(0, 1, {10.0, 0.0, 20.0, 10.0}, 2.0);
  Grid ga = const_grid(ta.padded, 1.0, 5.0);
  Grid gb = const_grid(tb.padded, 1.0, 7.0);
  // a hole inside a core must survive the merge
  int hr, hc;
  REQUIRE(ga.header().cell_of(3.5, 3.5, hr, hc));
  ga.at(hr, hc) = ga.nodata();

  const RectM aoi{0.0, 0.0, 20.0, 10.0};
  const Grid m = merge_tiles({ta, tb}, {ga, gb}, aoi);
  REQUIRE(m.ncols() == 20);
  REQUIRE(m.nrows() == 10);
  for (int r = 0; r < m.nrows(); ++r)
    for (int c = 0; c < m.ncols(); ++c) {
      const double x = m.header().x_center(c);
      const double y = m.header().y_center(r);
      if (x == 3.5 && y == 3.5)
        CHECK(m.at(r, c) == m.nodata());
      else
        CHECK(m.at(r, c) == (x < 10.0 ? 5.0 : 7.0));
    }
}

TEST_CASE("boundary disagreement reduces a constant offset exactly") {
  const Tile ta = make_tile(0, 0, {0.0, 0.0, 10.0, 10.0}, 2.0);
  const Tile tb = make_tile(0, 1, {10.0, 0.0, 20.0, 10.0}, 2.0);
  const Grid ga = const_grid(ta.padded, 1.0, 5.0);
  const Grid gb = const_grid(tb.padded, 1.0, 5.7);

  const BoundaryStats st = boundary_stats({ta, tb}, {ga, gb});
  REQUIRE(st.num_boundaries == 1);
  const BoundaryEntry& e = st.boundaries[0];
  CHECK(e.tile_a == "r0c0");
  CHECK(e.tile_b == "r0c1");
  CHECK(e.samples == 10);  // one sample per cell along the shared edge
  CHECK(e.median_abs_z == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(e.rms_z == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(st.median_abs_z == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("boundary disagreement covers horizontal edges too") {
  // row 0 is the northern tile
  const Tile ta = make_tile(0, 0, {0.0, 10.0, 10.0, 20.0}, 2.0);
  const Tile tb = make_tile(1, 0, {0.0, 0.0, 10.0, 10.0}, 2.0);
  const Grid ga = const_grid(ta.padded, 1.0, 3.0);
  const Grid gb = const_grid(tb.padded, 1.0, 2.6);

  const BoundaryStats st = boundary_stats({ta, tb}, {ga, gb});
  REQUIRE(st.num_boundaries == 1);
  CHECK(st.boundaries[0].samples == 10);
  CHECK(st.boundaries[0].median_abs_z == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("disparity triangulation matches closed-form geometry") {
  const double gsd = 2.0, tan_a = -0.4, tan_b = 0.35;
  const double s0a = 180.0, s0b = 150.0, l0a = 1700.5, l0b = 1710.5;
  const RpcCamera cam_a =
      testutil::affine_camera(kFrame, "a", tan_a, gsd, s0a, l0a);
  const RpcCamera cam_b =
      testutil::affine_camera(kFrame, "b", tan_b, gsd, s0b, l0b);

  DisparityMap d;
  d.pair_id = "p0";
  d.image_a = "a";
  d.image_b = "b";
  d.width = 8;
  d.height = 6;
  d.a_sample0 = 800.0;
  d.a_line0 = 600.0;
  d.b_sample0 = 700.0;
  d.b_line0 = l0b - l0a + d.a_line0;
  d.data.assign(static_cast<std::size_t>(d.width) * d.height, d.invalid);

  std::vector<std::array<double, 3>> truth;
  for (int r = 0; r < d.height; ++r)
    for (int c = 0; c < d.width; ++c) {
      if ((r == 0 && c == 0) || (r == 2 && c == 3)) continue;  // stay invalid
      const double sa = c + d.a_sample0;
      const double la = r + d.a_line0;
      const double y = (l0a - la) * gsd;
      const double z = 10.0 + 0.5 * r + 0.25 * c;
      const double x = (sa - s0a) * gsd - tan_a * z;
      const double sb = s0b + (x + tan_b * z) / gsd;
      d.data[static_cast<std::size_t>(r) * d.width + c] =
          sb - d.b_sample0 - c;
      truth.push_back({x, y, z});
    }

  const CloudResult res =
      disparity_to_cloud(d, cam_a, ImageBias{}, cam_b, ImageBias{}, 20.0);
  CHECK(res.dropped == 0);
  REQUIRE(res.points.size() == truth.size());  // row-major, invalids skipped
  for (std::size_t i = 0; i < truth.size(); ++i) {
    double x, y;
    kFrame.to_local(res.points[i].lat, res.points[i].lon, x, y);
    CHECK(x == doctest::Approx(truth[i][0]).epsilon(1e-6));
    CHECK(y == doctest::Approx(truth[i][1]).epsilon(1e-6));
    CHECK(res.points[i].h == doctest::Approx(truth[i][2]).epsilon(1e-6));
  }

  SUBCASE("degenerate pairs drop every pixel") {
    const CloudResult bad =
        disparity_to_cloud(d, cam_a, ImageBias{}, cam_a, ImageBias{}, 20.0);
    CHECK(bad.points.empty());
    CHECK(bad.dropped == static_cast<int>(truth.size()));
  }

  SUBCASE("disparity files round-trip through the sidecar") {
    const auto dir = testutil::scratch_dir("of_disp_io");
    const std::string path = (dir / "p0.asc").string();
    write_disparity(d, path);
    const DisparityMap back = read_disparity(path);
    CHECK(back.pair_id == d.pair_id);
    CHECK(back.image_a == d.image_a);
    CHECK(back.image_b == d.image_b);
    CHECK(back.width == d.width);
    CHECK(back.height == d.height);
    CHECK(back.a_sample0 == d.a_sample0);
    CHECK(back.a_line0 == d.a_line0);
    CHECK(back.b_sample0 == d.b_sample0);
    CHECK(back.b_line0 == d.b_line0);
    CHECK(back.data == d.data);
  }
}

TEST_CASE("tile fusion runs the three stages over the padded extent") {
  Rng rng(33);
  std::vector<GeoPoint> pts;
  // dense flat field with a pocket nothing samples
  for (int i = 0; i < 40000; ++i) {
    double x = uniform_range(rng, 0.0, 40.0);
    double y = uniform_range(rng, 0.0, 40.0);
    if (x > 18.0 && x < 22.0 && y > 18.0 && y < 22.0) continue;
    pts.push_back(pt(x, y, 12.0));
  }
  FusionConfig cfg;
  cfg.cellsize = 1.0;
  cfg.top_y = 3;
  cfg.median_window = 3;
  cfg.hole_max_radius = 4;
  const Grid g = fuse_clouds(pts, kFrame, {0.0, 0.0, 40.0, 40.0}, cfg);
  REQUIRE(g.ncols() == 40);
  REQUIRE(g.nrows() == 40);
  int open = 0;
  for (double v : g.data())
    if (v == g.nodata()) ++open;
  CHECK(open == 0);  // the 4-cell pocket closes within the pass budget
  CHECK(g.value_at(20.0, 20.0) == doctest::Approx(12.0));
}
