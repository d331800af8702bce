#include "orthoforge/labels.hpp"

#include <algorithm>
#include <cmath>

#include "orthoforge/error.hpp"
#include "orthoforge/parallel.hpp"
#include "orthoforge/rng.hpp"

namespace orthoforge {

namespace {

// Features in local meters with a bounding box, ready for cell tests.
struct LocalPoly {
  LabelClass cls;
  std::vector<std::array<double, 2>> ring;
  double x0, y0, x1, y1;
};

std::vector<LocalPoly> localize(const VectorLayer& layer,
                                const LocalFrame& frame) {
  std::vector<LocalPoly> out;
  for (const auto& f : layer.features) {
    if (!f.is_polygon)
      throw InvalidInput("rasterize expects polygons; buffer roads first");
    LocalPoly p;
    p.cls = f.cls;
    p.x0 = p.y0 = 1e300;
    p.x1 = p.y1 = -1e300;
    for (const auto& ll : f.points) {
      double x, y;
      frame.to_local(ll[1], ll[0], x, y);
      p.ring.push_back({x, y});
      p.x0 = std::min(p.x0, x);
      p.x1 = std::max(p.x1, x);
      p.y0 = std::min(p.y0, y);
      p.y1 = std::max(p.y1, y);
    }
    out.push_back(std::move(p));
  }
  return out;
}

void rasterize_rows(const std::vector<LocalPoly>& polys,
                    const GridHeader& header, Grid& out, int row_begin,
                    int row_end) {
  for (int r = row_begin; r < row_end; ++r) {
    const double y = header.y_center(r);
    for (const auto& p : polys) {
      if (y < p.y0 || y > p.y1) continue;
      for (int c = 0; c < header.ncols; ++c) {
        const double x = header.x_center(c);
        if (x < p.x0 || x > p.x1) continue;
        if (!point_in_ring(p.ring, x, y)) continue;
        double& cell = out.at(r, c);
        // building beats road beats background
        cell = std::max(cell, static_cast<double>(static_cast<int>(p.cls)));
      }
    }
  }
}

}  // namespace

Grid rasterize_labels(const VectorLayer& layer, const LocalFrame& frame,
                      const GridHeader& header, int workers) {
  const auto polys = localize(layer, frame);
  Grid out(header, static_cast<double>(static_cast<int>(
                       LabelClass::BACKGROUND)));
  const int nw = resolve_workers(workers);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nw)
#endif
  for (int r = 0; r < header.nrows; ++r)
    rasterize_rows(polys, header, out, r, r + 1);
  (void)nw;
  return out;
}

namespace serial {
Grid rasterize_labels(const VectorLayer& layer, const LocalFrame& frame,
                      const GridHeader& header) {
  const auto polys = localize(layer, frame);
  Grid out(header, 0.0);
  rasterize_rows(polys, header, out, 0, header.nrows);
  return out;
}
}  // namespace serial

Grid building_footprints(const Grid& dsm, const Grid& dem,
                         double min_height_m) {
  if (!dsm.header().same_layout(dem.header()))
    throw InvalidInput("building_footprints: dsm/dem grids do not align");
  Grid out(dsm.header(), 0.0);
  for (int r = 0; r < dsm.nrows(); ++r)
    for (int c = 0; c < dsm.ncols(); ++c) {
      if (!dsm.valid(r, c) || !dem.valid(r, c)) continue;
      if (dsm.at(r, c) - dem.at(r, c) > min_height_m) out.at(r, c) = 1.0;
    }
  return out;
}

Grid nhfd(const Grid& red_edge, const Grid& coastal) {
  if (red_edge.nrows() != coastal.nrows() ||
      red_edge.ncols() != coastal.ncols())
    throw InvalidInput("nhfd: band dimensions differ");
  Grid out = Grid::filled_nodata(red_edge.header());
  for (int r = 0; r < red_edge.nrows(); ++r)
    for (int c = 0; c < red_edge.ncols(); ++c) {
      if (!red_edge.valid(r, c) || !coastal.valid(r, c)) continue;
      const double re = red_edge.at(r, c);
      const double co = coastal.at(r, c);
      const double denom = re + co;
      if (denom < 1e-6) continue;  // stays nodata
      out.at(r, c) = (re - co) / denom;
    }
  return out;
}

Grid class_mask(const Grid& labels, LabelClass cls) {
  Grid out(labels.header(), 0.0);
  const double target = static_cast<double>(static_cast<int>(cls));
  for (int r = 0; r < labels.nrows(); ++r)
    for (int c = 0; c < labels.ncols(); ++c)
      if (labels.valid(r, c) && labels.at(r, c) == target)
        out.at(r, c) = 1.0;
  return out;
}

PixelPolygon project_polygon_offnadir(
    const std::vector<std::array<double, 2>>& ring_lonlat, const Grid& dsm,
    const LocalFrame& frame, const RpcCamera& cam, const ImageBias& bias,
    int image_width, int image_height) {
  if (ring_lonlat.size() < 4 || ring_lonlat.front() != ring_lonlat.back())
    throw InvalidInput("project_polygon_offnadir: ring must be closed");

  double dsm_floor = 1e300;
  for (double v : dsm.data())
    if (v != dsm.nodata()) dsm_floor = std::min(dsm_floor, v);
  if (dsm_floor == 1e300) dsm_floor = 0.0;

  PixelPolygon out;
  bool any_inside = false;
  for (const auto& ll : ring_lonlat) {
    double x, y;
    frame.to_local(ll[1], ll[0], x, y);
    GeoPoint p;
    p.lat = ll[1];
    p.lon = ll[0];
    const double h = dsm.value_at(x, y);
    p.h = h == dsm.nodata() ? dsm_floor : h;
    const PixelCoord px = rpc_project(cam, bias, p);
    out.ring.push_back(px);
    if (px.sample >= 0 && px.sample < image_width && px.line >= 0 &&
        px.line < image_height)
      any_inside = true;
  }
  if (!any_inside) return {};

  double smin = 1e300, smax = -1e300, lmin = 1e300, lmax = -1e300;
  for (const auto& px : out.ring) {
    smin = std::min(smin, px.sample);
    smax = std::max(smax, px.sample);
    lmin = std::min(lmin, px.line);
    lmax = std::max(lmax, px.line);
  }
  out.sample0 = std::max(0, static_cast<int>(std::floor(smin)));
  out.line0 = std::max(0, static_cast<int>(std::floor(lmin)));
  const int s1 = std::min(image_width - 1, static_cast<int>(std::ceil(smax)));
  const int l1 = std::min(image_height - 1, static_cast<int>(std::ceil(lmax)));
  out.width = std::max(0, s1 - out.sample0 + 1);
  out.height = std::max(0, l1 - out.line0 + 1);

  std::vector<std::array<double, 2>> ring;
  for (const auto& px : out.ring) ring.push_back({px.sample, px.line});
  out.mask.assign(static_cast<std::size_t>(out.width) * out.height, 0);
  for (int l = 0; l < out.height; ++l)
    for (int s = 0; s < out.width; ++s)
      if (point_in_ring(ring, out.sample0 + s, out.line0 + l))
        out.mask[static_cast<std::size_t>(l) * out.width + s] = 1;
  return out;
}

std::vector<std::pair<int, int>> sample_ground_windows(int extent_rows,
                                                       int extent_cols, int f,
                                                       int count,
                                                       std::uint64_t seed) {
  if (f <= 0 || f > extent_rows || f > extent_cols)
    throw InvalidInput("window size does not fit the extent");
  Rng rng(seed);
  const std::uint64_t row_span = extent_rows - f + 1;
  const std::uint64_t col_span = extent_cols - f + 1;
  std::vector<std::pair<int, int>> anchors;
  anchors.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int r = static_cast<int>(uniform_u64(rng, row_span));
    const int c = static_cast<int>(uniform_u64(rng, col_span));
    anchors.push_back({r, c});
  }
  return anchors;
}

}  // namespace orthoforge
