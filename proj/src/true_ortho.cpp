#include "orthoforge/true_ortho.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "orthoforge/error.hpp"
#include "orthoforge/parallel.hpp"
#include "orthoforge/textio.hpp"

namespace orthoforge {

namespace {

std::string band_path(const std::string& asc_path, int band) {
  const auto dot = asc_path.find_last_of('.');
  const std::string stem =
      dot == std::string::npos ? asc_path : asc_path.substr(0, dot);
  return stem + ".b" + fmt_int(band) + ".asc";
}

GridHeader output_header(const Grid& dsm, double resolution) {
  const GridHeader& d = dsm.header();
  GridHeader h;
  h.cellsize = resolution;
  h.xll = d.xll;
  h.yll = d.yll;
  h.ncols = static_cast<int>(std::llround(d.width() / resolution));
  h.nrows = static_cast<int>(std::llround(d.height() / resolution));
  h.nodata = d.nodata;
  return h;
}

double min_valid(const Grid& g) {
  double m = 1e300;
  for (double v : g.data())
    if (v != g.nodata()) m = std::min(m, v);
  return m == 1e300 ? 0.0 : m;
}

// Ground level under a grid point: the DEM where it has data, else the
// lowest surface height in the tile.
double ground_height(const Grid& dem, double x, double y, double dem_fallback) {
  const double v = dem.value_at(x, y);
  return v == dem.nodata() ? dem_fallback : v;
}

void sweep_point(const ImagePatch& patch, const RpcCamera& cam,
                 const ImageBias& bias, const LocalFrame& frame, double x,
                 double y, double h_top, double h_ground, double h_step,
                 std::vector<double>& lt) {
  GeoPoint p;
  frame.to_geo(x, y, p.lat, p.lon);
  double h = h_top;
  while (true) {
    p.h = h;
    const PixelCoord px = rpc_project(cam, bias, p);
    const int s = static_cast<int>(std::floor(px.sample));
    const int l = static_cast<int>(std::floor(px.line));
    if (patch.contains(s, l)) {
      double& slot = lt[static_cast<std::size_t>(l - patch.line0) *
                            patch.width +
                        (s - patch.sample0)];
      slot = std::max(slot, h);
    }
    if (h <= h_ground) break;
    h -= h_step;
    if (h < h_ground) h = h_ground;  // land exactly on the ground level
  }
}

}  // namespace

ImagePatch read_patch(const std::string& asc_path) {
  const std::string meta = read_text_file(asc_path);
  ImagePatch p;
  int nbands = 1;
  for (std::string_view line : split(meta, '\n')) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw IoError(asc_path + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key == "image_id") p.image_id = std::string(value);
    else if (key == "sample0") p.sample0 = (int)parse_int(value, key);
    else if (key == "line0") p.line0 = (int)parse_int(value, key);
    else if (key == "nbands") nbands = (int)parse_int(value, key);
    else throw IoError(asc_path + ": unknown key " + key);
  }
  p.nbands = nbands;
  for (int b = 0; b < nbands; ++b) {
    const Grid g = read_ascii_grid(band_path(asc_path, b));
    if (b == 0) {
      p.width = g.ncols();
      p.height = g.nrows();
      p.nodata = g.nodata();
    } else if (g.ncols() != p.width || g.nrows() != p.height) {
      throw IoError(asc_path + ": band size mismatch");
    }
    p.data.push_back(g.data());
  }
  return p;
}

void write_patch(const ImagePatch& p, const std::string& asc_path) {
  std::string meta;
  meta += "image_id = " + p.image_id + "\n";
  meta += "sample0 = " + fmt_int(p.sample0) + "\n";
  meta += "line0 = " + fmt_int(p.line0) + "\n";
  meta += "nbands = " + fmt_int(p.nbands) + "\n";
  write_text_file(asc_path, meta);
  for (int b = 0; b < p.nbands; ++b) {
    GridHeader h;
    h.ncols = p.width;
    h.nrows = p.height;
    h.cellsize = 1.0;
    h.nodata = p.nodata;
    Grid g(h, h.nodata);
    g.data() = p.data[b];
    write_ascii_grid(g, band_path(asc_path, b));
  }
}

HeightLookup build_height_lookup(const ImagePatch& patch, const RpcCamera& cam,
                                 const ImageBias& bias, const Grid& dsm,
                                 const Grid& dem, const LocalFrame& frame,
                                 const OrthoConfig& cfg, int workers) {
  HeightLookup lt;
  lt.sample0 = patch.sample0;
  lt.line0 = patch.line0;
  lt.width = patch.width;
  lt.height = patch.height;
  const std::size_t cells =
      static_cast<std::size_t>(patch.width) * patch.height;

  const GridHeader oh = output_header(dsm, cfg.resolution);
  const double dem_fallback = min_valid(dsm);
  const int nw = resolve_workers(workers);

  // One lookup buffer per worker, folded with max afterwards; max commutes,
  // so the fold is exact whatever the split.
  std::vector<std::vector<double>> partial(
      nw, std::vector<double>(cells, HeightLookup::kSentinel));

#ifdef _OPENMP
#pragma omp parallel num_threads(nw)
#endif
  {
#ifdef _OPENMP
    const int tid = omp_get_thread_num();
#else
    const int tid = 0;
#endif
    std::vector<double>& mine = partial[tid];
#ifdef _OPENMP
#pragma omp for schedule(dynamic, 8)
#endif
    for (int r = 0; r < oh.nrows; ++r) {
      for (int c = 0; c < oh.ncols; ++c) {
        const double x = oh.x_center(c);
        const double y = oh.y_center(r);
        const double h_top = dsm.value_at(x, y);
        if (h_top == dsm.nodata()) continue;
        double h_ground = ground_height(dem, x, y, dem_fallback);
        if (h_ground > h_top) h_ground = h_top;
        sweep_point(patch, cam, bias, frame, x, y, h_top, h_ground,
                    cfg.h_step, mine);
      }
    }
  }

  lt.values.assign(cells, HeightLookup::kSentinel);
  for (int t = 0; t < nw; ++t)
    for (std::size_t i = 0; i < cells; ++i)
      lt.values[i] = std::max(lt.values[i], partial[t][i]);
  return lt;
}

namespace {

double sample_patch(const ImagePatch& patch, int band, double s, double l,
                    OrthoConfig::Interp interp) {
  if (interp == OrthoConfig::Interp::NEAREST) {
    int si = static_cast<int>(std::lround(s));
    int li = static_cast<int>(std::lround(l));
    si = std::clamp(si, patch.sample0, patch.sample0 + patch.width - 1);
    li = std::clamp(li, patch.line0, patch.line0 + patch.height - 1);
    return patch.at(band, si, li);
  }
  const int s0 =
      std::clamp(static_cast<int>(std::floor(s)), patch.sample0,
                 patch.sample0 + patch.width - 1);
  const int l0 = std::clamp(static_cast<int>(std::floor(l)), patch.line0,
                            patch.line0 + patch.height - 1);
  const int s1 = std::min(s0 + 1, patch.sample0 + patch.width - 1);
  const int l1 = std::min(l0 + 1, patch.line0 + patch.height - 1);
  const double fs = std::clamp(s - s0, 0.0, 1.0);
  const double fl = std::clamp(l - l0, 0.0, 1.0);
  const double v00 = patch.at(band, s0, l0);
  const double v10 = patch.at(band, s1, l0);
  const double v01 = patch.at(band, s0, l1);
  const double v11 = patch.at(band, s1, l1);
  if (v00 == patch.nodata || v10 == patch.nodata || v01 == patch.nodata ||
      v11 == patch.nodata) {
    // nearest at mixed-validity seams rather than bleeding the marker in
    return sample_patch(patch, band, s, l, OrthoConfig::Interp::NEAREST);
  }
  return v00 * (1 - fs) * (1 - fl) + v10 * fs * (1 - fl) +
         v01 * (1 - fs) * fl + v11 * fs * fl;
}

OrthoResult run_sample_pass(const ImagePatch& patch, const RpcCamera& cam,
                            const ImageBias& bias, const Grid& dsm,
                            const HeightLookup& lt, const LocalFrame& frame,
                            const OrthoConfig& cfg, int workers,
                            int clamped) {
  const GridHeader oh = output_header(dsm, cfg.resolution);
  OrthoResult out;
  out.dsm_below_dem = clamped;
  for (int b = 0; b < patch.nbands; ++b)
    out.bands.push_back(Grid::filled_nodata(oh));
  GridHeader mh = oh;
  mh.nodata = -1.0;
  out.mask = Grid(mh, 0.0);

  const int nw = resolve_workers(workers);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8) num_threads(nw)
#endif
  for (int r = 0; r < oh.nrows; ++r) {
    for (int c = 0; c < oh.ncols; ++c) {
      const double x = oh.x_center(c);
      const double y = oh.y_center(r);
      const double h = dsm.value_at(x, y);
      if (h == dsm.nodata()) continue;
      GeoPoint p;
      frame.to_geo(x, y, p.lat, p.lon);
      p.h = h;
      const PixelCoord px = rpc_project(cam, bias, p);
      const int s = static_cast<int>(std::floor(px.sample));
      const int l = static_cast<int>(std::floor(px.line));
      if (!patch.contains(s, l)) continue;
      if (lt.at(s, l) > h + cfg.gamma) continue;  // hidden behind something
      out.mask.at(r, c) = 1.0;
      for (int b = 0; b < patch.nbands; ++b)
        out.bands[b].at(r, c) =
            sample_patch(patch, b, px.sample, px.line, cfg.interp);
    }
  }
  (void)nw;
  return out;
}

int count_clamped(const Grid& dsm, const Grid& dem, const OrthoConfig& cfg) {
  const GridHeader oh = output_header(dsm, cfg.resolution);
  int clamped = 0;
  for (int r = 0; r < oh.nrows; ++r)
    for (int c = 0; c < oh.ncols; ++c) {
      const double x = oh.x_center(c);
      const double y = oh.y_center(r);
      const double h = dsm.value_at(x, y);
      const double g = dem.value_at(x, y);
      // inversions within one sweep step are absorbed by the clamp itself
      if (h != dsm.nodata() && g != dem.nodata() && g > h + cfg.h_step)
        ++clamped;
    }
  return clamped;
}

}  // namespace

OrthoResult true_orthorectify(const ImagePatch& patch, const RpcCamera& cam,
                              const ImageBias& bias, const Grid& dsm,
                              const Grid& dem, const LocalFrame& frame,
                              const OrthoConfig& cfg, int workers) {
  const HeightLookup lt =
      build_height_lookup(patch, cam, bias, dsm, dem, frame, cfg, workers);
  return run_sample_pass(patch, cam, bias, dsm, lt, frame, cfg, workers,
                         count_clamped(dsm, dem, cfg));
}

namespace serial {

OrthoResult true_orthorectify(const ImagePatch& patch, const RpcCamera& cam,
                              const ImageBias& bias, const Grid& dsm,
                              const Grid& dem, const LocalFrame& frame,
                              const OrthoConfig& cfg) {
  // Plain single-buffer version of both passes.
  HeightLookup lt;
  lt.sample0 = patch.sample0;
  lt.line0 = patch.line0;
  lt.width = patch.width;
  lt.height = patch.height;
  lt.values.assign(static_cast<std::size_t>(patch.width) * patch.height,
                   HeightLookup::kSentinel);

  const GridHeader oh = output_header(dsm, cfg.resolution);
  const double dem_fallback = min_valid(dsm);
  for (int r = 0; r < oh.nrows; ++r) {
    for (int c = 0; c < oh.ncols; ++c) {
      const double x = oh.x_center(c);
      const double y = oh.y_center(r);
      const double h_top = dsm.value_at(x, y);
      if (h_top == dsm.nodata()) continue;
      double h_ground = ground_height(dem, x, y, dem_fallback);
      if (h_ground > h_top) h_ground = h_top;
      sweep_point(patch, cam, bias, frame, x, y, h_top, h_ground, cfg.h_step,
                  lt.values);
    }
  }
  return run_sample_pass(patch, cam, bias, dsm, lt, frame, cfg, 1,
                         count_clamped(dsm, dem, cfg));
}

}  // namespace serial

Grid mosaic_tiles(const std::vector<Tile>& tiles,
                  const std::vector<Grid>& tile_grids, const RectM& aoi,
                  double fill) {
  if (tiles.size() != tile_grids.size() || tiles.empty())
    throw InvalidInput("mosaic_tiles: tile/grid count mismatch");
  const double cs = tile_grids[0].header().cellsize;

  GridHeader h;
  h.cellsize = cs;
  h.xll = aoi.x0;
  h.yll = aoi.y0;
  h.ncols = static_cast<int>(std::llround(aoi.width() / cs));
  h.nrows = static_cast<int>(std::llround(aoi.height() / cs));
  h.nodata = tile_grids[0].header().nodata;
  Grid out(h, fill);

  for (std::size_t t = 0; t < tiles.size(); ++t) {
    const Grid& g = tile_grids[t];
    const RectM& core = tiles[t].core;
    for (int r = 0; r < g.nrows(); ++r) {
      const double y = g.header().y_center(r);
      if (y < core.y0 || y >= core.y1) continue;
      for (int c = 0; c < g.ncols(); ++c) {
        const double x = g.header().x_center(c);
        if (x < core.x0 || x >= core.x1) continue;
        int orow, ocol;
        if (!h.cell_of(x, y, orow, ocol)) continue;
        out.at(orow, ocol) = g.at(r, c);
      }
    }
  }
  return out;
}

}  // namespace orthoforge
