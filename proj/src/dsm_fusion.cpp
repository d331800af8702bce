#include "orthoforge/dsm_fusion.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "orthoforge/error.hpp"
#include "orthoforge/parallel.hpp"
#include "orthoforge/textio.hpp"

namespace orthoforge {

namespace {

double median_of_sorted(const double* v, std::size_t n) {
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double median_inplace(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  return median_of_sorted(v.data(), v.size());
}

// Median of the min(top_y, n) largest values of a descending-sorted run.
double top_median(const double* desc, std::size_t n, int top_y) {
  const std::size_t m = std::min<std::size_t>(n, top_y);
  // the m kept values are desc[0..m), descending; median is order-free
  if (m % 2 == 1) return desc[m / 2];
  return 0.5 * (desc[m / 2 - 1] + desc[m / 2]);
}

struct CellPoint {
  std::size_t cell;
  double h;
};

}  // namespace

Grid bin_top_median(const std::vector<GeoPoint>& pts, const LocalFrame& frame,
                    const GridHeader& header, int top_y, int workers) {
  const std::size_t ncells =
      static_cast<std::size_t>(header.ncols) * header.nrows;
  std::vector<std::atomic<int>> counts(ncells);
  for (auto& c : counts) c.store(0, std::memory_order_relaxed);

  const int nw = resolve_workers(workers);
  const std::size_t npts = pts.size();
  std::vector<std::size_t> cell_of(npts, static_cast<std::size_t>(-1));

#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nw)
#endif
  for (std::size_t i = 0; i < npts; ++i) {
    double x, y;
    frame.to_local(pts[i].lat, pts[i].lon, x, y);
    int r, c;
    if (!header.cell_of(x, y, r, c)) continue;
    const std::size_t cell = static_cast<std::size_t>(r) * header.ncols + c;
    cell_of[i] = cell;
    counts[cell].fetch_add(1, std::memory_order_relaxed);
  }

  std::vector<std::size_t> offset(ncells + 1, 0);
  for (std::size_t c = 0; c < ncells; ++c)
    offset[c + 1] = offset[c] + counts[c].load(std::memory_order_relaxed);
  std::vector<double> heights(offset[ncells]);
  std::vector<std::atomic<std::size_t>> cursor(ncells);
  for (std::size_t c = 0; c < ncells; ++c)
    cursor[c].store(offset[c], std::memory_order_relaxed);

#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nw)
#endif
  for (std::size_t i = 0; i < npts; ++i) {
    if (cell_of[i] == static_cast<std::size_t>(-1)) continue;
    const std::size_t slot =
        cursor[cell_of[i]].fetch_add(1, std::memory_order_relaxed);
    heights[slot] = pts[i].h;
  }

  Grid out = Grid::filled_nodata(header);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nw)
#endif
  for (std::size_t c = 0; c < ncells; ++c) {
    const std::size_t n = offset[c + 1] - offset[c];
    if (n == 0) continue;
    double* v = heights.data() + offset[c];
    // full descending sort makes the result independent of fill order
    std::sort(v, v + n, std::greater<double>());
    out.data()[c] = top_median(v, n, top_y);
  }
  (void)nw;
  return out;
}

Grid median_filter(const Grid& g, int window, int workers) {
  if (window % 2 == 0) throw InvalidInput("median window must be odd");
  const int half = window / 2;
  Grid out = g;
  const int nw = resolve_workers(workers);

#ifdef _OPENMP
#pragma omp parallel num_threads(nw)
#endif
  {
    std::vector<double> vals;
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
    for (int r = 0; r < g.nrows(); ++r) {
      for (int c = 0; c < g.ncols(); ++c) {
        if (!g.valid(r, c)) continue;
        vals.clear();
        for (int dr = -half; dr <= half; ++dr)
          for (int dc = -half; dc <= half; ++dc) {
            const int rr = r + dr, cc = c + dc;
            if (g.in_bounds(rr, cc) && g.valid(rr, cc))
              vals.push_back(g.at(rr, cc));
          }
        out.at(r, c) = median_inplace(vals);
      }
    }
  }
  (void)nw;
  return out;
}

Grid fill_holes(const Grid& g, int max_radius, int workers) {
  Grid cur = g;
  const int nw = resolve_workers(workers);
  for (int round = 0; round < max_radius; ++round) {
    Grid next = cur;
    std::atomic<int> filled{0};
#ifdef _OPENMP
#pragma omp parallel num_threads(nw)
#endif
    {
      std::vector<double> vals;
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
      for (int r = 0; r < cur.nrows(); ++r) {
        for (int c = 0; c < cur.ncols(); ++c) {
          if (cur.valid(r, c)) continue;
          vals.clear();
          for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
              if (dr == 0 && dc == 0) continue;
              const int rr = r + dr, cc = c + dc;
              if (cur.in_bounds(rr, cc) && cur.valid(rr, cc))
                vals.push_back(cur.at(rr, cc));
            }
          if (!vals.empty()) {
            next.at(r, c) = median_inplace(vals);
            filled.fetch_add(1, std::memory_order_relaxed);
          }
        }
      }
    }
    cur = std::move(next);
    if (filled.load() == 0) break;
  }
  (void)nw;
  return cur;
}

Grid fuse_clouds(const std::vector<GeoPoint>& pts, const LocalFrame& frame,
                 const RectM& extent, const FusionConfig& cfg, int workers) {
  GridHeader h;
  h.cellsize = cfg.cellsize;
  h.xll = extent.x0;
  h.yll = extent.y0;
  h.ncols = static_cast<int>(std::llround(extent.width() / cfg.cellsize));
  h.nrows = static_cast<int>(std::llround(extent.height() / cfg.cellsize));
  if (h.ncols <= 0 || h.nrows <= 0)
    throw InvalidInput("fuse_clouds: empty extent");

  Grid binned = bin_top_median(pts, frame, h, cfg.top_y, workers);
  Grid filtered = median_filter(binned, cfg.median_window, workers);
  return fill_holes(filtered, cfg.hole_max_radius, workers);
}

namespace serial {

Grid bin_top_median(const std::vector<GeoPoint>& pts, const LocalFrame& frame,
                    const GridHeader& header, int top_y) {
  const std::size_t ncells =
      static_cast<std::size_t>(header.ncols) * header.nrows;
  std::vector<std::vector<double>> cells(ncells);
  for (const auto& p : pts) {
    double x, y;
    frame.to_local(p.lat, p.lon, x, y);
    int r, c;
    if (!header.cell_of(x, y, r, c)) continue;
    cells[static_cast<std::size_t>(r) * header.ncols + c].push_back(p.h);
  }
  Grid out = Grid::filled_nodata(header);
  for (std::size_t i = 0; i < ncells; ++i) {
    if (cells[i].empty()) continue;
    std::sort(cells[i].begin(), cells[i].end(), std::greater<double>());
    out.data()[i] = top_median(cells[i].data(), cells[i].size(), top_y);
  }
  return out;
}

Grid median_filter(const Grid& g, int window) {
  return orthoforge::median_filter(g, window, 1);
}

Grid fill_holes(const Grid& g, int max_radius) {
  return orthoforge::fill_holes(g, max_radius, 1);
}

}  // namespace serial

Grid merge_tiles(const std::vector<Tile>& tiles,
                 const std::vector<Grid>& tile_grids, const RectM& aoi) {
  if (tiles.size() != tile_grids.size() || tiles.empty())
    throw InvalidInput("merge_tiles: tile/grid count mismatch");
  const double cs = tile_grids[0].header().cellsize;
  for (const auto& g : tile_grids)
    if (g.header().cellsize != cs)
      throw InvalidInput("merge_tiles: mixed cell sizes");

  GridHeader h;
  h.cellsize = cs;
  h.xll = aoi.x0;
  h.yll = aoi.y0;
  h.ncols = static_cast<int>(std::llround(aoi.width() / cs));
  h.nrows = static_cast<int>(std::llround(aoi.height() / cs));
  Grid out = Grid::filled_nodata(h);

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
        if (g.valid(r, c)) out.at(orow, ocol) = g.at(r, c);
      }
    }
  }
  return out;
}

namespace {

void boundary_samples(const Grid& ga, const Grid& gb, double x0, double y0,
                      double dx, double dy, int n, std::vector<double>& absd,
                      double& sumsq, int& count) {
  for (int i = 0; i < n; ++i) {
    const double x = x0 + i * dx;
    const double y = y0 + i * dy;
    const double va = ga.value_at(x, y);
    const double vb = gb.value_at(x, y);
    if (va == ga.nodata() || vb == gb.nodata()) continue;
    const double d = va - vb;
    absd.push_back(std::fabs(d));
    sumsq += d * d;
    ++count;
  }
}

}  // namespace

BoundaryStats boundary_stats(const std::vector<Tile>& tiles,
                             const std::vector<Grid>& tile_grids) {
  if (tiles.size() != tile_grids.size())
    throw InvalidInput("boundary_stats: tile/grid count mismatch");
  BoundaryStats st;
  std::vector<double> medians, rmss;

  for (std::size_t i = 0; i < tiles.size(); ++i) {
    for (std::size_t j = 0; j < tiles.size(); ++j) {
      const Tile& a = tiles[i];
      const Tile& b = tiles[j];
      const double cs = tile_grids[i].header().cellsize;
      std::vector<double> absd;
      double sumsq = 0.0;
      int count = 0;

      if (a.row == b.row && a.col + 1 == b.col) {
        // vertical edge, sampled half a cell west of it
        const double xb = a.core.x1;
        const double ylo = std::max(a.core.y0, b.core.y0);
        const double yhi = std::min(a.core.y1, b.core.y1);
        const int n = static_cast<int>(std::floor((yhi - ylo) / cs));
        boundary_samples(tile_grids[i], tile_grids[j], xb - cs / 2,
                         ylo + cs / 2, 0.0, cs, n, absd, sumsq, count);
      } else if (a.col == b.col && a.row + 1 == b.row) {
        // horizontal edge (a north of b), sampled half a cell north of it
        const double yb = a.core.y0;
        const double xlo = std::max(a.core.x0, b.core.x0);
        const double xhi = std::min(a.core.x1, b.core.x1);
        const int n = static_cast<int>(std::floor((xhi - xlo) / cs));
        boundary_samples(tile_grids[i], tile_grids[j], xlo + cs / 2,
                         yb + cs / 2, cs, 0.0, n, absd, sumsq, count);
      } else {
        continue;
      }

      BoundaryEntry e;
      e.tile_a = a.id();
      e.tile_b = b.id();
      e.samples = count;
      if (count > 0) {
        e.median_abs_z = median_inplace(absd);
        e.rms_z = std::sqrt(sumsq / count);
        medians.push_back(e.median_abs_z);
        rmss.push_back(e.rms_z);
      }
      st.boundaries.push_back(e);
    }
  }

  st.num_boundaries = static_cast<int>(st.boundaries.size());
  if (!medians.empty()) {
    st.median_abs_z = median_inplace(medians);
    st.median_rms_z = median_inplace(rmss);
  }
  return st;
}

std::string format_boundary_report(const BoundaryStats& s) {
  std::string out;
  out += "num_boundaries = " + fmt_int(s.num_boundaries) + "\n";
  out += "median_abs_z = " + fmt_double(s.median_abs_z) + "\n";
  out += "median_rms_z = " + fmt_double(s.median_rms_z) + "\n";
  for (const auto& b : s.boundaries)
    out += b.tile_a + "|" + b.tile_b + " samples=" + fmt_int(b.samples) +
           " median_abs=" + fmt_double(b.median_abs_z) +
           " rms=" + fmt_double(b.rms_z) + "\n";
  return out;
}

}  // namespace orthoforge
