#pragma once

#include <string>
#include <vector>

#include "orthoforge/geo.hpp"
#include "orthoforge/grid.hpp"
#include "orthoforge/tiling.hpp"

namespace orthoforge {

struct FusionConfig {
  double cellsize = 0.5;    // meters
  int top_y = 3;            // surface votes kept per cell
  int median_window = 3;    // odd, in cells
  int hole_max_radius = 11; // fill passes; larger holes stay open
};

// Median of the up-to-top_y largest heights landing in each cell. Cells no
// point hits are nodata.
Grid bin_top_median(const std::vector<GeoPoint>& pts, const LocalFrame& frame,
                    const GridHeader& header, int top_y, int workers = 0);

// Window median over valid neighbors; nodata cells stay nodata here.
Grid median_filter(const Grid& g, int window, int workers = 0);

// Fills nodata pockets from their rims, one ring per pass, each pass writing
// the median of the valid 8-neighbors. Holes wider than max_radius rings
// survive.
Grid fill_holes(const Grid& g, int max_radius, int workers = 0);

// The three stages above over one tile's padded extent.
Grid fuse_clouds(const std::vector<GeoPoint>& pts, const LocalFrame& frame,
                 const RectM& extent, const FusionConfig& cfg = {},
                 int workers = 0);

// Single-thread reference implementations, kept for comparison testing.
namespace serial {
Grid bin_top_median(const std::vector<GeoPoint>& pts, const LocalFrame& frame,
                    const GridHeader& header, int top_y);
Grid median_filter(const Grid& g, int window);
Grid fill_holes(const Grid& g, int max_radius);
}  // namespace serial

// Core-cropped mosaic of per-tile grids over the AOI, no blending: each
// output cell comes from the one tile whose core contains it.
Grid merge_tiles(const std::vector<Tile>& tiles,
                 const std::vector<Grid>& tile_grids, const RectM& aoi);

struct BoundaryEntry {
  std::string tile_a, tile_b;
  int samples = 0;
  double median_abs_z = 0.0;
  double rms_z = 0.0;
};

struct BoundaryStats {
  std::vector<BoundaryEntry> boundaries;
  double median_abs_z = 0.0;  // median across boundaries
  double median_rms_z = 0.0;
  int num_boundaries = 0;
};

// Disagreement between adjacent tiles' estimates sampled along each shared
// core edge (half a cell inside the first tile, inside the second's padding).
BoundaryStats boundary_stats(const std::vector<Tile>& tiles,
                             const std::vector<Grid>& tile_grids);

std::string format_boundary_report(const BoundaryStats& s);

}  // namespace orthoforge
