#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "orthoforge/grid.hpp"
#include "orthoforge/rpc.hpp"
#include "orthoforge/vectors.hpp"

namespace orthoforge {

// Burns polygon classes into a class-index raster by cell-center test.
// Buildings override roads override background everywhere they stack.
Grid rasterize_labels(const VectorLayer& layer, const LocalFrame& frame,
                      const GridHeader& header, int workers = 0);

namespace serial {
Grid rasterize_labels(const VectorLayer& layer, const LocalFrame& frame,
                      const GridHeader& header);
}

// 1 where the surface stands more than min_height_m above the terrain,
// 0 elsewhere (nodata in either input included). Grids must align.
Grid building_footprints(const Grid& dsm, const Grid& dem,
                         double min_height_m = 2.5);

// Normalized difference of the red-edge and coastal bands; cells whose band
// sum is below 1e-6 become nodata.
Grid nhfd(const Grid& red_edge, const Grid& coastal);

// Class-membership mask (1/0) for one class of a class-index raster.
Grid class_mask(const Grid& labels, LabelClass cls);

// Ring projected into image space at per-vertex surface heights, with the
// covered pixels filled. Empty when every vertex misses the image.
struct PixelPolygon {
  std::vector<PixelCoord> ring;
  int sample0 = 0, line0 = 0;
  int width = 0, height = 0;      // zero when empty
  std::vector<std::uint8_t> mask; // row-major over the box

  bool empty() const { return width == 0 || height == 0; }
};

PixelPolygon project_polygon_offnadir(
    const std::vector<std::array<double, 2>>& ring_lonlat, const Grid& dsm,
    const LocalFrame& frame, const RpcCamera& cam, const ImageBias& bias,
    int image_width, int image_height);

// Anchors (row, col) of square windows drawn uniformly over all in-bounds
// placements. Seeded; the draw sequence is part of the artifact contract.
std::vector<std::pair<int, int>> sample_ground_windows(int extent_rows,
                                                       int extent_cols, int f,
                                                       int count,
                                                       std::uint64_t seed);

}  // namespace orthoforge
