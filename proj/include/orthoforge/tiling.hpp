#pragma once

#include <optional>
#include <string>
#include <vector>

#include "orthoforge/geo.hpp"
#include "orthoforge/grid.hpp"
#include "orthoforge/rpc.hpp"

namespace orthoforge {

struct TilingConfig {
  double core_m = 1000.0;
  double pad_m = 300.0;
};

struct Tile {
  int row = 0;  // 0 = northernmost row of tiles
  int col = 0;  // 0 = westernmost column
  RectM core;
  RectM padded;  // core grown by the padding on all sides, never clipped

  std::string id() const;
};

// Splits an AOI into a row-major list of square core tiles with padding.
// Cores in the last row/column are clipped to the AOI; padded extents are
// not, so neighbors overlap by exactly twice the padding.
std::vector<Tile> partition_aoi(const RectM& aoi, const TilingConfig& cfg = {});

struct PixelBox {
  int min_sample = 0, min_line = 0;
  int max_sample = 0, max_line = 0;  // inclusive
};

// Image-space search box for one tile: the padded-extent corners projected at
// the DEM height under each corner, grown by a fixed margin and clipped to
// the image. Empty optional means the tile does not touch the image.
std::optional<PixelBox> image_footprint(const Tile& tile,
                                        const LocalFrame& frame,
                                        const RpcCamera& cam,
                                        const ImageBias& bias, const Grid& dem,
                                        int image_width, int image_height,
                                        int margin_px = 16);

void write_tiles_file(const std::vector<Tile>& tiles, const std::string& path);
std::vector<Tile> read_tiles_file(const std::string& path);

}  // namespace orthoforge
