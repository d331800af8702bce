#pragma once

#include <string>
#include <vector>

#include "orthoforge/geo.hpp"
#include "orthoforge/grid.hpp"
#include "orthoforge/rpc.hpp"
#include "orthoforge/tiling.hpp"

namespace orthoforge {

// Pixel-aligned window of a source image. Pixel (s, l) of the image lives at
// data[band][(l - line0) * width + (s - sample0)]; centers sit on integer
// coordinates.
struct ImagePatch {
  std::string image_id;
  int sample0 = 0, line0 = 0;
  int width = 0, height = 0;
  int nbands = 1;
  double nodata = -9999.0;
  std::vector<std::vector<double>> data;  // one vector per band

  bool contains(int s, int l) const {
    return s >= sample0 && s < sample0 + width && l >= line0 &&
           l < line0 + height;
  }
  double at(int band, int s, int l) const {
    return data[band][static_cast<std::size_t>(l - line0) * width +
                      (s - sample0)];
  }
};

ImagePatch read_patch(const std::string& asc_path);   // band per .bN.asc file
void write_patch(const ImagePatch& p, const std::string& asc_path);

// Highest terrain level seen per image pixel while sweeping grid verticals.
struct HeightLookup {
  int sample0 = 0, line0 = 0;
  int width = 0, height = 0;
  std::vector<double> values;  // init well below any terrain

  static constexpr double kSentinel = -10000.0;

  double at(int s, int l) const {
    return values[static_cast<std::size_t>(l - line0) * width +
                  (s - sample0)];
  }
};

struct OrthoConfig {
  double resolution = 0.5;  // output grid step, meters
  double h_step = 0.5;      // vertical sweep step, meters
  double gamma = 1.0;       // occlusion tolerance, meters
  enum class Interp { NEAREST, BILINEAR } interp = Interp::NEAREST;
};

struct OrthoResult {
  std::vector<Grid> bands;  // nodata where masked
  Grid mask;                // 1 visible, 0 nodata
  int dsm_below_dem = 0;    // clamped sweep starts
};

// Sweep pass: at each output grid point, walk from the surface height down
// to the ground height inclusive, project every level into the image and
// keep the highest level per pixel cell. Order-free, safe to parallelize.
HeightLookup build_height_lookup(const ImagePatch& patch, const RpcCamera& cam,
                                 const ImageBias& bias, const Grid& dsm,
                                 const Grid& dem, const LocalFrame& frame,
                                 const OrthoConfig& cfg, int workers = 0);

// Sample pass plus the sweep: a grid point whose own surface level sits more
// than gamma below the lookup at its pixel is occluded and masked NODATA.
OrthoResult true_orthorectify(const ImagePatch& patch, const RpcCamera& cam,
                              const ImageBias& bias, const Grid& dsm,
                              const Grid& dem, const LocalFrame& frame,
                              const OrthoConfig& cfg, int workers = 0);

// Reference implementation, one thread, one lookup buffer.
namespace serial {
OrthoResult true_orthorectify(const ImagePatch& patch, const RpcCamera& cam,
                              const ImageBias& bias, const Grid& dsm,
                              const Grid& dem, const LocalFrame& frame,
                              const OrthoConfig& cfg);
}

// Core-cropped mosaic copying every covered cell, nodata included.
Grid mosaic_tiles(const std::vector<Tile>& tiles,
                  const std::vector<Grid>& tile_grids, const RectM& aoi,
                  double fill);

}  // namespace orthoforge
