#pragma once

#include <string>
#include <vector>

#include "orthoforge/geo.hpp"
#include "orthoforge/grid.hpp"
#include "orthoforge/rpc.hpp"

namespace orthoforge {

// Horizontal disparities over a window of image a, plus the offsets mapping
// window pixels back into both source images. Rectification is bypassed:
// row r, col c corresponds to image-a pixel (c + a_sample0, r + a_line0) and
// matches image-b pixel (c + d + b_sample0, r + b_line0).
struct DisparityMap {
  std::string pair_id;
  std::string image_a, image_b;
  int width = 0, height = 0;
  double invalid = -9999.0;
  double a_sample0 = 0.0, a_line0 = 0.0;
  double b_sample0 = 0.0, b_line0 = 0.0;
  std::vector<double> data;  // row-major

  double at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * width + c];
  }
  bool valid(int r, int c) const { return at(r, c) != invalid; }
};

// Stored as an ascii grid next to a key = value .meta sidecar.
DisparityMap read_disparity(const std::string& asc_path);
void write_disparity(const DisparityMap& d, const std::string& asc_path);

struct CloudResult {
  std::vector<GeoPoint> points;
  int dropped = 0;  // pixels whose triangulation failed
};

// Triangulates every valid disparity pixel. Point order is row-major over
// the map regardless of worker count.
CloudResult disparity_to_cloud(const DisparityMap& map, const RpcCamera& cam_a,
                               const ImageBias& bias_a, const RpcCamera& cam_b,
                               const ImageBias& bias_b, double h_init,
                               int workers = 0);

std::vector<GeoPoint> read_cloud_csv(const std::string& path);
void write_cloud_csv(const std::vector<GeoPoint>& pts,
                     const std::string& path);

}  // namespace orthoforge
