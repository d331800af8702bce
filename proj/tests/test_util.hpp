#pragma once

// Builders shared by the test executables.

#include <cmath>
#include <filesystem>
#include <string>

#include "orthoforge/geo.hpp"
#include "orthoforge/grid.hpp"
#include "orthoforge/rpc.hpp"

namespace testutil {

// Affine pushbroom stand-in written as a degenerate rational cubic:
//   sample = s0 + (x + tan * z) / gsd
//   line   = l0 - y / gsd
// x, y, z in the local frame. Normalization window is 2000 m wide centered
// at (cx, cy), heights hoff +/- hscale.
inline orthoforge::RpcCamera affine_camera(const orthoforge::LocalFrame& frame,
                                           const std::string& id, double tan,
                                           double gsd, double s0, double l0,
                                           double cx = 1500.0,
                                           double cy = 1500.0,
                                           double hoff = 30.0,
                                           double hscale = 60.0) {
  orthoforge::RpcCamera c;
  c.image_id = id;
  double lat, lon;
  frame.to_geo(cx, cy, lat, lon);
  c.lat_off = lat;
  c.lon_off = lon;
  c.lat_scale = 2000.0 / frame.meters_per_deg_lat();
  c.lon_scale = 2000.0 / frame.meters_per_deg_lon();
  c.height_off = hoff;
  c.height_scale = hscale;
  c.samp_off = s0 + cx / gsd;
  c.samp_scale = 1000.0;
  c.line_off = l0 - cy / gsd;
  c.line_scale = 1000.0;
  c.samp_den[0] = 1.0;
  c.line_den[0] = 1.0;
  // 1000 * (a0 + a1 * L + a3 * H) == (x - cx)/gsd + tan * z / gsd
  c.samp_num[0] = tan * hoff / (1000.0 * gsd);
  c.samp_num[1] = 2.0 / gsd;
  c.samp_num[3] = tan * hscale / (1000.0 * gsd);
  c.line_num[2] = -2.0 / gsd;
  return c;
}

// The same mapping evaluated directly, the oracle side of the camera tests.
inline orthoforge::PixelCoord affine_project(double tan, double gsd, double s0,
                                             double l0, double x, double y,
                                             double z) {
  return {s0 + (x + tan * z) / gsd, l0 - y / gsd};
}

// Fresh scratch directory under the system temp root.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil
