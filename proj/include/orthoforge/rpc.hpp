#pragma once

#include <array>
#include <string>
#include <vector>

#include "orthoforge/geo.hpp"

namespace orthoforge {

// Rational polynomial camera, RPC00B flavor: 20-term cubic numerator and
// denominator per image axis over normalized (lat, lon, height).
struct RpcCamera {
  std::string image_id;

  double line_off = 0.0, samp_off = 0.0;
  double lat_off = 0.0, lon_off = 0.0, height_off = 0.0;
  double line_scale = 1.0, samp_scale = 1.0;
  double lat_scale = 1.0, lon_scale = 1.0, height_scale = 1.0;

  std::array<double, 20> line_num{};
  std::array<double, 20> line_den{};
  std::array<double, 20> samp_num{};
  std::array<double, 20> samp_den{};
};

// Per-image constant pixel offset added to projections (the usual way a
// handful of meters of orbit/attitude error shows up at these view angles).
struct ImageBias {
  double d_sample = 0.0;
  double d_line = 0.0;
};

// Cubic monomial basis in normalized coordinates, RPC00B ordering.
// P = normalized lat, L = normalized lon, H = normalized height.
std::array<double, 20> rpc_terms(double P, double L, double H);

// Geodetic point -> image pixel. Throws DegenerateCamera when a denominator
// polynomial vanishes (|den| < 1e-12) at the point.
PixelCoord rpc_project(const RpcCamera& cam, const ImageBias& bias,
                       const GeoPoint& p);

// True when the point sits within offset +/- 1.5 * scale on all three axes.
// Callers are expected to warn, not reject, outside this box.
bool rpc_in_validity_box(const RpcCamera& cam, const GeoPoint& p);

// Key = value text format, LINE_NUM_COEFF_1..20 style keys.
RpcCamera read_rpc_file(const std::string& path);
void write_rpc_file(const RpcCamera& cam, const std::string& path);

// CSV image_id,d_sample,d_line with a header row.
struct BiasTable {
  std::vector<std::string> image_ids;
  std::vector<ImageBias> biases;

  // Zero bias for unknown ids; bias files are sparse by design.
  ImageBias lookup(const std::string& image_id) const;
};
BiasTable read_bias_csv(const std::string& path);
void write_bias_csv(const BiasTable& t, const std::string& path);

}  // namespace orthoforge
