#pragma once

#include "orthoforge/geo.hpp"
#include "orthoforge/rpc.hpp"

namespace orthoforge {

struct TriangulateOptions {
  int max_iterations = 50;
  double step_tol_px = 1e-4;       // stop once the pixel-space step drops below
  double condition_limit = 1e10;   // on the normal matrix, scaled parameters
  double fd_step = 1e-7;           // central-difference step, normalized units
};

struct TriangulateResult {
  GeoPoint point;
  double rms_px = 0.0;  // residual over the four pixel equations
  int iterations = 0;
};

// Two-ray intersection by damped Gauss-Newton over (lat, lon, h), Jacobians
// by central differences. Throws IllConditioned for near-parallel rays and
// NonConvergence (carrying the last residual) at the iteration cap.
TriangulateResult triangulate(const RpcCamera& cam_a, const ImageBias& bias_a,
                              const PixelCoord& px_a, const RpcCamera& cam_b,
                              const ImageBias& bias_b, const PixelCoord& px_b,
                              double h_init,
                              const TriangulateOptions& opt = {});

}  // namespace orthoforge
