#pragma once

#include <cstdint>
#include <vector>

#include "orthoforge/rpc.hpp"
#include "orthoforge/tie_points.hpp"

namespace orthoforge {

struct TrackObservation {
  int camera = 0;  // index into the camera list
  PixelCoord pixel;
};

struct Track {
  std::int64_t track_id = 0;
  std::vector<TrackObservation> obs;
};

// Observations regrouped by track, image ids resolved to camera indices.
// Throws InvalidInput when an observation names an unknown image.
std::vector<Track> group_tracks(const std::vector<TieObservation>& obs,
                                const std::vector<RpcCamera>& cams);

struct BundleOptions {
  double lambda_reg = 1e-2;  // L2 weight on the bias parameters
  int max_iterations = 200;
  double step_tol_px = 1e-6;
  double fd_step = 1e-7;  // point Jacobians, normalized units
};

struct BundleResult {
  std::vector<ImageBias> biases;  // one per camera
  std::vector<GeoPoint> points;   // one per retained track
  std::vector<std::int64_t> point_track_ids;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  int dropped_tracks = 0;   // tracks whose seed triangulation failed
  bool gauge_warning = false;  // lambda_reg == 0 leaves the datum free
};

// Joint refinement of per-image constant biases and the track points they
// observe, minimizing squared reprojection error plus lambda * |bias|^2.
// Track points are eliminated per-track so the reduced solve is over the
// bias vector only.
BundleResult bundle_adjust(const std::vector<RpcCamera>& cams,
                           const std::vector<Track>& tracks,
                           const BundleOptions& opt = {});

struct ReprojectionStats {
  double mean_px = 0.0;       // mean over tracks of per-track RMS residual
  double variance_px2 = 0.0;  // population variance of those RMS values
  int num_tracks = 0;
  int skipped_tracks = 0;
};

// Residual of one track: RMS over the per-observation error norms.
double track_rms(const std::vector<double>& residual_norms);

ReprojectionStats stats_from_track_rms(const std::vector<double>& rms);

// Re-triangulates every track against the given geometry and aggregates the
// per-track RMS residuals.
ReprojectionStats reprojection_stats(const std::vector<RpcCamera>& cams,
                                     const std::vector<ImageBias>& biases,
                                     const std::vector<Track>& tracks);

}  // namespace orthoforge
