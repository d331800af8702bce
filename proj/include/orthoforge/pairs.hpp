#pragma once

#include <string>
#include <vector>

namespace orthoforge {

struct PairCandidate {
  std::string pair_id;
  std::string image_a, image_b;
  double view_angle_diff_deg = 0.0;  // convergence between the two rays
  double sun_angle_diff_deg = 0.0;
  double off_nadir_a_deg = 0.0;
  double off_nadir_b_deg = 0.0;
  double azimuth_deg = 0.0;  // of the pair baseline, [0, 360)
};

struct PairSelectConfig {
  double view_diff_min_deg = 5.0;
  double view_diff_max_deg = 35.0;
  double sun_diff_max_deg = 35.0;
  double off_nadir_max_deg = 35.0;
  int min_pairs = 40;
  int max_pairs = 80;
  int azimuth_bins = 12;
  double relax_factor = 0.2;  // applied once when under min_pairs
};

struct PairSelection {
  std::vector<PairCandidate> selected;  // in round-robin pick order
  bool relaxed = false;                 // thresholds were widened once
  bool under_minimum = false;           // still short after relaxation
};

// Angle filters, then azimuth-binned round-robin fill ordered by ascending
// view-angle difference within each bin, capped at max_pairs.
PairSelection select_pairs(const std::vector<PairCandidate>& candidates,
                           const PairSelectConfig& cfg = {});

std::vector<PairCandidate> read_pairs_csv(const std::string& path);
void write_pairs_csv(const std::vector<PairCandidate>& pairs,
                     const std::string& path);

}  // namespace orthoforge
