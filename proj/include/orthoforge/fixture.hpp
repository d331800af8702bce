#pragma once

#include <cstdint>
#include <string>

namespace orthoforge {

// Synthetic end-to-end dataset: a 3 km box-and-road world imaged by four
// pushbroom-like cameras tilted only in the east-west plane. The world shape
// is fixed; the seed only moves tie point placement and observation noise.
struct FixtureOptions {
  std::string dir;
  std::uint64_t seed = 17;
};

// Writes the complete input tree (image patches, cameras, disparity grids,
// tie points, road vectors, DEM, truth rasters, scheduler plan) plus a
// manifest wired for every stage. Returns the manifest path.
std::string make_fixture(const FixtureOptions& opt);

}  // namespace orthoforge
