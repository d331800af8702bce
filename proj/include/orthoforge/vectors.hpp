#pragma once

#include <array>
#include <string>
#include <vector>

#include "orthoforge/geo.hpp"

namespace orthoforge {

// Label classes share one index space across the toolkit. Background stays
// zero so freshly zeroed rasters read as background.
enum class LabelClass : int { BACKGROUND = 0, ROAD = 1, BUILDING = 2 };
constexpr int kNumClasses = 3;

const char* to_string(LabelClass c);
LabelClass label_class_from_string(const std::string& s);

struct VectorFeature {
  std::string id;
  LabelClass cls = LabelClass::BACKGROUND;
  bool is_polygon = false;  // false: polyline
  // lon/lat pairs; polygon rings repeat the first vertex at the end
  std::vector<std::array<double, 2>> points;
};

struct VectorLayer {
  std::vector<VectorFeature> features;
};

// FeatureCollection with Polygon (single ring) and LineString geometries and
// a `class` property. Rings are checked closed and non-self-intersecting.
VectorLayer read_geojson(const std::string& path);
void write_geojson(const VectorLayer& layer, const std::string& path);

struct BufferResult {
  VectorLayer layer;        // polylines replaced by buffer polygons
  int skipped_segments = 0; // zero-length input segments dropped
};

// Widens every polyline in the layer to a fixed total width: flat end caps,
// miter joints capped at twice the half width (beveled past that). Polygons
// pass through untouched.
BufferResult buffer_roads(const VectorLayer& layer, double total_width_m,
                          const LocalFrame& frame);

// Even-odd crossing test; points on an edge land on one deterministic side.
bool point_in_ring(const std::vector<std::array<double, 2>>& ring, double x,
                   double y);

}  // namespace orthoforge
