#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "orthoforge/geo.hpp"

namespace orthoforge {

struct TieObservation {
  std::string image_id;
  PixelCoord pixel;
  std::int64_t track_id = 0;
};

// Undirected image-connectivity graph: one vertex per image, edge weight =
// number of tracks the two images share.
struct TiePointGraph {
  std::vector<std::string> image_ids;            // vertex index -> image
  std::map<std::pair<int, int>, int> edges;      // (i<j) -> shared tracks

  int vertex_of(const std::string& image_id) const;  // -1 when absent
  int num_vertices() const { return static_cast<int>(image_ids.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
};

TiePointGraph build_graph(const std::vector<TieObservation>& obs);

enum class AlignmentReason { OK, TOO_FEW_ALIGNED, TREE, SPARSE };

const char* to_string(AlignmentReason r);

struct DetectorConfig {
  double k = 0.8;      // fraction of the image set the component must reach
  double d_min = 0.5;  // edge density floor
};

struct AlignmentQuality {
  bool aq = false;
  AlignmentReason reason = AlignmentReason::OK;
  double density = 0.0;  // of the largest component, reported always
  int component_size = 0;
};

// Connectivity screen over the tie-point graph, checks ordered:
// component size, tree shape, edge density. total_images is the size of the
// image set the tile was given, which can exceed the vertices present.
AlignmentQuality assess_quality(const TiePointGraph& g, int total_images,
                                const DetectorConfig& cfg = {});

std::string format_quality_report(const AlignmentQuality& q);

// CSV image_id,sample,line,track_id with a header row.
std::vector<TieObservation> read_tie_points_csv(const std::string& path);
void write_tie_points_csv(const std::vector<TieObservation>& obs,
                          const std::string& path);

}  // namespace orthoforge
