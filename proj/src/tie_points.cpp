#include "orthoforge/tie_points.hpp"

#include <algorithm>
#include <set>

#include "orthoforge/error.hpp"
#include "orthoforge/textio.hpp"

namespace orthoforge {

int TiePointGraph::vertex_of(const std::string& image_id) const {
  const auto it =
      std::lower_bound(image_ids.begin(), image_ids.end(), image_id);
  if (it == image_ids.end() || *it != image_id) return -1;
  return static_cast<int>(it - image_ids.begin());
}

TiePointGraph build_graph(const std::vector<TieObservation>& obs) {
  TiePointGraph g;
  {
    std::set<std::string> ids;
    for (const auto& o : obs) ids.insert(o.image_id);
    g.image_ids.assign(ids.begin(), ids.end());
  }

  // image set per track; repeated sightings of a track in one image count once
  std::map<std::int64_t, std::set<int>> track_images;
  for (const auto& o : obs)
    track_images[o.track_id].insert(g.vertex_of(o.image_id));

  for (const auto& [track, imgs] : track_images) {
    (void)track;
    for (auto i = imgs.begin(); i != imgs.end(); ++i)
      for (auto j = std::next(i); j != imgs.end(); ++j)
        g.edges[{*i, *j}] += 1;
  }
  return g;
}

const char* to_string(AlignmentReason r) {
  switch (r) {
    case AlignmentReason::OK: return "OK";
    case AlignmentReason::TOO_FEW_ALIGNED: return "TOO_FEW_ALIGNED";
    case AlignmentReason::TREE: return "TREE";
    case AlignmentReason::SPARSE: return "SPARSE";
  }
  return "?";
}

namespace {

// Largest connected component; ties go to the component holding the lowest
// vertex index so reports are stable.
void largest_component(const TiePointGraph& g, std::vector<int>& members,
                       int& edge_count) {
  const int n = g.num_vertices();
  std::vector<int> comp(n, -1);
  int ncomp = 0;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> stack{s};
    comp[s] = ncomp;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (const auto& [e, w] : g.edges) {
        (void)w;
        int other = -1;
        if (e.first == v) other = e.second;
        else if (e.second == v) other = e.first;
        if (other >= 0 && comp[other] < 0) {
          comp[other] = ncomp;
          stack.push_back(other);
        }
      }
    }
    ++ncomp;
  }

  std::vector<int> size(ncomp, 0);
  for (int v = 0; v < n; ++v) ++size[comp[v]];
  int best = 0;
  for (int c = 1; c < ncomp; ++c)
    if (size[c] > size[best]) best = c;  // first max keeps lowest vertex

  members.clear();
  for (int v = 0; v < n; ++v)
    if (comp[v] == best) members.push_back(v);
  edge_count = 0;
  for (const auto& [e, w] : g.edges) {
    (void)w;
    if (comp[e.first] == best && comp[e.second] == best) ++edge_count;
  }
}

}  // namespace

AlignmentQuality assess_quality(const TiePointGraph& g, int total_images,
                                const DetectorConfig& cfg) {
  AlignmentQuality q;
  if (g.num_vertices() == 0) {
    q.aq = false;
    q.reason = AlignmentReason::TOO_FEW_ALIGNED;
    return q;
  }

  std::vector<int> members;
  int ec = 0;
  largest_component(g, members, ec);
  const int vc = static_cast<int>(members.size());
  q.component_size = vc;
  q.density = vc >= 2 ? 2.0 * ec / (static_cast<double>(vc) * (vc - 1)) : 0.0;

  if (vc < cfg.k * total_images) {
    q.aq = false;
    q.reason = AlignmentReason::TOO_FEW_ALIGNED;
  } else if (ec == vc - 1) {
    q.aq = false;
    q.reason = AlignmentReason::TREE;
  } else if (q.density < cfg.d_min) {
    q.aq = false;
    q.reason = AlignmentReason::SPARSE;
  } else {
    q.aq = true;
    q.reason = AlignmentReason::OK;
  }
  return q;
}

std::string format_quality_report(const AlignmentQuality& q) {
  std::string out;
  out += std::string("aq = ") + (q.aq ? "true" : "false") + "\n";
  out += std::string("reason = ") + to_string(q.reason) + "\n";
  out += "density = " + fmt_double(q.density) + "\n";
  out += "component_size = " + fmt_int(q.component_size) + "\n";
  return out;
}

std::vector<TieObservation> read_tie_points_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<TieObservation> obs;
  bool first = true;
  for (std::string_view line : split(text, '\n')) {
    line = trim(line);
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.substr(0, 8) == "image_id") continue;
    }
    auto cols = split(line, ',');
    if (cols.size() != 4)
      throw IoError(path + ": expected image_id,sample,line,track_id");
    TieObservation o;
    o.image_id = std::string(trim(cols[0]));
    o.pixel.sample = parse_double(cols[1], "sample");
    o.pixel.line = parse_double(cols[2], "line");
    o.track_id = parse_int(cols[3], "track_id");
    obs.push_back(o);
  }
  return obs;
}

void write_tie_points_csv(const std::vector<TieObservation>& obs,
                          const std::string& path) {
  std::string out = "image_id,sample,line,track_id\n";
  for (const auto& o : obs)
    out += o.image_id + "," + fmt_double(o.pixel.sample) + "," +
           fmt_double(o.pixel.line) + "," + fmt_int(o.track_id) + "\n";
  write_text_file(path, out);
}

}  // namespace orthoforge
