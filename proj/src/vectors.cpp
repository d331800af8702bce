#include "orthoforge/vectors.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "orthoforge/error.hpp"
#include "orthoforge/textio.hpp"

namespace orthoforge {

using json = nlohmann::json;

const char* to_string(LabelClass c) {
  switch (c) {
    case LabelClass::BACKGROUND: return "BACKGROUND";
    case LabelClass::ROAD: return "ROAD";
    case LabelClass::BUILDING: return "BUILDING";
  }
  return "?";
}

LabelClass label_class_from_string(const std::string& s) {
  if (s == "BACKGROUND") return LabelClass::BACKGROUND;
  if (s == "ROAD") return LabelClass::ROAD;
  if (s == "BUILDING") return LabelClass::BUILDING;
  throw InvalidInput("unknown feature class '" + s + "'");
}

namespace {

bool segments_cross(const std::array<double, 2>& a,
                    const std::array<double, 2>& b,
                    const std::array<double, 2>& c,
                    const std::array<double, 2>& d) {
  auto orient = [](const std::array<double, 2>& p,
                   const std::array<double, 2>& q,
                   const std::array<double, 2>& r) {
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
  };
  const double o1 = orient(a, b, c);
  const double o2 = orient(a, b, d);
  const double o3 = orient(c, d, a);
  const double o4 = orient(c, d, b);
  return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0));
}

void validate_ring(const VectorFeature& f) {
  const auto& p = f.points;
  if (p.size() < 4)
    throw InvalidInput("polygon " + f.id + " has fewer than 3 distinct vertices");
  if (p.front() != p.back())
    throw InvalidInput("polygon " + f.id + " ring is not closed");
  const std::size_t n = p.size() - 1;  // distinct vertices
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // closing edge adjacency
      if (segments_cross(p[i], p[i + 1], p[j], p[j + 1]))
        throw InvalidInput("polygon " + f.id + " ring self-intersects");
    }
  }
}

}  // namespace

VectorLayer read_geojson(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection")
    throw InvalidInput(path + ": expected a FeatureCollection");

  VectorLayer layer;
  int index = 0;
  for (const auto& feat : doc.value("features", json::array())) {
    VectorFeature f;
    const auto& props = feat.value("properties", json::object());
    if (!props.contains("class"))
      throw InvalidInput(path + ": feature missing class property");
    f.cls = label_class_from_string(props["class"].get<std::string>());
    f.id = props.value("id", "feature_" + fmt_int(index));
    ++index;

    const auto& geom = feat.value("geometry", json::object());
    const std::string type = geom.value("type", "");
    const auto& coords = geom.value("coordinates", json::array());
    if (type == "Polygon") {
      f.is_polygon = true;
      if (coords.size() != 1)
        throw InvalidInput(path + ": polygon " + f.id +
                           " must have a single ring");
      for (const auto& pt : coords[0])
        f.points.push_back({pt[0].get<double>(), pt[1].get<double>()});
      validate_ring(f);
    } else if (type == "LineString") {
      f.is_polygon = false;
      for (const auto& pt : coords)
        f.points.push_back({pt[0].get<double>(), pt[1].get<double>()});
      if (f.points.size() < 2)
        throw InvalidInput(path + ": linestring " + f.id + " too short");
    } else {
      throw InvalidInput(path + ": unsupported geometry type '" + type + "'");
    }
    layer.features.push_back(std::move(f));
  }
  return layer;
}

void write_geojson(const VectorLayer& layer, const std::string& path) {
  json features = json::array();
  for (const auto& f : layer.features) {
    json coords = json::array();
    for (const auto& p : f.points) coords.push_back({p[0], p[1]});
    json geom;
    if (f.is_polygon) {
      geom["type"] = "Polygon";
      geom["coordinates"] = json::array({coords});
    } else {
      geom["type"] = "LineString";
      geom["coordinates"] = coords;
    }
    features.push_back({{"type", "Feature"},
                        {"properties",
                         {{"class", to_string(f.cls)}, {"id", f.id}}},
                        {"geometry", geom}});
  }
  json doc = {{"type", "FeatureCollection"}, {"features", features}};
  write_text_file(path, doc.dump(2) + "\n");
}

namespace {

struct Vec2 {
  double x = 0.0, y = 0.0;
};

Vec2 sub(const Vec2& a, const Vec2& b) { return {a.x - b.x, a.y - b.y}; }
Vec2 add(const Vec2& a, const Vec2& b) { return {a.x + b.x, a.y + b.y}; }
Vec2 scale(const Vec2& a, double s) { return {a.x * s, a.y * s}; }
double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
double norm(const Vec2& a) { return std::hypot(a.x, a.y); }

// Offset path along one side of the polyline: segment endpoints joined by
// miter points where the extension stays within the cap, beveled otherwise.
std::vector<Vec2> offset_side(const std::vector<Vec2>& pts, double hw,
                              double miter_cap) {
  const std::size_t nseg = pts.size() - 1;
  std::vector<Vec2> dirs(nseg), normals(nseg);
  for (std::size_t i = 0; i < nseg; ++i) {
    const Vec2 d = sub(pts[i + 1], pts[i]);
    const double len = norm(d);
    dirs[i] = scale(d, 1.0 / len);
    normals[i] = {-dirs[i].y, dirs[i].x};  // left of travel
  }

  std::vector<Vec2> out;
  out.push_back(add(pts[0], scale(normals[0], hw)));
  for (std::size_t i = 1; i < nseg; ++i) {
    const Vec2 p_prev = add(pts[i], scale(normals[i - 1], hw));
    const Vec2 p_next = add(pts[i], scale(normals[i], hw));
    const double denom = cross(dirs[i - 1], dirs[i]);
    if (std::fabs(denom) < 1e-12) {
      out.push_back(p_next);  // straight-through joint
      continue;
    }
    // line (p_prev, dirs[i-1]) meets line (p_next, dirs[i])
    const double t = cross(sub(p_next, p_prev), dirs[i]) / denom;
    const Vec2 miter = add(p_prev, scale(dirs[i - 1], t));
    if (norm(sub(miter, pts[i])) <= miter_cap) {
      out.push_back(miter);
    } else {
      out.push_back(p_prev);
      out.push_back(p_next);
    }
  }
  out.push_back(add(pts[nseg], scale(normals[nseg - 1], hw)));
  return out;
}

}  // namespace

BufferResult buffer_roads(const VectorLayer& layer, double total_width_m,
                          const LocalFrame& frame) {
  if (total_width_m <= 0) throw InvalidInput("buffer width must be positive");
  const double hw = total_width_m / 2.0;
  const double miter_cap = 2.0 * hw;

  BufferResult res;
  for (const auto& f : layer.features) {
    if (f.is_polygon) {
      res.layer.features.push_back(f);
      continue;
    }

    std::vector<Vec2> pts;
    for (const auto& ll : f.points) {
      Vec2 v;
      frame.to_local(ll[1], ll[0], v.x, v.y);
      if (!pts.empty() && norm(sub(v, pts.back())) < 1e-9) {
        ++res.skipped_segments;
        continue;
      }
      pts.push_back(v);
    }
    if (pts.size() < 2) {
      ++res.skipped_segments;
      continue;
    }

    const std::vector<Vec2> left = offset_side(pts, hw, miter_cap);
    std::vector<Vec2> rev(pts.rbegin(), pts.rend());
    const std::vector<Vec2> right = offset_side(rev, hw, miter_cap);

    VectorFeature poly;
    poly.id = f.id;
    poly.cls = f.cls;
    poly.is_polygon = true;
    for (const Vec2& v : left) {
      double lat, lon;
      frame.to_geo(v.x, v.y, lat, lon);
      poly.points.push_back({lon, lat});
    }
    for (const Vec2& v : right) {  // flat caps: jump straight across each end
      double lat, lon;
      frame.to_geo(v.x, v.y, lat, lon);
      poly.points.push_back({lon, lat});
    }
    poly.points.push_back(poly.points.front());
    res.layer.features.push_back(std::move(poly));
  }
  return res;
}

bool point_in_ring(const std::vector<std::array<double, 2>>& ring, double x,
                   double y) {
  bool in = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const double xi = ring[i][0], yi = ring[i][1];
    const double xj = ring[j][0], yj = ring[j][1];
    if ((yi > y) != (yj > y) &&
        x < (xj - xi) * (y - yi) / (yj - yi) + xi)
      in = !in;
  }
  return in;
}

}  // namespace orthoforge
