#include "orthoforge/point_cloud.hpp"

#include <map>

#include "orthoforge/error.hpp"
#include "orthoforge/parallel.hpp"
#include "orthoforge/textio.hpp"
#include "orthoforge/triangulate.hpp"

namespace orthoforge {

namespace {

std::string meta_path_for(const std::string& asc_path) {
  const auto dot = asc_path.find_last_of('.');
  const std::string stem =
      dot == std::string::npos ? asc_path : asc_path.substr(0, dot);
  return stem + ".meta";
}

}  // namespace

DisparityMap read_disparity(const std::string& asc_path) {
  const Grid g = read_ascii_grid(asc_path);
  DisparityMap d;
  d.width = g.ncols();
  d.height = g.nrows();
  d.invalid = g.nodata();
  d.data = g.data();

  const std::string meta = read_text_file(meta_path_for(asc_path));
  for (std::string_view line : split(meta, '\n')) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw IoError(meta_path_for(asc_path) + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key == "pair_id") d.pair_id = std::string(value);
    else if (key == "image_a") d.image_a = std::string(value);
    else if (key == "image_b") d.image_b = std::string(value);
    else if (key == "a_sample0") d.a_sample0 = parse_double(value, key);
    else if (key == "a_line0") d.a_line0 = parse_double(value, key);
    else if (key == "b_sample0") d.b_sample0 = parse_double(value, key);
    else if (key == "b_line0") d.b_line0 = parse_double(value, key);
    else throw IoError(meta_path_for(asc_path) + ": unknown key " + key);
  }
  return d;
}

void write_disparity(const DisparityMap& d, const std::string& asc_path) {
  GridHeader h;
  h.ncols = d.width;
  h.nrows = d.height;
  h.cellsize = 1.0;
  h.nodata = d.invalid;
  Grid g(h, h.nodata);
  g.data() = d.data;
  write_ascii_grid(g, asc_path);

  std::string meta;
  meta += "pair_id = " + d.pair_id + "\n";
  meta += "image_a = " + d.image_a + "\n";
  meta += "image_b = " + d.image_b + "\n";
  meta += "a_sample0 = " + fmt_double(d.a_sample0) + "\n";
  meta += "a_line0 = " + fmt_double(d.a_line0) + "\n";
  meta += "b_sample0 = " + fmt_double(d.b_sample0) + "\n";
  meta += "b_line0 = " + fmt_double(d.b_line0) + "\n";
  write_text_file(meta_path_for(asc_path), meta);
}

CloudResult disparity_to_cloud(const DisparityMap& map, const RpcCamera& cam_a,
                               const ImageBias& bias_a, const RpcCamera& cam_b,
                               const ImageBias& bias_b, double h_init,
                               int workers) {
  std::vector<std::vector<GeoPoint>> row_pts(map.height);
  std::vector<int> row_drops(map.height, 0);
  const int nw = resolve_workers(workers);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 4) num_threads(nw)
#endif
  for (int r = 0; r < map.height; ++r) {
    for (int c = 0; c < map.width; ++c) {
      if (!map.valid(r, c)) continue;
      PixelCoord pa{c + map.a_sample0, r + map.a_line0};
      PixelCoord pb{c + map.at(r, c) + map.b_sample0, r + map.b_line0};
      try {
        const auto t = triangulate(cam_a, bias_a, pa, cam_b, bias_b, pb,
                                   h_init);
        row_pts[r].push_back(t.point);
      } catch (const IllConditioned&) {
        ++row_drops[r];
      } catch (const NonConvergence&) {
        ++row_drops[r];
      }
    }
  }
  (void)nw;

  CloudResult out;
  for (int r = 0; r < map.height; ++r) {
    out.points.insert(out.points.end(), row_pts[r].begin(), row_pts[r].end());
    out.dropped += row_drops[r];
  }
  return out;
}

std::vector<GeoPoint> read_cloud_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<GeoPoint> pts;
  bool first = true;
  for (std::string_view line : split(text, '\n')) {
    line = trim(line);
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.substr(0, 3) == "lat") continue;
    }
    auto cols = split(line, ',');
    if (cols.size() != 3) throw IoError(path + ": expected lat,lon,h");
    GeoPoint p;
    p.lat = parse_double(cols[0], "lat");
    p.lon = parse_double(cols[1], "lon");
    p.h = parse_double(cols[2], "h");
    pts.push_back(p);
  }
  return pts;
}

void write_cloud_csv(const std::vector<GeoPoint>& pts,
                     const std::string& path) {
  std::string out = "lat,lon,h\n";
  for (const auto& p : pts)
    out += fmt_double(p.lat) + "," + fmt_double(p.lon) + "," +
           fmt_double(p.h) + "\n";
  write_text_file(path, out);
}

}  // namespace orthoforge
