#include "orthoforge/tiling.hpp"

#include <algorithm>
#include <cmath>

#include "orthoforge/error.hpp"
#include "orthoforge/textio.hpp"

namespace orthoforge {

std::string Tile::id() const {
  return "r" + fmt_int(row) + "c" + fmt_int(col);
}

std::vector<Tile> partition_aoi(const RectM& aoi, const TilingConfig& cfg) {
  const double w = aoi.width();
  const double h = aoi.height();
  if (w < cfg.core_m || h < cfg.core_m)
    throw InvalidInput("aoi smaller than one tile core: " + fmt_double(w) +
                       " x " + fmt_double(h) + " m");

  const int ncols = static_cast<int>(std::ceil(w / cfg.core_m));
  const int nrows = static_cast<int>(std::ceil(h / cfg.core_m));

  std::vector<Tile> tiles;
  tiles.reserve(static_cast<std::size_t>(nrows) * ncols);
  for (int r = 0; r < nrows; ++r) {
    for (int c = 0; c < ncols; ++c) {
      Tile t;
      t.row = r;
      t.col = c;
      // row 0 is the northern edge of the AOI
      t.core.x0 = aoi.x0 + c * cfg.core_m;
      t.core.x1 = std::min(t.core.x0 + cfg.core_m, aoi.x1);
      t.core.y1 = aoi.y1 - r * cfg.core_m;
      t.core.y0 = std::max(t.core.y1 - cfg.core_m, aoi.y0);
      t.padded.x0 = t.core.x0 - cfg.pad_m;
      t.padded.x1 = t.core.x1 + cfg.pad_m;
      t.padded.y0 = t.core.y0 - cfg.pad_m;
      t.padded.y1 = t.core.y1 + cfg.pad_m;
      tiles.push_back(t);
    }
  }
  return tiles;
}

std::optional<PixelBox> image_footprint(const Tile& tile,
                                        const LocalFrame& frame,
                                        const RpcCamera& cam,
                                        const ImageBias& bias, const Grid& dem,
                                        int image_width, int image_height,
                                        int margin_px) {
  const double xs[2] = {tile.padded.x0, tile.padded.x1};
  const double ys[2] = {tile.padded.y0, tile.padded.y1};

  double smin = 1e300, smax = -1e300, lmin = 1e300, lmax = -1e300;
  for (double x : xs) {
    for (double y : ys) {
      GeoPoint p;
      frame.to_geo(x, y, p.lat, p.lon);
      double h = dem.value_at(x, y);
      if (h == dem.nodata()) h = 0.0;
      p.h = h;
      const PixelCoord px = rpc_project(cam, bias, p);
      smin = std::min(smin, px.sample);
      smax = std::max(smax, px.sample);
      lmin = std::min(lmin, px.line);
      lmax = std::max(lmax, px.line);
    }
  }

  PixelBox box;
  box.min_sample = static_cast<int>(std::floor(smin)) - margin_px;
  box.max_sample = static_cast<int>(std::ceil(smax)) + margin_px;
  box.min_line = static_cast<int>(std::floor(lmin)) - margin_px;
  box.max_line = static_cast<int>(std::ceil(lmax)) + margin_px;

  box.min_sample = std::max(box.min_sample, 0);
  box.min_line = std::max(box.min_line, 0);
  box.max_sample = std::min(box.max_sample, image_width - 1);
  box.max_line = std::min(box.max_line, image_height - 1);
  if (box.min_sample > box.max_sample || box.min_line > box.max_line)
    return std::nullopt;
  return box;
}

void write_tiles_file(const std::vector<Tile>& tiles, const std::string& path) {
  std::string out = "tile_id,row,col,core_x0,core_y0,core_x1,core_y1,"
                    "pad_x0,pad_y0,pad_x1,pad_y1\n";
  for (const Tile& t : tiles) {
    out += t.id() + "," + fmt_int(t.row) + "," + fmt_int(t.col);
    for (double v : {t.core.x0, t.core.y0, t.core.x1, t.core.y1, t.padded.x0,
                     t.padded.y0, t.padded.x1, t.padded.y1})
      out += "," + fmt_double(v);
    out += "\n";
  }
  write_text_file(path, out);
}

std::vector<Tile> read_tiles_file(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<Tile> tiles;
  bool first = true;
  for (std::string_view line : split(text, '\n')) {
    line = trim(line);
    if (line.empty()) continue;
    if (first) {
      first = false;
      continue;  // header
    }
    auto cols = split(line, ',');
    if (cols.size() != 11) throw IoError(path + ": bad tiles row");
    Tile t;
    t.row = static_cast<int>(parse_int(cols[1], "row"));
    t.col = static_cast<int>(parse_int(cols[2], "col"));
    t.core.x0 = parse_double(cols[3], "core_x0");
    t.core.y0 = parse_double(cols[4], "core_y0");
    t.core.x1 = parse_double(cols[5], "core_x1");
    t.core.y1 = parse_double(cols[6], "core_y1");
    t.padded.x0 = parse_double(cols[7], "pad_x0");
    t.padded.y0 = parse_double(cols[8], "pad_y0");
    t.padded.x1 = parse_double(cols[9], "pad_x1");
    t.padded.y1 = parse_double(cols[10], "pad_y1");
    tiles.push_back(t);
  }
  return tiles;
}

}  // namespace orthoforge
