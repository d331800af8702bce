#include "orthoforge/stages.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "orthoforge/bundle_adjust.hpp"
#include "orthoforge/dsm_fusion.hpp"
#include "orthoforge/error.hpp"
#include "orthoforge/geo.hpp"
#include "orthoforge/grid.hpp"
#include "orthoforge/labels.hpp"
#include "orthoforge/mv_fusion.hpp"
#include "orthoforge/ncc.hpp"
#include "orthoforge/point_cloud.hpp"
#include "orthoforge/rpc.hpp"
#include "orthoforge/sched.hpp"
#include "orthoforge/textio.hpp"
#include "orthoforge/tie_points.hpp"
#include "orthoforge/tiling.hpp"
#include "orthoforge/true_ortho.hpp"
#include "orthoforge/vectors.hpp"

namespace orthoforge {
namespace {

namespace fs = std::filesystem;

struct Ctx {
  Manifest& m;
  int workers = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;  // explicit --seed beats [params] and plan seeds
};

LocalFrame frame_of(const Manifest& m) {
  return LocalFrame(m.get_double("aoi", "lat0"), m.get_double("aoi", "lon0"));
}

RectM aoi_of(const Manifest& m) {
  return RectM{m.get_double("aoi", "x0"), m.get_double("aoi", "y0"),
               m.get_double("aoi", "x1"), m.get_double("aoi", "y1")};
}

GridHeader aoi_header(const RectM& aoi, double res) {
  GridHeader h;
  h.ncols = static_cast<int>(std::lround(aoi.width() / res));
  h.nrows = static_cast<int>(std::lround(aoi.height() / res));
  h.xll = aoi.x0;
  h.yll = aoi.y0;
  h.cellsize = res;
  return h;
}

// Resolved output path with its directory created.
std::string out_path(const Manifest& m, const std::string& section,
                     const std::string& key) {
  const std::string p = m.resolve(m.get(section, key));
  const fs::path parent = fs::path(p).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  return p;
}

// Artifact an earlier stage owns; absence names that stage.
std::string upstream(const Manifest& m, const std::string& section,
                     const std::string& key, const std::string& producer) {
  const std::string p = m.resolve(m.get(section, key));
  if (!fs::exists(p))
    throw InvalidInput("missing artifact " + m.get(section, key) + "; run '" +
                       producer + "' first");
  return p;
}

std::string input_path(const Manifest& m, const std::string& key) {
  const std::string p = m.resolve(m.get("inputs", key));
  if (!fs::exists(p))
    throw InvalidInput("missing input " + m.get("inputs", key) +
                       " ([inputs] " + key + ")");
  return p;
}

std::vector<std::string> image_id_list(const Manifest& m) {
  return m.get_list("images", "ids");
}

std::vector<RpcCamera> load_cameras(const Manifest& m) {
  const std::string dir = m.resolve(m.get("images", "rpc_dir"));
  std::vector<RpcCamera> cams;
  for (const std::string& id : image_id_list(m)) {
    const std::string p = dir + "/" + id + ".rpc";
    if (!fs::exists(p)) throw InvalidInput("missing camera file " + p);
    cams.push_back(read_rpc_file(p));
  }
  return cams;
}

ImagePatch load_patch(const Manifest& m, const std::string& id) {
  const std::string p =
      m.resolve(m.get("images", "patch_dir")) + "/" + id + ".asc";
  if (!fs::exists(p)) throw InvalidInput("missing image patch " + p);
  return read_patch(p);
}

struct ImagePairRow {
  std::string id, a, b;
};

std::vector<ImagePairRow> read_pair_table(const std::string& path) {
  std::vector<ImagePairRow> out;
  const std::string text = read_text_file(path);
  bool header = true;
  for (std::string_view line : split(text, '\n')) {
    const std::string s{trim(line)};
    if (s.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto f = split(s, ',');
    if (f.size() != 3) throw InvalidInput("bad pair row: " + s);
    out.push_back({std::string{trim(f[0])}, std::string{trim(f[1])},
                   std::string{trim(f[2])}});
  }
  return out;
}

// Stage reports are flat key = value text so the validate stage (and tests)
// can read numbers back without a bespoke parser per stage.
void kv_add(std::string& rep, const std::string& k, const std::string& v) {
  rep += k + " = " + v + "\n";
}

std::map<std::string, std::string> kv_read(const std::string& path) {
  std::map<std::string, std::string> out;
  const std::string text = read_text_file(path);
  for (std::string_view line : split(text, '\n')) {
    const std::string s{trim(line)};
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) continue;
    out[std::string{trim(s.substr(0, eq))}] =
        std::string{trim(s.substr(eq + 1))};
  }
  return out;
}

double kv_num(const std::map<std::string, std::string>& kv,
              const std::string& key, const std::string& origin) {
  const auto it = kv.find(key);
  if (it == kv.end())
    throw InvalidInput("report " + origin + " lacks key " + key);
  return parse_double(it->second, origin + ":" + key);
}

// Nearest-cell resample by location. The terrain model is smooth relative
// to both grids, which is all the ortho and footprint steps need.
Grid resample_to(const Grid& src, const GridHeader& h) {
  Grid g(h, h.nodata);
  for (int r = 0; r < h.nrows; ++r)
    for (int c = 0; c < h.ncols; ++c)
      g.at(r, c) = src.value_at(h.x_center(c), h.y_center(r));
  return g;
}

// ---------------------------------------------------------------------------

int stage_partition(Ctx& ctx) {
  TilingConfig tc;
  tc.core_m = ctx.m.get_double_or("params", "tile_m", tc.core_m);
  tc.pad_m = ctx.m.get_double_or("params", "pad_m", tc.pad_m);
  const std::vector<Tile> tiles = partition_aoi(aoi_of(ctx.m), tc);
  write_tiles_file(tiles, out_path(ctx.m, "stage.partition", "tiles"));
  return 0;
}

int stage_align(Ctx& ctx) {
  Manifest& m = ctx.m;
  const auto obs = read_tie_points_csv(input_path(m, "tie_points"));
  const auto ids = image_id_list(m);
  const auto cams = load_cameras(m);

  const TiePointGraph graph = build_graph(obs);
  const AlignmentQuality q =
      assess_quality(graph, static_cast<int>(ids.size()));
  write_text_file(out_path(m, "stage.align", "quality"),
                  format_quality_report(q));

  const auto tracks = group_tracks(obs, cams);
  const std::vector<ImageBias> zero(cams.size());
  const ReprojectionStats pre = reprojection_stats(cams, zero, tracks);
  const BundleResult res = bundle_adjust(cams, tracks);
  const ReprojectionStats post = reprojection_stats(cams, res.biases, tracks);

  BiasTable bt;
  bt.image_ids = ids;
  bt.biases = res.biases;
  write_bias_csv(bt, out_path(m, "stage.align", "biases"));

  std::string rep;
  kv_add(rep, "images", fmt_int(static_cast<long long>(ids.size())));
  kv_add(rep, "tracks", fmt_int(post.num_tracks));
  kv_add(rep, "dropped_tracks", fmt_int(res.dropped_tracks));
  kv_add(rep, "iterations", fmt_int(res.iterations));
  kv_add(rep, "aq", q.aq ? "1" : "0");
  kv_add(rep, "pre_mean_px", fmt_double(pre.mean_px));
  kv_add(rep, "pre_variance_px2", fmt_double(pre.variance_px2));
  kv_add(rep, "post_mean_px", fmt_double(post.mean_px));
  kv_add(rep, "post_variance_px2", fmt_double(post.variance_px2));
  write_text_file(out_path(m, "stage.align", "report"), rep);
  return 0;
}

int stage_dsm(Ctx& ctx) {
  Manifest& m = ctx.m;
  const auto tiles =
      read_tiles_file(upstream(m, "stage.partition", "tiles", "partition"));
  const BiasTable bt =
      read_bias_csv(upstream(m, "stage.align", "biases", "align"));
  const auto pairs = read_pair_table(input_path(m, "pairs"));
  const auto ids = image_id_list(m);
  const auto cams = load_cameras(m);
  const LocalFrame frame = frame_of(m);
  const std::string disp_dir = m.resolve(m.get("inputs", "disparity_dir"));

  const auto cam_of = [&](const std::string& id) -> const RpcCamera& {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return cams[i];
    throw InvalidInput("pair references unknown image " + id);
  };

  FusionConfig fc;
  fc.cellsize = m.get_double_or("params", "resolution", fc.cellsize);
  fc.top_y = static_cast<int>(m.get_int_or("params", "top_y", fc.top_y));
  fc.median_window = static_cast<int>(
      m.get_int_or("params", "filter_window", fc.median_window));
  fc.hole_max_radius = static_cast<int>(
      m.get_int_or("params", "fill_radius", fc.hole_max_radius));
  const double h_init = m.get_double_or("params", "h_init", 0.0);
  // apron so the median and hole-fill supports reach past the core edge
  const double apron =
      (fc.hole_max_radius + fc.median_window / 2) * fc.cellsize;

  const std::string tile_dir = m.resolve(m.get("stage.dsm", "tile_dir"));
  fs::create_directories(tile_dir);

  std::vector<Grid> tile_grids;
  long long total_points = 0, total_dropped = 0;
  int missing_grids = 0;
  for (const Tile& t : tiles) {
    std::vector<GeoPoint> pts;
    for (const ImagePairRow& pr : pairs) {
      const std::string dp = disp_dir + "/" + t.id() + "_" + pr.id + ".asc";
      if (!fs::exists(dp)) {
        ++missing_grids;
        continue;
      }
      const DisparityMap dmap = read_disparity(dp);
      const CloudResult cr =
          disparity_to_cloud(dmap, cam_of(pr.a), bt.lookup(pr.a),
                             cam_of(pr.b), bt.lookup(pr.b), h_init,
                             ctx.workers);
      total_points += static_cast<long long>(cr.points.size());
      total_dropped += cr.dropped;
      pts.insert(pts.end(), cr.points.begin(), cr.points.end());
    }
    const RectM extent{t.core.x0 - apron, t.core.y0 - apron,
                       t.core.x1 + apron, t.core.y1 + apron};
    Grid fused = fuse_clouds(pts, frame, extent, fc, ctx.workers);
    write_ascii_grid(fused, tile_dir + "/" + t.id() + ".asc");
    tile_grids.push_back(std::move(fused));
  }

  write_ascii_grid(merge_tiles(tiles, tile_grids, aoi_of(m)),
                   out_path(m, "stage.dsm", "dsm"));
  const BoundaryStats bs = boundary_stats(tiles, tile_grids);

  std::string rep;
  kv_add(rep, "tiles", fmt_int(static_cast<long long>(tiles.size())));
  kv_add(rep, "points", fmt_int(total_points));
  kv_add(rep, "dropped", fmt_int(total_dropped));
  kv_add(rep, "missing_pair_grids", fmt_int(missing_grids));
  kv_add(rep, "num_boundaries", fmt_int(bs.num_boundaries));
  kv_add(rep, "boundary_median_abs_z", fmt_double(bs.median_abs_z));
  kv_add(rep, "boundary_median_rms_z", fmt_double(bs.median_rms_z));
  write_text_file(out_path(m, "stage.dsm", "report"),
                  rep + "\n" + format_boundary_report(bs));
  return 0;
}

int stage_ortho(Ctx& ctx) {
  Manifest& m = ctx.m;
  const auto tiles =
      read_tiles_file(upstream(m, "stage.partition", "tiles", "partition"));
  const BiasTable bt =
      read_bias_csv(upstream(m, "stage.align", "biases", "align"));
  const auto ids = image_id_list(m);
  const auto cams = load_cameras(m);
  const LocalFrame frame = frame_of(m);
  const RectM aoi = aoi_of(m);
  const Grid dem = read_ascii_grid(input_path(m, "dem"));

  const std::string tile_dir = m.resolve(m.get("stage.dsm", "tile_dir"));
  std::vector<Grid> dsm_tiles, dem_tiles;
  for (const Tile& t : tiles) {
    const std::string p = tile_dir + "/" + t.id() + ".asc";
    if (!fs::exists(p))
      throw InvalidInput("missing artifact " + p + "; run 'dsm' first");
    Grid g = read_ascii_grid(p);
    dem_tiles.push_back(resample_to(dem, g.header()));
    dsm_tiles.push_back(std::move(g));
  }

  OrthoConfig oc;
  oc.resolution = m.get_double_or("params", "resolution", oc.resolution);
  oc.h_step = m.get_double_or("params", "h_step", oc.h_step);
  oc.gamma = m.get_double_or("params", "gamma", oc.gamma);
  oc.interp = m.get_or("params", "interp", "nearest") == "bilinear"
                  ? OrthoConfig::Interp::BILINEAR
                  : OrthoConfig::Interp::NEAREST;

  const std::string odir = m.resolve(m.get("stage.ortho", "dir"));
  fs::create_directories(odir);

  std::string rep;
  double min_valid = 1.0;
  long long below_dem = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const ImagePatch patch = load_patch(m, ids[i]);
    std::vector<std::vector<Grid>> band_tiles(
        static_cast<std::size_t>(patch.nbands));
    std::vector<Grid> mask_tiles;
    for (std::size_t ti = 0; ti < tiles.size(); ++ti) {
      OrthoResult r =
          true_orthorectify(patch, cams[i], bt.lookup(ids[i]), dsm_tiles[ti],
                            dem_tiles[ti], frame, oc, ctx.workers);
      below_dem += r.dsm_below_dem;
      for (int b = 0; b < patch.nbands; ++b)
        band_tiles[b].push_back(std::move(r.bands[b]));
      mask_tiles.push_back(std::move(r.mask));
    }
    for (int b = 0; b < patch.nbands; ++b)
      write_ascii_grid(
          mosaic_tiles(tiles, band_tiles[b], aoi, -9999.0),
          odir + "/" + ids[i] + ".b" + fmt_int(b) + ".asc");
    const Grid mask = mosaic_tiles(tiles, mask_tiles, aoi, -1.0);
    write_ascii_grid(mask, odir + "/" + ids[i] + "_mask.asc");

    long long seen = 0;
    const long long cells =
        static_cast<long long>(mask.nrows()) * mask.ncols();
    for (int r = 0; r < mask.nrows(); ++r)
      for (int c = 0; c < mask.ncols(); ++c)
        if (mask.at(r, c) == 1.0) ++seen;
    const double vf = cells > 0 ? static_cast<double>(seen) / cells : 0.0;
    min_valid = std::min(min_valid, vf);
    kv_add(rep, "valid_fraction_" + ids[i], fmt_double(vf));
  }
  kv_add(rep, "min_valid_fraction", fmt_double(min_valid));
  kv_add(rep, "dsm_below_dem", fmt_int(below_dem));
  write_text_file(out_path(m, "stage.ortho", "report"), rep);
  return 0;
}

// Per-view ortho mosaics as written by the ortho stage.
struct ViewMosaics {
  std::vector<Grid> b0, b1, mask;
};

ViewMosaics read_ortho_views(const Manifest& m,
                             const std::vector<std::string>& ids) {
  const std::string odir = m.resolve(m.get("stage.ortho", "dir"));
  ViewMosaics v;
  for (const std::string& id : ids) {
    for (const char* suffix : {".b0.asc", ".b1.asc", "_mask.asc"}) {
      if (!fs::exists(odir + "/" + id + suffix))
        throw InvalidInput("missing artifact " + odir + "/" + id + suffix +
                           "; run 'ortho' first");
    }
    v.b0.push_back(read_ascii_grid(odir + "/" + id + ".b0.asc"));
    v.b1.push_back(read_ascii_grid(odir + "/" + id + ".b1.asc"));
    v.mask.push_back(read_ascii_grid(odir + "/" + id + "_mask.asc"));
  }
  return v;
}

int stage_labels(Ctx& ctx) {
  Manifest& m = ctx.m;
  const LocalFrame frame = frame_of(m);
  const RectM aoi = aoi_of(m);
  const double res = m.get_double_or("params", "resolution", 1.0);
  const GridHeader hdr = aoi_header(aoi, res);
  const auto ids = image_id_list(m);
  const ViewMosaics views = read_ortho_views(m, ids);
  const int nviews = static_cast<int>(ids.size());

  // Band-ratio maps, masked down to the cells each view actually saw;
  // zeroed bands turn into nodata inside the ratio.
  std::vector<Grid> ratio;
  for (int v = 0; v < nviews; ++v) {
    Grid b0 = views.b0[v], b1 = views.b1[v];
    for (int r = 0; r < hdr.nrows; ++r)
      for (int c = 0; c < hdr.ncols; ++c)
        if (views.mask[v].at(r, c) != 1.0) {
          b0.at(r, c) = 0.0;
          b1.at(r, c) = 0.0;
        }
    ratio.push_back(nhfd(b0, b1));
  }

  // Road evidence where the majority of the views that saw a cell agree.
  Grid evidence(hdr, 0.0);
  for (int r = 0; r < hdr.nrows; ++r)
    for (int c = 0; c < hdr.ncols; ++c) {
      int seen = 0, votes = 0;
      for (int v = 0; v < nviews; ++v) {
        if (!ratio[v].valid(r, c)) continue;
        ++seen;
        if (ratio[v].at(r, c) > 0.2) ++votes;
      }
      if (votes > 0 && 2 * votes >= seen) evidence.at(r, c) = 1.0;
    }

  const VectorLayer vec = read_geojson(input_path(m, "vectors"));
  const double road_width = m.get_double_or("params", "road_width", 16.0);
  const BufferResult raw = buffer_roads(vec, road_width, frame);
  const Grid ref_mask = class_mask(
      rasterize_labels(raw.layer, frame, hdr, ctx.workers), LabelClass::ROAD);

  const int radius = static_cast<int>(m.get_int_or("params", "ncc_radius", 6));
  const NccResult shift = ncc_align(evidence, ref_mask, radius, ctx.workers);

  // Undo the recovered misregistration on the source vectors, then buffer
  // and burn the corrected roads.
  VectorLayer corrected = vec;
  for (VectorFeature& f : corrected.features)
    for (auto& p : f.points) {
      p[0] += shift.dx * res / frame.meters_per_deg_lon();
      p[1] -= shift.dy * res / frame.meters_per_deg_lat();
    }
  const BufferResult fixed = buffer_roads(corrected, road_width, frame);
  const Grid road_mask =
      class_mask(rasterize_labels(fixed.layer, frame, hdr, ctx.workers),
                 LabelClass::ROAD);

  const Grid dsm = read_ascii_grid(upstream(m, "stage.dsm", "dsm", "dsm"));
  if (!dsm.header().same_layout(hdr))
    throw InvalidInput("surface grid does not match the label grid layout");
  const Grid dem_g =
      resample_to(read_ascii_grid(input_path(m, "dem")), dsm.header());
  const double minh = m.get_double_or("params", "min_building_height", 2.5);
  const Grid fp = building_footprints(dsm, dem_g, minh);

  Grid labels(hdr, static_cast<double>(LabelClass::BACKGROUND));
  long long road_cells = 0, building_cells = 0;
  for (int r = 0; r < hdr.nrows; ++r)
    for (int c = 0; c < hdr.ncols; ++c) {
      if (fp.at(r, c) == 1.0) {
        labels.at(r, c) = static_cast<double>(LabelClass::BUILDING);
        ++building_cells;
      } else if (road_mask.at(r, c) == 1.0) {
        labels.at(r, c) = static_cast<double>(LabelClass::ROAD);
        ++road_cells;
      }
    }
  write_ascii_grid(labels, out_path(m, "stage.labels", "labels"));

  // Per-view crisp class and visibility rasters for fusion and voting.
  const std::string vdir = m.resolve(m.get("stage.labels", "views_dir"));
  fs::create_directories(vdir);
  for (int v = 0; v < nviews; ++v) {
    Grid cls = Grid::filled_nodata(hdr);
    Grid vis(hdr, 0.0);
    for (int r = 0; r < hdr.nrows; ++r)
      for (int c = 0; c < hdr.ncols; ++c) {
        if (views.mask[v].at(r, c) != 1.0) continue;
        vis.at(r, c) = 1.0;
        double k = static_cast<double>(LabelClass::BACKGROUND);
        if (views.b0[v].at(r, c) >= 70.0)
          k = static_cast<double>(LabelClass::BUILDING);
        else if (ratio[v].valid(r, c) && ratio[v].at(r, c) > 0.2)
          k = static_cast<double>(LabelClass::ROAD);
        cls.at(r, c) = k;
      }
    write_ascii_grid(cls, vdir + "/" + ids[v] + "_class.asc");
    write_ascii_grid(vis, vdir + "/" + ids[v] + "_mask.asc");
  }

  std::string rep;
  kv_add(rep, "dx", fmt_int(shift.dx));
  kv_add(rep, "dy", fmt_int(shift.dy));
  kv_add(rep, "ncc_score", fmt_double(shift.score));
  kv_add(rep, "evaluated_shifts", fmt_int(shift.evaluated_shifts));
  kv_add(rep, "skipped_segments", fmt_int(raw.skipped_segments));
  kv_add(rep, "road_cells", fmt_int(road_cells));
  kv_add(rep, "building_cells", fmt_int(building_cells));
  write_text_file(out_path(m, "stage.labels", "report"), rep);
  return 0;
}

int stage_windows(Ctx& ctx) {
  Manifest& m = ctx.m;
  const Grid labels =
      read_ascii_grid(upstream(m, "stage.labels", "labels", "labels"));
  const int f = static_cast<int>(m.get_int_or("params", "window", 32));
  const int count = static_cast<int>(m.get_int_or("params", "windows", 16));
  const auto anchors =
      sample_ground_windows(labels.nrows(), labels.ncols(), f, count,
                            ctx.seed);

  std::string csv = "window_id,row,col\n";
  for (std::size_t i = 0; i < anchors.size(); ++i)
    csv += "w" + fmt_int(static_cast<long long>(i)) + "," +
           fmt_int(anchors[i].first) + "," + fmt_int(anchors[i].second) +
           "\n";
  write_text_file(out_path(m, "stage.windows", "windows"), csv);

  std::string rep;
  kv_add(rep, "windows", fmt_int(static_cast<long long>(anchors.size())));
  kv_add(rep, "window", fmt_int(f));
  kv_add(rep, "seed", fmt_int(static_cast<long long>(ctx.seed)));
  write_text_file(out_path(m, "stage.windows", "report"), rep);
  return 0;
}

// Per-view class and visibility rasters as written by the labels stage.
struct ViewRasters {
  std::vector<Grid> cls, mask;
};

ViewRasters read_view_rasters(const Manifest& m,
                              const std::vector<std::string>& ids) {
  const std::string vdir = m.resolve(m.get("stage.labels", "views_dir"));
  ViewRasters v;
  for (const std::string& id : ids) {
    const std::string pc = vdir + "/" + id + "_class.asc";
    const std::string pm = vdir + "/" + id + "_mask.asc";
    if (!fs::exists(pc) || !fs::exists(pm))
      throw InvalidInput("missing artifact " + pc + "; run 'labels' first");
    v.cls.push_back(read_ascii_grid(pc));
    v.mask.push_back(read_ascii_grid(pm));
  }
  return v;
}

struct WindowRow {
  std::string id;
  int row = 0, col = 0;
};

std::vector<WindowRow> read_windows_csv(const std::string& path) {
  std::vector<WindowRow> out;
  const std::string text = read_text_file(path);
  bool header = true;
  for (std::string_view line : split(text, '\n')) {
    const std::string s{trim(line)};
    if (s.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto f = split(s, ',');
    if (f.size() != 3) throw InvalidInput("bad window row: " + s);
    WindowRow w;
    w.id = std::string{trim(f[0])};
    w.row = static_cast<int>(parse_int(f[1], "window row"));
    w.col = static_cast<int>(parse_int(f[2], "window col"));
    out.push_back(w);
  }
  return out;
}

int stage_fuse_train(Ctx& ctx) {
  Manifest& m = ctx.m;
  const auto ids = image_id_list(m);
  const ViewRasters views = read_view_rasters(m, ids);
  const Grid labels =
      read_ascii_grid(upstream(m, "stage.labels", "labels", "labels"));
  const auto wins = read_windows_csv(
      upstream(m, "stage.windows", "windows", "windows"));
  if (wins.empty()) throw InvalidInput("window list is empty");

  const int f = static_cast<int>(m.get_int_or("params", "window", 32));
  const int slots = static_cast<int>(m.get_int_or("params", "subset_size", 4));
  const ViewStack::Layout layout =
      m.get_or("params", "layout", "A") == "B"
          ? ViewStack::Layout::PER_CLASS_VIEWS
          : ViewStack::Layout::PER_VIEW_CHANNELS;
  LossConfig lc;
  lc.alpha = m.get_double_or("params", "alpha", lc.alpha);
  lc.beta = m.get_double_or("params", "beta", lc.beta);
  const double lr = m.get_double_or("params", "lr", 0.05);
  const int epochs = static_cast<int>(m.get_int_or("params", "epochs", 20));
  const double slack = m.get_double_or("params", "iou_slack", 0.05);

  const auto view_index = [&](const std::string& id) {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return static_cast<int>(i);
    throw InvalidInput("subset names unknown view " + id);
  };

  // Crisp per-view logits over one window; occluded cells stay masked.
  const auto view_map = [&](int v, const WindowRow& w) {
    PredictionMap pm;
    pm.view_id = ids[v];
    pm.classes = kNumClasses;
    pm.height = f;
    pm.width = f;
    pm.scores.assign(static_cast<std::size_t>(kNumClasses) * f * f, 0.0);
    pm.visible.assign(static_cast<std::size_t>(f) * f, 0);
    for (int y = 0; y < f; ++y)
      for (int x = 0; x < f; ++x) {
        const int gr = w.row + y, gc = w.col + x;
        if (views.mask[v].at(gr, gc) != 1.0 || !views.cls[v].valid(gr, gc))
          continue;
        pm.visible[static_cast<std::size_t>(y) * f + x] = 1;
        const int k = static_cast<int>(views.cls[v].at(gr, gc));
        for (int c = 0; c < kNumClasses; ++c)
          pm.score(c, y, x) = c == k ? 2.0 : -2.0;
      }
    return pm;
  };

  const auto gt_of = [&](const WindowRow& w) {
    GroundTruthWindow g;
    g.height = f;
    g.width = f;
    g.labels.assign(static_cast<std::size_t>(f) * f, 0);
    for (int y = 0; y < f; ++y)
      for (int x = 0; x < f; ++x)
        g.labels[static_cast<std::size_t>(y) * f + x] =
            static_cast<std::uint8_t>(labels.at(w.row + y, w.col + x));
    return g;
  };

  const auto present_views = [&](const WindowRow& w) {
    std::vector<std::string> out;
    for (std::size_t v = 0; v < ids.size(); ++v) {
      bool any = false;
      for (int y = 0; y < f && !any; ++y)
        for (int x = 0; x < f && !any; ++x)
          if (views.mask[v].at(w.row + y, w.col + x) == 1.0) any = true;
      if (any) out.push_back(ids[v]);
    }
    return out;
  };

  // Deterministic train/validation split, three quarters for training.
  std::vector<int> order(wins.size());
  std::iota(order.begin(), order.end(), 0);
  {
    std::mt19937_64 rng(ctx.seed * 7919ULL + 1);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng() % i]);
  }
  const std::size_t ntrain = std::max<std::size_t>(1, order.size() * 3 / 4);
  const std::vector<int> train(order.begin(), order.begin() + ntrain);
  const std::vector<int> val(order.begin() + ntrain, order.end());

  FusionWeights fw = FusionWeights::uniform(layout, slots, kNumClasses);

  std::vector<EpochRecord> history;
  for (int e = 0; e < epochs; ++e) {
    double train_loss = 0.0;
    int nbatch = 0;
    for (const int wi : train) {
      const WindowRow& w = wins[wi];
      const GroundTruthWindow gt = gt_of(w);
      const auto subsets =
          split_subsets(present_views(w), slots,
                        ctx.seed + 1000003ULL * e + 131ULL * wi);
      for (const auto& sub : subsets) {
        std::vector<PredictionMap> maps;
        for (const std::string& vid : sub)
          maps.push_back(view_map(view_index(vid), w));
        const ViewStack st = assemble_stack(maps, slots, layout);
        const LossResult res = total_loss(st, fw, gt, lc, ctx.workers);
        train_loss += res.total;
        ++nbatch;
        for (std::size_t k = 0; k < fw.w.size(); ++k)
          fw.w[k] -= lr * res.grad_w[k];
        for (std::size_t k = 0; k < fw.bias.size(); ++k)
          fw.bias[k] -= lr * res.grad_bias[k];
      }
    }
    if (nbatch > 0) train_loss /= nbatch;

    double val_loss = 0.0;
    int nval = 0;
    std::array<long long, kNumClasses> inter{}, uni{};
    for (const int wi : val) {
      const WindowRow& w = wins[wi];
      const GroundTruthWindow gt = gt_of(w);
      // validation draw does not move across epochs
      const auto subsets =
          split_subsets(present_views(w), slots, ctx.seed * 31ULL + wi);
      for (const auto& sub : subsets) {
        std::vector<PredictionMap> maps;
        for (const std::string& vid : sub)
          maps.push_back(view_map(view_index(vid), w));
        const ViewStack st = assemble_stack(maps, slots, layout);
        const LossResult res = total_loss(st, fw, gt, lc, ctx.workers);
        val_loss += res.total;
        ++nval;
        const FusedScores fused = fuse(st, fw);
        for (int y = 0; y < f; ++y)
          for (int x = 0; x < f; ++x) {
            int best = 0;
            for (int c = 1; c < kNumClasses; ++c)
              if (fused.p(c, y, x) > fused.p(best, y, x)) best = c;
            const int want = gt.label(y, x);
            if (best == want) ++inter[want];
            if (best == want)
              ++uni[want];
            else {
              ++uni[want];
              ++uni[best];
            }
          }
      }
    }
    if (nval > 0) val_loss /= nval;
    double iou_sum = 0.0;
    int iou_n = 0;
    for (int c = 0; c < kNumClasses; ++c)
      if (uni[c] > 0) {
        iou_sum += static_cast<double>(inter[c]) / uni[c];
        ++iou_n;
      }
    EpochRecord er;
    er.epoch = e;
    er.train_loss = train_loss;
    er.val_loss = val_loss;
    er.val_iou = iou_n > 0 ? iou_sum / iou_n : 0.0;
    history.push_back(er);
  }

  const CheckpointChoice choice = select_checkpoints(history, slack);

  std::string wtxt;
  kv_add(wtxt, "layout",
         layout == ViewStack::Layout::PER_VIEW_CHANNELS ? "A" : "B");
  kv_add(wtxt, "slots", fmt_int(slots));
  kv_add(wtxt, "classes", fmt_int(kNumClasses));
  std::string wlist, blist;
  for (std::size_t k = 0; k < fw.w.size(); ++k)
    wlist += (k ? "," : "") + fmt_double(fw.w[k]);
  for (std::size_t k = 0; k < fw.bias.size(); ++k)
    blist += (k ? "," : "") + fmt_double(fw.bias[k]);
  kv_add(wtxt, "w", wlist);
  kv_add(wtxt, "bias", blist);
  write_text_file(out_path(m, "stage.fuse-train", "weights"), wtxt);

  std::string rep;
  kv_add(rep, "epochs", fmt_int(epochs));
  kv_add(rep, "train_windows", fmt_int(static_cast<long long>(train.size())));
  kv_add(rep, "val_windows", fmt_int(static_cast<long long>(val.size())));
  kv_add(rep, "first_train_loss", fmt_double(history.front().train_loss));
  kv_add(rep, "last_train_loss", fmt_double(history.back().train_loss));
  kv_add(rep, "last_val_loss", fmt_double(history.back().val_loss));
  kv_add(rep, "last_val_iou", fmt_double(history.back().val_iou));
  kv_add(rep, "e_min_val", fmt_int(choice.e_min_val));
  kv_add(rep, "e_min_train", fmt_int(choice.e_min_train));
  kv_add(rep, "fell_back", choice.fell_back ? "1" : "0");
  kv_add(rep, "train_decreased",
         history.back().train_loss < history.front().train_loss ? "1" : "0");
  rep += "\nepoch,train_loss,val_loss,val_iou\n";
  for (const EpochRecord& er : history)
    rep += fmt_int(er.epoch) + "," + fmt_double(er.train_loss) + "," +
           fmt_double(er.val_loss) + "," + fmt_double(er.val_iou) + "\n";
  write_text_file(out_path(m, "stage.fuse-train", "report"), rep);
  return 0;
}

int stage_vote(Ctx& ctx) {
  Manifest& m = ctx.m;
  const auto ids = image_id_list(m);
  const ViewRasters views = read_view_rasters(m, ids);

  const VoteResult vr = majority_vote(views.cls, views.mask);
  write_ascii_grid(vr.classes, out_path(m, "stage.vote", "vote"));

  const Grid truth = read_ascii_grid(input_path(m, "truth_labels"));
  const IouResult iou = compute_iou(vr.classes, truth);

  std::string rep;
  kv_add(rep, "views", fmt_int(static_cast<long long>(ids.size())));
  kv_add(rep, "flagged", fmt_int(vr.flagged));
  kv_add(rep, "iou_background",
         fmt_double(iou.iou[static_cast<int>(LabelClass::BACKGROUND)]));
  kv_add(rep, "iou_road",
         fmt_double(iou.iou[static_cast<int>(LabelClass::ROAD)]));
  kv_add(rep, "iou_building",
         fmt_double(iou.iou[static_cast<int>(LabelClass::BUILDING)]));
  kv_add(rep, "mean_defined_iou", fmt_double(iou.mean_defined));
  write_text_file(out_path(m, "stage.vote", "report"), rep);
  return 0;
}

int stage_schedule_sim(Ctx& ctx) {
  Manifest& m = ctx.m;
  PlanFile pf = read_plan_file(input_path(m, "plan"));
  if (ctx.seed_given) pf.plan.seed = ctx.seed;

  const ModeComparison mc = compare_modes(pf.vms, pf.plan);
  const SimTimeline tl = simulate(pf.vms, pf.plan, SimMode::PIPELINED);
  write_timeline_csv(tl, out_path(m, "stage.schedule-sim", "timeline"));

  std::string rep;
  kv_add(rep, "vms", fmt_int(static_cast<long long>(pf.vms.size())));
  kv_add(rep, "tiles", fmt_int(pf.plan.tiles));
  kv_add(rep, "pairs_per_tile", fmt_int(pf.plan.pairs_per_tile));
  kv_add(rep, "barrier_minutes", fmt_double(mc.barrier_minutes));
  kv_add(rep, "pipelined_minutes", fmt_double(mc.pipelined_minutes));
  kv_add(rep, "saving_minutes", fmt_double(mc.saving_minutes));
  kv_add(rep, "events", fmt_int(static_cast<long long>(tl.events.size())));
  kv_add(rep, "failed_attempts", fmt_int(tl.failed_attempts));
  kv_add(rep, "retries", fmt_int(tl.retries));
  write_text_file(out_path(m, "stage.schedule-sim", "report"), rep);
  return 0;
}

int stage_validate(Ctx& ctx) {
  Manifest& m = ctx.m;
  const auto report_of = [&](const std::string& section,
                             const std::string& producer) {
    return kv_read(upstream(m, section, "report", producer));
  };

  struct Check {
    std::string name;
    bool pass;
    std::string detail;
  };
  std::vector<Check> checks;
  const auto add = [&](const std::string& name, bool pass,
                       const std::string& detail) {
    checks.push_back({name, pass, detail});
  };

  {
    const auto kv = report_of("stage.align", "align");
    const double post = kv_num(kv, "post_mean_px", "align");
    add("align_post_mean_px", post <= 0.5,
        fmt_double(post) + " px, limit 0.5");
  }
  {
    const auto kv = report_of("stage.dsm", "dsm");
    const double b = kv_num(kv, "boundary_median_abs_z", "dsm");
    add("dsm_boundary_median_abs_z", b <= 0.5,
        fmt_double(b) + " m, limit 0.5");
  }
  {
    const auto kv = report_of("stage.ortho", "ortho");
    const double v = kv_num(kv, "min_valid_fraction", "ortho");
    add("ortho_min_valid_fraction", v >= 0.8,
        fmt_double(v) + ", floor 0.8");
  }
  {
    const auto kv = report_of("stage.labels", "labels");
    const long long dx = static_cast<long long>(kv_num(kv, "dx", "labels"));
    const long long dy = static_cast<long long>(kv_num(kv, "dy", "labels"));
    const long long ex = m.get_int("truth", "expected_dx");
    const long long ey = m.get_int("truth", "expected_dy");
    add("labels_vector_shift", dx == ex && dy == ey,
        "(" + fmt_int(dx) + ", " + fmt_int(dy) + ") expected (" +
            fmt_int(ex) + ", " + fmt_int(ey) + ")");
  }
  {
    const auto kv = report_of("stage.fuse-train", "fuse-train");
    const double dec = kv_num(kv, "train_decreased", "fuse-train");
    add("fuse_train_loss_decreased", dec == 1.0, "first to last epoch");
  }
  {
    const auto kv = report_of("stage.vote", "vote");
    const double road = kv_num(kv, "iou_road", "vote");
    const double bld = kv_num(kv, "iou_building", "vote");
    add("vote_iou_road", road >= 0.95, fmt_double(road) + ", floor 0.95");
    add("vote_iou_building", bld >= 0.95, fmt_double(bld) + ", floor 0.95");
  }
  {
    const auto kv = report_of("stage.schedule-sim", "schedule-sim");
    const double barrier = kv_num(kv, "barrier_minutes", "schedule-sim");
    const double pipe = kv_num(kv, "pipelined_minutes", "schedule-sim");
    add("schedule_barrier_minutes", barrier == 22000.0,
        fmt_double(barrier) + ", expected 22000");
    add("schedule_pipelined_minutes", pipe >= 15960.0 && pipe <= 16200.0,
        fmt_double(pipe) + ", window [15960, 16200]");
  }

  bool all = true;
  std::string rep;
  for (const Check& c : checks) {
    all = all && c.pass;
    rep += std::string(c.pass ? "PASS" : "FAIL") + " " + c.name + " (" +
           c.detail + ")\n";
  }
  kv_add(rep, "overall", all ? "PASS" : "FAIL");
  write_text_file(out_path(m, "stage.validate", "report"), rep);
  return all ? 0 : 1;
}

}  // namespace

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {
      "partition", "align",      "dsm",  "ortho",        "labels",
      "windows",   "fuse-train", "vote", "schedule-sim", "validate"};
  return names;
}

int run_stage(const std::string& name, Manifest& manifest, int workers,
              long long seed) {
  Ctx ctx{manifest, workers,
          seed >= 0 ? static_cast<std::uint64_t>(seed)
                    : static_cast<std::uint64_t>(
                          manifest.get_int_or("params", "seed", 0)),
          seed >= 0};
  if (name == "partition") return stage_partition(ctx);
  if (name == "align") return stage_align(ctx);
  if (name == "dsm") return stage_dsm(ctx);
  if (name == "ortho") return stage_ortho(ctx);
  if (name == "labels") return stage_labels(ctx);
  if (name == "windows") return stage_windows(ctx);
  if (name == "fuse-train") return stage_fuse_train(ctx);
  if (name == "vote") return stage_vote(ctx);
  if (name == "schedule-sim") return stage_schedule_sim(ctx);
  if (name == "validate") return stage_validate(ctx);
  throw InvalidInput("unknown stage '" + name + "'");
}

}  // namespace orthoforge
