#include "orthoforge/rpc.hpp"

#include <cmath>
#include <map>

#include "orthoforge/error.hpp"
#include "orthoforge/textio.hpp"

namespace orthoforge {

std::array<double, 20> rpc_terms(double P, double L, double H) {
  // RPC00B ordering. Kept explicit so the index -> monomial mapping can be
  // checked against coefficient files by eye.
  std::array<double, 20> t;
  t[0] = 1.0;
  t[1] = L;
  t[2] = P;
  t[3] = H;
  t[4] = L * P;
  t[5] = L * H;
  t[6] = P * H;
  t[7] = L * L;
  t[8] = P * P;
  t[9] = H * H;
  t[10] = P * L * H;
  t[11] = L * L * L;
  t[12] = L * P * P;
  t[13] = L * H * H;
  t[14] = L * L * P;
  t[15] = P * P * P;
  t[16] = P * H * H;
  t[17] = L * L * H;
  t[18] = P * P * H;
  t[19] = H * H * H;
  return t;
}

namespace {

double dot20(const std::array<double, 20>& a, const std::array<double, 20>& b) {
  double s = 0.0;
  for (int i = 0; i < 20; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

PixelCoord rpc_project(const RpcCamera& cam, const ImageBias& bias,
                       const GeoPoint& p) {
  const double P = (p.lat - cam.lat_off) / cam.lat_scale;
  const double L = (p.lon - cam.lon_off) / cam.lon_scale;
  const double H = (p.h - cam.height_off) / cam.height_scale;
  const auto t = rpc_terms(P, L, H);

  const double sden = dot20(cam.samp_den, t);
  const double lden = dot20(cam.line_den, t);
  if (std::fabs(sden) < 1e-12 || std::fabs(lden) < 1e-12)
    throw DegenerateCamera("rpc denominator vanished for image " +
                           cam.image_id);

  PixelCoord px;
  px.sample =
      dot20(cam.samp_num, t) / sden * cam.samp_scale + cam.samp_off +
      bias.d_sample;
  px.line =
      dot20(cam.line_num, t) / lden * cam.line_scale + cam.line_off +
      bias.d_line;
  return px;
}

bool rpc_in_validity_box(const RpcCamera& cam, const GeoPoint& p) {
  return std::fabs(p.lat - cam.lat_off) <= 1.5 * cam.lat_scale &&
         std::fabs(p.lon - cam.lon_off) <= 1.5 * cam.lon_scale &&
         std::fabs(p.h - cam.height_off) <= 1.5 * cam.height_scale;
}

namespace {

const char* kScalarKeys[] = {"LINE_OFF",   "SAMP_OFF",   "LAT_OFF",
                             "LONG_OFF",   "HEIGHT_OFF", "LINE_SCALE",
                             "SAMP_SCALE", "LAT_SCALE",  "LONG_SCALE",
                             "HEIGHT_SCALE"};

double* scalar_slot(RpcCamera& cam, const std::string& key) {
  if (key == "LINE_OFF") return &cam.line_off;
  if (key == "SAMP_OFF") return &cam.samp_off;
  if (key == "LAT_OFF") return &cam.lat_off;
  if (key == "LONG_OFF") return &cam.lon_off;
  if (key == "HEIGHT_OFF") return &cam.height_off;
  if (key == "LINE_SCALE") return &cam.line_scale;
  if (key == "SAMP_SCALE") return &cam.samp_scale;
  if (key == "LAT_SCALE") return &cam.lat_scale;
  if (key == "LONG_SCALE") return &cam.lon_scale;
  if (key == "HEIGHT_SCALE") return &cam.height_scale;
  return nullptr;
}

std::array<double, 20>* coeff_slot(RpcCamera& cam, const std::string& prefix) {
  if (prefix == "LINE_NUM_COEFF") return &cam.line_num;
  if (prefix == "LINE_DEN_COEFF") return &cam.line_den;
  if (prefix == "SAMP_NUM_COEFF") return &cam.samp_num;
  if (prefix == "SAMP_DEN_COEFF") return &cam.samp_den;
  return nullptr;
}

}  // namespace

RpcCamera read_rpc_file(const std::string& path) {
  const std::string text = read_text_file(path);
  RpcCamera cam;
  // image id defaults to the file stem when no IMAGE_ID line is present
  {
    auto slash = path.find_last_of('/');
    std::string base =
        slash == std::string::npos ? path : path.substr(slash + 1);
    auto dot = base.find_last_of('.');
    cam.image_id = dot == std::string::npos ? base : base.substr(0, dot);
  }

  std::map<std::string, bool> seen;
  for (std::string_view line : split(text, '\n')) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw IoError(path + ": expected KEY = value, got '" +
                    std::string(line) + "'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));

    if (key == "IMAGE_ID") {
      cam.image_id = std::string(value);
      continue;
    }
    if (double* slot = scalar_slot(cam, key)) {
      *slot = parse_double(value, key);
      seen[key] = true;
      continue;
    }
    const auto us = key.find_last_of('_');
    if (us != std::string::npos) {
      const std::string prefix = key.substr(0, us);
      if (auto* arr = coeff_slot(cam, prefix)) {
        const long long idx = parse_int(key.substr(us + 1), key);
        if (idx < 1 || idx > 20)
          throw IoError(path + ": coefficient index out of range in " + key);
        (*arr)[idx - 1] = parse_double(value, key);
        seen[prefix] = true;
        continue;
      }
    }
    throw IoError(path + ": unknown key '" + key + "'");
  }

  for (const char* k : kScalarKeys)
    if (!seen[k]) throw IoError(path + ": missing " + std::string(k));
  for (const char* k :
       {"LINE_NUM_COEFF", "LINE_DEN_COEFF", "SAMP_NUM_COEFF", "SAMP_DEN_COEFF"})
    if (!seen[k]) throw IoError(path + ": missing " + std::string(k) + "_*");
  if (cam.lat_scale == 0 || cam.lon_scale == 0 || cam.height_scale == 0 ||
      cam.line_scale == 0 || cam.samp_scale == 0)
    throw IoError(path + ": zero scale");
  return cam;
}

void write_rpc_file(const RpcCamera& cam, const std::string& path) {
  std::string out;
  out += "IMAGE_ID = " + cam.image_id + "\n";
  out += "LINE_OFF = " + fmt_double(cam.line_off) + "\n";
  out += "SAMP_OFF = " + fmt_double(cam.samp_off) + "\n";
  out += "LAT_OFF = " + fmt_double(cam.lat_off) + "\n";
  out += "LONG_OFF = " + fmt_double(cam.lon_off) + "\n";
  out += "HEIGHT_OFF = " + fmt_double(cam.height_off) + "\n";
  out += "LINE_SCALE = " + fmt_double(cam.line_scale) + "\n";
  out += "SAMP_SCALE = " + fmt_double(cam.samp_scale) + "\n";
  out += "LAT_SCALE = " + fmt_double(cam.lat_scale) + "\n";
  out += "LONG_SCALE = " + fmt_double(cam.lon_scale) + "\n";
  out += "HEIGHT_SCALE = " + fmt_double(cam.height_scale) + "\n";
  const struct {
    const char* name;
    const std::array<double, 20>* arr;
  } blocks[] = {{"LINE_NUM_COEFF", &cam.line_num},
                {"LINE_DEN_COEFF", &cam.line_den},
                {"SAMP_NUM_COEFF", &cam.samp_num},
                {"SAMP_DEN_COEFF", &cam.samp_den}};
  for (const auto& b : blocks)
    for (int i = 0; i < 20; ++i)
      out += std::string(b.name) + "_" + fmt_int(i + 1) + " = " +
             fmt_double((*b.arr)[i]) + "\n";
  write_text_file(path, out);
}

ImageBias BiasTable::lookup(const std::string& image_id) const {
  for (std::size_t i = 0; i < image_ids.size(); ++i)
    if (image_ids[i] == image_id) return biases[i];
  return {};
}

BiasTable read_bias_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  BiasTable t;
  bool first = true;
  for (std::string_view line : split(text, '\n')) {
    line = trim(line);
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.substr(0, 8) == "image_id") continue;  // header row
    }
    auto cols = split(line, ',');
    if (cols.size() != 3)
      throw IoError(path + ": expected image_id,d_sample,d_line");
    t.image_ids.emplace_back(trim(cols[0]));
    ImageBias b;
    b.d_sample = parse_double(cols[1], "d_sample");
    b.d_line = parse_double(cols[2], "d_line");
    t.biases.push_back(b);
  }
  return t;
}

void write_bias_csv(const BiasTable& t, const std::string& path) {
  std::string out = "image_id,d_sample,d_line\n";
  for (std::size_t i = 0; i < t.image_ids.size(); ++i)
    out += t.image_ids[i] + "," + fmt_double(t.biases[i].d_sample) + "," +
           fmt_double(t.biases[i].d_line) + "\n";
  write_text_file(path, out);
}

}  // namespace orthoforge
