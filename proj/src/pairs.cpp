#include "orthoforge/pairs.hpp"

#include <algorithm>
#include <cmath>

#include "orthoforge/error.hpp"
#include "orthoforge/textio.hpp"

namespace orthoforge {

namespace {

bool passes(const PairCandidate& c, const PairSelectConfig& cfg,
            double relax) {
  const double view_lo = cfg.view_diff_min_deg * (1.0 - relax);
  const double view_hi = cfg.view_diff_max_deg * (1.0 + relax);
  const double sun_hi = cfg.sun_diff_max_deg * (1.0 + relax);
  const double nadir_hi = cfg.off_nadir_max_deg * (1.0 + relax);
  return c.view_angle_diff_deg >= view_lo && c.view_angle_diff_deg <= view_hi &&
         c.sun_angle_diff_deg <= sun_hi && c.off_nadir_a_deg <= nadir_hi &&
         c.off_nadir_b_deg <= nadir_hi;
}

std::vector<PairCandidate> run_selection(
    const std::vector<PairCandidate>& candidates, const PairSelectConfig& cfg,
    double relax) {
  std::vector<std::vector<PairCandidate>> bins(cfg.azimuth_bins);
  const double bin_width = 360.0 / cfg.azimuth_bins;
  for (const auto& c : candidates) {
    if (!passes(c, cfg, relax)) continue;
    double az = std::fmod(c.azimuth_deg, 360.0);
    if (az < 0) az += 360.0;
    const int b = std::min(static_cast<int>(az / bin_width),
                           cfg.azimuth_bins - 1);
    bins[b].push_back(c);
  }
  // Smallest convergence first inside each bin; pair id breaks exact ties so
  // selection does not depend on input order.
  for (auto& bin : bins)
    std::sort(bin.begin(), bin.end(),
              [](const PairCandidate& a, const PairCandidate& b) {
                if (a.view_angle_diff_deg != b.view_angle_diff_deg)
                  return a.view_angle_diff_deg < b.view_angle_diff_deg;
                return a.pair_id < b.pair_id;
              });

  std::vector<PairCandidate> picked;
  std::vector<std::size_t> cursor(bins.size(), 0);
  bool any = true;
  while (static_cast<int>(picked.size()) < cfg.max_pairs && any) {
    any = false;
    for (std::size_t b = 0; b < bins.size(); ++b) {
      if (cursor[b] < bins[b].size()) {
        picked.push_back(bins[b][cursor[b]++]);
        any = true;
        if (static_cast<int>(picked.size()) >= cfg.max_pairs) break;
      }
    }
  }
  return picked;
}

}  // namespace

PairSelection select_pairs(const std::vector<PairCandidate>& candidates,
                           const PairSelectConfig& cfg) {
  PairSelection sel;
  sel.selected = run_selection(candidates, cfg, 0.0);
  if (static_cast<int>(sel.selected.size()) < cfg.min_pairs) {
    sel.relaxed = true;
    sel.selected = run_selection(candidates, cfg, cfg.relax_factor);
  }
  sel.under_minimum = static_cast<int>(sel.selected.size()) < cfg.min_pairs;
  return sel;
}

std::vector<PairCandidate> read_pairs_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<PairCandidate> out;
  bool first = true;
  for (std::string_view line : split(text, '\n')) {
    line = trim(line);
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.substr(0, 7) == "pair_id") continue;
    }
    auto cols = split(line, ',');
    if (cols.size() != 8) throw IoError(path + ": bad pair row");
    PairCandidate c;
    c.pair_id = std::string(trim(cols[0]));
    c.image_a = std::string(trim(cols[1]));
    c.image_b = std::string(trim(cols[2]));
    c.view_angle_diff_deg = parse_double(cols[3], "view_angle_diff");
    c.sun_angle_diff_deg = parse_double(cols[4], "sun_angle_diff");
    c.off_nadir_a_deg = parse_double(cols[5], "off_nadir_a");
    c.off_nadir_b_deg = parse_double(cols[6], "off_nadir_b");
    c.azimuth_deg = parse_double(cols[7], "azimuth");
    out.push_back(c);
  }
  return out;
}

void write_pairs_csv(const std::vector<PairCandidate>& pairs,
                     const std::string& path) {
  std::string out =
      "pair_id,image_a,image_b,view_angle_diff,sun_angle_diff,"
      "off_nadir_a,off_nadir_b,azimuth\n";
  for (const auto& c : pairs) {
    out += c.pair_id + "," + c.image_a + "," + c.image_b + ",";
    out += fmt_double(c.view_angle_diff_deg) + "," +
           fmt_double(c.sun_angle_diff_deg) + "," +
           fmt_double(c.off_nadir_a_deg) + "," +
           fmt_double(c.off_nadir_b_deg) + "," + fmt_double(c.azimuth_deg) +
           "\n";
  }
  write_text_file(path, out);
}

}  // namespace orthoforge
