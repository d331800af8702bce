#include "orthoforge/grid.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "orthoforge/error.hpp"
#include "orthoforge/textio.hpp"

namespace orthoforge {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("unable to open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("unable to open " + path + " for writing");
  out << content;
  if (!out) throw IoError("short write to " + path);
}

bool GridHeader::same_layout(const GridHeader& o) const {
  return ncols == o.ncols && nrows == o.nrows && xll == o.xll &&
         yll == o.yll && cellsize == o.cellsize;
}

bool GridHeader::cell_of(double x, double y, int& row, int& col) const {
  const double fc = std::floor((x - xll) / cellsize);
  const double fr = std::floor((yll + nrows * cellsize - y) / cellsize);
  if (fc < 0 || fc >= ncols || fr < 0 || fr >= nrows) return false;
  col = static_cast<int>(fc);
  row = static_cast<int>(fr);
  return true;
}

double Grid::value_at(double x, double y) const {
  int r, c;
  if (!header_.cell_of(x, y, r, c)) return header_.nodata;
  return at(r, c);
}

Grid read_ascii_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("unable to open " + path);

  GridHeader h;
  bool have_nodata = false;
  // Six header lines: ncols nrows xllcorner yllcorner cellsize NODATA_value.
  for (int i = 0; i < 6; ++i) {
    std::string key;
    std::string value;
    if (!(in >> key >> value))
      throw IoError(path + ": truncated ascii grid header");
    for (auto& ch : key) ch = static_cast<char>(std::tolower(ch));
    if (key == "ncols")
      h.ncols = static_cast<int>(parse_int(value, "ncols"));
    else if (key == "nrows")
      h.nrows = static_cast<int>(parse_int(value, "nrows"));
    else if (key == "xllcorner")
      h.xll = parse_double(value, "xllcorner");
    else if (key == "yllcorner")
      h.yll = parse_double(value, "yllcorner");
    else if (key == "cellsize")
      h.cellsize = parse_double(value, "cellsize");
    else if (key == "nodata_value") {
      h.nodata = parse_double(value, "NODATA_value");
      have_nodata = true;
    } else {
      throw IoError(path + ": unexpected header key '" + key + "'");
    }
  }
  if (!have_nodata) throw IoError(path + ": missing NODATA_value");
  if (h.ncols <= 0 || h.nrows <= 0 || h.cellsize <= 0)
    throw IoError(path + ": bad grid dimensions");

  Grid g(h, h.nodata);
  const std::size_t n = static_cast<std::size_t>(h.ncols) * h.nrows;
  for (std::size_t i = 0; i < n; ++i) {
    double v;
    if (!(in >> v)) throw IoError(path + ": truncated ascii grid data");
    g.data()[i] = v;
  }
  return g;
}

void write_ascii_grid(const Grid& g, const std::string& path) {
  const GridHeader& h = g.header();
  std::string out;
  out.reserve(static_cast<std::size_t>(h.ncols) * h.nrows * 8 + 128);
  out += "ncols " + fmt_int(h.ncols) + "\n";
  out += "nrows " + fmt_int(h.nrows) + "\n";
  out += "xllcorner " + fmt_double(h.xll) + "\n";
  out += "yllcorner " + fmt_double(h.yll) + "\n";
  out += "cellsize " + fmt_double(h.cellsize) + "\n";
  out += "NODATA_value " + fmt_double(h.nodata) + "\n";
  for (int r = 0; r < h.nrows; ++r) {
    for (int c = 0; c < h.ncols; ++c) {
      if (c) out += ' ';
      out += fmt_double(g.at(r, c));
    }
    out += '\n';
  }
  write_text_file(path, out);
}

}  // namespace orthoforge
