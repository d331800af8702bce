#pragma once

#include <string>
#include <vector>

#include "orthoforge/geo.hpp"

namespace orthoforge {

// Regular raster over the local plane, ESRI ASCII grid conventions:
// row 0 is the northernmost row, values run row-major, xll/yll name the
// outer corner of the lower-left cell. Cell size in meters, square cells.
struct GridHeader {
  int ncols = 0;
  int nrows = 0;
  double xll = 0.0;
  double yll = 0.0;
  double cellsize = 1.0;
  double nodata = -9999.0;

  bool same_layout(const GridHeader& o) const;
  double x_center(int col) const { return xll + (col + 0.5) * cellsize; }
  double y_center(int row) const {
    return yll + (nrows - row - 0.5) * cellsize;
  }
  // Cell containing a point; false if outside the raster extent.
  bool cell_of(double x, double y, int& row, int& col) const;
  double width() const { return ncols * cellsize; }
  double height() const { return nrows * cellsize; }
};

class Grid {
 public:
  Grid() = default;
  Grid(const GridHeader& h, double fill)
      : header_(h),
        values_(static_cast<std::size_t>(h.ncols) * h.nrows, fill) {}
  static Grid filled_nodata(const GridHeader& h) {
    return Grid(h, h.nodata);
  }

  const GridHeader& header() const { return header_; }
  int nrows() const { return header_.nrows; }
  int ncols() const { return header_.ncols; }
  double nodata() const { return header_.nodata; }

  double& at(int row, int col) {
    return values_[static_cast<std::size_t>(row) * header_.ncols + col];
  }
  double at(int row, int col) const {
    return values_[static_cast<std::size_t>(row) * header_.ncols + col];
  }
  bool valid(int row, int col) const {
    return at(row, col) != header_.nodata;
  }
  bool in_bounds(int row, int col) const {
    return row >= 0 && row < header_.nrows && col >= 0 && col < header_.ncols;
  }

  // Value of the cell containing (x, y); nodata when outside the extent.
  double value_at(double x, double y) const;

  std::vector<double>& data() { return values_; }
  const std::vector<double>& data() const { return values_; }

 private:
  GridHeader header_;
  std::vector<double> values_;
};

Grid read_ascii_grid(const std::string& path);
void write_ascii_grid(const Grid& g, const std::string& path);

}  // namespace orthoforge
