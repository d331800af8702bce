#pragma once

namespace orthoforge {

// Geodetic point, WGS84 geographic. Heights are meters above the ellipsoid.
struct GeoPoint {
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees
  double h = 0.0;    // meters
};

struct PixelCoord {
  double sample = 0.0;  // x, grows right
  double line = 0.0;    // y, grows down
};

// Axis-aligned rectangle in local plane coordinates, meters.
struct RectM {
  double x0 = 0.0, y0 = 0.0;  // lower-left (west, south)
  double x1 = 0.0, y1 = 0.0;  // upper-right (east, north)

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool contains(double x, double y) const {
    return x >= x0 && x < x1 && y >= y0 && y < y1;
  }
};

// Plane tangent to the WGS84 ellipsoid at an anchor point. Converts between
// geographic degrees and local east/north meters with per-degree scale factors
// evaluated at the anchor latitude. Adequate for AOIs a few km across.
class LocalFrame {
 public:
  LocalFrame() = default;
  LocalFrame(double anchor_lat, double anchor_lon);

  double anchor_lat() const { return lat0_; }
  double anchor_lon() const { return lon0_; }
  double meters_per_deg_lat() const { return m_lat_; }
  double meters_per_deg_lon() const { return m_lon_; }

  void to_local(double lat, double lon, double& x, double& y) const {
    x = (lon - lon0_) * m_lon_;
    y = (lat - lat0_) * m_lat_;
  }
  void to_geo(double x, double y, double& lat, double& lon) const {
    lon = lon0_ + x / m_lon_;
    lat = lat0_ + y / m_lat_;
  }

 private:
  double lat0_ = 0.0, lon0_ = 0.0;
  double m_lat_ = 110574.0, m_lon_ = 111320.0;
};

}  // namespace orthoforge
