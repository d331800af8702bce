#include "orthoforge/geo.hpp"

#include <cmath>

namespace orthoforge {

namespace {
constexpr double kWgs84A = 6378137.0;
constexpr double kWgs84F = 1.0 / 298.257223563;
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
}  // namespace

LocalFrame::LocalFrame(double anchor_lat, double anchor_lon)
    : lat0_(anchor_lat), lon0_(anchor_lon) {
  const double e2 = kWgs84F * (2.0 - kWgs84F);
  const double s = std::sin(anchor_lat * kDegToRad);
  const double w = std::sqrt(1.0 - e2 * s * s);
  const double merid = kWgs84A * (1.0 - e2) / (w * w * w);  // meridian radius
  const double prime = kWgs84A / w;                         // prime vertical
  m_lat_ = merid * kDegToRad;
  m_lon_ = prime * std::cos(anchor_lat * kDegToRad) * kDegToRad;
}

}  // namespace orthoforge
