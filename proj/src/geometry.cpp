#include "cldnet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace cldnet {

namespace {

constexpr double kPi = 3.14159265358979323846;
double rad(double deg) { return deg * kPi / 180.0; }
double deg(double r) { return r * 180.0 / kPi; }

double wrap360(double a) {
  a = std::fmod(a, 360.0);
  if (a < 0) a += 360.0;
  return a;
}

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

}  // namespace

UtcInstant parse_utc(const std::string& ts) {
  int y, mo, d, h, mi, s;
  if (std::sscanf(ts.c_str(), "%d-%d-%dT%d:%d:%dZ", &y, &mo, &d, &h, &mi, &s) != 6)
    throw std::invalid_argument("bad UTC timestamp: " + ts);
  static const int days[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (mo < 1 || mo > 12 || d < 1 ||
      d > days[mo - 1] + (mo == 2 && leap(y) ? 1 : 0) || h < 0 || h > 23 ||
      mi < 0 || mi > 59 || s < 0 || s > 60)
    throw std::invalid_argument("bad UTC timestamp: " + ts);
  UtcInstant t;
  t.year = y;
  t.day_of_year = d;
  for (int m = 1; m < mo; ++m) t.day_of_year += days[m - 1] + (m == 2 && leap(y) ? 1 : 0);
  t.hours_utc = h + mi / 60.0 + s / 3600.0;
  return t;
}

SolarAngles solar_position(const UtcInstant& t, double lat_deg, double lon_deg) {
  const double days_in_year = leap(t.year) ? 366.0 : 365.0;
  const double gamma =
      2.0 * kPi / days_in_year * (t.day_of_year - 1 + (t.hours_utc - 12.0) / 24.0);

  // Equation of time (minutes) and declination (radians), Spencer series.
  const double eqtime =
      229.18 * (0.000075 + 0.001868 * std::cos(gamma) - 0.032077 * std::sin(gamma) -
                0.014615 * std::cos(2 * gamma) - 0.040849 * std::sin(2 * gamma));
  const double decl =
      0.006918 - 0.399912 * std::cos(gamma) + 0.070257 * std::sin(gamma) -
      0.006758 * std::cos(2 * gamma) + 0.000907 * std::sin(2 * gamma) -
      0.002697 * std::cos(3 * gamma) + 0.00148 * std::sin(3 * gamma);

  const double tst_min = t.hours_utc * 60.0 + eqtime + 4.0 * lon_deg;
  const double ha = rad(tst_min / 4.0 - 180.0);  // hour angle

  const double phi = rad(lat_deg);
  const double cos_zen = std::sin(phi) * std::sin(decl) +
                         std::cos(phi) * std::cos(decl) * std::cos(ha);
  SolarAngles out;
  out.zenith_deg = deg(std::acos(std::clamp(cos_zen, -1.0, 1.0)));
  const double az = std::atan2(
      -std::sin(ha) * std::cos(decl),
      std::sin(decl) * std::cos(phi) - std::cos(decl) * std::sin(phi) * std::cos(ha));
  out.azimuth_deg = wrap360(deg(az));
  return out;
}

SolarAngles solar_position(const std::string& timestamp, double lat_deg,
                           double lon_deg) {
  return solar_position(parse_utc(timestamp), lat_deg, lon_deg);
}

SatelliteAngles satellite_geometry(double sub_lon_deg, double lat_deg,
                                   double lon_deg) {
  const double phi = rad(lat_deg);
  const double dlon = rad(lon_deg - sub_lon_deg);
  const double cos_psi = std::cos(phi) * std::cos(dlon);
  const double psi = std::acos(std::clamp(cos_psi, -1.0, 1.0));
  const double r = kEarthRadiusKm / (kEarthRadiusKm + kGeoSatHeightKm);

  SatelliteAngles out;
  if (psi < 1e-12) {
    out.zenith_deg = 0.0;
    out.azimuth_deg = 0.0;
    out.visible = true;
    return out;
  }
  // Elevation above the local horizon; negative beyond the visibility disk.
  const double elev = std::atan2(cos_psi - r, std::sin(psi));
  out.zenith_deg = 90.0 - deg(elev);
  out.visible = cos_psi > r;

  // Bearing from the ground point toward the sub-satellite point (0 deg N).
  const double az = std::atan2(std::sin(-dlon) * std::cos(0.0),
                               std::cos(phi) * std::sin(0.0) -
                                   std::sin(phi) * std::cos(0.0) * std::cos(-dlon));
  out.azimuth_deg = wrap360(deg(az));
  return out;
}

}  // namespace cldnet
