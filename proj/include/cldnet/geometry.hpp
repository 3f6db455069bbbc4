#pragma once
// Solar and geostationary-satellite viewing geometry.

#include <string>

namespace cldnet {

struct SolarAngles {
  double zenith_deg = 0.0;   // [0, 180]
  double azimuth_deg = 0.0;  // clockwise from north, [0, 360)
};

struct SatelliteAngles {
  double zenith_deg = 0.0;   // > 90 means below horizon
  double azimuth_deg = 0.0;  // bearing toward the sub-satellite point, [0, 360)
  bool visible = true;       // false beyond the visibility disk
};

// Parses "YYYY-MM-DDTHH:MM:SSZ"; throws std::invalid_argument on malformed
// input. Returns fractional hours since UTC midnight and day of year.
struct UtcInstant {
  int year = 2000;
  int day_of_year = 1;   // 1-based
  double hours_utc = 0;  // fractional
};
UtcInstant parse_utc(const std::string& timestamp);

// Low-precision solar position (fractional-year series for declination and
// the equation of time, hour angle from longitude and UTC time).
SolarAngles solar_position(const UtcInstant& t, double lat_deg, double lon_deg);
SolarAngles solar_position(const std::string& timestamp, double lat_deg,
                           double lon_deg);

inline constexpr double kGeoSatHeightKm = 35786.0;
inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kHimawariSubLonDeg = 140.7;

// Spherical-Earth look geometry toward a geostationary satellite at
// sub_lon_deg over the equator.
SatelliteAngles satellite_geometry(double sub_lon_deg, double lat_deg,
                                   double lon_deg);

}  // namespace cldnet
