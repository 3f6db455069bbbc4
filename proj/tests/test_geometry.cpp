#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cldnet/geometry.hpp"

using namespace cldnet;

namespace {
constexpr double kDeg = M_PI / 180.0;
}

TEST_CASE("timestamp parsing") {
  auto t = parse_utc("2021-03-20T09:37:00Z");
  CHECK(t.year == 2021);
  CHECK(t.day_of_year == 79);  // 31+28+20
  CHECK(t.hours_utc == doctest::Approx(9.0 + 37.0 / 60.0));
  CHECK_THROWS_AS(parse_utc("2021-03-20 09:37:00"), std::invalid_argument);
  CHECK_THROWS_AS(parse_utc("garbage"), std::invalid_argument);
}

TEST_CASE("sun overhead at equator near equinox local noon") {
  // 2021-03-20 is very close to the March equinox; solar declination ~0.
  // At longitude 0 solar noon is near 12:07 UTC that day.
  auto a = solar_position("2021-03-20T12:07:00Z", 0.0, 0.0);
  CHECK(a.zenith_deg < 1.5);
}

TEST_CASE("polar night: sun far below horizon") {
  auto a = solar_position("2021-12-21T12:00:00Z", 85.0, 0.0);
  CHECK(a.zenith_deg >= 108.0);  // ~90 + 23.4 - 5 margin
}

TEST_CASE("solar azimuth: sun south of a northern observer at local noon") {
  auto a = solar_position("2021-06-21T12:00:00Z", 50.0, 0.0);
  CHECK(std::abs(a.azimuth_deg - 180.0) < 10.0);
  // morning sun to the east
  auto m = solar_position("2021-06-21T06:00:00Z", 50.0, 0.0);
  CHECK(m.azimuth_deg > 45.0);
  CHECK(m.azimuth_deg < 135.0);
}

TEST_CASE("longitude wrap invariance") {
  auto a = solar_position("2021-07-01T04:30:00Z", 35.0, 140.0);
  auto b = solar_position("2021-07-01T04:30:00Z", 35.0, 140.0 - 360.0);
  CHECK(a.zenith_deg == doctest::Approx(b.zenith_deg).epsilon(1e-9));
  CHECK(a.azimuth_deg == doctest::Approx(b.azimuth_deg).epsilon(1e-9));
}

TEST_CASE("satellite geometry at the sub-satellite point") {
  auto a = satellite_geometry(140.7, 0.0, 140.7);
  CHECK(a.zenith_deg == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(a.visible);
}

TEST_CASE("satellite zenith against an independent vector oracle") {
  // Oracle: spherical Earth in ECEF, elevation from the dot product of the
  // local vertical with the satellite direction.
  const double sub_lon = 140.7;
  const double cases[][2] = {{35.0, 140.0}, {-20.0, 120.0}, {0.0, 100.0},
                             {45.5, 160.2}, {-40.0, 175.0}};
  for (auto [lat, lon] : cases) {
    const double re = kEarthRadiusKm;
    const double rs = kEarthRadiusKm + kGeoSatHeightKm;
    const double px = re * std::cos(lat * kDeg) * std::cos(lon * kDeg);
    const double py = re * std::cos(lat * kDeg) * std::sin(lon * kDeg);
    const double pz = re * std::sin(lat * kDeg);
    const double sx = rs * std::cos(sub_lon * kDeg);
    const double sy = rs * std::sin(sub_lon * kDeg);
    double dx = sx - px, dy = sy - py, dz = -pz;
    const double dn = std::sqrt(dx * dx + dy * dy + dz * dz);
    const double up = (px * dx + py * dy + pz * dz) / (re * dn);
    const double zen = 90.0 - std::asin(up) / kDeg;
    auto a = satellite_geometry(sub_lon, lat, lon);
    CHECK(a.zenith_deg == doctest::Approx(zen).epsilon(0.002));
  }
}

TEST_CASE("satellite azimuth is the bearing to the sub-satellite point") {
  // Observer due west of the sub-satellite point on the equator looks east.
  auto e = satellite_geometry(140.7, 0.0, 100.0);
  CHECK(e.azimuth_deg == doctest::Approx(90.0).epsilon(1e-6));
  // Due east looks west.
  auto w = satellite_geometry(140.7, 0.0, 170.0);
  CHECK(w.azimuth_deg == doctest::Approx(270.0).epsilon(1e-6));
  // Observer north of the satellite looks roughly south.
  auto s = satellite_geometry(140.7, 40.0, 140.7);
  CHECK(s.azimuth_deg == doctest::Approx(180.0).epsilon(1e-6));
}

TEST_CASE("points beyond the visibility disk are flagged") {
  auto a = satellite_geometry(140.7, 0.0, 140.7 - 100.0);
  CHECK_FALSE(a.visible);
  CHECK(a.zenith_deg > 90.0);
  // visibility cutoff near 81.3 degrees great-circle distance
  auto b = satellite_geometry(140.7, 0.0, 140.7 - 81.0);
  CHECK(b.visible);
}
