#pragma once
// Gridded scene / label raster format and dataset manifest.
//
// File layout: one JSON header line terminated by '\n', then raw planes,
// row-major, north to south. Scene planes are 32-bit IEEE-754 little-endian
// floats; label planes are unsigned 8-bit class codes.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace cldnet {

inline constexpr int kNumBands = 16;
inline constexpr int kNumClasses = 10;
inline constexpr std::uint8_t kUnlabeled = 255;

// Cloud-type class codes. Clear sky is 0 so the clear-vs-cloud binary
// collapse is a simple nonzero test.
enum CloudClass : std::uint8_t {
  Cl = 0, Ci = 1, Cs = 2, Dc = 3, Ac = 4,
  As = 5, Ns = 6, Cu = 7, Sc = 8, St = 9,
};

const char* class_name(int code);

struct GridGeometry {
  double origin_lat = 0.0;   // center latitude of the north row, degrees
  double origin_lon = 0.0;   // center longitude of the west column, degrees
  double cell_lat = 0.05;    // cell size, degrees per row (southward)
  double cell_lon = 0.05;    // cell size, degrees per column (eastward)
  int rows = 0;
  int cols = 0;

  bool operator==(const GridGeometry&) const = default;
  double lat_at(int row) const { return origin_lat - row * cell_lat; }
  double lon_at(int col) const { return origin_lon + col * cell_lon; }
};

struct SceneGrid {
  std::string timestamp;  // UTC, "YYYY-MM-DDTHH:MM:SSZ"
  GridGeometry geometry;
  float missing_value = -9999.0f;
  // planes[b] is band B(b+1), rows*cols values.
  std::vector<std::vector<float>> planes;

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(geometry.rows) * geometry.cols;
  }
};

struct CloudLabelGrid {
  GridGeometry geometry;
  std::vector<std::uint8_t> labels;

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(geometry.rows) * geometry.cols;
  }
};

// Single real-valued plane in the same container (altitude, land/water,
// density maps, confidence maps).
struct PlaneGrid {
  GridGeometry geometry;
  std::string name;
  std::vector<float> values;
};

struct ManifestEntry {
  std::string scene_path;
  std::string label_path;
  std::string timestamp;
  std::string split;  // train | val | test
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
};

class RasterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

SceneGrid load_scene(const std::filesystem::path& path);
void write_scene(const SceneGrid& scene, const std::filesystem::path& path);

CloudLabelGrid load_labels(const std::filesystem::path& path);
void write_labels(const CloudLabelGrid& grid, const std::filesystem::path& path);

PlaneGrid load_plane(const std::filesystem::path& path);
void write_plane(const PlaneGrid& plane, const std::filesystem::path& path);

DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);

}  // namespace cldnet
