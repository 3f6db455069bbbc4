#include "cldnet/render.hpp"

#include <algorithm>
#include <fstream>

namespace cldnet {

const std::array<std::array<std::uint8_t, 3>, kNumClasses>& class_palette() {
  static const std::array<std::array<std::uint8_t, 3>, kNumClasses> palette = {{
      {70, 130, 180},    // Cl  steel blue (clear sky)
      {255, 255, 255},   // Ci  white
      {220, 220, 160},   // Cs  pale khaki
      {178, 34, 34},     // Dc  firebrick
      {255, 165, 0},     // Ac  orange
      {154, 205, 50},    // As  yellow green
      {128, 0, 128},     // Ns  purple
      {0, 206, 209},     // Cu  turquoise
      {105, 105, 105},   // Sc  dim gray
      {255, 105, 180},   // St  pink
  }};
  return palette;
}

namespace {

void write_ppm(const std::filesystem::path& path, int rows, int cols,
               const std::vector<std::uint8_t>& rgb) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RasterError("cannot write image " + path.string());
  out << "P6\n" << cols << ' ' << rows << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()),
            static_cast<std::streamsize>(rgb.size()));
  if (!out) throw RasterError("write failed for image " + path.string());
}

}  // namespace

void render_labels_ppm(const CloudLabelGrid& grid,
                       const std::filesystem::path& path) {
  const auto& pal = class_palette();
  std::vector<std::uint8_t> rgb(grid.labels.size() * 3, 0);
  for (std::size_t i = 0; i < grid.labels.size(); ++i) {
    const std::uint8_t l = grid.labels[i];
    if (l < kNumClasses) {
      rgb[3 * i] = pal[l][0];
      rgb[3 * i + 1] = pal[l][1];
      rgb[3 * i + 2] = pal[l][2];
    }
  }
  write_ppm(path, grid.geometry.rows, grid.geometry.cols, rgb);
}

void render_plane_ppm(const PlaneGrid& plane, const std::filesystem::path& path,
                      float lo, float hi) {
  if (hi <= lo) throw RasterError("render range must satisfy lo < hi");
  std::vector<std::uint8_t> rgb(plane.values.size() * 3);
  for (std::size_t i = 0; i < plane.values.size(); ++i) {
    const float v = plane.values[i];
    if (v < lo && v < 0.0f) {  // missing sentinel
      rgb[3 * i] = 180;
      rgb[3 * i + 1] = 0;
      rgb[3 * i + 2] = 0;
      continue;
    }
    const float t = std::clamp((v - lo) / (hi - lo), 0.0f, 1.0f);
    const auto g = static_cast<std::uint8_t>(t * 255.0f + 0.5f);
    rgb[3 * i] = g;
    rgb[3 * i + 1] = g;
    rgb[3 * i + 2] = g;
  }
  write_ppm(path, plane.geometry.rows, plane.geometry.cols, rgb);
}

}  // namespace cldnet
