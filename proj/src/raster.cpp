#include "cldnet/raster.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cldnet {

using nlohmann::json;

const char* class_name(int code) {
  static const char* names[] = {"Cl", "Ci", "Cs", "Dc", "Ac",
                                "As", "Ns", "Cu", "Sc", "St"};
  if (code == kUnlabeled) return "UNLABELED";
  if (code < 0 || code >= kNumClasses) return "?";
  return names[code];
}

namespace {

json geometry_to_json(const GridGeometry& g) {
  return json{{"origin_lat", g.origin_lat}, {"origin_lon", g.origin_lon},
              {"cell_lat", g.cell_lat},     {"cell_lon", g.cell_lon},
              {"rows", g.rows},             {"cols", g.cols}};
}

GridGeometry geometry_from_json(const json& j) {
  GridGeometry g;
  g.origin_lat = j.at("origin_lat").get<double>();
  g.origin_lon = j.at("origin_lon").get<double>();
  g.cell_lat = j.at("cell_lat").get<double>();
  g.cell_lon = j.at("cell_lon").get<double>();
  g.rows = j.at("rows").get<int>();
  g.cols = j.at("cols").get<int>();
  if (g.rows <= 0 || g.cols <= 0)
    throw RasterError("invalid geometry: rows/cols must be positive");
  return g;
}

json read_header(std::istream& in, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line))
    throw RasterError("cannot read header line from " + path.string());
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded())
    throw RasterError("malformed header in " + path.string());
  return j;
}

void write_floats(std::ostream& out, const float* p, std::size_t n) {
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 4));
}

void read_floats(std::istream& in, float* p, std::size_t n,
                 const std::filesystem::path& path, const std::string& what) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * 4));
  if (static_cast<std::size_t>(in.gcount()) != n * 4)
    throw RasterError("truncated " + what + " in " + path.string());
}

}  // namespace

SceneGrid load_scene(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RasterError("cannot open " + path.string());
  json j = read_header(in, path);
  if (j.value("magic", "") != "cldgrid" || j.value("kind", "") != "scene")
    throw RasterError("not a scene raster: " + path.string());

  SceneGrid s;
  s.timestamp = j.value("timestamp", "");
  s.geometry = geometry_from_json(j.at("geometry"));
  s.missing_value = j.value("missing_value", -9999.0f);
  const auto bands = j.at("bands").get<std::vector<std::string>>();
  if (static_cast<int>(bands.size()) != kNumBands) {
    std::ostringstream msg;
    msg << "band count " << bands.size() << " != " << kNumBands << " in "
        << path.string();
    throw RasterError(msg.str());
  }
  const std::size_t n = s.pixel_count();
  s.planes.resize(kNumBands);
  for (int b = 0; b < kNumBands; ++b) {
    s.planes[b].resize(n);
    read_floats(in, s.planes[b].data(), n, path, "plane " + bands[b]);
    for (std::size_t i = 0; i < n; ++i) {
      const float v = s.planes[b][i];
      if (!std::isfinite(v) && v != s.missing_value) {
        std::ostringstream msg;
        msg << "non-finite value in band " << bands[b] << " at cell " << i
            << " of " << path.string();
        throw RasterError(msg.str());
      }
    }
  }
  // Reject trailing planes: a 17-band file is as malformed as a 15-band one.
  char extra;
  if (in.read(&extra, 1))
    throw RasterError("trailing data after 16 planes in " + path.string());
  return s;
}

void write_scene(const SceneGrid& scene, const std::filesystem::path& path) {
  if (static_cast<int>(scene.planes.size()) != kNumBands)
    throw RasterError("scene must have 16 planes");
  const std::size_t n = scene.pixel_count();
  for (const auto& p : scene.planes)
    if (p.size() != n) throw RasterError("plane size does not match geometry");

  std::vector<std::string> bands;
  for (int b = 1; b <= kNumBands; ++b) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "B%02d", b);
    bands.emplace_back(buf);
  }
  json j{{"magic", "cldgrid"},
         {"kind", "scene"},
         {"timestamp", scene.timestamp},
         {"geometry", geometry_to_json(scene.geometry)},
         {"missing_value", scene.missing_value},
         {"bands", bands}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RasterError("cannot write " + path.string());
  out << j.dump() << '\n';
  for (const auto& p : scene.planes) write_floats(out, p.data(), n);
  if (!out) throw RasterError("write failed for " + path.string());
}

CloudLabelGrid load_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RasterError("cannot open " + path.string());
  json j = read_header(in, path);
  if (j.value("magic", "") != "cldgrid" || j.value("kind", "") != "labels")
    throw RasterError("not a label raster: " + path.string());

  CloudLabelGrid g;
  g.geometry = geometry_from_json(j.at("geometry"));
  const std::size_t n = g.pixel_count();
  g.labels.resize(n);
  in.read(reinterpret_cast<char*>(g.labels.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw RasterError("truncated label plane in " + path.string());
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t c = g.labels[i];
    if (c >= kNumClasses && c != kUnlabeled) {
      std::ostringstream msg;
      msg << "invalid class code " << int(c) << " at cell " << i << " of "
          << path.string();
      throw RasterError(msg.str());
    }
  }
  return g;
}

void write_labels(const CloudLabelGrid& grid, const std::filesystem::path& path) {
  const std::size_t n = grid.pixel_count();
  if (grid.labels.size() != n)
    throw RasterError("label plane size does not match geometry");
  json j{{"magic", "cldgrid"},
         {"kind", "labels"},
         {"geometry", geometry_to_json(grid.geometry)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RasterError("cannot write " + path.string());
  out << j.dump() << '\n';
  out.write(reinterpret_cast<const char*>(grid.labels.data()),
            static_cast<std::streamsize>(n));
  if (!out) throw RasterError("write failed for " + path.string());
}

PlaneGrid load_plane(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RasterError("cannot open " + path.string());
  json j = read_header(in, path);
  if (j.value("magic", "") != "cldgrid" || j.value("kind", "") != "plane")
    throw RasterError("not a single-plane raster: " + path.string());
  PlaneGrid p;
  p.geometry = geometry_from_json(j.at("geometry"));
  p.name = j.value("name", "");
  p.values.resize(p.geometry.rows * static_cast<std::size_t>(p.geometry.cols));
  read_floats(in, p.values.data(), p.values.size(), path, "plane");
  return p;
}

void write_plane(const PlaneGrid& plane, const std::filesystem::path& path) {
  const auto n = plane.geometry.rows * static_cast<std::size_t>(plane.geometry.cols);
  if (plane.values.size() != n)
    throw RasterError("plane size does not match geometry");
  json j{{"magic", "cldgrid"},
         {"kind", "plane"},
         {"name", plane.name},
         {"geometry", geometry_to_json(plane.geometry)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RasterError("cannot write " + path.string());
  out << j.dump() << '\n';
  write_floats(out, plane.values.data(), n);
  if (!out) throw RasterError("write failed for " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RasterError("cannot open manifest " + path.string());
  DatasetManifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    ManifestEntry e;
    std::string field;
    if (!std::getline(ss, e.scene_path, ',') ||
        !std::getline(ss, e.label_path, ',') ||
        !std::getline(ss, e.timestamp, ',') || !std::getline(ss, e.split)) {
      std::ostringstream msg;
      msg << "malformed manifest line " << lineno << " in " << path.string();
      throw RasterError(msg.str());
    }
    if (e.split != "train" && e.split != "val" && e.split != "test")
      throw RasterError("unknown split tag '" + e.split + "' in manifest");
    for (const auto& prev : m.entries)
      if (prev.scene_path == e.scene_path)
        throw RasterError("duplicate scene path in manifest: " + e.scene_path);
    m.entries.push_back(std::move(e));
  }
  return m;
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RasterError("cannot write manifest " + path.string());
  for (const auto& e : m.entries)
    out << e.scene_path << ',' << e.label_path << ',' << e.timestamp << ','
        << e.split << '\n';
}

}  // namespace cldnet
