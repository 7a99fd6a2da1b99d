#include "sharednav/scenario.hpp"

#include <cmath>

#include "sharednav/error.hpp"

namespace sharednav {

MapFiles make_cross_map(const CrossMapSpec& spec, const std::string& image_name) {
  if (!(spec.resolution > 0.0) || !(spec.corridor > 0.0) || !(spec.size > spec.corridor + 2 * spec.end_wall))
    throw InvalidArgument("make_cross_map: inconsistent dimensions");
  const int n = static_cast<int>(std::lround(spec.size / spec.resolution));
  const double half = 0.5 * spec.size;
  MapFiles f;
  f.image.width = n;
  f.image.height = n;
  f.image.pixels.resize(static_cast<std::size_t>(n) * n);
  for (int row = 0; row < n; ++row) {
    for (int col = 0; col < n; ++col) {
      // Image rows run top to bottom.
      const double x = -half + (col + 0.5) * spec.resolution;
      const double y = half - (row + 0.5) * spec.resolution;
      const bool in_arm = std::abs(x) < 0.5 * spec.corridor || std::abs(y) < 0.5 * spec.corridor;
      const bool inside = std::abs(x) < half - spec.end_wall && std::abs(y) < half - spec.end_wall;
      f.image.pixels[static_cast<std::size_t>(row) * n + col] = in_arm && inside ? 254 : 0;
    }
  }
  f.metadata.image = image_name;
  f.metadata.resolution = spec.resolution;
  f.metadata.origin = {-half, -half, 0.0};
  return f;
}

OccupancyGrid cross_grid(const CrossMapSpec& spec) {
  const auto f = make_cross_map(spec);
  return load_map(f.image, f.metadata);
}

std::filesystem::path write_map_files(const std::filesystem::path& dir, const std::string& stem, const MapFiles& files) {
  std::filesystem::create_directories(dir);
  auto meta = files.metadata;
  meta.image = stem + ".pgm";
  write_pgm(dir / meta.image, files.image);
  const auto yaml = dir / (stem + ".yaml");
  write_map_metadata(yaml, meta);
  return yaml;
}

}  // namespace sharednav
