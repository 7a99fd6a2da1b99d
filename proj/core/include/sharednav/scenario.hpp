#pragma once

#include "sharednav/geometry.hpp"
#include "sharednav/worldmap.hpp"

namespace sharednav {

/// Plus-shaped intersection of two corridors centred on the world origin.
struct CrossMapSpec {
  double size = 12.0;       // side of the square map, metres
  double corridor = 2.0;    // corridor width
  double end_wall = 0.2;    // wall closing each arm at the map border
  double resolution = 0.05;
};

struct MapFiles {
  GrayImage image;
  MapMetadata metadata;
};

/// Raster and metadata of the cross map; `image_name` is written into the metadata.
MapFiles make_cross_map(const CrossMapSpec& spec = {}, const std::string& image_name = "cross.pgm");
OccupancyGrid cross_grid(const CrossMapSpec& spec = {});

/// Writes <dir>/<stem>.pgm and <dir>/<stem>.yaml; returns the metadata path.
std::filesystem::path write_map_files(const std::filesystem::path& dir, const std::string& stem, const MapFiles& files);

/// The reference mission of the cross map: up the south arm, then left into the west arm.
struct CrossMission {
  Point2 p0{0.0, -4.5};
  Point2 pf{-4.5, 0.0};
};

}  // namespace sharednav
