#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sharednav/geometry.hpp"

namespace sharednav {

enum class Occupancy : std::uint8_t { Free, Occupied, Unknown };

/// 8-bit grayscale raster, rows stored top to bottom as in the image file.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int col, int row) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
};

/// Reads a binary (P5) or ASCII (P2) PGM file. Throws FormatError on malformed input.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

/// Map metadata in the usual robotics convention:
///
///   image: cross.pgm
///   resolution: 0.05
///   origin: [-6.0, -6.0, 0.0]
///   occupied_thresh: 0.65
///   free_thresh: 0.196
///   negate: 0
///
/// Pixel darkness p = (255 - v) / 255 (or v / 255 with negate) is compared with the
/// thresholds: p > occupied_thresh is occupied, p < free_thresh is free.
struct MapMetadata {
  std::string image;
  double resolution = 0.05;
  Pose2 origin;
  double occupied_thresh = 0.65;
  double free_thresh = 0.196;
  bool negate = false;
};

MapMetadata parse_map_metadata(const std::string& text);
MapMetadata read_map_metadata(const std::filesystem::path& path);
void write_map_metadata(const std::filesystem::path& path, const MapMetadata& meta);

class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  /// Cells are row-major with row 0 at the bottom (world y grows with the row index).
  OccupancyGrid(int width, int height, double resolution, Pose2 origin, std::vector<Occupancy> cells);

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  const Pose2& origin() const { return origin_; }
  const std::vector<Occupancy>& cells() const { return cells_; }

  Occupancy at(int ix, int iy) const { return cells_[static_cast<std::size_t>(iy) * width_ + ix]; }
  bool in_bounds(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < width_ && iy < height_; }
  bool cell_free(int ix, int iy) const { return in_bounds(ix, iy) && at(ix, iy) == Occupancy::Free; }

  /// World point expressed in the grid frame (metres, origin at the corner of cell (0,0)).
  Point2 to_grid(Point2 p) const;
  Point2 to_world(Point2 g) const;
  Point2 cell_center(int ix, int iy) const;

  std::size_t free_cell_count() const;
  double free_area() const;

 private:
  int width_ = 0;
  int height_ = 0;
  double resolution_ = 0.0;
  Pose2 origin_;
  double cos_ = 1.0;
  double sin_ = 0.0;
  std::vector<Occupancy> cells_;
};

OccupancyGrid load_map(const GrayImage& image, const MapMetadata& meta);
/// Loads the metadata file and the image it names (relative to the metadata file).
OccupancyGrid load_map(const std::filesystem::path& metadata_path);

/// True iff every cell meeting the disc of radius `clearance` around p is free.
/// Unknown cells and anything outside the grid count as not free.
bool is_free(const OccupancyGrid& grid, Point2 p, double clearance);

/// Exact swept-disc test of the straight segment a-b: true iff no non-free cell lies
/// closer than `clearance` to the segment, so is_free holds at every point of it
/// (grazing contact with a cell counts as a hit).
bool segment_is_free(const OccupancyGrid& grid, Point2 a, Point2 b, double clearance);

/// is_free at every arc-length sample of the path (spacing `step`, ends included).
/// Throws InvalidArgument if step is not in (0, resolution].
bool path_is_free(const OccupancyGrid& grid, const ClothoidPath& path, double clearance, double step);

struct CellIndex {
  int ix = 0;
  int iy = 0;

  friend bool operator==(const CellIndex&, const CellIndex&) = default;
  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

/// Axis-aligned grid of 1 m cells used to index behaviours.
class BehaviourGrid {
 public:
  static constexpr double kCellSize = 1.0;

  BehaviourGrid() = default;
  BehaviourGrid(Point2 origin, int nx, int ny);
  /// Smallest grid anchored at the map's lower-left corner that covers the whole map.
  static BehaviourGrid covering(const OccupancyGrid& grid);

  const Point2& origin() const { return origin_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double cell_size() const { return kCellSize; }

  bool contains(Point2 p) const;
  bool contains(CellIndex c) const { return c.ix >= 0 && c.iy >= 0 && c.ix < nx_ && c.iy < ny_; }
  /// floor((p - origin) / cell_size); throws InvalidArgument outside the extent.
  CellIndex cell_of(Point2 p) const;
  Point2 cell_center(CellIndex c) const;
  Point2 cell_corner(CellIndex c) const;

  friend bool operator==(const BehaviourGrid&, const BehaviourGrid&) = default;

 private:
  Point2 origin_;
  int nx_ = 0;
  int ny_ = 0;
};

}  // namespace sharednav
