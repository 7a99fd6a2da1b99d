#include "sharednav/worldmap.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sharednav/error.hpp"

namespace sharednav {

// PGM input/output.

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      if (!tok.empty()) break;
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

int pgm_int(std::istream& in, const char* what) {
  const std::string tok = pgm_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw FormatError(std::string("pgm: bad ") + what + " '" + tok + "'");
  }
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("pgm: cannot open " + path.string());
  const std::string magic = pgm_token(in);
  if (magic != "P5" && magic != "P2") throw FormatError("pgm: unsupported magic '" + magic + "' in " + path.string());
  GrayImage img;
  img.width = pgm_int(in, "width");
  img.height = pgm_int(in, "height");
  const int maxval = pgm_int(in, "maxval");
  if (img.width == 0 || img.height == 0) throw FormatError("pgm: empty image " + path.string());
  if (maxval == 0 || maxval > 255) throw FormatError("pgm: only 8-bit images are supported");
  const std::size_t count = static_cast<std::size_t>(img.width) * img.height;
  img.pixels.resize(count);
  if (magic == "P5") {
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count) throw FormatError("pgm: truncated pixel data in " + path.string());
  } else {
    for (auto& px : img.pixels) {
      const int v = pgm_int(in, "pixel");
      if (v > maxval) throw FormatError("pgm: pixel above maxval");
      px = static_cast<std::uint8_t>(v);
    }
  }
  if (maxval != 255) {
    for (auto& px : img.pixels) px = static_cast<std::uint8_t>(std::lround(px * 255.0 / maxval));
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height)
    throw InvalidArgument("write_pgm: pixel count does not match dimensions");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("pgm: cannot write " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

// Metadata.

MapMetadata parse_map_metadata(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw FormatError(std::string("map metadata: ") + e.what());
  }
  if (!root.IsMap()) throw FormatError("map metadata: expected key/value pairs");
  MapMetadata meta;
  try {
    if (!root["image"] || !root["resolution"] || !root["origin"])
      throw FormatError("map metadata: image, resolution and origin are required");
    meta.image = root["image"].as<std::string>();
    meta.resolution = root["resolution"].as<double>();
    const auto origin = root["origin"].as<std::vector<double>>();
    if (origin.size() != 3) throw FormatError("map metadata: origin must be [x, y, yaw]");
    meta.origin = {origin[0], origin[1], origin[2]};
    if (root["occupied_thresh"]) meta.occupied_thresh = root["occupied_thresh"].as<double>();
    if (root["free_thresh"]) meta.free_thresh = root["free_thresh"].as<double>();
    if (root["negate"]) meta.negate = root["negate"].as<int>() != 0;
  } catch (const YAML::Exception& e) {
    throw FormatError(std::string("map metadata: ") + e.what());
  }
  if (!(meta.resolution > 0.0)) throw InvalidArgument("map metadata: resolution must be positive");
  if (!(meta.free_thresh >= 0.0 && meta.free_thresh <= meta.occupied_thresh && meta.occupied_thresh <= 1.0))
    throw InvalidArgument("map metadata: need 0 <= free_thresh <= occupied_thresh <= 1");
  return meta;
}

MapMetadata read_map_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("map metadata: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_map_metadata(ss.str());
}

void write_map_metadata(const std::filesystem::path& path, const MapMetadata& meta) {
  std::ofstream out(path);
  if (!out) throw FormatError("map metadata: cannot write " + path.string());
  out.precision(17);
  out << "image: " << meta.image << "\n"
      << "resolution: " << meta.resolution << "\n"
      << "origin: [" << meta.origin.x << ", " << meta.origin.y << ", " << meta.origin.theta << "]\n"
      << "occupied_thresh: " << meta.occupied_thresh << "\n"
      << "free_thresh: " << meta.free_thresh << "\n"
      << "negate: " << (meta.negate ? 1 : 0) << "\n";
}

// OccupancyGrid.

OccupancyGrid::OccupancyGrid(int width, int height, double resolution, Pose2 origin, std::vector<Occupancy> cells)
    : width_(width),
      height_(height),
      resolution_(resolution),
      origin_(origin),
      cos_(std::cos(origin.theta)),
      sin_(std::sin(origin.theta)),
      cells_(std::move(cells)) {
  if (width <= 0 || height <= 0) throw InvalidArgument("OccupancyGrid: dimensions must be positive");
  if (!(resolution > 0.0)) throw InvalidArgument("OccupancyGrid: resolution must be positive");
  if (cells_.size() != static_cast<std::size_t>(width) * height)
    throw InvalidArgument("OccupancyGrid: cell count does not match width x height");
}

Point2 OccupancyGrid::to_grid(Point2 p) const {
  const double dx = p.x - origin_.x;
  const double dy = p.y - origin_.y;
  return {cos_ * dx + sin_ * dy, -sin_ * dx + cos_ * dy};
}

Point2 OccupancyGrid::to_world(Point2 g) const {
  return {origin_.x + cos_ * g.x - sin_ * g.y, origin_.y + sin_ * g.x + cos_ * g.y};
}

Point2 OccupancyGrid::cell_center(int ix, int iy) const {
  return to_world({(ix + 0.5) * resolution_, (iy + 0.5) * resolution_});
}

std::size_t OccupancyGrid::free_cell_count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), Occupancy::Free));
}

double OccupancyGrid::free_area() const {
  return static_cast<double>(free_cell_count()) * resolution_ * resolution_;
}

OccupancyGrid load_map(const GrayImage& image, const MapMetadata& meta) {
  if (image.width <= 0 || image.height <= 0) throw InvalidArgument("load_map: empty image");
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height)
    throw InvalidArgument("load_map: pixel count does not match image dimensions");
  if (!(meta.resolution > 0.0)) throw InvalidArgument("load_map: resolution must be positive");
  std::vector<Occupancy> cells(image.pixels.size());
  for (int row = 0; row < image.height; ++row) {
    const int iy = image.height - 1 - row;  // image rows run top to bottom
    for (int col = 0; col < image.width; ++col) {
      const double v = image.at(col, row) / 255.0;
      const double p = meta.negate ? v : 1.0 - v;
      Occupancy c = Occupancy::Unknown;
      if (p > meta.occupied_thresh)
        c = Occupancy::Occupied;
      else if (p < meta.free_thresh)
        c = Occupancy::Free;
      cells[static_cast<std::size_t>(iy) * image.width + col] = c;
    }
  }
  return OccupancyGrid(image.width, image.height, meta.resolution, meta.origin, std::move(cells));
}

OccupancyGrid load_map(const std::filesystem::path& metadata_path) {
  const MapMetadata meta = read_map_metadata(metadata_path);
  std::filesystem::path image = meta.image;
  if (image.is_relative()) image = metadata_path.parent_path() / image;
  return load_map(read_pgm(image), meta);
}

// Collision queries.

bool is_free(const OccupancyGrid& grid, Point2 p, double clearance) {
  if (!(clearance >= 0.0) || !std::isfinite(p.x) || !std::isfinite(p.y)) return false;
  const Point2 g = grid.to_grid(p);
  const double r = grid.resolution();
  const int cx = static_cast<int>(std::floor(g.x / r));
  const int cy = static_cast<int>(std::floor(g.y / r));
  if (!grid.cell_free(cx, cy)) return false;
  if (clearance == 0.0) return true;
  const int x0 = static_cast<int>(std::floor((g.x - clearance) / r));
  const int x1 = static_cast<int>(std::floor((g.x + clearance) / r));
  const int y0 = static_cast<int>(std::floor((g.y - clearance) / r));
  const int y1 = static_cast<int>(std::floor((g.y + clearance) / r));
  const double c2 = clearance * clearance;
  for (int iy = y0; iy <= y1; ++iy) {
    const double dy = std::max({iy * r - g.y, 0.0, g.y - (iy + 1) * r});
    for (int ix = x0; ix <= x1; ++ix) {
      const double dx = std::max({ix * r - g.x, 0.0, g.x - (ix + 1) * r});
      if (dx * dx + dy * dy < c2 && !grid.cell_free(ix, iy)) return false;
    }
  }
  return true;
}

namespace {

double point_segment_distance(Point2 p, Point2 a, Point2 b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

// Liang-Barsky clip of segment a-b against the box; true if they intersect.
bool segment_hits_box(Point2 a, Point2 b, double x0, double y0, double x1, double y1) {
  double t0 = 0.0, t1 = 1.0;
  const double d[2] = {b.x - a.x, b.y - a.y};
  const double lo[2] = {x0 - a.x, y0 - a.y};
  const double hi[2] = {x1 - a.x, y1 - a.y};
  for (int k = 0; k < 2; ++k) {
    if (d[k] == 0.0) {
      if (lo[k] > 0.0 || hi[k] < 0.0) return false;
      continue;
    }
    double ta = lo[k] / d[k], tb = hi[k] / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

double segment_box_distance(Point2 a, Point2 b, double x0, double y0, double x1, double y1) {
  if (segment_hits_box(a, b, x0, y0, x1, y1)) return 0.0;
  auto box_dist = [&](Point2 p) {
    return std::hypot(std::max({x0 - p.x, 0.0, p.x - x1}), std::max({y0 - p.y, 0.0, p.y - y1}));
  };
  double d = std::min(box_dist(a), box_dist(b));
  for (const Point2 c : {Point2{x0, y0}, Point2{x1, y0}, Point2{x0, y1}, Point2{x1, y1}})
    d = std::min(d, point_segment_distance(c, a, b));
  return d;
}

}  // namespace

bool segment_is_free(const OccupancyGrid& grid, Point2 a, Point2 b, double clearance) {
  if (!(clearance >= 0.0)) return false;
  if (!is_free(grid, a, clearance) || !is_free(grid, b, clearance)) return false;
  const Point2 ga = grid.to_grid(a);
  const Point2 gb = grid.to_grid(b);
  const double r = grid.resolution();
  const int x0 = static_cast<int>(std::floor((std::min(ga.x, gb.x) - clearance) / r));
  const int x1 = static_cast<int>(std::floor((std::max(ga.x, gb.x) + clearance) / r));
  const int y0 = static_cast<int>(std::floor((std::min(ga.y, gb.y) - clearance) / r));
  const int y1 = static_cast<int>(std::floor((std::max(ga.y, gb.y) + clearance) / r));
  for (int iy = y0; iy <= y1; ++iy) {
    for (int ix = x0; ix <= x1; ++ix) {
      if (grid.cell_free(ix, iy)) continue;
      const double d = segment_box_distance(ga, gb, ix * r, iy * r, (ix + 1) * r, (iy + 1) * r);
      if (d < clearance || d == 0.0) return false;
    }
  }
  return true;
}

bool path_is_free(const OccupancyGrid& grid, const ClothoidPath& path, double clearance, double step) {
  if (!(step > 0.0) || step > grid.resolution())
    throw InvalidArgument("path_is_free: step must lie in (0, resolution]");
  for (const auto& s : sample_path(path, step))
    if (!is_free(grid, {s.x, s.y}, clearance)) return false;
  return true;
}

// BehaviourGrid.

BehaviourGrid::BehaviourGrid(Point2 origin, int nx, int ny) : origin_(origin), nx_(nx), ny_(ny) {
  if (nx <= 0 || ny <= 0) throw InvalidArgument("BehaviourGrid: extent must be positive");
}

BehaviourGrid BehaviourGrid::covering(const OccupancyGrid& grid) {
  const double w = grid.width() * grid.resolution();
  const double h = grid.height() * grid.resolution();
  double xmin = 1e300, ymin = 1e300, xmax = -1e300, ymax = -1e300;
  for (const Point2 corner : {Point2{0, 0}, Point2{w, 0}, Point2{0, h}, Point2{w, h}}) {
    const Point2 q = grid.to_world(corner);
    xmin = std::min(xmin, q.x);
    ymin = std::min(ymin, q.y);
    xmax = std::max(xmax, q.x);
    ymax = std::max(ymax, q.y);
  }
  const int nx = std::max(1, static_cast<int>(std::ceil((xmax - xmin) / kCellSize - 1e-9)));
  const int ny = std::max(1, static_cast<int>(std::ceil((ymax - ymin) / kCellSize - 1e-9)));
  return BehaviourGrid({xmin, ymin}, nx, ny);
}

bool BehaviourGrid::contains(Point2 p) const {
  const double gx = (p.x - origin_.x) / kCellSize;
  const double gy = (p.y - origin_.y) / kCellSize;
  return gx >= 0.0 && gy >= 0.0 && gx < nx_ && gy < ny_;
}

CellIndex BehaviourGrid::cell_of(Point2 p) const {
  if (!contains(p)) throw InvalidArgument("BehaviourGrid::cell_of: point outside the grid extent");
  return {static_cast<int>(std::floor((p.x - origin_.x) / kCellSize)),
          static_cast<int>(std::floor((p.y - origin_.y) / kCellSize))};
}

Point2 BehaviourGrid::cell_corner(CellIndex c) const {
  return {origin_.x + c.ix * kCellSize, origin_.y + c.iy * kCellSize};
}

Point2 BehaviourGrid::cell_center(CellIndex c) const {
  return {origin_.x + (c.ix + 0.5) * kCellSize, origin_.y + (c.iy + 0.5) * kCellSize};
}

}  // namespace sharednav
