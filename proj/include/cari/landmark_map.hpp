#pragma once

#include <cstdint>
#include <vector>

#include "cari/grouping.hpp"
#include "cari/image.hpp"

namespace cari {

/// One binary channel per landmark group.
struct LandmarkMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  LandmarkMap() = default;
  LandmarkMap(int g, int h, int w) : channels(g), height(h), width(w), data(static_cast<std::size_t>(g) * h * w, 0) {}

  std::uint8_t& at(int g, int y, int x) { return data[(static_cast<std::size_t>(g) * height + y) * width + x]; }
  std::uint8_t at(int g, int y, int x) const { return data[(static_cast<std::size_t>(g) * height + y) * width + x]; }

  bool operator==(const LandmarkMap&) const = default;
};

struct PixelPoint {
  int x = 0;
  int y = 0;
  bool operator==(const PixelPoint&) const = default;
};

/// Pixel containing a normalized point: floor(x * W), clamped to the raster.
PixelPoint to_pixel(const Point2& p, int height, int width);

/// Integer Bresenham segment, both endpoints included.
std::vector<PixelPoint> bresenham(PixelPoint a, PixelPoint b);

/// Polylines draw 1-pixel segments between consecutive indices; closed
/// regions also close the polygon and fill its interior.
LandmarkMap rasterize_landmark_map(const LandmarkSet& lms, const LandmarkGrouping& grouping, int height, int width);

}  // namespace cari
