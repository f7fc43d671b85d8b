#include "cari/landmark_map.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "cari/errors.hpp"

namespace cari {

PixelPoint to_pixel(const Point2& p, int height, int width) {
  const int x = static_cast<int>(std::floor(p.x * width));
  const int y = static_cast<int>(std::floor(p.y * height));
  return {std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1)};
}

std::vector<PixelPoint> bresenham(PixelPoint a, PixelPoint b) {
  std::vector<PixelPoint> out;
  const int dx = std::abs(b.x - a.x);
  const int dy = -std::abs(b.y - a.y);
  const int sx = a.x < b.x ? 1 : -1;
  const int sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  PixelPoint p = a;
  while (true) {
    out.push_back(p);
    if (p == b) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      p.x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      p.y += sy;
    }
  }
  return out;
}

namespace {

// Even-odd crossing test against the polygon through integer vertices.
bool inside_polygon(const std::vector<PixelPoint>& poly, double px, double py) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y > py) != (b.y > py)) {
      const double xc = a.x + (py - a.y) * static_cast<double>(b.x - a.x) / (b.y - a.y);
      if (px < xc) inside = !inside;
    }
  }
  return inside;
}

}  // namespace

LandmarkMap rasterize_landmark_map(const LandmarkSet& lms, const LandmarkGrouping& grouping, int height, int width) {
  if (height < 1 || width < 1) throw ArgumentError("landmark map size must be positive");
  LandmarkMap map(grouping.size(), height, width);
  for (int g = 0; g < grouping.size(); ++g) {
    const auto& group = grouping.groups()[g];
    std::vector<PixelPoint> verts;
    verts.reserve(group.indices.size());
    for (int idx : group.indices) verts.push_back(to_pixel(lms[idx], height, width));

    auto draw = [&](PixelPoint a, PixelPoint b) {
      for (auto p : bresenham(a, b)) map.at(g, p.y, p.x) = 1;
    };
    map.at(g, verts.front().y, verts.front().x) = 1;
    for (std::size_t i = 1; i < verts.size(); ++i) draw(verts[i - 1], verts[i]);

    if (group.kind == GroupKind::kClosedRegion && verts.size() >= 2) {
      draw(verts.back(), verts.front());
      if (verts.size() >= 3) {
        int y0 = height, y1 = -1, x0 = width, x1 = -1;
        for (auto v : verts) {
          y0 = std::min(y0, v.y);
          y1 = std::max(y1, v.y);
          x0 = std::min(x0, v.x);
          x1 = std::max(x1, v.x);
        }
        for (int y = y0; y <= y1; ++y) {
          for (int x = x0; x <= x1; ++x) {
            if (inside_polygon(verts, x, y)) map.at(g, y, x) = 1;
          }
        }
      }
    }
  }
  return map;
}

}  // namespace cari
