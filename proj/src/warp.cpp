#include "cari/warp.hpp"

#include <algorithm>
#include <cmath>

#include "cari/errors.hpp"

namespace cari {

std::vector<double> interpolation_matrix(int out, int ctrl) {
  if (out < 1 || ctrl < 2) throw ArgumentError("interpolation needs out >= 1 and ctrl >= 2");
  std::vector<double> m(static_cast<std::size_t>(out) * ctrl, 0.0);
  for (int i = 0; i < out; ++i) {
    const double u = out == 1 ? 0.0 : static_cast<double>(i) * (ctrl - 1) / (out - 1);
    const int i0 = std::min(static_cast<int>(std::floor(u)), ctrl - 2);
    const double t = u - i0;
    m[static_cast<std::size_t>(i) * ctrl + i0] += 1.0 - t;
    m[static_cast<std::size_t>(i) * ctrl + i0 + 1] += t;
  }
  return m;
}

void validate_control_grid(const ControlGrid& cg) {
  if (cg.rows < 2 || cg.cols < 2) throw ArgumentError("control grid needs at least 2x2 nodes");
  if (cg.offsets.size() != static_cast<std::size_t>(cg.rows) * cg.cols * 2) {
    throw ArgumentError("control grid buffer does not match its dimensions");
  }
  for (double v : cg.offsets) {
    if (!std::isfinite(v) || std::abs(v) > cg.bound) throw ArgumentError("control offset exceeds the warp bound");
  }
}

DenseFlow dense_flow_from_control(const ControlGrid& cg, int height, int width) {
  if (height < 2 || width < 2) throw ArgumentError("dense flow needs at least 2x2 pixels");
  validate_control_grid(cg);
  const auto wy = interpolation_matrix(height, cg.rows);
  const auto wx = interpolation_matrix(width, cg.cols);
  DenseFlow flow(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double fx = 0.0, fy = 0.0;
      for (int r = 0; r < cg.rows; ++r) {
        const double a = wy[static_cast<std::size_t>(y) * cg.rows + r];
        if (a == 0.0) continue;
        for (int c = 0; c < cg.cols; ++c) {
          const double w = a * wx[static_cast<std::size_t>(x) * cg.cols + c];
          if (w == 0.0) continue;
          const std::size_t k = (static_cast<std::size_t>(r) * cg.cols + c) * 2;
          fx += w * cg.offsets[k];
          fy += w * cg.offsets[k + 1];
        }
      }
      flow.dx(y, x) = fx;
      flow.dy(y, x) = fy;
    }
  }
  return flow;
}

namespace {

template <typename T>
struct Tap {
  int x0, y0, x1, y1;
  T wx, wy;          // weight of the +1 neighbour on each axis
  bool clamp_x, clamp_y;
};

template <typename T>
Tap<T> make_tap(int x, int y, T dx, T dy, int height, int width) {
  const T px = static_cast<T>(x) + dx * static_cast<T>(width - 1);
  const T py = static_cast<T>(y) + dy * static_cast<T>(height - 1);
  const T cx = std::clamp(px, T(0), static_cast<T>(width - 1));
  const T cy = std::clamp(py, T(0), static_cast<T>(height - 1));
  Tap<T> t{};
  t.clamp_x = cx != px;
  t.clamp_y = cy != py;
  t.x0 = std::min(static_cast<int>(std::floor(cx)), std::max(width - 2, 0));
  t.y0 = std::min(static_cast<int>(std::floor(cy)), std::max(height - 2, 0));
  t.x1 = std::min(t.x0 + 1, width - 1);
  t.y1 = std::min(t.y0 + 1, height - 1);
  t.wx = cx - static_cast<T>(t.x0);
  t.wy = cy - static_cast<T>(t.y0);
  return t;
}

void check_sizes(std::size_t src, std::size_t flow, std::size_t dst, int channels, int height, int width) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  if (src != channels * plane || dst != channels * plane || flow != 2 * plane) {
    throw ArgumentError("raster and flow sizes do not match");
  }
}

}  // namespace

template <typename T>
void bilinear_forward(std::span<const T> src, int channels, int height, int width, std::span<const T> flow,
                      std::span<T> dst) {
  check_sizes(src.size(), flow.size(), dst.size(), channels, height, width);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * width + x;
      const auto t = make_tap<T>(x, y, flow[2 * p], flow[2 * p + 1], height, width);
      const T w00 = (T(1) - t.wx) * (T(1) - t.wy);
      const T w01 = t.wx * (T(1) - t.wy);
      const T w10 = (T(1) - t.wx) * t.wy;
      const T w11 = t.wx * t.wy;
      for (int c = 0; c < channels; ++c) {
        const T* s = src.data() + c * plane;
        T v = w00 * s[t.y0 * width + t.x0];
        // Skip zero-weight taps so integer positions reproduce inputs bitwise.
        if (w01 != T(0)) v += w01 * s[t.y0 * width + t.x1];
        if (w10 != T(0)) v += w10 * s[t.y1 * width + t.x0];
        if (w11 != T(0)) v += w11 * s[t.y1 * width + t.x1];
        dst[c * plane + p] = v;
      }
    }
  }
}

template <typename T>
void bilinear_backward(std::span<const T> src, int channels, int height, int width, std::span<const T> flow,
                       std::span<const T> upstream, std::span<T> grad_src, std::span<T> grad_flow) {
  check_sizes(src.size(), flow.size(), upstream.size(), channels, height, width);
  check_sizes(grad_src.size(), grad_flow.size(), upstream.size(), channels, height, width);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * width + x;
      const auto t = make_tap<T>(x, y, flow[2 * p], flow[2 * p + 1], height, width);
      const T w00 = (T(1) - t.wx) * (T(1) - t.wy);
      const T w01 = t.wx * (T(1) - t.wy);
      const T w10 = (T(1) - t.wx) * t.wy;
      const T w11 = t.wx * t.wy;
      T gx = 0, gy = 0;
      for (int c = 0; c < channels; ++c) {
        const T g = upstream[c * plane + p];
        if (g == T(0)) continue;
        const T* s = src.data() + c * plane;
        T* gs = grad_src.data() + c * plane;
        const T v00 = s[t.y0 * width + t.x0];
        const T v01 = s[t.y0 * width + t.x1];
        const T v10 = s[t.y1 * width + t.x0];
        const T v11 = s[t.y1 * width + t.x1];
        gs[t.y0 * width + t.x0] += g * w00;
        gs[t.y0 * width + t.x1] += g * w01;
        gs[t.y1 * width + t.x0] += g * w10;
        gs[t.y1 * width + t.x1] += g * w11;
        gx += g * ((v01 - v00) * (T(1) - t.wy) + (v11 - v10) * t.wy);
        gy += g * ((v10 - v00) * (T(1) - t.wx) + (v11 - v01) * t.wx);
      }
      if (!t.clamp_x && width > 1) grad_flow[2 * p] += gx * static_cast<T>(width - 1);
      if (!t.clamp_y && height > 1) grad_flow[2 * p + 1] += gy * static_cast<T>(height - 1);
    }
  }
}

template void bilinear_forward<float>(std::span<const float>, int, int, int, std::span<const float>,
                                      std::span<float>);
template void bilinear_forward<double>(std::span<const double>, int, int, int, std::span<const double>,
                                       std::span<double>);
template void bilinear_backward<float>(std::span<const float>, int, int, int, std::span<const float>,
                                       std::span<const float>, std::span<float>, std::span<float>);
template void bilinear_backward<double>(std::span<const double>, int, int, int, std::span<const double>,
                                        std::span<const double>, std::span<double>, std::span<double>);

void nearest_forward(std::span<const std::uint8_t> src, int height, int width, std::span<const double> flow,
                     std::span<std::uint8_t> dst) {
  check_sizes(src.size(), flow.size(), dst.size(), 1, height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * width + x;
      const double px = x + flow[2 * p] * (width - 1);
      const double py = y + flow[2 * p + 1] * (height - 1);
      const int sx = std::clamp(static_cast<int>(std::floor(px + 0.5)), 0, width - 1);
      const int sy = std::clamp(static_cast<int>(std::floor(py + 0.5)), 0, height - 1);
      dst[p] = src[static_cast<std::size_t>(sy) * width + sx];
    }
  }
}

namespace {
void check_flow_matches(int h, int w, const DenseFlow& flow) {
  if (flow.height != h || flow.width != w) {
    throw ArgumentError("flow is " + std::to_string(flow.height) + "x" + std::to_string(flow.width) +
                        " but raster is " + std::to_string(h) + "x" + std::to_string(w));
  }
}
}  // namespace

Image sample_bilinear(const Image& img, const DenseFlow& flow) {
  check_flow_matches(img.height, img.width, flow);
  // Positions are computed in double so identical flows address identical
  // source points for images and labels.
  std::vector<double> src(img.pixels.begin(), img.pixels.end());
  std::vector<double> dst(src.size());
  bilinear_forward<double>(src, 3, img.height, img.width, flow.data, dst);
  Image out(img.height, img.width);
  std::transform(dst.begin(), dst.end(), out.pixels.begin(), [](double v) { return static_cast<float>(v); });
  return out;
}

LabelMap sample_nearest(const LabelMap& lbl, const DenseFlow& flow) {
  check_flow_matches(lbl.height, lbl.width, flow);
  LabelMap out(lbl.height, lbl.width, lbl.num_classes);
  nearest_forward(lbl.classes, lbl.height, lbl.width, flow.data, out.classes);
  return out;
}

FlowGradients flow_gradients(std::span<const double> src, int channels, int height, int width,
                             const DenseFlow& flow, std::span<const double> upstream) {
  check_flow_matches(height, width, flow);
  FlowGradients g;
  g.image.assign(src.size(), 0.0);
  g.flow.assign(flow.data.size(), 0.0);
  bilinear_backward<double>(src, channels, height, width, flow.data, upstream, g.image, g.flow);
  return g;
}

}  // namespace cari
