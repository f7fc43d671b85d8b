#pragma once

#include <span>
#include <vector>

#include "cari/image.hpp"

namespace cari {

// Coordinates are normalized so that 0 and 1 are the centers of the first and
// last pixel on each axis. A flow of (dx, dy) at pixel (x, y) samples the
// source at (x + dx * (W - 1), y + dy * (H - 1)).

inline constexpr double kDefaultWarpBound = 0.15;

/// Coarse lattice of displacements anchored at the image corners.
struct ControlGrid {
  int rows = 0;
  int cols = 0;
  double bound = kDefaultWarpBound;
  std::vector<double> offsets;  ///< rows x cols x (dx, dy), row-major

  ControlGrid() = default;
  ControlGrid(int r, int c, double b = kDefaultWarpBound)
      : rows(r), cols(c), bound(b), offsets(static_cast<std::size_t>(r) * c * 2, 0.0) {}

  double& dx(int r, int c) { return offsets[(static_cast<std::size_t>(r) * cols + c) * 2]; }
  double& dy(int r, int c) { return offsets[(static_cast<std::size_t>(r) * cols + c) * 2 + 1]; }
};

/// Dense backward-sampling flow, H x W x (dx, dy).
struct DenseFlow {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  DenseFlow() = default;
  DenseFlow(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 2, 0.0) {}

  double& dx(int y, int x) { return data[(static_cast<std::size_t>(y) * width + x) * 2]; }
  double& dy(int y, int x) { return data[(static_cast<std::size_t>(y) * width + x) * 2 + 1]; }
  double dx(int y, int x) const { return data[(static_cast<std::size_t>(y) * width + x) * 2]; }
  double dy(int y, int x) const { return data[(static_cast<std::size_t>(y) * width + x) * 2 + 1]; }
};

/// Row-major (out x ctrl) linear-interpolation weights mapping `ctrl`
/// lattice nodes spread over [0,1] onto `out` pixel centers.
std::vector<double> interpolation_matrix(int out, int ctrl);

/// Bilinear upsampling of the control lattice; linear in the offsets.
DenseFlow dense_flow_from_control(const ControlGrid& cg, int height, int width);

/// Throws ArgumentError when an offset exceeds the grid's bound.
void validate_control_grid(const ControlGrid& cg);

// Raw kernels over planar buffers of `channels` x H x W with an H x W x 2
// flow. Sample positions are clamped to the image before interpolation.

template <typename T>
void bilinear_forward(std::span<const T> src, int channels, int height, int width, std::span<const T> flow,
                      std::span<T> dst);

/// Accumulates into grad_src and grad_flow (both must be zeroed by the caller
/// for a fresh gradient). Flow gradients vanish where the position is clamped.
template <typename T>
void bilinear_backward(std::span<const T> src, int channels, int height, int width, std::span<const T> flow,
                       std::span<const T> upstream, std::span<T> grad_src, std::span<T> grad_flow);

/// Nearest-pixel read of an integer raster; output values are a subset of the input's.
void nearest_forward(std::span<const std::uint8_t> src, int height, int width, std::span<const double> flow,
                     std::span<std::uint8_t> dst);

Image sample_bilinear(const Image& img, const DenseFlow& flow);
LabelMap sample_nearest(const LabelMap& lbl, const DenseFlow& flow);

struct FlowGradients {
  std::vector<double> image;  ///< same layout as the sampled raster
  std::vector<double> flow;   ///< H x W x 2
};

/// Analytic gradients of sum(upstream * sample_bilinear(src, flow)).
FlowGradients flow_gradients(std::span<const double> src, int channels, int height, int width,
                             const DenseFlow& flow, std::span<const double> upstream);

}  // namespace cari
