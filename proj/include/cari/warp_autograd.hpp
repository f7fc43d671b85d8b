#pragma once

#include <torch/torch.h>

#include "cari/warp.hpp"

namespace cari {

/// Differentiable bilinear backward warp. `src` is [N,C,H,W], `flow` is
/// [N,H,W,2] in the normalized units of warp.hpp. Float or double.
torch::Tensor warp_bilinear(const torch::Tensor& src, const torch::Tensor& flow);

/// Upsamples [N,Gh,Gw,2] control offsets to a [N,H,W,2] dense flow using the
/// same interpolation weights as dense_flow_from_control.
torch::Tensor control_to_flow(const torch::Tensor& grid, int height, int width);

ControlGrid to_control_grid(const torch::Tensor& grid, double bound);  ///< grid: [Gh,Gw,2]
DenseFlow to_dense_flow(const torch::Tensor& flow);                    ///< flow: [H,W,2]
torch::Tensor to_tensor(const DenseFlow& flow);                        ///< -> [H,W,2] double

}  // namespace cari
