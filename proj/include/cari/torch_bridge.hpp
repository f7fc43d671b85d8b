#pragma once

#include <torch/torch.h>

#include <span>

#include "cari/image.hpp"
#include "cari/landmark_map.hpp"

namespace cari {

torch::Tensor to_tensor(const Image& img);             ///< [3,H,W] float
torch::Tensor to_tensor(const LabelMap& lbl);          ///< [H,W] int64
torch::Tensor to_tensor(const LandmarkMap& map);       ///< [G,H,W] float
torch::Tensor stack_images(std::span<const Image> imgs);  ///< [N,3,H,W]

/// Clamps to [0,1]. Accepts [3,H,W] or [1,3,H,W].
Image to_image(const torch::Tensor& t);
LabelMap to_label_map(const torch::Tensor& t, int num_classes);  ///< [H,W] integer

/// One-hot condition vector, length `count`.
torch::Tensor one_hot(int index, int count);

/// Broadcasts [N,K] conditions to [N,K,H,W] constant planes.
torch::Tensor broadcast_condition(const torch::Tensor& cond, int64_t height, int64_t width);

/// Seeds torch's generator from a 64-bit seed.
void seed_torch(std::uint64_t seed);

}  // namespace cari
