#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cari/clustering.hpp"
#include "cari/condition.hpp"
#include "cari/grouping.hpp"
#include "cari/image.hpp"
#include "cari/landmark_map.hpp"
#include "cari/warp.hpp"

namespace cari {

struct ShapeTrainConfig {
  double lr = 1e-4;
  int num_shapes = 8;  ///< K
  double cycle_weight = 10.0;
  double clip = 0.01;
  int critic_steps = 5;
  int iterations = 200;
  std::uint64_t seed = 0;
  int batch_size = 8;
  int map_size = 64;
  int grid_rows = 8;
  int grid_cols = 8;
  double bound = kDefaultWarpBound;
  int width = 16;         ///< channels of the first generator layer
  int critic_width = 64;  ///< channels of the first critic layer
};

/// Throws ConfigError on any non-positive field.
void validate(const ShapeTrainConfig& cfg);

/// Predicts a bounded ControlGrid from a landmark map and a one-hot shape
/// condition broadcast as K constant channels.
class ShapeGeneratorImpl : public torch::nn::Module {
 public:
  ShapeGeneratorImpl(int groups, const ShapeTrainConfig& cfg);

  /// maps [N,G,H,W], cond [N,K] -> offsets [N,Gh,Gw,2] in [-bound, bound].
  torch::Tensor forward(const torch::Tensor& maps, const torch::Tensor& cond);

  int groups() const { return groups_; }
  int condition_channels() const { return conditions_; }
  int input_channels() const { return groups_ + conditions_; }
  double bound() const { return bound_; }
  int grid_rows() const { return rows_; }
  int grid_cols() const { return cols_; }
  /// Zeroes the ControlGrid head so every input maps to the identity warp.
  void zero_head();

 private:
  int groups_, conditions_, rows_, cols_;
  double bound_;
  torch::nn::Sequential encoder_{nullptr};
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(ShapeGenerator);

/// Wasserstein critic over landmark maps.
class ShapeCriticImpl : public torch::nn::Module {
 public:
  ShapeCriticImpl(int groups, const ShapeTrainConfig& cfg);
  torch::Tensor forward(const torch::Tensor& maps);  ///< -> [N]
  void clip_weights(double c);

 private:
  torch::nn::Sequential net_{nullptr};
  torch::nn::Linear score_{nullptr};
};
TORCH_MODULE(ShapeCritic);

ShapeGenerator build_shape_generator(const ShapeTrainConfig& cfg, int groups);
ShapeCritic build_shape_critic(const ShapeTrainConfig& cfg, int groups);

/// Applies a generator's warp channelwise to landmark maps.
torch::Tensor warp_maps(ShapeGenerator& gen, const torch::Tensor& maps, const torch::Tensor& cond);

struct ShapeLogRow {
  int iteration = 0;
  double critic_loss = 0;
  double generator_loss = 0;
  double cycle_loss = 0;
};

struct ShapeModels {
  ShapeGenerator photo_to_cari{nullptr};
  ShapeGenerator cari_to_photo{nullptr};
  ShapeCritic cari_critic{nullptr};
  ShapeCritic photo_critic{nullptr};
};

/// Called after every optimizer step; used to audit invariants during training.
using ShapeStepHook = std::function<void(const ShapeModels&)>;

struct ShapeTrainResult {
  ShapeModels models;
  std::vector<ShapeLogRow> log;
};

/// Builds fresh models and trains them cycle-consistently.
ShapeTrainResult train_shape_adaptation(const std::vector<LandmarkMap>& photo_maps,
                                        const std::vector<LandmarkMap>& cari_maps, const ShapeSet& shapes,
                                        const ShapeTrainConfig& cfg, const ShapeStepHook& hook = {});

/// Single-sample cycle term: L1(map, warp_back(warp_forward(map))).
torch::Tensor cycle_loss(ShapeGenerator& forward, ShapeGenerator& backward, const torch::Tensor& maps,
                         const torch::Tensor& cond);

struct ShapeAdapted {
  Image image;
  LabelMap labels;
  DenseFlow flow;
};

/// Predicts a ControlGrid for the photo's landmark map under `cond`, then
/// warps the image (bilinear) and labels (nearest) with one shared flow.
ShapeAdapted apply_shape_adaptation(ShapeGenerator& gen, const Image& img, const LabelMap& lbl,
                                    const LandmarkSet& lms, const ShapeCondition& cond,
                                    const LandmarkGrouping& grouping, int map_size);

/// Dense flow the generator predicts for one landmark map.
DenseFlow predict_flow(ShapeGenerator& gen, const LandmarkMap& map, const ShapeCondition& cond, int height,
                       int width);

struct ShapeCheckpointMeta {
  int groups = 0;
  int num_shapes = 0;
  std::string grouping_hash;
  ShapeTrainConfig config;
};

void save_shape_checkpoint(const std::filesystem::path& path, const ShapeModels& models,
                           const ShapeCheckpointMeta& meta);
/// Rebuilds the models described by the stored metadata and loads their weights.
ShapeModels load_shape_checkpoint(const std::filesystem::path& path, ShapeCheckpointMeta* meta = nullptr);

void write_shape_log(const std::filesystem::path& path, const std::vector<ShapeLogRow>& log);

}  // namespace cari
