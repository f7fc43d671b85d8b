#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cari/image.hpp"

namespace cari {

enum class ParserProfile { kNarrow, kFull };

ParserProfile parse_profile(const std::string& name);
std::string to_string(ParserProfile p);

struct ParseTrainConfig {
  double base_lr = 1e-3;
  double power = 0.9;
  int max_iter = 500;
  int batch_size = 8;
  int crop_size = 64;
  int num_classes = kDefaultNumClasses;
  std::uint64_t seed = 0;
  bool flip = true;
  bool random_scale = true;
  double scale_min = 0.8;
  double scale_max = 1.2;
  bool adam = false;  ///< SGD with momentum otherwise
  double momentum = 0.9;
  double weight_decay = 1e-4;
  ParserProfile profile = ParserProfile::kNarrow;
};

void validate(const ParseTrainConfig& cfg);

/// Learning rate at iteration `iter`: base_lr * (1 - iter/max_iter)^power.
double poly_lr(int iter, const ParseTrainConfig& cfg);

struct ParserArch {
  int num_classes = kDefaultNumClasses;
  ParserProfile profile = ParserProfile::kNarrow;
  std::vector<int> bins{1, 2, 3, 6};
};

/// Residual encoder reaching stride 8 after two strided stages, followed by
/// stages dilated by 2 and 4, a pyramid pooling head and a 1x1 classifier.
class ParsingNetworkImpl : public torch::nn::Module {
 public:
  explicit ParsingNetworkImpl(const ParserArch& arch);

  /// [N,3,H,W] -> backbone features [N,F,H/8,W/8].
  torch::Tensor backbone(const torch::Tensor& x);
  /// [N,3,H,W] -> logits [N,C,H,W].
  torch::Tensor forward(const torch::Tensor& x);

  const ParserArch& arch() const { return arch_; }
  int backbone_channels() const { return feat_channels_; }

 private:
  ParserArch arch_;
  int feat_channels_ = 0;
  torch::nn::Sequential stem_{nullptr};
  std::vector<torch::nn::Sequential> stages_;
  std::vector<torch::nn::Sequential> pyramid_;
  torch::nn::Sequential fuse_{nullptr};
  torch::nn::Conv2d classifier_{nullptr};
};
TORCH_MODULE(ParsingNetwork);

/// Deterministic under `seed`.
ParsingNetwork build_parsing_network(int num_classes, ParserProfile profile, std::uint64_t seed);

/// Horizontal mirror of a label map with eye-l/eye-r and brow-l/brow-r swapped.
LabelMap flip_labels(const LabelMap& lbl);
Image flip_image(const Image& img);

struct ParsePair {
  std::string name;
  Image image;
  LabelMap labels;
};

struct ParseLogRow {
  int iteration = 0;
  double lr = 0;
  double loss = 0;
};

struct ParseTrainResult {
  ParsingNetwork network{nullptr};
  std::vector<ParseLogRow> log;
};

/// Per-pixel cross-entropy under the poly schedule.
/// Throws DataError naming the sample when a label is >= num_classes.
ParseTrainResult train_parser(const std::vector<ParsePair>& pairs, const ParseTrainConfig& cfg);

/// Argmax labels. Throws ArgumentError unless H and W are multiples of 8.
LabelMap predict(ParsingNetwork& net, const Image& img);

void save_parser_checkpoint(const std::filesystem::path& path, ParsingNetwork& net, const std::string& config_hash);
ParsingNetwork load_parser_checkpoint(const std::filesystem::path& path, std::string* config_hash = nullptr);

void write_parse_log(const std::filesystem::path& path, const std::vector<ParseLogRow>& log);

/// Stable text form of the training config, used for checkpoint hashes.
std::string describe(const ParseTrainConfig& cfg);

}  // namespace cari
