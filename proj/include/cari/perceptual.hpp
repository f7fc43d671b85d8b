#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cari/clustering.hpp"
#include "cari/image.hpp"

namespace cari {

struct LayerTap {
  std::string name;
  int channels = 0;
};

/// Activations a perceptual extractor exposes for one batch.
struct FeatureTaps {
  torch::Tensor content;
  std::vector<torch::Tensor> style;  ///< in style_layers() order
};

/// Fixed feature stack used by the content and style losses. Parameters are
/// never trained; gradients flow to the input only.
class PerceptualExtractor {
 public:
  virtual ~PerceptualExtractor() = default;
  /// `images` is [N,C,H,W]; the result keeps its dtype.
  virtual FeatureTaps forward(const torch::Tensor& images) const = 0;
  virtual const std::vector<LayerTap>& style_layers() const = 0;
  virtual const std::string& content_layer() const = 0;
  /// Identifies architecture and weights; recorded in texture checkpoints.
  virtual std::string fingerprint() const = 0;
};

/// The raw image serves as both the content layer and the only style layer.
class IdentityExtractor final : public PerceptualExtractor {
 public:
  explicit IdentityExtractor(int channels = 3);
  FeatureTaps forward(const torch::Tensor& images) const override;
  const std::vector<LayerTap>& style_layers() const override { return layers_; }
  const std::string& content_layer() const override { return content_; }
  std::string fingerprint() const override;

 private:
  std::vector<LayerTap> layers_;
  std::string content_ = "input";
};

struct ConvStackOptions {
  /// Output channels of the four stages.
  std::vector<int> widths{8, 16, 32, 32};
  /// Convolutions per stage; stages are separated by 2x2 max pooling.
  std::vector<int> depths{2, 2, 3, 3};
  std::uint64_t seed = 7;
};

/// VGG-shaped stack. Style taps sit after the last ReLU of each stage
/// (relu1_2, relu2_2, relu3_3, relu4_3); the content tap is relu4_2.
/// Weights are He-initialized from the seed unless loaded externally.
class ConvStackExtractor final : public PerceptualExtractor {
 public:
  explicit ConvStackExtractor(ConvStackOptions opts = {});

  /// Replaces the random weights with a torch archive holding parameters
  /// named like this module's (`conv1_1.weight`, ...).
  void load_weights(const std::filesystem::path& archive);

  FeatureTaps forward(const torch::Tensor& images) const override;
  const std::vector<LayerTap>& style_layers() const override { return layers_; }
  const std::string& content_layer() const override { return content_; }
  std::string fingerprint() const override;

 private:
  ConvStackOptions opts_;
  std::shared_ptr<torch::nn::Module> module_;
  std::vector<std::vector<torch::nn::Conv2d>> stages_;
  std::vector<LayerTap> layers_;
  std::string content_;
};

/// Per-channel means then per-channel population standard deviations of a
/// [N,C,H,W] activation, as [N,2C]. `eps` is added to the variance before the
/// square root so gradients stay finite on flat maps.
torch::Tensor channel_statistics(const torch::Tensor& act, double eps = 0.0);

/// Concatenated statistics over the extractor's style layers, [N, 2*sum(C)].
torch::Tensor style_features(const PerceptualExtractor& ex, const torch::Tensor& images, double eps = 0.0);

/// Style feature of one image.
FeatureVector extract_style_feature(const Image& img, const PerceptualExtractor& ex);

/// Length of a style feature for `ex`.
int style_feature_length(const PerceptualExtractor& ex);

/// Images chosen as style references.
struct StyleReferenceSet {
  std::vector<int> indices;  ///< positions in the caricature list
  std::vector<Image> images;
  int size() const { return static_cast<int>(indices.size()); }
};

/// Agglomerative clustering of style features into `m` groups; each group
/// contributes the member closest to its mean.
StyleReferenceSet cluster_styles(std::span<const Image> caris, const PerceptualExtractor& ex, int m,
                                 Linkage linkage = Linkage::kWard);

}  // namespace cari
