#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cari/condition.hpp"
#include "cari/image.hpp"
#include "cari/perceptual.hpp"

namespace cari {

struct TextureTrainConfig {
  double lr = 1e-4;
  double style_weight = 10.0;  ///< lambda_s
  int iterations = 300;
  std::uint64_t seed = 0;
  int num_styles = 3;  ///< M
  int batch_size = 4;
  int width = 16;
  /// Added to variances inside the style loss so flat images keep finite gradients.
  double variance_eps = 1e-8;
};

void validate(const TextureTrainConfig& cfg);

/// Conditional encoder-decoder: (image, M broadcast condition planes) ->
/// image in [0,1]. The decoder predicts a logit-space residual over the
/// input, zero at initialization. Spatial sizes must be multiples of 2.
class TextureNetworkImpl : public torch::nn::Module {
 public:
  TextureNetworkImpl(int num_styles, int width);
  torch::Tensor forward(const torch::Tensor& images, const torch::Tensor& cond);
  int num_styles() const { return styles_; }
  int width() const { return width_; }

 private:
  int styles_, width_;
  torch::nn::Conv2d in_{nullptr}, down_{nullptr}, res1a_{nullptr}, res1b_{nullptr}, res2a_{nullptr}, res2b_{nullptr},
      up_{nullptr}, out_{nullptr};
  torch::nn::InstanceNorm2d n_in_{nullptr}, n_down_{nullptr}, n_up_{nullptr};
};
TORCH_MODULE(TextureNetwork);

TextureNetwork build_texture_network(const TextureTrainConfig& cfg);

/// Mean squared difference of content-layer activations.
torch::Tensor content_loss(const torch::Tensor& gen, const torch::Tensor& content, const PerceptualExtractor& ex);
/// Squared Euclidean distance between style features, averaged over the batch.
torch::Tensor style_loss(const torch::Tensor& gen, const torch::Tensor& reference, const PerceptualExtractor& ex,
                         double variance_eps = 0.0);

double content_loss(const Image& gen, const Image& content, const PerceptualExtractor& ex);
double style_loss(const Image& gen, const Image& reference, const PerceptualExtractor& ex);

struct TextureLogRow {
  int iteration = 0;
  double content_loss = 0;
  double style_loss = 0;
  double total_loss = 0;
};

struct TextureTrainResult {
  TextureNetwork network{nullptr};
  std::vector<TextureLogRow> log;
};

/// Minimizes content_loss(out, input) + lambda_s * style_loss(out, refs[c])
/// with conditions drawn uniformly per sample.
TextureTrainResult train_texture_network(const std::vector<Image>& deformed, const StyleReferenceSet& refs,
                                         const PerceptualExtractor& ex, const TextureTrainConfig& cfg);

Image apply_texture(TextureNetwork& net, const Image& img, const StyleCondition& cond);

void save_texture_checkpoint(const std::filesystem::path& path, TextureNetwork& net, const TextureTrainConfig& cfg,
                             const std::string& extractor_fingerprint);
TextureNetwork load_texture_checkpoint(const std::filesystem::path& path, std::string* extractor_fingerprint = nullptr);

void write_texture_log(const std::filesystem::path& path, const std::vector<TextureLogRow>& log);

}  // namespace cari
