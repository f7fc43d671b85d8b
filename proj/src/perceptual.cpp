#include "cari/perceptual.hpp"

#include <sstream>

#include "cari/checksum.hpp"
#include "cari/errors.hpp"
#include "cari/torch_bridge.hpp"

namespace cari {

IdentityExtractor::IdentityExtractor(int channels) : layers_{{"input", channels}} {}

FeatureTaps IdentityExtractor::forward(const torch::Tensor& images) const { return {images, {images}}; }

std::string IdentityExtractor::fingerprint() const { return "identity:" + std::to_string(layers_[0].channels); }

ConvStackExtractor::ConvStackExtractor(ConvStackOptions opts)
    : opts_(std::move(opts)), module_(std::make_shared<torch::nn::Module>("ConvStackExtractor")) {
  if (opts_.widths.size() != opts_.depths.size() || opts_.widths.size() < 2) {
    throw ArgumentError("conv stack needs matching widths/depths for at least two stages");
  }
  torch::manual_seed(opts_.seed);
  int in = 3;
  for (std::size_t s = 0; s < opts_.widths.size(); ++s) {
    std::vector<torch::nn::Conv2d> convs;
    for (int d = 0; d < opts_.depths[s]; ++d) {
      auto conv = torch::nn::Conv2d(torch::nn::Conv2dOptions(in, opts_.widths[s], 3).padding(1));
      torch::nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanIn, torch::kReLU);
      torch::nn::init::zeros_(conv->bias);
      const std::string name = "conv" + std::to_string(s + 1) + "_" + std::to_string(d + 1);
      module_->register_module(name, conv);
      convs.push_back(conv);
      in = opts_.widths[s];
    }
    stages_.push_back(std::move(convs));
    layers_.push_back({"relu" + std::to_string(s + 1) + "_" + std::to_string(opts_.depths[s]), opts_.widths[s]});
  }
  const std::size_t last = opts_.widths.size() - 1;
  content_ = "relu" + std::to_string(last + 1) + "_" + std::to_string(std::min(2, opts_.depths[last]));
  for (auto& p : module_->parameters()) p.set_requires_grad(false);
  module_->eval();
}

void ConvStackExtractor::load_weights(const std::filesystem::path& archive) {
  torch::serialize::InputArchive in;
  in.load_from(archive.string());
  torch::NoGradGuard guard;
  for (auto& item : module_->named_parameters()) {
    torch::Tensor t;
    if (!in.try_read(item.key(), t)) throw FormatError(archive.string() + ": missing parameter " + item.key());
    if (!t.sizes().equals(item.value().sizes())) throw FormatError(archive.string() + ": shape mismatch for " + item.key());
    item.value().copy_(t);
  }
}

FeatureTaps ConvStackExtractor::forward(const torch::Tensor& images) const {
  FeatureTaps taps;
  auto x = images;
  const auto dtype = images.scalar_type();
  const std::size_t last = stages_.size() - 1;
  const int content_depth = std::min(2, opts_.depths[last]);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    if (s > 0) x = torch::max_pool2d(x, 2);
    for (std::size_t d = 0; d < stages_[s].size(); ++d) {
      auto& conv = stages_[s][d];
      x = torch::relu(torch::conv2d(x, conv->weight.to(dtype), conv->bias.to(dtype), 1, 1));
      if (s == last && static_cast<int>(d) + 1 == content_depth) taps.content = x;
    }
    taps.style.push_back(x);
  }
  return taps;
}

std::string ConvStackExtractor::fingerprint() const {
  std::ostringstream desc;
  desc << "convstack";
  for (std::size_t s = 0; s < opts_.widths.size(); ++s) desc << ':' << opts_.widths[s] << 'x' << opts_.depths[s];
  std::string bytes;
  for (const auto& p : module_->parameters()) {
    auto c = p.contiguous();
    bytes.append(reinterpret_cast<const char*>(c.data_ptr()), c.numel() * c.element_size());
  }
  return desc.str() + ":" + sha256_hex(bytes).substr(0, 16);
}

torch::Tensor channel_statistics(const torch::Tensor& act, double eps) {
  TORCH_CHECK(act.dim() == 4, "channel_statistics expects [N,C,H,W]");
  auto mean = act.mean({2, 3});
  auto var = (act - mean.unsqueeze(2).unsqueeze(3)).pow(2).mean({2, 3});
  auto std = eps > 0.0 ? (var + eps).sqrt() : var.sqrt();
  return torch::cat({mean, std}, 1);
}

torch::Tensor style_features(const PerceptualExtractor& ex, const torch::Tensor& images, double eps) {
  auto taps = ex.forward(images);
  std::vector<torch::Tensor> parts;
  for (const auto& a : taps.style) parts.push_back(channel_statistics(a, eps));
  return torch::cat(parts, 1);
}

int style_feature_length(const PerceptualExtractor& ex) {
  int n = 0;
  for (const auto& l : ex.style_layers()) n += 2 * l.channels;
  return n;
}

FeatureVector extract_style_feature(const Image& img, const PerceptualExtractor& ex) {
  torch::NoGradGuard guard;
  auto f = style_features(ex, to_tensor(img).unsqueeze(0)).squeeze(0).to(torch::kFloat64).contiguous();
  return FeatureVector(f.data_ptr<double>(), f.data_ptr<double>() + f.numel());
}

StyleReferenceSet cluster_styles(std::span<const Image> caris, const PerceptualExtractor& ex, int m, Linkage linkage) {
  if (m < 1 || caris.size() < static_cast<std::size_t>(m)) {
    throw ArgumentError("cluster_styles needs 1 <= M <= number of caricatures (M=" + std::to_string(m) +
                        ", caricatures=" + std::to_string(caris.size()) + ")");
  }
  std::vector<FeatureVector> feats;
  feats.reserve(caris.size());
  for (const auto& img : caris) feats.push_back(extract_style_feature(img, ex));
  StyleReferenceSet refs;
  refs.indices = select_style_references(feats, m, linkage);
  for (int i : refs.indices) refs.images.push_back(caris[i]);
  return refs;
}

}  // namespace cari
