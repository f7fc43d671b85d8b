#include "cari/texture_adapt.hpp"

#include <fstream>
#include <random>

#include "cari/errors.hpp"
#include "cari/torch_bridge.hpp"

namespace cari {

namespace nn = torch::nn;

void validate(const TextureTrainConfig& cfg) {
  if (!(cfg.lr > 0) || !(cfg.style_weight > 0) || cfg.iterations < 0 || cfg.num_styles < 1 || cfg.batch_size < 1 ||
      cfg.width < 1 || cfg.variance_eps < 0) {
    throw ConfigError("invalid texture training configuration");
  }
}

TextureNetworkImpl::TextureNetworkImpl(int num_styles, int width) : styles_(num_styles), width_(width) {
  const int w = width, m = num_styles;
  auto conv = [](int in, int out, int k, int stride = 1) {
    return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(stride).padding(k / 2).padding_mode(torch::kReflect));
  };
  auto norm = [](int c) { return nn::InstanceNorm2d(nn::InstanceNorm2dOptions(c).affine(true)); };
  in_ = register_module("inp", conv(3 + m, w, 5));
  n_in_ = register_module("n_in", norm(w));
  down_ = register_module("down", conv(w, 2 * w, 3, 2));
  n_down_ = register_module("n_down", norm(2 * w));
  // The condition is injected again at the bottleneck.
  res1a_ = register_module("res1a", conv(2 * w + m, 2 * w, 3));
  res1b_ = register_module("res1b", conv(2 * w, 2 * w, 3));
  res2a_ = register_module("res2a", conv(2 * w, 2 * w, 3));
  res2b_ = register_module("res2b", conv(2 * w, 2 * w, 3));
  up_ = register_module("up", conv(2 * w, w, 3));
  n_up_ = register_module("n_up", norm(w));
  out_ = register_module("out", conv(w + 3, 3, 5));
  // The residual head starts at zero, so a fresh network returns its input.
  torch::NoGradGuard guard;
  out_->weight.zero_();
  out_->bias.zero_();
}

torch::Tensor TextureNetworkImpl::forward(const torch::Tensor& images, const torch::Tensor& cond) {
  TORCH_CHECK(cond.dim() == 2 && cond.size(1) == styles_, "texture network expects a [N,", styles_, "] condition");
  TORCH_CHECK(images.size(2) % 2 == 0 && images.size(3) % 2 == 0, "texture network needs even spatial sizes");
  const auto c = cond.to(images.scalar_type());
  auto x = torch::cat({images, broadcast_condition(c, images.size(2), images.size(3))}, 1);
  x = torch::relu(n_in_->forward(in_->forward(x)));
  auto h = torch::relu(n_down_->forward(down_->forward(x)));
  auto r = torch::relu(res1a_->forward(torch::cat({h, broadcast_condition(c, h.size(2), h.size(3))}, 1)));
  h = h + res1b_->forward(r);
  r = torch::relu(res2a_->forward(torch::relu(h)));
  h = h + res2b_->forward(r);
  auto u = torch::upsample_nearest2d(torch::relu(h), {images.size(2), images.size(3)});
  u = torch::relu(n_up_->forward(up_->forward(u)));
  const auto base = torch::logit(images.clamp(1e-3, 1.0 - 1e-3));
  return torch::sigmoid(base + out_->forward(torch::cat({u, images}, 1)));
}

TextureNetwork build_texture_network(const TextureTrainConfig& cfg) {
  validate(cfg);
  torch::manual_seed(cfg.seed);
  return TextureNetwork(cfg.num_styles, cfg.width);
}

torch::Tensor content_loss(const torch::Tensor& gen, const torch::Tensor& content, const PerceptualExtractor& ex) {
  TORCH_CHECK(gen.sizes() == content.sizes(), "content_loss: inputs differ in shape");
  auto a = ex.forward(gen).content;
  auto b = ex.forward(content).content;
  return (a - b).pow(2).mean();
}

torch::Tensor style_loss(const torch::Tensor& gen, const torch::Tensor& reference, const PerceptualExtractor& ex,
                         double variance_eps) {
  if (ex.style_layers().empty()) throw ArgumentError("extractor has no style layers");
  auto a = style_features(ex, gen, variance_eps);
  auto b = style_features(ex, reference, variance_eps);
  return (a - b).pow(2).sum(1).mean();
}

double content_loss(const Image& gen, const Image& content, const PerceptualExtractor& ex) {
  if (gen.height != content.height || gen.width != content.width) throw ArgumentError("content_loss: size mismatch");
  torch::NoGradGuard guard;
  return content_loss(to_tensor(gen).unsqueeze(0), to_tensor(content).unsqueeze(0), ex).item<double>();
}

double style_loss(const Image& gen, const Image& reference, const PerceptualExtractor& ex) {
  torch::NoGradGuard guard;
  return style_loss(to_tensor(gen).unsqueeze(0), to_tensor(reference).unsqueeze(0), ex).item<double>();
}

TextureTrainResult train_texture_network(const std::vector<Image>& deformed, const StyleReferenceSet& refs,
                                         const PerceptualExtractor& ex, const TextureTrainConfig& cfg) {
  validate(cfg);
  if (deformed.empty() || refs.size() == 0) throw ArgumentError("texture training needs images and style references");
  if (refs.size() != cfg.num_styles) {
    throw ArgumentError("style reference set has " + std::to_string(refs.size()) + " entries but M=" +
                        std::to_string(cfg.num_styles));
  }
  TextureTrainResult res;
  res.network = build_texture_network(cfg);
  auto& net = res.network;
  const auto inputs = stack_images(deformed);

  torch::Tensor ref_features;
  {
    torch::NoGradGuard guard;
    ref_features = style_features(ex, stack_images(refs.images), cfg.variance_eps);
  }

  torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(cfg.lr));
  std::mt19937_64 rng(cfg.seed ^ 0x7e47u);
  std::uniform_int_distribution<int64_t> pick(0, inputs.size(0) - 1);
  std::uniform_int_distribution<int64_t> pick_style(0, cfg.num_styles - 1);
  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<int64_t> idx(cfg.batch_size), styles(cfg.batch_size);
    for (auto& i : idx) i = pick(rng);
    for (auto& s : styles) s = pick_style(rng);
    auto x = inputs.index_select(0, torch::tensor(idx));
    auto s = torch::tensor(styles);
    auto cond = torch::one_hot(s, cfg.num_styles).to(torch::kFloat32);

    opt.zero_grad();
    auto out = net->forward(x, cond);
    auto lc = content_loss(out, x, ex);
    auto ls = (style_features(ex, out, cfg.variance_eps) - ref_features.index_select(0, s)).pow(2).sum(1).mean();
    auto loss = lc + cfg.style_weight * ls;
    loss.backward();
    opt.step();
    res.log.push_back({it, lc.item<double>(), ls.item<double>(), loss.item<double>()});
  }
  return res;
}

Image apply_texture(TextureNetwork& net, const Image& img, const StyleCondition& cond) {
  if (cond.size() != net->num_styles()) {
    throw ArgumentError("condition has length " + std::to_string(cond.size()) + " but the network was trained with M=" +
                        std::to_string(net->num_styles()));
  }
  torch::NoGradGuard guard;
  return to_image(net->forward(to_tensor(img).unsqueeze(0), cond.tensor()));
}

void save_texture_checkpoint(const std::filesystem::path& path, TextureNetwork& net, const TextureTrainConfig& cfg,
                             const std::string& extractor_fingerprint) {
  torch::serialize::OutputArchive a;
  a.write("meta.kind", c10::IValue(std::string("texture")));
  a.write("meta.num_styles", c10::IValue(static_cast<int64_t>(cfg.num_styles)));
  a.write("meta.width", c10::IValue(static_cast<int64_t>(cfg.width)));
  a.write("meta.extractor", c10::IValue(extractor_fingerprint));
  a.write("cfg.lr", c10::IValue(cfg.lr));
  a.write("cfg.style_weight", c10::IValue(cfg.style_weight));
  a.write("cfg.iterations", c10::IValue(static_cast<int64_t>(cfg.iterations)));
  a.write("cfg.seed", c10::IValue(static_cast<int64_t>(cfg.seed)));
  torch::serialize::OutputArchive sub;
  net->save(sub);
  a.write("network", sub);
  a.save_to(path.string());
}

TextureNetwork load_texture_checkpoint(const std::filesystem::path& path, std::string* extractor_fingerprint) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("no texture checkpoint at " + path.string());
  torch::serialize::InputArchive a;
  a.load_from(path.string());
  c10::IValue kind, styles, width, fp;
  if (!a.try_read("meta.kind", kind) || kind.toStringRef() != "texture" || !a.try_read("meta.num_styles", styles) ||
      !a.try_read("meta.width", width) || !a.try_read("meta.extractor", fp)) {
    throw FormatError(path.string() + " is not a texture checkpoint");
  }
  TextureNetwork net(static_cast<int>(styles.toInt()), static_cast<int>(width.toInt()));
  torch::serialize::InputArchive sub;
  if (!a.try_read("network", sub)) throw FormatError(path.string() + " has no network weights");
  net->load(sub);
  if (extractor_fingerprint) *extractor_fingerprint = fp.toStringRef();
  return net;
}

void write_texture_log(const std::filesystem::path& path, const std::vector<TextureLogRow>& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iteration,content_loss,style_loss,total_loss\n";
  out.precision(10);
  for (const auto& r : log) {
    out << r.iteration << ',' << r.content_loss << ',' << r.style_loss << ',' << r.total_loss << '\n';
  }
}

}  // namespace cari
