#include "cari/parsing.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "cari/errors.hpp"
#include "cari/torch_bridge.hpp"

namespace cari {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

ParserProfile parse_profile(const std::string& name) {
  if (name == "narrow") return ParserProfile::kNarrow;
  if (name == "full") return ParserProfile::kFull;
  throw ConfigError("unknown parser profile '" + name + "' (expected narrow or full)");
}

std::string to_string(ParserProfile p) { return p == ParserProfile::kNarrow ? "narrow" : "full"; }

void validate(const ParseTrainConfig& cfg) {
  if (!(cfg.base_lr > 0) || !(cfg.power > 0) || cfg.max_iter < 0 || cfg.batch_size < 1 || cfg.crop_size < 8 ||
      cfg.crop_size % 8 != 0 || cfg.num_classes < 2 || cfg.num_classes > 256 || !(cfg.scale_min > 0) ||
      cfg.scale_max < cfg.scale_min || cfg.momentum < 0 || cfg.weight_decay < 0) {
    throw ConfigError("invalid parser training configuration");
  }
}

double poly_lr(int iter, const ParseTrainConfig& cfg) {
  if (iter < 0 || iter > cfg.max_iter) {
    throw ArgumentError("iteration " + std::to_string(iter) + " outside [0, " + std::to_string(cfg.max_iter) + "]");
  }
  if (cfg.max_iter == 0) return cfg.base_lr;
  return cfg.base_lr * std::pow(1.0 - static_cast<double>(iter) / cfg.max_iter, cfg.power);
}

namespace {

struct ProfileShape {
  int base;
  std::vector<int> blocks;
};

ProfileShape profile_shape(ParserProfile p) {
  if (p == ParserProfile::kFull) return {64, {3, 4, 6, 3}};
  return {16, {1, 1, 2, 1}};
}

nn::Conv2d conv3(int in, int out, int stride = 1, int dilation = 1) {
  return nn::Conv2d(
      nn::Conv2dOptions(in, out, 3).stride(stride).padding(dilation).dilation(dilation).bias(false));
}

class ResidualBlockImpl : public nn::Module {
 public:
  ResidualBlockImpl(int in, int out, int stride, int dilation) {
    c1_ = register_module("c1", conv3(in, out, stride, dilation));
    b1_ = register_module("b1", nn::BatchNorm2d(out));
    c2_ = register_module("c2", conv3(out, out, 1, dilation));
    b2_ = register_module("b2", nn::BatchNorm2d(out));
    if (stride != 1 || in != out) {
      proj_ = register_module("proj", nn::Conv2d(nn::Conv2dOptions(in, out, 1).stride(stride).bias(false)));
      bp_ = register_module("bp", nn::BatchNorm2d(out));
    }
  }
  torch::Tensor forward(const torch::Tensor& x) {
    auto h = torch::relu(b1_->forward(c1_->forward(x)));
    h = b2_->forward(c2_->forward(h));
    auto skip = proj_ ? bp_->forward(proj_->forward(x)) : x;
    return torch::relu(h + skip);
  }

 private:
  nn::Conv2d c1_{nullptr}, c2_{nullptr}, proj_{nullptr};
  nn::BatchNorm2d b1_{nullptr}, b2_{nullptr}, bp_{nullptr};
};
TORCH_MODULE(ResidualBlock);

}  // namespace

ParsingNetworkImpl::ParsingNetworkImpl(const ParserArch& arch) : arch_(arch) {
  if (arch.num_classes < 2) throw ArgumentError("parser needs at least 2 classes");
  if (arch.bins.empty()) throw ArgumentError("pyramid pooling needs at least one bin");
  const auto shape = profile_shape(arch.profile);
  const int b = shape.base;
  stem_ = register_module("stem", nn::Sequential(nn::Conv2d(nn::Conv2dOptions(3, b, 3).stride(2).padding(1).bias(false)),
                                                 nn::BatchNorm2d(b), nn::ReLU()));
  // The stem and the first two stages each halve; dilations 2,4 keep 1/8.
  const int stride_first[4] = {2, 2, 1, 1};
  const int dilations[4] = {1, 1, 2, 4};
  int in = b;
  for (int s = 0; s < 4; ++s) {
    const int out = b << s;
    nn::Sequential stage;
    for (int k = 0; k < shape.blocks[s]; ++k) {
      const int stride = k == 0 ? stride_first[s] : 1;
      stage->push_back(ResidualBlock(k == 0 ? in : out, out, stride, dilations[s]));
    }
    stages_.push_back(register_module("stage" + std::to_string(s + 1), stage));
    in = out;
  }
  feat_channels_ = in;
  const int branch = std::max(1, in / static_cast<int>(arch.bins.size()));
  for (std::size_t i = 0; i < arch.bins.size(); ++i) {
    pyramid_.push_back(register_module(
        "ppm" + std::to_string(i),
        nn::Sequential(nn::AdaptiveAvgPool2d(nn::AdaptiveAvgPool2dOptions(arch.bins[i])),
                       nn::Conv2d(nn::Conv2dOptions(in, branch, 1)), nn::ReLU())));
  }
  const int fused_in = in + branch * static_cast<int>(arch.bins.size());
  fuse_ = register_module("fuse", nn::Sequential(conv3(fused_in, in), nn::BatchNorm2d(in), nn::ReLU()));
  classifier_ = register_module("classifier", nn::Conv2d(nn::Conv2dOptions(in, arch.num_classes, 1)));
}

torch::Tensor ParsingNetworkImpl::backbone(const torch::Tensor& x) {
  auto h = stem_->forward(x);
  for (auto& s : stages_) h = s->forward(h);
  return h;
}

torch::Tensor ParsingNetworkImpl::forward(const torch::Tensor& x) {
  auto f = backbone(x);
  std::vector<torch::Tensor> parts{f};
  const auto size = std::vector<int64_t>{f.size(2), f.size(3)};
  for (auto& p : pyramid_) {
    parts.push_back(F::interpolate(p->forward(f), F::InterpolateFuncOptions().size(size).mode(torch::kBilinear).align_corners(false)));
  }
  auto logits = classifier_->forward(fuse_->forward(torch::cat(parts, 1)));
  return F::interpolate(logits, F::InterpolateFuncOptions()
                                    .size(std::vector<int64_t>{x.size(2), x.size(3)})
                                    .mode(torch::kBilinear)
                                    .align_corners(false));
}

ParsingNetwork build_parsing_network(int num_classes, ParserProfile profile, std::uint64_t seed) {
  if (num_classes < 2) throw ArgumentError("parser needs at least 2 classes");
  torch::manual_seed(seed);
  ParserArch arch;
  arch.num_classes = num_classes;
  arch.profile = profile;
  return ParsingNetwork(arch);
}

namespace {

// Left/right class pairs exchanged by a horizontal flip.
std::vector<uint8_t> flip_lookup() {
  std::vector<uint8_t> lut(256);
  for (int i = 0; i < 256; ++i) lut[i] = static_cast<uint8_t>(i);
  std::swap(lut[static_cast<int>(FaceClass::kEyeL)], lut[static_cast<int>(FaceClass::kEyeR)]);
  std::swap(lut[static_cast<int>(FaceClass::kBrowL)], lut[static_cast<int>(FaceClass::kBrowR)]);
  return lut;
}

}  // namespace

LabelMap flip_labels(const LabelMap& lbl) {
  static const auto lut = flip_lookup();
  LabelMap out = lbl;
  for (int y = 0; y < lbl.height; ++y) {
    for (int x = 0; x < lbl.width; ++x) out.at(y, x) = lut[lbl.at(y, lbl.width - 1 - x)];
  }
  return out;
}

Image flip_image(const Image& img) {
  Image out = img;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
    }
  }
  return out;
}

namespace {

constexpr int64_t kIgnore = -100;

struct Sample {
  torch::Tensor image;   // [3,H,W]
  torch::Tensor labels;  // [H,W] int64
  torch::Tensor flipped_image;
  torch::Tensor flipped_labels;
};

// Random scale, optional flip, then a crop (padding with ignored pixels) to
// crop x crop.
std::pair<torch::Tensor, torch::Tensor> augment(const Sample& s, const ParseTrainConfig& cfg, std::mt19937_64& rng) {
  bool flip = false;
  if (cfg.flip) flip = std::bernoulli_distribution(0.5)(rng);
  auto img = flip ? s.flipped_image : s.image;
  auto lbl = flip ? s.flipped_labels : s.labels;
  if (cfg.random_scale) {
    const double f = std::uniform_real_distribution<double>(cfg.scale_min, cfg.scale_max)(rng);
    const int64_t h = std::max<int64_t>(8, std::lround(img.size(1) * f));
    const int64_t w = std::max<int64_t>(8, std::lround(img.size(2) * f));
    if (h != img.size(1) || w != img.size(2)) {
      img = F::interpolate(img.unsqueeze(0), F::InterpolateFuncOptions()
                                                  .size(std::vector<int64_t>{h, w})
                                                  .mode(torch::kBilinear)
                                                  .align_corners(false))
                .squeeze(0);
      lbl = F::interpolate(lbl.to(torch::kFloat32).unsqueeze(0).unsqueeze(0),
                           F::InterpolateFuncOptions().size(std::vector<int64_t>{h, w}).mode(torch::kNearest))
                .squeeze(0)
                .squeeze(0)
                .to(torch::kInt64);
    }
  }
  const int64_t crop = cfg.crop_size;
  auto out_img = torch::zeros({3, crop, crop});
  auto out_lbl = torch::full({crop, crop}, kIgnore, torch::kInt64);
  const int64_t h = img.size(1), w = img.size(2);
  // Offsets of the crop window in the source (negative means padding).
  auto offset = [&](int64_t extent) -> int64_t {
    if (extent >= crop) return std::uniform_int_distribution<int64_t>(0, extent - crop)(rng);
    return -std::uniform_int_distribution<int64_t>(0, crop - extent)(rng);
  };
  const int64_t oy = offset(h), ox = offset(w);
  const int64_t sy0 = std::max<int64_t>(0, oy), sx0 = std::max<int64_t>(0, ox);
  const int64_t dy0 = std::max<int64_t>(0, -oy), dx0 = std::max<int64_t>(0, -ox);
  const int64_t ch = std::min(h - sy0, crop - dy0), cw = std::min(w - sx0, crop - dx0);
  using torch::indexing::Slice;
  out_img.index_put_({Slice(), Slice(dy0, dy0 + ch), Slice(dx0, dx0 + cw)},
                     img.index({Slice(), Slice(sy0, sy0 + ch), Slice(sx0, sx0 + cw)}));
  out_lbl.index_put_({Slice(dy0, dy0 + ch), Slice(dx0, dx0 + cw)}, lbl.index({Slice(sy0, sy0 + ch), Slice(sx0, sx0 + cw)}));
  return {out_img, out_lbl};
}

}  // namespace

ParseTrainResult train_parser(const std::vector<ParsePair>& pairs, const ParseTrainConfig& cfg) {
  validate(cfg);
  if (pairs.empty()) throw ArgumentError("train_parser needs at least one pair");
  std::vector<Sample> samples;
  samples.reserve(pairs.size());
  for (const auto& p : pairs) {
    validate_image(p.image);
    if (p.labels.height != p.image.height || p.labels.width != p.image.width) {
      throw DataError(p.name + ": label map size differs from image size");
    }
    for (auto v : p.labels.classes) {
      if (v >= cfg.num_classes) {
        throw DataError(p.name + ": label " + std::to_string(v) + " >= C=" + std::to_string(cfg.num_classes));
      }
    }
    Sample s;
    s.image = to_tensor(p.image);
    s.labels = to_tensor(p.labels);
    if (cfg.flip) {
      s.flipped_image = to_tensor(flip_image(p.image));
      s.flipped_labels = to_tensor(flip_labels(p.labels));
    }
    samples.push_back(std::move(s));
  }

  ParseTrainResult res;
  res.network = build_parsing_network(cfg.num_classes, cfg.profile, cfg.seed);
  auto& net = res.network;
  net->train();
  std::unique_ptr<torch::optim::Optimizer> opt;
  if (cfg.adam) {
    opt = std::make_unique<torch::optim::Adam>(
        net->parameters(), torch::optim::AdamOptions(cfg.base_lr).weight_decay(cfg.weight_decay));
  } else {
    opt = std::make_unique<torch::optim::SGD>(
        net->parameters(),
        torch::optim::SGDOptions(cfg.base_lr).momentum(cfg.momentum).weight_decay(cfg.weight_decay));
  }
  std::mt19937_64 rng(cfg.seed ^ 0x9a75e5u);
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
  for (int it = 0; it < cfg.max_iter; ++it) {
    const double lr = poly_lr(it, cfg);
    for (auto& group : opt->param_groups()) group.options().set_lr(lr);
    std::vector<torch::Tensor> xs, ys;
    for (int b = 0; b < cfg.batch_size; ++b) {
      auto [x, y] = augment(samples[pick(rng)], cfg, rng);
      xs.push_back(x);
      ys.push_back(y);
    }
    opt->zero_grad();
    auto logits = net->forward(torch::stack(xs));
    auto loss = F::cross_entropy(logits, torch::stack(ys), F::CrossEntropyFuncOptions().ignore_index(kIgnore));
    loss.backward();
    opt->step();
    res.log.push_back({it, lr, loss.item<double>()});
  }
  net->eval();
  return res;
}

LabelMap predict(ParsingNetwork& net, const Image& img) {
  validate_image(img);
  if (img.height % 8 != 0 || img.width % 8 != 0) {
    throw ArgumentError("predict needs H and W divisible by 8, got " + std::to_string(img.height) + "x" +
                        std::to_string(img.width));
  }
  torch::NoGradGuard guard;
  const bool was_training = net->is_training();
  net->eval();
  auto logits = net->forward(to_tensor(img).unsqueeze(0));
  if (was_training) net->train();
  return to_label_map(logits.argmax(1).squeeze(0), net->arch().num_classes);
}

void save_parser_checkpoint(const std::filesystem::path& path, ParsingNetwork& net, const std::string& config_hash) {
  torch::serialize::OutputArchive a;
  a.write("meta.kind", c10::IValue(std::string("parser")));
  a.write("meta.num_classes", c10::IValue(static_cast<int64_t>(net->arch().num_classes)));
  a.write("meta.profile", c10::IValue(to_string(net->arch().profile)));
  a.write("meta.config_hash", c10::IValue(config_hash));
  torch::serialize::OutputArchive sub;
  net->save(sub);
  a.write("network", sub);
  a.save_to(path.string());
}

ParsingNetwork load_parser_checkpoint(const std::filesystem::path& path, std::string* config_hash) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("no parser checkpoint at " + path.string());
  torch::serialize::InputArchive a;
  a.load_from(path.string());
  c10::IValue kind, classes, profile, hash;
  if (!a.try_read("meta.kind", kind) || kind.toStringRef() != "parser" || !a.try_read("meta.num_classes", classes) ||
      !a.try_read("meta.profile", profile) || !a.try_read("meta.config_hash", hash)) {
    throw FormatError(path.string() + " is not a parser checkpoint");
  }
  ParserArch arch;
  arch.num_classes = static_cast<int>(classes.toInt());
  arch.profile = parse_profile(profile.toStringRef());
  ParsingNetwork net(arch);
  torch::serialize::InputArchive sub;
  if (!a.try_read("network", sub)) throw FormatError(path.string() + " has no network weights");
  net->load(sub);
  net->eval();
  if (config_hash) *config_hash = hash.toStringRef();
  return net;
}

void write_parse_log(const std::filesystem::path& path, const std::vector<ParseLogRow>& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iteration,lr,loss\n";
  out.precision(10);
  for (const auto& r : log) out << r.iteration << ',' << r.lr << ',' << r.loss << '\n';
}

std::string describe(const ParseTrainConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "base_lr=" << cfg.base_lr << " power=" << cfg.power << " max_iter=" << cfg.max_iter
     << " batch_size=" << cfg.batch_size << " crop_size=" << cfg.crop_size << " num_classes=" << cfg.num_classes
     << " seed=" << cfg.seed << " flip=" << cfg.flip << " random_scale=" << cfg.random_scale
     << " scale=" << cfg.scale_min << ".." << cfg.scale_max << " adam=" << cfg.adam << " momentum=" << cfg.momentum
     << " weight_decay=" << cfg.weight_decay << " profile=" << to_string(cfg.profile);
  return os.str();
}

}  // namespace cari
