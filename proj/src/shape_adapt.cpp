#include "cari/shape_adapt.hpp"

#include <fstream>
#include <random>

#include "cari/errors.hpp"
#include "cari/torch_bridge.hpp"
#include "cari/warp_autograd.hpp"

namespace cari {

namespace nn = torch::nn;

void validate(const ShapeTrainConfig& cfg) {
  if (!(cfg.lr > 0) || cfg.num_shapes < 1 || !(cfg.cycle_weight > 0) || !(cfg.clip > 0) || cfg.critic_steps < 1 ||
      cfg.iterations < 0 || cfg.batch_size < 1 || cfg.map_size < 8 || cfg.grid_rows < 2 || cfg.grid_cols < 2 ||
      !(cfg.bound > 0) || cfg.width < 1 || cfg.critic_width < 1) {
    throw ConfigError("invalid shape training configuration");
  }
}

ShapeGeneratorImpl::ShapeGeneratorImpl(int groups, const ShapeTrainConfig& cfg)
    : groups_(groups), conditions_(cfg.num_shapes), rows_(cfg.grid_rows), cols_(cfg.grid_cols), bound_(cfg.bound) {
  const int w = cfg.width;
  encoder_ = register_module(
      "encoder",
      nn::Sequential(nn::Conv2d(nn::Conv2dOptions(input_channels(), w, 4).stride(2).padding(1)),
                     nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
                     nn::Conv2d(nn::Conv2dOptions(w, 2 * w, 4).stride(2).padding(1)),
                     nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
                     nn::Conv2d(nn::Conv2dOptions(2 * w, 2 * w, 4).stride(2).padding(1)),
                     nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
                     nn::Conv2d(nn::Conv2dOptions(2 * w, 2 * w, 3).padding(1)),
                     nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2))));
  head_ = register_module("head", nn::Conv2d(nn::Conv2dOptions(2 * w, 2, 3).padding(1)));
  zero_head();
}

void ShapeGeneratorImpl::zero_head() {
  torch::NoGradGuard guard;
  head_->weight.zero_();
  head_->bias.zero_();
}

torch::Tensor ShapeGeneratorImpl::forward(const torch::Tensor& maps, const torch::Tensor& cond) {
  TORCH_CHECK(maps.size(1) == groups_, "generator expects ", groups_, " landmark channels");
  TORCH_CHECK(cond.dim() == 2 && cond.size(1) == conditions_, "generator expects a [N,", conditions_, "] condition");
  auto x = torch::cat({maps, broadcast_condition(cond.to(maps.scalar_type()), maps.size(2), maps.size(3))}, 1);
  x = encoder_->forward(x);
  x = torch::adaptive_avg_pool2d(x, {rows_, cols_});
  x = head_->forward(x).permute({0, 2, 3, 1});
  return torch::tanh(x) * bound_;
}

ShapeCriticImpl::ShapeCriticImpl(int groups, const ShapeTrainConfig& cfg) {
  const int w = cfg.critic_width;
  net_ = register_module(
      "net", nn::Sequential(nn::Conv2d(nn::Conv2dOptions(groups, w, 4).stride(2).padding(1)),
                            nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
                            nn::Conv2d(nn::Conv2dOptions(w, 2 * w, 4).stride(2).padding(1)),
                            nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
                            nn::Conv2d(nn::Conv2dOptions(2 * w, 4 * w, 4).stride(2).padding(1)),
                            nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2))));
  score_ = register_module("score", nn::Linear(4 * w, 1));
  clip_weights(cfg.clip);
}

torch::Tensor ShapeCriticImpl::forward(const torch::Tensor& maps) {
  auto x = torch::adaptive_avg_pool2d(net_->forward(maps), {1, 1}).flatten(1);
  return score_->forward(x).squeeze(1);
}

void ShapeCriticImpl::clip_weights(double c) {
  torch::NoGradGuard guard;
  for (auto& p : parameters()) p.clamp_(-c, c);
}

ShapeGenerator build_shape_generator(const ShapeTrainConfig& cfg, int groups) {
  validate(cfg);
  torch::manual_seed(cfg.seed);
  return ShapeGenerator(groups, cfg);
}

ShapeCritic build_shape_critic(const ShapeTrainConfig& cfg, int groups) {
  validate(cfg);
  torch::manual_seed(cfg.seed + 1);
  return ShapeCritic(groups, cfg);
}

torch::Tensor warp_maps(ShapeGenerator& gen, const torch::Tensor& maps, const torch::Tensor& cond) {
  auto grid = gen->forward(maps, cond);
  auto flow = control_to_flow(grid, static_cast<int>(maps.size(2)), static_cast<int>(maps.size(3)));
  return warp_bilinear(maps, flow);
}

torch::Tensor cycle_loss(ShapeGenerator& forward, ShapeGenerator& backward, const torch::Tensor& maps,
                         const torch::Tensor& cond) {
  auto there = warp_maps(forward, maps, cond);
  auto back = warp_maps(backward, there, cond);
  return torch::l1_loss(back, maps);
}

namespace {

torch::Tensor stack_maps(const std::vector<LandmarkMap>& maps, int size) {
  std::vector<torch::Tensor> ts;
  ts.reserve(maps.size());
  for (const auto& m : maps) {
    if (m.height != size || m.width != size) {
      throw ArgumentError("landmark maps must be " + std::to_string(size) + "x" + std::to_string(size));
    }
    ts.push_back(to_tensor(m));
  }
  return torch::stack(ts);
}

class BatchSampler {
 public:
  explicit BatchSampler(std::uint64_t seed) : rng_(seed) {}
  torch::Tensor indices(int64_t n, int batch) {
    std::uniform_int_distribution<int64_t> pick(0, n - 1);
    std::vector<int64_t> idx(batch);
    for (auto& i : idx) i = pick(rng_);
    return torch::tensor(idx, torch::kInt64);
  }
  torch::Tensor conditions(int k, int batch) {
    std::uniform_int_distribution<int> pick(0, k - 1);
    auto c = torch::zeros({batch, k});
    for (int b = 0; b < batch; ++b) c[b][pick(rng_)] = 1.0;
    return c;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

ShapeTrainResult train_shape_adaptation(const std::vector<LandmarkMap>& photo_maps,
                                        const std::vector<LandmarkMap>& cari_maps, const ShapeSet& shapes,
                                        const ShapeTrainConfig& cfg, const ShapeStepHook& hook) {
  validate(cfg);
  if (photo_maps.empty() || cari_maps.empty()) throw ArgumentError("shape adaptation needs photo and caricature maps");
  if (shapes.size() != cfg.num_shapes) {
    throw ArgumentError("shape set has " + std::to_string(shapes.size()) + " entries but K=" +
                        std::to_string(cfg.num_shapes));
  }
  const int groups = photo_maps.front().channels;
  for (const auto* set : {&photo_maps, &cari_maps}) {
    for (const auto& m : *set) {
      if (m.channels != groups) throw ArgumentError("landmark maps disagree on the channel count");
    }
  }
  const auto photos = stack_maps(photo_maps, cfg.map_size);
  const auto caris = stack_maps(cari_maps, cfg.map_size);

  ShapeTrainResult res;
  auto& m = res.models;
  torch::manual_seed(cfg.seed);
  m.photo_to_cari = ShapeGenerator(groups, cfg);
  m.cari_to_photo = ShapeGenerator(groups, cfg);
  m.cari_critic = ShapeCritic(groups, cfg);
  m.photo_critic = ShapeCritic(groups, cfg);

  auto adam = [&](std::vector<torch::Tensor> params) {
    return torch::optim::Adam(std::move(params), torch::optim::AdamOptions(cfg.lr).betas({0.5, 0.999}));
  };
  auto gen_params = m.photo_to_cari->parameters();
  for (auto& p : m.cari_to_photo->parameters()) gen_params.push_back(p);
  auto gen_opt = adam(gen_params);
  auto critic_c_opt = adam(m.cari_critic->parameters());
  auto critic_p_opt = adam(m.photo_critic->parameters());

  BatchSampler sampler(cfg.seed ^ 0x5ea9e5ULL);
  const int batch = cfg.batch_size;
  for (int it = 0; it < cfg.iterations; ++it) {
    ShapeLogRow row;
    row.iteration = it;
    for (int s = 0; s < cfg.critic_steps; ++s) {
      auto mp = photos.index_select(0, sampler.indices(photos.size(0), batch));
      auto mc = caris.index_select(0, sampler.indices(caris.size(0), batch));
      auto cp = sampler.conditions(cfg.num_shapes, batch);
      auto cc = sampler.conditions(cfg.num_shapes, batch);
      torch::Tensor fake_c, fake_p;
      {
        torch::NoGradGuard guard;
        fake_c = warp_maps(m.photo_to_cari, mp, cp);
        fake_p = warp_maps(m.cari_to_photo, mc, cc);
      }
      critic_c_opt.zero_grad();
      critic_p_opt.zero_grad();
      auto loss_c = m.cari_critic->forward(fake_c).mean() - m.cari_critic->forward(mc).mean();
      auto loss_p = m.photo_critic->forward(fake_p).mean() - m.photo_critic->forward(mp).mean();
      auto loss = loss_c + loss_p;
      loss.backward();
      critic_c_opt.step();
      critic_p_opt.step();
      m.cari_critic->clip_weights(cfg.clip);
      m.photo_critic->clip_weights(cfg.clip);
      row.critic_loss = loss.item<double>();
      if (hook) hook(m);
    }

    auto mp = photos.index_select(0, sampler.indices(photos.size(0), batch));
    auto mc = caris.index_select(0, sampler.indices(caris.size(0), batch));
    auto cp = sampler.conditions(cfg.num_shapes, batch);
    auto cc = sampler.conditions(cfg.num_shapes, batch);
    gen_opt.zero_grad();
    auto fake_c = warp_maps(m.photo_to_cari, mp, cp);
    auto rec_p = warp_maps(m.cari_to_photo, fake_c, cp);
    auto fake_p = warp_maps(m.cari_to_photo, mc, cc);
    auto rec_c = warp_maps(m.photo_to_cari, fake_p, cc);
    auto adv = -m.cari_critic->forward(fake_c).mean() - m.photo_critic->forward(fake_p).mean();
    auto cyc = torch::l1_loss(rec_p, mp) + torch::l1_loss(rec_c, mc);
    auto loss = adv + cfg.cycle_weight * cyc;
    loss.backward();
    gen_opt.step();
    row.generator_loss = loss.item<double>();
    row.cycle_loss = cyc.item<double>();
    res.log.push_back(row);
    if (hook) hook(m);
  }
  return res;
}

DenseFlow predict_flow(ShapeGenerator& gen, const LandmarkMap& map, const ShapeCondition& cond, int height,
                       int width) {
  if (cond.size() != gen->condition_channels()) {
    throw ArgumentError("condition has length " + std::to_string(cond.size()) + " but the generator was trained with K=" +
                        std::to_string(gen->condition_channels()));
  }
  if (map.channels != gen->groups()) throw ArgumentError("landmark map channel count does not match the generator");
  torch::NoGradGuard guard;
  auto grid = gen->forward(to_tensor(map).unsqueeze(0), cond.tensor())[0];
  // Clamp in double precision: a float offset at the bound can round past it.
  auto cg = to_control_grid(grid.to(torch::kFloat64).clamp(-gen->bound(), gen->bound()), gen->bound());
  return dense_flow_from_control(cg, height, width);
}

ShapeAdapted apply_shape_adaptation(ShapeGenerator& gen, const Image& img, const LabelMap& lbl,
                                    const LandmarkSet& lms, const ShapeCondition& cond,
                                    const LandmarkGrouping& grouping, int map_size) {
  if (img.height != lbl.height || img.width != lbl.width) throw ArgumentError("image and labels differ in size");
  const auto map = rasterize_landmark_map(lms, grouping, map_size, map_size);
  ShapeAdapted out;
  out.flow = predict_flow(gen, map, cond, img.height, img.width);
  out.image = sample_bilinear(img, out.flow);
  out.labels = sample_nearest(lbl, out.flow);
  return out;
}

namespace {

void write_config(torch::serialize::OutputArchive& a, const ShapeTrainConfig& c) {
  a.write("cfg.lr", c10::IValue(c.lr));
  a.write("cfg.num_shapes", c10::IValue(static_cast<int64_t>(c.num_shapes)));
  a.write("cfg.cycle_weight", c10::IValue(c.cycle_weight));
  a.write("cfg.clip", c10::IValue(c.clip));
  a.write("cfg.critic_steps", c10::IValue(static_cast<int64_t>(c.critic_steps)));
  a.write("cfg.iterations", c10::IValue(static_cast<int64_t>(c.iterations)));
  a.write("cfg.seed", c10::IValue(static_cast<int64_t>(c.seed)));
  a.write("cfg.batch_size", c10::IValue(static_cast<int64_t>(c.batch_size)));
  a.write("cfg.map_size", c10::IValue(static_cast<int64_t>(c.map_size)));
  a.write("cfg.grid_rows", c10::IValue(static_cast<int64_t>(c.grid_rows)));
  a.write("cfg.grid_cols", c10::IValue(static_cast<int64_t>(c.grid_cols)));
  a.write("cfg.bound", c10::IValue(c.bound));
  a.write("cfg.width", c10::IValue(static_cast<int64_t>(c.width)));
  a.write("cfg.critic_width", c10::IValue(static_cast<int64_t>(c.critic_width)));
}

c10::IValue read_value(torch::serialize::InputArchive& a, const std::string& key) {
  c10::IValue v;
  if (!a.try_read(key, v)) throw FormatError("checkpoint is missing '" + key + "'");
  return v;
}

int read_int(torch::serialize::InputArchive& a, const std::string& key) {
  return static_cast<int>(read_value(a, key).toInt());
}

ShapeTrainConfig read_config(torch::serialize::InputArchive& a) {
  ShapeTrainConfig c;
  c.lr = read_value(a, "cfg.lr").toDouble();
  c.num_shapes = read_int(a, "cfg.num_shapes");
  c.cycle_weight = read_value(a, "cfg.cycle_weight").toDouble();
  c.clip = read_value(a, "cfg.clip").toDouble();
  c.critic_steps = read_int(a, "cfg.critic_steps");
  c.iterations = read_int(a, "cfg.iterations");
  c.seed = static_cast<std::uint64_t>(read_value(a, "cfg.seed").toInt());
  c.batch_size = read_int(a, "cfg.batch_size");
  c.map_size = read_int(a, "cfg.map_size");
  c.grid_rows = read_int(a, "cfg.grid_rows");
  c.grid_cols = read_int(a, "cfg.grid_cols");
  c.bound = read_value(a, "cfg.bound").toDouble();
  c.width = read_int(a, "cfg.width");
  c.critic_width = read_int(a, "cfg.critic_width");
  return c;
}

template <typename ModuleHolder>
void save_sub(torch::serialize::OutputArchive& a, const std::string& key, const ModuleHolder& m) {
  torch::serialize::OutputArchive sub;
  m->save(sub);
  a.write(key, sub);
}

template <typename ModuleHolder>
void load_sub(torch::serialize::InputArchive& a, const std::string& key, ModuleHolder& m) {
  torch::serialize::InputArchive sub;
  if (!a.try_read(key, sub)) throw FormatError("checkpoint is missing module '" + key + "'");
  m->load(sub);
}

}  // namespace

void save_shape_checkpoint(const std::filesystem::path& path, const ShapeModels& models,
                           const ShapeCheckpointMeta& meta) {
  torch::serialize::OutputArchive a;
  a.write("meta.kind", c10::IValue(std::string("shape")));
  a.write("meta.groups", c10::IValue(static_cast<int64_t>(meta.groups)));
  a.write("meta.num_shapes", c10::IValue(static_cast<int64_t>(meta.num_shapes)));
  a.write("meta.grouping_hash", c10::IValue(meta.grouping_hash));
  write_config(a, meta.config);
  save_sub(a, "photo_to_cari", models.photo_to_cari);
  save_sub(a, "cari_to_photo", models.cari_to_photo);
  save_sub(a, "cari_critic", models.cari_critic);
  save_sub(a, "photo_critic", models.photo_critic);
  a.save_to(path.string());
}

ShapeModels load_shape_checkpoint(const std::filesystem::path& path, ShapeCheckpointMeta* meta_out) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("no shape checkpoint at " + path.string());
  torch::serialize::InputArchive a;
  a.load_from(path.string());
  if (read_value(a, "meta.kind").toStringRef() != "shape") throw FormatError(path.string() + " is not a shape checkpoint");
  ShapeCheckpointMeta meta;
  meta.groups = read_int(a, "meta.groups");
  meta.num_shapes = read_int(a, "meta.num_shapes");
  meta.grouping_hash = read_value(a, "meta.grouping_hash").toStringRef();
  meta.config = read_config(a);
  ShapeModels m;
  m.photo_to_cari = ShapeGenerator(meta.groups, meta.config);
  m.cari_to_photo = ShapeGenerator(meta.groups, meta.config);
  m.cari_critic = ShapeCritic(meta.groups, meta.config);
  m.photo_critic = ShapeCritic(meta.groups, meta.config);
  load_sub(a, "photo_to_cari", m.photo_to_cari);
  load_sub(a, "cari_to_photo", m.cari_to_photo);
  load_sub(a, "cari_critic", m.cari_critic);
  load_sub(a, "photo_critic", m.photo_critic);
  if (meta_out) *meta_out = meta;
  return m;
}

void write_shape_log(const std::filesystem::path& path, const std::vector<ShapeLogRow>& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iteration,critic_loss,generator_loss,cycle_loss\n";
  out.precision(10);
  for (const auto& r : log) {
    out << r.iteration << ',' << r.critic_loss << ',' << r.generator_loss << ',' << r.cycle_loss << '\n';
  }
}

}  // namespace cari
