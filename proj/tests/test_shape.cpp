#include "testing.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "cari/errors.hpp"
#include "cari/landmark_map.hpp"
#include "cari/shape_adapt.hpp"
#include "cari/toy_faces.hpp"
#include "test_util.hpp"

using namespace cari;

namespace {

ShapeTrainConfig small_config(int k = 3) {
  ShapeTrainConfig cfg;
  cfg.num_shapes = k;
  cfg.iterations = 3;
  cfg.batch_size = 4;
  cfg.map_size = 32;
  cfg.width = 8;
  cfg.critic_width = 8;
  cfg.critic_steps = 2;
  cfg.seed = 5;
  return cfg;
}

std::vector<LandmarkMap> toy_maps(ToyDomain domain, int n, std::uint64_t seed, std::vector<ToyFace>* faces = nullptr) {
  const auto g = LandmarkGrouping::default_grouping();
  std::vector<LandmarkMap> maps;
  for (int i = 0; i < n; ++i) {
    auto f = render_toy_face(domain, seed, i);
    maps.push_back(rasterize_landmark_map(f.landmarks, g, 32, 32));
    if (faces) faces->push_back(std::move(f));
  }
  return maps;
}

ShapeSet toy_shapes(int k) {
  std::vector<LandmarkSet> sets;
  for (int i = 0; i < 2 * k; ++i) sets.push_back(render_toy_face(ToyDomain::kCaricature, 9, i).landmarks);
  return cluster_shapes(sets, k, 0);
}

bool same_parameters(const torch::nn::Module& a, const torch::nn::Module& b) {
  const auto pa = a.named_parameters(), pb = b.named_parameters();
  if (pa.size() != pb.size()) return false;
  for (const auto& item : pa) {
    if (!torch::equal(item.value(), pb[item.key()])) return false;
  }
  return true;
}

double flow_l2(const DenseFlow& a, const DenseFlow& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("fresh generator predicts the identity warp") {
  auto cfg = small_config(4);
  auto gen = build_shape_generator(cfg, 6);
  CHECK(gen->condition_channels() == 4);
  CHECK(gen->input_channels() == 10);
  torch::NoGradGuard guard;
  const auto maps = torch::rand({3, 6, 32, 32});
  const auto cond = torch::eye(4).slice(0, 0, 3);
  const auto offsets = gen->forward(maps, cond);
  CHECK(offsets.sizes() == torch::IntArrayRef({3, cfg.grid_rows, cfg.grid_cols, 2}));
  CHECK(offsets.abs().max().item<double>() < 1e-6);
}

TEST_CASE("generator and critic initialization is seeded") {
  auto cfg = small_config();
  CHECK(same_parameters(*build_shape_generator(cfg, 6), *build_shape_generator(cfg, 6)));
  CHECK(same_parameters(*build_shape_critic(cfg, 6), *build_shape_critic(cfg, 6)));
  auto other = cfg;
  other.seed = 6;
  CHECK_FALSE(same_parameters(*build_shape_critic(cfg, 6), *build_shape_critic(other, 6)));
}

TEST_CASE("offsets stay within the bound") {
  auto cfg = small_config();
  cfg.bound = 0.05;
  auto gen = build_shape_generator(cfg, 6);
  {
    torch::NoGradGuard guard;
    for (auto& p : gen->parameters()) p.normal_(0.0, 1.0);
  }
  const auto offsets = gen->forward(torch::rand({2, 6, 32, 32}), torch::eye(3).slice(0, 0, 2));
  CHECK(offsets.abs().max().item<double>() <= 0.05 + 1e-7);
}

TEST_CASE("critic weights are clipped after every step") {
  auto cfg = small_config();
  cfg.iterations = 4;
  const auto photos = toy_maps(ToyDomain::kPhoto, 6, 1);
  const auto caris = toy_maps(ToyDomain::kCaricature, 6, 2);
  int calls = 0;
  double worst = 0;
  train_shape_adaptation(photos, caris, toy_shapes(3), cfg, [&](const ShapeModels& m) {
    ++calls;
    for (const auto* critic : {&m.cari_critic, &m.photo_critic})
      for (const auto& p : (*critic)->parameters()) worst = std::max(worst, p.abs().max().item<double>());
  });
  CHECK(calls == cfg.iterations * (cfg.critic_steps + 1));
  CHECK(worst <= cfg.clip);
}

TEST_CASE("zero iterations return the initial generators") {
  auto cfg = small_config();
  cfg.iterations = 0;
  const auto res =
      train_shape_adaptation(toy_maps(ToyDomain::kPhoto, 4, 1), toy_maps(ToyDomain::kCaricature, 4, 2), toy_shapes(3), cfg);
  CHECK(res.log.empty());
  // Models are built in the order photo_to_cari, cari_to_photo after seeding.
  const int groups = LandmarkGrouping::default_grouping().size();
  torch::manual_seed(cfg.seed);
  ShapeGenerator a(groups, cfg), b(groups, cfg);
  CHECK(same_parameters(*res.models.photo_to_cari, *a));
  CHECK(same_parameters(*res.models.cari_to_photo, *b));
}

TEST_CASE("training is reproducible under a seed") {
  auto cfg = small_config();
  const auto photos = toy_maps(ToyDomain::kPhoto, 5, 1);
  const auto caris = toy_maps(ToyDomain::kCaricature, 5, 2);
  const auto shapes = toy_shapes(3);
  const auto a = train_shape_adaptation(photos, caris, shapes, cfg);
  const auto b = train_shape_adaptation(photos, caris, shapes, cfg);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].critic_loss == b.log[i].critic_loss);
    CHECK(a.log[i].generator_loss == b.log[i].generator_loss);
    CHECK(a.log[i].cycle_loss == b.log[i].cycle_loss);
  }
  CHECK(same_parameters(*a.models.photo_to_cari, *b.models.photo_to_cari));
}

TEST_CASE("training rejects empty inputs and a mismatched shape set") {
  auto cfg = small_config();
  const auto maps = toy_maps(ToyDomain::kPhoto, 3, 1);
  CHECK_THROWS_AS(train_shape_adaptation({}, maps, toy_shapes(3), cfg), ArgumentError);
  CHECK_THROWS_AS(train_shape_adaptation(maps, {}, toy_shapes(3), cfg), ArgumentError);
  CHECK_THROWS_AS(train_shape_adaptation(maps, maps, toy_shapes(2), cfg), ArgumentError);
}

TEST_CASE("cycle term is zero with zero heads") {
  auto cfg = small_config();
  auto f = build_shape_generator(cfg, 6);
  auto b = build_shape_generator(cfg, 6);
  {
    torch::NoGradGuard guard;
    for (auto& p : f->parameters()) p.normal_(0.0, 0.5);
    for (auto& p : b->parameters()) p.normal_(0.0, 0.5);
  }
  const auto maps = torch::rand({2, 6, 32, 32});
  const auto cond = torch::eye(3).slice(0, 0, 2);
  CHECK(cycle_loss(f, b, maps, cond).item<double>() > 0.0);
  f->zero_head();
  b->zero_head();
  CHECK(cycle_loss(f, b, maps, cond).item<double>() == 0.0);
}

TEST_CASE("untrained generator leaves the photo unchanged") {
  auto cfg = small_config();
  auto gen = build_shape_generator(cfg, LandmarkGrouping::default_grouping().size());
  const auto face = render_toy_face(ToyDomain::kPhoto, 4, 0);
  const auto out = apply_shape_adaptation(gen, face.image, face.labels, face.landmarks, ShapeCondition(1, 3),
                                          LandmarkGrouping::default_grouping(), cfg.map_size);
  for (std::size_t i = 0; i < out.image.pixels.size(); ++i)
    CHECK(std::abs(out.image.pixels[i] - face.image.pixels[i]) <= 1e-5);
  CHECK(out.labels == face.labels);
  CHECK_THROWS_AS(apply_shape_adaptation(gen, face.image, face.labels, face.landmarks, ShapeCondition(1, 4),
                                         LandmarkGrouping::default_grouping(), cfg.map_size),
                  ArgumentError);
}

TEST_CASE("warped labels never introduce a class") {
  auto cfg = small_config();
  const auto grouping = LandmarkGrouping::default_grouping();
  auto gen = build_shape_generator(cfg, grouping.size());
  {
    torch::NoGradGuard guard;
    for (auto& p : gen->parameters()) p.normal_(0.0, 0.3);
  }
  for (int i = 0; i < 4; ++i) {
    const auto face = render_toy_face(ToyDomain::kPhoto, 4, i);
    const auto out = apply_shape_adaptation(gen, face.image, face.labels, face.landmarks, ShapeCondition(i % 3, 3),
                                            grouping, cfg.map_size);
    const std::set<int> in(face.labels.classes.begin(), face.labels.classes.end());
    for (auto v : out.labels.classes) CHECK(in.count(v) == 1);
    // The image and the labels share the flow the generator predicts.
    const auto flow = predict_flow(gen, rasterize_landmark_map(face.landmarks, grouping, cfg.map_size, cfg.map_size),
                                   ShapeCondition(i % 3, 3), face.image.height, face.image.width);
    CHECK(flow_l2(flow, out.flow) == 0.0);
    CHECK(out.labels == sample_nearest(face.labels, out.flow));
    CHECK(out.image == sample_bilinear(face.image, out.flow));
  }
}

TEST_CASE("shape checkpoints round-trip") {
  test::TempDir dir("shape_ckpt");
  auto cfg = small_config();
  const auto res =
      train_shape_adaptation(toy_maps(ToyDomain::kPhoto, 4, 1), toy_maps(ToyDomain::kCaricature, 4, 2), toy_shapes(3), cfg);
  ShapeCheckpointMeta meta{LandmarkGrouping::default_grouping().size(), 3, LandmarkGrouping::default_grouping().hash(), cfg};
  save_shape_checkpoint(dir / "shape.pt", res.models, meta);
  ShapeCheckpointMeta back;
  const auto models = load_shape_checkpoint(dir / "shape.pt", &back);
  CHECK(back.groups == meta.groups);
  CHECK(back.num_shapes == 3);
  CHECK(back.grouping_hash == meta.grouping_hash);
  CHECK(back.config.critic_width == cfg.critic_width);
  CHECK(same_parameters(*models.photo_to_cari, *res.models.photo_to_cari));
  CHECK(same_parameters(*models.cari_critic, *res.models.cari_critic));
  write_shape_log(dir / "log.csv", res.log);
  std::ifstream in(dir / "log.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "iteration,critic_loss,generator_loss,cycle_loss");
}

TEST_CASE("invalid shape configs are rejected") {
  auto cfg = small_config();
  cfg.iterations = -1;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = small_config();
  cfg.clip = 0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
}
