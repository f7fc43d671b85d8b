#include "testing.hpp"

#include <array>
#include <fstream>

#include "cari/errors.hpp"
#include "cari/parsing.hpp"
#include "cari/toy_faces.hpp"
#include "test_util.hpp"

using namespace cari;

namespace {

ParseTrainConfig small_config() {
  ParseTrainConfig cfg;
  cfg.max_iter = 4;
  cfg.batch_size = 2;
  cfg.crop_size = 32;
  cfg.seed = 2;
  return cfg;
}

std::vector<ParsePair> toy_pairs(int n, int size = 32) {
  std::vector<ParsePair> pairs;
  for (int i = 0; i < n; ++i) {
    auto f = render_toy_face(ToyDomain::kPhoto, 6, i, size);
    pairs.push_back({"toy_" + std::to_string(i), f.image, f.labels});
  }
  return pairs;
}

bool same_parameters(const torch::nn::Module& a, const torch::nn::Module& b) {
  const auto pa = a.named_parameters(), pb = b.named_parameters();
  if (pa.size() != pb.size()) return false;
  for (const auto& item : pa)
    if (!torch::equal(item.value(), pb[item.key()])) return false;
  return true;
}

std::array<int, 10> histogram(const LabelMap& m) {
  std::array<int, 10> h{};
  for (auto v : m.classes) ++h[v];
  return h;
}

}  // namespace

TEST_CASE("backbone keeps the stride-8 contract") {
  auto net = build_parsing_network(10, ParserProfile::kNarrow, 0);
  net->eval();
  torch::NoGradGuard guard;
  for (int size : {32, 64, 96, 128}) {
    const auto x = torch::rand({1, 3, size, size});
    const auto feat = net->backbone(x);
    CHECK(feat.size(1) == net->backbone_channels());
    CHECK(feat.size(2) == size / 8);
    CHECK(feat.size(3) == size / 8);
    const auto logits = net->forward(x);
    CHECK(logits.sizes() == torch::IntArrayRef({1, 10, size, size}));
    const auto probs = torch::softmax(logits, 1).sum(1);
    CHECK((probs - 1).abs().max().item<double>() <= 1e-5);
  }
}

TEST_CASE("full profile is wider than narrow") {
  auto narrow = build_parsing_network(10, ParserProfile::kNarrow, 0);
  auto full = build_parsing_network(10, ParserProfile::kFull, 0);
  CHECK(full->backbone_channels() == 512);
  CHECK(narrow->backbone_channels() < full->backbone_channels());
  torch::NoGradGuard guard;
  full->eval();
  CHECK(full->backbone(torch::rand({1, 3, 32, 32})).size(2) == 4);
}

TEST_CASE("parser construction is seeded") {
  CHECK(same_parameters(*build_parsing_network(10, ParserProfile::kNarrow, 4),
                        *build_parsing_network(10, ParserProfile::kNarrow, 4)));
  CHECK_FALSE(same_parameters(*build_parsing_network(10, ParserProfile::kNarrow, 4),
                              *build_parsing_network(10, ParserProfile::kNarrow, 5)));
  CHECK(build_parsing_network(5, ParserProfile::kNarrow, 0)->forward(torch::rand({1, 3, 32, 32})).size(1) == 5);
}

TEST_CASE("poly learning rate examples") {
  ParseTrainConfig cfg;
  cfg.max_iter = 1000;
  CHECK(poly_lr(0, cfg) == 0.001);
  CHECK(poly_lr(1000, cfg) == 0.0);
  CHECK(std::abs(poly_lr(500, cfg) - 5.3589e-4) <= 1e-8);
  CHECK(poly_lr(500, cfg) == 0.001 * std::pow(0.5, 0.9));
  CHECK_THROWS_AS(poly_lr(1001, cfg), ArgumentError);
  CHECK_THROWS_AS(poly_lr(-1, cfg), ArgumentError);
  double prev = poly_lr(0, cfg);
  for (int i = 1; i <= cfg.max_iter; ++i) {
    const double lr = poly_lr(i, cfg);
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("flip swaps left and right classes") {
  const auto face = render_toy_face(ToyDomain::kPhoto, 1, 0);
  const auto flipped = flip_labels(face.labels);
  const auto before = histogram(face.labels), after = histogram(flipped);
  CHECK(after[kEyeL] == before[kEyeR]);
  CHECK(after[kEyeR] == before[kEyeL]);
  CHECK(after[kBrowL] == before[kBrowR]);
  CHECK(after[kBrowR] == before[kBrowL]);
  for (int c : {kBackground, kSkin, kNose, kInnerMouth, kUpperLip, kLowerLip}) CHECK(after[c] == before[c]);
  CHECK(flip_labels(flipped) == face.labels);
  CHECK(flip_image(flip_image(face.image)) == face.image);
  const int w = face.labels.width;
  for (int y = 0; y < face.labels.height; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto c = face.labels.at(y, x);
      if (c == kSkin) CHECK(flipped.at(y, w - 1 - x) == kSkin);
      if (c == kEyeL) CHECK(flipped.at(y, w - 1 - x) == kEyeR);
    }
  }
}

TEST_CASE("logged learning rates follow the schedule exactly") {
  auto cfg = small_config();
  cfg.max_iter = 6;
  const auto res = train_parser(toy_pairs(3), cfg);
  REQUIRE(res.log.size() == 6);
  for (const auto& row : res.log) {
    CHECK(row.lr == poly_lr(row.iteration, cfg));
    CHECK(std::isfinite(row.loss));
  }
}

TEST_CASE("parser training is reproducible") {
  auto cfg = small_config();
  cfg.random_scale = true;
  const auto a = train_parser(toy_pairs(3), cfg);
  const auto b = train_parser(toy_pairs(3), cfg);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].loss == b.log[i].loss);
  CHECK(same_parameters(*a.network, *b.network));
}

TEST_CASE("zero iterations leave the network untouched") {
  auto cfg = small_config();
  cfg.max_iter = 0;
  const auto res = train_parser(toy_pairs(2), cfg);
  CHECK(res.log.empty());
  CHECK(same_parameters(*res.network, *build_parsing_network(cfg.num_classes, cfg.profile, cfg.seed)));
}

TEST_CASE("label overflow names the sample") {
  auto pairs = toy_pairs(3);
  pairs[1].labels.num_classes = 32;
  pairs[1].labels.at(3, 3) = 15;
  try {
    train_parser(pairs, small_config());
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("toy_1") != std::string::npos);
  }
  CHECK_THROWS_AS(train_parser({}, small_config()), ArgumentError);
}

TEST_CASE("predict checks sizes and is deterministic") {
  auto net = build_parsing_network(10, ParserProfile::kNarrow, 0);
  const auto face = render_toy_face(ToyDomain::kPhoto, 1, 0, 64);
  const auto a = predict(net, face.image);
  CHECK(a.height == 64);
  CHECK(a.width == 64);
  CHECK(std::all_of(a.classes.begin(), a.classes.end(), [](auto v) { return v < 10; }));
  CHECK(a == predict(net, face.image));
  CHECK_THROWS_AS(predict(net, Image(36, 40)), ArgumentError);
}

TEST_CASE("parser checkpoints round-trip") {
  test::TempDir dir("parser_ckpt");
  auto cfg = small_config();
  auto res = train_parser(toy_pairs(2), cfg);
  save_parser_checkpoint(dir / "p.pt", res.network, "abc123");
  std::string hash;
  auto back = load_parser_checkpoint(dir / "p.pt", &hash);
  CHECK(hash == "abc123");
  CHECK(same_parameters(*back, *res.network));
  const auto img = render_toy_face(ToyDomain::kCaricature, 1, 0, 32).image;
  CHECK(predict(back, img) == predict(res.network, img));
  write_parse_log(dir / "log.csv", res.log);
  std::ifstream in(dir / "log.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "iteration,lr,loss");
}

TEST_CASE("profile names parse") {
  CHECK(parse_profile("narrow") == ParserProfile::kNarrow);
  CHECK(parse_profile("full") == ParserProfile::kFull);
  CHECK(to_string(ParserProfile::kFull) == "full");
  CHECK_THROWS_AS(parse_profile("huge"), Error);
}
