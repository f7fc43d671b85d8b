#include "testing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "cari/clustering.hpp"
#include "cari/datasets.hpp"
#include "cari/errors.hpp"
#include "cari/grouping.hpp"
#include "cari/landmark_map.hpp"
#include "cari/perceptual.hpp"
#include "cari/png_io.hpp"
#include "cari/toy_faces.hpp"
#include "test_util.hpp"

using namespace cari;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool trees_equal(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::vector<std::filesystem::path> fa, fb;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a))
    if (e.is_regular_file()) fa.push_back(std::filesystem::relative(e.path(), a));
  for (const auto& e : std::filesystem::recursive_directory_iterator(b))
    if (e.is_regular_file()) fb.push_back(std::filesystem::relative(e.path(), b));
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb) return false;
  for (const auto& f : fa)
    if (slurp(a / f) != slurp(b / f)) return false;
  return true;
}

LandmarkSet filled(Point2 p) {
  LandmarkSet l;
  l.fill(p);
  return l;
}

// Even-odd crossing test with boundary counted as inside.
bool inside_or_on(const std::vector<std::pair<double, double>>& poly, double x, double y) {
  bool in = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto [xi, yi] = poly[i];
    const auto [xj, yj] = poly[j];
    const double cross = (xj - xi) * (y - yi) - (yj - yi) * (x - xi);
    if (std::abs(cross) < 1e-12 && x >= std::min(xi, xj) && x <= std::max(xi, xj) && y >= std::min(yi, yj) &&
        y <= std::max(yi, yj))
      return true;
    if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) in = !in;
  }
  return in;
}

Image constant_image(int h, int w, float v) { return Image(h, w, v); }

}  // namespace

TEST_CASE("toy photo dataset round-trips through the loader") {
  test::TempDir dir("toy_rt");
  generate_toy_face_dataset(dir.path(), {.count = 8, .domain = ToyDomain::kPhoto, .seed = 3});
  const auto photos = load_photo_dataset(dir.path());
  REQUIRE(photos.size() == 8);
  for (const auto& p : photos) {
    CHECK(p.labels.num_classes == 10);
    CHECK(p.labels.height == p.image.height);
    CHECK(p.labels.width == p.image.width);
    CHECK(std::all_of(p.labels.classes.begin(), p.labels.classes.end(), [](auto v) { return v < 10; }));
    for (const auto& l : p.landmarks) {
      CHECK(l.x >= 0.0);
      CHECK(l.x <= 1.0);
      CHECK(l.y >= 0.0);
      CHECK(l.y <= 1.0);
    }
    CHECK(std::all_of(p.image.pixels.begin(), p.image.pixels.end(), [](float v) { return v >= 0.0f && v <= 1.0f; }));
  }
}

TEST_CASE("toy caricature dataset loads without labels") {
  test::TempDir dir("toy_cari");
  generate_toy_face_dataset(dir.path(), {.count = 8, .domain = ToyDomain::kCaricature, .seed = 3});
  CHECK_FALSE(std::filesystem::exists(dir / "labels"));
  CHECK(load_caricature_dataset(dir.path()).size() == 8);
}

TEST_CASE("toy generation is deterministic under a seed") {
  test::TempDir a("toy_a"), b("toy_b"), c("toy_c");
  generate_toy_face_dataset(a.path(), {.count = 4, .domain = ToyDomain::kCaricature, .seed = 11});
  generate_toy_face_dataset(b.path(), {.count = 4, .domain = ToyDomain::kCaricature, .seed = 11});
  generate_toy_face_dataset(c.path(), {.count = 4, .domain = ToyDomain::kCaricature, .seed = 12});
  CHECK(trees_equal(a.path(), b.path()));
  CHECK_FALSE(trees_equal(a.path(), c.path()));
}

TEST_CASE("caricature landmarks are displaced from the photo template") {
  for (int i = 0; i < 8; ++i) {
    const auto cari = render_toy_face(ToyDomain::kCaricature, 5, i);
    const auto tmpl = toy_landmarks(toy_template(5, i));
    double disp = 0.0;
    for (int k = 0; k < kNumLandmarks; ++k)
      disp += std::hypot(cari.landmarks[k].x - tmpl[k].x, cari.landmarks[k].y - tmpl[k].y);
    CHECK(disp / kNumLandmarks > 0.0);
  }
  const auto photo = render_toy_face(ToyDomain::kPhoto, 5, 0);
  CHECK(photo.landmarks == toy_landmarks(toy_template(5, 0)));
}

TEST_CASE("photo loader names the basename lacking a label file") {
  test::TempDir dir("missing_label");
  generate_toy_face_dataset(dir.path(), {.count = 3, .domain = ToyDomain::kPhoto, .seed = 1});
  std::filesystem::remove(dir / "labels/toy_0001.png");
  try {
    load_photo_dataset(dir.path());
    FAIL("expected a load error");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("toy_0001") != std::string::npos);
  }
}

TEST_CASE("label values at or above the class count are a format error") {
  test::TempDir dir("bad_label");
  generate_toy_face_dataset(dir.path(), {.count = 2, .domain = ToyDomain::kPhoto, .seed = 1});
  auto lbl = read_label_png(dir / "labels/toy_0000.png");
  LabelMap wide(lbl.height, lbl.width, 32);
  wide.classes = lbl.classes;
  wide.at(0, 0) = 12;
  write_label_png(dir / "labels/toy_0000.png", wide);
  try {
    load_photo_dataset(dir.path());
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("toy_0000") != std::string::npos);
  }
}

TEST_CASE("landmark file with 16 rows is a format error") {
  test::TempDir dir("short_lms");
  generate_toy_face_dataset(dir.path(), {.count = 2, .domain = ToyDomain::kCaricature, .seed = 1});
  const auto path = dir / "landmarks/toy_0001.txt";
  auto pts = read_landmark_file(path);
  REQUIRE(pts.size() == 17);
  std::ofstream out(path);
  for (int i = 0; i < 16; ++i) out << pts[i].x << ' ' << pts[i].y << '\n';
  out.close();
  CHECK_THROWS_AS(load_caricature_dataset(dir.path()), FormatError);
}

TEST_CASE("landmark converter maps native annotations") {
  test::TempDir dir("converter");
  generate_toy_face_dataset(dir.path(), {.count = 1, .domain = ToyDomain::kCaricature, .seed = 1});
  {
    std::ofstream out(dir / "landmarks/toy_0000.txt");
    for (int i = 0; i < 20; ++i) out << 0.5 << ' ' << 0.25 << '\n';
  }
  CHECK_THROWS_AS(load_caricature_dataset(dir.path()), FormatError);
  LoadOptions opts;
  opts.converter = [](const std::vector<Point2>& native) {
    LandmarkSet l;
    std::copy_n(native.begin(), kNumLandmarks, l.begin());
    return l;
  };
  const auto caris = load_caricature_dataset(dir.path(), opts);
  REQUIRE(caris.size() == 1);
  CHECK((caris[0].landmarks[16] == Point2{0.5, 0.25}));
}

TEST_CASE("images below the minimum side are rejected at load") {
  test::TempDir dir("tiny");
  Image img(16, 16, 0.5f);
  write_sample(dir.path(), "small", img, filled({0.5, 0.5}), nullptr);
  CHECK_THROWS_AS(load_caricature_dataset(dir.path()), LoadError);
}

TEST_CASE("bresenham matches brute-force enumeration") {
  // Brute force: for the major axis, each step picks the pixel nearest the ideal line.
  std::mt19937 rng(4);
  std::uniform_int_distribution<int> d(0, 20);
  for (int t = 0; t < 200; ++t) {
    const PixelPoint a{d(rng), d(rng)}, b{d(rng), d(rng)};
    const auto line = bresenham(a, b);
    const int dx = b.x - a.x, dy = b.y - a.y;
    const int n = std::max(std::abs(dx), std::abs(dy));
    REQUIRE(static_cast<int>(line.size()) == n + 1);
    CHECK(line.front() == a);
    CHECK(line.back() == b);
    for (int i = 0; i <= n; ++i) {
      const double t01 = n == 0 ? 0.0 : static_cast<double>(i) / n;
      const double ex = a.x + t01 * dx, ey = a.y + t01 * dy;
      CHECK(std::abs(line[i].x - ex) <= 0.5 + 1e-9);
      CHECK(std::abs(line[i].y - ey) <= 0.5 + 1e-9);
    }
  }
}

TEST_CASE("polyline of two points rasterizes the horizontal segment") {
  LandmarkSet l = filled({0.5, 0.5});
  l[0] = {0.25, 0.5};
  l[1] = {0.75, 0.5};
  const LandmarkGrouping g({{"seg", {0, 1}, GroupKind::kPolyline}});
  const auto m = rasterize_landmark_map(l, g, 8, 8);
  REQUIRE(m.channels == 1);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) CHECK(m.at(0, y, x) == ((y == 4 && x >= 2 && x <= 6) ? 1 : 0));
}

TEST_CASE("single-point group sets exactly one pixel") {
  LandmarkSet l = filled({0.3125, 0.625});
  const LandmarkGrouping g({{"dot", {5}, GroupKind::kPolyline}, {"blob", {5}, GroupKind::kClosedRegion}});
  const auto m = rasterize_landmark_map(l, g, 40, 40);
  for (int c = 0; c < 2; ++c) {
    int count = 0;
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x) count += m.at(c, y, x);
    CHECK(count == 1);
    CHECK(m.at(c, 25, 12) == 1);
  }
}

TEST_CASE("closed square fills an axis-aligned block") {
  LandmarkSet l = filled({0.5, 0.5});
  l[0] = {0.25, 0.25};
  l[1] = {0.75, 0.25};
  l[2] = {0.75, 0.75};
  l[3] = {0.25, 0.75};
  const LandmarkGrouping g({{"sq", {0, 1, 2, 3}, GroupKind::kClosedRegion}});
  const auto m = rasterize_landmark_map(l, g, 16, 16);
  const std::vector<std::pair<double, double>> poly{{4, 4}, {12, 4}, {12, 12}, {4, 12}};
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) CHECK(m.at(0, y, x) == (inside_or_on(poly, x, y) ? 1 : 0));
}

TEST_CASE("closed regions agree with a point-in-polygon scan on convex shapes") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(0.15, 0.85);
  for (int t = 0; t < 20; ++t) {
    const double cx = u(rng), cy = u(rng);
    const double r = 0.1 + 0.05 * (t % 3);
    LandmarkSet l = filled({cx, cy});
    std::vector<std::pair<double, double>> poly;
    for (int k = 0; k < 6; ++k) {
      const double a = k * 2.0 * M_PI / 6.0 + 0.1 * t;
      l[k] = {std::clamp(cx + r * std::cos(a), 0.0, 1.0), std::clamp(cy + r * std::sin(a), 0.0, 1.0)};
      const auto px = to_pixel(l[k], 48, 48);
      poly.emplace_back(px.x, px.y);
    }
    const LandmarkGrouping g({{"hex", {0, 1, 2, 3, 4, 5}, GroupKind::kClosedRegion}});
    const auto m = rasterize_landmark_map(l, g, 48, 48);
    // Interior pixels away from the edges must agree; the boundary is drawn by Bresenham.
    for (int y = 0; y < 48; ++y) {
      for (int x = 0; x < 48; ++x) {
        if (inside_or_on(poly, x, y)) {
          CHECK(m.at(0, y, x) == 1);
        } else {
          bool near = false;
          for (int oy = -1; oy <= 1 && !near; ++oy)
            for (int ox = -1; ox <= 1 && !near; ++ox) near = inside_or_on(poly, x + ox, y + oy);
          if (!near) CHECK(m.at(0, y, x) == 0);
        }
      }
    }
  }
}

TEST_CASE("rasterization is binary and deterministic on toy faces") {
  const auto g = LandmarkGrouping::default_grouping();
  for (int i = 0; i < 4; ++i) {
    const auto face = render_toy_face(ToyDomain::kCaricature, 2, i);
    const auto a = rasterize_landmark_map(face.landmarks, g, 64, 64);
    const auto b = rasterize_landmark_map(face.landmarks, g, 64, 64);
    CHECK(a == b);
    CHECK(a.channels == g.size());
    CHECK(std::all_of(a.data.begin(), a.data.end(), [](auto v) { return v <= 1; }));
  }
}

TEST_CASE("grouping text round-trips and validates") {
  const auto g = LandmarkGrouping::default_grouping();
  CHECK(LandmarkGrouping::parse(g.to_text()) == g);
  CHECK(g.hash().size() == 64);
  CHECK(LandmarkGrouping::parse("# comment\nmouth closed-region 1 2 3\n").groups()[0].kind == GroupKind::kClosedRegion);
  CHECK_THROWS_AS(LandmarkGrouping::parse("a polyline 1 17\n"), Error);
  CHECK_THROWS_AS(LandmarkGrouping::parse("a polyline 1\na polyline 2\n"), Error);
  CHECK_THROWS_AS(LandmarkGrouping::parse("a spiral 1 2\n"), FormatError);
  CHECK_THROWS_AS(LandmarkGrouping::parse("# nothing\n"), Error);
}

TEST_CASE("shipped grouping file equals the built-in default") {
  const auto path = std::filesystem::path(CARI_SOURCE_DIR) / "config/landmark_grouping.txt";
  CHECK(LandmarkGrouping::load(path) == LandmarkGrouping::default_grouping());
}

TEST_CASE("cluster_shapes with K=1 returns the coordinate mean") {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<LandmarkSet> sets(7);
  for (auto& s : sets)
    for (auto& p : s) p = {u(rng), u(rng)};
  const auto shapes = cluster_shapes(sets, 1, 0);
  REQUIRE(shapes.size() == 1);
  for (int k = 0; k < kNumLandmarks; ++k) {
    double mx = 0, my = 0;
    for (const auto& s : sets) {
      mx += s[k].x;
      my += s[k].y;
    }
    CHECK(shapes.centers[0][k].x == doctest::Approx(mx / 7).epsilon(1e-12));
    CHECK(shapes.centers[0][k].y == doctest::Approx(my / 7).epsilon(1e-12));
  }
}

TEST_CASE("cluster_shapes on two separated clusters matches the best 2-partition") {
  std::mt19937 rng(21);
  std::normal_distribution<double> n(0.0, 0.01);
  std::vector<LandmarkSet> sets;
  for (int i = 0; i < 11; ++i) {
    const double base = i < 5 ? 0.25 : 0.75;
    LandmarkSet s;
    for (auto& p : s) p = {std::clamp(base + n(rng), 0.0, 1.0), std::clamp(base + n(rng), 0.0, 1.0)};
    sets.push_back(s);
  }
  // Exhaustive oracle over all 2-partitions.
  std::vector<FeatureVector> flat;
  for (const auto& s : sets) flat.push_back(flatten(s));
  double best = std::numeric_limits<double>::infinity();
  std::vector<FeatureVector> best_means;
  const int n_pts = static_cast<int>(flat.size());
  for (int mask = 1; mask < (1 << n_pts) - 1; ++mask) {
    std::vector<FeatureVector> means(2, FeatureVector(34, 0.0));
    int counts[2] = {0, 0};
    for (int i = 0; i < n_pts; ++i) {
      const int c = (mask >> i) & 1;
      ++counts[c];
      for (int d = 0; d < 34; ++d) means[c][d] += flat[i][d];
    }
    for (int c = 0; c < 2; ++c)
      for (auto& v : means[c]) v /= counts[c];
    double cost = 0;
    for (int i = 0; i < n_pts; ++i) cost += squared_distance(flat[i], means[(mask >> i) & 1]);
    if (cost < best) {
      best = cost;
      best_means = means;
    }
  }
  const auto shapes = cluster_shapes(sets, 2, 3);
  REQUIRE(shapes.size() == 2);
  std::vector<FeatureVector> got{flatten(shapes.centers[0]), flatten(shapes.centers[1])};
  if (squared_distance(got[0], best_means[0]) > squared_distance(got[0], best_means[1])) std::swap(got[0], got[1]);
  for (int c = 0; c < 2; ++c)
    for (int d = 0; d < 34; ++d) CHECK(std::abs(got[c][d] - best_means[c][d]) <= 1e-6);
}

TEST_CASE("cluster_shapes with K equal to the count returns the inputs") {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<LandmarkSet> sets(5);
  for (auto& s : sets)
    for (auto& p : s) p = {u(rng), u(rng)};
  const auto shapes = cluster_shapes(sets, 5, 1);
  REQUIRE(shapes.size() == 5);
  std::vector<bool> used(5, false);
  for (const auto& c : shapes.centers) {
    auto it = std::find(sets.begin(), sets.end(), c);
    REQUIRE(it != sets.end());
    const auto idx = static_cast<std::size_t>(it - sets.begin());
    CHECK_FALSE(used[idx]);
    used[idx] = true;
  }
  CHECK_THROWS_AS(cluster_shapes(sets, 6, 1), ArgumentError);
}

TEST_CASE("k-means objective never increases and seeds reproduce") {
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<FeatureVector> pts(60, FeatureVector(4));
  for (auto& p : pts)
    for (auto& v : p) v = u(rng);
  for (int seed = 0; seed < 5; ++seed) {
    const auto r = kmeans(pts, 5, seed);
    for (std::size_t i = 1; i < r.objective.size(); ++i) CHECK(r.objective[i] <= r.objective[i - 1] + 1e-12);
    const auto again = kmeans(pts, 5, seed);
    CHECK(again.centers == r.centers);
    CHECK(again.assignment == r.assignment);
  }
}

TEST_CASE("style features under the identity extractor") {
  const IdentityExtractor ex;
  const auto f = extract_style_feature(constant_image(32, 32, 0.5f), ex);
  REQUIRE(f.size() == 6);
  for (int i = 0; i < 3; ++i) {
    CHECK(f[i] == doctest::Approx(0.5));
    CHECK(f[3 + i] == doctest::Approx(0.0));
  }
  const auto map = torch::tensor({0.0, 1.0, 0.0, 1.0}, torch::kFloat64).reshape({1, 1, 2, 2});
  const auto stats = channel_statistics(map);
  CHECK(stats[0][0].item<double>() == doctest::Approx(0.5));
  CHECK(stats[0][1].item<double>() == doctest::Approx(0.5));
}

TEST_CASE("style features are deterministic with non-negative deviations") {
  const ConvStackExtractor ex;
  const auto face = render_toy_face(ToyDomain::kCaricature, 1, 0);
  const auto a = extract_style_feature(face.image, ex);
  const auto b = extract_style_feature(face.image, ex);
  CHECK(a == b);
  REQUIRE(static_cast<int>(a.size()) == style_feature_length(ex));
  std::size_t offset = 0;
  for (const auto& layer : ex.style_layers()) {
    for (int c = 0; c < layer.channels; ++c) CHECK(a[offset + layer.channels + c] >= 0.0);
    offset += 2 * layer.channels;
  }
  CHECK(offset == a.size());
}

TEST_CASE("cluster_styles picks references by cluster") {
  const IdentityExtractor ex;
  std::vector<Image> imgs;
  for (float v : {0.05f, 0.1f, 0.12f, 0.08f, 0.9f, 0.95f, 0.85f}) imgs.push_back(constant_image(32, 32, v));

  SUBCASE("M=1 picks the image nearest the global mean") {
    const auto refs = cluster_styles(imgs, ex, 1);
    REQUIRE(refs.size() == 1);
    std::vector<FeatureVector> f;
    for (const auto& im : imgs) f.push_back(extract_style_feature(im, ex));
    FeatureVector mean(f[0].size(), 0.0);
    for (const auto& v : f)
      for (std::size_t d = 0; d < v.size(); ++d) mean[d] += v[d] / f.size();
    std::size_t best = 0;
    for (std::size_t i = 1; i < f.size(); ++i)
      if (squared_distance(f[i], mean) < squared_distance(f[best], mean)) best = i;
    CHECK(refs.indices[0] == static_cast<int>(best));
    CHECK(refs.images[0] == imgs[best]);
  }
  SUBCASE("dark and bright groups give one reference each") {
    const auto refs = cluster_styles(imgs, ex, 2);
    REQUIRE(refs.size() == 2);
    std::set<bool> bright;
    for (int i : refs.indices) bright.insert(i >= 4);
    CHECK(bright.size() == 2);
    // Brute force: each reference is the member nearest its group's mean.
    for (int i : refs.indices) {
      const int lo = i >= 4 ? 4 : 0, hi = i >= 4 ? 7 : 4;
      double mean = 0;
      for (int j = lo; j < hi; ++j) mean += imgs[j].pixels[0] / (hi - lo);
      for (int j = lo; j < hi; ++j) CHECK(std::abs(imgs[i].pixels[0] - mean) <= std::abs(imgs[j].pixels[0] - mean));
    }
  }
  SUBCASE("M equal to the count makes every image a reference") {
    const auto refs = cluster_styles(imgs, ex, static_cast<int>(imgs.size()));
    std::vector<int> idx = refs.indices;
    std::sort(idx.begin(), idx.end());
    std::vector<int> all(imgs.size());
    std::iota(all.begin(), all.end(), 0);
    CHECK(idx == all);
  }
  SUBCASE("more references than images is an argument error") {
    CHECK_THROWS_AS(cluster_styles(imgs, ex, 8), ArgumentError);
  }
}
