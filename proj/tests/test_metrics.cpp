#include "testing.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "cari/errors.hpp"
#include "cari/metrics.hpp"

using namespace cari;

namespace {

LabelMap random_labels(std::mt19937& rng, int h, int w, int c) {
  std::uniform_int_distribution<int> d(0, c - 1);
  LabelMap m(h, w, c);
  for (auto& v : m.classes) v = static_cast<std::uint8_t>(d(rng));
  return m;
}

// IoU of class c over a list of images by explicit pixel sets.
std::optional<double> set_oracle(const std::vector<std::pair<LabelMap, LabelMap>>& pairs, int c) {
  std::set<std::pair<std::size_t, std::size_t>> pred, gt;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [p, g] = pairs[i];
    for (std::size_t k = 0; k < p.classes.size(); ++k) {
      if (p.classes[k] == c) pred.insert({i, k});
      if (g.classes[k] == c) gt.insert({i, k});
    }
  }
  std::size_t inter = 0;
  for (const auto& e : pred) inter += gt.count(e);
  std::set<std::pair<std::size_t, std::size_t>> uni = pred;
  uni.insert(gt.begin(), gt.end());
  if (uni.empty()) return std::nullopt;
  return static_cast<double>(inter) / static_cast<double>(uni.size());
}

}  // namespace

TEST_CASE("accumulate on identical maps is diagonal") {
  std::mt19937 rng(1);
  const auto m = random_labels(rng, 16, 16, 10);
  const auto cm = accumulate(ConfusionMatrix(10), m, m);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      if (i != j) CHECK(cm.at(i, j) == 0);
    }
  }
  CHECK(cm.total() == 256);
}

TEST_CASE("accumulate 2x2 enumeration") {
  LabelMap gt(2, 2, 10), pred(2, 2, 10);
  gt.classes = {1, 1, 0, 0};
  pred.classes = {1, 0, 0, 0};
  const auto cm = accumulate(ConfusionMatrix(10), pred, gt);
  CHECK(cm.at(1, 1) == 1);
  CHECK(cm.at(1, 0) == 1);
  CHECK(cm.at(0, 0) == 2);
  CHECK(cm.total() == 4);
}

TEST_CASE("accumulation order does not matter") {
  std::mt19937 rng(2);
  std::vector<std::pair<LabelMap, LabelMap>> pairs;
  for (int i = 0; i < 3; ++i) pairs.emplace_back(random_labels(rng, 16, 16, 10), random_labels(rng, 16, 16, 10));
  std::vector<int> order{0, 1, 2};
  ConfusionMatrix reference(10);
  for (int i : order) reference.accumulate(pairs[i].first, pairs[i].second);
  while (std::next_permutation(order.begin(), order.end())) {
    ConfusionMatrix cm(10);
    for (int i : order) cm.accumulate(pairs[i].first, pairs[i].second);
    CHECK(cm == reference);
  }
  ConfusionMatrix a(10), b(10);
  a.accumulate(pairs[0].first, pairs[0].second);
  b.accumulate(pairs[1].first, pairs[1].second);
  b.accumulate(pairs[2].first, pairs[2].second);
  a.merge(b);
  CHECK(a == reference);
  ConfusionMatrix zero(10);
  zero.merge(reference);
  CHECK(zero == reference);
}

TEST_CASE("accumulate rejects bad inputs") {
  LabelMap a(4, 4, 10), b(4, 5, 10);
  ConfusionMatrix cm(10);
  CHECK_THROWS_AS(cm.accumulate(a, b), ArgumentError);
  LabelMap c(4, 4, 10);
  c.classes[3] = 10;
  CHECK_THROWS_AS(cm.accumulate(a, c), ArgumentError);
  CHECK(cm.total() == 0);
}

TEST_CASE("iou_report on perfect prediction") {
  LabelMap m(4, 4, 10);
  for (int i = 0; i < 16; ++i) m.classes[i] = static_cast<std::uint8_t>(i % 10);
  const auto r = iou_report(accumulate(ConfusionMatrix(10), m, m));
  for (const auto& v : r.per_class) {
    REQUIRE(v.has_value());
    CHECK(*v == 1.0);
  }
  CHECK(r.miou == 1.0);
}

TEST_CASE("iou_report: disjoint masks give zero, absent classes are flagged") {
  LabelMap gt(2, 2, 10), pred(2, 2, 10);
  gt.classes = {1, 1, 0, 0};
  pred.classes = {0, 0, 1, 1};
  const auto r = iou_report(accumulate(ConfusionMatrix(10), pred, gt));
  REQUIRE(r.per_class[0].has_value());
  CHECK(*r.per_class[0] == 0.0);
  for (int k = 1; k < kNumEvalClasses; ++k) CHECK_FALSE(r.per_class[k].has_value());
  CHECK(r.present() == 1);
  CHECK(r.miou == 0.0);
}

TEST_CASE("iou_report on an empty matrix throws") {
  CHECK_THROWS_AS(iou_report(ConfusionMatrix(10)), EmptyEvaluationError);
}

TEST_CASE("dataset IoU matches the pixel-set oracle") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<LabelMap, LabelMap>> pairs;
    ConfusionMatrix cm(10);
    for (int i = 0; i < 4; ++i) {
      pairs.emplace_back(random_labels(rng, 16, 16, 10), random_labels(rng, 16, 16, 10));
      cm.accumulate(pairs.back().first, pairs.back().second);
    }
    const auto r = iou_report(cm);
    double sum = 0;
    int n = 0;
    for (int k = 0; k < kNumEvalClasses; ++k) {
      const auto o = set_oracle(pairs, k + 1);
      REQUIRE(o.has_value() == r.per_class[k].has_value());
      if (o) {
        CHECK(*r.per_class[k] == *o);
        sum += *o;
        ++n;
      }
    }
    CHECK(r.miou == sum / n);
  }
}

TEST_CASE("format_cell drops digits past the second decimal") {
  CHECK(format_cell(1.0) == "100.00");
  CHECK(format_cell(0.0) == "0.00");
  CHECK(format_cell(0.8901) == "89.01");
  CHECK(format_cell(0.733810) == "73.38");
  CHECK(format_cell(0.642378) == "64.23");
  CHECK(format_cell(0.123456) == "12.34");
}

TEST_CASE("render_table reproduces the published averages") {
  const std::array<double, 9> table1{89.01, 63.94, 64.42, 70.58, 72.98, 87.67, 64.33, 74.46, 73.04};
  const std::array<double, 9> table2{86.54, 54.93, 56.73, 63.67, 65.10, 82.07, 55.55, 58.63, 54.92};
  auto to_unit = [](const std::array<double, 9>& v) {
    std::array<double, 9> u{};
    for (int i = 0; i < 9; ++i) u[i] = v[i] / 100.0;
    return u;
  };
  const auto t = render_table({{"table1", report_from_values(to_unit(table1))},
                               {"table2", report_from_values(to_unit(table2))}});
  CHECK(t.csv.find("table1,89.01,63.94,64.42,70.58,72.98,87.67,64.33,74.46,73.04,73.38\n") != std::string::npos);
  CHECK(t.csv.find(",64.23\n") != std::string::npos);
  CHECK(t.markdown.find("| 73.38 |") != std::string::npos);
  CHECK(t.markdown.find("| 64.23 |") != std::string::npos);
}

TEST_CASE("render_table column layout") {
  std::array<double, 9> ones{};
  ones.fill(1.0);
  const auto t = render_table({{"all", report_from_values(ones)}});
  CHECK(t.csv ==
        "method,facial skin,eye-l,eye-r,brow-l,brow-r,nose,in mouth,upper lip,lower lip,avg\n"
        "all,100.00,100.00,100.00,100.00,100.00,100.00,100.00,100.00,100.00,100.00\n");
  CHECK(t.markdown.rfind("| method | facial skin | eye-l |", 0) == 0);
}

TEST_CASE("rendered avg agrees with the mean of rendered cells to one last-digit unit") {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::array<double, 9> v{};
    for (auto& x : v) x = u(rng);
    const auto r = report_from_values(v);
    double cell_mean = 0;
    for (const auto& x : r.per_class) cell_mean += std::stod(format_cell(*x));
    cell_mean /= 9;
    CHECK(std::abs(std::stod(format_cell(r.miou)) - cell_mean) <= 0.01 + 1e-9);
  }
}
