#include "cari/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <limits>
#include <numeric>
#include <random>

#include "cari/errors.hpp"

namespace cari {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

namespace {

void check_points(std::span<const FeatureVector> points) {
  const auto dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw ArgumentError("feature vectors differ in length");
  }
}

std::vector<FeatureVector> kmeanspp_seed(std::span<const FeatureVector> points, int k, std::mt19937_64& rng) {
  const std::size_t n = points.size();
  std::vector<FeatureVector> centers;
  std::vector<bool> chosen(n, false);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t idx = first(rng);
  centers.push_back(points[idx]);
  chosen[idx] = true;

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], centers.back());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (static_cast<int>(centers.size()) < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      idx = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        acc += d2[i];
        idx = i;
        if (acc >= target) break;
      }
    } else {
      // Every remaining point coincides with a center.
      idx = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
    }
    centers.push_back(points[idx]);
    chosen[idx] = true;
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points[i], centers.back()));
  }
  return centers;
}

}  // namespace

KMeansResult kmeans(std::span<const FeatureVector> points, int k, std::uint64_t seed, const KMeansOptions& opts) {
  if (k < 1) throw ArgumentError("k must be at least 1");
  if (points.size() < static_cast<std::size_t>(k)) {
    throw ArgumentError("k-means needs at least k=" + std::to_string(k) + " points, got " + std::to_string(points.size()));
  }
  check_points(points);
  const std::size_t n = points.size();
  const std::size_t dim = points.front().size();

  std::mt19937_64 rng(seed);
  KMeansResult res;
  res.centers = kmeanspp_seed(points, k, rng);
  res.assignment.assign(n, 0);

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    double objective = 0.0;
    std::vector<double> best_d(n);
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int c = 0; c < k; ++c) {
        const double d = squared_distance(points[i], res.centers[c]);
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      res.assignment[i] = arg;
      best_d[i] = best;
      objective += best;
    }
    res.objective.push_back(objective);
    res.iterations = iter + 1;

    std::vector<FeatureVector> next(k, FeatureVector(dim, 0.0));
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& c = next[res.assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) c[d] += points[i][d];
      ++count[res.assignment[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (count[c] == 0) {
        // Re-seed an empty cluster with the point farthest from its center.
        const auto far = static_cast<std::size_t>(std::max_element(best_d.begin(), best_d.end()) - best_d.begin());
        next[c] = points[far];
        best_d[far] = 0.0;
      } else {
        for (auto& v : next[c]) v /= static_cast<double>(count[c]);
      }
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c) shift = std::max(shift, std::sqrt(squared_distance(next[c], res.centers[c])));
    res.centers = std::move(next);
    if (shift <= opts.tolerance) break;
  }
  // Final assignment against the converged centers.
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const double d = squared_distance(points[i], res.centers[c]);
      if (d < best) {
        best = d;
        res.assignment[i] = c;
      }
    }
  }
  return res;
}

Linkage parse_linkage(const std::string& name) {
  if (name == "ward") return Linkage::kWard;
  if (name == "average") return Linkage::kAverage;
  if (name == "complete") return Linkage::kComplete;
  if (name == "single") return Linkage::kSingle;
  throw ArgumentError("unknown linkage '" + name + "'");
}

namespace {

/// Condensed symmetric distance matrix.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(std::size_t n) : n_(n), d_(n * (n - 1) / 2, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    return d_[n_ * i - i * (i + 1) / 2 + (j - i - 1)];
  }

 private:
  std::size_t n_;
  std::vector<double> d_;
};

struct Merge {
  std::size_t a, b;
  double height;
};

// Lance-Williams update of d(k, i+j).
double lance_williams(Linkage l, double dki, double dkj, double dij, double ni, double nj, double nk) {
  switch (l) {
    case Linkage::kWard:
      return ((ni + nk) * dki + (nj + nk) * dkj - nk * dij) / (ni + nj + nk);
    case Linkage::kAverage:
      return (ni * dki + nj * dkj) / (ni + nj);
    case Linkage::kComplete:
      return std::max(dki, dkj);
    case Linkage::kSingle:
      return std::min(dki, dkj);
  }
  return 0.0;
}

// Nearest-neighbour chain; valid because every supported linkage is reducible.
std::vector<Merge> nn_chain(std::span<const FeatureVector> points, Linkage linkage) {
  const std::size_t n = points.size();
  DistanceMatrix dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d2 = squared_distance(points[i], points[j]);
      dist(i, j) = linkage == Linkage::kWard ? d2 : std::sqrt(d2);
    }
  }
  std::vector<double> size(n, 1.0);
  std::vector<bool> active(n, true);
  std::vector<Merge> merges;
  std::vector<std::size_t> chain;
  std::size_t remaining = n;

  while (remaining > 1) {
    if (chain.empty()) {
      chain.push_back(static_cast<std::size_t>(std::find(active.begin(), active.end(), true) - active.begin()));
    }
    while (true) {
      const std::size_t a = chain.back();
      const std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : n;
      std::size_t best = n;
      double best_d = std::numeric_limits<double>::infinity();
      if (prev != n) {
        best = prev;
        best_d = dist(a, prev);
      }
      for (std::size_t k = 0; k < n; ++k) {
        if (!active[k] || k == a) continue;
        const double d = dist(a, k);
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      if (best == prev) {
        chain.pop_back();
        chain.pop_back();
        const std::size_t i = std::min(a, prev);
        const std::size_t j = std::max(a, prev);
        merges.push_back({i, j, linkage == Linkage::kWard ? std::sqrt(best_d) : best_d});
        // Cluster i absorbs j.
        for (std::size_t k = 0; k < n; ++k) {
          if (!active[k] || k == i || k == j) continue;
          dist(k, i) = lance_williams(linkage, dist(k, i), dist(k, j), best_d, size[i], size[j], size[k]);
        }
        size[i] += size[j];
        active[j] = false;
        --remaining;
        break;
      }
      chain.push_back(best);
    }
  }
  return merges;
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) x = parent[x] = parent[parent[x]];
  return x;
}

}  // namespace

std::vector<int> agglomerative_cluster(std::span<const FeatureVector> points, int m, Linkage linkage) {
  if (m < 1) throw ArgumentError("cluster count must be at least 1");
  if (points.size() < static_cast<std::size_t>(m)) {
    throw ArgumentError("need at least " + std::to_string(m) + " items, got " + std::to_string(points.size()));
  }
  check_points(points);
  const std::size_t n = points.size();
  std::vector<Merge> merges;
  if (n > 1) merges = nn_chain(points, linkage);
  std::stable_sort(merges.begin(), merges.end(), [](const Merge& x, const Merge& y) { return x.height < y.height; });

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t step = 0; step + m < n; ++step) {
    const auto ra = find_root(parent, merges[step].a);
    const auto rb = find_root(parent, merges[step].b);
    parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<int> labels(n, -1);
  std::vector<int> root_label(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = find_root(parent, i);
    if (root_label[r] < 0) root_label[r] = next++;
    labels[i] = root_label[r];
  }
  return labels;
}

FeatureVector flatten(const LandmarkSet& lms) {
  FeatureVector v;
  v.reserve(2 * kNumLandmarks);
  for (const auto& p : lms) {
    v.push_back(p.x);
    v.push_back(p.y);
  }
  return v;
}

LandmarkSet unflatten(const FeatureVector& v) {
  if (v.size() != 2 * kNumLandmarks) throw ArgumentError("landmark vector must have 34 entries");
  LandmarkSet lms{};
  for (int i = 0; i < kNumLandmarks; ++i) lms[i] = {v[2 * i], v[2 * i + 1]};
  return lms;
}

ShapeSet cluster_shapes(std::span<const LandmarkSet> sets, int k, std::uint64_t seed) {
  if (k < 1 || sets.size() < static_cast<std::size_t>(k)) {
    throw ArgumentError("cluster_shapes needs 1 <= K <= number of landmark sets (K=" + std::to_string(k) +
                        ", sets=" + std::to_string(sets.size()) + ")");
  }
  std::vector<FeatureVector> pts;
  pts.reserve(sets.size());
  for (const auto& s : sets) pts.push_back(flatten(s));
  const auto res = kmeans(pts, k, seed);
  ShapeSet out;
  for (const auto& c : res.centers) out.centers.push_back(unflatten(c));
  return out;
}

int nearest_shape(const ShapeSet& shapes, const LandmarkSet& lms) {
  const auto v = flatten(lms);
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < shapes.size(); ++k) {
    const double d = squared_distance(v, flatten(shapes.centers[k]));
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

std::vector<int> select_style_references(std::span<const FeatureVector> features, int m, Linkage linkage) {
  const auto labels = agglomerative_cluster(features, m, linkage);
  const std::size_t dim = features.front().size();
  std::vector<FeatureVector> mean(m, FeatureVector(dim, 0.0));
  std::vector<double> count(m, 0.0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t d = 0; d < dim; ++d) mean[labels[i]][d] += features[i][d];
    count[labels[i]] += 1.0;
  }
  for (int c = 0; c < m; ++c) {
    for (auto& v : mean[c]) v /= count[c];
  }
  std::vector<int> refs(m, -1);
  std::vector<double> best(m, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < features.size(); ++i) {
    const int c = labels[i];
    const double d = squared_distance(features[i], mean[c]);
    if (d < best[c]) {
      best[c] = d;
      refs[c] = static_cast<int>(i);
    }
  }
  return refs;
}

}  // namespace cari
