#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cari/image.hpp"

namespace cari {

using FeatureVector = std::vector<double>;

struct KMeansOptions {
  int max_iterations = 100;
  double tolerance = 1e-6;  ///< stop once no center moves farther than this
};

struct KMeansResult {
  std::vector<FeatureVector> centers;
  std::vector<int> assignment;
  /// Sum of squared distances after each assignment step.
  std::vector<double> objective;
  int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding; deterministic for a given seed.
KMeansResult kmeans(std::span<const FeatureVector> points, int k, std::uint64_t seed, const KMeansOptions& opts = {});

enum class Linkage { kWard, kAverage, kComplete, kSingle };

Linkage parse_linkage(const std::string& name);

/// Bottom-up clustering cut at `m` clusters. Labels are numbered in order of
/// each cluster's first member.
std::vector<int> agglomerative_cluster(std::span<const FeatureVector> points, int m, Linkage linkage = Linkage::kWard);

/// Cluster centers of caricature landmark configurations.
struct ShapeSet {
  std::vector<LandmarkSet> centers;
  int size() const { return static_cast<int>(centers.size()); }
};

FeatureVector flatten(const LandmarkSet& lms);
LandmarkSet unflatten(const FeatureVector& v);

ShapeSet cluster_shapes(std::span<const LandmarkSet> sets, int k, std::uint64_t seed);
/// Index of the center closest (Euclidean, 34-dim) to `lms`.
int nearest_shape(const ShapeSet& shapes, const LandmarkSet& lms);

/// Per cluster, the member closest to the cluster mean. Returned in cluster
/// label order.
std::vector<int> select_style_references(std::span<const FeatureVector> features, int m,
                                         Linkage linkage = Linkage::kWard);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace cari
