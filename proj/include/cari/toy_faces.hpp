#pragma once

#include <cstdint>
#include <filesystem>

#include "cari/image.hpp"

namespace cari {

enum class ToyDomain { kPhoto, kCaricature };

/// Primitive layout of a procedural face, in normalized coordinates.
struct ToyFaceGeometry {
  Point2 face_center;
  double face_rx = 0, face_ry = 0;
  Point2 eye_center[2];  ///< image-left, image-right
  double eye_rx = 0, eye_ry = 0;
  Point2 brow_inner[2], brow_outer[2];
  double brow_half_thickness = 0;
  Point2 nose_center;
  double nose_rx = 0, nose_ry = 0;
  Point2 mouth_center;
  double mouth_half_width = 0;
  double upper_lip = 0, inner_mouth = 0, lower_lip = 0;
};

struct ToyFace {
  Image image;
  LabelMap labels;
  LandmarkSet landmarks{};
  ToyFaceGeometry geometry;
};

/// Landmarks at the primitives' keypoints, clamped to [0,1].
LandmarkSet toy_landmarks(const ToyFaceGeometry& g);

/// Photo-domain layout of face `index`; the caricature face with the same
/// (seed, index) exaggerates this template.
ToyFaceGeometry toy_template(std::uint64_t seed, int index);

/// Renders face `index`. Photos get skin-tone shading; caricatures get an
/// exaggerated layout, a flat caricature palette and dark outlines.
ToyFace render_toy_face(ToyDomain domain, std::uint64_t seed, int index, int size = 64);

struct ToyDatasetOptions {
  int count = 8;
  ToyDomain domain = ToyDomain::kPhoto;
  std::uint64_t seed = 0;
  int size = 64;
  /// Caricature roots omit labels unless this is set (annotated evaluation set).
  bool caricature_labels = false;
};

/// Writes `count` faces named toy_0000 ... under the dataset layout.
void generate_toy_face_dataset(const std::filesystem::path& root, const ToyDatasetOptions& opts);

ToyDomain parse_domain(const std::string& name);

}  // namespace cari
