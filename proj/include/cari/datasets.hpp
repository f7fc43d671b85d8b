#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cari/image.hpp"

namespace cari {

/// Layout of a dataset root:
///
///     images/<name>.png       RGB
///     labels/<name>.png       class indices, 8-bit gray (photo domain only)
///     landmarks/<name>.txt    17 lines of "x y", normalized to [0,1]
struct PhotoSample {
  std::string name;
  Image image;
  LabelMap labels;
  LandmarkSet landmarks{};
};

struct CaricatureSample {
  std::string name;
  Image image;
  LandmarkSet landmarks{};
};

/// Maps a dataset's native annotation onto the shared 17-point scheme.
using LandmarkConverter = std::function<LandmarkSet(const std::vector<Point2>& native)>;

struct LoadOptions {
  int num_classes = kDefaultNumClasses;
  /// When unset, landmark files must already hold exactly 17 points.
  LandmarkConverter converter;
};

/// Basenames of images/*.png, sorted.
std::vector<std::string> list_basenames(const std::filesystem::path& root);

std::vector<PhotoSample> load_photo_dataset(const std::filesystem::path& root, const LoadOptions& opts = {});
std::vector<CaricatureSample> load_caricature_dataset(const std::filesystem::path& root, const LoadOptions& opts = {});

std::vector<Point2> read_landmark_file(const std::filesystem::path& path);
void write_landmark_file(const std::filesystem::path& path, const LandmarkSet& lms);

/// Creates the layout directories as needed. Labels are written when present.
void write_sample(const std::filesystem::path& root, const std::string& name, const Image& image,
                  const LandmarkSet& landmarks, const LabelMap* labels);

}  // namespace cari
