#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cari {

inline constexpr int kNumLandmarks = 17;
inline constexpr int kDefaultNumClasses = 10;
inline constexpr int kNumEvalClasses = 9;
/// Smallest side the stride-8 parser accepts.
inline constexpr int kMinImageSide = 32;

/// Class indices of the face-parsing label space. Index 0 is background.
enum FaceClass : std::uint8_t {
  kBackground = 0,
  kSkin = 1,
  kEyeL = 2,
  kEyeR = 3,
  kBrowL = 4,
  kBrowR = 5,
  kNose = 6,
  kInnerMouth = 7,
  kUpperLip = 8,
  kLowerLip = 9,
};

/// Column names of the evaluation classes 1..9, in report order.
std::span<const std::string_view> eval_class_names();

/// RGB raster with values in [0,1], stored planar (channel-major).
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, float fill = 0.0f);

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  float& at(int c, int y, int x) { return pixels[c * plane_size() + static_cast<std::size_t>(y) * width + x]; }
  float at(int c, int y, int x) const { return pixels[c * plane_size() + static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const Image&) const = default;
};

/// Per-pixel class indices.
struct LabelMap {
  int height = 0;
  int width = 0;
  int num_classes = kDefaultNumClasses;
  std::vector<std::uint8_t> classes;

  LabelMap() = default;
  LabelMap(int h, int w, int c = kDefaultNumClasses, std::uint8_t fill = 0);

  std::uint8_t& at(int y, int x) { return classes[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return classes[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const LabelMap&) const = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

/// 17 landmarks in normalized image coordinates ([0,1] on both axes).
using LandmarkSet = std::array<Point2, kNumLandmarks>;

/// Throws ArgumentError if any pixel leaves [0,1] or the buffer size is off.
void validate_image(const Image& img);
/// Throws ArgumentError if any class index is >= num_classes.
void validate_labels(const LabelMap& lbl);
/// Throws ArgumentError if any coordinate leaves [0,1] or is not finite.
void validate_landmarks(const LandmarkSet& lms);

}  // namespace cari
