#include "cari/image.hpp"

#include <cmath>

#include "cari/errors.hpp"

namespace cari {

namespace {
constexpr std::array<std::string_view, kNumEvalClasses> kEvalClassNames = {
    "facial skin", "eye-l", "eye-r", "brow-l", "brow-r", "nose", "in mouth", "upper lip", "lower lip"};
}

std::span<const std::string_view> eval_class_names() { return kEvalClassNames; }

Image::Image(int h, int w, float fill)
    : height(h), width(w), pixels(static_cast<std::size_t>(3) * h * w, fill) {}

LabelMap::LabelMap(int h, int w, int c, std::uint8_t fill)
    : height(h), width(w), num_classes(c), classes(static_cast<std::size_t>(h) * w, fill) {}

void validate_image(const Image& img) {
  if (img.height <= 0 || img.width <= 0 || img.pixels.size() != 3 * img.plane_size()) {
    throw ArgumentError("image buffer does not match its dimensions");
  }
  for (float v : img.pixels) {
    if (!(v >= 0.0f && v <= 1.0f)) throw ArgumentError("image pixel outside [0,1]");
  }
}

void validate_labels(const LabelMap& lbl) {
  if (lbl.classes.size() != static_cast<std::size_t>(lbl.height) * lbl.width) {
    throw ArgumentError("label buffer does not match its dimensions");
  }
  for (auto v : lbl.classes) {
    if (v >= lbl.num_classes) {
      throw ArgumentError(std::to_string(v) + " is not a valid class index (C=" + std::to_string(lbl.num_classes) + ")");
    }
  }
}

void validate_landmarks(const LandmarkSet& lms) {
  for (const auto& p : lms) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.x > 1.0 || p.y < 0.0 || p.y > 1.0) {
      throw ArgumentError("landmark coordinate outside [0,1]");
    }
  }
}

}  // namespace cari
