#pragma once

#include <filesystem>

#include "cari/image.hpp"

namespace cari {

/// Reads an 8-bit PNG of any colour type as RGB in [0,1].
Image read_image_png(const std::filesystem::path& path);
/// Quantizes to 8 bits per channel (round to nearest) and writes RGB.
void write_image_png(const std::filesystem::path& path, const Image& img);

/// Label PNGs store class indices directly in one 8-bit gray channel.
LabelMap read_label_png(const std::filesystem::path& path, int num_classes = kDefaultNumClasses);
void write_label_png(const std::filesystem::path& path, const LabelMap& lbl);

}  // namespace cari
