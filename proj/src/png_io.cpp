#include "cari/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cari/errors.hpp"

namespace cari {

namespace {

struct PngImage {
  png_image header{};
  std::vector<png_byte> buffer;
};

PngImage read_png(const std::filesystem::path& path, png_uint_32 format) {
  PngImage out;
  out.header.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&out.header, path.c_str())) {
    throw IoError("cannot read " + path.string() + ": " + out.header.message);
  }
  out.header.format = format;
  out.buffer.resize(PNG_IMAGE_SIZE(out.header));
  if (!png_image_finish_read(&out.header, nullptr, out.buffer.data(), 0, nullptr)) {
    std::string msg = out.header.message;
    png_image_free(&out.header);
    throw FormatError("cannot decode " + path.string() + ": " + msg);
  }
  return out;
}

void write_png(const std::filesystem::path& path, int h, int w, png_uint_32 format,
               const std::vector<png_byte>& buffer) {
  png_image header{};
  header.version = PNG_IMAGE_VERSION;
  header.width = static_cast<png_uint_32>(w);
  header.height = static_cast<png_uint_32>(h);
  header.format = format;
  if (!png_image_write_to_file(&header, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw IoError("cannot write " + path.string() + ": " + header.message);
  }
}

}  // namespace

Image read_image_png(const std::filesystem::path& path) {
  auto png = read_png(path, PNG_FORMAT_RGB);
  const int h = static_cast<int>(png.header.height);
  const int w = static_cast<int>(png.header.width);
  Image img(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const png_byte* px = &png.buffer[(static_cast<std::size_t>(y) * w + x) * 3];
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(px[c]) / 255.0f;
    }
  }
  return img;
}

void write_image_png(const std::filesystem::path& path, const Image& img) {
  std::vector<png_byte> buffer(img.plane_size() * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(img.at(c, y, x), 0.0f, 1.0f);
        buffer[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] =
            static_cast<png_byte>(std::lround(v * 255.0f));
      }
    }
  }
  write_png(path, img.height, img.width, PNG_FORMAT_RGB, buffer);
}

LabelMap read_label_png(const std::filesystem::path& path, int num_classes) {
  auto png = read_png(path, PNG_FORMAT_GRAY);
  LabelMap lbl(static_cast<int>(png.header.height), static_cast<int>(png.header.width), num_classes);
  std::memcpy(lbl.classes.data(), png.buffer.data(), lbl.classes.size());
  for (auto v : lbl.classes) {
    if (v >= num_classes) {
      throw FormatError(path.string() + ": label value " + std::to_string(v) + " >= C=" + std::to_string(num_classes));
    }
  }
  return lbl;
}

void write_label_png(const std::filesystem::path& path, const LabelMap& lbl) {
  write_png(path, lbl.height, lbl.width, PNG_FORMAT_GRAY,
            std::vector<png_byte>(lbl.classes.begin(), lbl.classes.end()));
}

}  // namespace cari
