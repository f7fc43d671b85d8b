#include "cari/datasets.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cari/errors.hpp"
#include "cari/png_io.hpp"

namespace fs = std::filesystem;

namespace cari {

namespace {

LandmarkSet to_landmark_set(const std::string& name, const std::vector<Point2>& pts, const LoadOptions& opts) {
  LandmarkSet lms{};
  if (opts.converter) {
    lms = opts.converter(pts);
  } else {
    if (pts.size() != kNumLandmarks) {
      throw FormatError(name + ": landmark file has " + std::to_string(pts.size()) + " points, expected 17");
    }
    std::copy(pts.begin(), pts.end(), lms.begin());
  }
  try {
    validate_landmarks(lms);
  } catch (const ArgumentError& e) {
    throw FormatError(name + ": " + e.what());
  }
  return lms;
}

Image load_checked_image(const fs::path& root, const std::string& name) {
  Image img = read_image_png(root / "images" / (name + ".png"));
  if (img.height < kMinImageSide || img.width < kMinImageSide) {
    throw LoadError(name, "image smaller than " + std::to_string(kMinImageSide) + "x" + std::to_string(kMinImageSide));
  }
  return img;
}

fs::path require_file(const fs::path& path, const std::string& name, const char* what) {
  if (!fs::is_regular_file(path)) throw LoadError(name, std::string("missing ") + what + " file " + path.string());
  return path;
}

}  // namespace

std::vector<std::string> list_basenames(const fs::path& root) {
  const fs::path dir = root / "images";
  if (!fs::is_directory(dir)) throw IoError("no images/ directory under " + root.string());
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") names.push_back(entry.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::vector<Point2> read_landmark_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Point2> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Point2 p;
    std::string extra;
    if (!(ls >> p.x >> p.y) || (ls >> extra)) throw FormatError(path.string() + ": malformed line '" + line + "'");
    pts.push_back(p);
  }
  return pts;
}

void write_landmark_file(const fs::path& path, const LandmarkSet& lms) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  char buf[64];
  for (const auto& p : lms) {
    std::snprintf(buf, sizeof buf, "%.9f %.9f\n", p.x, p.y);
    out << buf;
  }
  if (!out) throw IoError("cannot write " + path.string());
}

std::vector<PhotoSample> load_photo_dataset(const fs::path& root, const LoadOptions& opts) {
  std::vector<PhotoSample> out;
  for (const auto& name : list_basenames(root)) {
    PhotoSample s;
    s.name = name;
    const fs::path label_path = require_file(root / "labels" / (name + ".png"), name, "label");
    const fs::path lm_path = require_file(root / "landmarks" / (name + ".txt"), name, "landmark");
    s.image = load_checked_image(root, name);
    try {
      s.labels = read_label_png(label_path, opts.num_classes);
    } catch (const FormatError& e) {
      throw FormatError(name + ": " + e.what());
    }
    if (s.labels.height != s.image.height || s.labels.width != s.image.width) {
      throw LoadError(name, "label size does not match image size");
    }
    s.landmarks = to_landmark_set(name, read_landmark_file(lm_path), opts);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<CaricatureSample> load_caricature_dataset(const fs::path& root, const LoadOptions& opts) {
  std::vector<CaricatureSample> out;
  for (const auto& name : list_basenames(root)) {
    CaricatureSample s;
    s.name = name;
    const fs::path lm_path = require_file(root / "landmarks" / (name + ".txt"), name, "landmark");
    s.image = load_checked_image(root, name);
    s.landmarks = to_landmark_set(name, read_landmark_file(lm_path), opts);
    out.push_back(std::move(s));
  }
  return out;
}

void write_sample(const fs::path& root, const std::string& name, const Image& image, const LandmarkSet& landmarks,
                  const LabelMap* labels) {
  std::error_code ec;
  fs::create_directories(root / "images", ec);
  fs::create_directories(root / "landmarks", ec);
  if (labels) fs::create_directories(root / "labels", ec);
  if (ec) throw IoError("cannot create dataset directories under " + root.string() + ": " + ec.message());
  write_image_png(root / "images" / (name + ".png"), image);
  write_landmark_file(root / "landmarks" / (name + ".txt"), landmarks);
  if (labels) write_label_png(root / "labels" / (name + ".png"), *labels);
}

}  // namespace cari
