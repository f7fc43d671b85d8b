#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cari/parsing.hpp"
#include "cari/shape_adapt.hpp"
#include "cari/texture_adapt.hpp"

namespace cari {

enum class ExtractorKind { kConvStack, kIdentity };

/// Sizes used by make-toy-data.
struct ToyDataConfig {
  int photos = 64;
  int caricatures = 64;
  int eval = 32;
  int size = 64;
};

/// One run of the whole pipeline. Loaded from an INI file:
///
///     [paths]    photos, caricatures, eval, grouping, workspace
///     [general]  seed, num_classes
///     [toy]      photos, caricatures, eval, size
///     [shape]    k, lr, iterations, ...
///     [texture]  m, lr, iterations, style_weight, extractor, extractor_weights, ...
///     [parser]   base_lr, power, max_iter, profile, ...
///
/// Relative paths resolve against the directory holding the file.
struct PipelineConfig {
  std::filesystem::path photos;
  std::filesystem::path caricatures;
  std::filesystem::path eval;
  std::filesystem::path grouping;  ///< empty selects the built-in grouping
  std::filesystem::path workspace;
  std::uint64_t seed = 0;
  int num_classes = kDefaultNumClasses;
  ToyDataConfig toy;
  ShapeTrainConfig shape;
  TextureTrainConfig texture;
  ExtractorKind extractor = ExtractorKind::kConvStack;
  std::filesystem::path extractor_weights;
  ParseTrainConfig parser;
};

/// Throws ConfigError on unknown keys, malformed values or invalid stage settings.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Checks invariants that do not need the filesystem.
void validate(const PipelineConfig& cfg);

/// Stage seeds derived from the global seed.
std::uint64_t stage_seed(std::uint64_t global, const std::string& stage);

}  // namespace cari
