#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cari/clustering.hpp"
#include "cari/config.hpp"
#include "cari/metrics.hpp"
#include "cari/perceptual.hpp"

namespace cari {

/// Training-set variants compared in the ablation. kSource trains on the
/// photos as they are.
enum class Arm { kSource, kTexture, kShape, kBoth };

Arm parse_arm(const std::string& name);
std::string to_string(Arm arm);
/// Row label in the ablation table.
std::string table_name(Arm arm);
/// Table order: source-only, texture, shape, both.
const std::vector<Arm>& all_arms();

/// Exclusive ownership of a workspace for the lifetime of the object.
class WorkspaceLock {
 public:
  explicit WorkspaceLock(const std::filesystem::path& workspace);
  ~WorkspaceLock();
  WorkspaceLock(const WorkspaceLock&) = delete;
  WorkspaceLock& operator=(const WorkspaceLock&) = delete;

 private:
  std::filesystem::path path_;
};

/// Fixed locations inside a workspace.
struct WorkspaceLayout {
  std::filesystem::path root;

  std::filesystem::path shape_set() const { return root / "prepare" / "shape_set.txt"; }
  std::filesystem::path style_refs() const { return root / "prepare" / "style_refs.tsv"; }
  std::filesystem::path cluster_report() const { return root / "prepare" / "clusters.txt"; }
  std::filesystem::path shape_checkpoint() const { return root / "shape" / "checkpoint.pt"; }
  std::filesystem::path shape_log() const { return root / "shape" / "log.csv"; }
  std::filesystem::path texture_checkpoint() const { return root / "texture" / "checkpoint.pt"; }
  std::filesystem::path texture_log() const { return root / "texture" / "log.csv"; }
  std::filesystem::path synth_dir(Arm arm) const { return root / "synth" / to_string(arm); }
  std::filesystem::path manifest(Arm arm) const { return synth_dir(arm) / "manifest.tsv"; }
  std::filesystem::path parser_dir(Arm arm) const { return root / "parser" / to_string(arm); }
  std::filesystem::path parser_checkpoint(Arm arm) const { return parser_dir(arm) / "checkpoint.pt"; }
  std::filesystem::path eval_dir() const { return root / "eval"; }
};

struct SynthesisRecord {
  std::string source;
  int shape_condition = -1;  ///< -1 when the arm skips the stage
  int style_condition = -1;
  std::string image;   ///< relative to the workspace
  std::string labels;
  std::string image_sha256;
  std::string labels_sha256;
  std::string shape_checkpoint_sha256;  ///< "-" when unused
  std::string texture_checkpoint_sha256;
};

struct SynthesisManifest {
  Arm arm = Arm::kBoth;
  std::vector<SynthesisRecord> records;
};

void write_manifest(const std::filesystem::path& path, const SynthesisManifest& m);
SynthesisManifest read_manifest(const std::filesystem::path& path);
/// Throws DependencyError unless every record's files and stage checkpoints
/// match the workspace's current contents.
void verify_manifest(const SynthesisManifest& m, const WorkspaceLayout& ws);

void write_shape_set(const std::filesystem::path& path, const ShapeSet& s);
ShapeSet read_shape_set(const std::filesystem::path& path);

std::unique_ptr<PerceptualExtractor> make_extractor(const PipelineConfig& cfg);
LandmarkGrouping load_grouping(const PipelineConfig& cfg);

/// Pads to multiples of 8 with zeros, predicts, then crops back.
LabelMap predict_padded(ParsingNetwork& net, const Image& img);

/// Writes the photo, caricature and evaluation toy datasets to the configured
/// roots, or below `out` (photos/, caricatures/, eval/) when given.
void cmd_make_toy_data(const PipelineConfig& cfg, const std::optional<std::filesystem::path>& out = std::nullopt);
void cmd_prepare(const PipelineConfig& cfg);
void cmd_train_shape(const PipelineConfig& cfg);
void cmd_train_texture(const PipelineConfig& cfg);
SynthesisManifest cmd_synthesize(const PipelineConfig& cfg, Arm arm);
void cmd_train_parser(const PipelineConfig& cfg, Arm arm);
IoUReport cmd_evaluate(const PipelineConfig& cfg, Arm arm);
/// Runs every stage and writes eval/ablation.md and eval/ablation.csv.
RenderedTable cmd_run_ablation(const PipelineConfig& cfg);

}  // namespace cari
