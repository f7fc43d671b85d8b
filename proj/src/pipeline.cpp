#include "cari/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "cari/checksum.hpp"
#include "cari/datasets.hpp"
#include "cari/errors.hpp"
#include "cari/landmark_map.hpp"
#include "cari/png_io.hpp"
#include "cari/toy_faces.hpp"

namespace cari {

namespace fs = std::filesystem;

Arm parse_arm(const std::string& name) {
  if (name == "source") return Arm::kSource;
  if (name == "texture") return Arm::kTexture;
  if (name == "shape") return Arm::kShape;
  if (name == "both") return Arm::kBoth;
  throw ArgumentError("unknown arm '" + name + "' (expected source, texture, shape or both)");
}

std::string to_string(Arm arm) {
  switch (arm) {
    case Arm::kSource: return "source";
    case Arm::kTexture: return "texture";
    case Arm::kShape: return "shape";
    case Arm::kBoth: return "both";
  }
  return "?";
}

std::string table_name(Arm arm) { return arm == Arm::kSource ? "source-only" : to_string(arm); }

const std::vector<Arm>& all_arms() {
  static const std::vector<Arm> arms{Arm::kSource, Arm::kTexture, Arm::kShape, Arm::kBoth};
  return arms;
}

WorkspaceLock::WorkspaceLock(const fs::path& workspace) : path_(workspace / ".lock") {
  fs::create_directories(workspace);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw IoError("workspace " + workspace.string() + " is locked by another process (remove " + path_.string() +
                    " if it is stale)");
    }
    throw IoError("cannot create " + path_.string() + ": " + std::strerror(errno));
  }
  const auto pid = std::to_string(::getpid()) + "\n";
  if (::write(fd, pid.data(), pid.size()) < 0) {
    // The lock holds by existence alone.
  }
  ::close(fd);
}

WorkspaceLock::~WorkspaceLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

namespace {

void progress(const std::string& stage, const std::string& msg) { std::clog << "[" << stage << "] " << msg << '\n'; }

std::string relative_to(const fs::path& p, const fs::path& root) { return p.lexically_relative(root).generic_string(); }

std::string file_sha_or_dash(const fs::path& p) { return fs::is_regular_file(p) ? sha256_file(p) : "-"; }

void require_file(const fs::path& p, const std::string& stage, const std::string& what) {
  if (!fs::is_regular_file(p)) throw DependencyError(stage, what + " missing at " + p.string() + "; run " + stage + " first");
}

std::vector<LandmarkSet> landmarks_of(const std::vector<CaricatureSample>& s) {
  std::vector<LandmarkSet> out;
  for (const auto& c : s) out.push_back(c.landmarks);
  return out;
}

std::vector<Image> images_of(const std::vector<CaricatureSample>& s) {
  std::vector<Image> out;
  for (const auto& c : s) out.push_back(c.image);
  return out;
}

LoadOptions load_options(const PipelineConfig& cfg) {
  LoadOptions o;
  o.num_classes = cfg.num_classes;
  return o;
}

std::vector<std::string> read_style_ref_names(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DependencyError("prepare", "style references missing at " + p.string() + "; run prepare first");
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    int idx;
    std::string name;
    if (!(is >> idx >> name)) throw FormatError(p.string() + ": malformed line '" + line + "'");
    names.push_back(name);
  }
  return names;
}

StyleReferenceSet load_style_refs(const PipelineConfig& cfg, const WorkspaceLayout& ws) {
  const auto names = read_style_ref_names(ws.style_refs());
  const auto caris = load_caricature_dataset(cfg.caricatures, load_options(cfg));
  StyleReferenceSet refs;
  for (const auto& n : names) {
    auto it = std::find_if(caris.begin(), caris.end(), [&](const CaricatureSample& c) { return c.name == n; });
    if (it == caris.end()) throw DependencyError("prepare", "style reference " + n + " is not in the caricature set");
    refs.indices.push_back(static_cast<int>(it - caris.begin()));
    refs.images.push_back(it->image);
  }
  return refs;
}

// Shape and style conditions for every photo, drawn from one stream so all
// arms see the same draws.
std::vector<std::pair<int, int>> draw_conditions(std::uint64_t seed, std::size_t n, int k, int m) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pk(0, k - 1), pm(0, m - 1);
  std::vector<std::pair<int, int>> out(n);
  for (auto& c : out) {
    c.first = pk(rng);
    c.second = pm(rng);
  }
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

void write_manifest(const fs::path& path, const SynthesisManifest& m) {
  std::ostringstream os;
  os << "# arm\t" << to_string(m.arm) << '\n';
  os << "source\tshape_condition\tstyle_condition\timage\tlabels\timage_sha256\tlabels_sha256\tshape_checkpoint_sha256"
        "\ttexture_checkpoint_sha256\n";
  for (const auto& r : m.records) {
    os << r.source << '\t' << r.shape_condition << '\t' << r.style_condition << '\t' << r.image << '\t' << r.labels
       << '\t' << r.image_sha256 << '\t' << r.labels_sha256 << '\t' << r.shape_checkpoint_sha256 << '\t'
       << r.texture_checkpoint_sha256 << '\n';
  }
  write_text(path, os.str());
}

SynthesisManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DependencyError("synthesize", "no manifest at " + path.string() + "; run synthesize first");
  SynthesisManifest m;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# arm\t", 0) != 0) throw FormatError(path.string() + ": missing arm line");
  m.arm = parse_arm(line.substr(6));
  std::getline(in, line);  // column header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    SynthesisRecord r;
    if (!(is >> r.source >> r.shape_condition >> r.style_condition >> r.image >> r.labels >> r.image_sha256 >>
          r.labels_sha256 >> r.shape_checkpoint_sha256 >> r.texture_checkpoint_sha256)) {
      throw FormatError(path.string() + ": malformed record '" + line + "'");
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

void verify_manifest(const SynthesisManifest& m, const WorkspaceLayout& ws) {
  const auto shape_sha = file_sha_or_dash(ws.shape_checkpoint());
  const auto texture_sha = file_sha_or_dash(ws.texture_checkpoint());
  for (const auto& r : m.records) {
    if (r.shape_checkpoint_sha256 != "-" && r.shape_checkpoint_sha256 != shape_sha) {
      throw DependencyError("synthesize", to_string(m.arm) + " manifest was built from a different shape checkpoint");
    }
    if (r.texture_checkpoint_sha256 != "-" && r.texture_checkpoint_sha256 != texture_sha) {
      throw DependencyError("synthesize", to_string(m.arm) + " manifest was built from a different texture checkpoint");
    }
    const auto img = ws.root / r.image, lbl = ws.root / r.labels;
    if (!fs::is_regular_file(img) || !fs::is_regular_file(lbl) || sha256_file(img) != r.image_sha256 ||
        sha256_file(lbl) != r.labels_sha256) {
      throw DependencyError("synthesize", r.source + ": synthesized files do not match the " + to_string(m.arm) +
                                              " manifest");
    }
  }
}

void write_shape_set(const fs::path& path, const ShapeSet& s) {
  std::ostringstream os;
  char buf[32];
  for (const auto& c : s.centers) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.9f %.9f", c[i].x, c[i].y);
      os << (i ? " " : "") << buf;
    }
    os << '\n';
  }
  write_text(path, os.str());
}

ShapeSet read_shape_set(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DependencyError("prepare", "shape set missing at " + path.string() + "; run prepare first");
  ShapeSet s;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    LandmarkSet c{};
    for (auto& p : c) {
      if (!(is >> p.x >> p.y)) throw FormatError(path.string() + ": each line needs 34 numbers");
    }
    s.centers.push_back(c);
  }
  return s;
}

std::unique_ptr<PerceptualExtractor> make_extractor(const PipelineConfig& cfg) {
  if (cfg.extractor == ExtractorKind::kIdentity) return std::make_unique<IdentityExtractor>();
  auto ex = std::make_unique<ConvStackExtractor>();
  if (!cfg.extractor_weights.empty()) ex->load_weights(cfg.extractor_weights);
  return ex;
}

LandmarkGrouping load_grouping(const PipelineConfig& cfg) {
  return cfg.grouping.empty() ? LandmarkGrouping::default_grouping() : LandmarkGrouping::load(cfg.grouping);
}

LabelMap predict_padded(ParsingNetwork& net, const Image& img) {
  const int h = (img.height + 7) / 8 * 8, w = (img.width + 7) / 8 * 8;
  if (h == img.height && w == img.width) return predict(net, img);
  Image padded(h, w);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) padded.at(c, y, x) = img.at(c, y, x);
    }
  }
  const auto full = predict(net, padded);
  LabelMap out(img.height, img.width, full.num_classes);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) out.at(y, x) = full.at(y, x);
  }
  return out;
}

void cmd_make_toy_data(const PipelineConfig& cfg, const std::optional<fs::path>& out) {
  const auto photos = out ? *out / "photos" : cfg.photos;
  const auto caris = out ? *out / "caricatures" : cfg.caricatures;
  const auto eval = out ? *out / "eval" : cfg.eval;
  if (photos.empty() || caris.empty() || eval.empty()) throw ConfigError("dataset paths are not configured");
  const auto seed = stage_seed(cfg.seed, "toy-data");
  ToyDatasetOptions o;
  o.size = cfg.toy.size;
  o.count = cfg.toy.photos;
  o.domain = ToyDomain::kPhoto;
  o.seed = seed;
  generate_toy_face_dataset(photos, o);
  o.count = cfg.toy.caricatures;
  o.domain = ToyDomain::kCaricature;
  o.seed = seed + 1;
  generate_toy_face_dataset(caris, o);
  o.count = cfg.toy.eval;
  o.seed = seed + 2;
  o.caricature_labels = true;
  generate_toy_face_dataset(eval, o);
  progress("make-toy-data", std::to_string(cfg.toy.photos) + " photos, " + std::to_string(cfg.toy.caricatures) +
                                " caricatures, " + std::to_string(cfg.toy.eval) + " evaluation caricatures");
}

void cmd_prepare(const PipelineConfig& cfg) {
  const WorkspaceLayout ws{cfg.workspace};
  const auto caris = load_caricature_dataset(cfg.caricatures, load_options(cfg));
  const int k = cfg.shape.num_shapes, m = cfg.texture.num_styles;
  if (static_cast<int>(caris.size()) < k || static_cast<int>(caris.size()) < m) {
    throw ConfigError("prepare: " + std::to_string(caris.size()) + " caricatures cannot form K=" + std::to_string(k) +
                      " shape clusters and M=" + std::to_string(m) + " style references");
  }
  const auto lms = landmarks_of(caris);
  const auto shapes = cluster_shapes(lms, k, stage_seed(cfg.seed, "shape-clusters"));
  write_shape_set(ws.shape_set(), shapes);

  const auto ex = make_extractor(cfg);
  const auto images = images_of(caris);
  const auto refs = cluster_styles(images, *ex, m);
  std::ostringstream tsv;
  tsv << "# index\tname\n";
  for (int i : refs.indices) tsv << i << '\t' << caris[i].name << '\n';
  write_text(ws.style_refs(), tsv.str());

  std::vector<int> sizes(k, 0);
  for (const auto& l : lms) ++sizes[nearest_shape(shapes, l)];
  std::ostringstream rep;
  rep << "caricatures " << caris.size() << "\nshape_clusters " << k << "\nshape_cluster_sizes";
  for (int s : sizes) rep << ' ' << s;
  rep << "\nstyle_references " << m << "\nstyle_feature_length " << style_feature_length(*ex) << "\nextractor "
      << ex->fingerprint() << '\n';
  write_text(ws.cluster_report(), rep.str());
  progress("prepare", std::to_string(k) + " shape centers, " + std::to_string(m) + " style references");
}

void cmd_train_shape(const PipelineConfig& cfg) {
  const WorkspaceLayout ws{cfg.workspace};
  const auto shapes = read_shape_set(ws.shape_set());
  const auto grouping = load_grouping(cfg);
  const auto photos = load_photo_dataset(cfg.photos, load_options(cfg));
  const auto caris = load_caricature_dataset(cfg.caricatures, load_options(cfg));
  const int s = cfg.shape.map_size;
  std::vector<LandmarkMap> pm, cm;
  for (const auto& p : photos) pm.push_back(rasterize_landmark_map(p.landmarks, grouping, s, s));
  for (const auto& c : caris) cm.push_back(rasterize_landmark_map(c.landmarks, grouping, s, s));
  auto sc = cfg.shape;
  sc.seed = stage_seed(cfg.seed, "shape");
  const auto res = train_shape_adaptation(pm, cm, shapes, sc);
  fs::create_directories(ws.shape_checkpoint().parent_path());
  ShapeCheckpointMeta meta;
  meta.groups = grouping.size();
  meta.num_shapes = shapes.size();
  meta.grouping_hash = grouping.hash();
  meta.config = sc;
  save_shape_checkpoint(ws.shape_checkpoint(), res.models, meta);
  write_shape_log(ws.shape_log(), res.log);
  progress("train-shape", std::to_string(sc.iterations) + " iterations, final cycle loss " +
                              (res.log.empty() ? std::string("-") : std::to_string(res.log.back().cycle_loss)));
}

namespace {

ShapeGenerator load_photo_generator(const PipelineConfig& cfg, const WorkspaceLayout& ws,
                                    const LandmarkGrouping& grouping, const std::string& stage) {
  require_file(ws.shape_checkpoint(), "train-shape", "shape checkpoint");
  ShapeCheckpointMeta meta;
  auto models = load_shape_checkpoint(ws.shape_checkpoint(), &meta);
  if (meta.grouping_hash != grouping.hash()) {
    throw DependencyError(stage, "shape checkpoint was trained with a different landmark grouping");
  }
  if (meta.num_shapes != cfg.shape.num_shapes) {
    throw DependencyError(stage, "shape checkpoint has K=" + std::to_string(meta.num_shapes) + ", config has K=" +
                                     std::to_string(cfg.shape.num_shapes));
  }
  models.photo_to_cari->eval();
  return models.photo_to_cari;
}

}  // namespace

void cmd_train_texture(const PipelineConfig& cfg) {
  const WorkspaceLayout ws{cfg.workspace};
  const auto grouping = load_grouping(cfg);
  auto gen = load_photo_generator(cfg, ws, grouping, "train-texture");
  const auto refs = load_style_refs(cfg, ws);
  const auto photos = load_photo_dataset(cfg.photos, load_options(cfg));
  const auto conds =
      draw_conditions(stage_seed(cfg.seed, "texture-deform"), photos.size(), cfg.shape.num_shapes, 1);
  std::vector<Image> deformed;
  for (std::size_t i = 0; i < photos.size(); ++i) {
    const auto& p = photos[i];
    deformed.push_back(apply_shape_adaptation(gen, p.image, p.labels, p.landmarks,
                                              ShapeCondition(conds[i].first, cfg.shape.num_shapes), grouping,
                                              cfg.shape.map_size)
                           .image);
  }
  const auto ex = make_extractor(cfg);
  auto tc = cfg.texture;
  tc.seed = stage_seed(cfg.seed, "texture");
  auto res = train_texture_network(deformed, refs, *ex, tc);
  fs::create_directories(ws.texture_checkpoint().parent_path());
  save_texture_checkpoint(ws.texture_checkpoint(), res.network, tc, ex->fingerprint());
  write_texture_log(ws.texture_log(), res.log);
  progress("train-texture", std::to_string(tc.iterations) + " iterations, final loss " +
                                (res.log.empty() ? std::string("-") : std::to_string(res.log.back().total_loss)));
}

SynthesisManifest cmd_synthesize(const PipelineConfig& cfg, Arm arm) {
  if (arm == Arm::kSource) throw ArgumentError("the source arm uses the photos directly and is not synthesized");
  const WorkspaceLayout ws{cfg.workspace};
  const bool use_shape = arm == Arm::kShape || arm == Arm::kBoth;
  const bool use_texture = arm == Arm::kTexture || arm == Arm::kBoth;
  const auto grouping = load_grouping(cfg);

  ShapeGenerator gen{nullptr};
  TextureNetwork tex{nullptr};
  std::string shape_sha = "-", texture_sha = "-";
  if (use_shape) {
    gen = load_photo_generator(cfg, ws, grouping, "synthesize");
    shape_sha = sha256_file(ws.shape_checkpoint());
  }
  if (use_texture) {
    require_file(ws.texture_checkpoint(), "train-texture", "texture checkpoint");
    std::string fp;
    tex = load_texture_checkpoint(ws.texture_checkpoint(), &fp);
    if (fp != make_extractor(cfg)->fingerprint()) {
      throw DependencyError("synthesize", "texture checkpoint was trained with a different perceptual extractor");
    }
    if (tex->num_styles() != cfg.texture.num_styles) {
      throw DependencyError("synthesize", "texture checkpoint has M=" + std::to_string(tex->num_styles()) +
                                              ", config has M=" + std::to_string(cfg.texture.num_styles));
    }
    tex->eval();
    texture_sha = sha256_file(ws.texture_checkpoint());
  }

  const auto photos = load_photo_dataset(cfg.photos, load_options(cfg));
  const auto conds =
      draw_conditions(stage_seed(cfg.seed, "synthesis"), photos.size(), cfg.shape.num_shapes, cfg.texture.num_styles);
  const auto dir = ws.synth_dir(arm);
  fs::remove_all(dir);
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "labels");

  SynthesisManifest m;
  m.arm = arm;
  for (std::size_t i = 0; i < photos.size(); ++i) {
    const auto& p = photos[i];
    Image img = p.image;
    LabelMap lbl = p.labels;
    SynthesisRecord r;
    r.source = p.name;
    if (use_shape) {
      r.shape_condition = conds[i].first;
      auto a = apply_shape_adaptation(gen, img, lbl, p.landmarks, ShapeCondition(r.shape_condition, cfg.shape.num_shapes),
                                      grouping, cfg.shape.map_size);
      img = std::move(a.image);
      lbl = std::move(a.labels);
    }
    if (use_texture) {
      r.style_condition = conds[i].second;
      img = apply_texture(tex, img, StyleCondition(r.style_condition, cfg.texture.num_styles));
    }
    std::set<uint8_t> src(p.labels.classes.begin(), p.labels.classes.end());
    for (auto v : std::set<uint8_t>(lbl.classes.begin(), lbl.classes.end())) {
      if (!src.count(v)) throw DataError(p.name + ": synthesized labels contain class " + std::to_string(v));
    }
    const auto img_path = dir / "images" / (p.name + ".png");
    const auto lbl_path = dir / "labels" / (p.name + ".png");
    write_image_png(img_path, img);
    write_label_png(lbl_path, lbl);
    r.image = relative_to(img_path, ws.root);
    r.labels = relative_to(lbl_path, ws.root);
    r.image_sha256 = sha256_file(img_path);
    r.labels_sha256 = sha256_file(lbl_path);
    r.shape_checkpoint_sha256 = shape_sha;
    r.texture_checkpoint_sha256 = texture_sha;
    m.records.push_back(std::move(r));
  }
  write_manifest(ws.manifest(arm), m);
  progress("synthesize", to_string(arm) + ": " + std::to_string(m.records.size()) + " pairs");
  return m;
}

namespace {

std::vector<ParsePair> training_pairs(const PipelineConfig& cfg, const WorkspaceLayout& ws, Arm arm,
                                      std::string* provenance) {
  std::vector<ParsePair> pairs;
  if (arm == Arm::kSource) {
    for (auto& p : load_photo_dataset(cfg.photos, load_options(cfg))) {
      pairs.push_back({p.name, std::move(p.image), std::move(p.labels)});
    }
    *provenance = "-";
    return pairs;
  }
  const auto m = read_manifest(ws.manifest(arm));
  verify_manifest(m, ws);
  for (const auto& r : m.records) {
    pairs.push_back({r.source, read_image_png(ws.root / r.image), read_label_png(ws.root / r.labels, cfg.num_classes)});
  }
  *provenance = sha256_file(ws.manifest(arm));
  return pairs;
}

fs::path provenance_file(const WorkspaceLayout& ws, Arm arm) { return ws.parser_dir(arm) / "provenance.txt"; }

}  // namespace

void cmd_train_parser(const PipelineConfig& cfg, Arm arm) {
  const WorkspaceLayout ws{cfg.workspace};
  std::string manifest_sha;
  const auto pairs = training_pairs(cfg, ws, arm, &manifest_sha);
  auto pc = cfg.parser;
  pc.num_classes = cfg.num_classes;
  pc.seed = stage_seed(cfg.seed, "parser");
  auto res = train_parser(pairs, pc);
  fs::create_directories(ws.parser_dir(arm));
  save_parser_checkpoint(ws.parser_checkpoint(arm), res.network, sha256_hex(describe(pc) + "\n" + manifest_sha));
  write_parse_log(ws.parser_dir(arm) / "log.csv", res.log);
  write_text(provenance_file(ws, arm), "manifest_sha256\t" + manifest_sha + "\n");
  progress("train-parser", to_string(arm) + ": " + std::to_string(pc.max_iter) + " iterations, final loss " +
                               (res.log.empty() ? std::string("-") : std::to_string(res.log.back().loss)));
}

IoUReport cmd_evaluate(const PipelineConfig& cfg, Arm arm) {
  const WorkspaceLayout ws{cfg.workspace};
  require_file(ws.parser_checkpoint(arm), "train-parser", to_string(arm) + " parser checkpoint");
  if (arm != Arm::kSource) {
    const auto m = read_manifest(ws.manifest(arm));
    verify_manifest(m, ws);
    const auto expected = "manifest_sha256\t" + sha256_file(ws.manifest(arm)) + "\n";
    if (!fs::is_regular_file(provenance_file(ws, arm)) || read_text(provenance_file(ws, arm)) != expected) {
      throw DependencyError("evaluate", to_string(arm) + " parser was trained on a different synthesis manifest");
    }
  }
  auto net = load_parser_checkpoint(ws.parser_checkpoint(arm));
  const auto eval = load_photo_dataset(cfg.eval, load_options(cfg));
  if (eval.empty()) throw EmptyEvaluationError("evaluation set " + cfg.eval.string() + " is empty");
  ConfusionMatrix cm(cfg.num_classes);
  for (const auto& s : eval) cm.accumulate(predict_padded(net, s.image), s.labels);
  const auto report = iou_report(cm);
  const auto table = render_table({{table_name(arm), report}});
  write_text(ws.eval_dir() / (to_string(arm) + ".md"), table.markdown);
  write_text(ws.eval_dir() / (to_string(arm) + ".csv"), table.csv);
  progress("evaluate", to_string(arm) + ": mIoU " + format_cell(report.miou));
  return report;
}

RenderedTable cmd_run_ablation(const PipelineConfig& cfg) {
  cmd_prepare(cfg);
  cmd_train_shape(cfg);
  cmd_train_texture(cfg);
  for (Arm a : all_arms()) {
    if (a != Arm::kSource) cmd_synthesize(cfg, a);
  }
  std::vector<std::pair<std::string, IoUReport>> rows;
  for (Arm a : all_arms()) {
    cmd_train_parser(cfg, a);
    rows.emplace_back(table_name(a), cmd_evaluate(cfg, a));
  }
  const WorkspaceLayout ws{cfg.workspace};
  auto table = render_table(rows);
  write_text(ws.eval_dir() / "ablation.md", table.markdown);
  write_text(ws.eval_dir() / "ablation.csv", table.csv);
  return table;
}

}  // namespace cari
