#include "cari/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <functional>
#include <map>

#include "cari/checksum.hpp"
#include "cari/errors.hpp"

namespace cari {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

using Setter = std::function<void(const std::string&)>;

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": cannot parse '" + text + "' as a number");
  return v;
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw ConfigError("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": cannot parse '" + text + "' as a real number");
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

Setter int_field(const std::string& key, int& dst) {
  return [key, &dst](const std::string& v) { dst = parse_number<int>(key, v); };
}
Setter u64_field(const std::string& key, std::uint64_t& dst) {
  return [key, &dst](const std::string& v) { dst = parse_number<std::uint64_t>(key, v); };
}
Setter real_field(const std::string& key, double& dst) {
  return [key, &dst](const std::string& v) { dst = parse_double(key, v); };
}
Setter bool_field(const std::string& key, bool& dst) {
  return [key, &dst](const std::string& v) { dst = parse_bool(key, v); };
}
Setter path_field(const fs::path& base, fs::path& dst) {
  return [base, &dst](const std::string& v) {
    const fs::path p(v);
    dst = p.is_absolute() ? p : (base / p).lexically_normal();
  };
}

}  // namespace

PipelineConfig load_pipeline_config(const fs::path& path) {
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(path.string() + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  const fs::path base = fs::absolute(path).parent_path();
  PipelineConfig c;
  std::string profile;
  std::string extractor;

  std::map<std::string, std::map<std::string, Setter>> schema;
  auto& paths = schema["paths"];
  paths["photos"] = path_field(base, c.photos);
  paths["caricatures"] = path_field(base, c.caricatures);
  paths["eval"] = path_field(base, c.eval);
  paths["grouping"] = path_field(base, c.grouping);
  paths["workspace"] = path_field(base, c.workspace);

  auto& general = schema["general"];
  general["seed"] = u64_field("general.seed", c.seed);
  general["num_classes"] = int_field("general.num_classes", c.num_classes);

  auto& toy = schema["toy"];
  toy["photos"] = int_field("toy.photos", c.toy.photos);
  toy["caricatures"] = int_field("toy.caricatures", c.toy.caricatures);
  toy["eval"] = int_field("toy.eval", c.toy.eval);
  toy["size"] = int_field("toy.size", c.toy.size);

  auto& shape = schema["shape"];
  shape["k"] = int_field("shape.k", c.shape.num_shapes);
  shape["lr"] = real_field("shape.lr", c.shape.lr);
  shape["iterations"] = int_field("shape.iterations", c.shape.iterations);
  shape["cycle_weight"] = real_field("shape.cycle_weight", c.shape.cycle_weight);
  shape["clip"] = real_field("shape.clip", c.shape.clip);
  shape["critic_steps"] = int_field("shape.critic_steps", c.shape.critic_steps);
  shape["batch_size"] = int_field("shape.batch_size", c.shape.batch_size);
  shape["map_size"] = int_field("shape.map_size", c.shape.map_size);
  shape["grid_rows"] = int_field("shape.grid_rows", c.shape.grid_rows);
  shape["grid_cols"] = int_field("shape.grid_cols", c.shape.grid_cols);
  shape["bound"] = real_field("shape.bound", c.shape.bound);
  shape["width"] = int_field("shape.width", c.shape.width);
  shape["critic_width"] = int_field("shape.critic_width", c.shape.critic_width);

  auto& texture = schema["texture"];
  texture["m"] = int_field("texture.m", c.texture.num_styles);
  texture["lr"] = real_field("texture.lr", c.texture.lr);
  texture["iterations"] = int_field("texture.iterations", c.texture.iterations);
  texture["style_weight"] = real_field("texture.style_weight", c.texture.style_weight);
  texture["batch_size"] = int_field("texture.batch_size", c.texture.batch_size);
  texture["width"] = int_field("texture.width", c.texture.width);
  texture["variance_eps"] = real_field("texture.variance_eps", c.texture.variance_eps);
  texture["extractor"] = [&extractor](const std::string& v) { extractor = v; };
  texture["extractor_weights"] = path_field(base, c.extractor_weights);

  auto& parser = schema["parser"];
  parser["base_lr"] = real_field("parser.base_lr", c.parser.base_lr);
  parser["power"] = real_field("parser.power", c.parser.power);
  parser["max_iter"] = int_field("parser.max_iter", c.parser.max_iter);
  parser["batch_size"] = int_field("parser.batch_size", c.parser.batch_size);
  parser["crop_size"] = int_field("parser.crop_size", c.parser.crop_size);
  parser["flip"] = bool_field("parser.flip", c.parser.flip);
  parser["random_scale"] = bool_field("parser.random_scale", c.parser.random_scale);
  parser["scale_min"] = real_field("parser.scale_min", c.parser.scale_min);
  parser["scale_max"] = real_field("parser.scale_max", c.parser.scale_max);
  parser["adam"] = bool_field("parser.adam", c.parser.adam);
  parser["momentum"] = real_field("parser.momentum", c.parser.momentum);
  parser["weight_decay"] = real_field("parser.weight_decay", c.parser.weight_decay);
  parser["profile"] = [&profile](const std::string& v) { profile = v; };

  for (const auto& [section, body] : tree) {
    auto s = schema.find(section);
    if (s == schema.end()) throw ConfigError(path.string() + ": unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      auto k = s->second.find(key);
      if (k == s->second.end()) throw ConfigError(path.string() + ": unknown key " + section + "." + key);
      k->second(value.data());
    }
  }
  if (!profile.empty()) c.parser.profile = parse_profile(profile);
  if (extractor == "identity") {
    c.extractor = ExtractorKind::kIdentity;
  } else if (!extractor.empty() && extractor != "convstack") {
    throw ConfigError("texture.extractor must be convstack or identity, got '" + extractor + "'");
  }
  c.parser.num_classes = c.num_classes;
  if (c.workspace.empty()) throw ConfigError(path.string() + ": paths.workspace is required");
  validate(c);
  return c;
}

void validate(const PipelineConfig& cfg) {
  if (cfg.num_classes < 2 || cfg.num_classes > 256) throw ConfigError("general.num_classes must be in 2..256");
  if (cfg.toy.photos < 1 || cfg.toy.caricatures < 1 || cfg.toy.eval < 1 || cfg.toy.size < kMinImageSide ||
      cfg.toy.size % 8 != 0) {
    throw ConfigError("toy sizes must be positive and the image size a multiple of 8 of at least 32");
  }
  validate(cfg.shape);
  validate(cfg.texture);
  validate(cfg.parser);
}

std::uint64_t stage_seed(std::uint64_t global, const std::string& stage) {
  const auto h = sha256_hex(std::to_string(global) + "/" + stage);
  return std::stoull(h.substr(0, 15), nullptr, 16);
}

}  // namespace cari
