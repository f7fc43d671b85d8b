#include "cari/grouping.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "cari/checksum.hpp"
#include "cari/errors.hpp"
#include "cari/image.hpp"

namespace cari {

namespace {

constexpr const char* kDefaultGrouping = R"(# 17-point scheme:
#  0 forehead top, 1 left cheek, 2 chin, 3 right cheek
#  4-5 left brow (outer, inner), 6-7 right brow (inner, outer)
#  8-9 left eye corners (outer, inner), 10-11 right eye corners (inner, outer)
#  12 nose tip
#  13 left mouth corner, 14 upper lip top, 15 right mouth corner, 16 lower lip bottom
face_contour polyline 0 1 2 3 0
brow_l polyline 4 5
brow_r polyline 6 7
eye_l closed-region 8 9
eye_r closed-region 10 11
nose polyline 9 12 10
mouth closed-region 13 14 15 16
)";

const char* kind_name(GroupKind k) { return k == GroupKind::kPolyline ? "polyline" : "closed-region"; }

}  // namespace

LandmarkGrouping::LandmarkGrouping(std::vector<LandmarkGroup> groups) : groups_(std::move(groups)) {
  if (groups_.empty()) throw ArgumentError("landmark grouping needs at least one group");
  std::set<std::string> names;
  for (const auto& g : groups_) {
    if (g.indices.empty()) throw ArgumentError("group '" + g.name + "' has no landmarks");
    for (int i : g.indices) {
      if (i < 0 || i >= kNumLandmarks) {
        throw ArgumentError("group '" + g.name + "' references landmark " + std::to_string(i));
      }
    }
    if (!names.insert(g.name).second) throw ArgumentError("duplicate group name '" + g.name + "'");
  }
}

LandmarkGrouping LandmarkGrouping::default_grouping() { return parse(kDefaultGrouping); }

LandmarkGrouping LandmarkGrouping::parse(const std::string& text) {
  std::vector<LandmarkGroup> groups;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    LandmarkGroup g;
    std::string kind;
    if (!(ls >> g.name)) continue;
    if (!(ls >> kind)) throw FormatError("grouping line " + std::to_string(lineno) + ": missing kind");
    if (kind == "polyline") {
      g.kind = GroupKind::kPolyline;
    } else if (kind == "closed-region") {
      g.kind = GroupKind::kClosedRegion;
    } else {
      throw FormatError("grouping line " + std::to_string(lineno) + ": unknown kind '" + kind + "'");
    }
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        g.indices.push_back(std::stoi(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw FormatError("grouping line " + std::to_string(lineno) + ": bad index '" + tok + "'");
      }
    }
    groups.push_back(std::move(g));
  }
  try {
    return LandmarkGrouping(std::move(groups));
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("grouping: ") + e.what());
  }
}

LandmarkGrouping LandmarkGrouping::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open grouping file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string LandmarkGrouping::to_text() const {
  std::ostringstream out;
  for (const auto& g : groups_) {
    out << g.name << ' ' << kind_name(g.kind);
    for (int i : g.indices) out << ' ' << i;
    out << '\n';
  }
  return out.str();
}

std::string LandmarkGrouping::hash() const { return sha256_hex(to_text()); }

}  // namespace cari
