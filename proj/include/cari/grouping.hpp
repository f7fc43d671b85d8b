#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace cari {

enum class GroupKind { kPolyline, kClosedRegion };

struct LandmarkGroup {
  std::string name;
  std::vector<int> indices;
  GroupKind kind = GroupKind::kPolyline;
  bool operator==(const LandmarkGroup&) const = default;
};

/// Which landmarks connect into which channel of a landmark map.
///
/// Text format, one group per line, `#` starts a comment:
///
///     <name> <polyline|closed-region> <index> <index> ...
class LandmarkGrouping {
 public:
  explicit LandmarkGrouping(std::vector<LandmarkGroup> groups);

  /// Face contour, brows, eyes, nose and mouth over the 17-point scheme.
  static LandmarkGrouping default_grouping();
  static LandmarkGrouping parse(const std::string& text);
  static LandmarkGrouping load(const std::filesystem::path& path);

  const std::vector<LandmarkGroup>& groups() const { return groups_; }
  int size() const { return static_cast<int>(groups_.size()); }
  std::string to_text() const;
  /// SHA-256 of the canonical text; stored in shape checkpoints.
  std::string hash() const;

  bool operator==(const LandmarkGrouping&) const = default;

 private:
  std::vector<LandmarkGroup> groups_;
};

}  // namespace cari
