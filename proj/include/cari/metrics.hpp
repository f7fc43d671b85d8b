#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cari/image.hpp"

namespace cari {

/// counts[i][j] = pixels with ground truth i predicted as j.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes = kDefaultNumClasses);

  int num_classes() const { return classes_; }
  std::uint64_t at(int gt, int pred) const { return counts_[static_cast<std::size_t>(gt) * classes_ + pred]; }
  std::uint64_t total() const;
  std::uint64_t row_sum(int c) const;
  std::uint64_t col_sum(int c) const;

  /// Adds every pixel of one (pred, gt) pair. Throws ArgumentError on a size
  /// mismatch or a value >= num_classes().
  void accumulate(const LabelMap& pred, const LabelMap& gt);
  /// Adds another matrix of the same size.
  void merge(const ConfusionMatrix& other);

  bool operator==(const ConfusionMatrix& o) const = default;

 private:
  int classes_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix accumulate(ConfusionMatrix cm, const LabelMap& pred, const LabelMap& gt);

/// IoU over the nine foreground classes in table column order.
struct IoUReport {
  std::array<std::optional<double>, kNumEvalClasses> per_class{};  ///< empty when the union is zero
  double miou = 0;
  std::array<std::uint64_t, kNumEvalClasses> gt_pixels{};
  std::array<std::uint64_t, kNumEvalClasses> pred_pixels{};

  int present() const;
};

/// Throws EmptyEvaluationError on an all-zero matrix.
IoUReport iou_report(const ConfusionMatrix& cm);

/// Report from per-class IoUs in [0,1]; miou is their mean.
IoUReport report_from_values(const std::array<double, kNumEvalClasses>& values);

struct RenderedTable {
  std::string markdown;
  std::string csv;
};

/// Cell text for an IoU in [0,1]: x100, two decimals, extra digits dropped.
std::string format_cell(double value);

/// Columns: method, the nine classes, avg.
RenderedTable render_table(const std::vector<std::pair<std::string, IoUReport>>& rows);

}  // namespace cari
