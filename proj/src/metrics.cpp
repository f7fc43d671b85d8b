#include "cari/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "cari/errors.hpp"

namespace cari {

ConfusionMatrix::ConfusionMatrix(int num_classes) : classes_(num_classes) {
  if (num_classes < 2 || num_classes > 256) throw ArgumentError("confusion matrix needs 2..256 classes");
  counts_.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto v : counts_) t += v;
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(int c) const {
  std::uint64_t t = 0;
  for (int j = 0; j < classes_; ++j) t += at(c, j);
  return t;
}

std::uint64_t ConfusionMatrix::col_sum(int c) const {
  std::uint64_t t = 0;
  for (int i = 0; i < classes_; ++i) t += at(i, c);
  return t;
}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& gt) {
  if (pred.height != gt.height || pred.width != gt.width || pred.classes.size() != gt.classes.size()) {
    throw ArgumentError("prediction and ground truth differ in size");
  }
  for (std::size_t i = 0; i < pred.classes.size(); ++i) {
    if (pred.classes[i] >= classes_ || gt.classes[i] >= classes_) {
      throw ArgumentError("label value " + std::to_string(std::max(pred.classes[i], gt.classes[i])) + " >= C=" +
                          std::to_string(classes_));
    }
  }
  for (std::size_t i = 0; i < pred.classes.size(); ++i) {
    ++counts_[static_cast<std::size_t>(gt.classes[i]) * classes_ + pred.classes[i]];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw ArgumentError("cannot merge confusion matrices of different sizes");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

ConfusionMatrix accumulate(ConfusionMatrix cm, const LabelMap& pred, const LabelMap& gt) {
  cm.accumulate(pred, gt);
  return cm;
}

int IoUReport::present() const {
  int n = 0;
  for (const auto& v : per_class) n += v.has_value();
  return n;
}

namespace {

void fill_mean(IoUReport& r) {
  double sum = 0;
  int n = 0;
  for (const auto& v : r.per_class) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  r.miou = n ? sum / n : 0.0;
}

}  // namespace

IoUReport iou_report(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw EmptyEvaluationError("confusion matrix is empty");
  IoUReport r;
  for (int k = 0; k < kNumEvalClasses; ++k) {
    const int c = k + 1;
    if (c >= cm.num_classes()) continue;
    const auto tp = cm.at(c, c);
    const auto rows = cm.row_sum(c), cols = cm.col_sum(c);
    r.gt_pixels[k] = rows;
    r.pred_pixels[k] = cols;
    const auto uni = rows + cols - tp;
    if (uni > 0) r.per_class[k] = static_cast<double>(tp) / static_cast<double>(uni);
  }
  fill_mean(r);
  return r;
}

IoUReport report_from_values(const std::array<double, kNumEvalClasses>& values) {
  IoUReport r;
  for (int k = 0; k < kNumEvalClasses; ++k) {
    if (!(values[k] >= 0.0 && values[k] <= 1.0)) throw ArgumentError("IoU values must lie in [0,1]");
    r.per_class[k] = values[k];
  }
  fill_mean(r);
  return r;
}

std::string format_cell(double value) {
  // Scaled to hundredths of a percent; the small offset absorbs binary
  // representation error (0.8901 * 10000 = 8900.9999...).
  const double hundredths = std::floor(value * 10000.0 + 1e-6);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", hundredths / 100.0);
  return buf;
}

RenderedTable render_table(const std::vector<std::pair<std::string, IoUReport>>& rows) {
  const auto& names = eval_class_names();
  std::ostringstream md, csv;
  md << "| method |";
  csv << "method";
  for (const auto& n : names) {
    md << ' ' << n << " |";
    csv << ',' << n;
  }
  md << " avg |\n|---|";
  csv << ",avg\n";
  for (std::size_t i = 0; i <= names.size(); ++i) md << "---|";
  md << '\n';
  for (const auto& [name, report] : rows) {
    md << "| " << name << " |";
    csv << name;
    for (const auto& v : report.per_class) {
      const auto cell = v ? format_cell(*v) : std::string("-");
      md << ' ' << cell << " |";
      csv << ',' << cell;
    }
    const auto avg = report.present() ? format_cell(report.miou) : std::string("-");
    md << ' ' << avg << " |\n";
    csv << ',' << avg << '\n';
  }
  return {md.str(), csv.str()};
}

}  // namespace cari
