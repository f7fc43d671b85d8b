#pragma once

#include <torch/torch.h>

#include <vector>

namespace cari {

/// One-hot conditional input: exactly one entry is 1.
class OneHotCondition {
 public:
  OneHotCondition(int index, int count);
  /// Throws ArgumentError unless `bits` holds exactly one 1 and zeros elsewhere.
  static OneHotCondition from_vector(const std::vector<float>& bits);

  int index() const { return index_; }
  int size() const { return count_; }
  std::vector<float> bits() const;
  torch::Tensor tensor() const;  ///< [1,count] float

 private:
  int index_;
  int count_;
};

using ShapeCondition = OneHotCondition;
using StyleCondition = OneHotCondition;

}  // namespace cari
