#include "cari/condition.hpp"

#include "cari/errors.hpp"

namespace cari {

OneHotCondition::OneHotCondition(int index, int count) : index_(index), count_(count) {
  if (count < 1 || index < 0 || index >= count) {
    throw ArgumentError("condition index " + std::to_string(index) + " out of range for " + std::to_string(count));
  }
}

OneHotCondition OneHotCondition::from_vector(const std::vector<float>& bits) {
  int hot = -1;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == 1.0f) {
      if (hot >= 0) throw ArgumentError("condition has more than one hot entry");
      hot = static_cast<int>(i);
    } else if (bits[i] != 0.0f) {
      throw ArgumentError("condition entries must be 0 or 1");
    }
  }
  if (hot < 0) throw ArgumentError("condition has no hot entry");
  return OneHotCondition(hot, static_cast<int>(bits.size()));
}

std::vector<float> OneHotCondition::bits() const {
  std::vector<float> v(count_, 0.0f);
  v[index_] = 1.0f;
  return v;
}

torch::Tensor OneHotCondition::tensor() const {
  auto t = torch::zeros({1, count_});
  t[0][index_] = 1.0;
  return t;
}

}  // namespace cari
