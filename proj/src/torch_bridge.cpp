#include "cari/torch_bridge.hpp"

#include "cari/errors.hpp"

namespace cari {

torch::Tensor to_tensor(const Image& img) {
  return torch::from_blob(const_cast<float*>(img.pixels.data()), {3, img.height, img.width}, torch::kFloat32).clone();
}

torch::Tensor to_tensor(const LabelMap& lbl) {
  return torch::from_blob(const_cast<std::uint8_t*>(lbl.classes.data()), {lbl.height, lbl.width}, torch::kUInt8)
      .to(torch::kInt64);
}

torch::Tensor to_tensor(const LandmarkMap& map) {
  return torch::from_blob(const_cast<std::uint8_t*>(map.data.data()), {map.channels, map.height, map.width},
                          torch::kUInt8)
      .to(torch::kFloat32);
}

torch::Tensor stack_images(std::span<const Image> imgs) {
  std::vector<torch::Tensor> ts;
  ts.reserve(imgs.size());
  for (const auto& im : imgs) ts.push_back(to_tensor(im));
  return torch::stack(ts);
}

Image to_image(const torch::Tensor& t) {
  auto x = t.detach();
  if (x.dim() == 4) x = x.squeeze(0);
  if (x.dim() != 3 || x.size(0) != 3) throw ArgumentError("expected a [3,H,W] tensor");
  x = x.clamp(0.0, 1.0).to(torch::kFloat32).contiguous();
  Image img(static_cast<int>(x.size(1)), static_cast<int>(x.size(2)));
  std::copy(x.data_ptr<float>(), x.data_ptr<float>() + x.numel(), img.pixels.begin());
  return img;
}

LabelMap to_label_map(const torch::Tensor& t, int num_classes) {
  auto x = t.detach().to(torch::kUInt8).contiguous();
  if (x.dim() != 2) throw ArgumentError("expected a [H,W] tensor");
  LabelMap lbl(static_cast<int>(x.size(0)), static_cast<int>(x.size(1)), num_classes);
  std::copy(x.data_ptr<std::uint8_t>(), x.data_ptr<std::uint8_t>() + x.numel(), lbl.classes.begin());
  return lbl;
}

torch::Tensor one_hot(int index, int count) {
  if (index < 0 || index >= count) throw ArgumentError("condition index out of range");
  auto v = torch::zeros({count});
  v[index] = 1.0;
  return v;
}

torch::Tensor broadcast_condition(const torch::Tensor& cond, int64_t height, int64_t width) {
  return cond.view({cond.size(0), cond.size(1), 1, 1}).expand({cond.size(0), cond.size(1), height, width});
}

void seed_torch(std::uint64_t seed) { torch::manual_seed(seed); }

}  // namespace cari
