#include "cari/warp_autograd.hpp"

#include "cari/errors.hpp"

namespace cari {

namespace {

using torch::autograd::AutogradContext;
using torch::autograd::tensor_list;

template <typename T>
std::span<T> span_of(torch::Tensor& t, int64_t offset, int64_t n) {
  return {t.data_ptr<T>() + offset, static_cast<std::size_t>(n)};
}

template <typename T>
std::span<const T> cspan_of(const torch::Tensor& t, int64_t offset, int64_t n) {
  return {t.data_ptr<T>() + offset, static_cast<std::size_t>(n)};
}

class WarpFunction : public torch::autograd::Function<WarpFunction> {
 public:
  static torch::Tensor forward(AutogradContext* ctx, torch::Tensor src, torch::Tensor flow) {
    src = src.contiguous();
    flow = flow.contiguous();
    ctx->save_for_backward({src, flow});
    const int64_t n = src.size(0), c = src.size(1), h = src.size(2), w = src.size(3);
    auto out = torch::empty_like(src);
    AT_DISPATCH_FLOATING_TYPES(src.scalar_type(), "warp_bilinear_forward", [&] {
      for (int64_t b = 0; b < n; ++b) {
        bilinear_forward<scalar_t>(cspan_of<scalar_t>(src, b * c * h * w, c * h * w), static_cast<int>(c),
                                   static_cast<int>(h), static_cast<int>(w),
                                   cspan_of<scalar_t>(flow, b * h * w * 2, h * w * 2),
                                   span_of<scalar_t>(out, b * c * h * w, c * h * w));
      }
    });
    return out;
  }

  static tensor_list backward(AutogradContext* ctx, tensor_list grad_outputs) {
    auto saved = ctx->get_saved_variables();
    const auto& src = saved[0];
    const auto& flow = saved[1];
    auto upstream = grad_outputs[0].contiguous();
    const int64_t n = src.size(0), c = src.size(1), h = src.size(2), w = src.size(3);
    auto grad_src = torch::zeros_like(src);
    auto grad_flow = torch::zeros_like(flow);
    AT_DISPATCH_FLOATING_TYPES(src.scalar_type(), "warp_bilinear_backward", [&] {
      for (int64_t b = 0; b < n; ++b) {
        bilinear_backward<scalar_t>(cspan_of<scalar_t>(src, b * c * h * w, c * h * w), static_cast<int>(c),
                                    static_cast<int>(h), static_cast<int>(w),
                                    cspan_of<scalar_t>(flow, b * h * w * 2, h * w * 2),
                                    cspan_of<scalar_t>(upstream, b * c * h * w, c * h * w),
                                    span_of<scalar_t>(grad_src, b * c * h * w, c * h * w),
                                    span_of<scalar_t>(grad_flow, b * h * w * 2, h * w * 2));
      }
    });
    return {grad_src, grad_flow};
  }
};

torch::Tensor matrix_tensor(int out, int ctrl, torch::ScalarType dtype) {
  auto m = interpolation_matrix(out, ctrl);
  return torch::from_blob(m.data(), {out, ctrl}, torch::kFloat64).clone().to(dtype);
}

}  // namespace

torch::Tensor warp_bilinear(const torch::Tensor& src, const torch::Tensor& flow) {
  TORCH_CHECK(src.dim() == 4 && flow.dim() == 4 && flow.size(3) == 2, "warp_bilinear: expected [N,C,H,W] and [N,H,W,2]");
  TORCH_CHECK(src.size(0) == flow.size(0) && src.size(2) == flow.size(1) && src.size(3) == flow.size(2),
              "warp_bilinear: source and flow shapes differ");
  TORCH_CHECK(src.scalar_type() == flow.scalar_type(), "warp_bilinear: source and flow dtypes differ");
  return WarpFunction::apply(src, flow);
}

torch::Tensor control_to_flow(const torch::Tensor& grid, int height, int width) {
  TORCH_CHECK(grid.dim() == 4 && grid.size(3) == 2, "control_to_flow: expected [N,Gh,Gw,2]");
  const auto wy = matrix_tensor(height, static_cast<int>(grid.size(1)), grid.scalar_type());
  const auto wx = matrix_tensor(width, static_cast<int>(grid.size(2)), grid.scalar_type());
  return torch::einsum("yr,nrcd,xc->nyxd", {wy, grid, wx});
}

ControlGrid to_control_grid(const torch::Tensor& grid, double bound) {
  auto g = grid.detach().to(torch::kFloat64).contiguous();
  ControlGrid cg(static_cast<int>(g.size(0)), static_cast<int>(g.size(1)), bound);
  std::copy(g.data_ptr<double>(), g.data_ptr<double>() + g.numel(), cg.offsets.begin());
  return cg;
}

DenseFlow to_dense_flow(const torch::Tensor& flow) {
  auto f = flow.detach().to(torch::kFloat64).contiguous();
  DenseFlow out(static_cast<int>(f.size(0)), static_cast<int>(f.size(1)));
  std::copy(f.data_ptr<double>(), f.data_ptr<double>() + f.numel(), out.data.begin());
  return out;
}

torch::Tensor to_tensor(const DenseFlow& flow) {
  return torch::from_blob(const_cast<double*>(flow.data.data()), {flow.height, flow.width, 2}, torch::kFloat64)
      .clone();
}

}  // namespace cari
