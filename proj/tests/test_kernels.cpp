#include "doctest.h"

#include <complex>

#include "simr/kernels.hpp"
#include "simr/ops.hpp"
#include "support.hpp"

using namespace simr;
using simr::testing::max_abs_diff;
using simr::testing::random_tensor;

TEST_CASE("parallel convolution matches the reference loops") {
  const kernels::ConvDims d{5, 7, 12, 10};
  auto in = random_tensor({d.c_in, d.h, d.w}, 1);
  auto k = random_tensor({d.c_out, d.c_in, 3, 3}, 2);
  auto b = random_tensor({d.c_out}, 3);
  auto go = random_tensor({d.c_out, d.h, d.w}, 4);

  Tensor<double> out({d.c_out, d.h, d.w}), ref({d.c_out, d.h, d.w});
  kernels::conv3x3_periodic_forward(d, in.data(), k.data(), b.data(), out.data());
  kernels::reference::conv3x3_periodic_forward(d, in.data(), k.data(), b.data(), ref.data());
  CHECK(max_abs_diff(out, ref) < 1e-12);

  Tensor<double> gi(in.shape()), gk(k.shape()), gb(b.shape());
  Tensor<double> ri(in.shape()), rk(k.shape()), rb(b.shape());
  kernels::conv3x3_periodic_backward(d, in.data(), k.data(), go.data(), gi.data(), gk.data(), gb.data());
  kernels::reference::conv3x3_periodic_backward(d, in.data(), k.data(), go.data(), ri.data(), rk.data(), rb.data());
  CHECK(max_abs_diff(gi, ri) < 1e-12);
  CHECK(max_abs_diff(gk, rk) < 1e-12);
  CHECK(max_abs_diff(gb, rb) < 1e-12);
}

TEST_CASE("convolution wraps around the borders") {
  const kernels::ConvDims d{1, 1, 4, 4};
  Tensor<double> in({1, 4, 4}), k({1, 1, 3, 3}), b({1}), out({1, 4, 4});
  in.at(0, 0, 0) = 1.0;
  k[0] = 1.0;  // tap (-1, -1)
  kernels::conv3x3_periodic_forward(d, in.data(), k.data(), b.data(), out.data());
  CHECK(out.at(0, 1, 1) == 1.0);
  k.fill(0.0);
  k[8] = 1.0;  // tap (+1, +1)
  kernels::conv3x3_periodic_forward(d, in.data(), k.data(), b.data(), out.data());
  CHECK(out.at(0, 3, 3) == 1.0);
  double total = 0.0;
  for (double v : out.values()) total += v;
  CHECK(total == 1.0);
}

TEST_CASE("backward kernels accumulate") {
  const kernels::ConvDims d{2, 2, 4, 4};
  auto in = random_tensor({2, 4, 4}, 5);
  auto k = random_tensor({2, 2, 3, 3}, 6);
  auto go = random_tensor({2, 4, 4}, 7);
  Tensor<double> once(in.shape()), twice(in.shape()), gk(k.shape()), gb({2});
  kernels::conv3x3_periodic_backward(d, in.data(), k.data(), go.data(), once.data(), gk.data(), gb.data());
  kernels::conv3x3_periodic_backward(d, in.data(), k.data(), go.data(), twice.data(), gk.data(), gb.data());
  kernels::conv3x3_periodic_backward(d, in.data(), k.data(), go.data(), twice.data(), gk.data(), gb.data());
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == doctest::Approx(2.0 * once[i]));
}

TEST_CASE("pointwise map matches the reference") {
  const kernels::PointwiseDims d{6, 4, 50};
  auto in = random_tensor({d.c_in, d.pixels}, 8);
  auto w = random_tensor({d.c_out, d.c_in}, 9);
  auto b = random_tensor({d.c_out}, 10);
  Tensor<double> out({d.c_out, d.pixels}), ref({d.c_out, d.pixels});
  kernels::pointwise_forward(d, in.data(), w.data(), b.data(), out.data());
  kernels::reference::pointwise_forward(d, in.data(), w.data(), b.data(), ref.data());
  CHECK(max_abs_diff(out, ref) < 1e-12);

  auto inf = in.cast<float>(), wf = w.cast<float>(), bf = b.cast<float>();
  Tensor<float> outf({d.c_out, d.pixels});
  kernels::pointwise_forward(d, inf.data(), wf.data(), bf.data(), outf.data());
  CHECK(max_abs_diff(outf.cast<double>(), ref) < 1e-5);
}

TEST_CASE("separable resize matches the reference") {
  auto rh = interp_matrix<double>(6, 12, InterpKind::bicubic);
  auto rw = interp_matrix<double>(5, 8, InterpKind::bilinear);
  auto in = random_tensor({3, 6, 5}, 11);
  Tensor<double> out({3, 12, 8}), ref({3, 12, 8});
  kernels::separable_apply(3, rh, rw, in.data(), out.data());
  kernels::reference::separable_apply(3, rh, rw, in.data(), ref.data());
  CHECK(max_abs_diff(out, ref) < 1e-12);

  // <R x, y> = <x, R^T y>
  auto y = random_tensor({3, 12, 8}, 12);
  Tensor<double> back(in.shape());
  kernels::separable_apply_transpose(3, rh, rw, y.data(), back.data());
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += out[i] * y[i];
  for (std::size_t i = 0; i < in.size(); ++i) rhs += in[i] * back[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("spectral mixing matches the reference") {
  const kernels::ModeBox box{16, 16, 4};
  const std::size_t ci = 3, co = 5, hw = box.h * box.half_w();
  auto vhat = random_tensor({ci, hw, 2}, 13);
  auto w = random_tensor({co, ci, box.modes(), 2}, 14);
  auto gate = random_tensor({box.modes()}, 15, 0.0, 1.0);
  Tensor<double> acc({co, box.modes(), 2}), out({co, hw, 2}), ref({co, hw, 2});
  const auto c = [](Tensor<double>& t) { return reinterpret_cast<std::complex<double>*>(t.data()); };
  kernels::spectral_mix_forward(box, ci, co, c(vhat), c(w), gate.data(), c(acc), c(out));
  kernels::reference::spectral_mix_forward(box, ci, co, c(vhat), c(w), gate.data(), c(ref));
  CHECK(max_abs_diff(out, ref) < 1e-12);
}
