// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "c3po/ops.hpp"
#include "gradcheck.hpp"

using namespace c3po;
using c3po::testing::all_indices;
using c3po::testing::gradcheck;
using c3po::testing::project;
using c3po::testing::random_tensor;

namespace {

// Direct seven-loop convolution.
std::vector<double> naive_conv(const Tensor<double>& x, const Tensor<double>& w,
                               const Tensor<double>& b, int stride, int pad, int dil) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  const int oh = conv_output_size(xs.h, ws.h, stride, pad, dil);
  const int ow = conv_output_size(xs.w, ws.w, stride, pad, dil);
  std::vector<double> out(static_cast<std::size_t>(xs.n) * ws.n * oh * ow);
  std::size_t o = 0;
  for (int n = 0; n < xs.n; ++n)
    for (int co = 0; co < ws.n; ++co)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          double acc = b.defined() ? b.at(0, co, 0, 0) : 0.0;
          for (int ci = 0; ci < xs.c; ++ci)
            for (int ky = 0; ky < ws.h; ++ky)
              for (int kx = 0; kx < ws.w; ++kx) {
                const int iy = y * stride - pad + ky * dil;
                const int ix = xx * stride - pad + kx * dil;
                if (iy < 0 || iy >= xs.h || ix < 0 || ix >= xs.w) continue;
                acc += x.at(n, ci, iy, ix) * w.at(co, ci, ky, kx);
              }
          out[o++] = acc;
        }
  return out;
}

bool same_bits(float a, float b) { return std::memcmp(&a, &b, sizeof(float)) == 0; }

}  // namespace

TEST_CASE("conv2d matches the naive loop") {
  Rng rng(1);
  struct Case {
    int k, stride, pad, dil, h, w;
  };
  for (const Case c : {Case{3, 1, 1, 1, 7, 6}, Case{3, 2, 1, 1, 8, 8}, Case{1, 1, 0, 1, 5, 4},
                       Case{3, 1, 2, 2, 9, 7}, Case{1, 2, 0, 1, 6, 6}, Case{3, 1, 0, 1, 5, 5}}) {
    CAPTURE(c.k);
    CAPTURE(c.stride);
    CAPTURE(c.dil);
    auto x = random_tensor<double>({2, 3, c.h, c.w}, rng);
    auto w = random_tensor<double>({4, 3, c.k, c.k}, rng);
    auto b = random_tensor<double>({1, 4, 1, 1}, rng);
    auto y = conv2d(x, ConvParams<double>{w, b, c.stride, c.pad, c.dil});
    const auto ref = naive_conv(x, w, b, c.stride, c.pad, c.dil);
    REQUIRE(y.numel() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.data()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d without bias and shape errors") {
  Rng rng(2);
  auto x = random_tensor<double>({1, 2, 4, 4}, rng);
  auto w = random_tensor<double>({3, 2, 3, 3}, rng);
  auto y = conv2d(x, ConvParams<double>{w, {}, 1, 1, 1});
  const auto ref = naive_conv(x, w, {}, 1, 1, 1);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.data()[i] == doctest::Approx(ref[i]));
  auto bad = random_tensor<double>({3, 5, 3, 3}, rng);
  CHECK_THROWS_AS((void)conv2d(x, ConvParams<double>{bad, {}, 1, 1, 1}), ShapeError);
}

TEST_CASE("conv2d gradients (double)") {
  Rng rng(3);
  for (int stride : {1, 2})
    for (int k : {1, 3}) {
      auto x = random_tensor<double>({2, 2, 6, 5}, rng);
      auto w = random_tensor<double>({3, 2, k, k}, rng);
      auto b = random_tensor<double>({1, 3, 1, 1}, rng);
      const int pad = k / 2;
      auto loss = [&] { return project(conv2d(x, ConvParams<double>{w, b, stride, pad, 1})); };
      CHECK(gradcheck<double>(loss, x, all_indices(x.numel())) < 1e-5);
      CHECK(gradcheck<double>(loss, w, all_indices(w.numel())) < 1e-5);
      CHECK(gradcheck<double>(loss, b, all_indices(b.numel())) < 1e-5);
    }
  auto x = random_tensor<double>({1, 2, 9, 9}, rng);
  auto w = random_tensor<double>({2, 2, 3, 3}, rng);
  auto dilated = [&] { return project(conv2d(x, ConvParams<double>{w, {}, 1, 2, 2})); };
  CHECK(gradcheck<double>(dilated, x, all_indices(x.numel())) < 1e-5);
  CHECK(gradcheck<double>(dilated, w, all_indices(w.numel())) < 1e-5);
}

TEST_CASE("conv2d gradients (float)") {
  Rng rng(4);
  auto x = random_tensor<float>({1, 2, 5, 5}, rng);
  auto w = random_tensor<float>({2, 2, 3, 3}, rng);
  auto loss = [&] { return project(conv2d(x, ConvParams<float>{w, {}, 1, 1, 1})); };
  CHECK(gradcheck<float>(loss, w, all_indices(w.numel()), 1e-2) < 1e-2);
}

TEST_CASE("elementwise op gradients") {
  Rng rng(5);
  const Shape s{2, 3, 4, 4};
  auto a = random_tensor<double>(s, rng);
  auto b = random_tensor<double>(s, rng);
  const auto idx = all_indices(a.numel());
  using F = std::function<Tensor<double>()>;
  for (const F& f : {F([&] { return project(relu(a)); }), F([&] { return project(add(a, b)); }),
                     F([&] { return project(sub(a, b)); }),
                     F([&] { return project(maximum(a, b)); }),
                     F([&] { return project(minimum(a, b)); }),
                     F([&] { return sum(relu(sub(a, b))); })}) {
    CHECK(gradcheck<double>(f, a, idx) < 1e-5);
    CHECK(gradcheck<double>(f, b, idx) < 1e-5);
  }
}

TEST_CASE("resampling and channel op gradients") {
  Rng rng(6);
  auto x = random_tensor<double>({2, 3, 4, 5}, rng);
  auto y = random_tensor<double>({2, 2, 4, 5}, rng);
  auto g = random_tensor<double>({2, 3, 1, 1}, rng);
  const auto idx = all_indices(x.numel());
  CHECK(gradcheck<double>([&] { return project(upsample_bilinear(x, 2)); }, x, idx) < 1e-5);
  CHECK(gradcheck<double>([&] { return project(upsample_bilinear(x, 4)); }, x, idx) < 1e-5);
  CHECK(gradcheck<double>([&] { return project(upsample_pow2(x, 8)); }, x, idx) < 1e-5);
  CHECK(gradcheck<double>([&] { return project(global_avg_pool(x)); }, x, idx) < 1e-5);
  CHECK(gradcheck<double>([&] { return project(slice_channels(x, 1, 2)); }, x, idx) < 1e-5);
  CHECK(gradcheck<double>([&] { return project(broadcast_spatial(g, 3, 2)); }, g,
                          all_indices(g.numel())) < 1e-5);
  auto cat = [&] {
    std::vector<Tensor<double>> parts{x, y};
    return project(concat_channels<double>(parts));
  };
  CHECK(gradcheck<double>(cat, x, idx) < 1e-5);
  CHECK(gradcheck<double>(cat, y, all_indices(y.numel())) < 1e-5);
}

TEST_CASE("softmax cross entropy gradient and value") {
  Rng rng(7);
  auto logits = random_tensor<double>({2, 3, 3, 4}, rng, -2.0, 2.0);
  LabelMap labels{2, 3, 4, {}};
  for (std::size_t i = 0; i < labels.size(); ++i) labels.labels.push_back(static_cast<std::uint8_t>(i % 3));
  const std::vector<double> w{0.2, 0.3, 0.5};
  auto loss = [&] { return softmax_cross_entropy(logits, labels, w); };
  CHECK(gradcheck<double>(loss, logits, all_indices(logits.numel())) < 1e-5);

  // Value oracle: mean over pixels of -w[y] log p_y.
  double expected = 0.0;
  const int hw = 12;
  for (int n = 0; n < 2; ++n)
    for (int p = 0; p < hw; ++p) {
      double z = 0.0;
      for (int c = 0; c < 3; ++c) z += std::exp(logits.data()[(n * 3 + c) * hw + p]);
      const int y = labels.labels[n * hw + p];
      expected += -w[y] * (logits.data()[(n * 3 + y) * hw + p] - std::log(z));
    }
  expected /= 2 * hw;
  CHECK(loss().item() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("bilinear upsample hand values") {
  Tensor<double> x({1, 1, 1, 2}, std::vector<double>{0.0, 1.0});
  auto y = upsample_bilinear(x, 2);
  REQUIRE(y.shape() == Shape{1, 1, 2, 4});
  const std::vector<double> row{0.0, 0.25, 0.75, 1.0};
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c) CHECK(y.at(0, 0, r, c) == doctest::Approx(row[c]));
  CHECK_THROWS((void)upsample_bilinear(x, 3));
}

TEST_CASE("argmax ties go to the lower class") {
  Tensor<float> logits({1, 3, 1, 2}, std::vector<float>{1, 0, 1, 5, 0, 5});
  auto m = argmax_channels(logits);
  CHECK(m.labels == std::vector<std::uint8_t>{0, 1});
}

TEST_CASE("exchange identity holds bit-exactly") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    auto a = random_tensor<float>({1, 4, 8, 8}, rng, -3.0, 3.0, false);
    auto b = random_tensor<float>({1, 4, 8, 8}, rng, -3.0, 3.0, false);
    auto r = add(relu(sub(a, b)), relu(sub(b, a)));
    auto m = sub(maximum(a, b), minimum(a, b));
    for (std::size_t i = 0; i < a.numel(); ++i) {
      const float abs = std::fabs(a.data()[i] - b.data()[i]);
      CHECK(same_bits(r.data()[i], abs));
      CHECK(same_bits(m.data()[i], abs));
    }
  }
}

TEST_CASE("backward contract") {
  Rng rng(9);
  auto x = random_tensor<double>({1, 1, 2, 2}, rng);
  CHECK_THROWS((void)backward(relu(x)));  // not scalar
  auto l = sum(relu(x));
  backward(l);
  CHECK(x.has_grad());
  CHECK_THROWS((void)backward(l));  // already swept
  Tensor<double> c({1, 1, 1, 1}, 2.0);
  CHECK_THROWS((void)backward(sum(c)));  // untracked
}

TEST_CASE("no-grad guard records no graph") {
  Rng rng(10);
  auto x = random_tensor<double>({1, 1, 2, 2}, rng);
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    auto y = relu(x);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(grad_enabled());
  CHECK(relu(x).requires_grad());
}

TEST_CASE("gradient accumulates across uses") {
  Tensor<double> x({1, 1, 1, 1}, 1.5, true);
  backward(sum(add(x, x)));
  REQUIRE(x.has_grad());
  CHECK(x.grad()[0] == 2.0);
}
