// SPDX-License-Identifier: Apache-2.0
#include "c3po/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace c3po {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Array = Eigen::Array<T, Eigen::Dynamic, 1>;
template <typename T>
using ArrayMap = Eigen::Map<Array<T>>;
template <typename T>
using ConstArrayMap = Eigen::Map<const Array<T>>;

template <typename T>
ConstArrayMap<T> view(const Buffer<T>& v) {
  return ConstArrayMap<T>(v.data(), static_cast<Eigen::Index>(v.size()));
}
template <typename T>
ArrayMap<T> view(Buffer<T>& v) {
  return ArrayMap<T>(v.data(), static_cast<Eigen::Index>(v.size()));
}

struct ConvGeometry {
  int batch, in_ch, in_h, in_w;
  int out_ch, kernel, stride, padding, dilation;
  int out_h, out_w;

  [[nodiscard]] Eigen::Index rows() const {
    return static_cast<Eigen::Index>(in_ch) * kernel * kernel;
  }
  [[nodiscard]] Eigen::Index positions() const {
    return static_cast<Eigen::Index>(out_h) * out_w;
  }
  [[nodiscard]] std::size_t in_plane() const { return static_cast<std::size_t>(in_h) * in_w; }
  /// 1x1, stride 1, no padding: the input sample already is the column matrix.
  [[nodiscard]] bool pointwise() const { return kernel == 1 && stride == 1 && padding == 0; }
};

// Column matrix of one sample: row = (c*k + ky)*k + kx, col = oy*Wo + ox.
template <typename T>
void im2col(const T* x, const ConvGeometry& g, RowMatrix<T>& cols) {
  cols.resize(g.rows(), g.positions());
  for (int c = 0; c < g.in_ch; ++c) {
    const T* plane = x + c * g.in_plane();
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        T* dst = cols.row((c * g.kernel + ky) * g.kernel + kx).data();
        for (int oy = 0; oy < g.out_h; ++oy) {
          T* out = dst + oy * g.out_w;
          const int iy = oy * g.stride - g.padding + ky * g.dilation;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(out, out + g.out_w, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.in_w;
          const int shift = kx * g.dilation - g.padding;
          if (g.stride == 1) {
            const int lo = std::clamp(-shift, 0, g.out_w);
            const int hi = std::clamp(g.in_w - shift, lo, g.out_w);
            std::fill(out, out + lo, T(0));
            std::copy(src + lo + shift, src + hi + shift, out + lo);
            std::fill(out + hi, out + g.out_w, T(0));
          } else {
            for (int ox = 0; ox < g.out_w; ++ox) {
              const int ix = ox * g.stride + shift;
              out[ox] = (ix >= 0 && ix < g.in_w) ? src[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_accumulate(const RowMatrix<T>& cols, const ConvGeometry& g, T* dx) {
  for (int c = 0; c < g.in_ch; ++c) {
    T* plane = dx + c * g.in_plane();
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        const T* src = cols.row((c * g.kernel + ky) * g.kernel + kx).data();
        const int shift = kx * g.dilation - g.padding;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ky * g.dilation;
          if (iy < 0 || iy >= g.in_h) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * g.in_w;
          const T* in = src + oy * g.out_w;
          if (g.stride == 1) {
            const int lo = std::clamp(-shift, 0, g.out_w);
            const int hi = std::clamp(g.in_w - shift, lo, g.out_w);
            for (int ox = lo; ox < hi; ++ox) dst[ox + shift] += in[ox];
          } else {
            for (int ox = 0; ox < g.out_w; ++ox) {
              const int ix = ox * g.stride + shift;
              if (ix >= 0 && ix < g.in_w) dst[ix] += in[ox];
            }
          }
        }
      }
    }
  }
}

void require_same(const std::string& op, const Shape& a, const Shape& b) {
  if (a != b) throw shape_mismatch(op, a, b);
}

template <typename T>
Tensor<T> binary_op(const std::string& name, const Tensor<T>& a, const Tensor<T>& b, int kind) {
  require_same(name, a.shape(), b.shape());
  const auto& an = a.node();
  const auto& bn = b.node();
  Buffer<T> out(a.numel());
  auto o = view(out);
  auto x = view(an->data);
  auto y = view(bn->data);
  switch (kind) {
    case 0: o = x + y; break;
    case 1: o = x - y; break;
    case 2: o = (x >= y).select(x, y); break;
    default: o = (x <= y).select(x, y); break;
  }
  return make_result<T>(a.shape(), std::move(out), {an, bn}, [an, bn, kind](Node<T>& self) {
    auto g = view(std::as_const(self.grad));
    auto x = view(std::as_const(an->data));
    auto y = view(std::as_const(bn->data));
    switch (kind) {
      case 0:
        if (an->requires_grad) view(an->ensure_grad()) += g;
        if (bn->requires_grad) view(bn->ensure_grad()) += g;
        break;
      case 1:
        if (an->requires_grad) view(an->ensure_grad()) += g;
        if (bn->requires_grad) view(bn->ensure_grad()) -= g;
        break;
      case 2:
        if (an->requires_grad) view(an->ensure_grad()) += (x >= y).select(g, T(0));
        if (bn->requires_grad) view(bn->ensure_grad()) += (x >= y).select(T(0), g);
        break;
      default:
        if (an->requires_grad) view(an->ensure_grad()) += (x <= y).select(g, T(0));
        if (bn->requires_grad) view(bn->ensure_grad()) += (x <= y).select(T(0), g);
        break;
    }
  });
}

struct AxisTable {
  std::vector<int> lo, hi;
  std::vector<double> w_lo, w_hi;
};

AxisTable bilinear_axis(int in, int factor) {
  const int out = in * factor;
  AxisTable t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.w_lo.resize(out);
  t.w_hi.resize(out);
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) / factor - 0.5;
    if (src < 0) src = 0;
    const int i0 = std::min(static_cast<int>(std::floor(src)), in - 1);
    const int i1 = std::min(i0 + 1, in - 1);
    const double frac = src - i0;
    t.lo[o] = i0;
    t.hi[o] = i1;
    t.w_lo[o] = 1.0 - frac;
    t.w_hi[o] = frac;
  }
  return t;
}

}  // namespace

int conv_output_size(int in, int kernel, int stride, int padding, int dilation) {
  return (in + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvParams<T>& params) {
  const Shape& xs = input.shape();
  const Shape& ws = params.weight.shape();
  if (ws.c != xs.c)
    throw ShapeError("conv2d: input " + xs.str() + " does not match weight " + ws.str());
  if (ws.h != ws.w || (ws.h != 1 && ws.h != 3))
    throw ShapeError("conv2d: kernel must be 1x1 or 3x3, weight " + ws.str());
  if (params.bias.defined() && params.bias.shape() != Shape{1, ws.n, 1, 1})
    throw ShapeError("conv2d: bias " + params.bias.shape().str() + " does not match weight " +
                     ws.str());
  if (params.stride < 1 || params.padding < 0 || params.dilation < 1)
    throw std::invalid_argument("conv2d: invalid stride/padding/dilation");

  ConvGeometry g{xs.n,
                 xs.c,
                 xs.h,
                 xs.w,
                 ws.n,
                 ws.h,
                 params.stride,
                 params.padding,
                 params.dilation,
                 conv_output_size(xs.h, ws.h, params.stride, params.padding, params.dilation),
                 conv_output_size(xs.w, ws.w, params.stride, params.padding, params.dilation)};
  if (g.out_h < 1 || g.out_w < 1)
    throw ShapeError("conv2d: empty output for input " + xs.str() + " and weight " + ws.str());

  const auto& xn = input.node();
  const auto& wn = params.weight.node();
  const auto bn = params.bias.defined() ? params.bias.node() : nullptr;

  // One GEMM per sample keeps each sample's arithmetic independent of its
  // position in the batch.
  using ConstRowMap = Eigen::Map<const RowMatrix<T>>;
  using RowMap = Eigen::Map<RowMatrix<T>>;
  const Shape out_shape{g.batch, g.out_ch, g.out_h, g.out_w};
  const Eigen::Index positions = g.positions();
  Buffer<T> out(out_shape.numel());
  ConstRowMap weight(wn->data.data(), g.out_ch, g.rows());
  RowMatrix<T> cols;
  for (int n = 0; n < g.batch; ++n) {
    const T* x = xn->data.data() + n * g.in_ch * g.in_plane();
    RowMap y(out.data() + static_cast<std::size_t>(n) * g.out_ch * positions, g.out_ch, positions);
    if (g.pointwise()) {
      y.noalias() = weight * ConstRowMap(x, g.in_ch, positions);
    } else {
      im2col(x, g, cols);
      y.noalias() = weight * cols;
    }
    if (bn)
      for (int o = 0; o < g.out_ch; ++o) y.row(o).array() += bn->data[o];
  }

  std::vector<std::shared_ptr<Node<T>>> parents{xn, wn};
  if (bn) parents.push_back(bn);
  return make_result<T>(out_shape, std::move(out), std::move(parents), [xn, wn, bn, g](Node<T>& self) {
    const Eigen::Index positions = g.positions();
    const bool need_w = wn->requires_grad;
    const bool need_x = xn->requires_grad;
    const bool need_b = bn && bn->requires_grad;
    ConstRowMap weight(wn->data.data(), g.out_ch, g.rows());
    RowMatrix<T> cols;
    RowMatrix<T> dcols;
    for (int n = 0; n < g.batch; ++n) {
      ConstRowMap dy(self.grad.data() + static_cast<std::size_t>(n) * g.out_ch * positions,
                     g.out_ch, positions);
      const T* x = xn->data.data() + n * g.in_ch * g.in_plane();
      if (need_b) {
        auto& db = bn->ensure_grad();
        for (int o = 0; o < g.out_ch; ++o) db[o] += dy.row(o).sum();
      }
      if (need_w) {
        RowMap dw(wn->ensure_grad().data(), g.out_ch, g.rows());
        if (g.pointwise()) {
          dw.noalias() += dy * ConstRowMap(x, g.in_ch, positions).transpose();
        } else {
          im2col(x, g, cols);
          dw.noalias() += dy * cols.transpose();
        }
      }
      if (need_x) {
        T* dx = xn->ensure_grad().data() + n * g.in_ch * g.in_plane();
        if (g.pointwise()) {
          RowMap(dx, g.in_ch, positions).noalias() += weight.transpose() * dy;
        } else {
          dcols.noalias() = weight.transpose() * dy;
          col2im_accumulate(dcols, g, dx);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  const auto& xn = x.node();
  Buffer<T> out(x.numel());
  view(out) = view(xn->data).max(T(0));
  return make_result<T>(x.shape(), std::move(out), {xn}, [xn](Node<T>& self) {
    view(xn->ensure_grad()) +=
        (view(std::as_const(xn->data)) > T(0)).select(view(std::as_const(self.grad)), T(0));
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op("add", a, b, 0);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op("sub", a, b, 1);
}
template <typename T>
Tensor<T> maximum(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op("max", a, b, 2);
}
template <typename T>
Tensor<T> minimum(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op("min", a, b, 3);
}

template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, int factor) {
  if (factor != 2 && factor != 4)
    throw std::invalid_argument("upsample_bilinear: factor must be 2 or 4, got " +
                                std::to_string(factor));
  const Shape& s = x.shape();
  const Shape os{s.n, s.c, s.h * factor, s.w * factor};
  const AxisTable ty = bilinear_axis(s.h, factor);
  const AxisTable tx = bilinear_axis(s.w, factor);
  const auto& xn = x.node();
  Buffer<T> out(os.numel());
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = xn->data.data() + p * s.plane();
    T* dst = out.data() + p * os.plane();
    for (int oy = 0; oy < os.h; ++oy) {
      const T* r0 = src + static_cast<std::size_t>(ty.lo[oy]) * s.w;
      const T* r1 = src + static_cast<std::size_t>(ty.hi[oy]) * s.w;
      const T wy0 = static_cast<T>(ty.w_lo[oy]);
      const T wy1 = static_cast<T>(ty.w_hi[oy]);
      for (int ox = 0; ox < os.w; ++ox) {
        const T wx0 = static_cast<T>(tx.w_lo[ox]);
        const T wx1 = static_cast<T>(tx.w_hi[ox]);
        dst[oy * os.w + ox] = wy0 * (wx0 * r0[tx.lo[ox]] + wx1 * r0[tx.hi[ox]]) +
                              wy1 * (wx0 * r1[tx.lo[ox]] + wx1 * r1[tx.hi[ox]]);
      }
    }
  }
  return make_result<T>(os, std::move(out), {xn}, [xn, s, os, ty, tx](Node<T>& self) {
    auto& dx = xn->ensure_grad();
    const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
    for (std::size_t p = 0; p < planes; ++p) {
      const T* g = self.grad.data() + p * os.plane();
      T* d = dx.data() + p * s.plane();
      for (int oy = 0; oy < os.h; ++oy) {
        T* r0 = d + static_cast<std::size_t>(ty.lo[oy]) * s.w;
        T* r1 = d + static_cast<std::size_t>(ty.hi[oy]) * s.w;
        const T wy0 = static_cast<T>(ty.w_lo[oy]);
        const T wy1 = static_cast<T>(ty.w_hi[oy]);
        for (int ox = 0; ox < os.w; ++ox) {
          const T v = g[oy * os.w + ox];
          const T wx0 = static_cast<T>(tx.w_lo[ox]);
          const T wx1 = static_cast<T>(tx.w_hi[ox]);
          r0[tx.lo[ox]] += wy0 * wx0 * v;
          r0[tx.hi[ox]] += wy0 * wx1 * v;
          r1[tx.lo[ox]] += wy1 * wx0 * v;
          r1[tx.hi[ox]] += wy1 * wx1 * v;
        }
      }
    }
  });
}

template <typename T>
Tensor<T> upsample_pow2(const Tensor<T>& x, int factor) {
  if (factor < 1 || (factor & (factor - 1)) != 0)
    throw std::invalid_argument("upsample_pow2: factor must be a power of two, got " +
                                std::to_string(factor));
  Tensor<T> y = x;
  for (; factor > 1; factor /= 2) y = upsample_bilinear(y, 2);
  return y;
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> inputs) {
  if (inputs.empty()) throw std::invalid_argument("concat_channels: no inputs");
  if (inputs.size() == 1) return inputs.front();
  const Shape& first = inputs.front().shape();
  int channels = 0;
  std::vector<std::shared_ptr<Node<T>>> parents;
  for (const auto& t : inputs) {
    const Shape& s = t.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w)
      throw shape_mismatch("concat_channels", first, s);
    channels += s.c;
    parents.push_back(t.node());
  }
  const Shape os{first.n, channels, first.h, first.w};
  Buffer<T> out(os.numel());
  const std::size_t plane = first.plane();
  for (int n = 0; n < first.n; ++n) {
    std::size_t offset = static_cast<std::size_t>(n) * channels * plane;
    for (const auto& t : inputs) {
      const std::size_t len = static_cast<std::size_t>(t.shape().c) * plane;
      const T* src = t.node()->data.data() + static_cast<std::size_t>(n) * len;
      std::copy(src, src + len, out.data() + offset);
      offset += len;
    }
  }
  return make_result<T>(os, std::move(out), parents, [parents, os](Node<T>& self) {
    const std::size_t plane = os.plane();
    for (int n = 0; n < os.n; ++n) {
      std::size_t offset = static_cast<std::size_t>(n) * os.c * plane;
      for (const auto& p : parents) {
        const std::size_t len = static_cast<std::size_t>(p->shape.c) * plane;
        if (p->requires_grad) {
          T* dst = p->ensure_grad().data() + static_cast<std::size_t>(n) * len;
          const T* g = self.grad.data() + offset;
          for (std::size_t i = 0; i < len; ++i) dst[i] += g[i];
        }
        offset += len;
      }
    }
  });
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int begin, int count) {
  const Shape& s = x.shape();
  if (begin < 0 || count < 1 || begin + count > s.c)
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + s.str());
  const Shape os{s.n, count, s.h, s.w};
  const auto& xn = x.node();
  Buffer<T> out(os.numel());
  const std::size_t len = static_cast<std::size_t>(count) * s.plane();
  for (int n = 0; n < s.n; ++n) {
    const T* src = xn->data.data() + (static_cast<std::size_t>(n) * s.c + begin) * s.plane();
    std::copy(src, src + len, out.data() + n * len);
  }
  return make_result<T>(os, std::move(out), {xn}, [xn, s, begin, len](Node<T>& self) {
    auto& dx = xn->ensure_grad();
    for (int n = 0; n < s.n; ++n) {
      T* dst = dx.data() + (static_cast<std::size_t>(n) * s.c + begin) * s.plane();
      const T* g = self.grad.data() + n * len;
      for (std::size_t i = 0; i < len; ++i) dst[i] += g[i];
    }
  });
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  const Shape& s = x.shape();
  const Shape os{s.n, s.c, 1, 1};
  const auto& xn = x.node();
  const auto plane = static_cast<Eigen::Index>(s.plane());
  Buffer<T> out(os.numel());
  for (std::size_t p = 0; p < out.size(); ++p)
    out[p] = ConstArrayMap<T>(xn->data.data() + p * plane, plane).sum() / static_cast<T>(plane);
  return make_result<T>(os, std::move(out), {xn}, [xn, plane](Node<T>& self) {
    auto& dx = xn->ensure_grad();
    for (std::size_t p = 0; p < self.grad.size(); ++p)
      ArrayMap<T>(dx.data() + p * plane, plane) += self.grad[p] / static_cast<T>(plane);
  });
}

template <typename T>
Tensor<T> broadcast_spatial(const Tensor<T>& x, int height, int width) {
  const Shape& s = x.shape();
  if (s.h != 1 || s.w != 1) throw ShapeError("broadcast_spatial: expected (N,C,1,1), got " + s.str());
  const Shape os{s.n, s.c, height, width};
  const auto& xn = x.node();
  const auto plane = static_cast<Eigen::Index>(os.plane());
  Buffer<T> out(os.numel());
  for (std::size_t p = 0; p < xn->data.size(); ++p)
    ArrayMap<T>(out.data() + p * plane, plane).setConstant(xn->data[p]);
  return make_result<T>(os, std::move(out), {xn}, [xn, plane](Node<T>& self) {
    auto& dx = xn->ensure_grad();
    for (std::size_t p = 0; p < dx.size(); ++p)
      dx[p] += ConstArrayMap<T>(self.grad.data() + p * plane, plane).sum();
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  const auto& xn = x.node();
  Buffer<T> out{view(xn->data).sum()};
  return make_result<T>(Shape{1, 1, 1, 1}, std::move(out), {xn}, [xn](Node<T>& self) {
    view(xn->ensure_grad()) += self.grad[0];
  });
}

template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& x, const Tensor<T>& coeffs) {
  require_same("weighted_sum", x.shape(), coeffs.shape());
  const auto& xn = x.node();
  const auto& cn = coeffs.node();
  Buffer<T> out{(view(xn->data) * view(cn->data)).sum()};
  return make_result<T>(Shape{1, 1, 1, 1}, std::move(out), {xn}, [xn, cn](Node<T>& self) {
    view(xn->ensure_grad()) += self.grad[0] * view(std::as_const(cn->data));
  });
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const LabelMap& labels,
                                std::span<const double> weights) {
  const Shape& s = logits.shape();
  if (labels.n != s.n || labels.h != s.h || labels.w != s.w || labels.size() != s.n * s.plane())
    throw ShapeError("softmax_cross_entropy: labels (" + std::to_string(labels.n) + "," +
                     std::to_string(labels.h) + "," + std::to_string(labels.w) +
                     ") do not match logits " + s.str());
  if (weights.size() != static_cast<std::size_t>(s.c))
    throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(weights.size()) +
                                " weights for " + std::to_string(s.c) + " classes");
  const auto& ln = logits.node();
  const std::size_t plane = s.plane();
  const double pixels = static_cast<double>(s.n) * plane;
  auto probs = std::make_shared<std::vector<double>>(s.numel());
  double total = 0.0;
  for (int n = 0; n < s.n; ++n) {
    const T* z = ln->data.data() + static_cast<std::size_t>(n) * s.c * plane;
    double* p = probs->data() + static_cast<std::size_t>(n) * s.c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      const int y = labels.labels[n * plane + i];
      if (y >= s.c)
        throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(y) +
                                " outside [0, " + std::to_string(s.c - 1) + "]");
      double peak = z[i];
      for (int c = 1; c < s.c; ++c) peak = std::max(peak, static_cast<double>(z[c * plane + i]));
      double denom = 0.0;
      for (int c = 0; c < s.c; ++c) {
        const double e = std::exp(static_cast<double>(z[c * plane + i]) - peak);
        p[c * plane + i] = e;
        denom += e;
      }
      for (int c = 0; c < s.c; ++c) p[c * plane + i] /= denom;
      const double log_p = static_cast<double>(z[y * plane + i]) - peak - std::log(denom);
      total -= weights[y] * log_p;
    }
  }
  Buffer<T> out{static_cast<T>(total / pixels)};
  std::vector<double> w(weights.begin(), weights.end());
  return make_result<T>(
      Shape{1, 1, 1, 1}, std::move(out), {ln}, [ln, s, labels, w, probs, pixels](Node<T>& self) {
        auto& dz = ln->ensure_grad();
        const std::size_t plane = s.plane();
        const double scale = static_cast<double>(self.grad[0]) / pixels;
        for (int n = 0; n < s.n; ++n) {
          const double* p = probs->data() + static_cast<std::size_t>(n) * s.c * plane;
          T* d = dz.data() + static_cast<std::size_t>(n) * s.c * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            const int y = labels.labels[n * plane + i];
            const double k = scale * w[y];
            for (int c = 0; c < s.c; ++c)
              d[c * plane + i] += static_cast<T>(k * (p[c * plane + i] - (c == y ? 1.0 : 0.0)));
          }
        }
      });
}

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits) {
  const Shape& s = logits.shape();
  const std::size_t plane = s.plane();
  Buffer<T> out(s.numel());
  const T* z0 = logits.data().data();
  for (int n = 0; n < s.n; ++n) {
    const T* z = z0 + static_cast<std::size_t>(n) * s.c * plane;
    T* p = out.data() + static_cast<std::size_t>(n) * s.c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      double peak = z[i];
      for (int c = 1; c < s.c; ++c) peak = std::max(peak, static_cast<double>(z[c * plane + i]));
      double denom = 0.0;
      for (int c = 0; c < s.c; ++c) denom += std::exp(static_cast<double>(z[c * plane + i]) - peak);
      for (int c = 0; c < s.c; ++c)
        p[c * plane + i] =
            static_cast<T>(std::exp(static_cast<double>(z[c * plane + i]) - peak) / denom);
    }
  }
  return Tensor<T>(s, std::move(out));
}

template <typename T>
LabelMap argmax_channels(const Tensor<T>& logits) {
  const Shape& s = logits.shape();
  const std::size_t plane = s.plane();
  LabelMap m{s.n, s.h, s.w, std::vector<std::uint8_t>(static_cast<std::size_t>(s.n) * plane)};
  const T* z0 = logits.data().data();
  for (int n = 0; n < s.n; ++n) {
    const T* z = z0 + static_cast<std::size_t>(n) * s.c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      int best = 0;
      T best_v = z[i];
      for (int c = 1; c < s.c; ++c) {
        if (z[c * plane + i] > best_v) {
          best_v = z[c * plane + i];
          best = c;
        }
      }
      m.labels[n * plane + i] = static_cast<std::uint8_t>(best);
    }
  }
  return m;
}

#define C3PO_INSTANTIATE_OPS(T)                                                           \
  template Tensor<T> conv2d(const Tensor<T>&, const ConvParams<T>&);                     \
  template Tensor<T> relu(const Tensor<T>&);                                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> maximum(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> minimum(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> upsample_bilinear(const Tensor<T>&, int);                            \
  template Tensor<T> upsample_pow2(const Tensor<T>&, int);                                \
  template Tensor<T> concat_channels(std::span<const Tensor<T>>);                         \
  template Tensor<T> slice_channels(const Tensor<T>&, int, int);                          \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                   \
  template Tensor<T> broadcast_spatial(const Tensor<T>&, int, int);                       \
  template Tensor<T> sum(const Tensor<T>&);                                               \
  template Tensor<T> weighted_sum(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> softmax_cross_entropy(const Tensor<T>&, const LabelMap&,             \
                                           std::span<const double>);                      \
  template Tensor<T> softmax_channels(const Tensor<T>&);                                  \
  template LabelMap argmax_channels(const Tensor<T>&);

C3PO_INSTANTIATE_OPS(float)
C3PO_INSTANTIATE_OPS(double)

}  // namespace c3po
