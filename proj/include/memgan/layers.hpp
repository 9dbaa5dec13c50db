#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "memgan/crossbar.hpp"
#include "memgan/error.hpp"
#include "memgan/matrix.hpp"
#include "memgan/random.hpp"
#include "memgan/tensor.hpp"

namespace memgan {

/// Supply voltage; the analog ReLU cannot exceed it.
inline constexpr double kDefaultVdd = 1.8;
/// Saturation level of the output tanh stage.
inline constexpr double kDefaultTanhScale = kDefaultVdd / 2.0;
/// Constant voltage on a crossbar's bias row.
inline constexpr double kBiasVoltage = 1.0;

enum class LayerKind { conv, deconv, meanpool, dense, relu, tanh, batchnorm, dropout };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::deconv: return "deconv";
    case LayerKind::meanpool: return "meanpool";
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::tanh: return "tanh";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::dropout: return "dropout";
  }
  return "?";
}

inline LayerKind layer_kind_from(const std::string& s) {
  for (auto k : {LayerKind::conv, LayerKind::deconv, LayerKind::meanpool, LayerKind::dense, LayerKind::relu,
                 LayerKind::tanh, LayerKind::batchnorm, LayerKind::dropout})
    if (s == to_string(k)) return k;
  throw Error(ErrorCategory::config, "unknown layer kind '" + s + "'");
}

/// One stage of a network. Convolution-like stages use (H, W, C) shapes;
/// `padding` trims (deconv) or zero-extends (conv) each border and
/// `output_padding` extends a deconv output at the bottom/right edge.
/// For meanpool, kernel is the pooling window. For relu/tanh, `level` is
/// the supply or saturation voltage; for dropout it is the drop rate.
/// A crossbar layer with `bias` has one extra last row driven by
/// kBiasVoltage.
struct LayerDesc {
  LayerKind kind = LayerKind::dense;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t filters = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t output_padding = 0;
  double level = 0.0;
  bool bias = false;
  Shape in_shape{};
  Shape out_shape{};

  bool has_crossbar() const noexcept {
    return kind == LayerKind::conv || kind == LayerKind::deconv || kind == LayerKind::dense;
  }
  /// Crossbar rows (inputs per output) for crossbar layers.
  std::size_t crossbar_rows() const { return input_rows() + (bias ? 1 : 0); }
  /// Rows fed from the layer input (excludes the bias row).
  std::size_t input_rows() const {
    if (kind == LayerKind::dense) return element_count(in_shape);
    return kernel_h * kernel_w * in_shape.at(2);
  }
  std::size_t crossbar_cols() const {
    if (kind == LayerKind::dense) return element_count(out_shape);
    return filters;
  }

  bool operator==(const LayerDesc&) const = default;
};

/// Output shape implied by the layer arithmetic.
inline Shape infer_out_shape(const LayerDesc& d) {
  const auto need_hwc = [&] {
    if (d.in_shape.size() != 3) throw Error(ErrorCategory::shape, std::string(to_string(d.kind)) + ": needs (H,W,C) input");
    if (d.kernel_h == 0 || d.kernel_w == 0 || d.stride == 0)
      throw Error(ErrorCategory::config, std::string(to_string(d.kind)) + ": kernel and stride must be positive");
  };
  switch (d.kind) {
    case LayerKind::conv: {
      need_hwc();
      const std::size_t h = d.in_shape[0] + 2 * d.padding, w = d.in_shape[1] + 2 * d.padding;
      if (h < d.kernel_h || w < d.kernel_w) throw Error(ErrorCategory::shape, "conv: kernel larger than padded input");
      return {(h - d.kernel_h) / d.stride + 1, (w - d.kernel_w) / d.stride + 1, d.filters};
    }
    case LayerKind::deconv: {
      need_hwc();
      const auto full = [&](std::size_t in, std::size_t k) {
        const std::size_t n = (in - 1) * d.stride + k + d.output_padding;
        if (n <= 2 * d.padding) throw Error(ErrorCategory::shape, "deconv: padding removes whole output");
        return n - 2 * d.padding;
      };
      return {full(d.in_shape[0], d.kernel_h), full(d.in_shape[1], d.kernel_w), d.filters};
    }
    case LayerKind::meanpool:
      need_hwc();
      if (d.in_shape[0] % d.kernel_h || d.in_shape[1] % d.kernel_w)
        throw Error(ErrorCategory::shape, "meanpool: window does not divide input");
      return {d.in_shape[0] / d.kernel_h, d.in_shape[1] / d.kernel_w, d.in_shape[2]};
    case LayerKind::dense:
      if (d.out_shape.empty()) throw Error(ErrorCategory::config, "dense: output shape required");
      return d.out_shape;
    default:
      return d.in_shape;
  }
}

// ---------------------------------------------------------------------------
// Patch lowering: every output pixel of a conv/deconv is one crossbar read of
// a gathered input vector ordered (ky, kx, c). `index` holds the flat input
// offset for each (pixel, row), -1 where the tap falls outside the input, or
// kBiasTap for the bias row.

inline constexpr std::int64_t kBiasTap = -2;

struct PatchMap {
  std::size_t out_h = 0;
  std::size_t out_w = 0;
  std::size_t rows = 0;
  std::vector<std::int64_t> index;
};

inline PatchMap conv_patch_map(const Shape& in, const LayerDesc& d) {
  const Shape out = infer_out_shape(d);
  PatchMap m{out[0], out[1], d.kernel_h * d.kernel_w * in[2] + (d.bias ? 1 : 0), {}};
  m.index.assign(m.out_h * m.out_w * m.rows, -1);
  const auto H = static_cast<std::int64_t>(in[0]), W = static_cast<std::int64_t>(in[1]);
  const auto C = in[2];
  for (std::size_t oy = 0; oy < m.out_h; ++oy)
    for (std::size_t ox = 0; ox < m.out_w; ++ox) {
      auto* row = m.index.data() + (oy * m.out_w + ox) * m.rows;
      if (d.bias) row[m.rows - 1] = kBiasTap;
      for (std::size_t ky = 0; ky < d.kernel_h; ++ky)
        for (std::size_t kx = 0; kx < d.kernel_w; ++kx) {
          const auto iy = static_cast<std::int64_t>(oy * d.stride + ky) - static_cast<std::int64_t>(d.padding);
          const auto ix = static_cast<std::int64_t>(ox * d.stride + kx) - static_cast<std::int64_t>(d.padding);
          if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
          for (std::size_t c = 0; c < C; ++c)
            row[(ky * d.kernel_w + kx) * C + c] = (iy * W + ix) * static_cast<std::int64_t>(C) + static_cast<std::int64_t>(c);
        }
    }
  return m;
}

/// Transposed convolution: input pixel (iy, ix) scatters to output
/// (iy*stride + ky - padding, ix*stride + kx - padding); gathered per output.
inline PatchMap deconv_patch_map(const Shape& in, const LayerDesc& d) {
  const Shape out = infer_out_shape(d);
  PatchMap m{out[0], out[1], d.kernel_h * d.kernel_w * in[2] + (d.bias ? 1 : 0), {}};
  m.index.assign(m.out_h * m.out_w * m.rows, -1);
  const auto H = static_cast<std::int64_t>(in[0]), W = static_cast<std::int64_t>(in[1]);
  const auto C = in[2];
  const auto s = static_cast<std::int64_t>(d.stride), p = static_cast<std::int64_t>(d.padding);
  for (std::size_t oy = 0; oy < m.out_h; ++oy)
    for (std::size_t ox = 0; ox < m.out_w; ++ox) {
      auto* row = m.index.data() + (oy * m.out_w + ox) * m.rows;
      if (d.bias) row[m.rows - 1] = kBiasTap;
      for (std::size_t ky = 0; ky < d.kernel_h; ++ky)
        for (std::size_t kx = 0; kx < d.kernel_w; ++kx) {
          const std::int64_t ny = static_cast<std::int64_t>(oy) + p - static_cast<std::int64_t>(ky);
          const std::int64_t nx = static_cast<std::int64_t>(ox) + p - static_cast<std::int64_t>(kx);
          if (ny < 0 || nx < 0 || ny % s || nx % s) continue;
          const std::int64_t iy = ny / s, ix = nx / s;
          if (iy >= H || ix >= W) continue;
          for (std::size_t c = 0; c < C; ++c)
            row[(ky * d.kernel_w + kx) * C + c] = (iy * W + ix) * static_cast<std::int64_t>(C) + static_cast<std::int64_t>(c);
        }
    }
  return m;
}

inline Tensor apply_patches(const Tensor& input, const PatchMap& map, const CrossbarArray& xbar, ReadoutMode mode,
                            LeakageNoise leak = {}) {
  if (xbar.rows() != map.rows)
    throw Error(ErrorCategory::shape, "crossbar rows " + std::to_string(xbar.rows()) + " != patch size " + std::to_string(map.rows));
  const std::size_t filters = xbar.cols();
  Tensor out({map.out_h, map.out_w, filters});
  std::vector<double> patch(map.rows);
  const std::size_t pixels = map.out_h * map.out_w;
  for (std::size_t p = 0; p < pixels; ++p) {
    const auto* idx = map.index.data() + p * map.rows;
    for (std::size_t r = 0; r < map.rows; ++r)
      patch[r] = idx[r] >= 0 ? input[static_cast<std::size_t>(idx[r])] : idx[r] == kBiasTap ? kBiasVoltage : 0.0;
    read_into(xbar, patch, std::span<double>(out.data().data() + p * filters, filters), mode, leak);
  }
  return out;
}

/// Gradients of an ideal patch layer. `weights` are the crossbar's
/// row-major effective weights; dx and dw are accumulated into.
inline void patches_backward(const Tensor& input, const PatchMap& map, const std::vector<double>& weights,
                             std::size_t filters, const Tensor& dy, Tensor* dx, Matrix* dw) {
  const std::size_t pixels = map.out_h * map.out_w;
  for (std::size_t p = 0; p < pixels; ++p) {
    const auto* idx = map.index.data() + p * map.rows;
    const double* g = dy.data().data() + p * filters;
    for (std::size_t r = 0; r < map.rows; ++r) {
      if (idx[r] == kBiasTap && dw) {
        double* dwr = dw->data().data() + r * filters;
        for (std::size_t f = 0; f < filters; ++f) dwr[f] += kBiasVoltage * g[f];
      }
      if (idx[r] < 0) continue;
      const auto at = static_cast<std::size_t>(idx[r]);
      const double* wr = weights.data() + r * filters;
      if (dw) {
        const double v = input[at];
        double* dwr = dw->data().data() + r * filters;
        for (std::size_t f = 0; f < filters; ++f) dwr[f] += v * g[f];
      }
      if (dx) {
        double s = 0.0;
        for (std::size_t f = 0; f < filters; ++f) s += wr[f] * g[f];
        (*dx)[at] += s;
      }
    }
  }
}

namespace detail {

inline void check_conv_like(const Tensor& input, const CrossbarArray& xbar, const LayerDesc& desc, const char* what) {
  if (input.shape().size() != 3) throw Error(ErrorCategory::shape, std::string(what) + ": input must be (H,W,C)");
  if (!desc.in_shape.empty() && desc.in_shape != input.shape())
    throw Error(ErrorCategory::shape, std::string(what) + ": input " + to_string(input.shape()) + " does not match layer " +
                                          to_string(desc.in_shape));
  if (xbar.rows() != desc.kernel_h * desc.kernel_w * input.channels() + (desc.bias ? 1 : 0) || xbar.cols() != desc.filters)
    throw Error(ErrorCategory::shape, std::string(what) + ": crossbar shape does not match kernel/filters");
}

inline LayerDesc with_input(LayerDesc desc, const Tensor& input) {
  desc.in_shape = input.shape();
  return desc;
}

}  // namespace detail

/// Cross-correlation of the input with the crossbar's kernels; each output
/// pixel is one crossbar read of its receptive-field patch.
inline Tensor conv2d(const Tensor& input, const CrossbarArray& xbar, const LayerDesc& desc, ReadoutMode mode,
                     LeakageNoise leak = {}) {
  detail::check_conv_like(input, xbar, desc, "conv2d");
  const LayerDesc d = detail::with_input(desc, input);
  return apply_patches(input, conv_patch_map(input.shape(), d), xbar, mode, leak);
}

/// Transposed convolution; in ideal mode the adjoint of conv2d for the
/// channel-transposed kernel (see transpose_kernel).
inline Tensor deconv2d(const Tensor& input, const CrossbarArray& xbar, const LayerDesc& desc, ReadoutMode mode,
                       LeakageNoise leak = {}) {
  detail::check_conv_like(input, xbar, desc, "deconv2d");
  const LayerDesc d = detail::with_input(desc, input);
  return apply_patches(input, deconv_patch_map(input.shape(), d), xbar, mode, leak);
}

/// Kernel matrix (rows (ky,kx,c_in), cols c_out) re-indexed to
/// (rows (ky,kx,c_out), cols c_in): a deconv with the result is the adjoint
/// of the conv with the input.
inline Matrix transpose_kernel(const Matrix& kernel, std::size_t kernel_h, std::size_t kernel_w, std::size_t in_channels) {
  const std::size_t out_channels = kernel.cols();
  if (kernel.rows() != kernel_h * kernel_w * in_channels) throw Error(ErrorCategory::shape, "transpose_kernel: bad kernel rows");
  Matrix t(kernel_h * kernel_w * out_channels, in_channels);
  for (std::size_t k = 0; k < kernel_h * kernel_w; ++k)
    for (std::size_t c = 0; c < in_channels; ++c)
      for (std::size_t f = 0; f < out_channels; ++f) t(k * out_channels + f, c) = kernel(k * in_channels + c, f);
  return t;
}

inline Tensor mean_pool(const Tensor& input, std::size_t window_h, std::size_t window_w) {
  if (window_h == 0 || window_w == 0) throw Error(ErrorCategory::config, "meanpool: window must be positive");
  const std::size_t H = input.height(), W = input.width(), C = input.channels();
  if (H % window_h || W % window_w) throw Error(ErrorCategory::shape, "meanpool: window does not divide input");
  Tensor out({H / window_h, W / window_w, C});
  const double scale = 1.0 / static_cast<double>(window_h * window_w);
  for (std::size_t oy = 0; oy < H / window_h; ++oy)
    for (std::size_t ox = 0; ox < W / window_w; ++ox)
      for (std::size_t c = 0; c < C; ++c) {
        double s = 0.0;
        for (std::size_t y = 0; y < window_h; ++y)
          for (std::size_t x = 0; x < window_w; ++x) s += input.at(oy * window_h + y, ox * window_w + x, c);
        out.at(oy, ox, c) = s * scale;
      }
  return out;
}

inline Tensor mean_pool_backward(const Tensor& dy, std::size_t window_h, std::size_t window_w) {
  Tensor dx({dy.height() * window_h, dy.width() * window_w, dy.channels()});
  const double scale = 1.0 / static_cast<double>(window_h * window_w);
  for (std::size_t y = 0; y < dx.height(); ++y)
    for (std::size_t x = 0; x < dx.width(); ++x)
      for (std::size_t c = 0; c < dx.channels(); ++c) dx.at(y, x, c) = dy.at(y / window_h, x / window_w, c) * scale;
  return dx;
}

/// Analog ReLU: clamps to [0, v_dd].
inline Tensor relu_clip(Tensor x, double v_dd = kDefaultVdd) {
  if (!(v_dd > 0.0)) throw Error(ErrorCategory::config, "relu: v_dd must be positive");
  for (double& v : x.data()) v = std::clamp(v, 0.0, v_dd);
  return x;
}

/// v_scale * tanh(x / v_scale).
inline Tensor tanh_act(Tensor x, double v_scale = kDefaultTanhScale) {
  if (!(v_scale > 0.0)) throw Error(ErrorCategory::config, "tanh: v_scale must be positive");
  for (double& v : x.data()) v = v_scale * std::tanh(v / v_scale);
  return x;
}

inline Tensor batch_norm(Tensor x, double mean, double var, double eps = 1e-5) {
  if (!(var >= 0.0)) throw Error(ErrorCategory::config, "batchnorm: variance must be non-negative");
  const double inv = 1.0 / std::sqrt(var + eps);
  for (double& v : x.data()) v = (v - mean) * inv;
  return x;
}

/// Fully connected crossbar layer over the flattened input. Columns are
/// read one after another in hardware; that changes timing only. With
/// `bias`, the crossbar's last row is driven by kBiasVoltage.
inline Tensor dense(const Tensor& input, const CrossbarArray& xbar, ReadoutMode mode, LeakageNoise leak = {},
                    bool bias = false) {
  if (input.size() + (bias ? 1 : 0) != xbar.rows())
    throw Error(ErrorCategory::shape, "dense: input length " + std::to_string(input.size()) + " != crossbar rows " +
                                          std::to_string(xbar.rows()));
  Tensor out({xbar.cols()});
  if (!bias) {
    read_into(xbar, input.values(), out.values(), mode, leak);
  } else {
    std::vector<double> v(input.data());
    v.push_back(kBiasVoltage);
    read_into(xbar, v, out.values(), mode, leak);
  }
  return out;
}

/// Keep-mask with P(1) = 1 - rate.
inline Tensor dropout_mask(const Shape& shape, double rate, Stream& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorCategory::config, "dropout: rate must be in [0, 1)");
  Tensor mask(shape, 1.0);
  if (rate == 0.0) return mask;
  for (double& v : mask.data()) v = rng.uniform() < rate ? 0.0 : 1.0;
  return mask;
}

}  // namespace memgan
