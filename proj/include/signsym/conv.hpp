#pragma once

// Direct-loop 2-D convolution kernels (stride 1) and 2x2 max pooling over
// NCHW batches. Accumulation order is fixed (channel, kernel row, kernel
// column) so results are reproducible bit-for-bit.

#include <cstddef>
#include <limits>

#include "signsym/tensor.hpp"

namespace signsym {

enum class Padding : std::uint8_t { valid = 0, same = 1 };

inline std::size_t conv_pad(Padding padding, std::size_t kernel) {
  return padding == Padding::same ? (kernel - 1) / 2 : 0;
}

inline std::size_t conv_out_extent(std::size_t in, std::size_t kernel, Padding padding) {
  const std::size_t pad = conv_pad(padding, kernel);
  if (in + 2 * pad < kernel) throw DimensionError("conv2d: kernel larger than padded input");
  return in + 2 * pad - kernel + 1;
}

/// out[n,o,i,j] = sum_{c,ki,kj} x[n,c,i+ki-p,j+kj-p] * w[o,c,ki,kj] + b[o]
template <typename Scalar>
BasicTensor<Scalar> conv2d_forward(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& w,
                                   const BasicTensor<Scalar>& b, Padding padding) {
  if (x.rank() != 4 || w.rank() != 4 || x.dim(1) != w.dim(1) || b.size() != w.dim(0))
    throw DimensionError("conv2d: input " + to_string(x.shape()) + " incompatible with kernel " +
                         to_string(w.shape()));
  const std::size_t n_batch = x.dim(0), in_c = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
  const std::size_t out_c = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::size_t ph = conv_pad(padding, kh), pw = conv_pad(padding, kw);
  const std::size_t out_h = conv_out_extent(in_h, kh, padding), out_w = conv_out_extent(in_w, kw, padding);

  BasicTensor<Scalar> out({n_batch, out_c, out_h, out_w});
  const Scalar* xd = x.data();
  const Scalar* wd = w.data();
  Scalar* od = out.data();
  for (std::size_t n = 0; n < n_batch; ++n)
    for (std::size_t o = 0; o < out_c; ++o)
      for (std::size_t i = 0; i < out_h; ++i)
        for (std::size_t j = 0; j < out_w; ++j) {
          Scalar sum = 0;
          for (std::size_t c = 0; c < in_c; ++c)
            for (std::size_t ki = 0; ki < kh; ++ki) {
              const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(i + ki) - static_cast<std::ptrdiff_t>(ph);
              if (r < 0 || r >= static_cast<std::ptrdiff_t>(in_h)) continue;
              for (std::size_t kj = 0; kj < kw; ++kj) {
                const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(j + kj) - static_cast<std::ptrdiff_t>(pw);
                if (s < 0 || s >= static_cast<std::ptrdiff_t>(in_w)) continue;
                sum += xd[((n * in_c + c) * in_h + static_cast<std::size_t>(r)) * in_w + static_cast<std::size_t>(s)] *
                       wd[((o * in_c + c) * kh + ki) * kw + kj];
              }
            }
          od[((n * out_c + o) * out_h + i) * out_w + j] = sum + b[o];
        }
  return out;
}

/// Transposed convolution: scatters delta[n,o,i,j] through kernel v back onto
/// an input of the given per-batch shape. With v equal to the forward kernel
/// this is the exact input gradient.
template <typename Scalar>
BasicTensor<Scalar> conv2d_backward_input(const BasicTensor<Scalar>& delta, const BasicTensor<Scalar>& v,
                                          const Shape& input_shape, Padding padding) {
  const std::size_t n_batch = delta.dim(0), out_c = delta.dim(1), out_h = delta.dim(2), out_w = delta.dim(3);
  const std::size_t in_c = input_shape[1], in_h = input_shape[2], in_w = input_shape[3];
  const std::size_t kh = v.dim(2), kw = v.dim(3);
  if (v.dim(0) != out_c || v.dim(1) != in_c)
    throw DimensionError("conv2d backward: feedback kernel " + to_string(v.shape()) + " incompatible with delta " +
                         to_string(delta.shape()));
  const std::size_t ph = conv_pad(padding, kh), pw = conv_pad(padding, kw);

  BasicTensor<Scalar> grad(input_shape);
  const Scalar* dd = delta.data();
  const Scalar* vd = v.data();
  Scalar* gd = grad.data();
  for (std::size_t n = 0; n < n_batch; ++n)
    for (std::size_t o = 0; o < out_c; ++o)
      for (std::size_t i = 0; i < out_h; ++i)
        for (std::size_t j = 0; j < out_w; ++j) {
          const Scalar d = dd[((n * out_c + o) * out_h + i) * out_w + j];
          if (d == 0) continue;
          for (std::size_t c = 0; c < in_c; ++c)
            for (std::size_t ki = 0; ki < kh; ++ki) {
              const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(i + ki) - static_cast<std::ptrdiff_t>(ph);
              if (r < 0 || r >= static_cast<std::ptrdiff_t>(in_h)) continue;
              for (std::size_t kj = 0; kj < kw; ++kj) {
                const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(j + kj) - static_cast<std::ptrdiff_t>(pw);
                if (s < 0 || s >= static_cast<std::ptrdiff_t>(in_w)) continue;
                gd[((n * in_c + c) * in_h + static_cast<std::size_t>(r)) * in_w + static_cast<std::size_t>(s)] +=
                    d * vd[((o * in_c + c) * kh + ki) * kw + kj];
              }
            }
        }
  return grad;
}

/// Kernel gradient summed over the batch.
template <typename Scalar>
BasicTensor<Scalar> conv2d_backward_weight(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& delta,
                                           const Shape& kernel_shape, Padding padding) {
  const std::size_t n_batch = x.dim(0), in_c = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
  const std::size_t out_c = delta.dim(1), out_h = delta.dim(2), out_w = delta.dim(3);
  const std::size_t kh = kernel_shape[2], kw = kernel_shape[3];
  const std::size_t ph = conv_pad(padding, kh), pw = conv_pad(padding, kw);

  BasicTensor<Scalar> grad(kernel_shape);
  const Scalar* xd = x.data();
  const Scalar* dd = delta.data();
  Scalar* gd = grad.data();
  for (std::size_t o = 0; o < out_c; ++o)
    for (std::size_t c = 0; c < in_c; ++c)
      for (std::size_t ki = 0; ki < kh; ++ki)
        for (std::size_t kj = 0; kj < kw; ++kj) {
          Scalar sum = 0;
          for (std::size_t n = 0; n < n_batch; ++n)
            for (std::size_t i = 0; i < out_h; ++i) {
              const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(i + ki) - static_cast<std::ptrdiff_t>(ph);
              if (r < 0 || r >= static_cast<std::ptrdiff_t>(in_h)) continue;
              for (std::size_t j = 0; j < out_w; ++j) {
                const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(j + kj) - static_cast<std::ptrdiff_t>(pw);
                if (s < 0 || s >= static_cast<std::ptrdiff_t>(in_w)) continue;
                sum += dd[((n * out_c + o) * out_h + i) * out_w + j] *
                       xd[((n * in_c + c) * in_h + static_cast<std::size_t>(r)) * in_w + static_cast<std::size_t>(s)];
              }
            }
          gd[((o * in_c + c) * kh + ki) * kw + kj] = sum;
        }
  return grad;
}

/// 2x2 max pool, stride 2, floor on odd extents. Ties resolve to the first
/// element in row-major window order.
template <typename Scalar>
BasicTensor<Scalar> maxpool2_forward(const BasicTensor<Scalar>& x) {
  const std::size_t n_batch = x.dim(0), ch = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
  const std::size_t out_h = in_h / 2, out_w = in_w / 2;
  if (out_h == 0 || out_w == 0) throw DimensionError("maxpool2: input too small " + to_string(x.shape()));
  BasicTensor<Scalar> out({n_batch, ch, out_h, out_w});
  for (std::size_t p = 0; p < n_batch * ch; ++p)
    for (std::size_t i = 0; i < out_h; ++i)
      for (std::size_t j = 0; j < out_w; ++j) {
        Scalar best = -std::numeric_limits<Scalar>::infinity();
        for (std::size_t di = 0; di < 2; ++di)
          for (std::size_t dj = 0; dj < 2; ++dj)
            best = std::max(best, x[(p * in_h + 2 * i + di) * in_w + 2 * j + dj]);
        out[(p * out_h + i) * out_w + j] = best;
      }
  return out;
}

/// Routes each pooled gradient to the arg-max position of its window.
template <typename Scalar>
BasicTensor<Scalar> maxpool2_backward(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& grad_out) {
  const std::size_t n_batch = x.dim(0), ch = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
  const std::size_t out_h = in_h / 2, out_w = in_w / 2;
  BasicTensor<Scalar> grad(x.shape());
  for (std::size_t p = 0; p < n_batch * ch; ++p)
    for (std::size_t i = 0; i < out_h; ++i)
      for (std::size_t j = 0; j < out_w; ++j) {
        std::size_t arg = (p * in_h + 2 * i) * in_w + 2 * j;
        for (std::size_t di = 0; di < 2; ++di)
          for (std::size_t dj = 0; dj < 2; ++dj) {
            const std::size_t idx = (p * in_h + 2 * i + di) * in_w + 2 * j + dj;
            if (x[idx] > x[arg]) arg = idx;
          }
        grad[arg] += grad_out[(p * out_h + i) * out_w + j];
      }
  return grad;
}

}  // namespace signsym
