#pragma once

// Dense CPU kernels for the layer types CFPNet-M and the U-Net baseline use.
// Convolutions lower to im2col + GEMM; the GEMM itself is Eigen's.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "cfpnet/tensor.hpp"

namespace cfpnet::kernels {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

/// Sliding-window geometry of a 2-d convolution (square kernel, asymmetric padding allowed).
struct ConvGeometry {
  int kernel = 1;
  int stride = 1;
  int dilation = 1;
  int pad_top = 0;
  int pad_left = 0;
  int in_h = 0;
  int in_w = 0;
  int out_h = 0;
  int out_w = 0;

  int taps() const { return kernel * kernel; }
  std::size_t out_plane() const { return static_cast<std::size_t>(out_h) * out_w; }
  bool is_pointwise() const {
    return kernel == 1 && stride == 1 && pad_top == 0 && pad_left == 0 && in_h == out_h && in_w == out_w;
  }
};

/// TF-style "same" padding: output = ceil(in / stride), surplus padding goes to the bottom/right.
inline ConvGeometry same_conv_geometry(int in_h, int in_w, int kernel, int stride, int dilation) {
  ConvGeometry g;
  g.kernel = kernel;
  g.stride = stride;
  g.dilation = dilation;
  g.in_h = in_h;
  g.in_w = in_w;
  g.out_h = (in_h + stride - 1) / stride;
  g.out_w = (in_w + stride - 1) / stride;
  const int extent = dilation * (kernel - 1) + 1;
  const int pad_h = std::max((g.out_h - 1) * stride + extent - in_h, 0);
  const int pad_w = std::max((g.out_w - 1) * stride + extent - in_w, 0);
  g.pad_top = pad_h / 2;
  g.pad_left = pad_w / 2;
  return g;
}

/// Geometry of the convolution whose adjoint is a "same" transposed convolution
/// mapping in_h x in_w to (in_h*stride) x (in_w*stride).
inline ConvGeometry transposed_geometry(int in_h, int in_w, int kernel, int stride) {
  ConvGeometry g;
  g.kernel = kernel;
  g.stride = stride;
  g.dilation = 1;
  g.in_h = in_h * stride;
  g.in_w = in_w * stride;
  g.out_h = in_h;
  g.out_w = in_w;
  g.pad_top = std::max(kernel - stride, 0) / 2;
  g.pad_left = g.pad_top;
  return g;
}

template <typename T>
void im2col(const T* in, int channels, const ConvGeometry& g, T* col) {
  const std::size_t plane = g.out_plane();
  for (int c = 0; c < channels; ++c) {
    const T* src = in + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        T* dst = col + (static_cast<std::size_t>(c) * g.taps() + ky * g.kernel + kx) * plane;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad_top + ky * g.dilation;
          T* row = dst + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(row, row + g.out_w, T(0));
            continue;
          }
          const T* srow = src + static_cast<std::size_t>(iy) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad_left + kx * g.dilation;
            row[ox] = (ix >= 0 && ix < g.in_w) ? srow[ix] : T(0);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatter-adds columns back into the image.
template <typename T>
void col2im(const T* col, int channels, const ConvGeometry& g, T* out) {
  const std::size_t plane = g.out_plane();
  for (int c = 0; c < channels; ++c) {
    T* dst = out + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        const T* src = col + (static_cast<std::size_t>(c) * g.taps() + ky * g.kernel + kx) * plane;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad_top + ky * g.dilation;
          if (iy < 0 || iy >= g.in_h) continue;
          const T* row = src + static_cast<std::size_t>(oy) * g.out_w;
          T* drow = dst + static_cast<std::size_t>(iy) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad_left + kx * g.dilation;
            if (ix >= 0 && ix < g.in_w) drow[ix] += row[ox];
          }
        }
      }
    }
  }
}

/// y = W * im2col(x) + b.  weight is [out, in, k, k].
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias,
                         const ConvGeometry& g) {
  const Shape& s = x.shape();
  const int out_c = weight.shape().n;
  const int rows = s.c * g.taps();
  Tensor<T> y(Shape{s.n, out_c, g.out_h, g.out_w});
  ConstMatMap<T> w(weight.data(), out_c, rows);
  std::vector<T> col;
  if (!g.is_pointwise()) col.resize(static_cast<std::size_t>(rows) * g.out_plane());
  for (int n = 0; n < s.n; ++n) {
    const T* src = x.sample(n);
    if (!g.is_pointwise()) {
      im2col(src, s.c, g, col.data());
      src = col.data();
    }
    ConstMatMap<T> cm(src, rows, static_cast<Eigen::Index>(g.out_plane()));
    MatMap<T> ym(y.sample(n), out_c, static_cast<Eigen::Index>(g.out_plane()));
    ym.noalias() = w * cm;
    if (bias) {
      for (int o = 0; o < out_c; ++o) ym.row(o).array() += (*bias)[o];
    }
  }
  return y;
}

/// Accumulates gradients of conv2d_forward.  Any output pointer may be null.
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& dy,
                     const ConvGeometry& g, Tensor<T>* dx, Tensor<T>* dweight, Tensor<T>* dbias) {
  const Shape& s = x.shape();
  const int out_c = weight.shape().n;
  const int rows = s.c * g.taps();
  const auto plane = static_cast<Eigen::Index>(g.out_plane());
  ConstMatMap<T> w(weight.data(), out_c, rows);
  std::vector<T> col;
  std::vector<T> dcol;
  if (!g.is_pointwise()) {
    col.resize(static_cast<std::size_t>(rows) * plane);
    dcol.resize(col.size());
  }
  for (int n = 0; n < s.n; ++n) {
    ConstMatMap<T> dym(dy.sample(n), out_c, plane);
    if (dbias) {
      for (int o = 0; o < out_c; ++o) (*dbias)[o] += dym.row(o).sum();
    }
    if (dweight) {
      const T* src = x.sample(n);
      if (!g.is_pointwise()) {
        im2col(src, s.c, g, col.data());
        src = col.data();
      }
      ConstMatMap<T> cm(src, rows, plane);
      MatMap<T> dw(dweight->data(), out_c, rows);
      dw.noalias() += dym * cm.transpose();
    }
    if (dx) {
      if (g.is_pointwise()) {
        MatMap<T> dxm(dx->sample(n), rows, plane);
        dxm.noalias() += w.transpose() * dym;
      } else {
        MatMap<T> dcm(dcol.data(), rows, plane);
        dcm.noalias() = w.transpose() * dym;
        col2im(dcol.data(), s.c, g, dx->sample(n));
      }
    }
  }
}

/// Transposed convolution.  weight is [in, out, k, k]; g is the adjoint conv geometry.
template <typename T>
Tensor<T> deconv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias,
                           const ConvGeometry& g) {
  const Shape& s = x.shape();
  const int out_c = weight.shape().c;
  const int rows = out_c * g.taps();
  const auto plane = static_cast<Eigen::Index>(g.out_plane());
  Tensor<T> y(Shape{s.n, out_c, g.in_h, g.in_w});
  ConstMatMap<T> w(weight.data(), s.c, rows);
  std::vector<T> col(static_cast<std::size_t>(rows) * plane);
  for (int n = 0; n < s.n; ++n) {
    ConstMatMap<T> xm(x.sample(n), s.c, plane);
    MatMap<T> cm(col.data(), rows, plane);
    cm.noalias() = w.transpose() * xm;
    col2im(col.data(), out_c, g, y.sample(n));
    if (bias) {
      for (int o = 0; o < out_c; ++o) {
        T* p = y.plane(n, o);
        const T b = (*bias)[o];
        for (std::size_t i = 0; i < y.shape().plane(); ++i) p[i] += b;
      }
    }
  }
  return y;
}

template <typename T>
void deconv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& dy,
                       const ConvGeometry& g, Tensor<T>* dx, Tensor<T>* dweight, Tensor<T>* dbias) {
  const Shape& s = x.shape();
  const int out_c = weight.shape().c;
  const int rows = out_c * g.taps();
  const auto plane = static_cast<Eigen::Index>(g.out_plane());
  ConstMatMap<T> w(weight.data(), s.c, rows);
  std::vector<T> col(static_cast<std::size_t>(rows) * plane);
  for (int n = 0; n < s.n; ++n) {
    if (dbias) {
      for (int o = 0; o < out_c; ++o) {
        const T* p = dy.plane(n, o);
        T acc = 0;
        for (std::size_t i = 0; i < dy.shape().plane(); ++i) acc += p[i];
        (*dbias)[o] += acc;
      }
    }
    im2col(dy.sample(n), out_c, g, col.data());
    ConstMatMap<T> cm(col.data(), rows, plane);
    if (dx) {
      MatMap<T> dxm(dx->sample(n), s.c, plane);
      dxm.noalias() += w * cm;
    }
    if (dweight) {
      ConstMatMap<T> xm(x.sample(n), s.c, plane);
      MatMap<T> dw(dweight->data(), s.c, rows);
      dw.noalias() += xm * cm.transpose();
    }
  }
}

/// Non-overlapping f x f average pooling; input dims must be divisible by f.
template <typename T>
Tensor<T> avg_pool_forward(const Tensor<T>& x, int f) {
  const Shape& s = x.shape();
  Tensor<T> y(Shape{s.n, s.c, s.h / f, s.w / f});
  const T inv = T(1) / static_cast<T>(f * f);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const T* src = x.plane(n, c);
      T* dst = y.plane(n, c);
      for (int oy = 0; oy < s.h / f; ++oy) {
        for (int ox = 0; ox < s.w / f; ++ox) {
          T acc = 0;
          for (int dy = 0; dy < f; ++dy) {
            const T* row = src + static_cast<std::size_t>(oy * f + dy) * s.w + ox * f;
            for (int dx = 0; dx < f; ++dx) acc += row[dx];
          }
          dst[oy * (s.w / f) + ox] = acc * inv;
        }
      }
    }
  }
  return y;
}

template <typename T>
void avg_pool_backward(const Tensor<T>& dy, int f, Tensor<T>& dx) {
  const Shape& s = dx.shape();
  const T inv = T(1) / static_cast<T>(f * f);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const T* src = dy.plane(n, c);
      T* dst = dx.plane(n, c);
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          dst[static_cast<std::size_t>(y) * s.w + x] += src[(y / f) * (s.w / f) + x / f] * inv;
        }
      }
    }
  }
}

/// f x f max pooling; also returns the flat argmax index of each window.
template <typename T>
Tensor<T> max_pool_forward(const Tensor<T>& x, int f, std::vector<std::size_t>& argmax) {
  const Shape& s = x.shape();
  Tensor<T> y(Shape{s.n, s.c, s.h / f, s.w / f});
  argmax.assign(y.size(), 0);
  std::size_t o = 0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * s.plane();
      for (int oy = 0; oy < s.h / f; ++oy) {
        for (int ox = 0; ox < s.w / f; ++ox, ++o) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_i = base;
          for (int dy = 0; dy < f; ++dy) {
            for (int dx = 0; dx < f; ++dx) {
              const std::size_t i = base + static_cast<std::size_t>(oy * f + dy) * s.w + ox * f + dx;
              if (x[i] > best) {
                best = x[i];
                best_i = i;
              }
            }
          }
          y[o] = best;
          argmax[o] = best_i;
        }
      }
    }
  }
  return y;
}

}  // namespace cfpnet::kernels
