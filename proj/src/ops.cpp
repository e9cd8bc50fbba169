#include "xcos/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace xcos::ops {

using detail::check;

namespace {

struct ConvDims {
  int c_in, h, w;
  int c_out, kh, kw;
  int out_h, out_w;
};

ConvDims conv_dims(const Tensor& input, const Tensor& kernel, int stride, int padding) {
  check(input.rank() == 3, "conv2d input must be (C, H, W), got " + input.shape_str());
  check(kernel.rank() == 4, "conv2d kernel must be (C_out, C_in, kH, kW), got " +
                                kernel.shape_str());
  check(stride >= 1, "conv2d stride must be >= 1");
  check(padding >= 0, "conv2d padding must be >= 0");
  ConvDims d;
  d.c_in = input.extent(0);
  d.h = input.extent(1);
  d.w = input.extent(2);
  d.c_out = kernel.extent(0);
  d.kh = kernel.extent(2);
  d.kw = kernel.extent(3);
  check(kernel.extent(1) == d.c_in, "conv2d channel mismatch: input " + input.shape_str() +
                                        " vs kernel " + kernel.shape_str());
  check(d.kh <= d.h + 2 * padding && d.kw <= d.w + 2 * padding,
        "conv2d kernel " + kernel.shape_str() + " larger than padded input " + input.shape_str());
  d.out_h = (d.h + 2 * padding - d.kh) / stride + 1;
  d.out_w = (d.w + 2 * padding - d.kw) / stride + 1;
  return d;
}

// Valid output range [ox_lo, ox_hi] for a kernel offset: input coordinate
// ox*stride + k - padding must land inside [0, extent).
inline void valid_out_range(int k, int padding, int stride, int in_extent, int out_extent,
                            int& lo, int& hi) {
  int shift = k - padding;
  lo = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
  hi = (in_extent - 1 - shift) / stride;
  if (hi > out_extent - 1) hi = out_extent - 1;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
              int padding) {
  const ConvDims d = conv_dims(input, kernel, stride, padding);
  check(bias.rank() == 1 && bias.extent(0) == d.c_out,
        "conv2d bias must be (C_out), got " + bias.shape_str());

  Tensor out({d.c_out, d.out_h, d.out_w});
  const double* in = input.data();
  const double* ker = kernel.data();
  double* o = out.data();

  for (int co = 0; co < d.c_out; ++co) {
    const double b = bias[co];
    double* out_plane = o + static_cast<size_t>(co) * d.out_h * d.out_w;
    for (int i = 0; i < d.out_h * d.out_w; ++i) out_plane[i] = b;
    for (int ci = 0; ci < d.c_in; ++ci) {
      const double* in_plane = in + static_cast<size_t>(ci) * d.h * d.w;
      const double* kslice = ker + ((static_cast<size_t>(co) * d.c_in + ci) * d.kh) * d.kw;
      for (int ky = 0; ky < d.kh; ++ky) {
        int oy_lo, oy_hi;
        valid_out_range(ky, padding, stride, d.h, d.out_h, oy_lo, oy_hi);
        for (int kx = 0; kx < d.kw; ++kx) {
          const double wv = kslice[ky * d.kw + kx];
          if (wv == 0.0) continue;
          int ox_lo, ox_hi;
          valid_out_range(kx, padding, stride, d.w, d.out_w, ox_lo, ox_hi);
          for (int oy = oy_lo; oy <= oy_hi; ++oy) {
            const int iy = oy * stride + ky - padding;
            const double* in_row = in_plane + static_cast<size_t>(iy) * d.w + kx - padding;
            double* out_row = out_plane + static_cast<size_t>(oy) * d.out_w;
            for (int ox = ox_lo; ox <= ox_hi; ++ox) {
              out_row[ox] += wv * in_row[ox * stride];
            }
          }
        }
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor& input, const Tensor& kernel, int stride, int padding,
                     const Tensor& grad_output, Tensor* grad_input, Tensor* grad_kernel,
                     Tensor* grad_bias) {
  const ConvDims d = conv_dims(input, kernel, stride, padding);
  check(grad_output.rank() == 3 && grad_output.extent(0) == d.c_out &&
            grad_output.extent(1) == d.out_h && grad_output.extent(2) == d.out_w,
        "conv2d_backward grad_output shape " + grad_output.shape_str() + " unexpected");

  const double* in = input.data();
  const double* ker = kernel.data();
  const double* go = grad_output.data();

  if (grad_bias) {
    for (int co = 0; co < d.c_out; ++co) {
      const double* go_plane = go + static_cast<size_t>(co) * d.out_h * d.out_w;
      double acc = 0.0;
      for (int i = 0; i < d.out_h * d.out_w; ++i) acc += go_plane[i];
      (*grad_bias)[co] += acc;
    }
  }
  if (!grad_input && !grad_kernel) return;

  for (int co = 0; co < d.c_out; ++co) {
    const double* go_plane = go + static_cast<size_t>(co) * d.out_h * d.out_w;
    for (int ci = 0; ci < d.c_in; ++ci) {
      const double* in_plane = in + static_cast<size_t>(ci) * d.h * d.w;
      double* gi_plane =
          grad_input ? grad_input->data() + static_cast<size_t>(ci) * d.h * d.w : nullptr;
      const size_t kbase = (static_cast<size_t>(co) * d.c_in + ci) * d.kh * d.kw;
      for (int ky = 0; ky < d.kh; ++ky) {
        int oy_lo, oy_hi;
        valid_out_range(ky, padding, stride, d.h, d.out_h, oy_lo, oy_hi);
        for (int kx = 0; kx < d.kw; ++kx) {
          int ox_lo, ox_hi;
          valid_out_range(kx, padding, stride, d.w, d.out_w, ox_lo, ox_hi);
          const double wv = ker[kbase + ky * d.kw + kx];
          double kacc = 0.0;
          for (int oy = oy_lo; oy <= oy_hi; ++oy) {
            const int iy = oy * stride + ky - padding;
            const double* in_row = in_plane + static_cast<size_t>(iy) * d.w + kx - padding;
            const double* go_row = go_plane + static_cast<size_t>(oy) * d.out_w;
            if (gi_plane) {
              double* gi_row = gi_plane + static_cast<size_t>(iy) * d.w + kx - padding;
              for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                const double g = go_row[ox];
                gi_row[ox * stride] += wv * g;
                kacc += in_row[ox * stride] * g;
              }
            } else {
              for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                kacc += in_row[ox * stride] * go_row[ox];
              }
            }
          }
          if (grad_kernel) (*grad_kernel)[static_cast<int>(kbase) + ky * d.kw + kx] += kacc;
        }
      }
    }
  }
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  double* p = out.data();
  for (int i = 0; i < out.size(); ++i) {
    if (p[i] < 0.0) p[i] = 0.0;
  }
  return out;
}

Tensor l2_normalize(const Tensor& v, double epsilon) {
  double sq = 0.0;
  for (int i = 0; i < v.size(); ++i) sq += v[i] * v[i];
  const double norm = std::max(std::sqrt(sq), epsilon);
  Tensor out = v;
  for (int i = 0; i < out.size(); ++i) out[i] /= norm;
  return out;
}

double cosine(const Tensor& u, const Tensor& v, double epsilon) {
  check(u.size() == v.size(), "cosine operands differ in length: " + u.shape_str() + " vs " +
                                  v.shape_str());
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (int i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  nu = std::sqrt(nu);
  nv = std::sqrt(nv);
  if (nu < epsilon || nv < epsilon) return 0.0;
  return dot / (nu * nv);
}

Tensor softmax_flat(const Tensor& x) {
  check(x.size() >= 1, "softmax_flat needs at least one entry");
  double m = x[0];
  for (int i = 1; i < x.size(); ++i) m = std::max(m, x[i]);
  Tensor out = x;
  double sum = 0.0;
  for (int i = 0; i < out.size(); ++i) {
    out[i] = std::exp(out[i] - m);
    sum += out[i];
  }
  for (int i = 0; i < out.size(); ++i) out[i] /= sum;
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  check(a.rank() == 3 && b.rank() == 3,
        "concat_channels operands must be (C, H, W), got " + a.shape_str() + " and " +
            b.shape_str());
  check(a.extent(1) == b.extent(1) && a.extent(2) == b.extent(2),
        "concat_channels spatial mismatch: " + a.shape_str() + " vs " + b.shape_str());
  Tensor out({a.extent(0) + b.extent(0), a.extent(1), a.extent(2)});
  std::copy(a.data(), a.data() + a.size(), out.data());
  std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
  return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  check(weight.rank() == 2, "linear weight must be (m, n), got " + weight.shape_str());
  const int m = weight.extent(0);
  const int n = weight.extent(1);
  check(x.size() == n, "linear input length " + std::to_string(x.size()) +
                           " does not match weight " + weight.shape_str());
  check(bias.size() == m, "linear bias length " + std::to_string(bias.size()) +
                              " does not match weight " + weight.shape_str());
  Tensor out({m});
  const double* w = weight.data();
  for (int i = 0; i < m; ++i) {
    double acc = bias[i];
    const double* row = w + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) acc += row[j] * x[j];
    out[i] = acc;
  }
  return out;
}

Tensor row_cosines(const Tensor& v, const Tensor& rows, double epsilon) {
  check(rows.rank() == 2, "row_cosines rows must be (k, n), got " + rows.shape_str());
  const int k = rows.extent(0);
  const int n = rows.extent(1);
  check(v.size() == n, "row_cosines vector length " + std::to_string(v.size()) +
                           " does not match rows " + rows.shape_str());
  double nv = 0.0;
  for (int j = 0; j < n; ++j) nv += v[j] * v[j];
  nv = std::sqrt(nv);
  Tensor out({k});
  const double* r = rows.data();
  for (int i = 0; i < k; ++i) {
    const double* row = r + static_cast<size_t>(i) * n;
    double dot = 0.0, nr = 0.0;
    for (int j = 0; j < n; ++j) {
      dot += row[j] * v[j];
      nr += row[j] * row[j];
    }
    nr = std::sqrt(nr);
    out[i] = (nv < epsilon || nr < epsilon) ? 0.0 : dot / (nv * nr);
  }
  return out;
}

Tensor grid_cosine_map(const Tensor& fa, const Tensor& fb, double epsilon) {
  check(fa.rank() == 3 && fb.rank() == 3 && fa.same_shape(fb),
        "grid_cosine_map needs matching (C, H, W) features, got " + fa.shape_str() + " and " +
            fb.shape_str());
  const int c = fa.extent(0);
  const int h = fa.extent(1);
  const int w = fa.extent(2);
  const int plane = h * w;
  Tensor out({h, w});
  const double* a = fa.data();
  const double* b = fb.data();
  for (int g = 0; g < plane; ++g) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int ch = 0; ch < c; ++ch) {
      const double av = a[ch * plane + g];
      const double bv = b[ch * plane + g];
      dot += av * bv;
      na += av * av;
      nb += bv * bv;
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    out[g] = (na < epsilon || nb < epsilon) ? 0.0 : dot / (na * nb);
  }
  return out;
}

double frobenius_inner(const Tensor& a, const Tensor& b) {
  check(a.same_shape(b), "frobenius_inner shape mismatch: " + a.shape_str() + " vs " +
                             b.shape_str());
  double acc = 0.0;
  for (int i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace xcos::ops
