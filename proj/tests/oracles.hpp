#pragma once

// Brute-force reference implementations used only by tests. Each is written
// directly from the defining formula, independent of the library kernels it
// checks.

#include <cmath>
#include <vector>

#include "xcos/rng.hpp"
#include "xcos/tensor.hpp"

namespace oracle {

// Direct quadruple-loop cross-correlation with zero padding.
inline xcos::Tensor conv2d(const xcos::Tensor& input, const xcos::Tensor& kernel,
                           const xcos::Tensor& bias, int stride, int padding) {
  const int c_in = input.extent(0), h = input.extent(1), w = input.extent(2);
  const int c_out = kernel.extent(0), kh = kernel.extent(2), kw = kernel.extent(3);
  const int out_h = (h + 2 * padding - kh) / stride + 1;
  const int out_w = (w + 2 * padding - kw) / stride + 1;
  xcos::Tensor out({c_out, out_h, out_w});
  for (int co = 0; co < c_out; ++co) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        double acc = bias[co];
        for (int ci = 0; ci < c_in; ++ci) {
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              const int iy = oy * stride + ky - padding;
              const int ix = ox * stride + kx - padding;
              double v = 0.0;
              if (iy >= 0 && iy < h && ix >= 0 && ix < w) v = input.at({ci, iy, ix});
              acc += v * kernel.at({co, ci, ky, kx});
            }
          }
        }
        out.at({co, oy, ox}) = acc;
      }
    }
  }
  return out;
}

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

inline std::vector<double> softmax(const std::vector<double>& x) {
  std::vector<double> out(x.size());
  double sum = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i]);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

// Pearson correlation straight from the covariance / sigma formula.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

inline xcos::Tensor random_tensor(std::vector<int> shape, xcos::Rng& rng, double lo = -1.0,
                                  double hi = 1.0) {
  xcos::Tensor t(std::move(shape));
  for (int i = 0; i < t.size(); ++i) t[i] = rng.next_real(lo, hi);
  return t;
}

}  // namespace oracle
