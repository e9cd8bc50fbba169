#pragma once

#include "xcos/tensor.hpp"

namespace xcos::ops {

// Guard for norms and variances; a zero-norm operand yields a zero result
// instead of NaN.
inline constexpr double kNormEpsilon = 1e-12;

// Cross-correlation with zero padding. input (C_in, H, W), kernel
// (C_out, C_in, kH, kW), bias (C_out). Output (C_out, H', W') with
// H' = floor((H + 2*padding - kH) / stride) + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
              int padding);

// Gradients of conv2d. Pass null for any gradient that is not wanted.
void conv2d_backward(const Tensor& input, const Tensor& kernel, int stride, int padding,
                     const Tensor& grad_output, Tensor* grad_input, Tensor* grad_kernel,
                     Tensor* grad_bias);

Tensor relu(const Tensor& x);

// v / max(||v||, epsilon); returns the input scaled by 1/epsilon-bounded norm.
Tensor l2_normalize(const Tensor& v, double epsilon = kNormEpsilon);

// Cosine similarity of two equal-length vectors, 0 if either norm < epsilon.
double cosine(const Tensor& u, const Tensor& v, double epsilon = kNormEpsilon);

// Shift-invariant softmax over all entries; output keeps the input shape.
Tensor softmax_flat(const Tensor& x);

// (Ca, H, W) ++ (Cb, H, W) -> (Ca + Cb, H, W), channels of a first.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// weight (m, n) applied to x (n) plus bias (m).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Cosine of v against every row of rows (k, n) -> (k).
Tensor row_cosines(const Tensor& v, const Tensor& rows, double epsilon = kNormEpsilon);

// Per-grid cosine of two (C, H, W) features -> (H, W).
Tensor grid_cosine_map(const Tensor& fa, const Tensor& fb, double epsilon = kNormEpsilon);

// Sum of elementwise products of two equal-shape tensors.
double frobenius_inner(const Tensor& a, const Tensor& b);

}  // namespace xcos::ops
