#pragma once

#include <cstddef>
#include <vector>

#include "toytts/tensor.hpp"

namespace toytts {

// Every op records itself on the tape when any input requires a gradient and
// throws NumericError if its output is not finite.
//
// Binary elementwise ops accept `b` with the same shape as `a`, a single
// value, or, for a rank-2 `a` of shape (R, C), a column (R, 1) or a row
// (1, C) that is broadcast across `a`.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor neg(const Tensor& a);
Tensor square(const Tensor& a);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
// Gradient is passed through inside [lo, hi] and zeroed outside.
Tensor clamp(const Tensor& a, double lo, double hi);

// (n, k) x (k, m) -> (n, m)
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// x: (in_channels, length); weight: (out_channels, in_channels, kernel) with
// odd kernel; bias: (out_channels) or undefined. Stride 1, zero "same" padding.
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias = {});

// Rank 1 (axis 0) or rank 2 (axis 0 or 1).
Tensor softmax(const Tensor& a, std::size_t axis);
// Normalizes each slice along `axis` to zero mean and unit variance; no affine.
Tensor layer_norm(const Tensor& a, std::size_t axis, double eps = 1e-5);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Mean-reduced squared error; b may broadcast as in sub().
Tensor mse(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& a, Shape shape);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& rows);
Tensor gather_cols(const Tensor& a, const std::vector<std::size_t>& cols);
// Reverses the row order of a rank-2 tensor (channel flip for (C, T) data).
Tensor flip_rows(const Tensor& a);

}  // namespace toytts
