#pragma once

#include <cstdint>
#include <string_view>

#include "gsr/diff/tensor.hpp"

namespace gsr::diff {

enum class Activation { elu, elu_plus_one, sigmoid, relu };

std::string_view to_string(Activation f);
Activation activation_from_string(std::string_view name);

/// Matrix product over the last two dimensions.
///
/// Accepts [m,k]x[k,n], batched [S,m,k]x[S,k,n], and the two broadcast forms
/// [m,k]x[S,k,n] / [S,m,k]x[k,n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Swaps the last two dimensions of a rank-2 or rank-3 tensor.
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor reshape(const Tensor& a, Shape shape);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Causal dilated 1-D convolution.
///
/// x is [C_in, L] or [B, C_in, L]; kernel is [C_out, C_in, K]; bias is [C_out].
/// Output position t reads inputs t - (K-1-k)*dilation for k in [0,K), with
/// implicit zeros on the left, so the length is preserved.
Tensor causal_conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                     int dilation);

Tensor pointwise(const Tensor& x, Activation f);

/// Inverted dropout. Identity when p == 0 or when not training.
Tensor dropout(const Tensor& x, double p, bool training, std::uint64_t seed);

/// Mean of squared differences over all elements.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

/// Zeroes the diagonal of each trailing [n,n] block.
Tensor zero_diagonal(const Tensor& a);

/// (M + M^T) / 2 over the trailing [n,n] blocks.
Tensor symmetrize(const Tensor& a);

/// D^{-1/2} M D^{-1/2} per trailing [n,n] block with D = diag(row sums).
/// Rows whose sum is zero are scaled by 1. Row sums are accumulated in sorted
/// order, so relabeling nodes permutes the output exactly.
Tensor degree_normalize(const Tensor& a);

}  // namespace gsr::diff
