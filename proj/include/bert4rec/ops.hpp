// Copyright 2026 The bert4rec-cpp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>

#include "bert4rec/rng.hpp"
#include "bert4rec/tensor.hpp"

namespace bert4rec {

// Additive attention-mask value for blocked entries. Adding it to a finite
// logit yields -inf, whose exponential is exactly zero.
inline constexpr double kBlocked = -std::numeric_limits<double>::infinity();

// Differentiable primitives. Each op records a backward rule on the active
// tape when one of its inputs requires a gradient.

// [..., k] x [k, n] -> [..., n]; leading axes of `a` are flattened into rows.
Tensor matmul(const Tensor& a, const Tensor& b);
// [m, k] x [n, k]^T -> [m, n].
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// [g, m, k] x [g, k, n] -> [g, m, n], or with transpose_b: [g, m, k] x [g, n, k]^T.
Tensor batched_matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);

Tensor add(const Tensor& a, const Tensor& b);
// x[..., n] + bias[n] broadcast over leading axes.
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor sum(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, std::span<const std::size_t> axes);
// Rows [begin, begin + count) of a matrix.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);

// Row gather from table[V, d]; repeated ids accumulate in backward.
Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids);

// Softmax over the last axis of (logits + additive_mask). The mask holds 0
// (allowed) or kBlocked and either matches the logits' shape or equals a
// suffix of it, in which case it is repeated over the leading axes. An
// undefined mask means no masking. Throws ContractError on a fully blocked row.
Tensor softmax_masked(const Tensor& logits, const Tensor& additive_mask);

// Standardizes over the last axis, then gain * xhat + bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

// x * Phi(x) with the exact erf-based normal CDF.
Tensor gelu(const Tensor& x);

// Inverted dropout. Identity when !training or p == 0; rng may be null then.
Tensor dropout(const Tensor& x, double p, bool training, Rng* rng);

// Mean over rows of -log softmax(logits)[label]; logits is [k, V].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);

// Scalar helpers for the primitives (also used by reference code in tests).
double gelu_scalar(double x);
double gelu_derivative(double x);

// Central finite-difference check of a scalar function of `inputs`. Returns
// max over all input coordinates of |g_auto - g_fd| / max(1, |g_auto|, |g_fd|).
// `f` must be deterministic; it is called once under a tape and 2 * numel
// times without one.
double grad_check(const std::function<Tensor()>& f, std::span<const Tensor> inputs, double step = 1e-5);

}  // namespace bert4rec
