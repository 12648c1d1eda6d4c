#pragma once

#include <vector>

#include "groupseg/tensor.hpp"

namespace groupseg {

// Elementwise binaries with trailing-axis broadcasting: shapes are aligned
// at the last axis and each pair of dims must match or one must be 1.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double c);
Tensor add_const(const Tensor& x, double c);
Tensor neg(const Tensor& x);

Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);  // rejects non-positive inputs
Tensor gelu(const Tensor& x);
Tensor clamp_min(const Tensor& x, double lo);

// Identity forward, blocks gradient flow.
Tensor stop_gradient(const Tensor& x);

// Matrix product on the trailing two axes. Leading axes are batch dims and
// broadcast against each other (missing or size-1 dims repeat).
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x, int axis_a, int axis_b);
Tensor concat(const std::vector<Tensor>& xs, int axis);
Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t len);

Tensor sum(const Tensor& x, int axis, bool keepdim = false);
Tensor mean(const Tensor& x, int axis, bool keepdim = false);
Tensor reduce_max(const Tensor& x, int axis, bool keepdim = false);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// Max-shifted softmax along `axis`. Non-finite inputs raise numeric_error.
Tensor softmax(const Tensor& x, int axis);
// log(sum(exp(x))) along `axis`, stabilised by the detached row max.
Tensor logsumexp(const Tensor& x, int axis, bool keepdim = false);

// Normalises the last axis to zero mean and unit variance, then applies the
// per-channel affine. gain/bias have shape [last_dim].
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// Scales rows (last axis) to unit Euclidean norm; rows with norm <= eps are
// scaled by 1/eps instead.
Tensor l2_normalize(const Tensor& x, double eps = 1e-12);

// Row gather / scatter-add on axis 0 of a rank-2 table.
Tensor embedding_lookup(const Tensor& table, const std::vector<std::int64_t>& ids);
Tensor scatter_rows(const Tensor& src, const std::vector<std::int64_t>& ids,
                    std::int64_t num_rows);

}  // namespace groupseg
