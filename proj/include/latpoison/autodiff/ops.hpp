#pragma once

#include <span>

#include "latpoison/autodiff/tensor.hpp"

namespace latpoison::ad {

// Lower clamp applied to predictions before taking logs in bce().
inline constexpr double kBceClamp = 1e-7;

// input[batch x in] * weights[in x out] + bias[out], bias broadcast over rows.
Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias);
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);

// x[b, :] + coeffs[b] * row for each row b of a [batch x d] tensor; row has d
// elements. coeffs are constants.
Tensor add_scaled_row(const Tensor& x, const Tensor& row, std::span<const double> coeffs);
// x[b, :] * row elementwise for every row b.
Tensor mul_row(const Tensor& x, const Tensor& row);

Tensor sigmoid(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor exp(const Tensor& x);
Tensor square(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Mean over all elements of -[t ln p + (1 - t) ln(1 - p)], with p clamped to
// [kBceClamp, 1 - kBceClamp]. The gradient is evaluated at the clamped
// prediction and is not zeroed outside the clamp range, so saturated
// predictions keep a (small) training signal.
Tensor bce(const Tensor& prediction, const Tensor& target);

// Mean over the batch (leading axis) of 0.5 * sum_d (mu^2 + exp(lv) - 1 - lv).
// A 1-D input is a batch of one.
Tensor kl_standard_normal(const Tensor& mu, const Tensor& log_var);

// sum |x|; the subgradient at 0 is 0.
Tensor l1_norm(const Tensor& x);
// sqrt(sum x^2); the gradient at the zero vector is taken as 0.
Tensor l2_norm(const Tensor& x);

}  // namespace latpoison::ad
