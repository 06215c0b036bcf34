#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "latpoison/autodiff/tensor.hpp"

namespace latpoison::ad {

// A scalar-valued graph over a set of parameters. `loss` rebuilds the graph
// from the current parameter values on every call.
struct GradCheckProblem {
    std::vector<Tensor> params;
    std::function<Tensor()> loss;
};

using GradCheckBuilder = std::function<GradCheckProblem(std::uint64_t seed)>;

struct GradientComparison {
    std::vector<double> analytic;
    std::vector<double> numeric;
};

// Analytic gradients (one backward pass) against central differences over
// every parameter element, flattened in parameter order.
GradientComparison compare_gradients(GradCheckProblem& problem, double fd_step);

// max_i |analytic_i - numeric_i| / max(|numeric_i|, floor, relative_floor * max_j |numeric_j|).
// Central differences carry absolute rounding noise of order eps * |loss| / step,
// so elements far below the gradient's scale are compared at that scale
// instead of against their own (unresolvable) magnitude.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                          double floor = 1e-6, double relative_floor = 1e-3);

// Builds the problem for `seed` and returns the worst relative error.
// fd_step must lie in [1e-6, 1e-4].
double grad_check(const GradCheckBuilder& build, std::uint64_t seed, double fd_step);

}  // namespace latpoison::ad
