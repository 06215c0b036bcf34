#include "latpoison/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace latpoison::ad {

GradientComparison compare_gradients(GradCheckProblem& problem, double fd_step) {
    GradientComparison result;
    for (auto& p : problem.params) {
        p.zero_grad();
    }
    problem.loss().backward();
    for (auto& p : problem.params) {
        const auto g = p.grad();
        if (g.empty()) {
            result.analytic.insert(result.analytic.end(), p.size(), 0.0);
        } else {
            result.analytic.insert(result.analytic.end(), g.begin(), g.end());
        }
    }
    for (auto& p : problem.params) {
        auto values = p.mutable_values();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double original = values[i];
            values[i] = original + fd_step;
            const double up = problem.loss().item();
            values[i] = original - fd_step;
            const double down = problem.loss().item();
            values[i] = original;
            result.numeric.push_back((up - down) / (2.0 * fd_step));
        }
    }
    return result;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                          double floor, double relative_floor) {
    if (analytic.size() != numeric.size()) {
        throw std::invalid_argument("max_relative_error: length mismatch");
    }
    double scale = 0.0;
    for (double n : numeric) {
        scale = std::max(scale, std::abs(n));
    }
    const double effective_floor = std::max(floor, relative_floor * scale);
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max(std::abs(numeric[i]), effective_floor);
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

double grad_check(const GradCheckBuilder& build, std::uint64_t seed, double fd_step) {
    if (!(fd_step >= 1e-6 && fd_step <= 1e-4)) {
        throw std::invalid_argument("grad_check: fd_step must lie in [1e-6, 1e-4]");
    }
    auto problem = build(seed);
    const auto cmp = compare_gradients(problem, fd_step);
    return max_relative_error(cmp.analytic, cmp.numeric);
}

}  // namespace latpoison::ad
