#include "latpoison/autodiff/adam.hpp"

#include <cmath>

namespace latpoison::ad {

AdamState AdamState::for_parameters(std::span<const Tensor> params) {
    AdamState state;
    state.first_moment.reserve(params.size());
    state.second_moment.reserve(params.size());
    for (const auto& p : params) {
        state.first_moment.emplace_back(p.size(), 0.0);
        state.second_moment.emplace_back(p.size(), 0.0);
    }
    return state;
}

void adam_step(std::span<Tensor> params, AdamState& state, double lr) {
    if (!(lr > 0.0)) {
        throw std::invalid_argument("adam_step: learning rate must be positive");
    }
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
        throw ShapeError("adam_step", "state tracks " + std::to_string(state.first_moment.size()) +
                                          " parameters, got " + std::to_string(params.size()));
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (state.first_moment[p].size() != params[p].size() ||
            state.second_moment[p].size() != params[p].size()) {
            throw ShapeError("adam_step", "moment buffer size mismatch for parameter '" +
                                              params[p].name() + "'");
        }
        for (double g : params[p].grad()) {
            if (!std::isfinite(g)) {
                throw NonFiniteGradient(params[p].name().empty() ? "#" + std::to_string(p)
                                                                 : params[p].name());
            }
        }
    }
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto values = params[p].mutable_values();
        const auto grad = params[p].grad();
        auto& m = state.first_moment[p];
        auto& v = state.second_moment[p];
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double g = grad.empty() ? 0.0 : grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            values[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

Adam::Adam(std::vector<Tensor> params, double lr)
    : params_(std::move(params)), state_(AdamState::for_parameters(params_)), lr_(lr) {}

void Adam::zero_grad() {
    for (auto& p : params_) {
        p.zero_grad();
    }
}

}  // namespace latpoison::ad
