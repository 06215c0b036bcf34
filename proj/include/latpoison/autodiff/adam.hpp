#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "latpoison/autodiff/tensor.hpp"

namespace latpoison::ad {

class NonFiniteGradient : public std::runtime_error {
  public:
    explicit NonFiniteGradient(const std::string& parameter)
        : std::runtime_error("non-finite gradient in parameter '" + parameter + "'"),
          parameter_(parameter) {}

    const std::string& parameter() const { return parameter_; }

  private:
    std::string parameter_;
};

struct AdamState {
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    std::uint64_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    // Sizes the moment buffers to the given parameters.
    static AdamState for_parameters(std::span<const Tensor> params);
};

// One bias-corrected Adam update applied in place to each parameter using its
// accumulated grad (a parameter with no grad is treated as a zero gradient).
// All gradients are validated before any parameter is modified.
void adam_step(std::span<Tensor> params, AdamState& state, double lr);

// Convenience owner of a parameter list and its Adam state.
class Adam {
  public:
    Adam(std::vector<Tensor> params, double lr);

    void step() { adam_step(params_, state_, lr_); }
    void zero_grad();

    const AdamState& state() const { return state_; }
    std::span<Tensor> params() { return params_; }

  private:
    std::vector<Tensor> params_;
    AdamState state_;
    double lr_;
};

}  // namespace latpoison::ad
