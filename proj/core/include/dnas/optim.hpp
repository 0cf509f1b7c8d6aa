#pragma once

#include <cstdint>
#include <vector>

#include "dnas/tensor.hpp"

namespace dnas {

// Hyperparameters plus per-parameter momentum buffers for the alternating
// (w, alpha) updates. Velocity buffers are keyed by position in the params
// span handed to sgd_momentum_step, so callers must pass a stable list.
struct OptState {
    double learning_rate_w = 0.05;
    double learning_rate_alpha = 0.05;
    double momentum = 0.9; // in [0,1)
    std::uint64_t step_count = 0;

    std::vector<std::vector<double>> velocity; // lazily sized per param
};

// v <- momentum * v + g;  w <- w - lr * v. Reads gradients from each
// tensor's grad buffer. Throws on shape mismatch or non-finite gradients.
void sgd_momentum_step(std::vector<Tensor>& params, OptState& state, double lr);

// Plain gradient descent (no momentum buffer), used for the alpha step.
void gd_step(std::vector<Tensor>& params, double lr);

} // namespace dnas
