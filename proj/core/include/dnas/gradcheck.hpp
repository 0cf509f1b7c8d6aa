#pragma once

#include <functional>
#include <vector>

#include "dnas/tensor.hpp"

namespace dnas {

// Rebuilds the scalar loss from scratch on a fresh tape. Must be
// deterministic: called repeatedly at perturbed parameter values.
using LossBuilder = std::function<Tensor(Tape&)>;

// Compares reverse-mode gradients against central finite differences.
// Returns max over all parameter coordinates of
//   |autodiff - central_diff| / max(|central_diff|, 1e-8).
// Throws if the builder is not deterministic at fixed parameters.
double grad_check(const LossBuilder& build, std::vector<Tensor>& params, double epsilon);

} // namespace dnas
