#include "dnas/optim.hpp"

#include <cmath>

namespace dnas {

void sgd_momentum_step(std::vector<Tensor>& params, OptState& state, double lr) {
    if (state.velocity.size() < params.size()) state.velocity.resize(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& w = params[p];
        const auto& g = w.grad();
        if (g.size() != w.values().size())
            throw InvariantError("sgd_momentum_step: gradient size " + std::to_string(g.size()) +
                                 " does not match parameter size " + std::to_string(w.values().size()));
        auto& v = state.velocity[p];
        if (v.size() != g.size()) v.assign(g.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!std::isfinite(g[i]))
                throw NumericError("sgd_momentum_step: non-finite gradient at parameter " +
                                   std::to_string(p));
            v[i] = state.momentum * v[i] + g[i];
            w.values()[i] -= lr * v[i];
        }
    }
    ++state.step_count;
}

void gd_step(std::vector<Tensor>& params, double lr) {
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& w = params[p];
        const auto& g = w.grad();
        if (g.size() != w.values().size())
            throw InvariantError("gd_step: gradient size does not match parameter size");
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!std::isfinite(g[i]))
                throw NumericError("gd_step: non-finite gradient at parameter " + std::to_string(p));
            w.values()[i] -= lr * g[i];
        }
    }
}

} // namespace dnas
