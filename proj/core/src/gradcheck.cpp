#include "dnas/gradcheck.hpp"

#include <cmath>

namespace dnas {

double grad_check(const LossBuilder& build, std::vector<Tensor>& params, double epsilon) {
    if (!(epsilon > 0.0) || epsilon > 1e-2)
        throw InvariantError("grad_check: epsilon must be in (0, 1e-2], got " +
                             std::to_string(epsilon));

    auto eval = [&] {
        Tape tape;
        Tensor loss = build(tape);
        if (!loss.is_scalar()) throw InvariantError("grad_check: builder must return a scalar loss");
        return loss.item();
    };

    const double l0 = eval();
    if (eval() != l0)
        throw InvariantError("grad_check: model is not deterministic under fixed parameters");

    // One reverse-mode pass for the analytic gradients.
    Tape tape;
    for (Tensor& p : params) tape.watch(p);
    Tensor loss = build(tape);
    tape.backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (Tensor& p : params) analytic.push_back(p.grad());

    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& vals = params[p].values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double saved = vals[i];
            vals[i] = saved + epsilon;
            const double lp = eval();
            vals[i] = saved - epsilon;
            const double lm = eval();
            vals[i] = saved;
            const double fd = (lp - lm) / (2.0 * epsilon);
            const double ad = analytic[p][i];
            const double rel = std::abs(ad - fd) / std::max(std::abs(fd), 1e-8);
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

} // namespace dnas
