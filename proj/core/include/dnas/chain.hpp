#pragma once

#include <cstdint>

#include "dnas/dataset.hpp"
#include "dnas/tensor.hpp"
#include "dnas/trainer.hpp"

namespace dnas {

// Plain feed-forward stack (dense_relu layers of equal width plus a linear
// head). The no-mixing baseline for the edge-shuffle robustness comparison:
// unlike the supernet, each layer here computes a brand-new representation,
// so swapping trained layers at test time scrambles it.
class ChainNet {
public:
    ChainNet(std::size_t depth, std::size_t width, std::size_t classes, std::uint64_t seed);

    Tensor forward(Tape& tape, const Tensor& x);
    std::vector<Tensor> params();

    RunLog train(const Dataset& ds, const TrainConfig& cfg);
    EvalResult evaluate(const Dataset& ds, const std::string& split);

    // Copy with one random pair of hidden layers swapped; *this untouched.
    ChainNet swapped_layers(std::uint64_t seed) const;
    ChainNet clone() const;

    std::size_t depth() const { return layers_.size(); }

private:
    ChainNet() = default;
    struct Layer {
        Tensor w, b;
    };
    std::vector<Layer> layers_;
    Tensor head_w_, head_b_;
    std::size_t width_ = 0;
    std::size_t classes_ = 0;
};

} // namespace dnas
