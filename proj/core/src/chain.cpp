#include "dnas/chain.hpp"

#include <cmath>

#include "dnas/optim.hpp"
#include "dnas/rng.hpp"

namespace dnas {

ChainNet::ChainNet(std::size_t depth, std::size_t width, std::size_t classes,
                   std::uint64_t seed)
    : width_(width), classes_(classes) {
    if (depth < 2) throw InvariantError("ChainNet: need at least 2 layers to swap");
    const double bound = 1.0 / std::sqrt(static_cast<double>(width));
    for (std::size_t l = 0; l < depth; ++l) {
        CounterRng rng(derive_key(seed, "chain/init", l));
        Layer layer;
        layer.w = Tensor::zeros({width, width}, true);
        for (double& v : layer.w.values()) v = rng.next_uniform(-bound, bound);
        layer.b = Tensor::zeros({width}, true);
        for (double& v : layer.b.values()) v = rng.next_uniform(-bound, bound);
        layers_.push_back(std::move(layer));
    }
    CounterRng rng(derive_key(seed, "chain/init", depth));
    head_w_ = Tensor::zeros({width, classes}, true);
    for (double& v : head_w_.values()) v = rng.next_uniform(-bound, bound);
    head_b_ = Tensor::zeros({classes}, true);
    for (double& v : head_b_.values()) v = rng.next_uniform(-bound, bound);
}

Tensor ChainNet::forward(Tape& tape, const Tensor& x) {
    Tensor h = x;
    for (Layer& l : layers_)
        h = tape.relu(tape.bias_add(tape.matmul(h, l.w), l.b));
    return tape.bias_add(tape.matmul(h, head_w_), head_b_);
}

std::vector<Tensor> ChainNet::params() {
    std::vector<Tensor> out;
    for (Layer& l : layers_) {
        out.push_back(l.w);
        out.push_back(l.b);
    }
    out.push_back(head_w_);
    out.push_back(head_b_);
    return out;
}

RunLog ChainNet::train(const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    RunLog log;
    OptState state;
    state.momentum = cfg.momentum;
    auto ps = params();
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order = ds.train_idx;
        CounterRng order_rng(derive_key(cfg.seed, "chain/order", epoch));
        order_rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - begin);
            Tensor x = gather_inputs(ds, order, begin, count);
            const auto y = gather_labels(ds, order, begin, count);
            Tape tape;
            for (Tensor& p : ps) tape.watch(p);
            Tensor loss = tape.cross_entropy(forward(tape, x), y);
            loss_sum += loss.item();
            ++batches;
            tape.backward(loss);
            sgd_momentum_step(ps, state, cfg.lr_w);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
        rec.val_accuracy = ds.val_idx.empty() ? 0.0 : evaluate(ds, "val").accuracy;
        log.epochs.push_back(std::move(rec));
    }
    return log;
}

EvalResult ChainNet::evaluate(const Dataset& ds, const std::string& split) {
    const auto& idx = ds.split(split);
    if (idx.empty()) throw InvariantError("ChainNet::evaluate: empty split");
    double loss_sum = 0.0;
    std::size_t correct = 0;
    constexpr std::size_t kBatch = 64;
    for (std::size_t begin = 0; begin < idx.size(); begin += kBatch) {
        const std::size_t count = std::min(kBatch, idx.size() - begin);
        Tensor x = gather_inputs(ds, idx, begin, count);
        const auto y = gather_labels(ds, idx, begin, count);
        Tape tape;
        Tensor logits = forward(tape, x);
        loss_sum += tape.cross_entropy(logits, y).item() * static_cast<double>(count);
        const std::size_t c = classes_;
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < c; ++j)
                if (logits.values()[i * c + j] > logits.values()[i * c + best]) best = j;
            if (best == static_cast<std::size_t>(y[i])) ++correct;
        }
    }
    return {static_cast<double>(correct) / static_cast<double>(idx.size()),
            loss_sum / static_cast<double>(idx.size())};
}

ChainNet ChainNet::swapped_layers(std::uint64_t seed) const {
    ChainNet copy = clone();
    CounterRng rng(derive_key(seed, "chain/swap"));
    const std::size_t n = layers_.size();
    const std::size_t a = static_cast<std::size_t>(rng.next_below(n));
    std::size_t b = static_cast<std::size_t>(rng.next_below(n - 1));
    if (b >= a) ++b;
    std::swap(copy.layers_[a], copy.layers_[b]);
    return copy;
}

ChainNet ChainNet::clone() const {
    ChainNet copy;
    copy.width_ = width_;
    copy.classes_ = classes_;
    for (const Layer& l : layers_)
        copy.layers_.push_back(Layer{l.w.clone(), l.b.clone()});
    copy.head_w_ = head_w_.clone();
    copy.head_b_ = head_b_.clone();
    return copy;
}

} // namespace dnas
