#include "dnas/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "dnas/optim.hpp"
#include "dnas/rng.hpp"

namespace dnas {

using nlohmann::json;

namespace {

constexpr std::size_t kEvalBatch = 64;

std::size_t argmax_correct(const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t b = logits.shape()[0], c = logits.shape()[1];
    std::size_t correct = 0;
    for (std::size_t i = 0; i < b; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < c; ++j)
            if (logits.values()[i * c + j] > logits.values()[i * c + best]) best = j;
        if (best == static_cast<std::size_t>(labels[i])) ++correct;
    }
    return correct;
}

} // namespace

const char* alpha_mode_tag(AlphaMode m) {
    switch (m) {
        case AlphaMode::BILEVEL: return "bilevel";
        case AlphaMode::FIXED_ZERO: return "fixed_zero";
        case AlphaMode::SDARTS_RS: return "sdarts_rs";
    }
    return "?";
}

std::optional<AlphaMode> alpha_mode_from_tag(const std::string& tag) {
    if (tag == "bilevel") return AlphaMode::BILEVEL;
    if (tag == "fixed_zero") return AlphaMode::FIXED_ZERO;
    if (tag == "sdarts_rs") return AlphaMode::SDARTS_RS;
    return std::nullopt;
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw UsageError("train config: batch_size must be > 0");
    if (!(lr_w > 0.0) || !(lr_alpha > 0.0))
        throw UsageError("train config: learning rates must be > 0");
    if (momentum < 0.0 || momentum >= 1.0)
        throw UsageError("train config: momentum must be in [0, 1)");
    // sdarts_rs with rs_sigma == 0 degenerates to plain bilevel training
    // (bit-identical trajectory); the CLI rejects it as a likely mistake but
    // the library accepts it so the equivalence stays exercisable.
    if (rs_sigma < 0.0) throw UsageError("train config: rs_sigma must be >= 0");
}

std::size_t TrainConfig::effective_topology_finetune() const {
    return topology_finetune_epochs < 0 ? finetune_epochs
                                        : static_cast<std::size_t>(topology_finetune_epochs);
}

std::size_t TrainConfig::effective_strength_epochs() const {
    return strength_epochs == 0 ? 3 * finetune_epochs : strength_epochs;
}

std::uint64_t TrainConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto fold = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ull;
        }
    };
    auto fold_d = [&](double v) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, sizeof(bits));
        fold(bits);
    };
    fold(epochs);
    fold(batch_size);
    fold_d(lr_w);
    fold_d(lr_alpha);
    fold_d(momentum);
    fold(static_cast<std::uint64_t>(alpha_mode));
    fold_d(rs_sigma);
    fold(rs_per_epoch ? 1 : 0);
    fold(finetune_epochs);
    fold(static_cast<std::uint64_t>(topology_finetune_epochs));
    fold(finetune_alpha ? 1 : 0);
    fold(strength_epochs);
    return h;
}

Tensor gather_inputs(const Dataset& ds, const std::vector<std::size_t>& idx,
                     std::size_t begin, std::size_t count) {
    Tensor x = Tensor::zeros({count, ds.feature_width});
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = 0; j < ds.feature_width; ++j)
            x.values()[i * ds.feature_width + j] = ds.row(idx[begin + i])[j];
    return x;
}

std::vector<int> gather_labels(const Dataset& ds, const std::vector<std::size_t>& idx,
                               std::size_t begin, std::size_t count) {
    std::vector<int> y(count);
    for (std::size_t i = 0; i < count; ++i) y[i] = ds.labels[idx[begin + i]];
    return y;
}

EvalResult evaluate(Supernet& net, const Dataset& ds, const std::string& split) {
    const auto& idx = ds.split(split);
    if (idx.empty()) throw InvariantError("evaluate: split '" + split + "' is empty");
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < idx.size(); begin += kEvalBatch) {
        const std::size_t count = std::min(kEvalBatch, idx.size() - begin);
        Tensor x = gather_inputs(ds, idx, begin, count);
        const auto y = gather_labels(ds, idx, begin, count);
        Tape tape;
        Tensor logits = net.forward(tape, x, /*training=*/false, begin);
        Tensor loss = tape.cross_entropy(logits, y);
        loss_sum += loss.item() * static_cast<double>(count);
        correct += argmax_correct(logits, y);
    }
    return {static_cast<double>(correct) / static_cast<double>(idx.size()),
            loss_sum / static_cast<double>(idx.size())};
}

namespace {

// One alternating training pass shared by search, fine-tuning and scratch
// training. alpha updates are controlled by cfg.alpha_mode plus the
// allow_alpha switch (fine_tune with finetune_alpha=false, scratch runs).
RunLog run_epochs(Supernet& net, const Dataset& ds, const TrainConfig& cfg,
                  std::size_t first_epoch, std::size_t count, bool allow_alpha,
                  std::uint64_t order_salt, TrainCarry* carry) {
    cfg.validate();
    const bool alpha_enabled = allow_alpha && cfg.alpha_mode != AlphaMode::FIXED_ZERO &&
                               !net.alpha_table().frozen;
    if (alpha_enabled && ds.val_idx.empty())
        throw InvariantError("train: val split is empty but alpha updates are enabled");

    RunLog log;
    TrainCarry local;
    TrainCarry& state = carry ? *carry : local;
    OptState& w_state = state.opt;
    w_state.learning_rate_w = cfg.lr_w;
    w_state.learning_rate_alpha = cfg.lr_alpha;
    w_state.momentum = cfg.momentum;

    auto weight_params = net.weight_params();
    CounterRng rs_rng(derive_key(cfg.seed, "train/rs", order_salt));
    if (cfg.alpha_mode == AlphaMode::SDARTS_RS && !cfg.rs_per_epoch)
        rs_rng.set_counter(state.opt.step_count * 64); // segment-stable offset
    std::uint64_t& val_cursor = state.val_cursor;
    std::vector<std::size_t> val_order = ds.val_idx;

    for (std::size_t epoch = first_epoch; epoch < first_epoch + count; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::size_t> train_order = ds.train_idx;
        CounterRng order_rng(derive_key(cfg.seed, "train/order", order_salt * 1315423911ull + epoch));
        order_rng.shuffle(train_order);

        // Per-epoch RS draw is reused across every w-step of the epoch.
        std::vector<std::vector<double>> epoch_noise;
        if (alpha_enabled && cfg.alpha_mode == AlphaMode::SDARTS_RS && cfg.rs_per_epoch) {
            for (std::size_t e : net.alpha_param_edges()) {
                std::vector<double> z(net.alpha_table().alpha[e].numel());
                for (double& v : z) v = rs_rng.next_normal();
                epoch_noise.push_back(std::move(z));
            }
        }

        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < train_order.size(); begin += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, train_order.size() - begin);
            Tensor x = gather_inputs(ds, train_order, begin, count);
            const auto y = gather_labels(ds, train_order, begin, count);

            // ---- w-step (alpha fixed; optionally RS-perturbed) ----
            std::vector<std::vector<double>> saved_alpha;
            const bool perturb = cfg.alpha_mode == AlphaMode::SDARTS_RS && cfg.rs_sigma > 0.0;
            if (perturb) {
                const auto edges = net.alpha_param_edges();
                for (std::size_t i = 0; i < edges.size(); ++i) {
                    auto& a = net.alpha_table().alpha[edges[i]].values();
                    saved_alpha.push_back(a);
                    for (std::size_t k = 0; k < a.size(); ++k) {
                        const double z = cfg.rs_per_epoch ? epoch_noise[i][k] : rs_rng.next_normal();
                        a[k] += cfg.rs_sigma * z;
                    }
                }
            }
            {
                Tape tape;
                for (Tensor& p : weight_params) tape.watch(p);
                Tensor logits = net.forward(tape, x, /*training=*/true);
                Tensor loss = tape.cross_entropy(logits, y);
                if (!std::isfinite(loss.item()))
                    throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
                loss_sum += loss.item();
                ++batches;
                tape.backward(loss);
                sgd_momentum_step(weight_params, w_state, cfg.lr_w);
            }
            if (perturb) {
                const auto edges = net.alpha_param_edges();
                for (std::size_t i = 0; i < edges.size(); ++i)
                    net.alpha_table().alpha[edges[i]].values() = saved_alpha[i];
            }

            // ---- alpha-step on the next val batch (w fixed) ----
            if (alpha_enabled) {
                auto alpha_params = net.alpha_params();
                if (!alpha_params.empty()) {
                    if (val_cursor % val_order.size() == 0) {
                        CounterRng vr(derive_key(cfg.seed, "train/val_order",
                                                 order_salt * 2654435761ull +
                                                     val_cursor / val_order.size()));
                        val_order = ds.val_idx;
                        vr.shuffle(val_order);
                    }
                    const std::size_t vcount =
                        std::min(cfg.batch_size, val_order.size() -
                                                     (val_cursor % val_order.size()));
                    Tensor vx = gather_inputs(ds, val_order, val_cursor % val_order.size(), vcount);
                    const auto vy = gather_labels(ds, val_order, val_cursor % val_order.size(), vcount);
                    val_cursor += vcount;
                    Tape tape;
                    for (Tensor& p : alpha_params) tape.watch(p);
                    Tensor logits = net.forward(tape, vx, /*training=*/true);
                    Tensor loss = tape.cross_entropy(logits, vy);
                    if (!std::isfinite(loss.item()))
                        throw NumericError("train: non-finite val loss at epoch " +
                                           std::to_string(epoch));
                    tape.backward(loss);
                    gd_step(alpha_params, cfg.lr_alpha);
                }
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
        rec.val_accuracy = ds.val_idx.empty() ? 0.0 : evaluate(net, ds, "val").accuracy;
        for (std::size_t e = 0; e < net.spec().num_edges(); ++e)
            rec.alpha.push_back(net.alpha_table().alpha[e].values());
        try {
            rec.skip_conv_gap = net.skip_conv_gap();
        } catch (const InvariantError&) {
            rec.skip_conv_gap = std::nullopt;
        }
        rec.wall_time =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.epochs.push_back(std::move(rec));
    }
    return log;
}

} // namespace

RunLog bilevel_train(Supernet& net, const Dataset& ds, const TrainConfig& cfg) {
    if (cfg.alpha_mode == AlphaMode::FIXED_ZERO) net.alpha_table().frozen = true;
    return run_epochs(net, ds, cfg, cfg.epochs, /*allow_alpha=*/true, /*order_salt=*/0);
}

RunLog fine_tune(Supernet& net, const Dataset& ds, const TrainConfig& cfg,
                 std::size_t epochs, std::uint64_t order_salt) {
    return run_epochs(net, ds, cfg, epochs, /*allow_alpha=*/cfg.finetune_alpha, order_salt);
}

ScratchResult train_from_scratch(const CellSpec& spec, const Genotype& g,
                                 const Dataset& ds, const TrainConfig& cfg,
                                 std::uint64_t seed) {
    validate_genotype(spec, g);
    if (spec.feature_width != ds.feature_width)
        throw InvariantError("train_from_scratch: spec/dataset width mismatch");
    Supernet net(spec, ds.classes, derive_key(seed, "scratch/init"));
    net.apply_genotype(g);
    net.alpha_table().frozen = true;
    TrainConfig scratch_cfg = cfg;
    scratch_cfg.alpha_mode = AlphaMode::FIXED_ZERO;
    scratch_cfg.seed = derive_key(seed, "scratch/train");
    run_epochs(net, ds, scratch_cfg, scratch_cfg.epochs, /*allow_alpha=*/false,
               /*order_salt=*/0);
    ScratchResult r;
    r.val_accuracy = evaluate(net, ds, "val").accuracy;
    r.test_accuracy = evaluate(net, ds, "test").accuracy;
    r.seed = seed;
    r.config_hash = cfg.hash();
    return r;
}

void save_runlog(const RunLog& log, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw UsageError("save_runlog: cannot open " + path);
    for (const EpochRecord& r : log.epochs) {
        json j;
        j["epoch"] = r.epoch;
        j["train_loss"] = r.train_loss;
        j["val_accuracy"] = r.val_accuracy;
        j["alpha"] = r.alpha;
        if (r.skip_conv_gap)
            j["skip_conv_gap"] = *r.skip_conv_gap;
        else
            j["skip_conv_gap"] = nullptr;
        j["wall_time"] = r.wall_time;
        f << j.dump() << '\n';
    }
}

RunLog load_runlog(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("load_runlog: cannot open " + path);
    RunLog log;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        EpochRecord r;
        r.epoch = j.at("epoch").get<std::size_t>();
        r.train_loss = j.at("train_loss").get<double>();
        r.val_accuracy = j.at("val_accuracy").get<double>();
        r.alpha = j.at("alpha").get<std::vector<std::vector<double>>>();
        if (!j.at("skip_conv_gap").is_null())
            r.skip_conv_gap = j.at("skip_conv_gap").get<double>();
        r.wall_time = j.at("wall_time").get<double>();
        log.epochs.push_back(std::move(r));
    }
    return log;
}

} // namespace dnas
