#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dnas/dataset.hpp"
#include "dnas/optim.hpp"
#include "dnas/supernet.hpp"

namespace dnas {

enum class AlphaMode { BILEVEL, FIXED_ZERO, SDARTS_RS };

const char* alpha_mode_tag(AlphaMode m);
std::optional<AlphaMode> alpha_mode_from_tag(const std::string& tag);

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    double lr_w = 0.05;
    double lr_alpha = 0.05;
    double momentum = 0.9;
    AlphaMode alpha_mode = AlphaMode::BILEVEL;
    double rs_sigma = 0.0;
    bool rs_per_epoch = false; // default: fresh alpha perturbation per batch
    std::size_t finetune_epochs = 5;
    long topology_finetune_epochs = -1; // -1 inherits finetune_epochs
    bool finetune_alpha = true;         // false: weight-only fine-tuning
    std::size_t strength_epochs = 0;    // 0 means 3 * finetune_epochs
    std::uint64_t seed = 1;

    void validate() const;
    std::size_t effective_topology_finetune() const;
    std::size_t effective_strength_epochs() const;
    std::uint64_t hash() const; // binds records to the exact recipe
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
    std::vector<std::vector<double>> alpha; // snapshot, one vector per edge
    std::optional<double> skip_conv_gap;
    double wall_time = 0.0;
};

struct RunLog {
    std::vector<EpochRecord> epochs;
};

void save_runlog(const RunLog& log, const std::string& path);
RunLog load_runlog(const std::string& path);

struct EvalResult {
    double accuracy = 0.0;
    double loss = 0.0;
};

// Deterministic full-split pass; never mutates the supernet.
EvalResult evaluate(Supernet& net, const Dataset& ds, const std::string& split);

// Alternating per batch: one w-step on a train batch (alpha fixed), one
// alpha-step on a val batch (w fixed). FIXED_ZERO skips the alpha step;
// SDARTS_RS perturbs alpha with N(0, rs_sigma^2) for the w-step only.
RunLog bilevel_train(Supernet& net, const Dataset& ds, const TrainConfig& cfg);

// Momentum buffers and the val-batch cursor, carried across training
// segments when a run is checkpointed mid-flight.
struct TrainCarry {
    OptState opt;
    std::uint64_t val_cursor = 0;
};

// Trains epochs [first_epoch, first_epoch + count); equivalent to one
// bilevel_train call when executed back to back with a shared carry.
RunLog bilevel_train_segment(Supernet& net, const Dataset& ds, const TrainConfig& cfg,
                             std::size_t first_epoch, std::size_t count, TrainCarry* carry);

// Continues the same alternation for a few epochs; decided edges receive
// weight updates only. order_salt decorrelates batch orders between
// successive fine-tune calls within one selection run.
RunLog fine_tune(Supernet& net, const Dataset& ds, const TrainConfig& cfg,
                 std::size_t epochs, std::uint64_t order_salt = 1);

struct ScratchResult {
    double val_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
};

// Fresh weights, fixed recipe, weight-only training of the discrete net.
ScratchResult train_from_scratch(const CellSpec& spec, const Genotype& g,
                                 const Dataset& ds, const TrainConfig& cfg,
                                 std::uint64_t seed);

// Batch assembly helpers shared with the CLI and tests.
Tensor gather_inputs(const Dataset& ds, const std::vector<std::size_t>& idx,
                     std::size_t begin, std::size_t count);
std::vector<int> gather_labels(const Dataset& ds, const std::vector<std::size_t>& idx,
                               std::size_t begin, std::size_t count);

} // namespace dnas
