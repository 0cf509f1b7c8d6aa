#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dnas/searchspace.hpp"
#include "dnas/tensor.hpp"

namespace dnas {

// Architecture logits and per-op activity masks, parallel to spec.edges.
// Masked ops contribute exactly zero to the mixed output. Edges whose alpha
// is frozen (discretized, or the whole table in fixed-alpha mode) never
// receive alpha updates.
struct AlphaTable {
    std::vector<Tensor> alpha;           // one vector per edge, len = pool size
    std::vector<std::vector<bool>> mask; // true = active
    std::vector<bool> edge_frozen;
    bool frozen = false;
};

// Optional capture of intermediate activations during forward; used by the
// proposition probe and diagnostics.
struct ForwardProbe {
    std::vector<std::vector<double>> node_values;             // per node
    std::vector<std::vector<std::vector<double>>> op_outputs; // [edge][pool idx]
};

// The continuously relaxed network: per-edge mixtures of candidate ops
// weighted by softmaxed alpha, plus a linear classification head over the
// mean of intermediate node values. Single-threaded; deep clones are
// independent.
class Supernet {
public:
    Supernet(CellSpec spec, std::size_t classes, std::uint64_t seed,
             bool mask_renormalize = true);

    const CellSpec& spec() const { return spec_; }
    std::size_t classes() const { return classes_; }
    std::uint64_t seed() const { return seed_; }
    bool mask_renormalize() const { return mask_renormalize_; }

    AlphaTable& alpha_table() { return alpha_; }
    const AlphaTable& alpha_table() const { return alpha_; }

    // x is (batch, feature_width); returns logits (batch, classes). Training
    // forwards advance the persistent noise stream; eval forwards draw from
    // a pure stream keyed by eval_noise_index and leave the state untouched.
    Tensor forward(Tape& tape, const Tensor& x, bool training,
                   std::uint64_t eval_noise_index = 0, ForwardProbe* probe = nullptr);

    Tensor mixed_edge_forward(Tape& tape, std::size_t edge, const Tensor& x,
                              bool training, CounterRng& noise_rng,
                              ForwardProbe* probe = nullptr);

    void mask_op(std::size_t edge, OpKind op);
    void unmask_op(std::size_t edge, OpKind op);
    void discretize_edge(std::size_t edge, OpKind op);
    void prune_node_inputs(std::size_t node, const std::vector<std::size_t>& keep_edges);

    // Temporary whole-edge removal used by the topology phase.
    void set_edge_disabled(std::size_t edge, bool disabled);

    bool is_discretized(std::size_t edge) const { return discretized_[edge].has_value(); }
    std::optional<OpKind> discretized_op(std::size_t edge) const { return discretized_[edge]; }
    bool is_pruned(std::size_t edge) const { return pruned_[edge]; }
    bool all_edges_decided() const;

    // Copy with two randomly chosen pool-compatible edges swapped (weights,
    // alpha and masks move together); *this is untouched.
    Supernet shuffled(std::uint64_t seed) const;

    // Softmax weights over active ops (one-hot for a discretized edge).
    std::vector<double> alpha_softmax(std::size_t edge) const;
    // Mean over edges of (skip weight - dense_relu weight); defined only
    // when every pool is exactly {SKIP, DENSE_RELU}.
    double skip_conv_gap() const;

    std::vector<Tensor> weight_params();            // stable order, incl. head
    std::vector<Tensor> alpha_params();             // unfrozen edges only
    std::vector<std::size_t> alpha_param_edges() const;

    // Active non-ZERO candidate pool indices on an edge.
    std::vector<std::size_t> active_candidates(std::size_t edge) const;

    void apply_genotype(const Genotype& g);
    Genotype to_genotype() const; // requires all edges decided and nodes pruned to 2

    Supernet clone() const;
    std::uint64_t state_fingerprint() const; // bits of weights+alpha+masks+state

    void save_checkpoint(const std::string& path) const;
    static Supernet load_checkpoint(const std::string& path);

    std::uint64_t noise_counter() const { return noise_counter_; }

private:
    Supernet() = default;
    void init_params();
    Tensor op_forward(Tape& tape, std::size_t edge, std::size_t pool_idx, const Tensor& x,
                      CounterRng& noise_rng, ForwardProbe* probe);
    std::size_t pool_index(std::size_t edge, OpKind op) const;

    CellSpec spec_;
    std::size_t classes_ = 0;
    std::uint64_t seed_ = 0;
    bool mask_renormalize_ = true;

    AlphaTable alpha_;
    // weights_[edge][pool_idx] = {W, b} for parametric ops, empty tensors otherwise.
    struct OpWeights {
        Tensor w, b;
    };
    std::vector<std::vector<OpWeights>> weights_;
    Tensor head_w_, head_b_;

    std::vector<std::optional<OpKind>> discretized_;
    std::vector<bool> pruned_;
    std::vector<bool> disabled_;

    std::uint64_t noise_key_ = 0;
    std::uint64_t noise_counter_ = 0;
};

} // namespace dnas
