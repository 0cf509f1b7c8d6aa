#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dnas/dataset.hpp"
#include "dnas/supernet.hpp"
#include "dnas/trainer.hpp"

namespace dnas {

struct CandidateScore {
    std::string item; // op tag (op phase) or "src->dst" (topology phase)
    double score = 0.0;
};

struct Decision {
    std::string phase;       // "op" | "topology"
    std::size_t index = 0;   // edge index or node index
    std::vector<CandidateScore> scores;
    std::string chosen;      // op tag, or "src->dst,src->dst"
    std::vector<double> alpha_snapshot; // recorded by magnitude-criterion runs
    double post_val_accuracy = 0.0;
    bool trivial = false;    // decided without evaluation
};

struct SelectionTrace {
    std::string method; // "mag" | "pt" | "pt-mag"
    std::uint64_t seed = 0;
    std::vector<Decision> decisions;
};

void save_trace(const SelectionTrace& trace, const std::string& path);
SelectionTrace load_trace(const std::string& path);

// Pure readout of alpha: per edge the largest-alpha non-ZERO op, per node
// the two input edges with the largest per-edge max alpha. Ties break to
// the lowest op index, then the lowest edge index.
Genotype magnitude_select(const Supernet& net);

// Progressive operation selection: edges in seeded random order; each
// decision masks candidates one at a time, keeps the argmin-accuracy op,
// discretizes, then fine-tunes. magnitude_criterion swaps the masking score
// for argmax alpha while keeping the identical schedule.
SelectionTrace pt_select_operations(Supernet& net, const Dataset& ds, const TrainConfig& cfg,
                                    std::uint64_t select_seed, bool magnitude_criterion = false);

// Topology phase: per node, temporarily zero each input edge, keep the two
// with the lowest removal accuracy, prune the rest, fine-tune. Requires the
// op phase to be complete.
SelectionTrace pt_select_topology(Supernet& net, const Dataset& ds, const TrainConfig& cfg,
                                  std::uint64_t select_seed, bool magnitude_criterion = false);

struct SelectionResult {
    Genotype genotype;
    SelectionTrace trace;
};

SelectionResult pt_select(Supernet& net, const Dataset& ds, const TrainConfig& cfg,
                          std::uint64_t select_seed);
SelectionResult pt_mag_select(Supernet& net, const Dataset& ds, const TrainConfig& cfg,
                              std::uint64_t select_seed);

struct OpStrength {
    OpKind op;
    double val_accuracy = 0.0;
};

// Ground-truth operation strength: clone, discretize the clone to each
// candidate, fine-tune to the convergence budget, evaluate. The original
// supernet is untouched.
std::vector<OpStrength> measure_op_strength(const Supernet& net, std::size_t edge,
                                            const Dataset& ds, const TrainConfig& cfg);

} // namespace dnas
