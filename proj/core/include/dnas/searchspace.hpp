#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dnas/errors.hpp"

namespace dnas {

// Candidate operations. SKIP is exact identity, ZERO outputs zeros and is
// never selectable in a genotype (it only shapes the topology), NOISE
// outputs seeded N(0,1) ignoring its input, DENSE* own trainable weights.
enum class OpKind { SKIP, ZERO, NOISE, DENSE, DENSE_RELU, DENSE_TANH };

const char* op_tag(OpKind k);
std::optional<OpKind> op_from_tag(const std::string& tag);
bool op_has_params(OpKind k);
std::size_t op_param_count(OpKind k, std::size_t feature_width);

enum class SpaceVariant { FULL, S1P, S2P, S3P, S4P };

const char* variant_tag(SpaceVariant v);
std::optional<SpaceVariant> variant_from_tag(const std::string& tag);

struct EdgeSpec {
    std::size_t src = 0;
    std::size_t dst = 0;
    std::vector<OpKind> pool;
};

// Complete cell DAG: input nodes 0..num_inputs-1, intermediate nodes after.
// Every intermediate node has one edge from each lower-indexed node; edges
// are ordered by (dst, src). Immutable after construction.
struct CellSpec {
    SpaceVariant variant = SpaceVariant::S2P;
    std::size_t num_inputs = 2;
    std::size_t num_intermediate = 2;
    std::size_t feature_width = 8;
    std::vector<EdgeSpec> edges;

    std::size_t num_nodes() const { return num_inputs + num_intermediate; }
    std::size_t num_edges() const { return edges.size(); }
    // Index into edges for (src,dst); throws if the pair is not an edge.
    std::size_t edge_index(std::size_t src, std::size_t dst) const;
    // Edge indices feeding the given node, ascending by source.
    std::vector<std::size_t> incoming(std::size_t node) const;

    // Canonical single-line descriptor (also the hash preimage).
    std::string descriptor() const;
    std::uint64_t hash() const;
};

// A discrete architecture: every intermediate node keeps exactly two input
// edges, each retained edge carries one non-ZERO op.
struct Genotype {
    // Parallel arrays sorted by (dst, src): one entry per retained edge.
    std::vector<std::size_t> edge_indices;
    std::vector<OpKind> ops;

    bool operator==(const Genotype&) const = default;
};

// Per-edge pools for S1P, keyed by "src->dst".
using S1Pools = std::map<std::string, std::vector<OpKind>>;

CellSpec build_space(SpaceVariant variant, std::size_t num_inputs,
                     std::size_t num_intermediate, std::size_t feature_width,
                     const S1Pools* s1_pools = nullptr);

// Inverse of CellSpec::descriptor(); used when loading checkpoints.
CellSpec cellspec_from_descriptor(const std::string& line);

// Exhaustive, duplicate-free, deterministic enumeration. ZERO never appears
// as an op choice. Throws if the total count exceeds cap.
std::vector<Genotype> enumerate_genotypes(const CellSpec& spec, std::size_t cap = 10000);

// Closed-form count of the enumeration above.
std::uint64_t count_genotypes(const CellSpec& spec);

// Canonical form: retained edges sorted by (dst, src), rendered
// "op@src->dst" joined by ';'.
std::string genotype_to_string(const CellSpec& spec, const Genotype& g);
Genotype parse_genotype(const std::string& text, const CellSpec& spec);

void validate_genotype(const CellSpec& spec, const Genotype& g);

} // namespace dnas
