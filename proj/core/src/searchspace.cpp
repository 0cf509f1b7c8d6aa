#include "dnas/searchspace.hpp"

#include <algorithm>
#include <sstream>

#include "dnas/rng.hpp"

namespace dnas {

const char* op_tag(OpKind k) {
    switch (k) {
        case OpKind::SKIP: return "skip";
        case OpKind::ZERO: return "zero";
        case OpKind::NOISE: return "noise";
        case OpKind::DENSE: return "dense";
        case OpKind::DENSE_RELU: return "dense_relu";
        case OpKind::DENSE_TANH: return "dense_tanh";
    }
    return "?";
}

std::optional<OpKind> op_from_tag(const std::string& tag) {
    static const std::pair<const char*, OpKind> table[] = {
        {"skip", OpKind::SKIP},           {"zero", OpKind::ZERO},
        {"noise", OpKind::NOISE},         {"dense", OpKind::DENSE},
        {"dense_relu", OpKind::DENSE_RELU}, {"dense_tanh", OpKind::DENSE_TANH},
    };
    for (const auto& [t, k] : table)
        if (tag == t) return k;
    return std::nullopt;
}

bool op_has_params(OpKind k) {
    return k == OpKind::DENSE || k == OpKind::DENSE_RELU || k == OpKind::DENSE_TANH;
}

std::size_t op_param_count(OpKind k, std::size_t feature_width) {
    return op_has_params(k) ? feature_width * feature_width + feature_width : 0;
}

const char* variant_tag(SpaceVariant v) {
    switch (v) {
        case SpaceVariant::FULL: return "full";
        case SpaceVariant::S1P: return "s1p";
        case SpaceVariant::S2P: return "s2p";
        case SpaceVariant::S3P: return "s3p";
        case SpaceVariant::S4P: return "s4p";
    }
    return "?";
}

std::optional<SpaceVariant> variant_from_tag(const std::string& tag) {
    static const std::pair<const char*, SpaceVariant> table[] = {
        {"full", SpaceVariant::FULL}, {"s1p", SpaceVariant::S1P},
        {"s2p", SpaceVariant::S2P},   {"s3p", SpaceVariant::S3P},
        {"s4p", SpaceVariant::S4P},
    };
    for (const auto& [t, k] : table)
        if (tag == t) return k;
    return std::nullopt;
}

std::size_t CellSpec::edge_index(std::size_t src, std::size_t dst) const {
    for (std::size_t i = 0; i < edges.size(); ++i)
        if (edges[i].src == src && edges[i].dst == dst) return i;
    throw InvariantError("edge " + std::to_string(src) + "->" + std::to_string(dst) +
                         " not in cell spec");
}

std::vector<std::size_t> CellSpec::incoming(std::size_t node) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < edges.size(); ++i)
        if (edges[i].dst == node) out.push_back(i);
    return out;
}

std::string CellSpec::descriptor() const {
    std::ostringstream os;
    os << variant_tag(variant) << ' ' << num_inputs << ' ' << num_intermediate << ' '
       << feature_width;
    for (const EdgeSpec& e : edges) {
        os << ' ' << e.src << "->" << e.dst << ':';
        for (std::size_t i = 0; i < e.pool.size(); ++i) {
            if (i) os << ',';
            os << op_tag(e.pool[i]);
        }
    }
    return os.str();
}

std::uint64_t CellSpec::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : descriptor()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

std::vector<OpKind> pool_for(SpaceVariant v) {
    switch (v) {
        case SpaceVariant::FULL:
            return {OpKind::SKIP, OpKind::ZERO, OpKind::NOISE, OpKind::DENSE,
                    OpKind::DENSE_RELU, OpKind::DENSE_TANH};
        case SpaceVariant::S2P:
            return {OpKind::SKIP, OpKind::DENSE_RELU};
        case SpaceVariant::S3P:
            return {OpKind::ZERO, OpKind::SKIP, OpKind::DENSE_RELU};
        case SpaceVariant::S4P:
            return {OpKind::NOISE, OpKind::DENSE_RELU};
        case SpaceVariant::S1P:
            break;
    }
    return {};
}

std::vector<OpKind> selectable_pool(const EdgeSpec& e) {
    std::vector<OpKind> out;
    for (OpKind k : e.pool)
        if (k != OpKind::ZERO) out.push_back(k);
    return out;
}

// All 2-subsets of the incoming edges, lexicographic by edge index pair.
std::vector<std::pair<std::size_t, std::size_t>> edge_pairs(const std::vector<std::size_t>& in) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < in.size(); ++i)
        for (std::size_t j = i + 1; j < in.size(); ++j)
            pairs.emplace_back(in[i], in[j]);
    return pairs;
}

} // namespace

CellSpec build_space(SpaceVariant variant, std::size_t num_inputs,
                     std::size_t num_intermediate, std::size_t feature_width,
                     const S1Pools* s1_pools) {
    if (num_inputs < 1 || num_intermediate < 1 || feature_width < 1)
        throw InvariantError("build_space: all dimensions must be >= 1");
    CellSpec spec;
    spec.variant = variant;
    spec.num_inputs = num_inputs;
    spec.num_intermediate = num_intermediate;
    spec.feature_width = feature_width;
    for (std::size_t dst = num_inputs; dst < num_inputs + num_intermediate; ++dst) {
        for (std::size_t src = 0; src < dst; ++src) {
            EdgeSpec e;
            e.src = src;
            e.dst = dst;
            if (variant == SpaceVariant::S1P) {
                if (!s1_pools)
                    throw UsageError("build_space: S1P requires per-edge pool config");
                const std::string key =
                    std::to_string(src) + "->" + std::to_string(dst);
                auto it = s1_pools->find(key);
                if (it == s1_pools->end())
                    throw UsageError("build_space: S1P pool missing for edge " + key);
                e.pool = it->second;
            } else {
                e.pool = pool_for(variant);
            }
            if (e.pool.empty()) throw InvariantError("build_space: empty pool on edge");
            for (std::size_t i = 0; i < e.pool.size(); ++i)
                for (std::size_t j = i + 1; j < e.pool.size(); ++j)
                    if (e.pool[i] == e.pool[j])
                        throw InvariantError("build_space: duplicate op in pool");
            spec.edges.push_back(std::move(e));
        }
    }
    std::sort(spec.edges.begin(), spec.edges.end(), [](const EdgeSpec& a, const EdgeSpec& b) {
        return std::tie(a.dst, a.src) < std::tie(b.dst, b.src);
    });
    return spec;
}

CellSpec cellspec_from_descriptor(const std::string& line) {
    std::istringstream is(line);
    std::string vtag;
    CellSpec spec;
    if (!(is >> vtag >> spec.num_inputs >> spec.num_intermediate >> spec.feature_width))
        throw UsageError("cellspec_from_descriptor: truncated descriptor '" + line + "'");
    auto v = variant_from_tag(vtag);
    if (!v) throw UsageError("cellspec_from_descriptor: unknown variant '" + vtag + "'");
    spec.variant = *v;
    std::string edge_tok;
    while (is >> edge_tok) {
        const std::size_t arrow = edge_tok.find("->");
        const std::size_t colon = edge_tok.find(':');
        if (arrow == std::string::npos || colon == std::string::npos || colon < arrow)
            throw UsageError("cellspec_from_descriptor: bad edge token '" + edge_tok + "'");
        EdgeSpec e;
        e.src = std::stoul(edge_tok.substr(0, arrow));
        e.dst = std::stoul(edge_tok.substr(arrow + 2, colon - arrow - 2));
        std::string pool_str = edge_tok.substr(colon + 1);
        std::size_t pos = 0;
        while (pos <= pool_str.size()) {
            std::size_t end = pool_str.find(',', pos);
            if (end == std::string::npos) end = pool_str.size();
            const std::string tag = pool_str.substr(pos, end - pos);
            auto op = op_from_tag(tag);
            if (!op) throw UsageError("cellspec_from_descriptor: unknown op tag '" + tag + "'");
            e.pool.push_back(*op);
            if (end == pool_str.size()) break;
            pos = end + 1;
        }
        spec.edges.push_back(std::move(e));
    }
    if (spec.edges.empty())
        throw UsageError("cellspec_from_descriptor: descriptor has no edges");
    return spec;
}

std::uint64_t count_genotypes(const CellSpec& spec) {
    // Pool factors depend on which edges are retained, so fold them into a
    // full sum over topologies. Uniform-pool spaces reduce to the closed
    // form prod_j C(num_inputs+j, 2) * pool_eff^(2*num_intermediate).
    std::uint64_t count = 0;
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> per_node;
    for (std::size_t node = spec.num_inputs; node < spec.num_nodes(); ++node) {
        const auto in = spec.incoming(node);
        if (in.size() < 2)
            throw InvariantError("count_genotypes: node " + std::to_string(node) +
                                 " has fewer than 2 input edges");
        per_node.push_back(edge_pairs(in));
    }
    std::vector<std::size_t> choice(per_node.size(), 0);
    while (true) {
        std::uint64_t ops = 1;
        for (std::size_t n = 0; n < per_node.size(); ++n) {
            const auto& [e1, e2] = per_node[n][choice[n]];
            ops *= selectable_pool(spec.edges[e1]).size();
            ops *= selectable_pool(spec.edges[e2]).size();
        }
        count += ops;
        std::size_t k = 0;
        while (k < choice.size() && ++choice[k] == per_node[k].size()) choice[k++] = 0;
        if (k == choice.size()) break;
    }
    return count;
}

std::vector<Genotype> enumerate_genotypes(const CellSpec& spec, std::size_t cap) {
    const std::uint64_t total = count_genotypes(spec);
    if (total > cap)
        throw InvariantError("enumerate_genotypes: count " + std::to_string(total) +
                             " exceeds cap " + std::to_string(cap));
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> per_node;
    for (std::size_t node = spec.num_inputs; node < spec.num_nodes(); ++node) {
        auto in = spec.incoming(node);
        if (in.size() < 2)
            throw InvariantError("enumerate_genotypes: node has fewer than 2 input edges");
        per_node.push_back(edge_pairs(in));
    }

    std::vector<Genotype> out;
    out.reserve(total);
    std::vector<std::size_t> topo(per_node.size(), 0);
    while (true) {
        // Retained edges for this topology, ascending by edge index (edges
        // are already ordered by (dst, src)).
        std::vector<std::size_t> retained;
        for (std::size_t n = 0; n < per_node.size(); ++n) {
            retained.push_back(per_node[n][topo[n]].first);
            retained.push_back(per_node[n][topo[n]].second);
        }
        std::sort(retained.begin(), retained.end());

        std::vector<std::vector<OpKind>> pools;
        for (std::size_t e : retained) pools.push_back(selectable_pool(spec.edges[e]));

        std::vector<std::size_t> op_choice(retained.size(), 0);
        while (true) {
            Genotype g;
            g.edge_indices = retained;
            for (std::size_t i = 0; i < retained.size(); ++i)
                g.ops.push_back(pools[i][op_choice[i]]);
            out.push_back(std::move(g));
            std::size_t k = retained.size();
            while (k > 0 && ++op_choice[k - 1] == pools[k - 1].size()) op_choice[--k] = 0;
            if (k == 0) break;
        }
        std::size_t k = 0;
        while (k < topo.size() && ++topo[k] == per_node[k].size()) topo[k++] = 0;
        if (k == topo.size()) break;
    }
    return out;
}

void validate_genotype(const CellSpec& spec, const Genotype& g) {
    if (g.edge_indices.size() != g.ops.size())
        throw InvariantError("genotype: edge/op list size mismatch");
    if (g.edge_indices.size() != 2 * spec.num_intermediate)
        throw InvariantError("genotype: expected " + std::to_string(2 * spec.num_intermediate) +
                             " retained edges, got " + std::to_string(g.edge_indices.size()));
    std::vector<std::size_t> per_node(spec.num_nodes(), 0);
    for (std::size_t i = 0; i < g.edge_indices.size(); ++i) {
        const std::size_t e = g.edge_indices[i];
        if (e >= spec.num_edges()) throw InvariantError("genotype: edge index out of range");
        if (i > 0 && g.edge_indices[i - 1] >= e)
            throw InvariantError("genotype: retained edges must be strictly ascending");
        const OpKind op = g.ops[i];
        if (op == OpKind::ZERO) throw InvariantError("genotype: zero op is not selectable");
        const auto& pool = spec.edges[e].pool;
        if (std::find(pool.begin(), pool.end(), op) == pool.end())
            throw InvariantError(std::string("genotype: op ") + op_tag(op) +
                                 " not in pool of edge " + std::to_string(spec.edges[e].src) +
                                 "->" + std::to_string(spec.edges[e].dst));
        per_node[spec.edges[e].dst]++;
    }
    for (std::size_t node = spec.num_inputs; node < spec.num_nodes(); ++node)
        if (per_node[node] != 2)
            throw InvariantError("genotype: node " + std::to_string(node) + " retains " +
                                 std::to_string(per_node[node]) + " input edges, expected 2");
}

std::string genotype_to_string(const CellSpec& spec, const Genotype& g) {
    validate_genotype(spec, g);
    std::ostringstream os;
    for (std::size_t i = 0; i < g.edge_indices.size(); ++i) {
        const EdgeSpec& e = spec.edges[g.edge_indices[i]];
        if (i) os << ';';
        os << op_tag(g.ops[i]) << '@' << e.src << "->" << e.dst;
    }
    return os.str();
}

Genotype parse_genotype(const std::string& text, const CellSpec& spec) {
    Genotype g;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find(';', pos);
        if (end == std::string::npos) end = text.size();
        const std::string tok = text.substr(pos, end - pos);
        const std::size_t at = tok.find('@');
        const std::size_t arrow = tok.find("->");
        if (tok.empty() || at == std::string::npos || arrow == std::string::npos ||
            arrow < at || at == 0 || arrow + 2 >= tok.size() || arrow == at + 1)
            throw UsageError("parse_genotype: malformed token '" + tok + "' at position " +
                             std::to_string(pos));
        const std::string tag = tok.substr(0, at);
        auto op = op_from_tag(tag);
        if (!op) throw UsageError("parse_genotype: unknown op tag '" + tag + "' at position " +
                                  std::to_string(pos));
        std::size_t src = 0, dst = 0;
        try {
            src = std::stoul(tok.substr(at + 1, arrow - at - 1));
            dst = std::stoul(tok.substr(arrow + 2));
        } catch (const std::exception&) {
            throw UsageError("parse_genotype: bad node index in '" + tok + "' at position " +
                             std::to_string(pos));
        }
        g.edge_indices.push_back(spec.edge_index(src, dst));
        g.ops.push_back(*op);
        if (end == text.size()) break;
        pos = end + 1;
    }
    // Accept any edge order on input; canonicalize before validating.
    std::vector<std::size_t> order(g.edge_indices.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return g.edge_indices[a] < g.edge_indices[b];
    });
    Genotype sorted;
    for (std::size_t i : order) {
        sorted.edge_indices.push_back(g.edge_indices[i]);
        sorted.ops.push_back(g.ops[i]);
    }
    validate_genotype(spec, sorted);
    return sorted;
}

} // namespace dnas
