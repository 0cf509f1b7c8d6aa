#include "dnas/supernet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dnas {

namespace {

std::string hex_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

double parse_hex_double(const std::string& s) {
    return std::strtod(s.c_str(), nullptr);
}

void fold_bits(std::uint64_t& h, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xff;
        h *= 0x100000001b3ull;
    }
}

void fold_bits(std::uint64_t& h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= 0x100000001b3ull;
    }
}

} // namespace

Supernet::Supernet(CellSpec spec, std::size_t classes, std::uint64_t seed,
                   bool mask_renormalize)
    : spec_(std::move(spec)),
      classes_(classes),
      seed_(seed),
      mask_renormalize_(mask_renormalize),
      noise_key_(derive_key(seed, "supernet/noise")) {
    if (classes_ < 2) throw InvariantError("Supernet: need at least 2 classes");
    const std::size_t E = spec_.num_edges();
    alpha_.alpha.reserve(E);
    alpha_.mask.reserve(E);
    for (const EdgeSpec& e : spec_.edges) {
        alpha_.alpha.push_back(Tensor::zeros({e.pool.size()}, true));
        alpha_.mask.push_back(std::vector<bool>(e.pool.size(), true));
    }
    alpha_.edge_frozen.assign(E, false);
    discretized_.assign(E, std::nullopt);
    pruned_.assign(E, false);
    disabled_.assign(E, false);
    init_params();
}

void Supernet::init_params() {
    const std::size_t d = spec_.feature_width;
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    std::uint64_t slot = 0;
    weights_.resize(spec_.num_edges());
    for (std::size_t e = 0; e < spec_.num_edges(); ++e) {
        weights_[e].resize(spec_.edges[e].pool.size());
        for (std::size_t k = 0; k < spec_.edges[e].pool.size(); ++k) {
            if (!op_has_params(spec_.edges[e].pool[k])) {
                ++slot;
                continue;
            }
            CounterRng rng(derive_key(seed_, "supernet/init", slot++));
            OpWeights& ow = weights_[e][k];
            ow.w = Tensor::zeros({d, d}, true);
            for (double& v : ow.w.values()) v = rng.next_uniform(-bound, bound);
            ow.b = Tensor::zeros({d}, true);
            for (double& v : ow.b.values()) v = rng.next_uniform(-bound, bound);
        }
    }
    CounterRng rng(derive_key(seed_, "supernet/init", slot));
    head_w_ = Tensor::zeros({d, classes_}, true);
    for (double& v : head_w_.values()) v = rng.next_uniform(-bound, bound);
    head_b_ = Tensor::zeros({classes_}, true);
    for (double& v : head_b_.values()) v = rng.next_uniform(-bound, bound);
}

std::size_t Supernet::pool_index(std::size_t edge, OpKind op) const {
    const auto& pool = spec_.edges[edge].pool;
    for (std::size_t k = 0; k < pool.size(); ++k)
        if (pool[k] == op) return k;
    throw InvariantError(std::string("op ") + op_tag(op) + " not in pool of edge " +
                         std::to_string(spec_.edges[edge].src) + "->" +
                         std::to_string(spec_.edges[edge].dst));
}

Tensor Supernet::op_forward(Tape& tape, std::size_t edge, std::size_t pool_idx,
                            const Tensor& x, CounterRng& noise_rng, ForwardProbe* probe) {
    const OpKind kind = spec_.edges[edge].pool[pool_idx];
    Tensor out;
    switch (kind) {
        case OpKind::SKIP:
            out = x;
            break;
        case OpKind::ZERO:
            out = Tensor::zeros(x.shape());
            break;
        case OpKind::NOISE:
            out = tape.gaussian_noise_const(x.shape(), noise_rng);
            break;
        case OpKind::DENSE:
            out = tape.bias_add(tape.matmul(x, weights_[edge][pool_idx].w),
                                weights_[edge][pool_idx].b);
            break;
        case OpKind::DENSE_RELU:
            out = tape.relu(tape.bias_add(tape.matmul(x, weights_[edge][pool_idx].w),
                                          weights_[edge][pool_idx].b));
            break;
        case OpKind::DENSE_TANH:
            out = tape.tanh(tape.bias_add(tape.matmul(x, weights_[edge][pool_idx].w),
                                          weights_[edge][pool_idx].b));
            break;
    }
    if (probe) {
        if (probe->op_outputs.empty()) probe->op_outputs.resize(spec_.num_edges());
        if (probe->op_outputs[edge].empty())
            probe->op_outputs[edge].resize(spec_.edges[edge].pool.size());
        probe->op_outputs[edge][pool_idx] = out.values();
    }
    return out;
}

Tensor Supernet::mixed_edge_forward(Tape& tape, std::size_t edge, const Tensor& x,
                                    bool training, CounterRng& noise_rng,
                                    ForwardProbe* probe) {
    (void)training;
    if (x.shape().size() != 2 || x.shape()[1] != spec_.feature_width)
        throw InvariantError("mixed_edge_forward: input shape " + shape_str(x.shape()) +
                             " does not match feature width " +
                             std::to_string(spec_.feature_width));
    if (pruned_[edge]) throw InvariantError("mixed_edge_forward: edge is pruned");

    if (discretized_[edge]) {
        return op_forward(tape, edge, pool_index(edge, *discretized_[edge]), x, noise_rng,
                          probe);
    }

    const auto& pool = spec_.edges[edge].pool;
    const auto& mask = alpha_.mask[edge];
    bool any_active = false;
    for (bool m : mask) any_active = any_active || m;
    if (!any_active) throw InvariantError("mixed_edge_forward: all ops masked on edge");

    // Renormalizing mode softmaxes over the surviving ops; the alternative
    // keeps full-pool weights and simply drops masked terms.
    const std::vector<bool> support =
        mask_renormalize_ ? std::vector<bool>(mask.begin(), mask.end())
                          : std::vector<bool>(pool.size(), true);
    Tensor theta = tape.masked_softmax(alpha_.alpha[edge], support);

    std::vector<Tensor> terms;
    std::vector<std::size_t> term_idx;
    for (std::size_t k = 0; k < pool.size(); ++k) {
        if (!mask[k] || pool[k] == OpKind::ZERO) continue;
        terms.push_back(op_forward(tape, edge, k, x, noise_rng, probe));
        term_idx.push_back(k);
    }
    if (terms.empty()) {
        // Only ZERO survives: the mixture is exactly zero.
        return Tensor::zeros(x.shape());
    }
    // Select the matching theta entries by zeroing the others via weighted
    // sum over a gathered weight vector: build sub-vector of theta.
    // weighted_sum wants a weight vector aligned with terms.
    std::vector<bool> gather(pool.size(), false);
    for (std::size_t k : term_idx) gather[k] = true;
    // Multiply each term by its weight and sum via weighted_sum on a
    // compacted weight vector. Compaction must stay on the tape, so reuse
    // masked_softmax trick is not applicable; instead use weighted_sum with
    // the full theta and zero tensors for non-term ops.
    std::vector<Tensor> padded;
    padded.reserve(pool.size());
    std::size_t t = 0;
    for (std::size_t k = 0; k < pool.size(); ++k) {
        if (gather[k])
            padded.push_back(terms[t++]);
        else
            padded.push_back(Tensor::zeros(x.shape()));
    }
    return tape.weighted_sum(theta, padded);
}

Tensor Supernet::forward(Tape& tape, const Tensor& x, bool training,
                         std::uint64_t eval_noise_index, ForwardProbe* probe) {
    if (x.shape().size() != 2 || x.shape()[1] != spec_.feature_width)
        throw InvariantError("forward: input shape " + shape_str(x.shape()) +
                             " does not match feature width " +
                             std::to_string(spec_.feature_width));
    CounterRng noise_rng(training ? derive_key(noise_key_, "train")
                                  : derive_key(noise_key_, "eval", eval_noise_index),
                         training ? noise_counter_ : 0);

    std::vector<Tensor> node_value(spec_.num_nodes());
    for (std::size_t i = 0; i < spec_.num_inputs; ++i) node_value[i] = x;

    for (std::size_t node = spec_.num_inputs; node < spec_.num_nodes(); ++node) {
        Tensor acc;
        for (std::size_t e : spec_.incoming(node)) {
            if (pruned_[e] || disabled_[e]) continue;
            Tensor m = mixed_edge_forward(tape, e, node_value[spec_.edges[e].src], training,
                                          noise_rng, probe);
            acc = acc.defined() ? tape.add(acc, m) : m;
        }
        node_value[node] = acc.defined() ? acc : Tensor::zeros(x.shape());
    }

    if (training) noise_counter_ = noise_rng.counter();

    if (probe) {
        probe->node_values.clear();
        for (const Tensor& v : node_value) probe->node_values.push_back(v.values());
    }

    Tensor cell = node_value[spec_.num_inputs];
    for (std::size_t node = spec_.num_inputs + 1; node < spec_.num_nodes(); ++node)
        cell = tape.add(cell, node_value[node]);
    cell = tape.scale(cell, 1.0 / static_cast<double>(spec_.num_intermediate));
    return tape.bias_add(tape.matmul(cell, head_w_), head_b_);
}

void Supernet::mask_op(std::size_t edge, OpKind op) {
    if (discretized_[edge]) throw InvariantError("mask_op: edge already discretized");
    const std::size_t k = pool_index(edge, op);
    if (!alpha_.mask[edge][k]) throw InvariantError("mask_op: op already masked");
    std::size_t active = 0;
    for (bool m : alpha_.mask[edge]) active += m ? 1 : 0;
    if (active <= 1) throw InvariantError("mask_op: cannot mask the last active op");
    alpha_.mask[edge][k] = false;
}

void Supernet::unmask_op(std::size_t edge, OpKind op) {
    if (discretized_[edge]) throw InvariantError("unmask_op: edge already discretized");
    const std::size_t k = pool_index(edge, op);
    if (alpha_.mask[edge][k]) throw InvariantError("unmask_op: op is not masked");
    alpha_.mask[edge][k] = true;
}

void Supernet::discretize_edge(std::size_t edge, OpKind op) {
    if (discretized_[edge]) throw InvariantError("discretize_edge: edge already decided");
    if (op == OpKind::ZERO) throw InvariantError("discretize_edge: zero op is not selectable");
    const std::size_t k = pool_index(edge, op);
    if (!alpha_.mask[edge][k]) throw InvariantError("discretize_edge: op is masked");
    discretized_[edge] = op;
    alpha_.edge_frozen[edge] = true;
}

void Supernet::prune_node_inputs(std::size_t node, const std::vector<std::size_t>& keep_edges) {
    if (node < spec_.num_inputs || node >= spec_.num_nodes())
        throw InvariantError("prune_node_inputs: not an intermediate node");
    if (keep_edges.size() != 2) throw InvariantError("prune_node_inputs: keep-set size must be 2");
    const auto in = spec_.incoming(node);
    std::size_t active = 0;
    for (std::size_t e : in) active += pruned_[e] ? 0 : 1;
    if (active <= 2) throw InvariantError("prune_node_inputs: node has no excess input edges");
    for (std::size_t k : keep_edges) {
        if (std::find(in.begin(), in.end(), k) == in.end())
            throw InvariantError("prune_node_inputs: keep edge does not feed the node");
        if (pruned_[k]) throw InvariantError("prune_node_inputs: keep edge already pruned");
    }
    for (std::size_t e : in)
        if (std::find(keep_edges.begin(), keep_edges.end(), e) == keep_edges.end())
            pruned_[e] = true;
}

void Supernet::set_edge_disabled(std::size_t edge, bool disabled) {
    disabled_[edge] = disabled;
}

bool Supernet::all_edges_decided() const {
    for (std::size_t e = 0; e < spec_.num_edges(); ++e)
        if (!pruned_[e] && !discretized_[e]) return false;
    return true;
}

Supernet Supernet::shuffled(std::uint64_t seed) const {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < spec_.num_edges(); ++a)
        for (std::size_t b = a + 1; b < spec_.num_edges(); ++b)
            if (spec_.edges[a].pool == spec_.edges[b].pool) pairs.emplace_back(a, b);
    if (pairs.empty()) throw InvariantError("shuffled: no compatible edge pair");
    CounterRng rng(derive_key(seed, "shuffle"));
    const auto [a, b] = pairs[static_cast<std::size_t>(rng.next_below(pairs.size()))];

    Supernet copy = clone();
    std::swap(copy.weights_[a], copy.weights_[b]);
    std::swap(copy.alpha_.alpha[a], copy.alpha_.alpha[b]);
    std::swap(copy.alpha_.mask[a], copy.alpha_.mask[b]);
    // std::vector<bool> references cannot be std::swapped element-wise.
    const bool fa = copy.alpha_.edge_frozen[a];
    copy.alpha_.edge_frozen[a] = copy.alpha_.edge_frozen[b];
    copy.alpha_.edge_frozen[b] = fa;
    std::swap(copy.discretized_[a], copy.discretized_[b]);
    const bool pa = copy.pruned_[a];
    copy.pruned_[a] = copy.pruned_[b];
    copy.pruned_[b] = pa;
    return copy;
}

std::vector<double> Supernet::alpha_softmax(std::size_t edge) const {
    const auto& pool = spec_.edges[edge].pool;
    std::vector<double> w(pool.size(), 0.0);
    if (discretized_[edge]) {
        w[pool_index(edge, *discretized_[edge])] = 1.0;
        return w;
    }
    const auto& av = alpha_.alpha[edge].values();
    const auto& mask = alpha_.mask[edge];
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pool.size(); ++k)
        if (mask[k]) mx = std::max(mx, av[k]);
    double denom = 0.0;
    for (std::size_t k = 0; k < pool.size(); ++k)
        if (mask[k]) {
            w[k] = std::exp(av[k] - mx);
            denom += w[k];
        }
    for (std::size_t k = 0; k < pool.size(); ++k)
        if (mask[k]) w[k] /= denom;
    return w;
}

double Supernet::skip_conv_gap() const {
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t e = 0; e < spec_.num_edges(); ++e) {
        const auto& pool = spec_.edges[e].pool;
        const bool s2_pair = pool.size() == 2 &&
                             ((pool[0] == OpKind::SKIP && pool[1] == OpKind::DENSE_RELU) ||
                              (pool[0] == OpKind::DENSE_RELU && pool[1] == OpKind::SKIP));
        if (!s2_pair)
            throw InvariantError("skip_conv_gap: edge pool is not a {skip, dense_relu} pair");
        if (pruned_[e]) continue;
        const auto w = alpha_softmax(e);
        const std::size_t skip_idx = pool[0] == OpKind::SKIP ? 0 : 1;
        sum += w[skip_idx] - w[1 - skip_idx];
        ++used;
    }
    if (used == 0) throw InvariantError("skip_conv_gap: no active edges");
    return sum / static_cast<double>(used);
}

std::vector<Tensor> Supernet::weight_params() {
    std::vector<Tensor> out;
    for (std::size_t e = 0; e < spec_.num_edges(); ++e)
        for (std::size_t k = 0; k < weights_[e].size(); ++k)
            if (weights_[e][k].w.defined()) {
                out.push_back(weights_[e][k].w);
                out.push_back(weights_[e][k].b);
            }
    out.push_back(head_w_);
    out.push_back(head_b_);
    return out;
}

std::vector<Tensor> Supernet::alpha_params() {
    std::vector<Tensor> out;
    if (alpha_.frozen) return out;
    for (std::size_t e = 0; e < spec_.num_edges(); ++e)
        if (!alpha_.edge_frozen[e] && !pruned_[e]) out.push_back(alpha_.alpha[e]);
    return out;
}

std::vector<std::size_t> Supernet::alpha_param_edges() const {
    std::vector<std::size_t> out;
    if (alpha_.frozen) return out;
    for (std::size_t e = 0; e < spec_.num_edges(); ++e)
        if (!alpha_.edge_frozen[e] && !pruned_[e]) out.push_back(e);
    return out;
}

std::vector<std::size_t> Supernet::active_candidates(std::size_t edge) const {
    std::vector<std::size_t> out;
    const auto& pool = spec_.edges[edge].pool;
    for (std::size_t k = 0; k < pool.size(); ++k)
        if (alpha_.mask[edge][k] && pool[k] != OpKind::ZERO) out.push_back(k);
    return out;
}

void Supernet::apply_genotype(const Genotype& g) {
    validate_genotype(spec_, g);
    for (std::size_t i = 0; i < g.edge_indices.size(); ++i)
        discretize_edge(g.edge_indices[i], g.ops[i]);
    for (std::size_t node = spec_.num_inputs; node < spec_.num_nodes(); ++node) {
        std::vector<std::size_t> keep;
        for (std::size_t e : spec_.incoming(node))
            if (std::find(g.edge_indices.begin(), g.edge_indices.end(), e) !=
                g.edge_indices.end())
                keep.push_back(e);
        const auto in = spec_.incoming(node);
        if (in.size() > 2) prune_node_inputs(node, keep);
    }
}

Genotype Supernet::to_genotype() const {
    Genotype g;
    for (std::size_t e = 0; e < spec_.num_edges(); ++e) {
        if (pruned_[e]) continue;
        if (!discretized_[e])
            throw InvariantError("to_genotype: edge " + std::to_string(e) + " undecided");
        g.edge_indices.push_back(e);
        g.ops.push_back(*discretized_[e]);
    }
    validate_genotype(spec_, g);
    return g;
}

Supernet Supernet::clone() const {
    Supernet copy;
    copy.spec_ = spec_;
    copy.classes_ = classes_;
    copy.seed_ = seed_;
    copy.mask_renormalize_ = mask_renormalize_;
    copy.alpha_.frozen = alpha_.frozen;
    copy.alpha_.edge_frozen = alpha_.edge_frozen;
    copy.alpha_.mask = alpha_.mask;
    for (const Tensor& a : alpha_.alpha) copy.alpha_.alpha.push_back(a.clone());
    copy.weights_.resize(weights_.size());
    for (std::size_t e = 0; e < weights_.size(); ++e) {
        copy.weights_[e].resize(weights_[e].size());
        for (std::size_t k = 0; k < weights_[e].size(); ++k) {
            if (weights_[e][k].w.defined()) {
                copy.weights_[e][k].w = weights_[e][k].w.clone();
                copy.weights_[e][k].b = weights_[e][k].b.clone();
            }
        }
    }
    copy.head_w_ = head_w_.clone();
    copy.head_b_ = head_b_.clone();
    copy.discretized_ = discretized_;
    copy.pruned_ = pruned_;
    copy.disabled_ = disabled_;
    copy.noise_key_ = noise_key_;
    copy.noise_counter_ = noise_counter_;
    return copy;
}

std::uint64_t Supernet::state_fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    fold_bits(h, spec_.hash());
    fold_bits(h, static_cast<std::uint64_t>(classes_));
    fold_bits(h, static_cast<std::uint64_t>(mask_renormalize_ ? 1 : 0));
    fold_bits(h, static_cast<std::uint64_t>(alpha_.frozen ? 1 : 0));
    fold_bits(h, noise_key_);
    fold_bits(h, noise_counter_);
    for (std::size_t e = 0; e < spec_.num_edges(); ++e) {
        for (double v : alpha_.alpha[e].values()) fold_bits(h, v);
        for (bool m : alpha_.mask[e]) fold_bits(h, static_cast<std::uint64_t>(m ? 1 : 0));
        fold_bits(h, static_cast<std::uint64_t>(alpha_.edge_frozen[e] ? 1 : 0));
        fold_bits(h, static_cast<std::uint64_t>(pruned_[e] ? 1 : 0));
        fold_bits(h, static_cast<std::uint64_t>(disabled_[e] ? 1 : 0));
        fold_bits(h, static_cast<std::uint64_t>(
                         discretized_[e] ? 1 + pool_index(e, *discretized_[e]) : 0));
        for (const OpWeights& ow : weights_[e]) {
            if (!ow.w.defined()) continue;
            for (double v : ow.w.values()) fold_bits(h, v);
            for (double v : ow.b.values()) fold_bits(h, v);
        }
    }
    for (double v : head_w_.values()) fold_bits(h, v);
    for (double v : head_b_.values()) fold_bits(h, v);
    return h;
}

void Supernet::save_checkpoint(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw UsageError("save_checkpoint: cannot open " + path);
    char hex[32];
    f << "dnas-checkpoint v1\n";
    f << "space " << spec_.descriptor() << '\n';
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(spec_.hash()));
    f << "spec_hash " << hex << '\n';
    f << "classes " << classes_ << '\n';
    f << "seed " << seed_ << '\n';
    f << "mask_renormalize " << (mask_renormalize_ ? 1 : 0) << '\n';
    f << "alpha_frozen " << (alpha_.frozen ? 1 : 0) << '\n';
    f << "noise_key " << noise_key_ << '\n';
    f << "noise_counter " << noise_counter_ << '\n';
    f << "edges " << spec_.num_edges() << '\n';
    for (std::size_t e = 0; e < spec_.num_edges(); ++e) {
        f << "alpha " << e;
        for (double v : alpha_.alpha[e].values()) f << ' ' << hex_double(v);
        f << '\n';
        f << "mask " << e;
        for (bool m : alpha_.mask[e]) f << ' ' << (m ? 1 : 0);
        f << '\n';
        f << "state " << e << ' '
          << (discretized_[e] ? op_tag(*discretized_[e]) : "-") << ' '
          << (pruned_[e] ? 1 : 0) << ' ' << (alpha_.edge_frozen[e] ? 1 : 0) << '\n';
        for (std::size_t k = 0; k < weights_[e].size(); ++k) {
            if (!weights_[e][k].w.defined()) continue;
            f << "w " << e << ' ' << op_tag(spec_.edges[e].pool[k]);
            for (double v : weights_[e][k].w.values()) f << ' ' << hex_double(v);
            f << '\n';
            f << "b " << e << ' ' << op_tag(spec_.edges[e].pool[k]);
            for (double v : weights_[e][k].b.values()) f << ' ' << hex_double(v);
            f << '\n';
        }
    }
    f << "head_w";
    for (double v : head_w_.values()) f << ' ' << hex_double(v);
    f << '\n';
    f << "head_b";
    for (double v : head_b_.values()) f << ' ' << hex_double(v);
    f << '\n';
    f << "end\n";
    if (!f) throw UsageError("save_checkpoint: write failed for " + path);
}

Supernet Supernet::load_checkpoint(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("load_checkpoint: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "dnas-checkpoint v1")
        throw UsageError("load_checkpoint: bad header in " + path);

    auto expect_key = [&](const std::string& key) -> std::string {
        if (!std::getline(f, line))
            throw UsageError("load_checkpoint: truncated at key '" + key + "'");
        if (line.rfind(key + " ", 0) != 0)
            throw UsageError("load_checkpoint: expected key '" + key + "', got '" + line + "'");
        return line.substr(key.size() + 1);
    };

    const std::string descriptor = expect_key("space");
    CellSpec spec = cellspec_from_descriptor(descriptor);
    const std::string stored_hash = expect_key("spec_hash");
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(spec.hash()));
    if (stored_hash != hex)
        throw InvariantError("load_checkpoint: spec hash mismatch (file " + stored_hash +
                             ", descriptor " + hex + ")");
    const std::size_t classes = std::stoul(expect_key("classes"));
    const std::uint64_t seed = std::stoull(expect_key("seed"));
    const bool renorm = expect_key("mask_renormalize") == "1";

    Supernet net(spec, classes, seed, renorm);
    net.alpha_.frozen = expect_key("alpha_frozen") == "1";
    net.noise_key_ = std::stoull(expect_key("noise_key"));
    net.noise_counter_ = std::stoull(expect_key("noise_counter"));
    const std::size_t E = std::stoul(expect_key("edges"));
    if (E != spec.num_edges()) throw UsageError("load_checkpoint: edge count mismatch");

    for (std::size_t e = 0; e < E; ++e) {
        {
            std::istringstream is(expect_key("alpha"));
            std::size_t idx;
            is >> idx;
            if (idx != e) throw UsageError("load_checkpoint: alpha lines out of order");
            std::string tok;
            for (double& v : net.alpha_.alpha[e].values()) {
                if (!(is >> tok)) throw UsageError("load_checkpoint: truncated alpha");
                v = parse_hex_double(tok);
            }
        }
        {
            std::istringstream is(expect_key("mask"));
            std::size_t idx;
            is >> idx;
            int bit;
            for (std::size_t k = 0; k < net.alpha_.mask[e].size(); ++k) {
                if (!(is >> bit)) throw UsageError("load_checkpoint: truncated mask");
                net.alpha_.mask[e][k] = bit != 0;
            }
        }
        {
            std::istringstream is(expect_key("state"));
            std::size_t idx;
            std::string dtag;
            int pruned_bit, frozen_bit;
            if (!(is >> idx >> dtag >> pruned_bit >> frozen_bit))
                throw UsageError("load_checkpoint: truncated state line");
            if (dtag != "-") {
                auto op = op_from_tag(dtag);
                if (!op) throw UsageError("load_checkpoint: unknown op in state line");
                net.discretized_[e] = *op;
            } else {
                net.discretized_[e] = std::nullopt;
            }
            net.pruned_[e] = pruned_bit != 0;
            net.alpha_.edge_frozen[e] = frozen_bit != 0;
        }
        for (std::size_t k = 0; k < spec.edges[e].pool.size(); ++k) {
            if (!op_has_params(spec.edges[e].pool[k])) continue;
            for (const char* kind : {"w", "b"}) {
                std::istringstream is(expect_key(kind));
                std::size_t idx;
                std::string tag, tok;
                is >> idx >> tag;
                if (idx != e || tag != op_tag(spec.edges[e].pool[k]))
                    throw UsageError("load_checkpoint: weight lines out of order");
                Tensor& t = kind[0] == 'w' ? net.weights_[e][k].w : net.weights_[e][k].b;
                for (double& v : t.values()) {
                    if (!(is >> tok)) throw UsageError("load_checkpoint: truncated weights");
                    v = parse_hex_double(tok);
                }
            }
        }
    }
    {
        std::istringstream is(expect_key("head_w").insert(0, " "));
        std::string tok;
        for (double& v : net.head_w_.values()) {
            if (!(is >> tok)) throw UsageError("load_checkpoint: truncated head_w");
            v = parse_hex_double(tok);
        }
    }
    {
        std::istringstream is(expect_key("head_b").insert(0, " "));
        std::string tok;
        for (double& v : net.head_b_.values()) {
            if (!(is >> tok)) throw UsageError("load_checkpoint: truncated head_b");
            v = parse_hex_double(tok);
        }
    }
    if (!std::getline(f, line) || line != "end")
        throw UsageError("load_checkpoint: missing end marker");
    return net;
}

} // namespace dnas
