#include "dnas/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "dnas/rng.hpp"

namespace dnas {

using nlohmann::json;

namespace {

// Softmax over the raw (pre-discretization) alpha of an edge, restricted to
// the active mask. Unlike Supernet::alpha_softmax this ignores the decided
// state, which is what magnitude criteria want on a progressively
// discretized supernet.
std::vector<double> raw_alpha_softmax(const Supernet& net, std::size_t edge) {
    const auto& av = net.alpha_table().alpha[edge].values();
    const auto& mask = net.alpha_table().mask[edge];
    std::vector<double> w(av.size(), 0.0);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < av.size(); ++k)
        if (mask[k]) mx = std::max(mx, av[k]);
    double denom = 0.0;
    for (std::size_t k = 0; k < av.size(); ++k)
        if (mask[k]) {
            w[k] = std::exp(av[k] - mx);
            denom += w[k];
        }
    for (double& v : w) v /= denom;
    return w;
}

// Max softmax weight among active non-ZERO ops; the DARTS edge-importance
// signal for topology decisions.
double edge_importance(const Supernet& net, std::size_t edge) {
    const auto w = raw_alpha_softmax(net, edge);
    const auto& pool = net.spec().edges[edge].pool;
    double best = -1.0;
    for (std::size_t k = 0; k < pool.size(); ++k)
        if (pool[k] != OpKind::ZERO && net.alpha_table().mask[edge][k])
            best = std::max(best, w[k]);
    return best;
}

std::string edge_name(const CellSpec& spec, std::size_t e) {
    return std::to_string(spec.edges[e].src) + "->" + std::to_string(spec.edges[e].dst);
}

} // namespace

Genotype magnitude_select(const Supernet& net) {
    const CellSpec& spec = net.spec();
    // Operation per edge: argmax alpha over active non-ZERO ops, ties to the
    // lowest pool index.
    std::vector<OpKind> op_choice(spec.num_edges());
    for (std::size_t e = 0; e < spec.num_edges(); ++e) {
        if (net.is_pruned(e)) continue;
        const auto& av = net.alpha_table().alpha[e].values();
        const auto& pool = spec.edges[e].pool;
        std::size_t best = spec.edges[e].pool.size();
        for (std::size_t k = 0; k < pool.size(); ++k) {
            if (pool[k] == OpKind::ZERO || !net.alpha_table().mask[e][k]) continue;
            if (best == pool.size() || av[k] > av[best]) best = k;
        }
        if (best == pool.size())
            throw InvariantError("magnitude_select: no selectable op on edge " +
                                 edge_name(spec, e));
        op_choice[e] = pool[best];
    }
    // Topology: per node keep the two input edges with the largest
    // edge-importance, ties to the lowest edge index.
    Genotype g;
    for (std::size_t node = spec.num_inputs; node < spec.num_nodes(); ++node) {
        std::vector<std::size_t> in;
        for (std::size_t e : spec.incoming(node))
            if (!net.is_pruned(e)) in.push_back(e);
        if (in.size() < 2)
            throw InvariantError("magnitude_select: node has fewer than 2 active inputs");
        std::stable_sort(in.begin(), in.end(), [&](std::size_t a, std::size_t b) {
            const double ia = edge_importance(net, a), ib = edge_importance(net, b);
            if (ia != ib) return ia > ib;
            return a < b;
        });
        std::vector<std::size_t> keep{in[0], in[1]};
        std::sort(keep.begin(), keep.end());
        for (std::size_t e : keep) {
            g.edge_indices.push_back(e);
            g.ops.push_back(op_choice[e]);
        }
    }
    // Edges were appended per node in ascending node order; indices ascend
    // globally because edge order is (dst, src).
    validate_genotype(spec, g);
    return g;
}

SelectionTrace pt_select_operations(Supernet& net, const Dataset& ds, const TrainConfig& cfg,
                                    std::uint64_t select_seed, bool magnitude_criterion) {
    if (ds.val_idx.empty()) throw InvariantError("pt_select_operations: empty val split");
    SelectionTrace trace;
    trace.method = magnitude_criterion ? "pt-mag" : "pt";
    trace.seed = select_seed;

    std::vector<std::size_t> order;
    for (std::size_t e = 0; e < net.spec().num_edges(); ++e)
        if (!net.is_pruned(e) && !net.is_discretized(e)) order.push_back(e);
    CounterRng perm_rng(derive_key(select_seed, "select/edge_order"));
    perm_rng.shuffle(order);

    std::size_t decision_no = 0;
    for (std::size_t e : order) {
        const auto cands = net.active_candidates(e);
        if (cands.empty())
            throw InvariantError("pt_select_operations: no selectable op on edge " +
                                 edge_name(net.spec(), e));
        Decision dec;
        dec.phase = "op";
        dec.index = e;
        const auto& pool = net.spec().edges[e].pool;

        std::size_t chosen = cands[0];
        if (cands.size() == 1) {
            dec.trivial = true;
        } else if (magnitude_criterion) {
            const auto& av = net.alpha_table().alpha[e].values();
            dec.alpha_snapshot = av;
            for (std::size_t k : cands)
                if (av[k] > av[chosen]) chosen = k;
        } else {
            double best_acc = std::numeric_limits<double>::infinity();
            const auto& av = net.alpha_table().alpha[e].values();
            for (std::size_t k : cands) {
                net.mask_op(e, pool[k]);
                const double acc = evaluate(net, ds, "val").accuracy;
                net.unmask_op(e, pool[k]);
                dec.scores.push_back({op_tag(pool[k]), acc});
                // argmin accuracy; ties broken by larger alpha, then lower index
                if (acc < best_acc ||
                    (acc == best_acc && (av[k] > av[chosen] ||
                                         (av[k] == av[chosen] && k < chosen)))) {
                    best_acc = acc;
                    chosen = k;
                }
            }
        }
        net.discretize_edge(e, pool[chosen]);
        fine_tune(net, ds, cfg, cfg.finetune_epochs, 1000 + decision_no);
        dec.chosen = op_tag(pool[chosen]);
        dec.post_val_accuracy = evaluate(net, ds, "val").accuracy;
        trace.decisions.push_back(std::move(dec));
        ++decision_no;
    }
    return trace;
}

SelectionTrace pt_select_topology(Supernet& net, const Dataset& ds, const TrainConfig& cfg,
                                  std::uint64_t select_seed, bool magnitude_criterion) {
    const CellSpec& spec = net.spec();
    for (std::size_t e = 0; e < spec.num_edges(); ++e)
        if (!net.is_pruned(e) && !net.is_discretized(e))
            throw InvariantError("pt_select_topology: op phase incomplete on edge " +
                                 edge_name(spec, e));
    SelectionTrace trace;
    trace.method = magnitude_criterion ? "pt-mag" : "pt";
    trace.seed = select_seed;

    std::vector<std::size_t> order;
    for (std::size_t node = spec.num_inputs; node < spec.num_nodes(); ++node)
        order.push_back(node);
    CounterRng perm_rng(derive_key(select_seed, "select/node_order"));
    perm_rng.shuffle(order);

    std::size_t decision_no = 0;
    for (std::size_t node : order) {
        std::vector<std::size_t> in;
        for (std::size_t e : spec.incoming(node))
            if (!net.is_pruned(e)) in.push_back(e);
        Decision dec;
        dec.phase = "topology";
        dec.index = node;

        std::vector<std::size_t> keep;
        if (in.size() == 2) {
            keep = in;
            dec.trivial = true;
        } else if (magnitude_criterion) {
            std::vector<std::size_t> sorted = in;
            std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
                const double ia = edge_importance(net, a), ib = edge_importance(net, b);
                if (ia != ib) return ia > ib;
                return a < b;
            });
            for (std::size_t e : in) dec.scores.push_back({edge_name(spec, e), edge_importance(net, e)});
            keep = {sorted[0], sorted[1]};
        } else {
            std::vector<std::pair<double, std::size_t>> scored;
            for (std::size_t e : in) {
                net.set_edge_disabled(e, true);
                const double acc = evaluate(net, ds, "val").accuracy;
                net.set_edge_disabled(e, false);
                dec.scores.push_back({edge_name(spec, e), acc});
                scored.emplace_back(acc, e);
            }
            // Keep the lowest and second-lowest removal accuracy.
            std::sort(scored.begin(), scored.end());
            keep = {scored[0].second, scored[1].second};
        }
        std::sort(keep.begin(), keep.end());
        if (in.size() > 2) {
            net.prune_node_inputs(node, keep);
            fine_tune(net, ds, cfg, cfg.effective_topology_finetune(), 2000 + decision_no);
        }
        dec.chosen = edge_name(spec, keep[0]) + "," + edge_name(spec, keep[1]);
        dec.post_val_accuracy = evaluate(net, ds, "val").accuracy;
        trace.decisions.push_back(std::move(dec));
        ++decision_no;
    }
    return trace;
}

namespace {

SelectionResult full_select(Supernet& net, const Dataset& ds, const TrainConfig& cfg,
                            std::uint64_t select_seed, bool magnitude_criterion) {
    SelectionTrace ops = pt_select_operations(net, ds, cfg, select_seed, magnitude_criterion);
    SelectionTrace topo = pt_select_topology(net, ds, cfg, select_seed, magnitude_criterion);
    for (Decision& d : topo.decisions) ops.decisions.push_back(std::move(d));
    return {net.to_genotype(), std::move(ops)};
}

} // namespace

SelectionResult pt_select(Supernet& net, const Dataset& ds, const TrainConfig& cfg,
                          std::uint64_t select_seed) {
    return full_select(net, ds, cfg, select_seed, false);
}

SelectionResult pt_mag_select(Supernet& net, const Dataset& ds, const TrainConfig& cfg,
                              std::uint64_t select_seed) {
    return full_select(net, ds, cfg, select_seed, true);
}

std::vector<OpStrength> measure_op_strength(const Supernet& net, std::size_t edge,
                                            const Dataset& ds, const TrainConfig& cfg) {
    std::vector<OpStrength> out;
    const auto cands = net.active_candidates(edge);
    const auto& pool = net.spec().edges[edge].pool;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        Supernet clone = net.clone();
        clone.discretize_edge(edge, pool[cands[i]]);
        fine_tune(clone, ds, cfg, cfg.effective_strength_epochs(), 3000 + i);
        out.push_back({pool[cands[i]], evaluate(clone, ds, "val").accuracy});
    }
    return out;
}

void save_trace(const SelectionTrace& trace, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw UsageError("save_trace: cannot open " + path);
    json header;
    header["method"] = trace.method;
    header["seed"] = trace.seed;
    f << header.dump() << '\n';
    for (const Decision& d : trace.decisions) {
        json j;
        j["phase"] = d.phase;
        j["index"] = d.index;
        json scores = json::array();
        for (const CandidateScore& s : d.scores)
            scores.push_back({{"item", s.item}, {"score", s.score}});
        j["scores"] = scores;
        j["chosen"] = d.chosen;
        if (!d.alpha_snapshot.empty()) j["alpha"] = d.alpha_snapshot;
        j["post_val_accuracy"] = d.post_val_accuracy;
        j["trivial"] = d.trivial;
        f << j.dump() << '\n';
    }
}

SelectionTrace load_trace(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("load_trace: cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw UsageError("load_trace: empty file " + path);
    json header = json::parse(line);
    SelectionTrace trace;
    trace.method = header.at("method").get<std::string>();
    trace.seed = header.at("seed").get<std::uint64_t>();
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        Decision d;
        d.phase = j.at("phase").get<std::string>();
        d.index = j.at("index").get<std::size_t>();
        for (const json& s : j.at("scores"))
            d.scores.push_back({s.at("item").get<std::string>(), s.at("score").get<double>()});
        d.chosen = j.at("chosen").get<std::string>();
        if (j.contains("alpha")) d.alpha_snapshot = j.at("alpha").get<std::vector<double>>();
        d.post_val_accuracy = j.at("post_val_accuracy").get<double>();
        d.trivial = j.at("trivial").get<bool>();
        trace.decisions.push_back(std::move(d));
    }
    return trace;
}

} // namespace dnas
