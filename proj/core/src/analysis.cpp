#include "dnas/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dnas/selection.hpp"

namespace dnas {

namespace {

std::vector<double> residual(std::span<const double> a, std::span<const double> b) {
    std::vector<double> r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

std::vector<double> standardized(std::span<const double> a) {
    const double n = static_cast<double>(a.size());
    double mean = 0.0;
    for (double v : a) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : a) var += (v - mean) * (v - mean);
    var /= (n - 1.0);
    const double sd = std::sqrt(var);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] = sd > 0.0 ? (a[i] - mean) / sd : 0.0;
    return out;
}

// Average ranks with ties.
std::vector<double> ranks_of(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (v[a] != v[b]) return v[a] < v[b];
        return a < b;
    });
    std::vector<double> ranks(v.size(), 0.0);
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

} // namespace

void FeatureSamples::validate() const {
    if (n < 2) throw InvariantError("FeatureSamples: need n >= 2 for a variance");
    if (d < 1) throw InvariantError("FeatureSamples: d must be >= 1");
    const std::size_t len = n * d;
    if (x_e.size() != len || o_e.size() != len || m_star.size() != len)
        throw InvariantError("FeatureSamples: arrays must all have n*d entries");
    for (const auto* arr : {&x_e, &o_e, &m_star})
        for (double v : *arr)
            if (!std::isfinite(v)) throw NumericError("FeatureSamples: non-finite entry");
}

double sample_variance(std::span<const double> a) {
    if (a.size() < 2) throw InvariantError("sample_variance: need at least 2 entries");
    double mean = 0.0;
    for (double v : a) mean += v;
    mean /= static_cast<double>(a.size());
    double acc = 0.0;
    for (double v : a) acc += (v - mean) * (v - mean);
    return acc / (static_cast<double>(a.size()) - 1.0);
}

double sample_covariance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvariantError("sample_covariance: length mismatch");
    if (a.size() < 2) throw InvariantError("sample_covariance: need at least 2 entries");
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(a.size());
    mb /= static_cast<double>(a.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - ma) * (b[i] - mb);
    return acc / (static_cast<double>(a.size()) - 1.0);
}

ThetaSolution prop1_closed_form(const FeatureSamples& s) {
    s.validate();
    const auto conv_resid = residual(s.o_e, s.m_star); // o_e - m*
    const auto skip_resid = residual(s.x_e, s.m_star); // x_e - m*
    const double var_conv = sample_variance(conv_resid);
    const double var_skip = sample_variance(skip_resid);
    const double cov = sample_covariance(conv_resid, skip_resid);
    const double z = var_conv + var_skip - 2.0 * cov;
    if (z == 0.0)
        throw NumericError("prop1_closed_form: degenerate input, Z = 0 "
                           "(perfectly correlated equal-variance residuals)");
    ThetaSolution t;
    t.theta_conv = (var_skip - cov) / z;
    t.theta_skip = (var_conv - cov) / z;
    t.in_unit_interval = t.theta_conv >= 0.0 && t.theta_conv <= 1.0;
    const double num_conv = var_skip - cov; // log argument for alpha_conv
    const double num_skip = var_conv - cov;
    if (num_conv > 0.0 && num_skip > 0.0) {
        t.alpha_defined = true;
        t.alpha_conv = std::log(num_conv); // shared constant C = 0
        t.alpha_skip = std::log(num_skip);
    }
    return t;
}

double prop1_objective(const FeatureSamples& s, double theta_conv) {
    const double theta_skip = 1.0 - theta_conv;
    std::vector<double> mix(s.x_e.size());
    for (std::size_t i = 0; i < mix.size(); ++i)
        mix[i] = theta_conv * s.o_e[i] + theta_skip * s.x_e[i] - s.m_star[i];
    return sample_variance(mix);
}

GridResult prop1_grid_oracle(const FeatureSamples& s, double step) {
    s.validate();
    if (!(step > 0.0) || step > 0.1)
        throw InvariantError("prop1_grid_oracle: step must be in (0, 0.1]");
    GridResult best{0.0, prop1_objective(s, 0.0)};
    for (double theta = step; theta < 1.0 + step / 2.0; theta += step) {
        const double th = std::min(theta, 1.0);
        const double obj = prop1_objective(s, th);
        if (obj < best.objective) best = {th, obj};
    }
    return best;
}

double stationarity_residual(const FeatureSamples& s, const ThetaSolution& t) {
    const auto conv_resid = residual(s.o_e, s.m_star);
    const auto skip_resid = residual(s.x_e, s.m_star);
    const double var_conv = sample_variance(conv_resid);
    const double var_skip = sample_variance(skip_resid);
    const double cov = sample_covariance(conv_resid, skip_resid);
    // Both partial derivatives equal the multiplier at the optimum; their
    // difference is the stationarity defect.
    const double g_conv = t.theta_conv * var_conv + t.theta_skip * cov;
    const double g_skip = t.theta_conv * cov + t.theta_skip * var_skip;
    const double scale = std::max({std::abs(var_conv), std::abs(var_skip), 1.0});
    return std::abs(g_conv - g_skip) / scale;
}

std::vector<Prop1ProbeRow> supernet_prop1_probe(Supernet& net, const Dataset& ds,
                                                const std::string& split) {
    const CellSpec& spec = net.spec();
    for (const EdgeSpec& e : spec.edges) {
        const bool pair_pool = e.pool.size() == 2 &&
                               ((e.pool[0] == OpKind::SKIP && op_has_params(e.pool[1])) ||
                                (e.pool[1] == OpKind::SKIP && op_has_params(e.pool[0])));
        if (!pair_pool)
            throw InvariantError("supernet_prop1_probe: pools must pair skip with one "
                                 "parametric op");
    }
    const auto& idx = ds.split(split);
    if (idx.empty()) throw InvariantError("supernet_prop1_probe: empty split");

    const std::size_t d = spec.feature_width;
    const std::size_t E = spec.num_edges();
    std::vector<std::vector<double>> xs(E), os(E);
    std::vector<double> m_star;

    constexpr std::size_t kBatch = 64;
    for (std::size_t begin = 0; begin < idx.size(); begin += kBatch) {
        const std::size_t count = std::min(kBatch, idx.size() - begin);
        Tensor x = gather_inputs(ds, idx, begin, count);
        Tape tape;
        ForwardProbe probe;
        net.forward(tape, x, /*training=*/false, begin, &probe);
        const auto& target = probe.node_values[spec.num_nodes() - 1];
        m_star.insert(m_star.end(), target.begin(), target.end());
        for (std::size_t e = 0; e < E; ++e) {
            if (net.is_pruned(e)) continue;
            const auto& src_vals = probe.node_values[spec.edges[e].src];
            xs[e].insert(xs[e].end(), src_vals.begin(), src_vals.end());
            const std::size_t conv_idx = spec.edges[e].pool[0] == OpKind::SKIP ? 1 : 0;
            const auto& conv_vals = probe.op_outputs[e][conv_idx];
            os[e].insert(os[e].end(), conv_vals.begin(), conv_vals.end());
        }
    }

    std::vector<Prop1ProbeRow> rows;
    for (std::size_t e = 0; e < E; ++e) {
        if (net.is_pruned(e)) continue;
        FeatureSamples s;
        s.n = idx.size();
        s.d = d;
        s.x_e = xs[e];
        s.o_e = os[e];
        s.m_star = m_star;
        Prop1ProbeRow row;
        row.edge = e;
        row.var_skip_resid = sample_variance(residual(s.x_e, s.m_star));
        row.var_conv_resid = sample_variance(residual(s.o_e, s.m_star));
        const ThetaSolution t = prop1_closed_form(s);
        row.theta_skip_pred = t.theta_skip;
        row.theta_in_unit = t.in_unit_interval;
        FeatureSamples std_s;
        std_s.n = s.n;
        std_s.d = s.d;
        std_s.x_e = standardized(s.x_e);
        std_s.o_e = standardized(s.o_e);
        std_s.m_star = standardized(s.m_star);
        const ThetaSolution t_std = prop1_closed_form(std_s);
        row.theta_skip_pred_std = t_std.theta_skip;
        row.theta_std_in_unit = t_std.in_unit_interval;
        const auto w = net.alpha_softmax(e);
        const std::size_t skip_idx = spec.edges[e].pool[0] == OpKind::SKIP ? 0 : 1;
        row.alpha_skip_observed = w[skip_idx];
        rows.push_back(row);
    }
    return rows;
}

GapTrajectory skip_gap_trajectory(const RunLog& log) {
    GapTrajectory out;
    std::vector<double> epochs, gaps;
    for (const EpochRecord& r : log.epochs) {
        if (!r.skip_conv_gap)
            throw InvariantError("skip_gap_trajectory: gap undefined for this space");
        out.points.push_back({r.epoch, r.val_accuracy, *r.skip_conv_gap});
        epochs.push_back(static_cast<double>(r.epoch));
        gaps.push_back(*r.skip_conv_gap);
    }
    if (out.points.size() >= 2) out.spearman_epoch_gap = spearman(epochs, gaps);
    return out;
}

std::optional<double> kendall_tau(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvariantError("kendall_tau: length mismatch");
    if (a.size() < 2) throw InvariantError("kendall_tau: need at least 2 entries");
    long long concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double da = a[i] - a[j];
            const double db = b[i] - b[j];
            if (da == 0.0 && db == 0.0) continue;
            if (da == 0.0)
                ++ties_a;
            else if (db == 0.0)
                ++ties_b;
            else if (da * db > 0.0)
                ++concordant;
            else
                ++discordant;
        }
    const long long n0 = static_cast<long long>(n) * (static_cast<long long>(n) - 1) / 2;
    // ties_a/ties_b count pairs tied in exactly one variable; pairs tied in
    // both discount both denominator terms.
    const long long both = n0 - concordant - discordant - ties_a - ties_b;
    const double da_term = static_cast<double>(n0 - (ties_a + both));
    const double db_term = static_cast<double>(n0 - (ties_b + both));
    if (da_term <= 0.0 || db_term <= 0.0) return std::nullopt;
    return static_cast<double>(concordant - discordant) / std::sqrt(da_term * db_term);
}

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvariantError("spearman: length mismatch");
    if (a.size() < 2) throw InvariantError("spearman: need at least 2 entries");
    const auto ra = ranks_of(a);
    const auto rb = ranks_of(b);
    const double va = sample_variance(ra);
    const double vb = sample_variance(rb);
    if (va == 0.0 || vb == 0.0) return std::nullopt;
    return sample_covariance(ra, rb) / std::sqrt(va * vb);
}

namespace {

template <typename Model, typename ShuffleFn, typename EvalFn>
ShuffleReport shuffle_report(Model& model, std::size_t trials, std::uint64_t seed,
                             ShuffleFn&& make_shuffled, EvalFn&& eval_model) {
    if (trials < 5) throw InvariantError("edge_shuffle_robustness: need at least 5 trials");
    ShuffleReport rep;
    rep.baseline_accuracy = eval_model(model);
    for (std::size_t t = 0; t < trials; ++t) {
        auto shuffled = make_shuffled(model, derive_key(seed, "trial", t));
        rep.trial_accuracies.push_back(eval_model(shuffled));
    }
    double mean = 0.0;
    for (double v : rep.trial_accuracies) mean += v;
    mean /= static_cast<double>(trials);
    rep.mean_shuffled = mean;
    double acc = 0.0;
    for (double v : rep.trial_accuracies) acc += (v - mean) * (v - mean);
    rep.std_shuffled = std::sqrt(acc / (static_cast<double>(trials) - 1.0));
    return rep;
}

} // namespace

ShuffleReport edge_shuffle_robustness(Supernet& net, const Dataset& ds, std::size_t trials,
                                      std::uint64_t seed, const std::string& split) {
    return shuffle_report(
        net, trials, seed,
        [](Supernet& m, std::uint64_t s) { return m.shuffled(s); },
        [&](Supernet& m) { return evaluate(m, ds, split).accuracy; });
}

ShuffleReport edge_shuffle_robustness(ChainNet& net, const Dataset& ds, std::size_t trials,
                                      std::uint64_t seed, const std::string& split) {
    return shuffle_report(
        net, trials, seed,
        [](ChainNet& m, std::uint64_t s) { return m.swapped_layers(s); },
        [&](ChainNet& m) { return m.evaluate(ds, split).accuracy; });
}

std::vector<AlphaStrengthRow> alpha_vs_strength_report(const Supernet& net, const Dataset& ds,
                                                       const TrainConfig& cfg,
                                                       const std::vector<std::size_t>& edges) {
    std::vector<AlphaStrengthRow> rows;
    for (std::size_t e : edges) {
        if (e >= net.spec().num_edges())
            throw InvariantError("alpha_vs_strength_report: edge index out of range");
        AlphaStrengthRow row;
        row.edge = e;
        const auto strengths = measure_op_strength(net, e, ds, cfg);
        const auto w = net.alpha_softmax(e);
        for (const OpStrength& s : strengths) {
            row.ops.push_back(op_tag(s.op));
            std::size_t k = 0;
            for (; k < net.spec().edges[e].pool.size(); ++k)
                if (net.spec().edges[e].pool[k] == s.op) break;
            row.alpha_weight.push_back(w[k]);
            row.strength.push_back(s.val_accuracy);
        }
        if (row.strength.size() >= 2)
            row.kendall = kendall_tau(row.alpha_weight, row.strength);
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace dnas
