#include "dnas/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>

namespace dnas {

namespace {

std::atomic<std::uint64_t> g_tape_counter{1};

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
    throw InvariantError(std::string(op) + ": shape mismatch " + shape_str(a) +
                         " vs " + shape_str(b));
}

} // namespace

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ')';
    return os.str();
}

void ensure_grad(TensorData& d) {
    if (d.grad.size() != d.values.size()) d.grad.assign(d.values.size(), 0.0);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto d = std::make_shared<TensorData>();
    d->shape = std::move(shape);
    d->values.assign(shape_numel(d->shape), 0.0);
    d->requires_grad = requires_grad;
    return Tensor(std::move(d));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size())
        throw InvariantError("Tensor::from: data length " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(shape));
    auto d = std::make_shared<TensorData>();
    d->shape = std::move(shape);
    d->values = std::move(values);
    d->requires_grad = requires_grad;
    return Tensor(std::move(d));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({1}, {v}, requires_grad);
}

double Tensor::item() const {
    if (!is_scalar()) throw InvariantError("Tensor::item: tensor is not scalar, shape " + shape_str(shape()));
    return d_->values[0];
}

Tensor Tensor::clone() const {
    auto d = std::make_shared<TensorData>(*d_);
    d->tape_id = 0;
    return Tensor(std::move(d));
}

Tape::Tape() : id_(g_tape_counter.fetch_add(1)) {}

void Tape::check_finite(const char* op, const Tensor& t) const {
    for (double v : t.values()) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(op) + ": non-finite output at node " +
                               std::to_string(nodes_.size()));
        }
    }
}

void Tape::touch(const std::shared_ptr<TensorData>& d) {
    // Linear scan is fine: tapes at this scale hold tens of distinct tensors.
    for (const auto& p : touched_)
        if (p.get() == d.get()) return;
    touched_.push_back(d);
}

Tensor Tape::record(const char* op, Tensor out, std::function<void()> back,
                    std::initializer_list<const Tensor*> inputs) {
    check_finite(op, out);
    bool needs = false;
    for (const Tensor* in : inputs) {
        if (in->requires_grad()) needs = true;
        touch(in->d_);
    }
    out.d_->requires_grad = needs;
    out.d_->tape_id = id_;
    touch(out.d_);
    nodes_.push_back(Node{op, std::move(back)});
    return out;
}

void Tape::watch(const Tensor& t) { touch(t.d_); }

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
    Tensor out = Tensor::zeros(a.shape());
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
    auto ad = a.d_, bd = b.d_, od = out.d_;
    return record("add", out, [ad, bd, od] {
        ensure_grad(*ad);
        ensure_grad(*bd);
        for (std::size_t i = 0; i < od->grad.size(); ++i) {
            ad->grad[i] += od->grad[i];
            bd->grad[i] += od->grad[i];
        }
    }, {&a, &b});
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("sub", a.shape(), b.shape());
    Tensor out = Tensor::zeros(a.shape());
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
    auto ad = a.d_, bd = b.d_, od = out.d_;
    return record("sub", out, [ad, bd, od] {
        ensure_grad(*ad);
        ensure_grad(*bd);
        for (std::size_t i = 0; i < od->grad.size(); ++i) {
            ad->grad[i] += od->grad[i];
            bd->grad[i] -= od->grad[i];
        }
    }, {&a, &b});
}

Tensor Tape::scale(const Tensor& a, double c) {
    Tensor out = Tensor::zeros(a.shape());
    const auto& av = a.values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = c * av[i];
    auto ad = a.d_, od = out.d_;
    return record("scale", out, [ad, od, c] {
        ensure_grad(*ad);
        for (std::size_t i = 0; i < od->grad.size(); ++i)
            ad->grad[i] += c * od->grad[i];
    }, {&a});
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        shape_error("matmul", a.shape(), b.shape());
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor out = Tensor::zeros({m, n});
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            for (std::size_t j = 0; j < n; ++j)
                ov[i * n + j] += aip * bv[p * n + j];
        }
    auto ad = a.d_, bd = b.d_, od = out.d_;
    return record("matmul", out, [ad, bd, od, m, k, n] {
        ensure_grad(*ad);
        ensure_grad(*bd);
        const auto& go = od->grad;
        // dA = dOut * B^T
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double g = go[i * n + j];
                for (std::size_t p = 0; p < k; ++p)
                    ad->grad[i * k + p] += g * bd->values[p * n + j];
            }
        // dB = A^T * dOut
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t i = 0; i < m; ++i) {
                const double av_ip = ad->values[i * k + p];
                for (std::size_t j = 0; j < n; ++j)
                    bd->grad[p * n + j] += av_ip * go[i * n + j];
            }
    }, {&a, &b});
}

Tensor Tape::bias_add(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 1 || a.shape()[1] != b.shape()[0])
        shape_error("bias_add", a.shape(), b.shape());
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    Tensor out = Tensor::zeros(a.shape());
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            ov[i * n + j] = av[i * n + j] + bv[j];
    auto ad = a.d_, bd = b.d_, od = out.d_;
    return record("bias_add", out, [ad, bd, od, m, n] {
        ensure_grad(*ad);
        ensure_grad(*bd);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double g = od->grad[i * n + j];
                ad->grad[i * n + j] += g;
                bd->grad[j] += g;
            }
    }, {&a, &b});
}

Tensor Tape::relu(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape());
    const auto& av = a.values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] > 0.0 ? av[i] : 0.0;
    auto ad = a.d_, od = out.d_;
    return record("relu", out, [ad, od] {
        ensure_grad(*ad);
        for (std::size_t i = 0; i < od->grad.size(); ++i)
            if (ad->values[i] > 0.0) ad->grad[i] += od->grad[i];
    }, {&a});
}

Tensor Tape::tanh(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape());
    const auto& av = a.values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = std::tanh(av[i]);
    auto ad = a.d_, od = out.d_;
    return record("tanh", out, [ad, od] {
        ensure_grad(*ad);
        for (std::size_t i = 0; i < od->grad.size(); ++i)
            ad->grad[i] += od->grad[i] * (1.0 - od->values[i] * od->values[i]);
    }, {&a});
}

Tensor Tape::mean(const Tensor& a) {
    const std::size_t n = a.numel();
    if (n == 0) throw InvariantError("mean: empty tensor");
    double s = 0.0;
    for (double v : a.values()) s += v;
    Tensor out = Tensor::scalar(s / static_cast<double>(n));
    auto ad = a.d_, od = out.d_;
    return record("mean", out, [ad, od, n] {
        ensure_grad(*ad);
        const double g = od->grad[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) ad->grad[i] += g;
    }, {&a});
}

Tensor Tape::softmax(const Tensor& a) {
    if (a.shape().size() != 1)
        throw InvariantError("softmax: input must be a vector, got " + shape_str(a.shape()));
    return masked_softmax(a, std::vector<bool>(a.numel(), true));
}

Tensor Tape::masked_softmax(const Tensor& a, const std::vector<bool>& active) {
    if (a.shape().size() != 1)
        throw InvariantError("masked_softmax: input must be a vector, got " + shape_str(a.shape()));
    if (active.size() != a.numel())
        throw InvariantError("masked_softmax: mask length " + std::to_string(active.size()) +
                             " does not match input length " + std::to_string(a.numel()));
    std::size_t n_active = 0;
    double mx = -std::numeric_limits<double>::infinity();
    const auto& av = a.values();
    for (std::size_t i = 0; i < av.size(); ++i)
        if (active[i]) {
            ++n_active;
            mx = std::max(mx, av[i]);
        }
    if (n_active == 0) throw InvariantError("masked_softmax: all entries masked");
    Tensor out = Tensor::zeros(a.shape());
    auto& ov = out.values();
    double denom = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i)
        if (active[i]) {
            ov[i] = std::exp(av[i] - mx);
            denom += ov[i];
        }
    for (std::size_t i = 0; i < ov.size(); ++i)
        if (active[i]) ov[i] /= denom;
    auto ad = a.d_, od = out.d_;
    auto act = active;
    return record("masked_softmax", out, [ad, od, act] {
        ensure_grad(*ad);
        double dot = 0.0;
        for (std::size_t i = 0; i < act.size(); ++i)
            if (act[i]) dot += od->grad[i] * od->values[i];
        for (std::size_t i = 0; i < act.size(); ++i)
            if (act[i]) ad->grad[i] += od->values[i] * (od->grad[i] - dot);
    }, {&a});
}

Tensor Tape::weighted_sum(const Tensor& w, const std::vector<Tensor>& xs) {
    if (w.shape().size() != 1 || w.numel() != xs.size())
        throw InvariantError("weighted_sum: weight vector length " + std::to_string(w.numel()) +
                             " does not match " + std::to_string(xs.size()) + " inputs");
    if (xs.empty()) throw InvariantError("weighted_sum: no inputs");
    for (const Tensor& x : xs)
        if (x.shape() != xs[0].shape()) shape_error("weighted_sum", xs[0].shape(), x.shape());
    Tensor out = Tensor::zeros(xs[0].shape());
    auto& ov = out.values();
    const auto& wv = w.values();
    for (std::size_t t = 0; t < xs.size(); ++t) {
        const auto& xv = xs[t].values();
        for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += wv[t] * xv[i];
    }
    auto wd = w.d_, od = out.d_;
    std::vector<std::shared_ptr<TensorData>> xds;
    xds.reserve(xs.size());
    for (const Tensor& x : xs) {
        xds.push_back(x.d_);
        touch(x.d_);
    }
    std::vector<const Tensor*> ins{&w};
    Tensor result = record("weighted_sum", out, [wd, od, xds] {
        ensure_grad(*wd);
        for (std::size_t t = 0; t < xds.size(); ++t) {
            ensure_grad(*xds[t]);
            double dot = 0.0;
            const double wt = wd->values[t];
            for (std::size_t i = 0; i < od->grad.size(); ++i) {
                dot += od->grad[i] * xds[t]->values[i];
                xds[t]->grad[i] += wt * od->grad[i];
            }
            wd->grad[t] += dot;
        }
    }, {&w});
    // record() only saw w; propagate requires_grad from the x inputs too.
    for (const Tensor& x : xs)
        if (x.requires_grad()) result.d_->requires_grad = true;
    return result;
}

Tensor Tape::cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.shape().size() != 2)
        throw InvariantError("cross_entropy: logits must be (batch, classes), got " +
                             shape_str(logits.shape()));
    const std::size_t b = logits.shape()[0], c = logits.shape()[1];
    if (labels.size() != b)
        throw InvariantError("cross_entropy: " + std::to_string(labels.size()) +
                             " labels for batch " + std::to_string(b));
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= c)
            throw InvariantError("cross_entropy: label " + std::to_string(y) +
                                 " outside [0," + std::to_string(c) + ")");
    const auto& lv = logits.values();
    // Saved softmax for the backward pass.
    auto probs = std::make_shared<std::vector<double>>(b * c);
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        double mx = lv[i * c];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, lv[i * c + j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            (*probs)[i * c + j] = std::exp(lv[i * c + j] - mx);
            denom += (*probs)[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) (*probs)[i * c + j] /= denom;
        total += std::log(denom) + mx - lv[i * c + labels[i]];
    }
    Tensor out = Tensor::scalar(total / static_cast<double>(b));
    auto ld = logits.d_, od = out.d_;
    auto labs = labels;
    return record("cross_entropy", out, [ld, od, probs, labs, b, c] {
        ensure_grad(*ld);
        const double g = od->grad[0] / static_cast<double>(b);
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                double p = (*probs)[i * c + j];
                if (j == static_cast<std::size_t>(labs[i])) p -= 1.0;
                ld->grad[i * c + j] += g * p;
            }
    }, {&logits});
}

Tensor Tape::gaussian_noise_const(Shape shape, CounterRng& rng) {
    Tensor out = Tensor::zeros(std::move(shape));
    for (double& v : out.values()) v = rng.next_normal();
    // Constant output: backward is a no-op, gradient does not flow through.
    return record("gaussian_noise_const", out, [] {}, {});
}

void Tape::backward(const Tensor& loss) {
    if (consumed_) throw InvariantError("backward: tape already consumed");
    if (!loss.defined() || !loss.is_scalar())
        throw InvariantError("backward: loss must be a scalar");
    if (loss.d_->tape_id != id_)
        throw InvariantError("backward: loss was not produced on this tape");
    for (auto& d : touched_) d->grad.assign(d->values.size(), 0.0);
    loss.d_->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->back();
    consumed_ = true;
}

void Tape::clear() {
    nodes_.clear();
    touched_.clear();
    consumed_ = false;
}

} // namespace dnas
