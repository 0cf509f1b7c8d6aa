#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dnas/errors.hpp"
#include "dnas/rng.hpp"

namespace dnas {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

struct TensorData {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad; // sized lazily during backward
    bool requires_grad = false;
    std::uint64_t tape_id = 0; // tape that produced this tensor (0 = leaf)
};

// Cheap shared handle over TensorData. Copying a Tensor aliases the
// underlying buffer; deep copies go through clone().
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const noexcept { return d_ != nullptr; }
    const Shape& shape() const { return d_->shape; }
    std::size_t numel() const { return d_->values.size(); }
    bool is_scalar() const { return d_->values.size() == 1; }
    double item() const;

    std::vector<double>& values() { return d_->values; }
    const std::vector<double>& values() const { return d_->values; }
    std::vector<double>& grad() { return d_->grad; }
    const std::vector<double>& grad() const { return d_->grad; }

    bool requires_grad() const { return d_->requires_grad; }
    void set_requires_grad(bool b) { d_->requires_grad = b; }

    void zero_grad() { d_->grad.assign(d_->values.size(), 0.0); }
    Tensor clone() const;

    TensorData* data_ptr() const { return d_.get(); }

private:
    explicit Tensor(std::shared_ptr<TensorData> d) : d_(std::move(d)) {}
    std::shared_ptr<TensorData> d_;
    friend class Tape;
};

// Records primitives during a forward pass; backward() replays them in
// reverse, accumulating gradients into every watched requires_grad tensor.
// A Tape and its Tensors are single-threaded; independent Tapes may run
// concurrently.
class Tape {
public:
    Tape();

    // -- primitives ---------------------------------------------------------
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor scale(const Tensor& a, double c);
    Tensor matmul(const Tensor& a, const Tensor& b);      // (m,k) x (k,n)
    Tensor bias_add(const Tensor& a, const Tensor& b);    // (m,n) + (n)
    Tensor relu(const Tensor& a);
    Tensor tanh(const Tensor& a);
    Tensor mean(const Tensor& a);                         // full reduction
    Tensor softmax(const Tensor& a);                      // vector only
    // Softmax over the active subset; masked entries get weight exactly 0.
    Tensor masked_softmax(const Tensor& a, const std::vector<bool>& active);
    // sum_i w[i] * xs[i]; w is a vector of length xs.size(), all xs same shape.
    Tensor weighted_sum(const Tensor& w, const std::vector<Tensor>& xs);
    // Mean NLL over the batch; logits (b,c), labels in [0,c).
    Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);
    // Seeded N(0,1) constant; ignores gradients entirely.
    Tensor gaussian_noise_const(Shape shape, CounterRng& rng);

    // -- engine -------------------------------------------------------------
    // Track a tensor so backward() guarantees it a (possibly zero) gradient.
    void watch(const Tensor& t);
    void backward(const Tensor& loss);
    void clear();

    std::size_t num_nodes() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }

private:
    struct Node {
        const char* op;
        std::function<void()> back;
    };

    Tensor record(const char* op, Tensor out, std::function<void()> back,
                  std::initializer_list<const Tensor*> inputs);
    void check_finite(const char* op, const Tensor& t) const;
    void touch(const std::shared_ptr<TensorData>& d);

    std::vector<Node> nodes_;
    std::vector<std::shared_ptr<TensorData>> touched_;
    std::uint64_t id_;
    bool consumed_ = false;
};

// Ensures grad buffer exists and is zero-filled to match values.
void ensure_grad(TensorData& d);

} // namespace dnas
