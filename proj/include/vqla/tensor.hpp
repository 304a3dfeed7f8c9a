#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vqla/rng.hpp"

namespace vqla {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

template <typename T>
struct TensorData {
    Shape shape;
    std::vector<T> data;
    bool requires_grad = false;
    std::vector<T> grad;  // empty until first accumulation; same length as data afterwards
};

// Dense row-major tensor. Copies share storage, so a tensor feeding several
// consumers accumulates all of their gradients in one place.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T(0)) : d_(std::make_shared<TensorData<T>>()) {
        d_->shape = std::move(shape);
        for (std::size_t e : d_->shape) {
            if (e == 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_str(d_->shape));
        }
        d_->data.assign(shape_numel(d_->shape), fill);
    }

    Tensor(Shape shape, std::vector<T> values) : d_(std::make_shared<TensorData<T>>()) {
        if (shape_numel(shape) != values.size()) {
            throw std::invalid_argument("tensor data length " + std::to_string(values.size()) +
                                        " does not match shape " + shape_str(shape));
        }
        d_->shape = std::move(shape);
        d_->data = std::move(values);
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, T v) { return Tensor(std::move(shape), v); }
    static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }
    static Tensor from(std::vector<T> values) {
        Shape s{values.size()};
        return Tensor(std::move(s), std::move(values));
    }
    static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0) {
        Tensor t(std::move(shape));
        for (T& v : t.data()) v = static_cast<T>(rng.next_normal(0.0, stddev));
        return t;
    }

    bool defined() const { return static_cast<bool>(d_); }
    const Shape& shape() const { return d_->shape; }
    std::size_t rank() const { return d_->shape.size(); }
    std::size_t size() const { return d_->data.size(); }

    std::vector<T>& data() { return d_->data; }
    const std::vector<T>& data() const { return d_->data; }
    T& at(std::size_t i) { return d_->data[i]; }
    T at(std::size_t i) const { return d_->data[i]; }

    T item() const {
        if (size() != 1) throw std::invalid_argument("item() requires a scalar tensor, got " + shape_str(shape()));
        return d_->data[0];
    }

    bool requires_grad() const { return d_ && d_->requires_grad; }
    Tensor& set_requires_grad(bool v) {
        d_->requires_grad = v;
        return *this;
    }

    bool has_grad() const { return d_ && !d_->grad.empty(); }
    // Gradient buffer, created zero-filled on first use.
    std::vector<T>& grad() {
        if (d_->grad.empty()) d_->grad.assign(d_->data.size(), T(0));
        return d_->grad;
    }
    const std::vector<T>& grad_view() const { return d_->grad; }
    void zero_grad() {
        if (d_) d_->grad.assign(d_->data.size(), T(0));
    }
    void drop_grad() {
        if (d_) d_->grad.clear();
    }

    TensorData<T>* impl() const { return d_.get(); }
    const std::shared_ptr<TensorData<T>>& ptr() const { return d_; }

    // Identity (shared storage), not value equality.
    bool same_storage(const Tensor& other) const { return d_ == other.d_; }

private:
    explicit Tensor(std::shared_ptr<TensorData<T>> d) : d_(std::move(d)) {}
    std::shared_ptr<TensorData<T>> d_;
};

// Per-forward-pass gradient tape. Operations append backward rules while a
// graph is active on the current thread; backward() replays them in reverse
// append order exactly once and then discards the tape.
template <typename T>
class GradGraph {
public:
    GradGraph() : prev_(active_) { active_ = this; }
    ~GradGraph() {
        if (active_ == this) active_ = prev_;
    }
    GradGraph(const GradGraph&) = delete;
    GradGraph& operator=(const GradGraph&) = delete;

    static GradGraph* active() { return active_; }

    void record(std::function<void()> backward_fn) { nodes_.push_back(std::move(backward_fn)); }

    std::size_t node_count() const { return nodes_.size(); }

    void backward(Tensor<T>& loss) {
        if (loss.size() != 1) {
            throw std::invalid_argument("backward() requires a scalar loss, got shape " + shape_str(loss.shape()));
        }
        loss.grad()[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
        nodes_.clear();
    }

private:
    static thread_local GradGraph* active_;
    std::vector<std::function<void()>> nodes_;
    GradGraph* prev_;
};

template <typename T>
thread_local GradGraph<T>* GradGraph<T>::active_ = nullptr;

}  // namespace vqla
