#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fcce/error.hpp"

namespace fcce::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    bool consumed = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward;

    bool is_leaf() const noexcept { return parents.empty() && !backward; }
    void ensure_grad() {
        if (grad.size() != data.size()) {
            grad.assign(data.size(), T(0));
        }
    }
};

/// Shared handle to a node of a reverse-mode computation graph. Copies alias the
/// same storage; use clone() for a detached deep copy.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        auto node = std::make_shared<Node<T>>();
        node->data.assign(shape_size(shape), T(0));
        node->shape = std::move(shape);
        node->requires_grad = requires_grad;
        return Tensor(std::move(node));
    }

    static Tensor filled(Shape shape, T value, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        std::fill(t.node_->data.begin(), t.node_->data.end(), value);
        return t;
    }

    static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false) {
        if (values.size() != shape_size(shape)) {
            throw ShapeError("Tensor::from: " + std::to_string(values.size()) + " values for shape " +
                             shape_string(shape));
        }
        auto node = std::make_shared<Node<T>>();
        node->shape = std::move(shape);
        node->data = std::move(values);
        node->requires_grad = requires_grad;
        return Tensor(std::move(node));
    }

    static Tensor scalar(T value, bool requires_grad = false) { return from({}, {value}, requires_grad); }

    explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    bool defined() const noexcept { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->data.size(); }

    std::span<T> data() { return node_->data; }
    std::span<const T> data() const { return node_->data; }
    std::span<const T> grad() const { return node_->grad; }
    std::span<T> mutable_grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    bool has_grad() const { return node_->grad.size() == node_->data.size() && !node_->data.empty(); }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool flag) { node_->requires_grad = flag; }
    void zero_grad() { node_->grad.assign(node_->data.size(), T(0)); }
    void clear_grad() { node_->grad.clear(); }

    T item() const {
        if (numel() != 1) {
            throw ShapeError("Tensor::item on tensor of shape " + shape_string(shape()));
        }
        return node_->data[0];
    }

    Tensor clone() const {
        Tensor copy = from(node_->shape, node_->data, node_->requires_grad);
        return copy;
    }

    Node<T>* node() const noexcept { return node_.get(); }
    const std::shared_ptr<Node<T>>& node_ptr() const noexcept { return node_; }

private:
    std::shared_ptr<Node<T>> node_;
};

/// Runs reverse-mode accumulation from a scalar root. Leaf tensors accumulate into
/// their existing grad; intermediate nodes are released afterwards, so a second call
/// on the same root throws.
template <typename T>
void backward(const Tensor<T>& root);

extern template void backward<float>(const Tensor<float>&);
extern template void backward<double>(const Tensor<double>&);

}  // namespace fcce::nn
