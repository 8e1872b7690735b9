#include "fcce/tensor.hpp"

#include <unordered_set>

namespace fcce::nn {

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            out += ",";
        }
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

template <typename T>
void backward(const Tensor<T>& root) {
    if (!root.defined()) {
        throw InvalidInput("backward: undefined root");
    }
    Node<T>* top = root.node();
    if (!top->shape.empty()) {
        throw InvalidInput("backward: root must be a scalar, got shape " + shape_string(top->shape));
    }
    if (top->consumed) {
        throw InvalidInput("backward: graph already consumed; rebuild the forward pass first");
    }
    if (!top->requires_grad) {
        throw InvalidInput("backward: root does not depend on any tracked tensor");
    }

    // Iterative post-order DFS gives a topological order (parents before children).
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{top, 0}};
    visited.insert(top);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<T>* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
            continue;
        }
        order.push_back(node);
        stack.pop_back();
    }

    for (Node<T>* node : order) {
        if (node->is_leaf()) {
            node->ensure_grad();
        } else {
            node->grad.assign(node->data.size(), T(0));
        }
    }
    top->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* node = *it;
        if (node->backward) {
            node->backward(*node);
        }
    }
    for (Node<T>* node : order) {
        if (!node->is_leaf()) {
            node->backward = nullptr;
            node->parents.clear();
            node->consumed = true;
        }
    }
    top->consumed = true;
}

template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

}  // namespace fcce::nn
