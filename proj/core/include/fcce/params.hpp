#pragma once

#include <string>
#include <vector>

#include "fcce/tensor.hpp"

namespace fcce::nn {

/// Ordered registry of named model tensors. Trainable entries receive gradients;
/// buffers (batchnorm running statistics) are stored in checkpoints but never optimised.
template <typename T>
class ParameterSet {
public:
    struct Entry {
        std::string name;
        Tensor<T> tensor;
        bool trainable;
    };

    void add(std::string name, Tensor<T> tensor, bool trainable) {
        for (const auto& e : entries_) {
            if (e.name == name) {
                throw InvalidInput("ParameterSet: duplicate name " + name);
            }
        }
        tensor.set_requires_grad(trainable);
        entries_.push_back({std::move(name), std::move(tensor), trainable});
    }

    const std::vector<Entry>& entries() const noexcept { return entries_; }

    std::vector<Tensor<T>> trainable() const {
        std::vector<Tensor<T>> out;
        for (const auto& e : entries_) {
            if (e.trainable) {
                out.push_back(e.tensor);
            }
        }
        return out;
    }

    std::size_t trainable_count() const {
        std::size_t total = 0;
        for (const auto& e : entries_) {
            if (e.trainable) {
                total += e.tensor.numel();
            }
        }
        return total;
    }

    const Entry* find(const std::string& name) const {
        for (const auto& e : entries_) {
            if (e.name == name) {
                return &e;
            }
        }
        return nullptr;
    }

    void zero_grad() {
        for (auto& e : entries_) {
            if (e.trainable) {
                e.tensor.zero_grad();
            }
        }
    }

private:
    std::vector<Entry> entries_;
};

}  // namespace fcce::nn
