#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fcce/error.hpp"

namespace fcce {

/// Dense row-major matrix with one row per class (or cluster) and one column per pixel.
class ClassMatrix {
public:
    ClassMatrix() = default;
    ClassMatrix(std::size_t classes, std::size_t pixels, double fill = 0.0)
        : classes_(classes), pixels_(pixels), values_(classes * pixels, fill) {}

    std::size_t classes() const noexcept { return classes_; }
    std::size_t pixels() const noexcept { return pixels_; }
    bool empty() const noexcept { return values_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return values_[i * pixels_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values_[i * pixels_ + j]; }

    std::span<double> row(std::size_t i) { return {values_.data() + i * pixels_, pixels_}; }
    std::span<const double> row(std::size_t i) const { return {values_.data() + i * pixels_, pixels_}; }

    std::vector<double>& values() noexcept { return values_; }
    const std::vector<double>& values() const noexcept { return values_; }

    bool same_shape(const ClassMatrix& other) const noexcept {
        return classes_ == other.classes_ && pixels_ == other.pixels_;
    }

    friend bool operator==(const ClassMatrix&, const ClassMatrix&) = default;

private:
    std::size_t classes_ = 0;
    std::size_t pixels_ = 0;
    std::vector<double> values_;
};

inline void require_same_shape(const ClassMatrix& a, const ClassMatrix& b, const char* where) {
    if (!a.same_shape(b)) {
        throw InvalidInput(std::string(where) + ": shape mismatch");
    }
}

}  // namespace fcce
