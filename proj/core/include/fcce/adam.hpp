#pragma once

#include <cstdint>
#include <vector>

#include "fcce/tensor.hpp"

namespace fcce::nn {

struct OptimizerState {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

/// One bias-corrected Adam update. Moments are allocated on the first call and
/// must keep matching the parameter shapes afterwards.
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, OptimizerState& state);

extern template void adam_step<float>(std::vector<Tensor<float>>&, OptimizerState&);
extern template void adam_step<double>(std::vector<Tensor<double>>&, OptimizerState&);

}  // namespace fcce::nn
