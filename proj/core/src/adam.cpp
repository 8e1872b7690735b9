#include "fcce/adam.hpp"

#include <cmath>

namespace fcce::nn {

template <typename T>
void adam_step(std::vector<Tensor<T>>& params, OptimizerState& state) {
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.numel(), 0.0);
            state.second_moment.emplace_back(p.numel(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw InvalidInput("adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                           " tensors, got " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].has_grad()) {
            throw InvalidInput("adam_step: parameter " + std::to_string(i) + " has no gradient");
        }
        if (state.first_moment[i].size() != params[i].numel()) {
            throw InvalidInput("adam_step: moment shape mismatch for parameter " + std::to_string(i));
        }
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto data = params[i].data();
        auto grad = params[i].grad();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        for (std::size_t k = 0; k < data.size(); ++k) {
            const double g = grad[k];
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
            const double m_hat = m[k] / correction1;
            const double v_hat = v[k] / correction2;
            data[k] = static_cast<T>(data[k] - state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon));
        }
    }
}

template void adam_step<float>(std::vector<Tensor<float>>&, OptimizerState&);
template void adam_step<double>(std::vector<Tensor<double>>&, OptimizerState&);

}  // namespace fcce::nn
