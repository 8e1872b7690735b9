#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fcce/tensor.hpp"

namespace fcce::nn {

enum class Padding { Same, Valid };

template <typename T>
struct BatchNormParams {
    Tensor<T> gamma;
    Tensor<T> beta;
    Tensor<T> running_mean;
    Tensor<T> running_var;
    double momentum = 0.9;
    double epsilon = 1e-5;

    static BatchNormParams make(std::size_t channels);
};

/// Cross-correlation of [B,Cin,H,W] with weight [Cout,Cin,K,K] (odd K) plus bias [Cout].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, Padding padding);

/// 2x2 max pooling with stride 2. Spatial dims must be even.
template <typename T>
Tensor<T> maxpool2(const Tensor<T>& input);

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

/// Transposed 2x2 convolution with stride 2: weight [Cin,Cout,2,2], bias [Cout].
template <typename T>
Tensor<T> upsample_conv2(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts);

/// Per-channel batch normalisation. Training mode normalises with batch statistics and
/// updates the running averages; eval mode uses the running averages.
template <typename T>
Tensor<T> batchnorm(const Tensor<T>& input, BatchNormParams<T>& params, bool training);

/// Inverted dropout: survivors are scaled by 1/(1-rate). Identity when not training.
template <typename T>
Tensor<T> dropout(const Tensor<T>& input, double rate, bool training, std::uint64_t seed);

template <typename T>
Tensor<T> flatten(const Tensor<T>& input);

/// [B,F] x weight [O,F]^T + bias [O].
template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
Tensor<T> sum(const Tensor<T>& input);

template <typename T>
Tensor<T> mean(const Tensor<T>& input);

template <typename T>
Tensor<T> scale(const Tensor<T>& input, T factor);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

/// Scalar node with a precomputed value whose backward adds upstream * `grad` into
/// `input`. Bridges analytically differentiated losses into the graph.
template <typename T>
Tensor<T> external_loss(const Tensor<T>& input, double value, std::span<const double> grad);

}  // namespace fcce::nn
