#include "fcce/ops.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fcce::nn {

namespace {

template <typename T>
std::shared_ptr<Node<T>> make_node(Shape shape, std::initializer_list<const Tensor<T>*> inputs) {
    auto node = std::make_shared<Node<T>>();
    node->data.assign(shape_size(shape), T(0));
    node->shape = std::move(shape);
    for (const Tensor<T>* in : inputs) {
        node->requires_grad = node->requires_grad || in->requires_grad();
    }
    if (node->requires_grad) {
        for (const Tensor<T>* in : inputs) {
            node->parents.push_back(in->node_ptr());
        }
    }
    return node;
}

template <typename T>
bool wants_grad(const Node<T>* node) {
    return node->requires_grad && node->grad.size() == node->data.size();
}

void require_rank(const Shape& shape, std::size_t rank, const char* op) {
    if (shape.size() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_string(shape));
    }
}

// Eight independent partial sums; summation order is fixed, so results are deterministic.
template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
    T acc[8] = {};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (std::size_t l = 0; l < 8; ++l) {
            acc[l] += a[i + l] * b[i + l];
        }
    }
    T total = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (; i < n; ++i) {
        total += a[i] * b[i];
    }
    return total;
}

template <typename T>
void axpy(T alpha, const T* __restrict x, T* __restrict y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

struct ConvGeometry {
    std::size_t batch, in_ch, out_ch, height, width, kernel, pad, out_h, out_w;
    std::size_t rows() const { return in_ch * kernel * kernel; }
    std::size_t cols() const { return out_h * out_w; }
};

template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* col) {
    for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
        const T* plane = image + ci * g.height * g.width;
        for (std::size_t ky = 0; ky < g.kernel; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel; ++kx) {
                T* dst = col + ((ci * g.kernel + ky) * g.kernel + kx) * g.cols();
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(g.pad);
                    T* out_row = dst + oy * g.out_w;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
                        std::fill(out_row, out_row + g.out_w, T(0));
                        continue;
                    }
                    const T* in_row = plane + static_cast<std::size_t>(iy) * g.width;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(g.pad);
                        out_row[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width))
                                          ? T(0)
                                          : in_row[static_cast<std::size_t>(ix)];
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* image) {
    for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
        T* plane = image + ci * g.height * g.width;
        for (std::size_t ky = 0; ky < g.kernel; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel; ++kx) {
                const T* src = col + ((ci * g.kernel + ky) * g.kernel + kx) * g.cols();
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
                        continue;
                    }
                    T* in_row = plane + static_cast<std::size_t>(iy) * g.width;
                    const T* src_row = src + oy * g.out_w;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(g.pad);
                        if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width)) {
                            in_row[static_cast<std::size_t>(ix)] += src_row[ox];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename T>
BatchNormParams<T> BatchNormParams<T>::make(std::size_t channels) {
    BatchNormParams p;
    p.gamma = Tensor<T>::filled({channels}, T(1), true);
    p.beta = Tensor<T>::zeros({channels}, true);
    p.running_mean = Tensor<T>::zeros({channels});
    p.running_var = Tensor<T>::filled({channels}, T(1));
    return p;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, Padding padding) {
    require_rank(input.shape(), 4, "conv2d input");
    require_rank(weight.shape(), 4, "conv2d weight");
    const std::size_t kernel = weight.dim(2);
    if (weight.dim(3) != kernel || kernel % 2 == 0) {
        throw ShapeError("conv2d: kernel must be square with odd size, got " + shape_string(weight.shape()));
    }
    if (weight.dim(1) != input.dim(1)) {
        throw ShapeError("conv2d: input has " + std::to_string(input.dim(1)) + " channels, kernel expects " +
                         std::to_string(weight.dim(1)));
    }
    if (bias.shape() != Shape{weight.dim(0)}) {
        throw ShapeError("conv2d: bias shape " + shape_string(bias.shape()) + " does not match kernel");
    }
    ConvGeometry g{input.dim(0), input.dim(1), weight.dim(0), input.dim(2), input.dim(3), kernel, 0, 0, 0};
    if (padding == Padding::Same) {
        g.pad = kernel / 2;
        g.out_h = g.height;
        g.out_w = g.width;
    } else {
        if (g.height < kernel || g.width < kernel) {
            throw ShapeError("conv2d: input smaller than kernel for valid padding");
        }
        g.out_h = g.height - kernel + 1;
        g.out_w = g.width - kernel + 1;
    }

    auto out = make_node<T>({g.batch, g.out_ch, g.out_h, g.out_w}, {&input, &weight, &bias});
    const T* x = input.data().data();
    const T* w = weight.data().data();
    const T* b = bias.data().data();
    std::vector<T> col(g.rows() * g.cols());
    for (std::size_t n = 0; n < g.batch; ++n) {
        im2col(x + n * g.in_ch * g.height * g.width, g, col.data());
        T* y = out->data.data() + n * g.out_ch * g.cols();
        for (std::size_t co = 0; co < g.out_ch; ++co) {
            T* y_row = y + co * g.cols();
            std::fill(y_row, y_row + g.cols(), b[co]);
            for (std::size_t r = 0; r < g.rows(); ++r) {
                const T a = w[co * g.rows() + r];
                axpy(a, col.data() + r * g.cols(), y_row, g.cols());
            }
        }
    }

    if (out->requires_grad) {
        Node<T>* in_node = input.node();
        Node<T>* w_node = weight.node();
        Node<T>* b_node = bias.node();
        out->backward = [g, in_node, w_node, b_node](Node<T>& self) {
            std::vector<T> col(g.rows() * g.cols());
            std::vector<T> dcol(g.rows() * g.cols());
            const bool need_in = wants_grad(in_node);
            const bool need_w = wants_grad(w_node);
            const bool need_b = wants_grad(b_node);
            for (std::size_t n = 0; n < g.batch; ++n) {
                const T* dy = self.grad.data() + n * g.out_ch * g.cols();
                if (need_b) {
                    for (std::size_t co = 0; co < g.out_ch; ++co) {
                        const T* row = dy + co * g.cols();
                        T s = 0;
                        for (std::size_t k = 0; k < g.cols(); ++k) {
                            s += row[k];
                        }
                        b_node->grad[co] += s;
                    }
                }
                if (need_w) {
                    im2col(in_node->data.data() + n * g.in_ch * g.height * g.width, g, col.data());
                    for (std::size_t co = 0; co < g.out_ch; ++co) {
                        for (std::size_t r = 0; r < g.rows(); ++r) {
                            w_node->grad[co * g.rows() + r] += dot(dy + co * g.cols(), col.data() + r * g.cols(), g.cols());
                        }
                    }
                }
                if (need_in) {
                    std::fill(dcol.begin(), dcol.end(), T(0));
                    for (std::size_t co = 0; co < g.out_ch; ++co) {
                        for (std::size_t r = 0; r < g.rows(); ++r) {
                            axpy(w_node->data[co * g.rows() + r], dy + co * g.cols(), dcol.data() + r * g.cols(),
                                 g.cols());
                        }
                    }
                    col2im_add(dcol.data(), g, in_node->grad.data() + n * g.in_ch * g.height * g.width);
                }
            }
        };
    }
    return Tensor<T>(std::move(out));
}

template <typename T>
Tensor<T> maxpool2(const Tensor<T>& input) {
    require_rank(input.shape(), 4, "maxpool2");
    const std::size_t batch = input.dim(0), ch = input.dim(1), h = input.dim(2), w = input.dim(3);
    if (h % 2 != 0 || w % 2 != 0) {
        throw ShapeError("maxpool2: spatial dims must be even, got " + shape_string(input.shape()));
    }
    const std::size_t oh = h / 2, ow = w / 2;
    auto out = make_node<T>({batch, ch, oh, ow}, {&input});
    std::vector<std::size_t> winners(out->data.size());
    const T* x = input.data().data();
    std::size_t o = 0;
    for (std::size_t plane = 0; plane < batch * ch; ++plane) {
        const std::size_t base = plane * h * w;
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t xo = 0; xo < ow; ++xo, ++o) {
                std::size_t best = base + 2 * y * w + 2 * xo;
                for (std::size_t k : {base + 2 * y * w + 2 * xo + 1, base + (2 * y + 1) * w + 2 * xo,
                                      base + (2 * y + 1) * w + 2 * xo + 1}) {
                    if (x[k] > x[best]) {
                        best = k;
                    }
                }
                winners[o] = best;
                out->data[o] = x[best];
            }
        }
    }
    if (out->requires_grad) {
        Node<T>* in_node = input.node();
        out->backward = [in_node, winners = std::move(winners)](Node<T>& self) {
            for (std::size_t k = 0; k < winners.size(); ++k) {
                in_node->grad[winners[k]] += self.grad[k];
            }
        };
    }
    return Tensor<T>(std::move(out));
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
    auto out = make_node<T>(input.shape(), {&input});
    const T* x = input.data().data();
    for (std::size_t k = 0; k < out->data.size(); ++k) {
        out->data[k] = x[k] > T(0) ? x[k] : T(0);
    }
    if (out->requires_grad) {
        Node<T>* in_node = input.node();
        out->backward = [in_node](Node<T>& self) {
            for (std::size_t k = 0; k < self.grad.size(); ++k) {
                if (self.data[k] > T(0)) {
                    in_node->grad[k] += self.grad[k];
                }
            }
        };
    }
    return Tensor<T>(std::move(out));
}

template <typename T>
Tensor<T> upsample_conv2(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
    require_rank(input.shape(), 4, "upsample_conv2 input");
    require_rank(weight.shape(), 4, "upsample_conv2 weight");
    if (weight.dim(0) != input.dim(1) || weight.dim(2) != 2 || weight.dim(3) != 2) {
        throw ShapeError("upsample_conv2: weight " + shape_string(weight.shape()) + " incompatible with input " +
                         shape_string(input.shape()));
    }
    const std::size_t batch = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::size_t cout = weight.dim(1);
    if (bias.shape() != Shape{cout}) {
        throw ShapeError("upsample_conv2: bias shape " + shape_string(bias.shape()) + " does not match kernel");
    }
    const std::size_t hw = h * w;
    const std::size_t taps = cout * 4;
    auto out = make_node<T>({batch, cout, 2 * h, 2 * w}, {&input, &weight, &bias});
    std::vector<T> tmp(taps * hw);
    for (std::size_t n = 0; n < batch; ++n) {
        std::fill(tmp.begin(), tmp.end(), T(0));
        const T* x = input.data().data() + n * cin * hw;
        for (std::size_t ci = 0; ci < cin; ++ci) {
            for (std::size_t t = 0; t < taps; ++t) {
                axpy(weight.data()[ci * taps + t], x + ci * hw, tmp.data() + t * hw, hw);
            }
        }
        T* y = out->data.data() + n * cout * 4 * hw;
        for (std::size_t co = 0; co < cout; ++co) {
            for (std::size_t t = 0; t < 4; ++t) {
                const std::size_t dy = t / 2, dx = t % 2;
                const T* src = tmp.data() + (co * 4 + t) * hw;
                for (std::size_t yy = 0; yy < h; ++yy) {
                    for (std::size_t xx = 0; xx < w; ++xx) {
                        y[(co * 2 * h + 2 * yy + dy) * 2 * w + 2 * xx + dx] = src[yy * w + xx] + bias.data()[co];
                    }
                }
            }
        }
    }
    if (out->requires_grad) {
        Node<T>* in_node = input.node();
        Node<T>* w_node = weight.node();
        Node<T>* b_node = bias.node();
        out->backward = [=](Node<T>& self) {
            std::vector<T> dtmp(taps * hw);
            for (std::size_t n = 0; n < batch; ++n) {
                const T* dy_all = self.grad.data() + n * cout * 4 * hw;
                for (std::size_t co = 0; co < cout; ++co) {
                    for (std::size_t t = 0; t < 4; ++t) {
                        const std::size_t dy = t / 2, dx = t % 2;
                        T* dst = dtmp.data() + (co * 4 + t) * hw;
                        for (std::size_t yy = 0; yy < h; ++yy) {
                            for (std::size_t xx = 0; xx < w; ++xx) {
                                dst[yy * w + xx] = dy_all[(co * 2 * h + 2 * yy + dy) * 2 * w + 2 * xx + dx];
                            }
                        }
                    }
                }
                if (wants_grad(b_node)) {
                    for (std::size_t co = 0; co < cout; ++co) {
                        T s = 0;
                        for (std::size_t k = 0; k < 4 * hw; ++k) {
                            s += dtmp[co * 4 * hw + k];
                        }
                        b_node->grad[co] += s;
                    }
                }
                const T* x = in_node->data.data() + n * cin * hw;
                if (wants_grad(w_node)) {
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        for (std::size_t t = 0; t < taps; ++t) {
                            w_node->grad[ci * taps + t] += dot(x + ci * hw, dtmp.data() + t * hw, hw);
                        }
                    }
                }
                if (wants_grad(in_node)) {
                    T* dx_all = in_node->grad.data() + n * cin * hw;
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        for (std::size_t t = 0; t < taps; ++t) {
                            axpy(w_node->data[ci * taps + t], dtmp.data() + t * hw, dx_all + ci * hw, hw);
                        }
                    }
                }
            }
        };
    }
    return Tensor<T>(std::move(out));
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) {
        throw ShapeError("concat_channels: nothing to concatenate");
    }
    const Shape& first = parts.front().shape();
    require_rank(first, 4, "concat_channels");
    std::size_t channels = 0;
    bool tracked = false;
    for (const auto& part : parts) {
        const Shape& s = part.shape();
        if (s.size() != 4 || s[0] != first[0] || s[2] != first[2] || s[3] != first[3]) {
            throw ShapeError("concat_channels: incompatible shapes " + shape_string(first) + " and " +
                             shape_string(s));
        }
        channels += s[1];
        tracked = tracked || part.requires_grad();
    }
    const std::size_t batch = first[0], plane = first[2] * first[3];
    auto out = std::make_shared<Node<T>>();
    out->shape = {batch, channels, first[2], first[3]};
    out->data.resize(shape_size(out->shape));
    out->requires_grad = tracked;
    for (std::size_t n = 0; n < batch; ++n) {
        T* dst = out->data.data() + n * channels * plane;
        for (const auto& part : parts) {
            const std::size_t len = part.dim(1) * plane;
            std::copy_n(part.data().data() + n * len, len, dst);
            dst += len;
        }
    }
    if (tracked) {
        std::vector<Node<T>*> inputs;
        for (const auto& part : parts) {
            out->parents.push_back(part.node_ptr());
            inputs.push_back(part.node());
        }
        out->backward = [inputs, batch, channels, plane](Node<T>& self) {
            for (std::size_t n = 0; n < batch; ++n) {
                const T* src = self.grad.data() + n * channels * plane;
                for (Node<T>* in : inputs) {
                    const std::size_t len = in->shape[1] * plane;
                    if (wants_grad(in)) {
                        T* dst = in->grad.data() + n * len;
                        for (std::size_t k = 0; k < len; ++k) {
                            dst[k] += src[k];
                        }
                    }
                    src += len;
                }
            }
        };
    }
    return Tensor<T>(std::move(out));
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    return concat_channels(std::vector<Tensor<T>>{a, b});
}

template <typename T>
Tensor<T> batchnorm(const Tensor<T>& input, BatchNormParams<T>& params, bool training) {
    require_rank(input.shape(), 4, "batchnorm");
    const std::size_t batch = input.dim(0), ch = input.dim(1), plane = input.dim(2) * input.dim(3);
    if (params.gamma.shape() != Shape{ch}) {
        throw ShapeError("batchnorm: parameters for " + shape_string(params.gamma.shape()) + " channels, input " +
                         shape_string(input.shape()));
    }
    const std::size_t count = batch * plane;
    auto out = make_node<T>(input.shape(), {&input, &params.gamma, &params.beta});
    const T* x = input.data().data();
    std::vector<T> normalized(out->data.size());
    std::vector<double> inv_std(ch);

    for (std::size_t c = 0; c < ch; ++c) {
        double mu, var;
        if (training) {
            double s = 0.0;
            for (std::size_t n = 0; n < batch; ++n) {
                const T* p = x + (n * ch + c) * plane;
                for (std::size_t k = 0; k < plane; ++k) {
                    s += p[k];
                }
            }
            mu = s / static_cast<double>(count);
            double sq = 0.0;
            for (std::size_t n = 0; n < batch; ++n) {
                const T* p = x + (n * ch + c) * plane;
                for (std::size_t k = 0; k < plane; ++k) {
                    const double d = p[k] - mu;
                    sq += d * d;
                }
            }
            var = sq / static_cast<double>(count);
            const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
            T& rm = params.running_mean.data()[c];
            T& rv = params.running_var.data()[c];
            rm = static_cast<T>(params.momentum * rm + (1.0 - params.momentum) * mu);
            rv = static_cast<T>(params.momentum * rv + (1.0 - params.momentum) * unbiased);
        } else {
            mu = params.running_mean.data()[c];
            var = params.running_var.data()[c];
        }
        inv_std[c] = 1.0 / std::sqrt(var + params.epsilon);
        const double gamma = params.gamma.data()[c];
        const double beta = params.beta.data()[c];
        for (std::size_t n = 0; n < batch; ++n) {
            const std::size_t off = (n * ch + c) * plane;
            for (std::size_t k = 0; k < plane; ++k) {
                const T xn = static_cast<T>((x[off + k] - mu) * inv_std[c]);
                normalized[off + k] = xn;
                out->data[off + k] = static_cast<T>(gamma * xn + beta);
            }
        }
    }

    if (out->requires_grad) {
        Node<T>* in_node = input.node();
        Node<T>* g_node = params.gamma.node();
        Node<T>* b_node = params.beta.node();
        out->backward = [=, normalized = std::move(normalized), inv_std = std::move(inv_std)](Node<T>& self) {
            for (std::size_t c = 0; c < ch; ++c) {
                double sum_dy = 0.0, sum_dy_xn = 0.0;
                for (std::size_t n = 0; n < batch; ++n) {
                    const std::size_t off = (n * ch + c) * plane;
                    for (std::size_t k = 0; k < plane; ++k) {
                        sum_dy += self.grad[off + k];
                        sum_dy_xn += self.grad[off + k] * normalized[off + k];
                    }
                }
                if (wants_grad(g_node)) {
                    g_node->grad[c] += static_cast<T>(sum_dy_xn);
                }
                if (wants_grad(b_node)) {
                    b_node->grad[c] += static_cast<T>(sum_dy);
                }
                if (!wants_grad(in_node)) {
                    continue;
                }
                const double gamma = g_node->data[c];
                const double n_total = static_cast<double>(count);
                for (std::size_t n = 0; n < batch; ++n) {
                    const std::size_t off = (n * ch + c) * plane;
                    for (std::size_t k = 0; k < plane; ++k) {
                        double dx;
                        if (training) {
                            dx = gamma * inv_std[c] / n_total *
                                 (n_total * self.grad[off + k] - sum_dy - normalized[off + k] * sum_dy_xn);
                        } else {
                            dx = gamma * inv_std[c] * self.grad[off + k];
                        }
                        in_node->grad[off + k] += static_cast<T>(dx);
                    }
                }
            }
        };
    }
    return Tensor<T>(std::move(out));
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& input, double rate, bool training, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw InvalidInput("dropout: rate must lie in [0, 1)");
    }
    if (!training || rate == 0.0) {
        return input;
    }
    auto out = make_node<T>(input.shape(), {&input});
    std::mt19937_64 rng(seed);
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    std::vector<T> mask(out->data.size());
    for (std::size_t k = 0; k < mask.size(); ++k) {
        const double draw = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        mask[k] = draw >= rate ? keep_scale : T(0);
        out->data[k] = input.data()[k] * mask[k];
    }
    if (out->requires_grad) {
        Node<T>* in_node = input.node();
        out->backward = [in_node, mask = std::move(mask)](Node<T>& self) {
            for (std::size_t k = 0; k < mask.size(); ++k) {
                in_node->grad[k] += self.grad[k] * mask[k];
            }
        };
    }
    return Tensor<T>(std::move(out));
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& input) {
    if (input.rank() < 1) {
        throw ShapeError("flatten: needs a batch axis");
    }
    auto out = make_node<T>({input.dim(0), input.numel() / input.dim(0)}, {&input});
    std::copy(input.data().begin(), input.data().end(), out->data.begin());
    if (out->requires_grad) {
        Node<T>* in_node = input.node();
        out->backward = [in_node](Node<T>& self) {
            for (std::size_t k = 0; k < self.grad.size(); ++k) {
                in_node->grad[k] += self.grad[k];
            }
        };
    }
    return Tensor<T>(std::move(out));
}

template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
    require_rank(input.shape(), 2, "linear input");
    require_rank(weight.shape(), 2, "linear weight");
    const std::size_t batch = input.dim(0), features = input.dim(1), outputs = weight.dim(0);
    if (weight.dim(1) != features || bias.shape() != Shape{outputs}) {
        throw ShapeError("linear: weight " + shape_string(weight.shape()) + " incompatible with input " +
                         shape_string(input.shape()));
    }
    auto out = make_node<T>({batch, outputs}, {&input, &weight, &bias});
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t o = 0; o < outputs; ++o) {
            out->data[n * outputs + o] =
                bias.data()[o] + dot(input.data().data() + n * features, weight.data().data() + o * features, features);
        }
    }
    if (out->requires_grad) {
        Node<T>* in_node = input.node();
        Node<T>* w_node = weight.node();
        Node<T>* b_node = bias.node();
        out->backward = [=](Node<T>& self) {
            for (std::size_t n = 0; n < batch; ++n) {
                for (std::size_t o = 0; o < outputs; ++o) {
                    const T g = self.grad[n * outputs + o];
                    if (wants_grad(b_node)) {
                        b_node->grad[o] += g;
                    }
                    if (wants_grad(w_node)) {
                        axpy(g, in_node->data.data() + n * features, w_node->grad.data() + o * features, features);
                    }
                    if (wants_grad(in_node)) {
                        axpy(g, w_node->data.data() + o * features, in_node->grad.data() + n * features, features);
                    }
                }
            }
        };
    }
    return Tensor<T>(std::move(out));
}

template <typename T>
Tensor<T> sum(const Tensor<T>& input) {
    auto out = make_node<T>({}, {&input});
    double total = 0.0;
    for (T v : input.data()) {
        total += v;
    }
    out->data[0] = static_cast<T>(total);
    if (out->requires_grad) {
        Node<T>* in_node = input.node();
        out->backward = [in_node](Node<T>& self) {
            for (T& g : in_node->grad) {
                g += self.grad[0];
            }
        };
    }
    return Tensor<T>(std::move(out));
}

template <typename T>
Tensor<T> mean(const Tensor<T>& input) {
    return scale(sum(input), static_cast<T>(1.0 / static_cast<double>(input.numel())));
}

template <typename T>
Tensor<T> scale(const Tensor<T>& input, T factor) {
    auto out = make_node<T>(input.shape(), {&input});
    for (std::size_t k = 0; k < out->data.size(); ++k) {
        out->data[k] = input.data()[k] * factor;
    }
    if (out->requires_grad) {
        Node<T>* in_node = input.node();
        out->backward = [in_node, factor](Node<T>& self) {
            for (std::size_t k = 0; k < self.grad.size(); ++k) {
                in_node->grad[k] += self.grad[k] * factor;
            }
        };
    }
    return Tensor<T>(std::move(out));
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("add: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
    }
    auto out = make_node<T>(a.shape(), {&a, &b});
    for (std::size_t k = 0; k < out->data.size(); ++k) {
        out->data[k] = a.data()[k] + b.data()[k];
    }
    if (out->requires_grad) {
        Node<T>* a_node = a.node();
        Node<T>* b_node = b.node();
        out->backward = [a_node, b_node](Node<T>& self) {
            for (Node<T>* in : {a_node, b_node}) {
                if (wants_grad(in)) {
                    for (std::size_t k = 0; k < self.grad.size(); ++k) {
                        in->grad[k] += self.grad[k];
                    }
                }
            }
        };
    }
    return Tensor<T>(std::move(out));
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("mul: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
    }
    auto out = make_node<T>(a.shape(), {&a, &b});
    for (std::size_t k = 0; k < out->data.size(); ++k) {
        out->data[k] = a.data()[k] * b.data()[k];
    }
    if (out->requires_grad) {
        Node<T>* a_node = a.node();
        Node<T>* b_node = b.node();
        out->backward = [a_node, b_node](Node<T>& self) {
            for (std::size_t k = 0; k < self.grad.size(); ++k) {
                if (wants_grad(a_node)) {
                    a_node->grad[k] += self.grad[k] * b_node->data[k];
                }
                if (wants_grad(b_node)) {
                    b_node->grad[k] += self.grad[k] * a_node->data[k];
                }
            }
        };
    }
    return Tensor<T>(std::move(out));
}

template <typename T>
Tensor<T> external_loss(const Tensor<T>& input, double value, std::span<const double> grad) {
    if (grad.size() != input.numel()) {
        throw ShapeError("external_loss: gradient has " + std::to_string(grad.size()) + " entries for input " +
                         shape_string(input.shape()));
    }
    auto out = make_node<T>({}, {&input});
    out->data[0] = static_cast<T>(value);
    if (out->requires_grad) {
        Node<T>* in_node = input.node();
        out->backward = [in_node, g = std::vector<double>(grad.begin(), grad.end())](Node<T>& self) {
            const double upstream = self.grad[0];
            for (std::size_t k = 0; k < g.size(); ++k) {
                in_node->grad[k] += static_cast<T>(upstream * g[k]);
            }
        };
    }
    return Tensor<T>(std::move(out));
}

#define FCCE_INSTANTIATE_OPS(T)                                                                        \
    template struct BatchNormParams<T>;                                                                \
    template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Padding);          \
    template Tensor<T> maxpool2(const Tensor<T>&);                                                     \
    template Tensor<T> relu(const Tensor<T>&);                                                         \
    template Tensor<T> upsample_conv2(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);           \
    template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                            \
    template Tensor<T> concat_channels(const std::vector<Tensor<T>>&);                                 \
    template Tensor<T> batchnorm(const Tensor<T>&, BatchNormParams<T>&, bool);                         \
    template Tensor<T> dropout(const Tensor<T>&, double, bool, std::uint64_t);                         \
    template Tensor<T> flatten(const Tensor<T>&);                                                      \
    template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                   \
    template Tensor<T> sum(const Tensor<T>&);                                                          \
    template Tensor<T> mean(const Tensor<T>&);                                                         \
    template Tensor<T> scale(const Tensor<T>&, T);                                                     \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                        \
    template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                        \
    template Tensor<T> external_loss(const Tensor<T>&, double, std::span<const double>);

FCCE_INSTANTIATE_OPS(float)
FCCE_INSTANTIATE_OPS(double)

#undef FCCE_INSTANTIATE_OPS

}  // namespace fcce::nn
