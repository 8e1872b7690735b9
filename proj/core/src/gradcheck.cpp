#include "fcce/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "fcce/error.hpp"
#include "fcce/loss.hpp"
#include "fcce/ops.hpp"
#include "fcce/random.hpp"

namespace fcce::harness {

namespace {

using nn::Tensor;
using T = Tensor<double>;

constexpr double kFloor = 1e-3;

double rel_err(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), kFloor}); }

double max_rel_err(const std::vector<double>& analytic, const std::vector<double>& numeric) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        worst = std::max(worst, rel_err(analytic[i], numeric[i]));
    }
    return worst;
}

// ---- loss modes ----------------------------------------------------------------------

ClassMatrix random_logits(Rng& rng, std::size_t c, std::size_t n) {
    ClassMatrix z(c, n);
    for (auto& v : z.values()) {
        v = rng.normal() * 1.5;
    }
    return z;
}

ClassMatrix random_one_hot(Rng& rng, std::size_t c, std::size_t n) {
    std::vector<int> labels(n);
    for (auto& l : labels) {
        l = static_cast<int>(rng.below(c));
    }
    return loss::one_hot(labels, static_cast<int>(c));
}

ClassMatrix random_memberships(Rng& rng, std::size_t c, std::size_t n) {
    ClassMatrix u(c, n);
    for (std::size_t j = 0; j < n; ++j) {
        double total = 0.0;
        for (std::size_t i = 0; i < c; ++i) {
            u(i, j) = 0.05 + rng.uniform();
            total += u(i, j);
        }
        for (std::size_t i = 0; i < c; ++i) {
            u(i, j) /= total;
        }
    }
    return u;
}

// Checks d f / d x for a function of a matrix against an analytic gradient.
double check_matrix(const ClassMatrix& x, const std::function<double(const ClassMatrix&)>& f,
                    const ClassMatrix& analytic, double h) {
    std::vector<double> numeric(x.values().size());
    ClassMatrix probe = x;
    for (std::size_t k = 0; k < numeric.size(); ++k) {
        const double saved = probe.values()[k];
        probe.values()[k] = saved + h;
        const double fp = f(probe);
        probe.values()[k] = saved - h;
        const double fm = f(probe);
        probe.values()[k] = saved;
        numeric[k] = (fp - fm) / (2.0 * h);
    }
    return max_rel_err({analytic.values().begin(), analytic.values().end()}, numeric);
}

double loss_instance(const std::string& mode, Rng& rng) {
    const std::size_t c = rng.below(2) == 0 ? 2 : 4;
    const std::size_t n = rng.below(2) == 0 ? 1 : 16;
    const ClassMatrix y = random_one_hot(rng, c, n);
    constexpr double h = 1e-6;

    if (mode == "fuzzy_entropy") {
        const ClassMatrix u = random_memberships(rng, c, n);
        return check_matrix(u, [](const ClassMatrix& v) { return loss::fuzzy_entropy(v); },
                            loss::fuzzy_entropy_grad(u), h);
    }
    const ClassMatrix z = random_logits(rng, c, n);
    if (mode == "cce") {
        return check_matrix(z, [&](const ClassMatrix& v) { return loss::cce(y, loss::softmax(v)); },
                            loss::cce_grad_logits(y, loss::softmax(z)), h);
    }
    if (mode == "deep_supervision") {
        return check_matrix(z, [&](const ClassMatrix& v) { return loss::deep_supervision_loss(y, loss::softmax(v)); },
                            loss::deep_supervision_grad_logits(y, loss::softmax(z)), h);
    }
    loss::LossConfig cfg;
    cfg.kind = loss::LossKind::Fcce;
    cfg.lambda = 0.1 + rng.uniform();
    cfg.blend_beta = rng.uniform();
    if (mode == "fcce_fcm") {
        cfg.membership_source = loss::MembershipSource::FcmFixed;
    } else if (mode == "fcce_prediction") {
        cfg.membership_source = loss::MembershipSource::Prediction;
    } else if (mode == "fcce_blend") {
        cfg.membership_source = loss::MembershipSource::Blend;
    } else {
        throw ConfigError("unknown gradcheck mode '" + mode + "'");
    }
    const ClassMatrix u = random_memberships(rng, c, n);
    return check_matrix(z, [&](const ClassMatrix& v) { return loss::fcce(y, loss::softmax(v), &u, cfg); },
                        loss::fcce_grad_logits(y, loss::softmax(z), &u, cfg), h);
}

// ---- autodiff ops ----------------------------------------------------------------------

T random_tensor(Rng& rng, nn::Shape shape, bool requires_grad = true) {
    std::vector<double> values(nn::shape_size(shape));
    for (auto& v : values) {
        v = rng.normal();
    }
    return T::from(std::move(shape), std::move(values), requires_grad);
}

// Each op output is contracted with a fixed random tensor so the scalar objective is
// sensitive to every output entry. Compares graph gradients of a scalar-valued builder w.r.t. each input with central
// differences of the forward value.
double check_graph(std::vector<T> inputs, const std::function<T(const std::vector<T>&)>& build, double h) {
    for (auto& t : inputs) {
        t.zero_grad();
    }
    T root = build(inputs);
    nn::backward(root);
    double worst = 0.0;
    for (auto& t : inputs) {
        std::vector<double> analytic(t.grad().begin(), t.grad().end());
        std::vector<double> numeric(t.numel());
        for (std::size_t k = 0; k < t.numel(); ++k) {
            const double saved = t.data()[k];
            t.data()[k] = saved + h;
            const double fp = build(inputs).item();
            t.data()[k] = saved - h;
            const double fm = build(inputs).item();
            t.data()[k] = saved;
            numeric[k] = (fp - fm) / (2.0 * h);
        }
        worst = std::max(worst, max_rel_err(analytic, numeric));
    }
    return worst;
}

double op_instance(const std::string& mode, Rng& rng) {
    constexpr double h = 1e-6;
    const std::size_t b = 1 + rng.below(2);
    const std::size_t cin = 1 + rng.below(3);
    const std::size_t cout = 1 + rng.below(3);
    const std::size_t hw = 2 * (1 + rng.below(3));

    if (mode == "conv2d_same" || mode == "conv2d_valid") {
        const std::size_t k = rng.below(2) == 0 ? 1 : 3;
        const auto pad = mode == "conv2d_same" ? nn::Padding::Same : nn::Padding::Valid;
        const std::size_t size = pad == nn::Padding::Valid ? hw + 2 : hw;
        const T r = random_tensor(rng, {b, cout, pad == nn::Padding::Valid ? size - k + 1 : size,
                                        pad == nn::Padding::Valid ? size - k + 1 : size},
                                  false);
        return check_graph({random_tensor(rng, {b, cin, size, size}), random_tensor(rng, {cout, cin, k, k}),
                            random_tensor(rng, {cout})},
                           [&](const std::vector<T>& in) {
                               return nn::sum(nn::mul(nn::conv2d(in[0], in[1], in[2], pad), r));
                           },
                           h);
    }
    if (mode == "maxpool2") {
        const T r = random_tensor(rng, {b, cin, hw / 2, hw / 2}, false);
        return check_graph({random_tensor(rng, {b, cin, hw, hw})},
                           [&](const std::vector<T>& in) { return nn::sum(nn::mul(nn::maxpool2(in[0]), r)); }, h);
    }
    if (mode == "relu") {
        const T r = random_tensor(rng, {b, cin, hw, hw}, false);
        return check_graph({random_tensor(rng, {b, cin, hw, hw})},
                           [&](const std::vector<T>& in) { return nn::sum(nn::mul(nn::relu(in[0]), r)); }, h);
    }
    if (mode == "upsample_conv2") {
        const T r = random_tensor(rng, {b, cout, 2 * hw, 2 * hw}, false);
        return check_graph(
            {random_tensor(rng, {b, cin, hw, hw}), random_tensor(rng, {cin, cout, 2, 2}), random_tensor(rng, {cout})},
            [&](const std::vector<T>& in) { return nn::sum(nn::mul(nn::upsample_conv2(in[0], in[1], in[2]), r)); }, h);
    }
    if (mode == "concat_channels") {
        const T r = random_tensor(rng, {b, cin + cout + 1, hw, hw}, false);
        return check_graph({random_tensor(rng, {b, cin, hw, hw}), random_tensor(rng, {b, cout, hw, hw}),
                            random_tensor(rng, {b, 1, hw, hw})},
                           [&](const std::vector<T>& in) { return nn::sum(nn::mul(nn::concat_channels(in), r)); }, h);
    }
    if (mode == "batchnorm_train" || mode == "batchnorm_eval") {
        const bool training = mode == "batchnorm_train";
        auto params = nn::BatchNormParams<double>::make(cin);
        for (std::size_t i = 0; i < cin; ++i) {
            params.running_mean.data()[i] = rng.normal() * 0.5;
            params.running_var.data()[i] = 0.5 + rng.uniform();
        }
        const std::size_t bn_batch = b + 1;  // at least two samples for batch statistics
        const T r = random_tensor(rng, {bn_batch, cin, hw, hw}, false);
        return check_graph({random_tensor(rng, {bn_batch, cin, hw, hw}), random_tensor(rng, {cin}),
                            random_tensor(rng, {cin})},
                           [&](const std::vector<T>& in) {
                               params.gamma = in[1];
                               params.beta = in[2];
                               return nn::sum(nn::mul(nn::batchnorm(in[0], params, training), r));
                           },
                           h);
    }
    if (mode == "dropout") {
        const std::uint64_t seed = rng.next();
        const double rate = 0.1 + 0.5 * rng.uniform();
        const T r = random_tensor(rng, {b, cin, hw, hw}, false);
        return check_graph({random_tensor(rng, {b, cin, hw, hw})},
                           [&](const std::vector<T>& in) {
                               return nn::sum(nn::mul(nn::dropout(in[0], rate, true, seed), r));
                           },
                           h);
    }
    if (mode == "linear") {
        const std::size_t f = cin * hw;
        const T r = random_tensor(rng, {b, cout}, false);
        return check_graph({random_tensor(rng, {b, cin, hw}), random_tensor(rng, {cout, f}), random_tensor(rng, {cout})},
                           [&](const std::vector<T>& in) {
                               return nn::sum(nn::mul(nn::linear(nn::flatten(in[0]), in[1], in[2]), r));
                           },
                           h);
    }
    if (mode == "elementwise") {
        const T r = random_tensor(rng, {b, cin, hw}, false);
        const double factor = rng.normal();
        return check_graph({random_tensor(rng, {b, cin, hw}), random_tensor(rng, {b, cin, hw})},
                           [&](const std::vector<T>& in) {
                               T prod = nn::mul(nn::add(in[0], in[1]), nn::scale(in[1], factor));
                               return nn::add(nn::mean(nn::mul(prod, r)), nn::sum(in[0]));
                           },
                           h);
    }
    if (mode == "composite") {
        // conv-bn-relu, pool, up-conv, skip concat, 1x1 head, FCCE through external_loss.
        const std::size_t classes = 2 + rng.below(2);
        const std::size_t width = 2;
        const std::size_t size = 4;
        std::vector<int> labels(b * size * size);
        for (auto& l : labels) {
            l = static_cast<int>(rng.below(classes));
        }
        loss::LossConfig cfg;
        cfg.lambda = 0.5;
        auto bn = nn::BatchNormParams<double>::make(width);
        std::vector<T> inputs{random_tensor(rng, {b, 1, size, size}),           random_tensor(rng, {width, 1, 3, 3}),
                              random_tensor(rng, {width}),                      random_tensor(rng, {width, width, 2, 2}),
                              random_tensor(rng, {width}),                      random_tensor(rng, {classes, 2 * width, 1, 1}),
                              random_tensor(rng, {classes})};
        auto build = [&](const std::vector<T>& in) {
            T x = nn::relu(nn::batchnorm(nn::conv2d(in[0], in[1], in[2], nn::Padding::Same), bn, true));
            T up = nn::upsample_conv2(nn::maxpool2(x), in[3], in[4]);
            T logits = nn::conv2d(nn::concat_channels(x, up), in[5], in[6], nn::Padding::Same);
            const std::size_t n = size * size;
            double value = 0.0;
            std::vector<double> grad(logits.numel());
            for (std::size_t s = 0; s < b; ++s) {
                ClassMatrix z(classes, n);
                for (std::size_t k = 0; k < classes; ++k) {
                    for (std::size_t p = 0; p < n; ++p) {
                        z(k, p) = logits.data()[(s * classes + k) * n + p];
                    }
                }
                const ClassMatrix y = loss::one_hot(std::span(labels).subspan(s * n, n), static_cast<int>(classes));
                const ClassMatrix prob = loss::softmax(z);
                value += loss::fcce(y, prob, nullptr, cfg);
                const ClassMatrix g = loss::fcce_grad_logits(y, prob, nullptr, cfg);
                for (std::size_t k = 0; k < classes; ++k) {
                    for (std::size_t p = 0; p < n; ++p) {
                        grad[(s * classes + k) * n + p] = g(k, p);
                    }
                }
            }
            return nn::external_loss(logits, value, grad);
        };
        // Keep logits moderate so no probability reaches the epsilon clamp of the loss,
        // where value and analytic gradient legitimately disagree.
        for (std::size_t i = 5; i < inputs.size(); ++i) {
            for (auto& v : inputs[i].data()) {
                v *= 0.25;
            }
        }
        return check_graph(std::move(inputs), build, h);
    }
    throw ConfigError("unknown gradcheck mode '" + mode + "'");
}

bool is_loss_mode(const std::string& mode) {
    static const std::vector<std::string> names{"cce",        "fuzzy_entropy", "fcce_fcm", "fcce_prediction",
                                                "fcce_blend", "deep_supervision"};
    return std::find(names.begin(), names.end(), mode) != names.end();
}

}  // namespace

const std::vector<std::string>& gradcheck_modes() {
    static const std::vector<std::string> modes{
        "cce",          "fuzzy_entropy",  "fcce_fcm",        "fcce_prediction", "fcce_blend",
        "deep_supervision", "conv2d_same", "conv2d_valid",   "maxpool2",        "relu",
        "upsample_conv2",   "concat_channels", "batchnorm_train", "batchnorm_eval", "dropout",
        "linear",           "elementwise",  "composite"};
    return modes;
}

std::vector<GradcheckRow> gradcheck(const std::vector<std::string>& modes, int instances, std::uint64_t seed) {
    if (instances <= 0) {
        throw ConfigError("gradcheck: instances must be positive");
    }
    const auto& known = gradcheck_modes();
    std::vector<GradcheckRow> rows;
    for (const auto& mode : modes) {
        const auto it = std::find(known.begin(), known.end(), mode);
        if (it == known.end()) {
            throw ConfigError("unknown gradcheck mode '" + mode + "'");
        }
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(it - known.begin())));
        GradcheckRow row{mode, 0.0, instances};
        for (int i = 0; i < instances; ++i) {
            const double err = is_loss_mode(mode) ? loss_instance(mode, rng) : op_instance(mode, rng);
            row.max_rel_err = std::max(row.max_rel_err, std::isfinite(err) ? err : INFINITY);
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace fcce::harness
