#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "fcce/adam.hpp"
#include "fcce/checkpoint.hpp"
#include "fcce/error.hpp"
#include "fcce/ops.hpp"
#include "fcce/params.hpp"
#include "oracles.hpp"

using namespace fcce;
using namespace fcce::nn;
using D = Tensor<double>;
using F = Tensor<float>;

namespace {

D random_d(std::mt19937_64& gen, Shape shape, bool grad = true) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = n(gen);
    return D::from(std::move(shape), std::move(v), grad);
}

std::filesystem::path temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "fcce_unit";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST(Conv2d, IdentityKernelSamePadding) {
    std::mt19937_64 gen(1);
    const D x = random_d(gen, {2, 1, 5, 5}, false);
    D w = D::zeros({1, 1, 3, 3});
    w.data()[4] = 1.0;
    const D y = conv2d(x, w, D::zeros({1}), Padding::Same);
    ASSERT_EQ(y.shape(), x.shape());
    for (std::size_t k = 0; k < x.numel(); ++k) EXPECT_EQ(y.data()[k], x.data()[k]);
}

TEST(Conv2d, BoxSumOnConstantInterior) {
    const D x = D::filled({1, 1, 6, 6}, 2.5);
    const D y = conv2d(x, D::filled({1, 1, 3, 3}, 1.0), D::zeros({1}), Padding::Same);
    for (std::size_t r = 1; r < 5; ++r)
        for (std::size_t c = 1; c < 5; ++c) EXPECT_DOUBLE_EQ(y.data()[r * 6 + c], 22.5);
    EXPECT_DOUBLE_EQ(y.data()[0], 10.0);  // corner sees a 2x2 window
}

TEST(Conv2d, MatchesDirectLoops) {
    std::mt19937_64 gen(2);
    for (bool same : {true, false}) {
        for (std::size_t k : {1u, 3u, 5u}) {
            const D x = random_d(gen, {1, 3, 7, 6}, false);
            const D w = random_d(gen, {4, 3, k, k}, false);
            const D b = random_d(gen, {4}, false);
            const D y = conv2d(x, w, b, same ? Padding::Same : Padding::Valid);
            const auto ref = oracle::conv_reference({x.data().begin(), x.data().end()}, 3, 7, 6,
                                                    {w.data().begin(), w.data().end()},
                                                    {b.data().begin(), b.data().end()}, 4, k, same);
            ASSERT_EQ(y.numel(), ref.size());
            for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.data()[i], ref[i], 1e-12);
        }
    }
}

TEST(Conv2d, ChannelMismatchIsShapeError) {
    EXPECT_THROW(conv2d(D::zeros({1, 2, 4, 4}), D::zeros({1, 3, 3, 3}), D::zeros({1}), Padding::Same), ShapeError);
}

TEST(Conv2d, FloatMatchesDouble) {
    std::mt19937_64 gen(3);
    const D x = random_d(gen, {2, 2, 8, 8}, false);
    const D w = random_d(gen, {3, 2, 3, 3}, false);
    const D b = random_d(gen, {3}, false);
    auto to_f = [](const D& t) { return F::from(t.shape(), std::vector<float>(t.data().begin(), t.data().end())); };
    const D yd = conv2d(x, w, b, Padding::Same);
    const F yf = conv2d(to_f(x), to_f(w), to_f(b), Padding::Same);
    for (std::size_t i = 0; i < yd.numel(); ++i) EXPECT_NEAR(yf.data()[i], yd.data()[i], 1e-4);
}

TEST(Maxpool, PicksWindowMaximum) {
    const D x = D::from({1, 1, 2, 4}, {1, 5, 2, 0, 3, 4, 9, -1});
    const D y = maxpool2(x);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 2}));
    EXPECT_EQ(y.data()[0], 5.0);
    EXPECT_EQ(y.data()[1], 9.0);
}

TEST(Maxpool, OddDimsRejected) { EXPECT_THROW(maxpool2(D::zeros({1, 1, 3, 4})), ShapeError); }

TEST(Maxpool, GradientRoutesToArgmax) {
    D x = D::from({1, 1, 2, 2}, {1, 5, 2, 0}, true);
    backward(sum(maxpool2(x)));
    EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{0, 1, 0, 0}));
}

TEST(Relu, ClampsNegatives) {
    const D y = relu(D::from({3}, {-1.0, 0.0, 2.0}));
    EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), (std::vector<double>{0, 0, 2}));
}

TEST(UpsampleConv, SinglePixelSpreadsKernel) {
    const D x = D::from({1, 1, 1, 1}, {2.0});
    const D w = D::from({1, 1, 2, 2}, {1, 2, 3, 4});
    const D y = upsample_conv2(x, w, D::from({1}, {0.5}));
    ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
    EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), (std::vector<double>{2.5, 4.5, 6.5, 8.5}));
}

TEST(UpsampleConv, DoublesSpatialDims) {
    const D y = upsample_conv2(D::zeros({2, 3, 4, 4}), D::zeros({3, 5, 2, 2}), D::zeros({5}));
    EXPECT_EQ(y.shape(), (Shape{2, 5, 8, 8}));
}

TEST(Concat, StacksChannels) {
    const D a = D::from({1, 1, 1, 2}, {1, 2});
    const D b = D::from({1, 2, 1, 2}, {3, 4, 5, 6});
    const D y = concat_channels(a, b);
    EXPECT_EQ(y.shape(), (Shape{1, 3, 1, 2}));
    EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), (std::vector<double>{1, 2, 3, 4, 5, 6}));
    EXPECT_THROW(concat_channels(a, D::zeros({1, 1, 2, 2})), ShapeError);
}

TEST(BatchNorm, TrainingNormalisesAndUpdatesRunningStats) {
    std::mt19937_64 gen(4);
    D x = random_d(gen, {2, 2, 3, 3}, false);
    for (auto& v : x.data()) v = 3.0 + 2.0 * v;
    auto p = BatchNormParams<double>::make(2);
    const D y = batchnorm(x, p, true);
    for (std::size_t ch = 0; ch < 2; ++ch) {
        double mean = 0, sq = 0, xmean = 0, xsq = 0;
        for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t k = 0; k < 9; ++k) {
                const std::size_t idx = (b * 2 + ch) * 9 + k;
                mean += y.data()[idx] / 18;
                xmean += x.data()[idx] / 18;
            }
        for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t k = 0; k < 9; ++k) {
                const std::size_t idx = (b * 2 + ch) * 9 + k;
                sq += y.data()[idx] * y.data()[idx] / 18;
                xsq += (x.data()[idx] - xmean) * (x.data()[idx] - xmean);
            }
        EXPECT_NEAR(mean, 0.0, 1e-12);
        EXPECT_NEAR(sq, 1.0, 1e-4);
        EXPECT_NEAR(p.running_mean.data()[ch], 0.1 * xmean, 1e-12);
        EXPECT_NEAR(p.running_var.data()[ch], 0.9 + 0.1 * xsq / 17, 1e-12);
    }
}

TEST(BatchNorm, EvalUsesRunningStats) {
    auto p = BatchNormParams<double>::make(1);
    p.running_mean.data()[0] = 1.0;
    p.running_var.data()[0] = 4.0;
    p.gamma.data()[0] = 2.0;
    p.beta.data()[0] = 0.5;
    const D y = batchnorm(D::from({1, 1, 1, 2}, {1.0, 5.0}), p, false);
    EXPECT_NEAR(y.data()[0], 0.5, 1e-12);
    EXPECT_NEAR(y.data()[1], 2.0 * 4.0 / std::sqrt(4.0 + 1e-5) + 0.5, 1e-12);
    EXPECT_EQ(p.running_mean.data()[0], 1.0);
}

TEST(Dropout, EvalIsIdentity) {
    std::mt19937_64 gen(5);
    const D x = random_d(gen, {2, 3, 4, 4}, false);
    const D y = dropout(x, 0.5, false, 7);
    for (std::size_t k = 0; k < x.numel(); ++k) EXPECT_EQ(y.data()[k], x.data()[k]);
}

TEST(Dropout, InvertedScalingAndSeeded) {
    const D x = D::filled({1, 1, 32, 32}, 1.0);
    const D a = dropout(x, 0.25, true, 9);
    const D b = dropout(x, 0.25, true, 9);
    std::size_t kept = 0;
    for (std::size_t k = 0; k < x.numel(); ++k) {
        EXPECT_EQ(a.data()[k], b.data()[k]);
        EXPECT_TRUE(a.data()[k] == 0.0 || std::abs(a.data()[k] - 1.0 / 0.75) < 1e-15);
        kept += a.data()[k] != 0.0;
    }
    EXPECT_NEAR(static_cast<double>(kept) / 1024.0, 0.75, 0.06);
    EXPECT_THROW(dropout(x, 1.0, true, 1), InvalidInput);
}

TEST(Linear, MatchesHandComputation) {
    const D x = D::from({1, 2}, {1.0, 2.0});
    const D w = D::from({2, 2}, {1, 0, 3, -1});
    const D y = linear(x, w, D::from({2}, {0.5, 0.0}));
    EXPECT_EQ(y.data()[0], 1.5);
    EXPECT_EQ(y.data()[1], 1.0);
}

TEST(Backward, SumOfParamsGivesOnes) {
    D a = D::filled({3, 2}, 0.7, true);
    backward(sum(a));
    for (double g : a.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, ZeroTimesXGivesZeroGrad) {
    D x = D::filled({4}, 2.0, true);
    backward(sum(scale(x, 0.0)));
    for (double g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, NonScalarRootRejected) {
    D x = D::filled({4}, 2.0, true);
    EXPECT_THROW(backward(relu(x)), InvalidInput);
}

TEST(Backward, RepeatedCallRejected) {
    D x = D::filled({4}, 2.0, true);
    const D root = sum(x);
    backward(root);
    EXPECT_THROW(backward(root), InvalidInput);
}

TEST(Backward, LeafGradsAccumulate) {
    D x = D::filled({2}, 1.0, true);
    backward(sum(x));
    backward(sum(scale(x, 2.0)));
    for (double g : x.grad()) EXPECT_EQ(g, 3.0);
}

TEST(Backward, SharedSubexpressionCountedOnce) {
    D x = D::from({1}, {3.0}, true);
    const D y = mul(x, x);
    backward(sum(add(y, y)));
    EXPECT_EQ(x.grad()[0], 12.0);
}

TEST(Backward, IsLinearInTheLoss) {
    std::mt19937_64 gen(6);
    D w = random_d(gen, {2, 1, 3, 3});
    const D x = random_d(gen, {1, 1, 5, 5}, false);
    const D r = random_d(gen, {1, 2, 5, 5}, false);
    auto l1 = [&] { return sum(mul(relu(conv2d(x, w, D::zeros({2}), Padding::Same)), r)); };
    auto l2 = [&] { return mean(conv2d(x, w, D::zeros({2}), Padding::Same)); };
    w.zero_grad();
    backward(l1());
    const std::vector<double> g1(w.grad().begin(), w.grad().end());
    w.zero_grad();
    backward(l2());
    const std::vector<double> g2(w.grad().begin(), w.grad().end());
    w.zero_grad();
    backward(add(scale(l1(), 2.5), scale(l2(), -0.5)));
    for (std::size_t k = 0; k < g1.size(); ++k) EXPECT_NEAR(w.grad()[k], 2.5 * g1[k] - 0.5 * g2[k], 1e-9);
}

TEST(Backward, CompositeMatchesFiniteDifferences) {
    // conv -> relu -> pool -> dense, 10 random parameters, h = 1e-3.
    std::mt19937_64 gen(7);
    const D x = random_d(gen, {2, 1, 4, 4}, false);
    std::vector<D> params{random_d(gen, {2, 1, 3, 3}), random_d(gen, {2}), random_d(gen, {3, 8}), random_d(gen, {3})};
    auto build = [&] {
        const D h = maxpool2(relu(conv2d(x, params[0], params[1], Padding::Same)));
        const D out = linear(flatten(h), params[2], params[3]);
        return sum(mul(out, out));
    };
    for (auto& p : params) p.zero_grad();
    backward(build());
    std::uniform_int_distribution<std::size_t> which(0, params.size() - 1);
    for (int k = 0; k < 10; ++k) {
        D& p = params[which(gen)];
        const std::size_t idx = std::uniform_int_distribution<std::size_t>(0, p.numel() - 1)(gen);
        const double saved = p.data()[idx];
        p.data()[idx] = saved + 1e-3;
        const double fp = build().item();
        p.data()[idx] = saved - 1e-3;
        const double fm = build().item();
        p.data()[idx] = saved;
        const double numeric = (fp - fm) / 2e-3;
        EXPECT_NEAR(p.grad()[idx], numeric, 1e-4 * std::max(1.0, std::abs(numeric)));
    }
}

TEST(Adam, ZeroGradsLeaveParamsUnchanged) {
    std::vector<D> params{D::filled({3}, 1.5, true)};
    params[0].zero_grad();
    OptimizerState state;
    for (int i = 0; i < 5; ++i) adam_step(params, state);
    for (double v : params[0].data()) EXPECT_EQ(v, 1.5);
}

TEST(Adam, ConstantGradStepsAtLearningRate) {
    std::vector<D> params{D::filled({1}, 0.0, true)};
    OptimizerState state;
    state.learning_rate = 0.01;
    double prev = 0.0;
    for (int i = 0; i < 200; ++i) {
        params[0].mutable_grad()[0] = -3.0;
        adam_step(params, state);
        const double step = params[0].data()[0] - prev;
        prev = params[0].data()[0];
        EXPECT_NEAR(step, 0.01, 1e-6);
    }
}

TEST(Adam, QuadraticBowl) {
    std::vector<D> params{D::filled({1}, 0.0, true)};
    OptimizerState state;
    state.learning_rate = 0.05;
    for (int i = 0; i < 500; ++i) {
        params[0].zero_grad();
        backward(sum(mul(add(params[0], D::filled({1}, -3.0)), add(params[0], D::filled({1}, -3.0)))));
        adam_step(params, state);
    }
    EXPECT_LT(std::abs(params[0].data()[0] - 3.0), 0.01);
}

TEST(Adam, MissingGradRejected) {
    std::vector<D> params{D::filled({1}, 0.0, true)};
    OptimizerState state;
    EXPECT_THROW(adam_step(params, state), InvalidInput);
}

TEST(Checkpoint, RoundTripIsBitwise) {
    std::mt19937_64 gen(8);
    std::normal_distribution<float> n;
    ParameterSet<float> params;
    std::vector<float> a(24), b(3);
    for (auto& v : a) v = n(gen);
    for (auto& v : b) v = n(gen);
    params.add("conv.weight", F::from({2, 1, 3, 4}, a), true);
    params.add("bn.running_mean", F::from({3}, b), false);
    const auto path = temp_path("round_trip.ckpt");
    save_checkpoint(path, {"model=unet", "depth=2"}, params);
    const Checkpoint ckpt = load_checkpoint(path);
    EXPECT_EQ(ckpt.meta, (std::vector<std::string>{"model=unet", "depth=2"}));

    ParameterSet<float> target;
    target.add("conv.weight", F::zeros({2, 1, 3, 4}), true);
    target.add("bn.running_mean", F::zeros({3}), false);
    restore(ckpt, target);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(target.entries()[0].tensor.data()[i], a[i]);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(target.entries()[1].tensor.data()[i], b[i]);
}

TEST(Checkpoint, MismatchNamesTensor) {
    ParameterSet<float> params;
    params.add("head.weight", F::zeros({2, 4, 1, 1}), true);
    const auto path = temp_path("mismatch.ckpt");
    save_checkpoint(path, {}, params);
    ParameterSet<float> other;
    other.add("head.weight", F::zeros({3, 4, 1, 1}), true);
    try {
        restore(load_checkpoint(path), other);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("head.weight"), std::string::npos);
    }
    ParameterSet<float> missing;
    missing.add("head.bias", F::zeros({2}), true);
    EXPECT_THROW(restore(load_checkpoint(path), missing), ConfigError);
}

TEST(Checkpoint, TruncatedFileIsParseError) {
    ParameterSet<float> params;
    params.add("w", F::filled({16}, 1.0f), true);
    const auto path = temp_path("truncated.ckpt");
    save_checkpoint(path, {}, params);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 5);
    EXPECT_THROW(load_checkpoint(path), ParseError);
}
