#include <benchmark/benchmark.h>

#include <vector>

#include "fcce/fcm.hpp"
#include "fcce/loss.hpp"
#include "fcce/models.hpp"
#include "fcce/ops.hpp"
#include "fcce/random.hpp"

using namespace fcce;

namespace {

nn::Tensor<float> random_tensor(nn::Shape shape, std::uint64_t seed, bool grad = false) {
    auto t = nn::Tensor<float>::zeros(std::move(shape), grad);
    Rng rng(seed);
    for (auto& x : t.data()) x = static_cast<float>(rng.normal());
    return t;
}

void BM_Conv2dSame(benchmark::State& state) {
    const auto ch = static_cast<std::size_t>(state.range(0));
    const auto x = random_tensor({4, ch, 32, 32}, 1);
    const auto w = random_tensor({ch, ch, 3, 3}, 2);
    const auto b = random_tensor({ch}, 3);
    for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d(x, w, b, nn::Padding::Same));
    state.SetItemsProcessed(state.iterations() * 4 * 32 * 32 * ch * ch * 9);
}
BENCHMARK(BM_Conv2dSame)->Arg(8)->Arg(16)->Arg(32);

void BM_FcmRun(benchmark::State& state) {
    std::vector<double> px(static_cast<std::size_t>(state.range(0)));
    Rng rng(4);
    for (auto& p : px) p = rng.uniform();
    fcm::FcmConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(fcm::run(px, cfg));
}
BENCHMARK(BM_FcmRun)->Arg(1024)->Arg(4096);

void BM_FcceLoss(benchmark::State& state) {
    const std::size_t c = 4, n = 32 * 32;
    ClassMatrix y(c, n), p(c, n, 1.0 / c);
    for (std::size_t k = 0; k < n; ++k) y(k % c, k) = 1.0;
    loss::LossConfig cfg;
    cfg.kind = loss::LossKind::Fcce;
    cfg.membership_source = loss::MembershipSource::Prediction;
    for (auto _ : state) {
        benchmark::DoNotOptimize(loss::fcce(y, p, nullptr, cfg));
        benchmark::DoNotOptimize(loss::fcce_grad_logits(y, p, nullptr, cfg));
    }
}
BENCHMARK(BM_FcceLoss);

// Forward and backward through a depth-3 U-Net on a batch of four 32x32 images.
void BM_UNetStep(benchmark::State& state) {
    models::UNetSpec spec;
    spec.depth = 3;
    spec.base_channels = 8;
    models::UNet model(spec, 5);
    const auto batch = random_tensor({4, 1, 32, 32}, 6);
    for (auto _ : state) {
        const auto heads = model.forward(batch, models::Mode::Train);
        model.params().zero_grad();
        nn::backward(nn::mean(heads.front()));
    }
}
BENCHMARK(BM_UNetStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
