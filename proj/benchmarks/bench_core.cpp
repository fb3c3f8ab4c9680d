#include <benchmark/benchmark.h>

#include "segdesic/autodiff.hpp"
#include "segdesic/geodesy.hpp"
#include "segdesic/grid_encoding.hpp"
#include "segdesic/metrics.hpp"
#include "segdesic/model.hpp"
#include "segdesic/rng.hpp"

using namespace segdesic;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

void BM_lcc_inverse(benchmark::State& state) {
    LccParams p = LccParams::epsg2154();
    Rng rng(1);
    double e = rng.uniform(0.0, 1.3e6), n = rng.uniform(6.0e6, 7.2e6);
    for (auto _ : state) {
        Wgs84Coord g = lcc_inverse(p, e, n);
        benchmark::DoNotOptimize(g);
    }
}
BENCHMARK(BM_lcc_inverse);

void BM_encode_pipeline(benchmark::State& state) {
    EncodePipelineConfig cfg;
    Epsg2154Coord raw{512345.0, 6590000.0};
    for (auto _ : state) {
        GridEncoding enc = encode_pipeline(cfg, raw);
        benchmark::DoNotOptimize(enc.values.data());
    }
}
BENCHMARK(BM_encode_pipeline);

void BM_grid_encode(benchmark::State& state) {
    GridConfig cfg;
    for (auto _ : state) {
        GridEncoding enc = grid_encode(cfg, 2.34, 46.7);
        benchmark::DoNotOptimize(enc.values.data());
    }
}
BENCHMARK(BM_grid_encode);

void BM_conv2d_forward(benchmark::State& state) {
    Rng rng(2);
    Variable x(random_tensor({16, 32, 32, 32}, rng), false);
    Variable w(random_tensor({32, 32, 3, 3}, rng), false);
    Variable b(random_tensor({32}, rng), false);
    for (auto _ : state) {
        NoGradGuard guard;
        Variable y = conv2d(x, w, b, 2, 1);
        benchmark::DoNotOptimize(y.value().data());
    }
}
BENCHMARK(BM_conv2d_forward)->Unit(benchmark::kMillisecond);

void BM_conv2d_train_step(benchmark::State& state) {
    Rng rng(3);
    Variable x(random_tensor({4, 16, 16, 16}, rng), false);
    Variable w(random_tensor({16, 16, 3, 3}, rng), true);
    Variable b(random_tensor({16}, rng), true);
    for (auto _ : state) {
        w.zero_grad();
        b.zero_grad();
        Variable loss = sum(conv2d(x, w, b, 1, 1));
        backward(loss);
        benchmark::DoNotOptimize(w.grad().data());
    }
}
BENCHMARK(BM_conv2d_train_step)->Unit(benchmark::kMillisecond);

void BM_model_forward_eval(benchmark::State& state) {
    ModelConfig cfg;
    ParameterStore store = build_model(cfg, 18);
    Rng rng(4);
    Tensor images = random_tensor({4, 3, 64, 64}, rng, 0.0, 1.0);
    for (auto _ : state) {
        NoGradGuard guard;
        EncoderOutput enc = forward_encoder(store, cfg, images, Mode::Eval);
        Variable probs = forward_decoder(store, cfg, enc, Mode::Eval);
        benchmark::DoNotOptimize(probs.value().data());
    }
}
BENCHMARK(BM_model_forward_eval)->Unit(benchmark::kMillisecond);

void BM_confusion_accumulate(benchmark::State& state) {
    Rng rng(5);
    std::vector<std::uint8_t> pred(256 * 256), gt(256 * 256);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        pred[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 5));
        gt[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 5));
    }
    for (auto _ : state) {
        ConfusionMatrix cm(6);
        cm.accumulate(pred, gt);
        benchmark::DoNotOptimize(cm.total());
    }
}
BENCHMARK(BM_confusion_accumulate);

} // namespace

BENCHMARK_MAIN();
