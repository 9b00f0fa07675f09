#include <benchmark/benchmark.h>

#include "ambiroom/model.hpp"
#include "ambiroom/rng.hpp"
#include "ambiroom/sscv.hpp"

using namespace ambiroom;

namespace {

FoaSignal random_signal(std::size_t n, std::uint64_t seed) {
    FoaSignal x;
    StreamRng rng(seed);
    for (auto& ch : x.ch) {
        ch.resize(n);
        for (auto& v : ch) v = 0.1 * rng.normal();
    }
    return x;
}

void SscvExtraction(benchmark::State& state) {
    const FoaSignal x = random_signal(64000, 3);
    const FeatureConfig cfg;
    const MelFilterbank fb = cfg.mel();
    const FrameSpec spec = cfg.frame_spec();
    const SmoothingParams p = SmoothingParams::constant(0.5, cfg.mel_bands);
    for (auto _ : state) {
        SscvSeries s = sscv_pipeline(x, spec, fb, p);
        benchmark::DoNotOptimize(s.v.data());
    }
}

void ModelForwardEval(benchmark::State& state) {
    ModelConfig cfg;  // default 82 x 52 x 16, widths 32/64/128/256
    FoaConv3dNet<float> net(cfg, 4);
    StreamRng rng(5);
    std::vector<float> covvec(static_cast<std::size_t>(cfg.frames) * cfg.bands * cfg.depth);
    for (std::size_t i = 0; i < covvec.size(); ++i) {
        covvec[i] = static_cast<float>(i % 16 == 0 ? rng.uniform(0.5, 2.0)
                                                   : rng.uniform(-0.5, 0.5));
    }
    for (auto _ : state) {
        auto out = net.predict_one(covvec);
        benchmark::DoNotOptimize(out.data());
    }
}

void TrainStep(benchmark::State& state) {
    ModelConfig cfg;
    FoaConv3dNet<float> net(cfg, 6);
    auto params = net.parameters();
    StreamRng rng(7);
    std::vector<float> covvec(static_cast<std::size_t>(cfg.frames) * cfg.bands * cfg.depth);
    for (std::size_t i = 0; i < covvec.size(); ++i) {
        covvec[i] = static_cast<float>(i % 16 == 0 ? rng.uniform(0.5, 2.0)
                                                   : rng.uniform(-0.5, 0.5));
    }
    const std::vector<float> target(10, 0.1f);
    std::uint64_t step = 0;
    for (auto _ : state) {
        for (auto* p : params) p->tensor.zero_grad();
        auto x = engine::Tensor<float>::leaf({cfg.frames, cfg.bands, cfg.depth},
                                             std::vector<float>(covvec), false);
        auto loss = engine::mse_loss(net.forward(x, true, ++step), target);
        loss.backward();
        engine::adam_step(std::span<engine::Parameter<float>* const>(params.data(), params.size()),
                          5e-4);
        benchmark::DoNotOptimize(loss.values().data());
    }
}

}  // namespace

BENCHMARK(SscvExtraction)->Unit(benchmark::kMillisecond);
BENCHMARK(ModelForwardEval)->Unit(benchmark::kMillisecond);
BENCHMARK(TrainStep)->Unit(benchmark::kMillisecond);
