#include <benchmark/benchmark.h>

#include "sca/dsp.hpp"
#include "sca/power.hpp"
#include "sca/synth.hpp"
#include "sca/zoo.hpp"

namespace {

const sca::arch::ArchitectureSpec& alexnet() {
    static const auto spec = sca::zoo::build("Alexnet", "4096*4096*1000");
    return spec;
}

const sca::arch::ArchitectureSpec& resnet101() {
    static const auto spec = sca::zoo::build("Resnet101", "1000,(3,4,23,3)");
    return spec;
}

void bm_op_counts_alexnet(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(sca::arch::arch_op_counts(alexnet()));
}
BENCHMARK(bm_op_counts_alexnet);

void bm_op_counts_resnet101(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(sca::arch::arch_op_counts(resnet101()));
}
BENCHMARK(bm_op_counts_resnet101);

void bm_arch_energy(benchmark::State& state) {
    sca::power::DevicePowerProfile profile;
    sca::power::SparsityConfig sparsity{0.8, 0.8};
    for (auto _ : state)
        benchmark::DoNotOptimize(sca::power::arch_energy(resnet101(), profile, sparsity));
}
BENCHMARK(bm_arch_energy);

void bm_synthesize_epoch(benchmark::State& state) {
    sca::power::DevicePowerProfile profile;
    sca::synth::NoiseModel noise{0.01, 0.0, 42};
    for (auto _ : state) {
        auto trace = sca::synth::synthesize_epoch(alexnet(), profile, {}, noise, {});
        benchmark::DoNotOptimize(trace.current.data());
    }
}
BENCHMARK(bm_synthesize_epoch)->Unit(benchmark::kMillisecond);

void bm_featurize_epoch(benchmark::State& state) {
    sca::power::DevicePowerProfile profile;
    auto trace = sca::synth::synthesize_epoch(alexnet(), profile, {},
                                              sca::synth::NoiseModel{0.01, 0.0, 42},
                                              {});
    for (auto _ : state) {
        auto series = sca::dsp::compute_power(trace);
        auto peaks = sca::dsp::detect_peaks(series);
        auto windows = sca::dsp::group_windows(series, peaks, 5);
        for (const auto& window : windows)
            benchmark::DoNotOptimize(sca::dsp::extract_features(window));
    }
}
BENCHMARK(bm_featurize_epoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
