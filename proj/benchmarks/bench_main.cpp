#include <benchmark/benchmark.h>

#include <random>

#include "fedchan/fed.hpp"
#include "fedchan/gan.hpp"
#include "fedchan/metrics.hpp"
#include "fedchan/path_data.hpp"
#include "fedchan/synth.hpp"
#include "fedchan/vae.hpp"

using namespace fedchan;

namespace {

const gen::PathDataset& desk_batch() {
    static const gen::PathDataset batch = [] {
        const auto ds = synth::generate_city(synth::default_profiles()[0], 1000);
        const auto records = synth::with_paths(ds.records);
        const auto scaler = synth::FeatureScaler::fit(records);
        return gen::make_path_dataset(std::span(records).first(100), scaler);
    }();
    return batch;
}

void BM_GenerateCity(benchmark::State& state) {
    const auto profile = synth::default_profiles()[1];
    for (auto _ : state) benchmark::DoNotOptimize(synth::generate_city(profile, static_cast<std::size_t>(state.range(0))));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateCity)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_VaeLossAndGradient(benchmark::State& state) {
    const auto p = vae::init_vae(vae::VaeArch{}, 1);
    Rng rng(2);
    const auto noise = gen::standard_normal(20, 100, rng);
    for (auto _ : state) {
        vae::VaeGradients g;
        benchmark::DoNotOptimize(vae::vae_loss(p, desk_batch(), noise, &g));
    }
}
BENCHMARK(BM_VaeLossAndGradient)->Unit(benchmark::kMillisecond);

void BM_GanGeneratorStep(benchmark::State& state) {
    const gan::GanArch arch;
    const auto p = gan::init_gan(arch, 3);
    Rng rng(4);
    const auto noise = gan::draw_noise(arch, 100, rng);
    for (auto _ : state) {
        nn::ModelWeights g;
        benchmark::DoNotOptimize(gan::generator_loss(p, desk_batch().conditions, noise, &g));
    }
}
BENCHMARK(BM_GanGeneratorStep)->Unit(benchmark::kMillisecond);

void BM_GanDiscriminatorStep(benchmark::State& state) {
    const gan::GanArch arch;
    const auto p = gan::init_gan(arch, 5);
    Rng rng(6);
    const auto noise = gan::draw_noise(arch, 100, rng);
    for (auto _ : state) {
        nn::ModelWeights g;
        benchmark::DoNotOptimize(gan::discriminator_loss(p, desk_batch(), noise, &g));
    }
}
BENCHMARK(BM_GanDiscriminatorStep)->Unit(benchmark::kMillisecond);

void BM_AggregateGenerator(benchmark::State& state) {
    const auto clients = static_cast<std::size_t>(state.range(0));
    std::vector<std::vector<nn::Network>> updates;
    std::vector<std::uint64_t> counts;
    for (std::size_t k = 0; k < clients; ++k) {
        updates.push_back({gan::init_gan(gan::GanArch{}, 10 + k).generator});
        counts.push_back(1000 + 37 * k);
    }
    for (auto _ : state) benchmark::DoNotOptimize(fed::aggregate_networks(updates, counts));
}
BENCHMARK(BM_AggregateGenerator)->Arg(3)->Arg(10)->Unit(benchmark::kMillisecond);

std::vector<double> normal_sample(std::size_t n, double mean, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(mean, 10.0);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

void BM_Wasserstein1(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = normal_sample(n, 100.0, 1), b = normal_sample(n, 105.0, 2);
    for (auto _ : state) benchmark::DoNotOptimize(metrics::wasserstein1(a, b));
}
BENCHMARK(BM_Wasserstein1)->Arg(5000)->Arg(50000);

void BM_KlHistogram(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = normal_sample(n, 100.0, 3), b = normal_sample(n, 105.0, 4);
    for (auto _ : state) benchmark::DoNotOptimize(metrics::kl_divergence_hist(a, b));
}
BENCHMARK(BM_KlHistogram)->Arg(5000)->Arg(50000);

}  // namespace

BENCHMARK_MAIN();
