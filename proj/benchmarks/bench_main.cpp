#include <benchmark/benchmark.h>

#include <cstdint>

#include "dlcz/model.hpp"
#include "dlcz/random.hpp"
#include "dlcz/sampler.hpp"
#include "dlcz/sequencer.hpp"
#include "dlcz/tomography.hpp"

namespace {

dlcz::sequencer::CampaignContext make_context() {
    dlcz::sequencer::CampaignContext ctx;
    ctx.grid = dlcz::model::uniform_grid(dlcz::model::ArrayGeometry{},
                                         dlcz::model::OpticalDepthProfile{},
                                         dlcz::model::CellPhysics{});
    ctx.config_hash = "bench";
    return ctx;
}

void BM_open_trial(benchmark::State& state) {
    const dlcz::sequencer::CampaignContext ctx = make_context();
    dlcz::sequencer::PlanEntry entry;
    entry.label = "bench";
    entry.cells = {{8, 8}};
    entry.mode = dlcz::sequencer::TrialMode::open;
    entry.n_attempts = 1;
    auto sampler = dlcz::sequencer::make_trial_sampler(entry, ctx);
    std::uint64_t trial = 0;
    for (auto _ : state) {
        dlcz::rng::Stream stream = dlcz::rng::Stream::from(42, 0, trial++);
        benchmark::DoNotOptimize(
            dlcz::sequencer::run_open_trial(*sampler, ctx.timing, entry.storage_time_us,
                                            trial, stream));
    }
}
BENCHMARK(BM_open_trial);

void BM_heralded_trial(benchmark::State& state) {
    const dlcz::sequencer::CampaignContext ctx = make_context();
    dlcz::sequencer::PlanEntry entry;
    entry.label = "bench";
    entry.cells = {{8, 8}};
    entry.mode = dlcz::sequencer::TrialMode::heralded;
    entry.n_heralds = 1;
    auto sampler = dlcz::sequencer::make_trial_sampler(entry, ctx);
    std::uint64_t trial = 0;
    for (auto _ : state) {
        dlcz::rng::Stream stream = dlcz::rng::Stream::from(42, 1, trial++);
        benchmark::DoNotOptimize(
            dlcz::sequencer::run_heralded_trial(*sampler, ctx.timing, entry.storage_time_us,
                                                trial, stream));
    }
}
BENCHMARK(BM_heralded_trial);

void BM_pair_trial(benchmark::State& state) {
    const dlcz::sequencer::CampaignContext ctx = make_context();
    dlcz::sequencer::PlanEntry entry;
    entry.label = "bench";
    entry.cells = {{8, 8}, {9, 8}};
    entry.mode = dlcz::sequencer::TrialMode::heralded;
    entry.n_heralds = 1;
    entry.setting = dlcz::quantum::BasisPair{{0.0, 0.0}, {0.0, 0.0}};
    auto sampler = dlcz::sequencer::make_trial_sampler(entry, ctx);
    std::uint64_t trial = 0;
    for (auto _ : state) {
        dlcz::rng::Stream stream = dlcz::rng::Stream::from(42, 2, trial++);
        benchmark::DoNotOptimize(
            dlcz::sequencer::run_heralded_trial(*sampler, ctx.timing, entry.storage_time_us,
                                                trial, stream));
    }
}
BENCHMARK(BM_pair_trial);

void BM_analytic_rates(benchmark::State& state) {
    const dlcz::model::CellPhysics cell{};
    for (auto _ : state) {
        benchmark::DoNotOptimize(dlcz::sampler::analytic_rates(cell, 6.0, 2.0, 0.5));
    }
}
BENCHMARK(BM_analytic_rates);

void BM_mle_reconstruct(benchmark::State& state) {
    const dlcz::quantum::DensityMatrix rho = dlcz::quantum::werner(0.9, 0.0);
    const std::array<dlcz::quantum::BasisPair, 16> bases = dlcz::tomography::canonical_bases();
    dlcz::tomography::CountsTable counts;
    for (std::size_t k = 0; k < 16; ++k)
        counts.n[k] = 10000.0 * dlcz::quantum::born_probability(rho, bases[k].signal,
                                                                bases[k].idler);
    for (auto _ : state) {
        benchmark::DoNotOptimize(dlcz::tomography::mle_reconstruct(counts));
    }
}
BENCHMARK(BM_mle_reconstruct);

} // namespace

BENCHMARK_MAIN();
