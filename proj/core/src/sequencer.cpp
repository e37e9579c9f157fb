#include "dlcz/sequencer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "dlcz/errors.hpp"

namespace dlcz::sequencer {

void TimingConfig::validate(const std::string& path) const {
    const auto require = [&](bool ok, const std::string& field, const std::string& msg) {
        if (!ok) throw ValidationError(path + "." + field, msg);
    };
    require(write_pulse_ns > 0.0, "write_pulse_ns", "must be positive");
    require(write_clean_delay_ns >= 0.0, "write_clean_delay_ns", "must be non-negative");
    require(clean_pulse_ns > 0.0, "clean_pulse_ns", "must be positive");
    require(cycle_period_ns > 0.0, "cycle_period_ns", "must be positive");
    require(cycle_period_ns >= write_pulse_ns + write_clean_delay_ns + clean_pulse_ns,
            "cycle_period_ns", "must cover the write pulse, the delay, and the clean pulse");
    require(max_attempts >= 1, "max_attempts", "must be at least 1");
    require(std::isfinite(cycle_period_ns), "cycle_period_ns", "must be finite");
}

namespace {

class SingleCellTrialSampler final : public TrialSampler {
public:
    SingleCellTrialSampler(const model::CellPhysics& cell, double od, double od_to_eta,
                           double t_store_hint)
        : cell_(cell), od_(od), od_to_eta_(od_to_eta) {
        cell_.validate();
        cache_t_ = t_store_hint;
        cache_retrieval_ = model::retrieval_efficiency(cell_, od_, cache_t_, od_to_eta_);
    }

    void reset() override {
        n_ = 0;
        clicked_ = false;
    }

    bool write_attempt(rng::Stream& stream) override {
        n_ = stream.thermal(cell_.p);
        if (n_ == 0) {
            clicked_ = stream.bernoulli(cell_.dark_s);
        } else {
            const double miss = std::pow(1.0 - cell_.eta_s, static_cast<double>(n_));
            clicked_ = stream.bernoulli(1.0 - (1.0 - cell_.dark_s) * miss);
        }
        return clicked_;
    }

    sampler::TrialOutcome read_stage(double t_store_us, rng::Stream& stream) override {
        if (t_store_us != cache_t_) {
            cache_t_ = t_store_us;
            cache_retrieval_ = model::retrieval_efficiency(cell_, od_, t_store_us, od_to_eta_);
        }
        sampler::TrialOutcome out;
        out.signal_click = clicked_;
        const std::uint64_t m = (n_ == 0) ? 0 : stream.binomial(n_, cache_retrieval_);
        if (m == 0) {
            out.idler_click = stream.bernoulli(cell_.dark_i);
        } else {
            const double miss = std::pow(1.0 - cell_.eta_i, static_cast<double>(m));
            out.idler_click = stream.bernoulli(1.0 - (1.0 - cell_.dark_i) * miss);
        }
        return out;
    }

private:
    model::CellPhysics cell_;
    double od_ = 0.0;
    double od_to_eta_ = 0.0;
    double cache_t_ = 0.0;
    double cache_retrieval_ = 0.0;
    std::uint64_t n_ = 0;
    bool clicked_ = false;
};

class PairTrialSampler final : public TrialSampler {
public:
    PairTrialSampler(const sampler::PairPhysics& pair, const quantum::BasisPair& setting,
                     double t_store_hint)
        : pair_(pair), setting_(setting) {
        pair_.cell_a.validate();
        pair_.cell_b.validate();
        herald_rate_ = sampler::pair_herald_rate(pair_);
        recache(t_store_hint);
    }

    void reset() override { clicked_ = false; }

    bool write_attempt(rng::Stream& stream) override {
        clicked_ = stream.bernoulli(herald_rate_);
        return clicked_;
    }

    sampler::TrialOutcome read_stage(double t_store_us, rng::Stream& stream) override {
        sampler::TrialOutcome out;
        if (!clicked_) return out;
        if (t_store_us != cache_t_) recache(t_store_us);
        const int outcome = sampler::sample_pair_outcome(probs_, stream);
        out.signal_click = true;
        out.pair_basis_outcome = outcome;
        const bool plus = (outcome == 1 || outcome == 3);
        out.idler_click = stream.bernoulli(plus ? click_plus_ : click_minus_);
        return out;
    }

private:
    void recache(double t_store_us) {
        cache_t_ = t_store_us;
        probs_ = sampler::pair_outcome_probabilities(sampler::pair_state(pair_, t_store_us),
                                                     setting_);
        click_plus_ = sampler::pair_idler_click_probability(pair_, t_store_us, 1);
        click_minus_ = sampler::pair_idler_click_probability(pair_, t_store_us, 2);
    }

    sampler::PairPhysics pair_;
    quantum::BasisPair setting_;
    double herald_rate_ = 0.0;
    double cache_t_ = 0.0;
    std::array<double, 4> probs_{};
    double click_plus_ = 0.0;
    double click_minus_ = 0.0;
    bool clicked_ = false;
};

template <class S>
TrialRecord heralded_trial_impl(S& sampler, const TimingConfig& timing, double storage_time_us,
                                std::uint64_t trial_id, rng::Stream& stream) {
    TrialRecord rec;
    rec.trial_id = trial_id;
    rec.storage_time_us = storage_time_us;
    sampler.reset();
    const double cycle_us = timing.cycle_period_us();
    for (std::uint64_t attempt = 1; attempt <= timing.max_attempts; ++attempt) {
        if (sampler.write_attempt(stream)) {
            rec.attempts = attempt;
            rec.heralded = true;
            rec.herald_time_us = static_cast<double>(attempt) * cycle_us;
            rec.outcome = sampler.read_stage(storage_time_us, stream);
            return rec;
        }
    }
    rec.attempts = timing.max_attempts;
    rec.heralded = false;
    return rec;
}

template <class S>
TrialRecord open_trial_impl(S& sampler, const TimingConfig& timing, double storage_time_us,
                            std::uint64_t trial_id, rng::Stream& stream) {
    TrialRecord rec;
    rec.trial_id = trial_id;
    rec.storage_time_us = storage_time_us;
    rec.attempts = 1;
    sampler.reset();
    const bool click = sampler.write_attempt(stream);
    rec.outcome = sampler.read_stage(storage_time_us, stream);
    rec.heralded = click;
    rec.herald_time_us = click ? timing.cycle_period_us() : 0.0;
    return rec;
}

struct Agg {
    std::uint64_t trials = 0;
    std::uint64_t attempts = 0;
    std::uint64_t heralds = 0;
    std::uint64_t c_s = 0;
    std::uint64_t c_i = 0;
    std::uint64_t c_si = 0;
    std::uint64_t coincidences = 0;
    std::vector<std::uint64_t> hist;

    void add(const TrialRecord& rec) {
        ++trials;
        attempts += rec.attempts;
        if (rec.heralded) ++heralds;
        if (rec.outcome) {
            const sampler::TrialOutcome& o = *rec.outcome;
            if (o.signal_click) ++c_s;
            if (o.idler_click) ++c_i;
            if (o.signal_click && o.idler_click) ++c_si;
            const bool plus_port = o.pair_basis_outcome
                                       ? (*o.pair_basis_outcome == 1 || *o.pair_basis_outcome == 2)
                                       : o.signal_click;
            if (plus_port && o.idler_click) ++coincidences;
        }
        const std::size_t k = static_cast<std::size_t>(rec.attempts);
        if (hist.size() <= k) hist.resize(k + 1, 0);
        ++hist[k];
    }

    void merge(const Agg& o) {
        trials += o.trials;
        attempts += o.attempts;
        heralds += o.heralds;
        c_s += o.c_s;
        c_i += o.c_i;
        c_si += o.c_si;
        coincidences += o.coincidences;
        if (hist.size() < o.hist.size()) hist.resize(o.hist.size(), 0);
        for (std::size_t k = 0; k < o.hist.size(); ++k) hist[k] += o.hist[k];
    }

    void store(EntryResult& out) const {
        out.trials = trials;
        out.attempts = attempts;
        out.heralds = heralds;
        out.c_s = c_s;
        out.c_i = c_i;
        out.c_si = c_si;
        out.coincidences = coincidences;
        out.attempts_histogram = hist;
    }
};

struct ChunkOut {
    Agg agg;
    std::vector<TrialRecord> records;
    bool has_records = false;
};

template <class Sim>
ChunkOut simulate_chunk(const Sim& sim, std::uint64_t seed, std::uint64_t ordinal,
                        std::uint64_t begin, std::uint64_t end, bool keep_records) {
    ChunkOut out;
    out.has_records = keep_records;
    if (keep_records) out.records.reserve(static_cast<std::size_t>(end - begin));
    for (std::uint64_t t = begin; t < end; ++t) {
        rng::Stream stream = rng::Stream::from(seed, ordinal, t);
        const TrialRecord rec = sim(t, stream);
        out.agg.add(rec);
        if (keep_records) out.records.push_back(rec);
    }
    return out;
}

struct EntryRunParams {
    std::uint64_t seed = 0;
    std::uint64_t ordinal = 0;
    std::uint64_t budget = 0;
    std::uint64_t herald_quota = 0; // 0: consume the whole budget
    std::uint64_t chunk = 1;
    int jobs = 1;
    RecordSink* sink = nullptr;
    std::size_t entry_index = 0;
};

template <class Sim>
Agg execute_entry(const Sim& sim, const EntryRunParams& P) {
    Agg agg;
    if (P.jobs <= 1) {
        for (std::uint64_t t = 0; t < P.budget; ++t) {
            rng::Stream stream = rng::Stream::from(P.seed, P.ordinal, t);
            const TrialRecord rec = sim(t, stream);
            agg.add(rec);
            if (P.sink) P.sink->record(P.entry_index, rec);
            if (P.herald_quota != 0 && agg.heralds >= P.herald_quota) break;
        }
        return agg;
    }

    const std::uint64_t n_chunks = (P.budget + P.chunk - 1) / P.chunk;
    std::atomic<std::uint64_t> next{0};
    std::atomic<bool> stop{false};
    std::mutex mu;
    std::condition_variable cv_space; // worker waits for assembly to advance
    std::condition_variable cv_ready; // assembler waits for the next chunk
    std::map<std::uint64_t, ChunkOut> ready;
    std::uint64_t consumed = 0;
    const std::uint64_t window = 4ull * static_cast<std::uint64_t>(P.jobs) + 4;
    std::exception_ptr worker_error;

    const auto worker = [&]() {
        try {
            for (;;) {
                const std::uint64_t k = next.fetch_add(1);
                if (k >= n_chunks) return;
                {
                    std::unique_lock<std::mutex> lk(mu);
                    cv_space.wait(lk, [&] { return stop.load() || k < consumed + window; });
                    if (stop.load()) return;
                }
                const std::uint64_t b = k * P.chunk;
                const std::uint64_t e = std::min(P.budget, b + P.chunk);
                ChunkOut out = simulate_chunk(sim, P.seed, P.ordinal, b, e, P.sink != nullptr);
                {
                    std::lock_guard<std::mutex> lk(mu);
                    ready.emplace(k, std::move(out));
                }
                cv_ready.notify_all();
            }
        } catch (...) {
            {
                std::lock_guard<std::mutex> lk(mu);
                if (!worker_error) worker_error = std::current_exception();
            }
            stop.store(true);
            cv_ready.notify_all();
            cv_space.notify_all();
        }
    };

    std::vector<std::thread> pool;
    const std::uint64_t pool_size =
        std::min<std::uint64_t>(static_cast<std::uint64_t>(P.jobs), n_chunks);
    pool.reserve(static_cast<std::size_t>(pool_size));
    for (std::uint64_t j = 0; j < pool_size; ++j) pool.emplace_back(worker);

    for (std::uint64_t k = 0; k < n_chunks; ++k) {
        ChunkOut out;
        {
            std::unique_lock<std::mutex> lk(mu);
            cv_ready.wait(lk, [&] { return worker_error != nullptr || ready.count(k) != 0; });
            if (worker_error) break;
            auto it = ready.find(k);
            out = std::move(it->second);
            ready.erase(it);
            consumed = k + 1;
        }
        cv_space.notify_all();

        const bool cutoff =
            P.herald_quota != 0 && agg.heralds + out.agg.heralds >= P.herald_quota;
        if (!cutoff) {
            agg.merge(out.agg);
            if (P.sink) {
                for (const TrialRecord& r : out.records) P.sink->record(P.entry_index, r);
            }
            continue;
        }

        // The quota trial lies inside this chunk; absorb trial by trial up to
        // and including it, re-simulating when records were not kept. Every
        // trial draws from its own stream, so the replay is exact.
        if (out.has_records) {
            for (const TrialRecord& r : out.records) {
                agg.add(r);
                if (P.sink) P.sink->record(P.entry_index, r);
                if (agg.heralds >= P.herald_quota) break;
            }
        } else {
            const std::uint64_t b = k * P.chunk;
            const std::uint64_t e = std::min(P.budget, b + P.chunk);
            for (std::uint64_t t = b; t < e; ++t) {
                rng::Stream stream = rng::Stream::from(P.seed, P.ordinal, t);
                const TrialRecord rec = sim(t, stream);
                agg.add(rec);
                if (agg.heralds >= P.herald_quota) break;
            }
        }
        break;
    }

    stop.store(true);
    cv_space.notify_all();
    cv_ready.notify_all();
    for (std::thread& th : pool) th.join();
    if (worker_error) std::rethrow_exception(worker_error);
    return agg;
}

template <class S>
struct EntrySim {
    S proto;
    TimingConfig timing;
    double t_store = 0.0;
    bool open = true;

    TrialRecord operator()(std::uint64_t trial_id, rng::Stream& stream) const {
        S s = proto;
        if (open) return open_trial_impl(s, timing, t_store, trial_id, stream);
        return heralded_trial_impl(s, timing, t_store, trial_id, stream);
    }
};

SingleCellTrialSampler build_single_sampler(const PlanEntry& entry, const CampaignContext& ctx) {
    const model::CellIndex cell = entry.cells.at(0);
    if (entry.scanned) {
        const sampler::CrosstalkSetup setup =
            sampler::crosstalk_setup(cell, *entry.scanned, *entry.scan_channel,
                                     ctx.grid.geometry, ctx.grid.at(cell), ctx.grid.profile);
        return SingleCellTrialSampler(setup.effective, setup.od, setup.od_to_eta,
                                      entry.storage_time_us);
    }
    return SingleCellTrialSampler(ctx.grid.at(cell), ctx.grid.od_at(cell),
                                  ctx.grid.profile.od_to_eta, entry.storage_time_us);
}

sampler::PairPhysics build_pair_physics(const PlanEntry& entry, const CampaignContext& ctx) {
    sampler::PairPhysics pair;
    pair.cell_a = ctx.grid.at(entry.cells.at(0));
    pair.cell_b = ctx.grid.at(entry.cells.at(1));
    pair.od_a = ctx.grid.od_at(entry.cells.at(0));
    pair.od_b = ctx.grid.od_at(entry.cells.at(1));
    pair.od_to_eta = ctx.grid.profile.od_to_eta;
    pair.v0 = ctx.pair_v0;
    pair.tau_pair_us = ctx.pair_tau_us;
    pair.phi = ctx.pair_phi;
    return pair;
}

void validate_entry(const PlanEntry& entry, const CampaignContext& ctx,
                    bool check_quota = true) {
    const auto fail = [&](const std::string& msg) {
        throw CampaignError("entry '" + entry.label + "': " + msg);
    };
    if (entry.label.empty()) throw CampaignError("plan entry with empty label");
    if (entry.cells.empty()) fail("no cells given");
    if (entry.cells.size() > 2) fail("at most two cells per entry");
    for (const model::CellIndex& c : entry.cells) {
        if (!ctx.grid.geometry.contains(c))
            fail("cell (" + std::to_string(c.x) + "," + std::to_string(c.y) +
                 ") lies outside the array");
    }
    if (entry.cells.size() == 2) {
        if (!entry.setting) fail("pair entries need a measurement setting");
        if (entry.scanned) fail("pair entries cannot scan a second beam");
        if (entry.cells[0] == entry.cells[1]) fail("pair cells must differ");
    } else if (entry.setting) {
        fail("measurement settings apply to pair entries only");
    }
    if (entry.scanned.has_value() != entry.scan_channel.has_value())
        fail("scanned cell and scan channel must be given together");
    if (entry.scanned && !ctx.grid.geometry.contains(*entry.scanned))
        fail("scanned cell lies outside the array");
    if (!(entry.storage_time_us >= 0.0) || !std::isfinite(entry.storage_time_us))
        fail("storage time must be non-negative and finite");
    if (!check_quota) return;
    if (entry.n_heralds == 0 && entry.n_attempts == 0)
        fail("either a herald quota or an attempt count is required");
    if (entry.mode == TrialMode::heralded && entry.n_heralds == 0)
        fail("heralded entries need a herald quota");
    if (entry.mode == TrialMode::heralded && entry.n_attempts != 0)
        fail("attempt counts apply to open mode only");
}

void run_one_entry(const PlanEntry& entry, const CampaignContext& ctx, std::uint64_t seed,
                   std::size_t index, int jobs, RecordSink* sink, std::uint64_t chunk_override,
                   EntryResult& out) {
    EntryRunParams P;
    P.seed = seed;
    P.ordinal = static_cast<std::uint64_t>(index);
    P.jobs = jobs;
    P.sink = sink;
    P.entry_index = index;

    if (entry.mode == TrialMode::open) {
        if (entry.n_heralds == 0) {
            P.budget = entry.n_attempts;
            P.herald_quota = 0;
        } else {
            P.herald_quota = entry.n_heralds;
            if (entry.n_attempts != 0) {
                P.budget = entry.n_attempts;
            } else {
                const double p_s = analytic_herald_rate(entry, ctx);
                if (!(p_s > 0.0))
                    throw CampaignError("entry '" + entry.label +
                                        "': herald rate is zero, quota unreachable");
                P.budget = static_cast<std::uint64_t>(
                    std::ceil(10.0 * static_cast<double>(entry.n_heralds) / p_s));
            }
        }
        P.chunk = chunk_override != 0 ? chunk_override : (sink ? 8192u : 65536u);
    } else {
        P.herald_quota = entry.n_heralds;
        P.budget = 10 * entry.n_heralds + 100;
        P.chunk = chunk_override != 0 ? chunk_override : 4096u;
    }

    Agg agg;
    if (entry.cells.size() == 2) {
        EntrySim<PairTrialSampler> sim{
            PairTrialSampler(build_pair_physics(entry, ctx), *entry.setting,
                             entry.storage_time_us),
            ctx.timing, entry.storage_time_us, entry.mode == TrialMode::open};
        agg = execute_entry(sim, P);
    } else {
        EntrySim<SingleCellTrialSampler> sim{build_single_sampler(entry, ctx), ctx.timing,
                                             entry.storage_time_us,
                                             entry.mode == TrialMode::open};
        agg = execute_entry(sim, P);
    }

    if (P.herald_quota != 0 && agg.heralds < P.herald_quota)
        throw CampaignError("entry '" + entry.label + "': attempt budget of " +
                            std::to_string(P.budget) + " trials exhausted with only " +
                            std::to_string(agg.heralds) + " of " +
                            std::to_string(P.herald_quota) + " heralds");
    agg.store(out);
}

} // namespace

std::unique_ptr<TrialSampler> make_trial_sampler(const PlanEntry& entry,
                                                 const CampaignContext& ctx) {
    validate_entry(entry, ctx, /*check_quota=*/false);
    if (entry.cells.size() == 2) {
        return std::make_unique<PairTrialSampler>(build_pair_physics(entry, ctx), *entry.setting,
                                                  entry.storage_time_us);
    }
    return std::make_unique<SingleCellTrialSampler>(build_single_sampler(entry, ctx));
}

double analytic_herald_rate(const PlanEntry& entry, const CampaignContext& ctx) {
    validate_entry(entry, ctx, /*check_quota=*/false);
    if (entry.cells.size() == 2)
        return sampler::pair_herald_rate(build_pair_physics(entry, ctx));
    const model::CellIndex cell = entry.cells.at(0);
    if (entry.scanned) {
        const sampler::CrosstalkSetup setup =
            sampler::crosstalk_setup(cell, *entry.scanned, *entry.scan_channel,
                                     ctx.grid.geometry, ctx.grid.at(cell), ctx.grid.profile);
        return sampler::analytic_rates(setup.effective, setup.od, setup.od_to_eta,
                                       entry.storage_time_us)
            .p_s;
    }
    return sampler::analytic_rates(ctx.grid.at(cell), ctx.grid.od_at(cell),
                                   ctx.grid.profile.od_to_eta, entry.storage_time_us)
        .p_s;
}

TrialRecord run_heralded_trial(TrialSampler& sampler, const TimingConfig& timing,
                               double storage_time_us, std::uint64_t trial_id,
                               rng::Stream& stream) {
    timing.validate();
    return heralded_trial_impl(sampler, timing, storage_time_us, trial_id, stream);
}

TrialRecord run_open_trial(TrialSampler& sampler, const TimingConfig& timing,
                           double storage_time_us, std::uint64_t trial_id, rng::Stream& stream) {
    timing.validate();
    return open_trial_impl(sampler, timing, storage_time_us, trial_id, stream);
}

EventLog run_campaign(const std::vector<PlanEntry>& plan, const CampaignContext& ctx,
                      std::uint64_t seed, int jobs, RecordSink* sink, std::uint64_t chunk_size) {
    if (jobs < 1) throw CampaignError("job count must be at least 1");
    ctx.grid.geometry.validate();
    ctx.grid.profile.validate();
    ctx.timing.validate();

    EventLog log;
    log.seed = seed;
    log.config_hash = ctx.config_hash;
    log.entries.resize(plan.size());
    for (std::size_t i = 0; i < plan.size(); ++i) {
        validate_entry(plan[i], ctx);
        log.entries[i].plan = plan[i];
    }
    if (sink) sink->begin(log);
    for (std::size_t i = 0; i < plan.size(); ++i) {
        try {
            run_one_entry(plan[i], ctx, seed, i, jobs, sink, chunk_size, log.entries[i]);
        } catch (const CampaignError&) {
            throw;
        } catch (const Error& err) {
            throw CampaignError("entry '" + plan[i].label + "': " + err.what());
        }
    }
    if (sink) sink->finish(log);
    return log;
}

} // namespace dlcz::sequencer
