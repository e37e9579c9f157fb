#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "dlcz/errors.hpp"
#include "dlcz/model.hpp"
#include "dlcz/sampler.hpp"
#include "dlcz/sequencer.hpp"

#include "support.hpp"

using namespace dlcz;

namespace {

constexpr double pi = 3.14159265358979323846;

sequencer::CampaignContext test_context(double p = 0.04) {
    model::CellPhysics physics;
    physics.p = p;
    sequencer::CampaignContext ctx;
    ctx.grid = model::uniform_grid(model::ArrayGeometry{}, model::OpticalDepthProfile{},
                                   physics);
    ctx.config_hash = "feedbeeffeedbeef";
    return ctx;
}

sequencer::PlanEntry open_entry(std::uint64_t n_attempts, std::uint64_t n_heralds = 0) {
    sequencer::PlanEntry e;
    e.label = "open";
    e.cells = {{8, 8}};
    e.mode = sequencer::TrialMode::open;
    e.n_attempts = n_attempts;
    e.n_heralds = n_heralds;
    return e;
}

sequencer::PlanEntry pair_entry(std::uint64_t n_heralds) {
    sequencer::PlanEntry e;
    e.label = "pair";
    e.cells = {{8, 8}, {9, 8}};
    e.mode = sequencer::TrialMode::heralded;
    e.n_heralds = n_heralds;
    e.setting = quantum::BasisPair{{pi / 4.0, 0.0}, {pi / 4.0, 0.0}};
    return e;
}

bool same_result(const sequencer::EntryResult& a, const sequencer::EntryResult& b) {
    return a.trials == b.trials && a.attempts == b.attempts && a.heralds == b.heralds &&
           a.c_s == b.c_s && a.c_i == b.c_i && a.c_si == b.c_si &&
           a.coincidences == b.coincidences && a.attempts_histogram == b.attempts_histogram;
}

class CollectingSink final : public sequencer::RecordSink {
public:
    std::vector<std::pair<std::size_t, sequencer::TrialRecord>> records;
    bool begun = false, finished = false;
    void begin(const sequencer::EventLog&) override { begun = true; }
    void record(std::size_t entry, const sequencer::TrialRecord& rec) override {
        records.emplace_back(entry, rec);
    }
    void finish(const sequencer::EventLog&) override { finished = true; }
};

} // namespace

TEST_SUITE_BEGIN("sequencer");

TEST_CASE("timing validation") {
    sequencer::TimingConfig t;
    CHECK_NOTHROW(t.validate());
    CHECK(t.cycle_period_us() == doctest::Approx(1.0));
    t.cycle_period_ns = 500.0; // cannot hold 100 + 500 + 100
    CHECK_THROWS_AS(t.validate(), ValidationError);
    t = {};
    t.max_attempts = 0;
    CHECK_THROWS_AS(t.validate(), ValidationError);
    t = {};
    t.write_pulse_ns = 0.0;
    CHECK_THROWS_AS(t.validate(), ValidationError);
}

TEST_CASE("open trials always run the read stage") {
    const sequencer::CampaignContext ctx = test_context();
    const sequencer::PlanEntry entry = open_entry(1);
    auto sampler = sequencer::make_trial_sampler(entry, ctx);
    for (std::uint64_t t = 0; t < 2000; ++t) {
        rng::Stream stream = rng::Stream::from(7, 0, t);
        const sequencer::TrialRecord rec =
            sequencer::run_open_trial(*sampler, ctx.timing, 0.5, t, stream);
        CHECK(rec.attempts == 1);
        REQUIRE(rec.outcome.has_value());
        CHECK(rec.heralded == rec.outcome->signal_click);
        CHECK(rec.storage_time_us == doctest::Approx(0.5));
        CHECK(rec.trial_id == t);
    }
}

TEST_CASE("open trials replay the one-shot sampler draw for draw") {
    const sequencer::CampaignContext ctx = test_context();
    const sequencer::PlanEntry entry = open_entry(1);
    auto sampler = sequencer::make_trial_sampler(entry, ctx);
    const model::CellPhysics& cell = ctx.grid.at({8, 8});
    const double od = ctx.grid.od_at({8, 8});
    for (std::uint64_t t = 0; t < 5000; ++t) {
        rng::Stream a = rng::Stream::from(8, 1, t);
        rng::Stream b = rng::Stream::from(8, 1, t);
        const sequencer::TrialRecord rec =
            sequencer::run_open_trial(*sampler, ctx.timing, 0.5, t, a);
        const sampler::TrialOutcome direct =
            sampler::sample_single_cell(cell, od, ctx.grid.profile.od_to_eta, 0.5, b);
        REQUIRE(rec.outcome.has_value());
        CHECK(*rec.outcome == direct);
    }
}

TEST_CASE("heralded trials gate the read stage on the herald") {
    sequencer::CampaignContext ctx = test_context(0.004); // p_s around 0.002
    ctx.timing.max_attempts = 200;
    const sequencer::PlanEntry entry = open_entry(0, 1);
    auto sampler = sequencer::make_trial_sampler(entry, ctx);
    int heralded = 0, unheralded = 0;
    for (std::uint64_t t = 0; t < 3000; ++t) {
        rng::Stream stream = rng::Stream::from(9, 2, t);
        const sequencer::TrialRecord rec =
            sequencer::run_heralded_trial(*sampler, ctx.timing, 0.5, t, stream);
        if (rec.heralded) {
            ++heralded;
            REQUIRE(rec.outcome.has_value());
            CHECK(rec.outcome->signal_click);
            CHECK(rec.attempts >= 1);
            CHECK(rec.attempts <= 200);
            CHECK(rec.herald_time_us ==
                  doctest::Approx(double(rec.attempts) * ctx.timing.cycle_period_us()));
        } else {
            ++unheralded;
            CHECK_FALSE(rec.outcome.has_value());
            CHECK(rec.attempts == 200);
            CHECK(rec.herald_time_us == doctest::Approx(0.0));
        }
    }
    // with p_s ~ 0.0021 and 200 attempts both branches occur
    CHECK(heralded > 0);
    CHECK(unheralded > 0);
}

TEST_CASE("pair heralded trials replay the direct pair sampler on first-attempt heralds") {
    sequencer::CampaignContext ctx = test_context(0.3);
    ctx.pair_v0 = 0.9;
    const sequencer::PlanEntry entry = pair_entry(1);
    auto sampler = sequencer::make_trial_sampler(entry, ctx);

    sampler::PairPhysics pair;
    pair.cell_a = ctx.grid.at({8, 8});
    pair.cell_b = ctx.grid.at({9, 8});
    pair.od_a = ctx.grid.od_at({8, 8});
    pair.od_b = ctx.grid.od_at({9, 8});
    pair.od_to_eta = ctx.grid.profile.od_to_eta;
    pair.v0 = ctx.pair_v0;
    pair.tau_pair_us = ctx.pair_tau_us;
    pair.phi = ctx.pair_phi;

    int matched = 0;
    for (std::uint64_t t = 0; t < 3000; ++t) {
        rng::Stream a = rng::Stream::from(10, 3, t);
        rng::Stream b = rng::Stream::from(10, 3, t);
        const sequencer::TrialRecord rec =
            sequencer::run_heralded_trial(*sampler, ctx.timing, 0.5, t, a);
        const sampler::TrialOutcome direct =
            sampler::sample_pair_trial(pair, *entry.setting, 0.5, b);
        if (rec.heralded && rec.attempts == 1) {
            REQUIRE(rec.outcome.has_value());
            CHECK(*rec.outcome == direct);
            ++matched;
        }
    }
    CHECK(matched > 100);
}

TEST_CASE("campaign aggregates are internally consistent") {
    const sequencer::CampaignContext ctx = test_context();
    const sequencer::EventLog log =
        sequencer::run_campaign({open_entry(5000)}, ctx, 42);
    REQUIRE(log.entries.size() == 1);
    const sequencer::EntryResult& r = log.entries[0];
    CHECK(r.trials == 5000);
    CHECK(r.attempts == 5000); // open mode: one attempt per trial
    CHECK(r.heralds == r.c_s);
    CHECK(r.c_si <= r.c_s);
    CHECK(r.c_si <= r.c_i);
    CHECK(r.coincidences == r.c_si); // single-cell entries
    std::uint64_t hist_total = 0, hist_attempts = 0;
    for (std::size_t k = 0; k < r.attempts_histogram.size(); ++k) {
        hist_total += r.attempts_histogram[k];
        hist_attempts += k * r.attempts_histogram[k];
    }
    CHECK(hist_total == r.trials);
    CHECK(hist_attempts == r.attempts);
    CHECK(log.seed == 42);
    CHECK(log.config_hash == "feedbeeffeedbeef");
    CHECK(log.convention == std::string(sequencer::storage_time_convention));
}

TEST_CASE("herald quotas stop at exactly the requested count") {
    const sequencer::CampaignContext ctx = test_context();
    SUBCASE("open mode") {
        const sequencer::EventLog log =
            sequencer::run_campaign({open_entry(0, 300)}, ctx, 43);
        CHECK(log.entries[0].heralds == 300);
        CHECK(log.entries[0].trials >= 300);
    }
    SUBCASE("heralded mode") {
        sequencer::PlanEntry e = pair_entry(250);
        const sequencer::EventLog log = sequencer::run_campaign({e}, ctx, 44);
        CHECK(log.entries[0].heralds == 250);
        CHECK(log.entries[0].trials == 250); // every trial heralds eventually
        CHECK(log.entries[0].attempts >= 250);
    }
}

TEST_CASE("results are identical for any job count and chunk size") {
    const sequencer::CampaignContext ctx = test_context();
    std::vector<sequencer::PlanEntry> plan = {open_entry(4000), open_entry(0, 120),
                                              pair_entry(150)};
    plan[0].label = "a";
    plan[1].label = "b";
    plan[2].label = "c";

    const sequencer::EventLog base = sequencer::run_campaign(plan, ctx, 45, 1);
    const sequencer::EventLog par4 = sequencer::run_campaign(plan, ctx, 45, 4);
    const sequencer::EventLog odd = sequencer::run_campaign(plan, ctx, 45, 3, nullptr, 7);
    REQUIRE(base.entries.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(same_result(base.entries[i], par4.entries[i]));
        CHECK(same_result(base.entries[i], odd.entries[i]));
    }

    CollectingSink sink_seq, sink_par;
    sequencer::run_campaign(plan, ctx, 45, 1, &sink_seq);
    sequencer::run_campaign(plan, ctx, 45, 4, &sink_par, 13);
    CHECK(sink_seq.begun);
    CHECK(sink_seq.finished);
    REQUIRE(sink_seq.records.size() == sink_par.records.size());
    for (std::size_t i = 0; i < sink_seq.records.size(); ++i) {
        CHECK(sink_seq.records[i].first == sink_par.records[i].first);
        const sequencer::TrialRecord& a = sink_seq.records[i].second;
        const sequencer::TrialRecord& b = sink_par.records[i].second;
        CHECK(a.trial_id == b.trial_id);
        CHECK(a.attempts == b.attempts);
        CHECK(a.heralded == b.heralded);
        CHECK(a.outcome == b.outcome);
    }
    // records arrive in trial order within each entry
    std::uint64_t prev_trial = 0;
    std::size_t prev_entry = 0;
    for (const auto& [entry, rec] : sink_seq.records) {
        if (entry != prev_entry) {
            prev_entry = entry;
            prev_trial = 0;
        }
        CHECK(rec.trial_id >= prev_trial);
        prev_trial = rec.trial_id;
    }
}

TEST_CASE("a drained attempt budget raises a campaign error") {
    sequencer::CampaignContext ctx = test_context(0.0);
    // dark counts are the only herald source; make them vanish as well
    for (auto& cell : ctx.grid.cells) cell.dark_s = 0.0;
    ctx.timing.max_attempts = 50;
    sequencer::PlanEntry e = open_entry(0, 100);
    e.mode = sequencer::TrialMode::heralded;
    CHECK_THROWS_AS(sequencer::run_campaign({e}, ctx, 46), CampaignError);
}

TEST_CASE("plan validation rejects malformed entries") {
    const sequencer::CampaignContext ctx = test_context();

    sequencer::PlanEntry no_label = open_entry(100);
    no_label.label.clear();
    CHECK_THROWS_AS(sequencer::run_campaign({no_label}, ctx, 1), CampaignError);

    sequencer::PlanEntry outside = open_entry(100);
    outside.cells = {{0, 9}};
    CHECK_THROWS_AS(sequencer::run_campaign({outside}, ctx, 1), CampaignError);

    sequencer::PlanEntry pair_no_setting = pair_entry(10);
    pair_no_setting.setting.reset();
    CHECK_THROWS_AS(sequencer::run_campaign({pair_no_setting}, ctx, 1), CampaignError);

    sequencer::PlanEntry single_with_setting = open_entry(100);
    single_with_setting.setting = quantum::BasisPair{};
    CHECK_THROWS_AS(sequencer::run_campaign({single_with_setting}, ctx, 1), CampaignError);

    sequencer::PlanEntry same_cells = pair_entry(10);
    same_cells.cells = {{8, 8}, {8, 8}};
    CHECK_THROWS_AS(sequencer::run_campaign({same_cells}, ctx, 1), CampaignError);

    sequencer::PlanEntry scan_no_channel = open_entry(100);
    scan_no_channel.scanned = model::CellIndex{9, 8};
    CHECK_THROWS_AS(sequencer::run_campaign({scan_no_channel}, ctx, 1), CampaignError);

    sequencer::PlanEntry no_quota = open_entry(0, 0);
    CHECK_THROWS_AS(sequencer::run_campaign({no_quota}, ctx, 1), CampaignError);

    sequencer::PlanEntry heralded_attempts = open_entry(500, 0);
    heralded_attempts.mode = sequencer::TrialMode::heralded;
    heralded_attempts.cells = {{8, 8}};
    CHECK_THROWS_AS(sequencer::run_campaign({heralded_attempts}, ctx, 1), CampaignError);

    CHECK_THROWS_AS(sequencer::run_campaign({open_entry(100)}, ctx, 1, 0), CampaignError);

    sequencer::PlanEntry negative_storage = open_entry(100);
    negative_storage.storage_time_us = -1.0;
    CHECK_THROWS_AS(sequencer::run_campaign({negative_storage}, ctx, 1), CampaignError);
}

TEST_CASE("analytic herald rate matches the closed form per entry kind") {
    const sequencer::CampaignContext ctx = test_context();
    const model::CellPhysics& cell = ctx.grid.at({8, 8});

    const double single = sequencer::analytic_herald_rate(open_entry(100), ctx);
    const support::ClosedRates closed =
        support::closed_rates(cell.p, cell.eta_s, 0.0, cell.dark_s, cell.dark_i);
    CHECK(single == doctest::Approx(closed.p_s).epsilon(1e-10));

    sampler::PairPhysics pair;
    pair.cell_a = ctx.grid.at({8, 8});
    pair.cell_b = ctx.grid.at({9, 8});
    pair.od_a = ctx.grid.od_at({8, 8});
    pair.od_b = ctx.grid.od_at({9, 8});
    pair.od_to_eta = ctx.grid.profile.od_to_eta;
    CHECK(sequencer::analytic_herald_rate(pair_entry(10), ctx) ==
          doctest::Approx(sampler::pair_herald_rate(pair)).epsilon(1e-12));

    sequencer::PlanEntry scan = open_entry(100);
    scan.scanned = model::CellIndex{9, 8};
    scan.scan_channel = sampler::ScanChannel::write;
    const sampler::CrosstalkSetup setup =
        sampler::crosstalk_setup({8, 8}, {9, 8}, sampler::ScanChannel::write, ctx.grid.geometry,
                                 cell, ctx.grid.profile);
    const sampler::RateSet eff =
        sampler::analytic_rates(setup.effective, setup.od, setup.od_to_eta, 0.0);
    CHECK(sequencer::analytic_herald_rate(scan, ctx) == doctest::Approx(eff.p_s).epsilon(1e-12));
}

TEST_CASE("empirical heralding matches the analytic rate") {
    const sequencer::CampaignContext ctx = test_context();
    const sequencer::EventLog log = sequencer::run_campaign({open_entry(200000)}, ctx, 47, 2);
    const double p_s = sequencer::analytic_herald_rate(open_entry(1), ctx);
    const double observed = double(log.entries[0].heralds) / double(log.entries[0].trials);
    CHECK(std::fabs(observed - p_s) < 4.0 * std::sqrt(p_s * (1.0 - p_s) / 200000.0));
}

TEST_SUITE_END();
