#include "dlcz/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dlcz/analysis.hpp"
#include "dlcz/calibration.hpp"
#include "dlcz/errors.hpp"
#include "dlcz/event_log.hpp"
#include "dlcz/tomography.hpp"

namespace dlcz::commands {

namespace {

constexpr double pi = 3.14159265358979323846;

std::ostream& out_of(const RunOptions& opts) { return opts.out ? *opts.out : std::cout; }
std::ostream& err_of(const RunOptions& opts) { return opts.err ? *opts.err : std::cerr; }

std::string g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

// Shortest decimal form that parses back to the same double, so headers stay
// both human-readable and exact.
std::string g17(double v) {
    char buf[40];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

std::string cell_str(model::CellIndex c) {
    return std::to_string(c.x) + "," + std::to_string(c.y);
}

std::string out_path(const config::ExperimentConfig& cfg, const RunOptions& opts,
                     const std::string& filename) {
    const std::string dir = opts.out_dir ? *opts.out_dir : cfg.out_dir;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    return (std::filesystem::path(dir) / filename).string();
}

std::ofstream open_table(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    return f;
}

void close_table(std::ofstream& f, const std::string& path) {
    f.flush();
    if (!f) throw IoError("failed writing '" + path + "'");
}

void write_header(std::ofstream& f, const char* tool, const config::ExperimentConfig& cfg) {
    f << "# tool " << tool << "\n";
    f << "# format 1\n";
    f << "# seed " << cfg.seed << "\n";
    f << "# config " << cfg.hash << "\n";
    f << "# convention " << sequencer::storage_time_convention << "\n";
}

struct GridSetup {
    model::PhysicsGrid grid;
    std::optional<calibration::CalibrationResult> cal;
};

GridSetup make_grid(const config::ExperimentConfig& cfg) {
    if (cfg.calibration) {
        calibration::CalibrationResult cal =
            calibration::calibrate_grid(cfg.geometry, cfg.od_profile, cfg.physics,
                                        *cfg.calibration);
        model::PhysicsGrid grid = cal.grid;
        return {std::move(grid), std::move(cal)};
    }
    return {model::uniform_grid(cfg.geometry, cfg.od_profile, cfg.physics), std::nullopt};
}

sequencer::CampaignContext make_context(const config::ExperimentConfig& cfg,
                                        const model::PhysicsGrid& grid) {
    sequencer::CampaignContext ctx;
    ctx.grid = grid;
    ctx.timing = cfg.timing;
    ctx.config_hash = cfg.hash;
    return ctx;
}

sampler::PairPhysics build_pair_physics(const model::PhysicsGrid& grid, model::CellIndex a,
                                        model::CellIndex b, double v0, double tau_pair_us,
                                        double phi) {
    sampler::PairPhysics pair;
    pair.cell_a = grid.at(a);
    pair.cell_b = grid.at(b);
    pair.od_a = grid.od_at(a);
    pair.od_b = grid.od_at(b);
    pair.od_to_eta = grid.profile.od_to_eta;
    pair.v0 = v0;
    pair.tau_pair_us = tau_pair_us;
    pair.phi = phi;
    return pair;
}

double resolve_v0(const config::EntangleSection& sec, const model::PhysicsGrid& grid,
                  double phi) {
    if (sec.v0) return *sec.v0;
    const sampler::PairPhysics pair = build_pair_physics(grid, sec.pairs[0][0], sec.pairs[0][1],
                                                         1.0, sec.tau_pair_us, phi);
    return calibration::calibrate_pair_visibility(pair, sec.target_fidelity,
                                                  sec.storage_time_us);
}

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t salt) {
    return seed ^ (0x9E3779B97F4A7C15ull * (salt + 1));
}

void print_plan(const std::vector<sequencer::PlanEntry>& plan,
                const sequencer::CampaignContext& ctx, std::ostream& out) {
    out << "plan: " << plan.size() << " entries\n";
    double total = 0.0;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const sequencer::PlanEntry& e = plan[i];
        const double p_s = sequencer::analytic_herald_rate(e, ctx);
        double expected_attempts;
        if (e.mode == sequencer::TrialMode::open && e.n_heralds == 0) {
            expected_attempts = static_cast<double>(e.n_attempts);
        } else {
            expected_attempts =
                p_s > 0.0 ? static_cast<double>(e.n_heralds) / p_s
                          : std::numeric_limits<double>::infinity();
        }
        total += expected_attempts;
        out << "  [" << i << "] " << e.label
            << " mode=" << (e.mode == sequencer::TrialMode::open ? "open" : "heralded");
        if (e.n_heralds != 0) out << " n_heralds=" << e.n_heralds;
        if (e.n_attempts != 0) out << " n_attempts=" << e.n_attempts;
        out << " storage_us=" << g9(e.storage_time_us) << " herald_rate=" << g9(p_s)
            << " expected_attempts=" << g9(expected_attempts) << "\n";
    }
    out << "expected attempts in total: " << g9(total) << "\n";
}

// The ramp deliberately avoids '#' so no art row can collide with the
// comment prefix used by every table this tool writes.
const char* shade_for(double frac) {
    static const char* shades[] = {" ", ".", ":", "-", "=", "+", "*", "x", "%", "@"};
    const int idx =
        std::clamp(static_cast<int>(std::floor(frac * 10.0)), 0, 9);
    return shades[idx];
}

} // namespace

CommandResult cmd_correlation_map(const config::ExperimentConfig& cfg, const RunOptions& opts) {
    if (!cfg.correlation)
        throw ValidationError("correlation", "section missing from the configuration");
    const config::CorrelationSection& sec = *cfg.correlation;
    const GridSetup gs = make_grid(cfg);
    const sequencer::CampaignContext ctx = make_context(cfg, gs.grid);

    std::vector<sequencer::PlanEntry> plan;
    plan.reserve(static_cast<std::size_t>(cfg.geometry.nx) *
                 static_cast<std::size_t>(cfg.geometry.ny));
    for (int y = 1; y <= cfg.geometry.ny; ++y) {
        for (int x = 1; x <= cfg.geometry.nx; ++x) {
            sequencer::PlanEntry e;
            e.label = "cell " + cell_str({x, y});
            e.cells = {{x, y}};
            e.mode = sequencer::TrialMode::open;
            e.n_heralds = sec.n_heralds;
            e.storage_time_us = sec.storage_time_us;
            plan.push_back(std::move(e));
        }
    }

    if (opts.dry_run) {
        print_plan(plan, ctx, out_of(opts));
        return {};
    }
    if (opts.write_log)
        err_of(opts) << "note: per-trial logging is skipped for correlation maps; the open "
                        "herald-quota plan generates an unbounded record volume\n";

    const sequencer::EventLog log = sequencer::run_campaign(plan, ctx, cfg.seed, opts.jobs);
    const analysis::CorrelationMap map = analysis::correlation_map(log, cfg.geometry);

    CommandResult result;
    const std::string path = out_path(cfg, opts, "correlation_map.tsv");
    std::ofstream f = open_table(path);
    write_header(f, "correlation-map", cfg);
    f << "# n_heralds " << sec.n_heralds << "\n";
    f << "# storage_us " << g17(sec.storage_time_us) << "\n";
    if (gs.cal) {
        f << "# eta_ret0 " << g17(gs.cal->eta_ret0) << "\n";
        f << "# od_to_eta " << g17(gs.cal->od_to_eta) << "\n";
        f << "# tau_center_us " << g17(gs.cal->tau_center_us) << "\n";
        f << "# tau_edge_us " << g17(gs.cal->tau_edge_us) << "\n";
    }
    f << "# columns x y g_c sigma trials c_s c_i c_si\n";

    double gc_min = std::numeric_limits<double>::infinity();
    double gc_max = -std::numeric_limits<double>::infinity();
    model::CellIndex at_min{1, 1}, at_max{1, 1};
    for (const sequencer::EntryResult& entry : log.entries) {
        const model::CellIndex cell = entry.plan.cells.front();
        const std::optional<analysis::GcEstimate>& est = map.at(cell);
        if (!est) continue;
        f << cell.x << "\t" << cell.y << "\t" << g9(est->g_c) << "\t" << g9(est->sigma) << "\t"
          << entry.trials << "\t" << entry.c_s << "\t" << entry.c_i << "\t" << entry.c_si
          << "\n";
        if (est->g_c < gc_min) {
            gc_min = est->g_c;
            at_min = cell;
        }
        if (est->g_c > gc_max) {
            gc_max = est->g_c;
            at_max = cell;
        }
    }
    f << "# gc_min " << g9(gc_min) << " at " << cell_str(at_min) << "\n";
    f << "# gc_max " << g9(gc_max) << " at " << cell_str(at_max) << "\n";
    close_table(f, path);
    result.files_written.push_back(path);

    if (opts.plot) {
        const std::string plot_path = out_path(cfg, opts, "correlation_map_plot.txt");
        std::ofstream p = open_table(plot_path);
        p << "# g_c over the array, top row is y=" << cfg.geometry.ny << "; range ["
          << g9(gc_min) << ", " << g9(gc_max) << "]\n";
        for (int y = cfg.geometry.ny; y >= 1; --y) {
            for (int x = 1; x <= cfg.geometry.nx; ++x) {
                const std::optional<analysis::GcEstimate>& est = map.at({x, y});
                if (!est) {
                    p << "?";
                    continue;
                }
                const double span = gc_max - gc_min;
                p << shade_for(span > 0.0 ? (est->g_c - gc_min) / span : 1.0);
            }
            p << "\n";
        }
        close_table(p, plot_path);
        result.files_written.push_back(plot_path);
    }

    out_of(opts) << "correlation map over " << log.entries.size() << " cells -> " << path
                 << "\n";
    return result;
}

CommandResult cmd_crosstalk(const config::ExperimentConfig& cfg, const RunOptions& opts) {
    if (!cfg.crosstalk)
        throw ValidationError("crosstalk", "section missing from the configuration");
    const config::CrosstalkSection& sec = *cfg.crosstalk;
    const sampler::ScanChannel channel = opts.channel ? *opts.channel : sec.channel;
    const GridSetup gs = make_grid(cfg);
    const sequencer::CampaignContext ctx = make_context(cfg, gs.grid);

    std::vector<sequencer::PlanEntry> plan;
    for (int dy = -sec.radius; dy <= sec.radius; ++dy) {
        for (int dx = -sec.radius; dx <= sec.radius; ++dx) {
            const model::CellIndex scanned{sec.target.x + dx, sec.target.y + dy};
            if (!cfg.geometry.contains(scanned)) continue;
            sequencer::PlanEntry e;
            e.label = "scan " + cell_str(scanned);
            e.cells = {sec.target};
            e.mode = sequencer::TrialMode::open;
            e.n_attempts = sec.attempts;
            e.storage_time_us = sec.storage_time_us;
            e.scanned = scanned;
            e.scan_channel = channel;
            plan.push_back(std::move(e));
        }
    }

    if (opts.dry_run) {
        print_plan(plan, ctx, out_of(opts));
        return {};
    }

    CommandResult result;
    std::optional<event_log::LogWriter> sink;
    if (opts.write_log) {
        sink.emplace(out_path(cfg, opts, "crosstalk_events.tsv"));
        result.files_written.push_back(sink->path());
    }
    const sequencer::EventLog log =
        sequencer::run_campaign(plan, ctx, cfg.seed, opts.jobs, sink ? &*sink : nullptr);
    const analysis::CrosstalkMap map = analysis::crosstalk_map(log, sec.target);

    const std::string path = out_path(cfg, opts, "crosstalk_map.tsv");
    std::ofstream f = open_table(path);
    write_header(f, "crosstalk", cfg);
    f << "# target " << cell_str(sec.target) << "\n";
    f << "# channel " << sampler::scan_channel_name(channel) << "\n";
    f << "# radius " << sec.radius << "\n";
    f << "# attempts " << sec.attempts << "\n";
    f << "# storage_us " << g17(sec.storage_time_us) << "\n";
    f << "# columns scan_x scan_y trials coincidences rate relative\n";
    double max_off = -1.0;
    for (const analysis::CrosstalkEntry& e : map.entries) {
        f << e.scanned.x << "\t" << e.scanned.y << "\t" << e.trials << "\t" << e.coincidences
          << "\t" << g9(e.rate) << "\t" << g9(e.relative) << "\n";
        if (!(e.scanned == sec.target)) max_off = std::max(max_off, e.relative);
    }
    if (max_off >= 0.0) f << "# max_off_target_relative " << g9(max_off) << "\n";
    close_table(f, path);
    result.files_written.push_back(path);

    out_of(opts) << "crosstalk scan over " << map.entries.size() << " positions -> " << path
                 << "\n";
    return result;
}

CommandResult cmd_entangle(const config::ExperimentConfig& cfg, const RunOptions& opts) {
    if (!cfg.entangle)
        throw ValidationError("entangle", "section missing from the configuration");
    const config::EntangleSection& sec = *cfg.entangle;
    const GridSetup gs = make_grid(cfg);
    sequencer::CampaignContext ctx = make_context(cfg, gs.grid);
    ctx.pair_tau_us = sec.tau_pair_us;
    ctx.pair_phi = sec.phase_deg * pi / 180.0;
    ctx.pair_v0 = resolve_v0(sec, gs.grid, ctx.pair_phi);

    const std::array<quantum::BasisPair, 16> bases = tomography::canonical_bases();
    std::vector<sequencer::PlanEntry> plan;
    for (const std::array<model::CellIndex, 2>& pair : sec.pairs) {
        for (int k = 0; k < 16; ++k) {
            sequencer::PlanEntry e;
            e.label = "pair " + cell_str(pair[0]) + "-" + cell_str(pair[1]) + " setting " +
                      std::to_string(k);
            e.cells = {pair[0], pair[1]};
            e.mode = sequencer::TrialMode::heralded;
            e.n_heralds = sec.n_heralds_per_setting;
            e.storage_time_us = sec.storage_time_us;
            e.setting = bases[static_cast<std::size_t>(k)];
            plan.push_back(std::move(e));
        }
    }

    if (opts.dry_run) {
        out_of(opts) << "v0: " << g9(ctx.pair_v0) << "\n";
        print_plan(plan, ctx, out_of(opts));
        return {};
    }

    CommandResult result;
    std::optional<event_log::LogWriter> sink;
    if (opts.write_log) {
        sink.emplace(out_path(cfg, opts, "entangle_events.tsv"));
        result.files_written.push_back(sink->path());
    }
    const sequencer::EventLog log =
        sequencer::run_campaign(plan, ctx, cfg.seed, opts.jobs, sink ? &*sink : nullptr);

    const std::string path = out_path(cfg, opts, "entangle_fidelity.tsv");
    std::ofstream f = open_table(path);
    write_header(f, "entangle", cfg);
    f << "# v0 " << g17(ctx.pair_v0) << "\n";
    f << "# tau_pair_us " << g17(sec.tau_pair_us) << "\n";
    f << "# phase_deg " << g17(sec.phase_deg) << "\n";
    f << "# storage_us " << g17(sec.storage_time_us) << "\n";
    f << "# n_heralds_per_setting " << sec.n_heralds_per_setting << "\n";
    f << "# target_fidelity " << g17(sec.target_fidelity) << "\n";
    f << "# bootstrap_resamples " << sec.bootstrap_resamples << "\n";
    f << "# columns a_x a_y b_x b_y fidelity sigma fidelity_fixed_phase log_likelihood "
         "iterations converged\n";
    double fid_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sec.pairs.size(); ++i) {
        const model::CellIndex a = sec.pairs[i][0];
        const model::CellIndex b = sec.pairs[i][1];
        const tomography::TomographyResult tomo = tomography::tomography_from_log(
            log, a, b, sec.storage_time_us, sec.bootstrap_resamples,
            derived_seed(cfg.seed, i));
        f << a.x << "\t" << a.y << "\t" << b.x << "\t" << b.y << "\t" << g9(tomo.fidelity)
          << "\t" << g9(tomo.fidelity_sigma) << "\t" << g9(tomo.fidelity_fixed_phase) << "\t"
          << g9(tomo.log_likelihood) << "\t" << tomo.iterations << "\t"
          << (tomo.converged ? 1 : 0) << "\n";
        fid_min = std::min(fid_min, tomo.fidelity);
    }
    f << "# fidelity_min " << g9(fid_min) << "\n";
    close_table(f, path);
    result.files_written.push_back(path);

    out_of(opts) << "entangled-pair tomography for " << sec.pairs.size() << " pairs -> " << path
                 << "\n";
    return result;
}

CommandResult cmd_storage_scan(const config::ExperimentConfig& cfg, const RunOptions& opts) {
    if (!cfg.storage_scan)
        throw ValidationError("storage_scan", "section missing from the configuration");
    const config::StorageScanSection& sec = *cfg.storage_scan;

    if (cfg.physics.larmor_visibility > 0.0) {
        std::string offending;
        for (double t : sec.times_us) {
            const double cycles = t / cfg.physics.larmor_period_us;
            if (std::abs(cycles - std::round(cycles)) > 0.05) {
                if (!offending.empty()) offending += ", ";
                offending += g9(t);
            }
        }
        if (!offending.empty()) {
            if (!opts.allow_off_larmor)
                throw ValidationError(
                    "storage_scan.times_us",
                    "times " + offending + " us fall off the precession revivals (period " +
                        g9(cfg.physics.larmor_period_us) +
                        " us); pass --allow-off-larmor to proceed");
            err_of(opts) << "warning: times " << offending
                         << " us fall off the precession revivals\n";
        }
    }

    const GridSetup gs = make_grid(cfg);
    sequencer::CampaignContext ctx = make_context(cfg, gs.grid);
    CommandResult result;

    if (sec.cell) {
        std::vector<sequencer::PlanEntry> plan;
        for (double t : sec.times_us) {
            sequencer::PlanEntry e;
            e.label = "scan t=" + g9(t);
            e.cells = {*sec.cell};
            e.mode = sequencer::TrialMode::open;
            e.n_heralds = sec.n_heralds;
            e.storage_time_us = t;
            plan.push_back(std::move(e));
        }
        if (opts.dry_run) {
            print_plan(plan, ctx, out_of(opts));
            return {};
        }
        if (opts.write_log)
            err_of(opts) << "note: per-trial logging is skipped for single-cell scans; the "
                            "open herald-quota plan generates an unbounded record volume\n";
        const sequencer::EventLog log = sequencer::run_campaign(plan, ctx, cfg.seed, opts.jobs);

        std::vector<analysis::DecayPoint> points;
        points.reserve(log.entries.size());
        for (const sequencer::EntryResult& entry : log.entries) {
            const analysis::GcEstimate est = analysis::estimate_gc(
                {entry.trials, entry.c_s, entry.c_i, entry.c_si});
            points.push_back({entry.plan.storage_time_us, est.g_c, est.sigma});
        }
        const analysis::FitResult fit = analysis::fit_gaussian_decay(points);

        const std::string path = out_path(cfg, opts, "storage_scan.tsv");
        std::ofstream f = open_table(path);
        write_header(f, "storage-scan", cfg);
        f << "# cell " << cell_str(*sec.cell) << "\n";
        f << "# n_heralds " << sec.n_heralds << "\n";
        f << "# columns t_us g_c sigma\n";
        for (const analysis::DecayPoint& p : points)
            f << g9(p.t_us) << "\t" << g9(p.g_c) << "\t" << g9(p.sigma) << "\n";
        f << "# fit_g0 " << g9(fit.g0) << "\n";
        f << "# fit_g0_sigma " << g9(std::sqrt(std::max(0.0, fit.covariance[0][0]))) << "\n";
        f << "# fit_tau_us " << g9(fit.tau_us) << "\n";
        f << "# fit_tau_sigma " << g9(std::sqrt(std::max(0.0, fit.covariance[1][1]))) << "\n";
        f << "# fit_chi2_reduced " << g9(fit.chi2_reduced) << "\n";
        f << "# fit_iterations " << fit.iterations << "\n";
        close_table(f, path);
        result.files_written.push_back(path);

        if (opts.plot) {
            const std::string plot_path = out_path(cfg, opts, "storage_scan_plot.txt");
            std::ofstream p = open_table(plot_path);
            double y_max = 1.0;
            for (const analysis::DecayPoint& pt : points) y_max = std::max(y_max, pt.g_c);
            p << "# g_c against storage time; full bar = " << g9(y_max) << "\n";
            for (const analysis::DecayPoint& pt : points) {
                const int bar = std::clamp(
                    static_cast<int>(std::round(50.0 * (pt.g_c - 1.0) /
                                                std::max(1e-12, y_max - 1.0))),
                    0, 50);
                p << g9(pt.t_us) << "\t|" << std::string(static_cast<std::size_t>(bar), '=')
                  << "\n";
            }
            close_table(p, plot_path);
            result.files_written.push_back(plot_path);
        }
        out_of(opts) << "storage scan over " << points.size() << " times -> " << path
                     << " (fitted tau " << g9(fit.tau_us) << " us)\n";
        return result;
    }

    // Pair variant: the pair parameters come from the entangle section.
    if (!cfg.entangle)
        throw ValidationError("storage_scan.pair", "the entangle section is missing");
    const config::EntangleSection& ent = *cfg.entangle;
    ctx.pair_tau_us = ent.tau_pair_us;
    ctx.pair_phi = ent.phase_deg * pi / 180.0;
    ctx.pair_v0 = resolve_v0(ent, gs.grid, ctx.pair_phi);
    const model::CellIndex a = (*sec.pair)[0];
    const model::CellIndex b = (*sec.pair)[1];

    const std::array<quantum::BasisPair, 16> bases = tomography::canonical_bases();
    std::vector<sequencer::PlanEntry> plan;
    for (double t : sec.times_us) {
        for (int k = 0; k < 16; ++k) {
            sequencer::PlanEntry e;
            e.label = "pair scan t=" + g9(t) + " setting " + std::to_string(k);
            e.cells = {a, b};
            e.mode = sequencer::TrialMode::heralded;
            e.n_heralds = sec.n_heralds;
            e.storage_time_us = t;
            e.setting = bases[static_cast<std::size_t>(k)];
            plan.push_back(std::move(e));
        }
    }
    if (opts.dry_run) {
        out_of(opts) << "v0: " << g9(ctx.pair_v0) << "\n";
        print_plan(plan, ctx, out_of(opts));
        return {};
    }
    std::optional<event_log::LogWriter> sink;
    if (opts.write_log) {
        sink.emplace(out_path(cfg, opts, "storage_scan_events.tsv"));
        result.files_written.push_back(sink->path());
    }
    const sequencer::EventLog log =
        sequencer::run_campaign(plan, ctx, cfg.seed, opts.jobs, sink ? &*sink : nullptr);

    const std::string path = out_path(cfg, opts, "storage_scan_pair.tsv");
    std::ofstream f = open_table(path);
    write_header(f, "storage-scan", cfg);
    f << "# pair " << cell_str(a) << "-" << cell_str(b) << "\n";
    f << "# v0 " << g17(ctx.pair_v0) << "\n";
    f << "# tau_pair_us " << g17(ent.tau_pair_us) << "\n";
    f << "# phase_deg " << g17(ent.phase_deg) << "\n";
    f << "# n_heralds_per_setting " << sec.n_heralds << "\n";
    f << "# bootstrap_resamples " << sec.bootstrap_resamples << "\n";
    f << "# columns t_us fidelity sigma fidelity_fixed_phase iterations converged\n";
    std::vector<std::pair<double, double>> curve;
    for (std::size_t i = 0; i < sec.times_us.size(); ++i) {
        const double t = sec.times_us[i];
        const tomography::TomographyResult tomo = tomography::tomography_from_log(
            log, a, b, t, sec.bootstrap_resamples, derived_seed(cfg.seed, i));
        f << g9(t) << "\t" << g9(tomo.fidelity) << "\t" << g9(tomo.fidelity_sigma) << "\t"
          << g9(tomo.fidelity_fixed_phase) << "\t" << tomo.iterations << "\t"
          << (tomo.converged ? 1 : 0) << "\n";
        curve.emplace_back(t, tomo.fidelity);
    }
    for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
        const auto [t0, f0] = curve[i];
        const auto [t1, f1] = curve[i + 1];
        if ((f0 - 0.5) * (f1 - 0.5) <= 0.0 && f0 != f1) {
            f << "# fidelity_half_crossing_us " << g9(t0 + (0.5 - f0) * (t1 - t0) / (f1 - f0))
              << "\n";
            break;
        }
    }
    close_table(f, path);
    result.files_written.push_back(path);
    out_of(opts) << "pair storage scan over " << curve.size() << " times -> " << path << "\n";
    return result;
}

CommandResult cmd_validate(const config::ExperimentConfig& cfg, const RunOptions& opts) {
    std::ostream& out = out_of(opts);
    out << "configuration OK\n";
    out << "hash " << cfg.hash << "\n";
    out << "seed " << cfg.seed << "\n";
    out << "geometry " << cfg.geometry.nx << "x" << cfg.geometry.ny << ", spacing "
        << g9(cfg.geometry.spacing_um) << " um\n";
    if (cfg.geometry.grid_exceeds_cloud())
        err_of(opts) << "warning: the outer cells fall outside the cloud diameter of "
                     << g9(cfg.geometry.cloud_diameter_mm) << " mm\n";
    std::string sections;
    const auto add = [&](bool present, const char* name) {
        if (present) {
            if (!sections.empty()) sections += ", ";
            sections += name;
        }
    };
    add(cfg.calibration.has_value(), "calibration");
    add(cfg.correlation.has_value(), "correlation");
    add(cfg.crosstalk.has_value(), "crosstalk");
    add(cfg.entangle.has_value(), "entangle");
    add(cfg.storage_scan.has_value(), "storage_scan");
    out << "sections: " << (sections.empty() ? "(none)" : sections) << "\n";

    const GridSetup gs = make_grid(cfg);
    if (gs.cal) {
        out << "calibration: eta_ret0=" << g9(gs.cal->eta_ret0)
            << " od_to_eta=" << g9(gs.cal->od_to_eta)
            << " tau_center_us=" << g9(gs.cal->tau_center_us)
            << " tau_edge_us=" << g9(gs.cal->tau_edge_us) << "\n";
    }
    if (cfg.entangle) {
        const double phi = cfg.entangle->phase_deg * pi / 180.0;
        out << "entangle: v0=" << g9(resolve_v0(*cfg.entangle, gs.grid, phi)) << " over "
            << cfg.entangle->pairs.size() << " pairs\n";
    }
    return {};
}

} // namespace dlcz::commands
