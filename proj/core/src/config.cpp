#include "dlcz/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dlcz/errors.hpp"

namespace dlcz::config {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw ValidationError(path, msg);
}

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    for (const auto& item : j.items()) {
        if (allowed.find(item.key()) == allowed.end())
            fail(path + "." + item.key(), "unknown key");
    }
}

const json* find(const json& j, const char* key) {
    const auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

double get_double(const json& j, const std::string& path, const char* key, double fallback) {
    const json* v = find(j, key);
    if (!v) return fallback;
    if (!v->is_number()) fail(path + "." + key, "expected a number");
    return v->get<double>();
}

std::uint64_t parse_u64_value(const json& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
        const long long raw = v.get<long long>();
        if (raw < 0) fail(path, "expected a non-negative integer");
        return static_cast<std::uint64_t>(raw);
    }
    fail(path, "expected a non-negative integer");
}

std::uint64_t get_u64(const json& j, const std::string& path, const char* key,
                      std::uint64_t fallback) {
    const json* v = find(j, key);
    if (!v) return fallback;
    return parse_u64_value(*v, path + "." + key);
}

int get_int(const json& j, const std::string& path, const char* key, int fallback) {
    const json* v = find(j, key);
    if (!v) return fallback;
    if (!v->is_number_integer()) fail(path + "." + key, "expected an integer");
    return v->get<int>();
}

model::CellIndex parse_cell(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
        fail(path, "expected a cell as [x, y]");
    return {v[0].get<int>(), v[1].get<int>()};
}

std::array<model::CellIndex, 2> parse_pair(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2) fail(path, "expected a pair as [[x, y], [x, y]]");
    return {parse_cell(v[0], path + "[0]"), parse_cell(v[1], path + "[1]")};
}

model::ArrayGeometry parse_geometry(const json& j, const std::string& path) {
    check_keys(j, path,
               {"nx", "ny", "spacing_um", "write_waist_um", "signal_waist_um",
                "cloud_diameter_mm"});
    model::ArrayGeometry g;
    g.nx = get_int(j, path, "nx", g.nx);
    g.ny = get_int(j, path, "ny", g.ny);
    g.spacing_um = get_double(j, path, "spacing_um", g.spacing_um);
    g.write_waist_um = get_double(j, path, "write_waist_um", g.write_waist_um);
    g.signal_waist_um = get_double(j, path, "signal_waist_um", g.signal_waist_um);
    g.cloud_diameter_mm = get_double(j, path, "cloud_diameter_mm", g.cloud_diameter_mm);
    return g;
}

model::OpticalDepthProfile parse_profile(const json& j, const std::string& path) {
    check_keys(j, path, {"od_center", "sigma_um", "od_to_eta"});
    model::OpticalDepthProfile p;
    p.od_center = get_double(j, path, "od_center", p.od_center);
    p.sigma_um = get_double(j, path, "sigma_um", p.sigma_um);
    p.od_to_eta = get_double(j, path, "od_to_eta", p.od_to_eta);
    return p;
}

model::CellPhysics parse_physics(const json& j, const std::string& path) {
    check_keys(j, path,
               {"p", "eta_s", "eta_i", "eta_ret0", "dark_s", "dark_i", "tau_us",
                "larmor_period_us", "larmor_visibility"});
    model::CellPhysics c;
    c.p = get_double(j, path, "p", c.p);
    c.eta_s = get_double(j, path, "eta_s", c.eta_s);
    c.eta_i = get_double(j, path, "eta_i", c.eta_i);
    c.eta_ret0 = get_double(j, path, "eta_ret0", c.eta_ret0);
    c.dark_s = get_double(j, path, "dark_s", c.dark_s);
    c.dark_i = get_double(j, path, "dark_i", c.dark_i);
    c.tau_us = get_double(j, path, "tau_us", c.tau_us);
    c.larmor_period_us = get_double(j, path, "larmor_period_us", c.larmor_period_us);
    c.larmor_visibility = get_double(j, path, "larmor_visibility", c.larmor_visibility);
    return c;
}

sequencer::TimingConfig parse_timing(const json& j, const std::string& path) {
    check_keys(j, path,
               {"write_pulse_ns", "write_clean_delay_ns", "clean_pulse_ns", "cycle_period_ns",
                "max_attempts"});
    sequencer::TimingConfig t;
    t.write_pulse_ns = get_double(j, path, "write_pulse_ns", t.write_pulse_ns);
    t.write_clean_delay_ns = get_double(j, path, "write_clean_delay_ns", t.write_clean_delay_ns);
    t.clean_pulse_ns = get_double(j, path, "clean_pulse_ns", t.clean_pulse_ns);
    t.cycle_period_ns = get_double(j, path, "cycle_period_ns", t.cycle_period_ns);
    t.max_attempts = get_u64(j, path, "max_attempts", t.max_attempts);
    return t;
}

calibration::GridTargets parse_calibration(const json& j, const std::string& path) {
    check_keys(j, path,
               {"gc_center", "gc_edge", "center", "edge", "fit_tau_center_us", "fit_tau_edge_us",
                "scan_times_us"});
    calibration::GridTargets t;
    t.gc_center = get_double(j, path, "gc_center", t.gc_center);
    t.gc_edge = get_double(j, path, "gc_edge", t.gc_edge);
    if (const json* v = find(j, "center")) t.center = parse_cell(*v, path + ".center");
    if (const json* v = find(j, "edge")) t.edge = parse_cell(*v, path + ".edge");
    t.fit_tau_center_us = get_double(j, path, "fit_tau_center_us", t.fit_tau_center_us);
    t.fit_tau_edge_us = get_double(j, path, "fit_tau_edge_us", t.fit_tau_edge_us);
    if (const json* v = find(j, "scan_times_us")) {
        if (!v->is_array()) fail(path + ".scan_times_us", "expected an array of times");
        t.scan_times_us.clear();
        for (std::size_t i = 0; i < v->size(); ++i) {
            if (!(*v)[i].is_number()) fail(path + ".scan_times_us", "expected numbers");
            t.scan_times_us.push_back((*v)[i].get<double>());
        }
    }
    return t;
}

CorrelationSection parse_correlation(const json& j, const std::string& path) {
    check_keys(j, path, {"n_heralds", "storage_time_us"});
    CorrelationSection s;
    s.n_heralds = get_u64(j, path, "n_heralds", s.n_heralds);
    s.storage_time_us = get_double(j, path, "storage_time_us", s.storage_time_us);
    if (s.n_heralds == 0) fail(path + ".n_heralds", "must be positive");
    if (s.storage_time_us < 0.0) fail(path + ".storage_time_us", "must be non-negative");
    return s;
}

CrosstalkSection parse_crosstalk(const json& j, const std::string& path) {
    check_keys(j, path, {"target", "radius", "attempts", "storage_time_us", "channel"});
    CrosstalkSection s;
    if (const json* v = find(j, "target")) s.target = parse_cell(*v, path + ".target");
    s.radius = get_int(j, path, "radius", s.radius);
    s.attempts = get_u64(j, path, "attempts", s.attempts);
    s.storage_time_us = get_double(j, path, "storage_time_us", s.storage_time_us);
    if (const json* v = find(j, "channel")) {
        if (!v->is_string()) fail(path + ".channel", "expected \"read\" or \"write\"");
        const std::string name = v->get<std::string>();
        if (name == "read") s.channel = sampler::ScanChannel::read;
        else if (name == "write") s.channel = sampler::ScanChannel::write;
        else fail(path + ".channel", "expected \"read\" or \"write\"");
    }
    if (s.radius < 0) fail(path + ".radius", "must be non-negative");
    if (s.attempts == 0) fail(path + ".attempts", "must be positive");
    if (s.storage_time_us < 0.0) fail(path + ".storage_time_us", "must be non-negative");
    return s;
}

EntangleSection parse_entangle(const json& j, const std::string& path) {
    check_keys(j, path,
               {"pairs", "n_heralds_per_setting", "storage_time_us", "phase_deg", "tau_pair_us",
                "v0", "target_fidelity", "bootstrap_resamples"});
    EntangleSection s;
    const json* pairs = find(j, "pairs");
    if (!pairs || !pairs->is_array() || pairs->empty())
        fail(path + ".pairs", "expected a non-empty array of cell pairs");
    for (std::size_t i = 0; i < pairs->size(); ++i)
        s.pairs.push_back(parse_pair((*pairs)[i], path + ".pairs[" + std::to_string(i) + "]"));
    s.n_heralds_per_setting = get_u64(j, path, "n_heralds_per_setting", s.n_heralds_per_setting);
    s.storage_time_us = get_double(j, path, "storage_time_us", s.storage_time_us);
    s.phase_deg = get_double(j, path, "phase_deg", s.phase_deg);
    s.tau_pair_us = get_double(j, path, "tau_pair_us", s.tau_pair_us);
    if (const json* v = find(j, "v0")) {
        if (!v->is_number()) fail(path + ".v0", "expected a number");
        s.v0 = v->get<double>();
        if (*s.v0 <= 0.0 || *s.v0 > 1.0) fail(path + ".v0", "must lie in (0, 1]");
    }
    s.target_fidelity = get_double(j, path, "target_fidelity", s.target_fidelity);
    s.bootstrap_resamples = get_int(j, path, "bootstrap_resamples", s.bootstrap_resamples);
    if (s.n_heralds_per_setting == 0) fail(path + ".n_heralds_per_setting", "must be positive");
    if (s.storage_time_us < 0.0) fail(path + ".storage_time_us", "must be non-negative");
    if (!(s.tau_pair_us > 0.0)) fail(path + ".tau_pair_us", "must be positive");
    if (!(s.target_fidelity > 0.25 && s.target_fidelity <= 1.0))
        fail(path + ".target_fidelity", "must lie in (0.25, 1]");
    if (s.bootstrap_resamples < 100) fail(path + ".bootstrap_resamples", "must be at least 100");
    for (const auto& pr : s.pairs) {
        if (pr[0] == pr[1]) fail(path + ".pairs", "pair cells must differ");
    }
    return s;
}

StorageScanSection parse_storage_scan(const json& j, const std::string& path) {
    check_keys(j, path, {"cell", "pair", "times_us", "n_heralds", "bootstrap_resamples"});
    StorageScanSection s;
    if (const json* v = find(j, "cell")) s.cell = parse_cell(*v, path + ".cell");
    if (const json* v = find(j, "pair")) s.pair = parse_pair(*v, path + ".pair");
    const json* times = find(j, "times_us");
    if (!times || !times->is_array() || times->empty())
        fail(path + ".times_us", "expected a non-empty array of storage times");
    for (std::size_t i = 0; i < times->size(); ++i) {
        if (!(*times)[i].is_number()) fail(path + ".times_us", "expected numbers");
        const double t = (*times)[i].get<double>();
        if (t < 0.0 || !std::isfinite(t)) fail(path + ".times_us", "times must be non-negative");
        s.times_us.push_back(t);
    }
    s.n_heralds = get_u64(j, path, "n_heralds", s.n_heralds);
    s.bootstrap_resamples = get_int(j, path, "bootstrap_resamples", s.bootstrap_resamples);
    if (s.cell.has_value() == s.pair.has_value())
        fail(path, "exactly one of \"cell\" or \"pair\" is required");
    if (s.n_heralds == 0) fail(path + ".n_heralds", "must be positive");
    if (s.bootstrap_resamples < 100) fail(path + ".bootstrap_resamples", "must be at least 100");
    if (s.pair && (*s.pair)[0] == (*s.pair)[1]) fail(path + ".pair", "pair cells must differ");
    return s;
}

std::string fnv1a64_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (const unsigned char c : text) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text,
                                   std::optional<std::uint64_t> seed_override) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& err) {
        throw ValidationError("config", std::string("invalid JSON: ") + err.what());
    }
    if (!root.is_object()) throw ValidationError("config", "the top level must be an object");
    check_keys(root, "config",
               {"seed", "out_dir", "geometry", "od_profile", "physics", "timing", "calibration",
                "correlation", "crosstalk", "entangle", "storage_scan", "metadata"});

    ExperimentConfig cfg;
    if (const json* v = find(root, "seed")) {
        cfg.seed = parse_u64_value(*v, "config.seed");
    } else if (!seed_override) {
        fail("config.seed", "required (or supply a seed on the command line)");
    }
    if (seed_override) cfg.seed = *seed_override;

    if (const json* v = find(root, "out_dir")) {
        if (!v->is_string() || v->get<std::string>().empty())
            fail("config.out_dir", "expected a non-empty string");
        cfg.out_dir = v->get<std::string>();
    }
    if (const json* v = find(root, "geometry")) cfg.geometry = parse_geometry(*v, "geometry");
    if (const json* v = find(root, "od_profile")) cfg.od_profile = parse_profile(*v, "od_profile");
    if (const json* v = find(root, "physics")) cfg.physics = parse_physics(*v, "physics");
    if (const json* v = find(root, "timing")) cfg.timing = parse_timing(*v, "timing");
    if (const json* v = find(root, "calibration"))
        cfg.calibration = parse_calibration(*v, "calibration");
    if (const json* v = find(root, "correlation"))
        cfg.correlation = parse_correlation(*v, "correlation");
    if (const json* v = find(root, "crosstalk")) cfg.crosstalk = parse_crosstalk(*v, "crosstalk");
    if (const json* v = find(root, "entangle")) cfg.entangle = parse_entangle(*v, "entangle");
    if (const json* v = find(root, "storage_scan"))
        cfg.storage_scan = parse_storage_scan(*v, "storage_scan");
    if (const json* v = find(root, "metadata")) cfg.metadata_json = v->dump();

    cfg.geometry.validate();
    cfg.od_profile.validate();
    cfg.physics.validate();
    cfg.timing.validate();
    if (cfg.calibration) cfg.calibration->validate();

    const auto in_bounds = [&](model::CellIndex c, const std::string& path) {
        if (!cfg.geometry.contains(c))
            fail(path, "cell (" + std::to_string(c.x) + "," + std::to_string(c.y) +
                           ") lies outside the array");
    };
    if (cfg.crosstalk) in_bounds(cfg.crosstalk->target, "crosstalk.target");
    if (cfg.entangle) {
        for (std::size_t i = 0; i < cfg.entangle->pairs.size(); ++i) {
            in_bounds(cfg.entangle->pairs[i][0], "entangle.pairs[" + std::to_string(i) + "][0]");
            in_bounds(cfg.entangle->pairs[i][1], "entangle.pairs[" + std::to_string(i) + "][1]");
        }
    }
    if (cfg.storage_scan) {
        if (cfg.storage_scan->cell) in_bounds(*cfg.storage_scan->cell, "storage_scan.cell");
        if (cfg.storage_scan->pair) {
            in_bounds((*cfg.storage_scan->pair)[0], "storage_scan.pair[0]");
            in_bounds((*cfg.storage_scan->pair)[1], "storage_scan.pair[1]");
            if (!cfg.entangle)
                fail("storage_scan.pair",
                     "pair scans take the pair parameters from the entangle section, which is "
                     "missing");
        }
    }

    json effective = root;
    effective["seed"] = cfg.seed;
    cfg.hash = fnv1a64_hex(effective.dump());
    return cfg;
}

ExperimentConfig load_config(const std::string& path,
                             std::optional<std::uint64_t> seed_override) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("failed while reading config file '" + path + "'");
    return parse_config_text(buf.str(), seed_override);
}

} // namespace dlcz::config
