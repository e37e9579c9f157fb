#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <sys/wait.h>

namespace support {

// Independent closed-form reference for the single-cell click rates. The
// thermal law (1 - p) p^n gives E[x^n] = (1 - p) / (1 - p x), so a detector
// that misses each excitation with probability (1 - eta) stays silent with
// probability (1 - dark) * E[(1 - eta)^n].
inline double thermal_generating_sum(double p, double x) {
    return (1.0 - p) / (1.0 - p * x);
}

struct ClosedRates {
    double p_s = 0.0;
    double p_i = 0.0;
    double p_si = 0.0;
    double g_c = 0.0;
};

inline ClosedRates closed_rates(double p, double eta_s, double beta, double dark_s,
                                double dark_i) {
    const double quiet_s = (1.0 - dark_s) * thermal_generating_sum(p, 1.0 - eta_s);
    const double quiet_i = (1.0 - dark_i) * thermal_generating_sum(p, 1.0 - beta);
    const double quiet_si = (1.0 - dark_s) * (1.0 - dark_i) *
                            thermal_generating_sum(p, (1.0 - eta_s) * (1.0 - beta));
    ClosedRates r;
    r.p_s = 1.0 - quiet_s;
    r.p_i = 1.0 - quiet_i;
    r.p_si = 1.0 - quiet_s - quiet_i + quiet_si;
    r.g_c = r.p_si / (r.p_s * r.p_i);
    return r;
}

// Retrieval chain computed from scratch rather than through the library.
inline double closed_retrieval(double eta_ret0, double od, double od_to_eta, double t_us,
                               double tau_us, double larmor_period_us,
                               double larmor_visibility) {
    constexpr double pi = 3.14159265358979323846;
    const double c = std::cos(pi * t_us / larmor_period_us);
    const double env = (1.0 - larmor_visibility) + larmor_visibility * c * c;
    double eta = eta_ret0 * (1.0 - std::exp(-od / od_to_eta)) *
                 std::exp(-(t_us * t_us) / (tau_us * tau_us)) * env;
    if (eta < 0.0) eta = 0.0;
    if (eta > 1.0) eta = 1.0;
    return eta;
}

class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        const auto base = std::filesystem::temp_directory_path();
        for (int tries = 0; tries < 1000; ++tries) {
            const auto candidate =
                base / ("dlcz-test-" + std::to_string(counter.fetch_add(1)) + "-" +
                        std::to_string(tries));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path_ = candidate;
                return;
            }
        }
        throw std::runtime_error("could not create a scratch directory");
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path);
}

struct CommandOutput {
    int exit_code = -1;
    std::string out;
    std::string err;
};

// Runs a shell command, capturing stdout/stderr through scratch files.
inline CommandOutput run_command(const std::string& command, const TempDir& scratch) {
    static std::atomic<unsigned> counter{0};
    const unsigned id = counter.fetch_add(1);
    const std::string out_path = scratch.file("cmd-out-" + std::to_string(id) + ".txt");
    const std::string err_path = scratch.file("cmd-err-" + std::to_string(id) + ".txt");
    const std::string full = command + " > '" + out_path + "' 2> '" + err_path + "'";
    const int status = std::system(full.c_str());
    CommandOutput result;
    if (status == -1)
        result.exit_code = -1;
    else if (WIFEXITED(status))
        result.exit_code = WEXITSTATUS(status);
    else
        result.exit_code = 128;
    result.out = read_file(out_path);
    result.err = read_file(err_path);
    return result;
}

inline std::string sim_binary() { return DLCZ_SIM_BINARY; }
inline std::string config_dir() { return DLCZ_CONFIG_DIR; }
inline std::string shipped_config(const std::string& name) {
    return (std::filesystem::path(DLCZ_CONFIG_DIR) / name).string();
}

inline bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

} // namespace support
