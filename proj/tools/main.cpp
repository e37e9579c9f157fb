#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dlcz/commands.hpp"
#include "dlcz/config.hpp"
#include "dlcz/errors.hpp"

namespace {

struct CliArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    std::optional<std::string> out_dir;
    bool dry_run = false;
    bool write_log = false;
    bool plot = false;
    bool allow_off_larmor = false;
    std::string channel;
};

void add_common_options(CLI::App* cmd, CliArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "JSON configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", args.seed, "override the configured random seed");
    cmd->add_option("-j,--jobs", args.jobs,
                    "worker threads; the output is identical for any value")
        ->check(CLI::PositiveNumber);
    cmd->add_option("-o,--out", args.out_dir, "override the configured output directory");
    cmd->add_flag("--dry-run", args.dry_run, "print the trial plan without simulating");
    cmd->add_flag("--log", args.write_log,
                  "stream per-trial records next to the summary tables");
    cmd->add_flag("--plot", args.plot, "write a plain-text rendering next to the table");
    cmd->add_flag("--allow-off-larmor", args.allow_off_larmor,
                  "accept scan times away from the precession revivals");
}

int dispatch(const std::string& name, const CliArgs& args) {
    const dlcz::config::ExperimentConfig cfg =
        dlcz::config::load_config(args.config_path, args.seed);
    dlcz::commands::RunOptions opts;
    opts.jobs = args.jobs;
    opts.dry_run = args.dry_run;
    opts.write_log = args.write_log;
    opts.plot = args.plot;
    opts.allow_off_larmor = args.allow_off_larmor;
    opts.out_dir = args.out_dir;
    if (!args.channel.empty())
        opts.channel = args.channel == "write" ? dlcz::sampler::ScanChannel::write
                                               : dlcz::sampler::ScanChannel::read;

    if (name == "correlation-map") {
        dlcz::commands::cmd_correlation_map(cfg, opts);
    } else if (name == "crosstalk") {
        dlcz::commands::cmd_crosstalk(cfg, opts);
    } else if (name == "entangle") {
        dlcz::commands::cmd_entangle(cfg, opts);
    } else if (name == "storage-scan") {
        dlcz::commands::cmd_storage_scan(cfg, opts);
    } else {
        dlcz::commands::cmd_validate(cfg, opts);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic simulator for a multiplexed cold-atom quantum memory"};
    app.require_subcommand(1);

    CliArgs args;
    CLI::App* correlation =
        app.add_subcommand("correlation-map", "coincidence map over the whole array");
    add_common_options(correlation, args);

    CLI::App* crosstalk =
        app.add_subcommand("crosstalk", "beam-misalignment scan around a target cell");
    add_common_options(crosstalk, args);
    crosstalk->add_option("--channel", args.channel, "which beam to misalign")
        ->check(CLI::IsMember({"write", "read"}));

    CLI::App* entangle =
        app.add_subcommand("entangle", "pairwise tomography at one storage time");
    add_common_options(entangle, args);

    CLI::App* storage =
        app.add_subcommand("storage-scan", "sweep the storage time for a cell or a pair");
    add_common_options(storage, args);

    CLI::App* validate =
        app.add_subcommand("validate", "check a configuration without simulating");
    add_common_options(validate, args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success))
            return app.exit(e);
        app.exit(e);
        return 2;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        return dispatch(name, args);
    } catch (const dlcz::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
}
