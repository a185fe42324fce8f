#include "eeio/errors.hpp"
#include "eeio/fixture.hpp"
#include "eeio/log.hpp"
#include "eeio/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitPartial = 2;

struct CommonArgs {
    std::string config;
    std::string out;
    int jobs = 0;  // 0 = take from config
};

void add_common(CLI::App* cmd, CommonArgs& args)
{
    cmd->add_option("--config", args.config, "run configuration file")->required();
    cmd->add_option("--out", args.out, "output directory (default: <config dir>/out)");
    cmd->add_option("--jobs", args.jobs, "parallel (region, year) tasks");
}

eeio::RunConfig load_config(const CommonArgs& args)
{
    eeio::RunConfig config = eeio::RunConfig::load(args.config);
    if (args.jobs > 0) {
        config.options.jobs = args.jobs;
    }
    return config;
}

fs::path out_dir(const CommonArgs& args, const eeio::RunConfig& config)
{
    return args.out.empty() ? config.base_dir / "out" : fs::path(args.out);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"energy-balance allocation, calibration and MRIO footprint pipeline"};
    app.require_subcommand(1);

    CommonArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "full pipeline: balances to footprints and reports");
    add_common(run_cmd, run_args);

    // stage subcommands mirror the pipeline steps so each one can be run
    // and inspected on its own; they read earlier stage outputs from --out
    std::map<std::string, std::pair<CLI::App*, CommonArgs>> stage_cmds;
    for (const char* name : {"extract-use", "build-map", "allocate", "aggregate", "residual",
                             "error", "calibrate", "extrapolate", "footprint", "report"}) {
        auto* cmd = app.add_subcommand(name, std::string("run only the ") + name + " stage");
        auto& entry = stage_cmds[name];
        entry.first = cmd;
        add_common(cmd, entry.second);
    }

    auto* fixture_cmd =
        app.add_subcommand("fixture", "generate a self-consistent synthetic input set");
    std::string fixture_out;
    eeio::FixtureSpec spec;
    fixture_cmd->add_option("--out", fixture_out, "fixture directory")->required();
    fixture_cmd->add_option("--seed", spec.seed, "random seed");
    fixture_cmd->add_option("--regions", spec.regions, "MRIO region count");
    fixture_cmd->add_option("--sectors", spec.sectors, "sectors per region (excl. households)");
    fixture_cmd->add_option("--flows", spec.flows, "balance flow count");
    fixture_cmd->add_option("--products", spec.products, "energy product count");
    fixture_cmd->add_option("--first-year", spec.first_year, "first year");
    fixture_cmd->add_option("--years", spec.n_years, "number of years");
    fixture_cmd->add_flag("--no-reference", [&spec](std::int64_t) { spec.with_reference = false; },
                          "omit reference accounts (calibration will be skipped)");
    fixture_cmd->add_flag("--no-population", [&spec](std::int64_t) { spec.with_population = false; },
                          "omit the population file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (fixture_cmd->parsed()) {
            eeio::generate_fixture(spec, fixture_out);
            std::cout << "fixture written to " << fixture_out << "\n";
            return kExitOk;
        }
        if (run_cmd->parsed()) {
            eeio::RunConfig config = load_config(run_args);
            eeio::RunManifest manifest = eeio::run_pipeline(config, out_dir(run_args, config));
            for (const auto& cell : manifest.cells) {
                if (cell.status != "ok") {
                    std::cerr << cell.region << "/" << cell.year << " failed: " << cell.error
                              << "\n";
                }
            }
            std::cout << "manifest digest " << manifest.digest() << "\n";
            return manifest.all_ok() ? kExitOk : kExitPartial;
        }
        for (auto& [name, entry] : stage_cmds) {
            if (entry.first->parsed()) {
                eeio::RunConfig config = load_config(entry.second);
                eeio::run_stage(config, out_dir(entry.second, config),
                                eeio::stage_from_string(name));
                return kExitOk;
            }
        }
    } catch (const eeio::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPartial;
    }
    return kExitValidation;
}
