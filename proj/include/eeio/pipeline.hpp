#pragma once

#include "eeio/allocation.hpp"
#include "eeio/calibration.hpp"
#include "eeio/energy_balance.hpp"
#include "eeio/mrio.hpp"
#include "eeio/report.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace eeio {

namespace fs = std::filesystem;

struct RunOptions {
    EnergyUnit unit = EnergyUnit::TJ;
    bool zero_key_fallback = false;
    ExtrapolationMode extrapolation = ExtrapolationMode::Rolling;
    bool include_households = true;
    int jobs = 1;
    ReportFormat report_format = ReportFormat::Csv;
};

// One run = (regions x years) from a single key/value config file. All
// paths are resolved relative to the config file's directory.
struct RunConfig {
    fs::path base_dir;
    int years_start = 0;
    int years_end = 0;
    std::vector<std::string> regions;
    std::optional<std::string> residual_region;  // recovered as world minus members
    std::string world_id = "WORLD";

    fs::path balances_dir;
    fs::path schema_file;
    fs::path concordance_file;
    fs::path splitting_keys_path;  // file (shared) or directory of {region}[_{year}].csv
    fs::path aggregation_map_file;
    std::optional<fs::path> mrio_dir;        // {year}/Z.csv,Y.csv,x.csv
    std::optional<fs::path> reference_dir;   // {region}_{year}.csv accounts
    std::optional<fs::path> population_file;

    RunOptions options;

    std::vector<int> years() const;
    std::vector<std::string> account_regions() const;  // regions + residual
    fs::path balance_file(const std::string& region, int year) const;
    fs::path splitting_key_file(const std::string& region, int year) const;

    static RunConfig load(const fs::path& config_file);
    // Fails fast: every referenced input must exist before any computation.
    void validate() const;
};

struct CellStatus {
    std::string region;  // "*" for year-scoped stages such as footprint
    int year = 0;
    std::string status;  // "ok" or "failed"
    std::string error;
};

struct RunManifest {
    std::string config_hash;
    std::map<std::string, std::string> input_digests;
    std::map<std::string, std::string> output_digests;
    std::map<std::string, std::string> stage_notes;
    std::vector<CellStatus> cells;
    std::vector<std::string> warnings;
    std::map<std::string, double> timings_ms;

    bool all_ok() const;
    // Digest over everything except timings; identical config + inputs
    // give an identical digest.
    std::string digest() const;
    nlohmann::json to_json() const;
};

enum class Stage {
    ExtractUse,
    BuildMap,
    Allocate,
    Aggregate,
    Residual,
    Error,
    Calibrate,
    Extrapolate,
    Footprint,
    Report,
};

Stage stage_from_string(const std::string& s);

// Full run: all stages in order, outputs written atomically, manifest.json
// last. Cell failures are recorded, not thrown.
RunManifest run_pipeline(const RunConfig& config, const fs::path& out_dir);

// One stage, reading its prerequisites from a previous stage's files in
// `out_dir`. Running the stages one by one reproduces the one-shot output
// byte for byte. Errors are thrown.
void run_stage(const RunConfig& config, const fs::path& out_dir, Stage stage);

}  // namespace eeio
