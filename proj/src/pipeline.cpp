#include "eeio/pipeline.hpp"

#include "eeio/csv.hpp"
#include "eeio/errors.hpp"
#include "eeio/io.hpp"
#include "eeio/log.hpp"
#include "eeio/text.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace eeio {

namespace {

// ---------------------------------------------------------------------
// config file: a flat key/value document (strings, ints, bools, string
// arrays, [section] prefixes) — the TOML subset the run config needs
// ---------------------------------------------------------------------

struct ConfigValue {
    enum class Kind { String, Integer, Boolean, StringArray };
    Kind kind = Kind::String;
    std::string str;
    long long integer = 0;
    bool boolean = false;
    std::vector<std::string> array;
};

std::string strip_comment(const std::string& line)
{
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') {
            in_string = !in_string;
        } else if (line[i] == '#' && !in_string) {
            return line.substr(0, i);
        }
    }
    return line;
}

ConfigValue parse_config_value(const std::string& raw, const std::string& context)
{
    ConfigValue v;
    std::string t = trim(raw);
    if (t.empty()) {
        throw ConfigError(context + ": empty value");
    }
    if (t.front() == '"') {
        if (t.size() < 2 || t.back() != '"') {
            throw ConfigError(context + ": unterminated string");
        }
        v.kind = ConfigValue::Kind::String;
        v.str = t.substr(1, t.size() - 2);
        return v;
    }
    if (t.front() == '[') {
        if (t.back() != ']') {
            throw ConfigError(context + ": unterminated array");
        }
        v.kind = ConfigValue::Kind::StringArray;
        std::string inner = trim(t.substr(1, t.size() - 2));
        if (!inner.empty()) {
            for (const auto& item : split(inner, ',')) {
                std::string e = trim(item);
                if (e.size() < 2 || e.front() != '"' || e.back() != '"') {
                    throw ConfigError(context + ": array elements must be quoted strings");
                }
                v.array.push_back(e.substr(1, e.size() - 2));
            }
        }
        return v;
    }
    if (t == "true" || t == "false") {
        v.kind = ConfigValue::Kind::Boolean;
        v.boolean = t == "true";
        return v;
    }
    if (auto i = parse_int(t)) {
        v.kind = ConfigValue::Kind::Integer;
        v.integer = *i;
        return v;
    }
    throw ConfigError(context + ": cannot parse value '" + t + "'");
}

std::map<std::string, ConfigValue> parse_config_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    std::map<std::string, ConfigValue> out;
    std::string line;
    std::string prefix;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(strip_comment(line));
        if (t.empty()) {
            continue;
        }
        std::string context = path.filename().string() + " line " + std::to_string(line_no);
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw ConfigError(context + ": malformed section header");
            }
            prefix = trim(t.substr(1, t.size() - 2)) + ".";
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(context + ": expected 'key = value'");
        }
        std::string key = prefix + trim(t.substr(0, eq));
        if (out.count(key)) {
            throw ConfigError(context + ": duplicate key '" + key + "'");
        }
        out.emplace(key, parse_config_value(t.substr(eq + 1), context));
    }
    return out;
}

class ConfigReader {
public:
    ConfigReader(std::map<std::string, ConfigValue> values, std::string source)
        : values_(std::move(values)), source_(std::move(source)) {}

    std::optional<std::string> get_string(const std::string& key)
    {
        auto v = take(key);
        if (!v) return std::nullopt;
        if (v->kind != ConfigValue::Kind::String) {
            throw ConfigError(source_ + ": '" + key + "' must be a string");
        }
        return v->str;
    }
    std::optional<long long> get_int(const std::string& key)
    {
        auto v = take(key);
        if (!v) return std::nullopt;
        if (v->kind != ConfigValue::Kind::Integer) {
            throw ConfigError(source_ + ": '" + key + "' must be an integer");
        }
        return v->integer;
    }
    std::optional<bool> get_bool(const std::string& key)
    {
        auto v = take(key);
        if (!v) return std::nullopt;
        if (v->kind != ConfigValue::Kind::Boolean) {
            throw ConfigError(source_ + ": '" + key + "' must be true or false");
        }
        return v->boolean;
    }
    std::optional<std::vector<std::string>> get_array(const std::string& key)
    {
        auto v = take(key);
        if (!v) return std::nullopt;
        if (v->kind != ConfigValue::Kind::StringArray) {
            throw ConfigError(source_ + ": '" + key + "' must be an array of strings");
        }
        return v->array;
    }
    std::string require_string(const std::string& key)
    {
        auto v = get_string(key);
        if (!v) throw ConfigError(source_ + ": missing required key '" + key + "'");
        return *v;
    }
    long long require_int(const std::string& key)
    {
        auto v = get_int(key);
        if (!v) throw ConfigError(source_ + ": missing required key '" + key + "'");
        return *v;
    }
    void finish() const
    {
        if (!values_.empty()) {
            throw ConfigError(source_ + ": unknown key '" + values_.begin()->first + "'");
        }
    }

private:
    std::optional<ConfigValue> take(const std::string& key)
    {
        auto it = values_.find(key);
        if (it == values_.end()) {
            return std::nullopt;
        }
        ConfigValue v = it->second;
        values_.erase(it);
        return v;
    }
    std::map<std::string, ConfigValue> values_;
    std::string source_;
};

void require_exists(const fs::path& p, const std::string& what)
{
    if (!fs::exists(p)) {
        throw ConfigError(what + " not found: " + p.string());
    }
}

// Bounded worker pool over an index range; exceptions must be handled
// inside `fn` (per-cell failures are recorded, not thrown).
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn)
{
    int workers = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            while (true) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) {
                    break;
                }
                fn(i);
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
}

}  // namespace

// ---------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------

std::vector<int> RunConfig::years() const
{
    std::vector<int> out;
    for (int y = years_start; y <= years_end; ++y) {
        out.push_back(y);
    }
    return out;
}

std::vector<std::string> RunConfig::account_regions() const
{
    std::vector<std::string> out = regions;
    if (residual_region) {
        out.push_back(*residual_region);
    }
    return out;
}

fs::path RunConfig::balance_file(const std::string& region, int year) const
{
    return balances_dir / (region + "_" + std::to_string(year) + ".csv");
}

fs::path RunConfig::splitting_key_file(const std::string& region, int year) const
{
    if (fs::is_directory(splitting_keys_path)) {
        fs::path per_year = splitting_keys_path / (region + "_" + std::to_string(year) + ".csv");
        if (fs::exists(per_year)) {
            return per_year;
        }
        return splitting_keys_path / (region + ".csv");
    }
    return splitting_keys_path;
}

RunConfig RunConfig::load(const fs::path& config_file)
{
    ConfigReader reader(parse_config_file(config_file), config_file.filename().string());

    RunConfig cfg;
    cfg.base_dir = fs::absolute(config_file).parent_path();
    cfg.years_start = static_cast<int>(reader.require_int("years_start"));
    cfg.years_end = static_cast<int>(reader.require_int("years_end"));
    auto regions = reader.get_array("regions");
    if (!regions || regions->empty()) {
        throw ConfigError("config: 'regions' must list at least one region");
    }
    cfg.regions = *regions;
    cfg.residual_region = reader.get_string("residual_region");
    if (auto w = reader.get_string("world_id")) {
        cfg.world_id = *w;
    }

    auto path_of = [&](const std::string& key) { return cfg.base_dir / reader.require_string("paths." + key); };
    cfg.balances_dir = path_of("balances");
    cfg.schema_file = path_of("schema");
    cfg.concordance_file = path_of("concordance");
    cfg.splitting_keys_path = path_of("splitting_keys");
    cfg.aggregation_map_file = path_of("aggregation_map");
    if (auto p = reader.get_string("paths.mrio")) {
        cfg.mrio_dir = cfg.base_dir / *p;
    }
    if (auto p = reader.get_string("paths.reference_accounts")) {
        cfg.reference_dir = cfg.base_dir / *p;
    }
    if (auto p = reader.get_string("paths.population")) {
        cfg.population_file = cfg.base_dir / *p;
    }

    if (auto u = reader.get_string("unit")) {
        cfg.options.unit = energy_unit_from_string(*u);
    }
    if (auto b = reader.get_bool("zero_key_fallback")) {
        cfg.options.zero_key_fallback = *b;
    }
    if (auto m = reader.get_string("extrapolation")) {
        cfg.options.extrapolation = extrapolation_mode_from_string(*m);
    }
    if (auto h = reader.get_string("households")) {
        if (*h == "include") {
            cfg.options.include_households = true;
        } else if (*h == "exclude") {
            cfg.options.include_households = false;
        } else {
            throw ConfigError("config: 'households' must be include or exclude");
        }
    }
    if (auto j = reader.get_int("jobs")) {
        cfg.options.jobs = static_cast<int>(*j);
    }
    if (auto f = reader.get_string("report_format")) {
        cfg.options.report_format = report_format_from_string(*f);
    }
    reader.finish();
    return cfg;
}

void RunConfig::validate() const
{
    if (years_start > years_end) {
        throw ConfigError("config: years_start is after years_end");
    }
    std::set<std::string> unique(regions.begin(), regions.end());
    if (unique.size() != regions.size()) {
        throw ConfigError("config: duplicate region");
    }
    if (residual_region && unique.count(*residual_region)) {
        throw ConfigError("config: residual region also listed as an explicit region");
    }
    if (options.jobs < 1) {
        throw ConfigError("config: jobs must be >= 1");
    }

    require_exists(balances_dir, "balances directory");
    require_exists(schema_file, "schema file");
    require_exists(concordance_file, "concordance file");
    require_exists(splitting_keys_path, "splitting keys");
    require_exists(aggregation_map_file, "aggregation map");

    std::vector<std::string> balance_regions = regions;
    if (residual_region) {
        balance_regions.push_back(world_id);
    }
    for (const auto& region : balance_regions) {
        for (int year : years()) {
            require_exists(balance_file(region, year), "balance for " + region + "/" + std::to_string(year));
            require_exists(splitting_key_file(region, year),
                           "splitting key for " + region + "/" + std::to_string(year));
        }
    }
    if (mrio_dir) {
        for (int year : years()) {
            fs::path d = *mrio_dir / std::to_string(year);
            require_exists(d / "Z.csv", "MRIO Z for " + std::to_string(year));
            require_exists(d / "Y.csv", "MRIO Y for " + std::to_string(year));
            require_exists(d / "x.csv", "MRIO x for " + std::to_string(year));
        }
    }
    if (reference_dir) {
        require_exists(*reference_dir, "reference accounts directory");
    }
    if (population_file) {
        require_exists(*population_file, "population file");
    }
}

// ---------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------

bool RunManifest::all_ok() const
{
    return std::all_of(cells.begin(), cells.end(),
                       [](const CellStatus& c) { return c.status == "ok"; });
}

std::string RunManifest::digest() const
{
    std::string canon = config_hash + "\n";
    for (const auto& [k, v] : input_digests) {
        canon += "in " + k + " " + v + "\n";
    }
    for (const auto& [k, v] : output_digests) {
        canon += "out " + k + " " + v + "\n";
    }
    for (const auto& [k, v] : stage_notes) {
        canon += "note " + k + " " + v + "\n";
    }
    for (const auto& c : cells) {
        canon += "cell " + c.region + " " + std::to_string(c.year) + " " + c.status + " " +
                 c.error + "\n";
    }
    for (const auto& w : warnings) {
        canon += "warn " + w + "\n";
    }
    return hex64(fnv1a64(canon));
}

nlohmann::json RunManifest::to_json() const
{
    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["digest"] = digest();
    j["inputs"] = input_digests;
    j["outputs"] = output_digests;
    j["stage_notes"] = stage_notes;
    nlohmann::json cells_json = nlohmann::json::array();
    for (const auto& c : cells) {
        cells_json.push_back({{"region", c.region},
                              {"year", c.year},
                              {"status", c.status},
                              {"error", c.error}});
    }
    j["cells"] = cells_json;
    j["warnings"] = warnings;
    j["timings_ms"] = timings_ms;
    return j;
}

Stage stage_from_string(const std::string& s)
{
    if (s == "extract-use") return Stage::ExtractUse;
    if (s == "build-map") return Stage::BuildMap;
    if (s == "allocate") return Stage::Allocate;
    if (s == "aggregate") return Stage::Aggregate;
    if (s == "residual") return Stage::Residual;
    if (s == "error") return Stage::Error;
    if (s == "calibrate") return Stage::Calibrate;
    if (s == "extrapolate") return Stage::Extrapolate;
    if (s == "footprint") return Stage::Footprint;
    if (s == "report") return Stage::Report;
    throw ConfigError("unknown stage '" + s + "'");
}

// ---------------------------------------------------------------------
// pipeline state
// ---------------------------------------------------------------------

namespace {

using CellKey = std::pair<std::string, int>;

std::string cell_name(const CellKey& key)
{
    return key.first + "_" + std::to_string(key.second);
}

struct Pipeline {
    const RunConfig& config;
    fs::path out;

    BalanceSchema schema;
    ConcordanceMatrix concordance;
    ProductAggregationMap agg_map;

    std::map<CellKey, UseTable> use_tables;            // regions + world
    std::map<CellKey, MappingMatrix> mappings;         // regions + world
    std::map<CellKey, EnergyAccount> raw_accounts;     // regions + world
    std::map<CellKey, EnergyAccount> agg_accounts;     // regions + world + residual
    std::map<CellKey, EnergyAccount> final_accounts;   // regions + residual
    std::map<CellKey, RelativeErrorReport> error_reports;
    std::vector<CalibrationFactors> factors;           // sorted by (region, year)
    std::map<int, FootprintResult> footprints;
    bool calibration_ran = false;

    std::map<CellKey, std::string> failures;  // first error per cell
    std::map<std::string, std::string> stage_notes;
    std::vector<std::string> warnings;
    std::mutex mutex;

    explicit Pipeline(const RunConfig& cfg, fs::path out_dir)
        : config(cfg), out(std::move(out_dir))
    {
        {
            std::ifstream in(config.schema_file);
            schema = BalanceSchema::from_csv(in, config.schema_file.filename().string());
            schema.unit = config.options.unit;
        }
        {
            std::ifstream in(config.concordance_file);
            concordance =
                ConcordanceMatrix::from_csv(in, config.concordance_file.filename().string());
        }
        {
            std::ifstream in(config.aggregation_map_file);
            agg_map = ProductAggregationMap::from_csv(
                in, config.aggregation_map_file.filename().string());
        }
    }

    std::vector<std::string> phase1_regions() const
    {
        std::vector<std::string> out_regions = config.regions;
        if (config.residual_region) {
            out_regions.push_back(config.world_id);
        }
        return out_regions;
    }

    std::vector<CellKey> phase1_cells() const
    {
        std::vector<CellKey> cells;
        for (const auto& region : phase1_regions()) {
            for (int year : config.years()) {
                cells.emplace_back(region, year);
            }
        }
        return cells;
    }

    bool failed(const CellKey& key)
    {
        std::lock_guard<std::mutex> lock(mutex);
        return failures.count(key) > 0;
    }

    void fail(const CellKey& key, const std::string& stage, const std::string& message)
    {
        std::lock_guard<std::mutex> lock(mutex);
        failures.emplace(key, stage + ": " + message);
        log::error(cell_name(key) + " " + stage + ": " + message);
    }

    void add_warnings(const CellKey& key, const std::vector<std::string>& ws)
    {
        if (ws.empty()) {
            return;
        }
        std::lock_guard<std::mutex> lock(mutex);
        for (const auto& w : ws) {
            warnings.push_back(cell_name(key) + ": " + w);
        }
    }

    void note(const std::string& key, const std::string& value)
    {
        std::lock_guard<std::mutex> lock(mutex);
        stage_notes[key] = value;
    }

    // ------------------------------------------------------------------
    // stages (compute)
    // ------------------------------------------------------------------

    void stage_extract_use()
    {
        auto cells = phase1_cells();
        parallel_for(cells.size(), config.options.jobs, [&](std::size_t i) {
            const CellKey& key = cells[i];
            try {
                std::ifstream in(config.balance_file(key.first, key.second));
                EnergyBalanceTable balance =
                    parse_balance(in, schema, key.first, key.second,
                                  config.balance_file(key.first, key.second).filename().string());
                UseTable use = extract_use_table(balance);
                add_warnings(key, use.warnings);
                std::lock_guard<std::mutex> lock(mutex);
                use_tables.emplace(key, std::move(use));
            } catch (const std::exception& e) {
                fail(key, "extract-use", e.what());
            }
        });
    }

    void stage_build_map()
    {
        auto cells = phase1_cells();
        parallel_for(cells.size(), config.options.jobs, [&](std::size_t i) {
            const CellKey& key = cells[i];
            try {
                std::ifstream in(config.splitting_key_file(key.first, key.second));
                SplittingKey key_data = SplittingKey::from_csv(
                    in, config.splitting_key_file(key.first, key.second).filename().string());
                BuildMappingOptions opts;
                opts.zero_key_fallback = config.options.zero_key_fallback;
                MappingMatrix mapping = build_mapping(concordance, key_data, opts);
                std::lock_guard<std::mutex> lock(mutex);
                mappings.emplace(key, std::move(mapping));
            } catch (const std::exception& e) {
                fail(key, "build-map", e.what());
            }
        });
    }

    void stage_allocate()
    {
        auto cells = phase1_cells();
        parallel_for(cells.size(), config.options.jobs, [&](std::size_t i) {
            const CellKey& key = cells[i];
            if (failed(key)) {
                return;
            }
            try {
                const UseTable& use = use_tables.at(key);
                const MappingMatrix& mapping = mappings.at(key);
                UseTable aligned = align_flows(use, mapping.flows);
                EnergyAccount raw = allocate(aligned, mapping);
                std::lock_guard<std::mutex> lock(mutex);
                raw_accounts.emplace(key, std::move(raw));
            } catch (const std::exception& e) {
                fail(key, "allocate", e.what());
            }
        });
    }

    void stage_aggregate()
    {
        auto cells = phase1_cells();
        parallel_for(cells.size(), config.options.jobs, [&](std::size_t i) {
            const CellKey& key = cells[i];
            if (failed(key)) {
                return;
            }
            try {
                EnergyAccount agg = aggregate_products(raw_accounts.at(key), agg_map);
                std::lock_guard<std::mutex> lock(mutex);
                agg_accounts.emplace(key, std::move(agg));
            } catch (const std::exception& e) {
                fail(key, "aggregate", e.what());
            }
        });
    }

    void stage_residual()
    {
        if (!config.residual_region) {
            note("residual", "skipped: no residual region configured");
            return;
        }
        for (int year : config.years()) {
            CellKey res_key(*config.residual_region, year);
            CellKey world_key(config.world_id, year);
            try {
                auto world_it = agg_accounts.find(world_key);
                if (world_it == agg_accounts.end()) {
                    throw Error("world account unavailable");
                }
                std::vector<EnergyAccount> members;
                for (const auto& region : config.regions) {
                    auto it = agg_accounts.find(CellKey(region, year));
                    if (it == agg_accounts.end()) {
                        throw Error("member account " + region + " unavailable");
                    }
                    members.push_back(it->second);
                }
                EnergyAccount res =
                    residual_region(world_it->second, members, *config.residual_region);
                add_warnings(res_key, res.warnings);
                agg_accounts.emplace(res_key, std::move(res));
            } catch (const std::exception& e) {
                fail(res_key, "residual", e.what());
            }
        }
    }

    std::optional<EnergyAccount> load_reference(const std::string& region, int year)
    {
        if (!config.reference_dir) {
            return std::nullopt;
        }
        fs::path p = *config.reference_dir / (region + "_" + std::to_string(year) + ".csv");
        if (!fs::exists(p)) {
            return std::nullopt;
        }
        return io::read_account(p);
    }

    void stage_error()
    {
        if (!config.reference_dir) {
            note("error", "skipped: reference accounts not configured");
            return;
        }
        auto regions = config.account_regions();
        parallel_for(regions.size(), config.options.jobs, [&](std::size_t i) {
            const std::string& region = regions[i];
            for (int year : config.years()) {
                CellKey key(region, year);
                if (failed(key)) {
                    continue;
                }
                try {
                    auto it = agg_accounts.find(key);
                    if (it == agg_accounts.end()) {
                        continue;  // residual may be unconfigured for this cell
                    }
                    auto reference = load_reference(region, year);
                    if (!reference) {
                        continue;
                    }
                    EnergyAccount ref = reorder_products(*reference, it->second.products);
                    RelativeErrorReport report = relative_error(it->second, ref);
                    std::lock_guard<std::mutex> lock(mutex);
                    error_reports.emplace(key, std::move(report));
                } catch (const std::exception& e) {
                    fail(key, "error", e.what());
                }
            }
        });
    }

    // Calibrates every year that has a reference account; years without
    // any usable reference keep the aggregated account as final.
    void stage_calibrate()
    {
        if (!config.reference_dir) {
            note("calibration", "skipped: reference accounts not configured");
            for (const auto& [key, acct] : agg_accounts) {
                if (key.first != config.world_id && !failed(key)) {
                    final_accounts.emplace(key, acct);
                }
            }
            return;
        }
        auto regions = config.account_regions();
        parallel_for(regions.size(), config.options.jobs, [&](std::size_t i) {
            const std::string& region = regions[i];
            for (int year : config.years()) {
                CellKey key(region, year);
                if (failed(key)) {
                    continue;
                }
                auto it = agg_accounts.find(key);
                if (it == agg_accounts.end()) {
                    continue;
                }
                try {
                    auto reference = load_reference(region, year);
                    if (!reference) {
                        continue;  // extrapolation or plain copy handles it later
                    }
                    EnergyAccount ref = reorder_products(*reference, it->second.products);
                    CalibrationFactors f = calibration_factors(it->second, ref);
                    add_warnings(key, f.flagged);
                    EnergyAccount calibrated = apply_calibration(it->second, f);
                    std::lock_guard<std::mutex> lock(mutex);
                    calibration_ran = true;
                    factors.push_back(std::move(f));
                    final_accounts.emplace(key, std::move(calibrated));
                } catch (const std::exception& e) {
                    fail(key, "calibrate", e.what());
                }
            }
        });
        std::sort(factors.begin(), factors.end(), [](const auto& a, const auto& b) {
            return std::tie(a.country, a.year) < std::tie(b.country, b.year);
        });
    }

    // Years beyond a region's last reference year get factors from the
    // moving average; anything still without factors stays aggregated.
    void stage_extrapolate()
    {
        if (config.reference_dir) {
            auto regions = config.account_regions();
            for (const auto& region : regions) {
                std::vector<CalibrationFactors> history;
                for (const auto& f : factors) {
                    if (f.country == region && f.provenance == FactorProvenance::Overlap) {
                        history.push_back(f);
                    }
                }
                if (history.empty()) {
                    continue;
                }
                std::vector<int> targets;
                for (int year : config.years()) {
                    CellKey key(region, year);
                    if (year > history.back().year && !failed(key) && agg_accounts.count(key) &&
                        !final_accounts.count(key)) {
                        targets.push_back(year);
                    }
                }
                if (targets.empty()) {
                    continue;
                }
                try {
                    auto extrapolated =
                        extrapolate_factors(history, targets, config.options.extrapolation);
                    for (auto& f : extrapolated) {
                        CellKey key(region, f.year);
                        if (f.short_window) {
                            add_warnings(key, {"extrapolation window shorter than 5 years"});
                        }
                        final_accounts.emplace(
                            key, apply_calibration(agg_accounts.at(key), f));
                        factors.push_back(std::move(f));
                    }
                } catch (const std::exception& e) {
                    for (int year : targets) {
                        fail(CellKey(region, year), "extrapolate", e.what());
                    }
                }
            }
            std::sort(factors.begin(), factors.end(), [](const auto& a, const auto& b) {
                return std::tie(a.country, a.year) < std::tie(b.country, b.year);
            });
        }
        // whatever has no final account yet ships at the aggregated stage
        for (const auto& [key, acct] : agg_accounts) {
            if (key.first == config.world_id || failed(key) || final_accounts.count(key)) {
                continue;
            }
            final_accounts.emplace(key, acct);
            if (config.reference_dir) {
                note("calibration:" + cell_name(key),
                     "no reference account and no factor history; left aggregated");
            }
        }
    }

    void stage_footprint()
    {
        if (!config.mrio_dir) {
            note("footprint", "skipped: mrio not configured");
            return;
        }
        std::map<std::string, std::map<int, double>> population;
        if (config.population_file) {
            population = io::read_population(*config.population_file);
        }

        auto years = config.years();
        parallel_for(years.size(), config.options.jobs, [&](std::size_t i) {
            int year = years[i];
            CellKey year_key("*", year);
            try {
                io::MrioInput input = io::read_mrio_dir(*config.mrio_dir / std::to_string(year));
                AssemblyReport assembly;
                MrioSystem system =
                    assemble_system(input.Z, input.Y, input.x, input.regions, input.sectors,
                                    input.demand_categories, &assembly);
                add_warnings(year_key, assembly.warnings);

                std::map<std::string, EnergyAccount> accounts;
                for (const auto& region : config.account_regions()) {
                    auto it = final_accounts.find(CellKey(region, year));
                    if (it == final_accounts.end()) {
                        throw Error("no final account for region " + region);
                    }
                    accounts.emplace(region, it->second);
                }
                IntensityVector intensity = compute_intensity(accounts, system);
                add_warnings(year_key, intensity.warnings);

                std::optional<Eigen::VectorXd> pop;
                std::string missing_pop;
                if (config.population_file) {
                    Eigen::VectorXd v(system.n_regions());
                    bool complete = true;
                    for (Eigen::Index r = 0; r < system.n_regions(); ++r) {
                        const auto& region = system.regions[static_cast<std::size_t>(r)];
                        auto rit = population.find(region);
                        auto yit = rit == population.end() ? std::map<int, double>::iterator()
                                                           : rit->second.find(year);
                        if (rit == population.end() || yit == rit->second.end()) {
                            complete = false;
                            missing_pop = region;
                            break;
                        }
                        v(r) = yit->second;
                    }
                    if (complete) {
                        pop = std::move(v);
                    } else {
                        note("per_capita:" + std::to_string(year),
                             "skipped: population missing for region " + missing_pop);
                    }
                }

                FootprintOptions opts;
                opts.include_households = config.options.include_households;
                FootprintResult result = footprint(system, intensity, pop, opts);
                result.year = year;
                std::lock_guard<std::mutex> lock(mutex);
                footprints.emplace(year, std::move(result));
            } catch (const std::exception& e) {
                fail(year_key, "footprint", e.what());
            }
        });
    }

    // ------------------------------------------------------------------
    // stage outputs
    // ------------------------------------------------------------------

    void write_use_tables()
    {
        for (const auto& [key, use] : use_tables) {
            io::write_use_table(out / "use" / (cell_name(key) + ".csv"), use);
        }
    }

    void write_mappings()
    {
        for (const auto& [key, mapping] : mappings) {
            csv::write_file_atomic(out / "maps" / (cell_name(key) + ".csv"), mapping.to_csv());
        }
    }

    void write_accounts(const std::map<CellKey, EnergyAccount>& accounts, const std::string& dir)
    {
        for (const auto& [key, acct] : accounts) {
            io::write_account(out / dir / (cell_name(key) + ".csv"), acct);
        }
    }

    void write_error_reports()
    {
        if (error_reports.empty()) {
            return;
        }
        csv::Writer totals;
        totals.row({"country", "year", "epsilon"});
        csv::Writer by_product;
        by_product.row({"country", "year", "product", "epsilon"});
        for (const auto& [key, report] : error_reports) {
            totals.row({report.country, std::to_string(report.year),
                        report.epsilon ? format_double(*report.epsilon) : "nan"});
            for (std::size_t p = 0; p < report.products.size(); ++p) {
                by_product.row({report.country, std::to_string(report.year), report.products[p],
                                format_double(report.by_product(static_cast<Eigen::Index>(p)))});
            }
        }
        csv::write_file_atomic(out / "epsilon.csv", totals.str());
        csv::write_file_atomic(out / "epsilon_by_product.csv", by_product.str());
    }

    void write_factors()
    {
        if (!factors.empty()) {
            csv::write_file_atomic(out / "factors.csv", io::factors_to_csv(factors));
        }
    }

    void write_footprints()
    {
        if (footprints.empty()) {
            return;
        }
        csv::Writer w;
        w.row({"region", "year", "pba_tj", "cba_tj", "beet_tj", "pba_gj_pc", "cba_gj_pc"});
        csv::Writer sectors;
        sectors.row({"region", "year", "origin_region", "origin_sector", "indicator", "value_tj"});
        for (const auto& [year, fp] : footprints) {
            const Eigen::Index n = static_cast<Eigen::Index>(fp.regions.size());
            const Eigen::Index n_sectors = static_cast<Eigen::Index>(fp.sectors.size());
            for (Eigen::Index r = 0; r < n; ++r) {
                const std::string& region = fp.regions[static_cast<std::size_t>(r)];
                w.row({region, std::to_string(year), format_double(fp.pba(r)),
                       format_double(fp.cba(r)), format_double(fp.beet(r)),
                       fp.pba_gj_per_capita ? format_double((*fp.pba_gj_per_capita)(r)) : "",
                       fp.cba_gj_per_capita ? format_double((*fp.cba_gj_per_capita)(r)) : ""});

                for (Eigen::Index i = 0; i < fp.pba_by_sector.size(); ++i) {
                    double v = fp.cba_by_origin(i, r);
                    if (v != 0.0) {
                        sectors.row({region, std::to_string(year),
                                     fp.regions[static_cast<std::size_t>(i / n_sectors)],
                                     fp.sectors[static_cast<std::size_t>(i % n_sectors)], "cba",
                                     format_double(v)});
                    }
                }
                if (fp.household_direct.size() == n && fp.household_direct(r) != 0.0) {
                    sectors.row({region, std::to_string(year), region, "HH", "cba",
                                 format_double(fp.household_direct(r))});
                }
            }
            for (Eigen::Index i = 0; i < fp.pba_by_sector.size(); ++i) {
                const std::string& region = fp.regions[static_cast<std::size_t>(i / n_sectors)];
                if (fp.pba_by_sector(i) != 0.0) {
                    sectors.row({region, std::to_string(year), region,
                                 fp.sectors[static_cast<std::size_t>(i % n_sectors)], "pba",
                                 format_double(fp.pba_by_sector(i))});
                }
            }
        }
        csv::write_file_atomic(out / "footprints.csv", w.str());
        csv::write_file_atomic(out / "footprint_sectors.csv", sectors.str());
    }

    void stage_report()
    {
        ReportInputs inputs;
        inputs.calibration_ran = calibration_ran;
        for (const auto& [year, fp] : footprints) {
            inputs.footprints.push_back(fp);
        }
        for (const auto& [key, report] : error_reports) {
            inputs.errors.push_back(report);
        }
        if (inputs.footprints.empty() && inputs.errors.empty()) {
            note("report", "skipped: no results to report");
            return;
        }
        auto notes = write_report(inputs, out / "report", config.options.report_format);
        std::string joined;
        for (const auto& n : notes) {
            joined += (joined.empty() ? "" : "; ") + n;
        }
        if (!joined.empty()) {
            note("report", joined);
        }
    }

    // ------------------------------------------------------------------
    // staged-mode loaders
    // ------------------------------------------------------------------

    void load_use_tables()
    {
        for (const CellKey& key : phase1_cells()) {
            fs::path p = out / "use" / (cell_name(key) + ".csv");
            if (fs::exists(p)) {
                use_tables.emplace(key, io::read_use_table(p));
            }
        }
    }

    void load_mappings()
    {
        for (const CellKey& key : phase1_cells()) {
            fs::path p = out / "maps" / (cell_name(key) + ".csv");
            if (fs::exists(p)) {
                std::ifstream in(p);
                mappings.emplace(key, MappingMatrix::from_csv(in, p.filename().string()));
            }
        }
    }

    void load_accounts(std::map<CellKey, EnergyAccount>& target, const std::string& dir,
                       const std::vector<std::string>& regions)
    {
        for (const auto& region : regions) {
            for (int year : config.years()) {
                fs::path p = out / dir / (region + "_" + std::to_string(year) + ".csv");
                if (fs::exists(p)) {
                    target.emplace(CellKey(region, year), io::read_account(p));
                }
            }
        }
    }

    void load_factors()
    {
        fs::path p = out / "factors.csv";
        if (fs::exists(p)) {
            factors = io::factors_from_csv(p);
            calibration_ran = true;
        }
    }

    void load_error_reports()
    {
        fs::path totals_path = out / "epsilon.csv";
        fs::path by_product_path = out / "epsilon_by_product.csv";
        if (!fs::exists(totals_path)) {
            return;
        }
        auto totals = csv::read_file(totals_path);
        for (std::size_t i = 1; i < totals.size(); ++i) {
            const auto& r = totals[i];
            RelativeErrorReport report;
            report.country = r.fields.at(0);
            report.year = static_cast<int>(*parse_int(r.fields.at(1)));
            auto eps = parse_double(r.fields.at(2));
            if (eps && !std::isnan(*eps)) {
                report.epsilon = *eps;
            }
            error_reports.emplace(CellKey(report.country, report.year), std::move(report));
        }
        auto rows = csv::read_file(by_product_path);
        std::map<CellKey, std::vector<std::pair<std::string, double>>> grouped;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const auto& r = rows[i];
            CellKey key(r.fields.at(0), static_cast<int>(*parse_int(r.fields.at(1))));
            grouped[key].emplace_back(r.fields.at(2), *parse_double(r.fields.at(3)));
        }
        for (auto& [key, entries] : grouped) {
            auto& report = error_reports.at(key);
            report.by_product.resize(static_cast<Eigen::Index>(entries.size()));
            for (std::size_t p = 0; p < entries.size(); ++p) {
                report.products.push_back(entries[p].first);
                report.by_product(static_cast<Eigen::Index>(p)) = entries[p].second;
                if (std::isnan(entries[p].second)) {
                    report.undefined_products.push_back(entries[p].first);
                }
            }
        }
    }

    void load_footprints()
    {
        fs::path p = out / "footprints.csv";
        if (!fs::exists(p)) {
            return;
        }
        auto rows = csv::read_file(p);
        std::map<int, std::vector<csv::Row>> by_year;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            by_year[static_cast<int>(*parse_int(rows[i].fields.at(1)))].push_back(rows[i]);
        }
        for (const auto& [year, group] : by_year) {
            FootprintResult fp;
            fp.year = year;
            const Eigen::Index n = static_cast<Eigen::Index>(group.size());
            fp.pba.resize(n);
            fp.cba.resize(n);
            fp.beet.resize(n);
            Eigen::VectorXd pba_pc(n), cba_pc(n);
            bool has_pc = true;
            for (Eigen::Index r = 0; r < n; ++r) {
                const auto& fields = group[static_cast<std::size_t>(r)].fields;
                fp.regions.push_back(fields.at(0));
                fp.pba(r) = *parse_double(fields.at(2));
                fp.cba(r) = *parse_double(fields.at(3));
                fp.beet(r) = *parse_double(fields.at(4));
                if (fields.at(5).empty()) {
                    has_pc = false;
                } else {
                    pba_pc(r) = *parse_double(fields.at(5));
                    cba_pc(r) = *parse_double(fields.at(6));
                }
            }
            fp.household_direct = Eigen::VectorXd::Zero(n);
            fp.cba_by_origin = Eigen::MatrixXd::Zero(0, 0);
            fp.pba_by_sector = Eigen::VectorXd::Zero(0);
            if (has_pc) {
                fp.pba_gj_per_capita = pba_pc;
                fp.cba_gj_per_capita = cba_pc;
            }
            footprints.emplace(year, std::move(fp));
        }
    }
};

}  // namespace

RunManifest run_pipeline(const RunConfig& config, const fs::path& out_dir)
{
    config.validate();
    fs::create_directories(out_dir);

    RunManifest manifest;

    // input digests
    auto digest_file = [&](const fs::path& p) {
        std::string rel = fs::relative(p, config.base_dir).generic_string();
        manifest.input_digests[rel] = hex64(fnv1a64(csv::read_file_bytes(p)));
    };
    digest_file(config.schema_file);
    digest_file(config.concordance_file);
    digest_file(config.aggregation_map_file);
    if (!fs::is_directory(config.splitting_keys_path)) {
        digest_file(config.splitting_keys_path);
    }
    std::vector<std::string> balance_regions = config.regions;
    if (config.residual_region) {
        balance_regions.push_back(config.world_id);
    }
    for (const auto& region : balance_regions) {
        for (int year : config.years()) {
            digest_file(config.balance_file(region, year));
            if (fs::is_directory(config.splitting_keys_path)) {
                digest_file(config.splitting_key_file(region, year));
            }
        }
    }
    if (config.mrio_dir) {
        for (int year : config.years()) {
            for (const char* name : {"Z.csv", "Y.csv", "x.csv"}) {
                digest_file(*config.mrio_dir / std::to_string(year) / name);
            }
        }
    }
    if (config.reference_dir) {
        for (const auto& region : config.account_regions()) {
            for (int year : config.years()) {
                fs::path p = *config.reference_dir / (region + "_" + std::to_string(year) + ".csv");
                if (fs::exists(p)) {
                    digest_file(p);
                }
            }
        }
    }
    if (config.population_file) {
        digest_file(*config.population_file);
    }
    {
        std::string canon;
        for (const auto& [k, v] : manifest.input_digests) {
            canon += k + "=" + v + "\n";
        }
        manifest.config_hash = hex64(fnv1a64(canon));
    }

    Pipeline p(config, out_dir);
    p.note("options", "unit=" + to_string(config.options.unit) +
                          " households=" +
                          std::string(config.options.include_households ? "include" : "exclude") +
                          " extrapolation=" + to_string(config.options.extrapolation) +
                          " zero_key_fallback=" +
                          std::string(config.options.zero_key_fallback ? "on" : "off"));
    auto timed = [&](const char* name, auto&& fn) {
        auto start = std::chrono::steady_clock::now();
        fn();
        auto elapsed = std::chrono::steady_clock::now() - start;
        manifest.timings_ms[name] =
            std::chrono::duration<double, std::milli>(elapsed).count();
    };

    timed("extract_use", [&] { p.stage_extract_use(); });
    timed("build_map", [&] { p.stage_build_map(); });
    timed("allocate", [&] { p.stage_allocate(); });
    timed("aggregate", [&] { p.stage_aggregate(); });
    timed("residual", [&] { p.stage_residual(); });
    timed("error", [&] { p.stage_error(); });
    timed("calibrate", [&] { p.stage_calibrate(); });
    timed("extrapolate", [&] { p.stage_extrapolate(); });
    timed("footprint", [&] { p.stage_footprint(); });

    timed("write", [&] {
        p.write_use_tables();
        p.write_mappings();
        p.write_accounts(p.raw_accounts, "accounts_raw");
        p.write_accounts(p.agg_accounts, "accounts_agg");
        p.write_accounts(p.final_accounts, "accounts");
        p.write_error_reports();
        p.write_factors();
        p.write_footprints();
        p.stage_report();
    });

    // collect status per cell
    for (const CellKey& key : p.phase1_cells()) {
        auto it = p.failures.find(key);
        manifest.cells.push_back(CellStatus{key.first, key.second,
                                            it == p.failures.end() ? "ok" : "failed",
                                            it == p.failures.end() ? "" : it->second});
    }
    if (config.residual_region) {
        for (int year : config.years()) {
            CellKey key(*config.residual_region, year);
            auto it = p.failures.find(key);
            manifest.cells.push_back(CellStatus{key.first, key.second,
                                                it == p.failures.end() ? "ok" : "failed",
                                                it == p.failures.end() ? "" : it->second});
        }
    }
    for (const auto& [key, message] : p.failures) {
        if (key.first == "*") {
            manifest.cells.push_back(CellStatus{key.first, key.second, "failed", message});
        }
    }
    std::sort(manifest.cells.begin(), manifest.cells.end(), [](const auto& a, const auto& b) {
        return std::tie(a.region, a.year) < std::tie(b.region, b.year);
    });
    manifest.stage_notes = p.stage_notes;
    manifest.warnings = p.warnings;
    std::sort(manifest.warnings.begin(), manifest.warnings.end());

    // output digests over everything written so far
    std::vector<fs::path> outputs;
    for (const auto& entry : fs::recursive_directory_iterator(out_dir)) {
        if (entry.is_regular_file() && entry.path().filename() != "manifest.json") {
            outputs.push_back(entry.path());
        }
    }
    std::sort(outputs.begin(), outputs.end());
    for (const auto& path : outputs) {
        manifest.output_digests[fs::relative(path, out_dir).generic_string()] =
            hex64(fnv1a64(csv::read_file_bytes(path)));
    }

    csv::write_file_atomic(out_dir / "manifest.json", manifest.to_json().dump(2) + "\n");
    return manifest;
}

void run_stage(const RunConfig& config, const fs::path& out_dir, Stage stage)
{
    config.validate();
    fs::create_directories(out_dir);
    Pipeline p(config, out_dir);

    auto check_failures = [&]() {
        if (!p.failures.empty()) {
            throw Error(cell_name(p.failures.begin()->first) + " " +
                        p.failures.begin()->second);
        }
    };

    switch (stage) {
        case Stage::ExtractUse:
            p.stage_extract_use();
            check_failures();
            p.write_use_tables();
            break;
        case Stage::BuildMap:
            p.stage_build_map();
            check_failures();
            p.write_mappings();
            break;
        case Stage::Allocate:
            p.load_use_tables();
            p.load_mappings();
            p.stage_allocate();
            check_failures();
            p.write_accounts(p.raw_accounts, "accounts_raw");
            break;
        case Stage::Aggregate:
            p.load_accounts(p.raw_accounts, "accounts_raw", p.phase1_regions());
            p.stage_aggregate();
            check_failures();
            p.write_accounts(p.agg_accounts, "accounts_agg");
            break;
        case Stage::Residual:
            p.load_accounts(p.agg_accounts, "accounts_agg", p.phase1_regions());
            p.stage_residual();
            check_failures();
            p.write_accounts(p.agg_accounts, "accounts_agg");
            break;
        case Stage::Error: {
            std::vector<std::string> all = p.config.account_regions();
            p.load_accounts(p.agg_accounts, "accounts_agg", all);
            p.stage_error();
            check_failures();
            p.write_error_reports();
            break;
        }
        case Stage::Calibrate: {
            std::vector<std::string> all = p.config.account_regions();
            p.load_accounts(p.agg_accounts, "accounts_agg", all);
            p.stage_calibrate();
            check_failures();
            p.write_factors();
            p.write_accounts(p.final_accounts, "accounts");
            break;
        }
        case Stage::Extrapolate: {
            std::vector<std::string> all = p.config.account_regions();
            p.load_accounts(p.agg_accounts, "accounts_agg", all);
            p.load_accounts(p.final_accounts, "accounts", all);
            p.load_factors();
            p.stage_extrapolate();
            check_failures();
            p.write_factors();
            p.write_accounts(p.final_accounts, "accounts");
            break;
        }
        case Stage::Footprint: {
            std::vector<std::string> all = p.config.account_regions();
            p.load_accounts(p.final_accounts, "accounts", all);
            p.stage_footprint();
            check_failures();
            p.write_footprints();
            break;
        }
        case Stage::Report:
            p.load_footprints();
            p.load_error_reports();
            p.load_factors();
            p.stage_report();
            break;
    }
}

}  // namespace eeio
