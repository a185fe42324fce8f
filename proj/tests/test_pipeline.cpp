#include "eeio/csv.hpp"
#include "eeio/errors.hpp"
#include "eeio/fixture.hpp"
#include "eeio/io.hpp"
#include "eeio/pipeline.hpp"
#include "eeio/text.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <map>

using namespace eeio;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
    {
        path = fs::temp_directory_path() / ("eeio_test_" + name + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// every regular file, keyed by relative path, as raw bytes
std::map<std::string, std::string> dir_contents(const fs::path& root,
                                                const std::string& skip = "")
{
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) {
            continue;
        }
        std::string rel = fs::relative(entry.path(), root).generic_string();
        if (!skip.empty() && rel == skip) {
            continue;
        }
        out[rel] = csv::read_file_bytes(entry.path());
    }
    return out;
}

FixtureSpec small_spec(std::uint64_t seed)
{
    FixtureSpec spec;
    spec.seed = seed;
    spec.regions = 3;
    spec.sectors = 4;
    spec.flows = 6;
    spec.products = 5;
    spec.n_years = 3;
    return spec;
}

}  // namespace

TEST_CASE("fixture generation is deterministic per seed")
{
    TempDir a("fix_a"), b("fix_b"), c("fix_c");
    generate_fixture(small_spec(1), a.path);
    generate_fixture(small_spec(1), b.path);
    generate_fixture(small_spec(2), c.path);
    CHECK(dir_contents(a.path) == dir_contents(b.path));
    CHECK(dir_contents(a.path) != dir_contents(c.path));
}

TEST_CASE("full pipeline on the bundled fixture")
{
    TempDir dir("run");
    generate_fixture(small_spec(1), dir.path);
    RunConfig config = RunConfig::load(dir.path / "run.toml");

    auto manifest = run_pipeline(config, dir.path / "out");
    CHECK(manifest.all_ok());

    SUBCASE("outputs cover every stage")
    {
        CHECK(fs::exists(dir.path / "out" / "use" / "R01_2000.csv"));
        CHECK(fs::exists(dir.path / "out" / "maps" / "WORLD_2002.csv"));
        CHECK(fs::exists(dir.path / "out" / "accounts_agg" / "RES_2001.csv"));
        CHECK(fs::exists(dir.path / "out" / "accounts" / "R02_2002.csv"));
        CHECK(fs::exists(dir.path / "out" / "factors.csv"));
        CHECK(fs::exists(dir.path / "out" / "epsilon.csv"));
        CHECK(fs::exists(dir.path / "out" / "footprints.csv"));
        CHECK(fs::exists(dir.path / "out" / "report" / "timeseries.csv"));
        CHECK(fs::exists(dir.path / "out" / "manifest.json"));
    }
    SUBCASE("manifest digest is stable across reruns")
    {
        auto again = run_pipeline(config, dir.path / "out2");
        CHECK(again.digest() == manifest.digest());
    }
    SUBCASE("jobs=1 and jobs=8 outputs are byte-identical")
    {
        RunConfig parallel = config;
        parallel.options.jobs = 8;
        run_pipeline(parallel, dir.path / "out8");
        CHECK(dir_contents(dir.path / "out", "manifest.json") ==
              dir_contents(dir.path / "out8", "manifest.json"));
    }
    SUBCASE("extrapolated factors cover the year without reference accounts")
    {
        auto factors = io::factors_from_csv(dir.path / "out" / "factors.csv");
        bool saw_overlap = false, saw_extrapolated = false;
        for (const auto& f : factors) {
            if (f.provenance == FactorProvenance::Overlap) {
                saw_overlap = true;
                CHECK(f.year < 2002);
            } else {
                saw_extrapolated = true;
                CHECK(f.year == 2002);
                CHECK(f.short_window);  // only two overlap years exist
            }
        }
        CHECK(saw_overlap);
        CHECK(saw_extrapolated);
    }
    SUBCASE("final accounts carry the expected stages")
    {
        auto calibrated = io::read_account(dir.path / "out" / "accounts" / "R01_2001.csv");
        CHECK(calibrated.stage == AccountStage::Calibrated);
    }
}

TEST_CASE("pipeline without reference accounts skips calibration")
{
    TempDir dir("noref");
    auto spec = small_spec(4);
    spec.with_reference = false;
    spec.n_years = 1;
    generate_fixture(spec, dir.path);
    RunConfig config = RunConfig::load(dir.path / "run.toml");

    auto manifest = run_pipeline(config, dir.path / "out");
    CHECK(manifest.all_ok());
    CHECK(manifest.stage_notes.count("calibration"));
    CHECK(!fs::exists(dir.path / "out" / "factors.csv"));

    auto account = io::read_account(dir.path / "out" / "accounts" / "R01_2000.csv");
    CHECK(account.stage == AccountStage::Aggregated);

    // report difference distribution is omitted with a note
    CHECK(!fs::exists(dir.path / "out" / "report" / "difference_distribution.csv"));
    CHECK(manifest.stage_notes.count("report"));
}

TEST_CASE("end-to-end conservation: world PBA equals total use energy")
{
    TempDir dir("conserve");
    auto spec = small_spec(5);
    spec.with_reference = false;  // calibration would deliberately change totals
    generate_fixture(spec, dir.path);
    RunConfig config = RunConfig::load(dir.path / "run.toml");
    auto manifest = run_pipeline(config, dir.path / "out");
    REQUIRE(manifest.all_ok());

    for (int year : config.years()) {
        // independent total: the world use table straight from the files
        auto world_use =
            io::read_use_table(dir.path / "out" / "use" / ("WORLD_" + std::to_string(year) + ".csv"));
        double use_total = world_use.total();

        auto rows = csv::read_file(dir.path / "out" / "footprints.csv");
        double pba_total = 0.0;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            if (*parse_int(rows[i].fields[1]) == year) {
                pba_total += *parse_double(rows[i].fields[2]);
            }
        }
        CHECK(pba_total == doctest::Approx(use_total).epsilon(1e-9));
    }
}

TEST_CASE("config validation fails fast on a bad path")
{
    TempDir dir("badpath");
    generate_fixture(small_spec(6), dir.path);
    RunConfig config = RunConfig::load(dir.path / "run.toml");
    config.concordance_file = dir.path / "missing.csv";
    CHECK_THROWS_WITH_AS(run_pipeline(config, dir.path / "out"),
                         doctest::Contains("concordance"), ConfigError);
    CHECK(!fs::exists(dir.path / "out" / "manifest.json"));
}

TEST_CASE("config parser rejects unknown keys and bad enums")
{
    TempDir dir("cfg");
    {
        std::ofstream f(dir.path / "bad1.toml");
        f << "years_start = 2000\nyears_end = 2000\nregions = [\"A\"]\nmystery = 1\n"
          << "[paths]\nbalances = \"b\"\nschema = \"s\"\nconcordance = \"c\"\n"
          << "splitting_keys = \"k\"\naggregation_map = \"m\"\n";
    }
    CHECK_THROWS_WITH_AS(RunConfig::load(dir.path / "bad1.toml"), doctest::Contains("mystery"),
                         ConfigError);
    {
        std::ofstream f(dir.path / "bad2.toml");
        f << "years_start = 2000\nyears_end = 2000\nregions = [\"A\"]\n"
          << "households = \"sometimes\"\n[paths]\nbalances = \"b\"\nschema = \"s\"\n"
          << "concordance = \"c\"\nsplitting_keys = \"k\"\naggregation_map = \"m\"\n";
    }
    CHECK_THROWS_AS(RunConfig::load(dir.path / "bad2.toml"), ConfigError);
}

TEST_CASE("staged subcommands reproduce the one-shot run byte for byte")
{
    TempDir dir("staged");
    generate_fixture(small_spec(7), dir.path);
    RunConfig config = RunConfig::load(dir.path / "run.toml");

    run_pipeline(config, dir.path / "oneshot");
    for (Stage stage : {Stage::ExtractUse, Stage::BuildMap, Stage::Allocate, Stage::Aggregate,
                        Stage::Residual, Stage::Error, Stage::Calibrate, Stage::Extrapolate,
                        Stage::Footprint, Stage::Report}) {
        run_stage(config, dir.path / "staged", stage);
    }
    CHECK(dir_contents(dir.path / "oneshot", "manifest.json") == dir_contents(dir.path / "staged"));
}

TEST_CASE("single-region fixture: no trade, PBA equals CBA")
{
    TempDir dir("single");
    auto spec = small_spec(8);
    spec.regions = 1;
    spec.n_years = 1;
    generate_fixture(spec, dir.path);
    RunConfig config = RunConfig::load(dir.path / "run.toml");
    auto manifest = run_pipeline(config, dir.path / "out");
    REQUIRE(manifest.all_ok());

    auto rows = csv::read_file(dir.path / "out" / "footprints.csv");
    REQUIRE(rows.size() == 2);
    double beet = *parse_double(rows[1].fields[4]);
    double pba = *parse_double(rows[1].fields[2]);
    CHECK(std::abs(beet) <= 1e-9 * pba);
}

TEST_CASE("cli smoke test: fixture, run, exit codes")
{
    TempDir dir("cli");
    std::string cli = EEIO_CLI_PATH;
    std::string fixture_cmd = cli + " fixture --out " + (dir.path / "fx").string() +
                              " --seed 3 --regions 2 --sectors 3 --flows 6 --products 4 --years 2";
    REQUIRE(std::system(fixture_cmd.c_str()) == 0);

    std::string run_cmd = cli + " run --config " + (dir.path / "fx" / "run.toml").string() +
                          " --out " + (dir.path / "fx" / "out").string() + " >/dev/null 2>&1";
    CHECK(std::system(run_cmd.c_str()) == 0);
    CHECK(fs::exists(dir.path / "fx" / "out" / "manifest.json"));

    std::string bad_cmd = cli + " run --config " + (dir.path / "fx" / "nope.toml").string() +
                          " >/dev/null 2>&1";
    int rc = std::system(bad_cmd.c_str());
    CHECK(WEXITSTATUS(rc) == 1);
}
