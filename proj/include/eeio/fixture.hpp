#pragma once

#include <cstdint>
#include <filesystem>

namespace eeio {

// Parameters for a self-consistent synthetic input set: a closed MRIO
// (accounting identity holds by construction), per-region balances whose
// world table is the exact member sum, a shared concordance and splitting
// key, an aggregation map with one deliberately empty group, and optional
// reference accounts and population. Same spec -> byte-identical files.
struct FixtureSpec {
    std::uint64_t seed = 1;
    int regions = 3;   // MRIO regions; the last one is recovered as the residual when >= 2
    int sectors = 4;   // target sectors per region, excluding households
    int flows = 6;
    int products = 5;
    int first_year = 2000;
    int n_years = 1;
    int demand_categories = 2;
    // reference accounts are emitted for every year except the last when
    // n_years > 1, so the trailing year exercises factor extrapolation
    bool with_reference = true;
    bool with_population = true;
};

void generate_fixture(const FixtureSpec& spec, const std::filesystem::path& dir);

}  // namespace eeio
