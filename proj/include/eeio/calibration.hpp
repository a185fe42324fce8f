#pragma once

#include "eeio/allocation.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace eeio {

// Relative discrepancy of a candidate account against a reference set,
// overall and per product. Undefined ratios (zero reference totals) are
// reported, never thrown.
struct RelativeErrorReport {
    std::string country;
    int year = 0;
    std::optional<double> epsilon;  // unset when the reference total is zero
    std::vector<std::string> products;
    Eigen::VectorXd by_product;  // NaN where undefined
    std::vector<std::string> undefined_products;
};

RelativeErrorReport relative_error(const EnergyAccount& candidate, const EnergyAccount& reference);

enum class FactorProvenance { Overlap, Extrapolated };

std::string to_string(FactorProvenance p);
FactorProvenance factor_provenance_from_string(const std::string& s);

// Per-product corrective factors: scaling candidate rows by alpha makes
// product totals match the reference. Products where either total is zero
// get factor 1 and are flagged.
struct CalibrationFactors {
    std::string country;
    int year = 0;
    std::vector<std::string> products;
    Eigen::VectorXd alpha;  // >= 0
    FactorProvenance provenance = FactorProvenance::Overlap;
    std::vector<std::string> flagged;  // products pinned to factor 1
    bool short_window = false;         // extrapolated from fewer than 5 years

    void validate() const;
};

CalibrationFactors calibration_factors(const EnergyAccount& candidate,
                                       const EnergyAccount& reference);

// Scales every product row by its factor; within-row sector proportions
// are untouched.
EnergyAccount apply_calibration(const EnergyAccount& account, const CalibrationFactors& factors);

enum class ExtrapolationMode {
    Rolling,  // extrapolated years feed subsequent windows
    Frozen,   // windows draw from overlap years only
};

std::string to_string(ExtrapolationMode m);
ExtrapolationMode extrapolation_mode_from_string(const std::string& s);

// Trailing moving average over the most recent (up to) 5 factor vectors.
// Targets must be strictly beyond the last history year, in ascending
// order. With fewer than 5 vectors available the mean is over all of them
// and the result is flagged short_window.
std::vector<CalibrationFactors> extrapolate_factors(
    const std::vector<CalibrationFactors>& history, const std::vector<int>& target_years,
    ExtrapolationMode mode = ExtrapolationMode::Rolling);

}  // namespace eeio
