#include "eeio/calibration.hpp"

#include "eeio/errors.hpp"
#include "eeio/log.hpp"
#include "eeio/text.hpp"

#include <cmath>
#include <limits>

namespace eeio {

RelativeErrorReport relative_error(const EnergyAccount& candidate, const EnergyAccount& reference)
{
    candidate.validate();
    reference.validate();
    if (candidate.country != reference.country || candidate.year != reference.year) {
        throw AxisError("relative_error: candidate and reference are different country-years");
    }
    // sector axes may differ (the reference can be coarser); only product
    // totals are compared
    if (candidate.products != reference.products) {
        throw AxisError("relative_error: product axes differ");
    }

    RelativeErrorReport report;
    report.country = candidate.country;
    report.year = candidate.year;
    report.products = candidate.products;

    double cand_total = candidate.total();
    double ref_total = reference.total();
    if (ref_total > 0.0) {
        report.epsilon = (cand_total - ref_total) / ref_total;
    } else {
        log::warn(candidate.country + "/" + std::to_string(candidate.year) +
                  ": reference total is zero, overall relative error undefined");
    }

    Eigen::VectorXd cand = candidate.product_totals();
    Eigen::VectorXd ref = reference.product_totals();
    report.by_product.resize(cand.size());
    for (Eigen::Index p = 0; p < cand.size(); ++p) {
        if (ref(p) > 0.0) {
            report.by_product(p) = (cand(p) - ref(p)) / ref(p);
        } else {
            report.by_product(p) = std::numeric_limits<double>::quiet_NaN();
            report.undefined_products.push_back(report.products[static_cast<std::size_t>(p)]);
        }
    }
    return report;
}

std::string to_string(FactorProvenance p)
{
    return p == FactorProvenance::Overlap ? "overlap" : "extrapolated";
}

FactorProvenance factor_provenance_from_string(const std::string& s)
{
    if (s == "overlap") return FactorProvenance::Overlap;
    if (s == "extrapolated") return FactorProvenance::Extrapolated;
    throw ParseError("UnknownProvenance", "'" + s + "'");
}

void CalibrationFactors::validate() const
{
    if (alpha.size() != static_cast<Eigen::Index>(products.size())) {
        throw ValidationError("calibration factors: length mismatch");
    }
    for (Eigen::Index i = 0; i < alpha.size(); ++i) {
        if (!(alpha(i) >= 0.0)) {
            throw ValidationError("calibration factors: negative factor for '" +
                                  products[static_cast<std::size_t>(i)] + "'");
        }
    }
}

CalibrationFactors calibration_factors(const EnergyAccount& candidate,
                                       const EnergyAccount& reference)
{
    candidate.validate();
    reference.validate();
    if (candidate.stage != AccountStage::Aggregated) {
        throw ValidationError("calibration_factors: candidate must be an aggregated account");
    }
    if (candidate.products != reference.products) {
        throw AxisError("calibration_factors: product axes differ");
    }

    CalibrationFactors factors;
    factors.country = candidate.country;
    factors.year = candidate.year;
    factors.products = candidate.products;
    factors.provenance = FactorProvenance::Overlap;

    Eigen::VectorXd cand = candidate.product_totals();
    Eigen::VectorXd ref = reference.product_totals();
    factors.alpha.resize(cand.size());
    for (Eigen::Index p = 0; p < cand.size(); ++p) {
        if (cand(p) > 0.0 && ref(p) > 0.0) {
            factors.alpha(p) = ref(p) / cand(p);
        } else {
            factors.alpha(p) = 1.0;
            factors.flagged.push_back("UnmatchableProduct: '" +
                                      factors.products[static_cast<std::size_t>(p)] +
                                      "' (candidate " + format_double(cand(p)) + ", reference " +
                                      format_double(ref(p)) + ")");
        }
    }
    for (const auto& f : factors.flagged) {
        log::warn(candidate.country + "/" + std::to_string(candidate.year) + ": " + f);
    }
    factors.validate();
    return factors;
}

EnergyAccount apply_calibration(const EnergyAccount& account, const CalibrationFactors& factors)
{
    account.validate();
    factors.validate();
    if (account.stage != AccountStage::Aggregated) {
        throw ValidationError("apply_calibration: account must be aggregated, got " +
                              to_string(account.stage));
    }
    if (account.products != factors.products) {
        throw AxisError("apply_calibration: product axes differ");
    }

    EnergyAccount out = account;
    out.stage = AccountStage::Calibrated;
    for (Eigen::Index p = 0; p < out.values.rows(); ++p) {
        out.values.row(p) *= factors.alpha(p);
    }
    return out;
}

std::string to_string(ExtrapolationMode m)
{
    return m == ExtrapolationMode::Rolling ? "rolling" : "frozen";
}

ExtrapolationMode extrapolation_mode_from_string(const std::string& s)
{
    if (s == "rolling") return ExtrapolationMode::Rolling;
    if (s == "frozen") return ExtrapolationMode::Frozen;
    throw ParseError("UnknownExtrapolationMode", "'" + s + "'");
}

std::vector<CalibrationFactors> extrapolate_factors(const std::vector<CalibrationFactors>& history,
                                                    const std::vector<int>& target_years,
                                                    ExtrapolationMode mode)
{
    if (history.empty()) {
        throw ValidationError("extrapolate_factors: empty history");
    }
    for (std::size_t i = 0; i < history.size(); ++i) {
        history[i].validate();
        if (history[i].country != history.front().country ||
            history[i].products != history.front().products) {
            throw AxisError("extrapolate_factors: history entries disagree on country or products");
        }
        if (i > 0 && history[i].year <= history[i - 1].year) {
            throw ValidationError("extrapolate_factors: history years must strictly increase");
        }
    }
    const int last_year = history.back().year;
    for (std::size_t i = 0; i < target_years.size(); ++i) {
        if (target_years[i] <= last_year) {
            throw ValidationError("extrapolate_factors: target year " +
                                  std::to_string(target_years[i]) +
                                  " is not beyond the history (last " + std::to_string(last_year) +
                                  ")");
        }
        if (i > 0 && target_years[i] <= target_years[i - 1]) {
            throw ValidationError("extrapolate_factors: target years must strictly increase");
        }
    }

    constexpr std::size_t kWindow = 5;
    std::vector<Eigen::VectorXd> window_pool;
    for (const auto& h : history) {
        window_pool.push_back(h.alpha);
    }

    std::vector<CalibrationFactors> out;
    for (int year : target_years) {
        std::size_t n = std::min(kWindow, window_pool.size());
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(history.front().alpha.size());
        for (std::size_t i = window_pool.size() - n; i < window_pool.size(); ++i) {
            mean += window_pool[i];
        }
        mean /= static_cast<double>(n);

        CalibrationFactors f;
        f.country = history.front().country;
        f.year = year;
        f.products = history.front().products;
        f.alpha = mean;
        f.provenance = FactorProvenance::Extrapolated;
        f.short_window = n < kWindow;
        if (f.short_window) {
            log::warn(f.country + "/" + std::to_string(year) + ": extrapolation window has only " +
                      std::to_string(n) + " year(s)");
        }
        if (mode == ExtrapolationMode::Rolling) {
            window_pool.push_back(f.alpha);
        }
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace eeio
