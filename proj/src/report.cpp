#include "eeio/report.hpp"

#include "eeio/csv.hpp"
#include "eeio/errors.hpp"
#include "eeio/text.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace eeio {

using nlohmann::json;

ReportFormat report_format_from_string(const std::string& s)
{
    if (s == "csv") return ReportFormat::Csv;
    if (s == "json") return ReportFormat::Json;
    throw ConfigError("unknown report format '" + s + "' (expected csv or json)");
}

namespace {

struct SeriesRow {
    std::string region;
    int year;
    std::string indicator;
    double value;
};

std::vector<SeriesRow> timeseries_rows(const std::vector<FootprintResult>& footprints)
{
    std::vector<SeriesRow> rows;
    for (const auto& fp : footprints) {
        for (std::size_t r = 0; r < fp.regions.size(); ++r) {
            auto i = static_cast<Eigen::Index>(r);
            rows.push_back({fp.regions[r], fp.year, "pba_tj", fp.pba(i)});
            rows.push_back({fp.regions[r], fp.year, "cba_tj", fp.cba(i)});
            rows.push_back({fp.regions[r], fp.year, "beet_tj", fp.beet(i)});
            if (fp.pba_gj_per_capita) {
                rows.push_back({fp.regions[r], fp.year, "pba_gj_pc", (*fp.pba_gj_per_capita)(i)});
                rows.push_back({fp.regions[r], fp.year, "cba_gj_pc", (*fp.cba_gj_per_capita)(i)});
            }
        }
    }
    return rows;
}

}  // namespace

std::vector<std::string> write_report(const ReportInputs& inputs,
                                      const std::filesystem::path& dir, ReportFormat format)
{
    if (inputs.footprints.empty() && inputs.errors.empty()) {
        throw ValidationError("write_report: nothing to report");
    }
    std::vector<std::string> notes;

    if (!inputs.footprints.empty()) {
        auto rows = timeseries_rows(inputs.footprints);
        if (format == ReportFormat::Csv) {
            csv::Writer w;
            w.row({"region", "year", "indicator", "value"});
            for (const auto& r : rows) {
                w.row({r.region, std::to_string(r.year), r.indicator, format_double(r.value)});
            }
            csv::write_file_atomic(dir / "timeseries.csv", w.str());
        } else {
            json arr = json::array();
            for (const auto& r : rows) {
                arr.push_back({{"region", r.region},
                               {"year", r.year},
                               {"indicator", r.indicator},
                               {"value", r.value}});
            }
            csv::write_file_atomic(dir / "timeseries.json", arr.dump(2) + "\n");
        }
    } else {
        notes.push_back("report: footprint series omitted (no MRIO inputs)");
    }

    if (inputs.calibration_ran && !inputs.errors.empty()) {
        if (format == ReportFormat::Csv) {
            csv::Writer total;
            total.row({"country", "year", "epsilon"});
            csv::Writer dist;
            dist.row({"country", "year", "product", "epsilon"});
            for (const auto& e : inputs.errors) {
                total.row({e.country, std::to_string(e.year),
                           e.epsilon ? format_double(*e.epsilon) : "nan"});
                for (std::size_t p = 0; p < e.products.size(); ++p) {
                    dist.row({e.country, std::to_string(e.year), e.products[p],
                              format_double(e.by_product(static_cast<Eigen::Index>(p)))});
                }
            }
            csv::write_file_atomic(dir / "error_totals.csv", total.str());
            csv::write_file_atomic(dir / "difference_distribution.csv", dist.str());
        } else {
            json totals = json::array();
            json dist = json::array();
            for (const auto& e : inputs.errors) {
                totals.push_back({{"country", e.country},
                                  {"year", e.year},
                                  {"epsilon", e.epsilon ? json(*e.epsilon) : json()}});
                for (std::size_t p = 0; p < e.products.size(); ++p) {
                    double v = e.by_product(static_cast<Eigen::Index>(p));
                    dist.push_back({{"country", e.country},
                                    {"year", e.year},
                                    {"product", e.products[p]},
                                    {"epsilon", std::isnan(v) ? json() : json(v)}});
                }
            }
            csv::write_file_atomic(dir / "error_totals.json", totals.dump(2) + "\n");
            csv::write_file_atomic(dir / "difference_distribution.json", dist.dump(2) + "\n");
        }
    } else {
        notes.push_back("report: difference distribution omitted (calibration did not run)");
    }
    return notes;
}

}  // namespace eeio
