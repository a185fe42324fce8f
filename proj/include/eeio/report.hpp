#pragma once

#include "eeio/calibration.hpp"
#include "eeio/mrio.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace eeio {

enum class ReportFormat { Csv, Json };

ReportFormat report_format_from_string(const std::string& s);

struct ReportInputs {
    std::vector<FootprintResult> footprints;     // one per year
    std::vector<RelativeErrorReport> errors;     // empty when calibration skipped
    bool calibration_ran = false;
};

// Tidy, plot-ready series: an indicator time series per region, and the
// candidate-vs-reference difference distribution when calibration ran.
// Returns notes about omitted outputs for the run manifest.
std::vector<std::string> write_report(const ReportInputs& inputs,
                                      const std::filesystem::path& dir, ReportFormat format);

}  // namespace eeio
