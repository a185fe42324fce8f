#pragma once

#include "eeio/allocation.hpp"
#include "eeio/calibration.hpp"
#include "eeio/energy_balance.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace eeio::io {

namespace fs = std::filesystem;

// Account CSV is dense `product,sector,value_tj`; the sidecar
// ({stem}.meta.json) carries country, year, stage, unit, axis order and
// warnings so a reload reproduces the account exactly.
void write_account(const fs::path& csv_path, const EnergyAccount& account);
EnergyAccount read_account(const fs::path& csv_path);

// Use tables reuse the sparse balance cell format plus a sidecar with the
// full axes (zero rows/columns would otherwise vanish on reload).
void write_use_table(const fs::path& csv_path, const UseTable& use);
UseTable read_use_table(const fs::path& csv_path);

struct MrioInput {
    std::vector<std::string> regions;
    std::vector<std::string> sectors;
    std::vector<std::string> demand_categories;
    Eigen::MatrixXd Z;
    Eigen::MatrixXd Y;
    Eigen::VectorXd x;
};

// Directory with Z.csv (region:sector square matrix), Y.csv
// (rows region:sector, columns region:category) and x.csv
// (`region:sector,value`).
MrioInput read_mrio_dir(const fs::path& dir);
void write_mrio_dir(const fs::path& dir, const MrioInput& input);

// `region,year,persons`
std::map<std::string, std::map<int, double>> read_population(const fs::path& path);

// `country,year,product,alpha,provenance` (+ short_window flag column)
std::string factors_to_csv(const std::vector<CalibrationFactors>& factors);
std::vector<CalibrationFactors> factors_from_csv(const fs::path& path);

}  // namespace eeio::io
