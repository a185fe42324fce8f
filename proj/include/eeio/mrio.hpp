#pragma once

#include "eeio/allocation.hpp"

#include <Eigen/Core>
#include <Eigen/LU>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace eeio {

// Multi-region input-output system: R regions, N sectors each, D final
// demand categories per region. Row/column i corresponds to
// (regions[i / N], sectors[i % N]); demand column j to
// (regions[j / D], demand_categories[j % D]).
struct MrioSystem {
    std::vector<std::string> regions;
    std::vector<std::string> sectors;
    std::vector<std::string> demand_categories;
    Eigen::MatrixXd A;  // RN x RN technical coefficients
    Eigen::MatrixXd Y;  // RN x R*D final demand
    Eigen::VectorXd x;  // RN gross output

    Eigen::Index n_regions() const { return static_cast<Eigen::Index>(regions.size()); }
    Eigen::Index n_sectors() const { return static_cast<Eigen::Index>(sectors.size()); }
    Eigen::Index size() const { return n_regions() * n_sectors(); }
    Eigen::Index index(Eigen::Index region, Eigen::Index sector) const
    {
        return region * n_sectors() + sector;
    }
    std::string row_label(Eigen::Index i) const;

    void validate() const;
};

struct AssemblyReport {
    double max_residual = 0.0;   // of x = A x + Y 1, relative
    std::string worst_row;
    std::vector<std::string> warnings;
};

// A(i,j) = Z(i,j) / x(j). A zero-output column with intermediate inputs is
// ill-posed and rejected; the accounting identity is checked and reported.
MrioSystem assemble_system(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Y,
                           const Eigen::VectorXd& x, std::vector<std::string> regions,
                           std::vector<std::string> sectors,
                           std::vector<std::string> demand_categories,
                           AssemblyReport* report = nullptr);

// Same, with output derived from the accounting identity: x = Z 1 + Y 1.
MrioSystem assemble_system(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Y,
                           std::vector<std::string> regions, std::vector<std::string> sectors,
                           std::vector<std::string> demand_categories,
                           AssemblyReport* report = nullptr);

// Total-requirements operator L = (I - A)^-1, held as an LU factorization
// of (I - A); nothing is ever inverted densely on the solve path.
class LeontiefOperator {
public:
    explicit LeontiefOperator(const Eigen::MatrixXd& A);

    Eigen::Index size() const { return lu_.rows(); }
    Eigen::VectorXd apply(const Eigen::VectorXd& y) const;            // L y
    Eigen::VectorXd apply_transpose(const Eigen::VectorXd& e) const;  // L' e
    Eigen::MatrixXd dense() const;                                    // materialized L

private:
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

// Convenience matrix form for small systems and tests.
Eigen::MatrixXd leontief_inverse(const Eigen::MatrixXd& A);

// Direct energy use per unit of output, and the household column split out
// of the accounts. Energy in zero-output sectors is reported as orphaned,
// not redistributed.
struct IntensityVector {
    Eigen::VectorXd e;                 // RN, TJ per currency unit
    Eigen::VectorXd household_direct;  // R, TJ
    double orphaned_tj = 0.0;
    std::vector<std::string> warnings;
};

IntensityVector compute_intensity(const std::map<std::string, EnergyAccount>& accounts,
                                  const MrioSystem& system, const std::string& household_id = "HH");

struct FootprintOptions {
    // Household direct energy enters both PBA and CBA of the owning region
    // (keeps global closure); disable to exclude it from both.
    bool include_households = true;
};

struct FootprintResult {
    std::vector<std::string> regions;
    std::vector<std::string> sectors;  // per-region sector ids, for detail output
    int year = 0;
    Eigen::VectorXd pba;   // R, TJ
    Eigen::VectorXd cba;   // R, TJ
    Eigen::VectorXd beet;  // R, TJ, pba - cba
    std::optional<Eigen::VectorXd> pba_gj_per_capita;
    std::optional<Eigen::VectorXd> cba_gj_per_capita;
    // origin-sector detail: cba_by_origin(i, r) is energy used in system
    // row i to serve region r's final demand; pba_by_sector(i) = e(i) x(i)
    Eigen::MatrixXd cba_by_origin;
    Eigen::VectorXd pba_by_sector;
    Eigen::VectorXd household_direct;  // R, TJ (zero when excluded)
};

inline constexpr double kGjPerTj = 1000.0;

FootprintResult footprint(const MrioSystem& system, const IntensityVector& intensity,
                          const std::optional<Eigen::VectorXd>& population = std::nullopt,
                          const FootprintOptions& options = {});

}  // namespace eeio
