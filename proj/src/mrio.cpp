#include "eeio/mrio.hpp"

#include "eeio/errors.hpp"
#include "eeio/log.hpp"
#include "eeio/text.hpp"

#include <algorithm>
#include <cmath>

namespace eeio {

std::string MrioSystem::row_label(Eigen::Index i) const
{
    return regions[static_cast<std::size_t>(i / n_sectors())] + ":" +
           sectors[static_cast<std::size_t>(i % n_sectors())];
}

void MrioSystem::validate() const
{
    const Eigen::Index rn = size();
    const Eigen::Index rd = n_regions() * static_cast<Eigen::Index>(demand_categories.size());
    if (A.rows() != rn || A.cols() != rn) {
        throw ValidationError("mrio: A is not RN x RN");
    }
    if (Y.rows() != rn || Y.cols() != rd) {
        throw ValidationError("mrio: Y is not RN x R*D");
    }
    if (x.size() != rn) {
        throw ValidationError("mrio: x is not length RN");
    }
    if ((A.array() < 0.0).any()) {
        throw ValidationError("mrio: negative technical coefficient");
    }
}

MrioSystem assemble_system(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Y,
                           const Eigen::VectorXd& x, std::vector<std::string> regions,
                           std::vector<std::string> sectors,
                           std::vector<std::string> demand_categories, AssemblyReport* report)
{
    const Eigen::Index rn = Z.rows();
    if (Z.cols() != rn || Y.rows() != rn || x.size() != rn) {
        throw AxisError("assemble_system: inconsistent dimensions");
    }
    if ((Z.array() < 0.0).any()) {
        throw ValidationError("assemble_system: negative intermediate flow");
    }
    if ((x.array() < 0.0).any()) {
        throw ValidationError("assemble_system: negative output");
    }

    MrioSystem sys;
    sys.regions = std::move(regions);
    sys.sectors = std::move(sectors);
    sys.demand_categories = std::move(demand_categories);
    sys.Y = Y;
    sys.x = x;
    sys.A = Eigen::MatrixXd::Zero(rn, rn);
    for (Eigen::Index j = 0; j < rn; ++j) {
        if (x(j) > 0.0) {
            sys.A.col(j) = Z.col(j) / x(j);
        } else if (Z.col(j).sum() > 0.0) {
            throw ValidationError("assemble_system: sector " + sys.row_label(j) +
                                  " has zero output but nonzero intermediate inputs");
        }
    }
    sys.validate();

    // accounting identity x = A x + Y 1
    Eigen::VectorXd residual = sys.A * sys.x + sys.Y.rowwise().sum() - sys.x;
    double scale = std::max(1.0, sys.x.cwiseAbs().maxCoeff());
    Eigen::Index worst = 0;
    double max_res = residual.cwiseAbs().maxCoeff(&worst) / scale;
    if (report) {
        report->max_residual = max_res;
        report->worst_row = sys.row_label(worst);
    }
    if (max_res > 1e-6) {
        std::string msg = "accounting identity violated: max residual " + format_double(max_res) +
                          " at " + sys.row_label(worst);
        log::warn(msg);
        if (report) {
            report->warnings.push_back(msg);
        }
    }
    return sys;
}

MrioSystem assemble_system(const Eigen::MatrixXd& Z, const Eigen::MatrixXd& Y,
                           std::vector<std::string> regions, std::vector<std::string> sectors,
                           std::vector<std::string> demand_categories, AssemblyReport* report)
{
    Eigen::VectorXd x = Z.rowwise().sum() + Y.rowwise().sum();
    return assemble_system(Z, Y, x, std::move(regions), std::move(sectors),
                           std::move(demand_categories), report);
}

LeontiefOperator::LeontiefOperator(const Eigen::MatrixXd& A)
    : lu_(Eigen::MatrixXd(Eigen::MatrixXd::Identity(A.rows(), A.cols()) - A))
{
    if (A.rows() != A.cols()) {
        throw ValidationError("leontief: A must be square");
    }
    // A productive system has L >= 0 with unit-or-larger diagonal; a solve
    // that comes back negative or non-finite means rho(A) >= 1 or singular
    Eigen::VectorXd probe = lu_.solve(Eigen::VectorXd::Ones(A.rows()));
    if (!probe.allFinite() || (probe.array() < -1e-9).any()) {
        throw Error("leontief: system is singular or non-convergent (spectral radius >= 1)");
    }
}

Eigen::VectorXd LeontiefOperator::apply(const Eigen::VectorXd& y) const
{
    return lu_.solve(y);
}

Eigen::VectorXd LeontiefOperator::apply_transpose(const Eigen::VectorXd& e) const
{
    return lu_.transpose().solve(e);
}

Eigen::MatrixXd LeontiefOperator::dense() const
{
    return lu_.solve(Eigen::MatrixXd::Identity(lu_.rows(), lu_.cols()));
}

Eigen::MatrixXd leontief_inverse(const Eigen::MatrixXd& A)
{
    return LeontiefOperator(A).dense();
}

IntensityVector compute_intensity(const std::map<std::string, EnergyAccount>& accounts,
                                  const MrioSystem& system, const std::string& household_id)
{
    system.validate();
    IntensityVector iv;
    iv.e = Eigen::VectorXd::Zero(system.size());
    iv.household_direct = Eigen::VectorXd::Zero(system.n_regions());

    for (Eigen::Index r = 0; r < system.n_regions(); ++r) {
        const std::string& region = system.regions[static_cast<std::size_t>(r)];
        auto it = accounts.find(region);
        if (it == accounts.end()) {
            throw AxisError("compute_intensity: no energy account for region '" + region + "'");
        }
        const EnergyAccount& acct = it->second;
        acct.validate();

        Eigen::RowVectorXd sector_energy = acct.values.colwise().sum();
        for (std::size_t s = 0; s < acct.sectors.size(); ++s) {
            const std::string& sector = acct.sectors[s];
            double energy = sector_energy(static_cast<Eigen::Index>(s));
            if (sector == household_id) {
                iv.household_direct(r) += energy;
                continue;
            }
            auto pos = std::find(system.sectors.begin(), system.sectors.end(), sector);
            if (pos == system.sectors.end()) {
                throw AxisError("compute_intensity: account sector '" + sector +
                                "' (region " + region + ") not in the MRIO sector list");
            }
            Eigen::Index i = system.index(r, pos - system.sectors.begin());
            if (system.x(i) > 0.0) {
                iv.e(i) = energy / system.x(i);
                if (iv.e(i) < 0.0) {
                    iv.warnings.push_back("negative intensity at " + system.row_label(i) + " (" +
                                          format_double(energy) + " TJ)");
                }
            } else {
                iv.e(i) = 0.0;
                if (energy != 0.0) {
                    iv.orphaned_tj += energy;
                    iv.warnings.push_back("orphaned energy: " + format_double(energy) + " TJ in " +
                                          system.row_label(i) + " with zero output");
                }
            }
        }
    }
    for (const auto& w : iv.warnings) {
        log::warn(w);
    }
    return iv;
}

FootprintResult footprint(const MrioSystem& system, const IntensityVector& intensity,
                          const std::optional<Eigen::VectorXd>& population,
                          const FootprintOptions& options)
{
    system.validate();
    const Eigen::Index R = system.n_regions();
    const Eigen::Index D = static_cast<Eigen::Index>(system.demand_categories.size());
    if (intensity.e.size() != system.size() || intensity.household_direct.size() != R) {
        throw AxisError("footprint: intensity dimensions do not match the system");
    }

    FootprintResult res;
    res.regions = system.regions;
    res.sectors = system.sectors;
    res.pba = Eigen::VectorXd::Zero(R);
    res.cba = Eigen::VectorXd::Zero(R);
    res.household_direct = Eigen::VectorXd::Zero(R);
    res.cba_by_origin = Eigen::MatrixXd::Zero(system.size(), R);
    res.pba_by_sector = intensity.e.cwiseProduct(system.x);

    LeontiefOperator leontief(system.A);
    for (Eigen::Index r = 0; r < R; ++r) {
        // embodied requirements of region r's final demand
        Eigen::VectorXd y_r = system.Y.middleCols(r * D, D).rowwise().sum();
        Eigen::VectorXd t = leontief.apply(y_r);
        res.cba_by_origin.col(r) = intensity.e.cwiseProduct(t);
        res.cba(r) = res.cba_by_origin.col(r).sum();
        for (Eigen::Index s = 0; s < system.n_sectors(); ++s) {
            res.pba(r) += res.pba_by_sector(system.index(r, s));
        }
        if (options.include_households) {
            res.household_direct(r) = intensity.household_direct(r);
            res.pba(r) += intensity.household_direct(r);
            res.cba(r) += intensity.household_direct(r);
        }
    }
    res.beet = res.pba - res.cba;

    if (population) {
        if (population->size() != R) {
            throw AxisError("footprint: population vector length differs from region count");
        }
        if ((population->array() <= 0.0).any()) {
            throw ValidationError("footprint: population entries must be positive");
        }
        res.pba_gj_per_capita = (res.pba * kGjPerTj).cwiseQuotient(*population);
        res.cba_gj_per_capita = (res.cba * kGjPerTj).cwiseQuotient(*population);
    }
    return res;
}

}  // namespace eeio
