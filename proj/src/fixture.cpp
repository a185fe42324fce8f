#include "eeio/fixture.hpp"

#include "eeio/allocation.hpp"
#include "eeio/csv.hpp"
#include "eeio/energy_balance.hpp"
#include "eeio/errors.hpp"
#include "eeio/io.hpp"
#include "eeio/text.hpp"

#include <Eigen/LU>

#include <random>
#include <sstream>

namespace eeio {

namespace {

// mt19937_64 with an explicit uniform mapping instead of
// std::uniform_real_distribution, whose output is implementation-defined;
// fixtures must be byte-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int uniform_int(int lo, int hi)  // inclusive bounds
    {
        return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
    }
    bool chance(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

std::string pad2(int i)
{
    return (i < 10 ? "0" : "") + std::to_string(i);
}

struct FixtureData {
    std::vector<std::string> member_regions;  // explicitly configured regions
    std::string residual_region;              // empty when regions == 1
    std::vector<std::string> all_regions;     // members + residual
    std::vector<std::string> sectors;         // without HH
    std::vector<std::string> sector_axis;     // with HH
    std::vector<std::string> flows;
    std::vector<FlowClass> flow_classes;
    std::vector<std::string> products;
};

const char* kHouseholdId = "HH";
const char* kWorldId = "WORLD";

FlowClass fixture_flow_class(int flow_index)
{
    static const FlowClass pattern[] = {
        FlowClass::FinalConsumption,   FlowClass::Transformation, FlowClass::EnergyIndustryOwnUse,
        FlowClass::Bunker,             FlowClass::SupplySide,     FlowClass::Statistical,
    };
    return pattern[flow_index % 6];
}

}  // namespace

void generate_fixture(const FixtureSpec& spec, const std::filesystem::path& dir)
{
    if (spec.regions < 1 || spec.sectors < 1 || spec.flows < 1 || spec.products < 1 ||
        spec.n_years < 1 || spec.demand_categories < 1) {
        throw ValidationError("generate_fixture: all counts must be >= 1");
    }
    namespace fs = std::filesystem;
    Rng rng(spec.seed);

    FixtureData fx;
    for (int r = 1; r <= spec.regions; ++r) {
        fx.all_regions.push_back("R" + pad2(r));
    }
    if (spec.regions >= 2) {
        fx.all_regions.back() = "RES";
        fx.residual_region = "RES";
        fx.member_regions.assign(fx.all_regions.begin(), fx.all_regions.end() - 1);
    } else {
        fx.member_regions = fx.all_regions;
    }
    for (int s = 1; s <= spec.sectors; ++s) {
        fx.sectors.push_back("s" + pad2(s));
    }
    fx.sector_axis = fx.sectors;
    fx.sector_axis.push_back(kHouseholdId);
    for (int f = 1; f <= spec.flows; ++f) {
        fx.flows.push_back("fl" + pad2(f));
        fx.flow_classes.push_back(fixture_flow_class(f - 1));
    }
    for (int p = 1; p <= spec.products; ++p) {
        fx.products.push_back("pr" + pad2(p));
    }

    // flow classification schema
    {
        csv::Writer w;
        w.row({"flow", "flow_class"});
        for (std::size_t f = 0; f < fx.flows.size(); ++f) {
            w.row({fx.flows[f], to_string(fx.flow_classes[f])});
        }
        csv::write_file_atomic(dir / "flow_schema.csv", w.str());
    }

    // concordance: 1-3 linked sectors per flow; the first final-consumption
    // flow is forced onto households so household direct energy is nonzero
    ConcordanceMatrix concordance;
    concordance.sectors = fx.sector_axis;
    concordance.flows = fx.flows;
    concordance.cells = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(fx.sector_axis.size()),
                                              static_cast<Eigen::Index>(fx.flows.size()));
    bool hh_linked = false;
    for (std::size_t f = 0; f < fx.flows.size(); ++f) {
        int links = rng.uniform_int(1, std::min(3, spec.sectors));
        for (int k = 0; k < links; ++k) {
            int s = rng.uniform_int(0, spec.sectors - 1);
            concordance.cells(s, static_cast<Eigen::Index>(f)) = 1.0;
        }
        if (fx.flow_classes[f] == FlowClass::FinalConsumption && (!hh_linked || rng.chance(0.5))) {
            concordance.cells(static_cast<Eigen::Index>(fx.sector_axis.size()) - 1,
                              static_cast<Eigen::Index>(f)) = 1.0;
            hh_linked = true;
        }
    }
    csv::write_file_atomic(dir / "concordance.csv", concordance.to_csv());

    // one splitting key shared by all regions and the world table, so
    // allocation is linear across regions and the residual stays clean
    SplittingKey key;
    key.sectors = fx.sector_axis;
    key.weights.resize(static_cast<Eigen::Index>(fx.sector_axis.size()));
    for (Eigen::Index i = 0; i < key.weights.size(); ++i) {
        key.weights(i) = rng.uniform(1.0, 20.0);
    }
    csv::write_file_atomic(dir / "splitting_key.csv", key.to_csv());

    // aggregation map with a trailing empty group
    ProductAggregationMap agg_map;
    int groups = std::max(1, (spec.products + 1) / 2);
    for (int g = 1; g <= groups; ++g) {
        agg_map.aggregates.push_back("g" + pad2(g));
    }
    agg_map.aggregates.push_back("g_empty");
    for (int p = 0; p < spec.products; ++p) {
        agg_map.entries.emplace_back(agg_map.aggregates[static_cast<std::size_t>(p % groups)],
                                     fx.products[static_cast<std::size_t>(p)]);
    }
    csv::write_file_atomic(dir / "products.csv", agg_map.to_csv());

    std::vector<int> years;
    for (int y = 0; y < spec.n_years; ++y) {
        years.push_back(spec.first_year + y);
    }

    BalanceSchema schema;
    schema.unit = EnergyUnit::TJ;
    for (std::size_t f = 0; f < fx.flows.size(); ++f) {
        schema.flow_classes.emplace_back(fx.flows[f], fx.flow_classes[f]);
    }

    MappingMatrix mapping = build_mapping(concordance, key);

    for (int year : years) {
        // balances: all regions (incl. the residual one), world = exact sum
        std::vector<EnergyBalanceTable> balances;
        for (const auto& region : fx.all_regions) {
            EnergyBalanceTable b;
            b.country = region;
            b.year = year;
            b.flows = fx.flows;
            b.products = fx.products;
            b.flow_classes = fx.flow_classes;
            b.values.resize(static_cast<Eigen::Index>(fx.flows.size()),
                            static_cast<Eigen::Index>(fx.products.size()));
            for (Eigen::Index f = 0; f < b.values.rows(); ++f) {
                double sign = (fx.flow_classes[static_cast<std::size_t>(f)] ==
                                   FlowClass::Transformation ||
                               fx.flow_classes[static_cast<std::size_t>(f)] ==
                                   FlowClass::EnergyIndustryOwnUse)
                                  ? -1.0
                                  : 1.0;
                for (Eigen::Index p = 0; p < b.values.cols(); ++p) {
                    b.values(f, p) = rng.chance(0.75) ? sign * rng.uniform(1.0, 100.0) : 0.0;
                }
            }
            balances.push_back(std::move(b));
        }

        EnergyBalanceTable world = balances.front();
        world.country = kWorldId;
        for (std::size_t i = 1; i < balances.size(); ++i) {
            world.values += balances[i].values;
        }

        for (std::size_t i = 0; i < fx.member_regions.size(); ++i) {
            csv::write_file_atomic(dir / "balances" /
                                       (fx.member_regions[i] + "_" + std::to_string(year) + ".csv"),
                                   serialize_balance(balances[i]));
        }
        csv::write_file_atomic(dir / "balances" /
                                   (std::string(kWorldId) + "_" + std::to_string(year) + ".csv"),
                               serialize_balance(world));

        // reference accounts: the true aggregated account with product rows
        // rescaled by up to +-10%
        bool reference_year =
            spec.with_reference && (spec.n_years == 1 || year != years.back());
        if (reference_year) {
            for (const auto& b : balances) {
                UseTable use = extract_use_table(b);
                EnergyAccount acct =
                    aggregate_products(allocate(align_flows(use, mapping.flows), mapping), agg_map);
                acct.warnings.clear();
                for (Eigen::Index p = 0; p < acct.values.rows(); ++p) {
                    acct.values.row(p) *= rng.uniform(0.9, 1.1);
                }
                io::write_account(dir / "reference" /
                                      (b.country + "_" + std::to_string(year) + ".csv"),
                                  acct);
            }
        }

        // closed MRIO: draw A with bounded column sums, draw final demand,
        // derive output from the identity, then back out Z = A * diag(x)
        const Eigen::Index rn =
            static_cast<Eigen::Index>(fx.all_regions.size()) * spec.sectors;
        Eigen::MatrixXd A(rn, rn);
        for (Eigen::Index j = 0; j < rn; ++j) {
            Eigen::VectorXd col = Eigen::VectorXd::Zero(rn);
            for (Eigen::Index i = 0; i < rn; ++i) {
                if (rng.chance(0.5)) {
                    col(i) = rng.uniform();
                }
            }
            double sum = col.sum();
            double target = rng.uniform(0.3, 0.6);
            A.col(j) = sum > 0.0 ? Eigen::VectorXd(col * (target / sum)) : col;
        }
        const Eigen::Index rd =
            static_cast<Eigen::Index>(fx.all_regions.size()) * spec.demand_categories;
        Eigen::MatrixXd Y(rn, rd);
        for (Eigen::Index i = 0; i < rn; ++i) {
            for (Eigen::Index j = 0; j < rd; ++j) {
                Y(i, j) = rng.chance(0.8) ? rng.uniform(1.0, 10.0) : 0.0;
            }
        }
        Eigen::VectorXd x =
            (Eigen::MatrixXd::Identity(rn, rn) - A).partialPivLu().solve(Y.rowwise().sum());
        Eigen::MatrixXd Z = A * x.asDiagonal();

        io::MrioInput mrio;
        mrio.regions = fx.all_regions;
        mrio.sectors = fx.sectors;
        for (int d = 1; d <= spec.demand_categories; ++d) {
            mrio.demand_categories.push_back("fd" + pad2(d));
        }
        mrio.Z = std::move(Z);
        mrio.Y = std::move(Y);
        mrio.x = std::move(x);
        io::write_mrio_dir(dir / "mrio" / std::to_string(year), mrio);
    }

    if (spec.with_population) {
        csv::Writer w;
        w.row({"region", "year", "persons"});
        for (const auto& region : fx.all_regions) {
            double persons = static_cast<double>(rng.uniform_int(100000, 100000000));
            for (int year : years) {
                w.row({region, std::to_string(year), format_double(persons)});
            }
        }
        csv::write_file_atomic(dir / "population.csv", w.str());
    }

    // run config
    std::ostringstream cfg;
    cfg << "# synthetic fixture (seed " << spec.seed << ")\n";
    cfg << "years_start = " << years.front() << "\n";
    cfg << "years_end = " << years.back() << "\n";
    cfg << "regions = [";
    for (std::size_t i = 0; i < fx.member_regions.size(); ++i) {
        cfg << (i ? ", " : "") << '"' << fx.member_regions[i] << '"';
    }
    cfg << "]\n";
    if (!fx.residual_region.empty()) {
        cfg << "residual_region = \"" << fx.residual_region << "\"\n";
        cfg << "world_id = \"" << kWorldId << "\"\n";
    }
    cfg << "unit = \"TJ\"\n";
    cfg << "zero_key_fallback = false\n";
    cfg << "extrapolation = \"rolling\"\n";
    cfg << "households = \"include\"\n";
    cfg << "jobs = 1\n";
    cfg << "\n[paths]\n";
    cfg << "balances = \"balances\"\n";
    cfg << "schema = \"flow_schema.csv\"\n";
    cfg << "concordance = \"concordance.csv\"\n";
    cfg << "splitting_keys = \"splitting_key.csv\"\n";
    cfg << "aggregation_map = \"products.csv\"\n";
    cfg << "mrio = \"mrio\"\n";
    if (spec.with_reference) {
        cfg << "reference_accounts = \"reference\"\n";
    }
    if (spec.with_population) {
        cfg << "population = \"population.csv\"\n";
    }
    csv::write_file_atomic(dir / "run.toml", cfg.str());
}

}  // namespace eeio
