#pragma once

#include "eeio/energy_balance.hpp"

#include <Eigen/Core>

#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace eeio {

// Binary linkage between target sectors (incl. the household column) and
// balance flows. A column with a single 1 is a one-to-one allocation.
struct ConcordanceMatrix {
    std::vector<std::string> sectors;  // includes the household id (e.g. "HH")
    std::vector<std::string> flows;
    Eigen::MatrixXd cells;  // sectors x flows, entries 0/1

    void validate() const;
    static ConcordanceMatrix from_csv(std::istream& in, const std::string& source = "concordance");
    std::string to_csv() const;
};

// Monetary weights used to share one-to-many flows across linked sectors.
struct SplittingKey {
    std::vector<std::string> sectors;  // same axis as the concordance
    Eigen::VectorXd weights;           // >= 0, currency units

    void validate() const;
    static SplittingKey from_csv(std::istream& in, const std::string& source = "splitting key");
    std::string to_csv() const;
};

// Sums designated rows of a labeled monetary table (e.g. the inputs
// purchased from the refined-petroleum and electricity sectors) into a
// splitting key over the table's columns. Which rows to sum is
// configuration, not a constant.
SplittingKey splitting_key_from_table(const std::vector<std::string>& row_ids,
                                      const std::vector<std::string>& col_ids,
                                      const Eigen::MatrixXd& table,
                                      const std::vector<std::string>& designated_rows);

// Column-stochastic allocation shares. `expanded` is the product-replicated
// form with one row per (flow, product) pair, flow-major; it is only
// materialized on request since allocation does not need it.
struct MappingMatrix {
    std::vector<std::string> sectors;
    std::vector<std::string> flows;
    Eigen::MatrixXd shares;  // sectors x flows
    std::optional<Eigen::MatrixXd> expanded;  // (flows*products) x sectors

    void validate(double tol = 1e-12) const;
    std::string to_csv() const;
    static MappingMatrix from_csv(std::istream& in, const std::string& source = "mapping");
};

struct BuildMappingOptions {
    // When every sector linked to a flow has zero weight: error by default,
    // or share the flow uniformly over its linked sectors when enabled.
    bool zero_key_fallback = false;
};

MappingMatrix build_mapping(const ConcordanceMatrix& concordance, const SplittingKey& key,
                            const BuildMappingOptions& options = {});

// Replicates each mapping column over `product_count` products.
MappingMatrix expand_mapping(MappingMatrix mapping, int product_count);

enum class AccountStage { Raw, Aggregated, Calibrated };

std::string to_string(AccountStage s);
AccountStage account_stage_from_string(const std::string& s);

// Energy use by product and target sector for one country-year.
struct EnergyAccount {
    std::string country;
    int year = 0;
    std::vector<std::string> products;
    std::vector<std::string> sectors;
    Eigen::MatrixXd values;  // products x sectors, TJ
    AccountStage stage = AccountStage::Raw;
    std::vector<std::string> warnings;

    double total() const { return values.sum(); }
    Eigen::VectorXd product_totals() const { return values.rowwise().sum(); }
    void validate() const;
};

// W(p,s) = sum_f use(f,p) * M(s,f). Requires use flows to be exactly the
// mapping's flow axis; use align_flows first when they are not.
EnergyAccount allocate(const UseTable& use, const MappingMatrix& mapping);

// Reorders use-table rows onto `flow_axis`, inserting zero rows for axis
// flows absent from the table. A use flow missing from the axis is an error.
UseTable align_flows(const UseTable& use, const std::vector<std::string>& flow_axis);

// world minus the sum of members, labeled `residual_id`. Negative cells are
// kept and reported.
EnergyAccount residual_region(const EnergyAccount& world,
                              const std::vector<EnergyAccount>& members,
                              const std::string& residual_id);

// Groups source products into aggregate products. Aggregates without any
// source (declared via the "# aggregates:" directive) become zero rows.
struct ProductAggregationMap {
    std::vector<std::string> aggregates;  // ordered; may include empty groups
    std::vector<std::pair<std::string, std::string>> entries;  // (aggregate, source)

    std::vector<std::string> sources_of(const std::string& aggregate) const;
    void validate() const;
    static ProductAggregationMap from_csv(std::istream& in, const std::string& source = "aggregation map");
    std::string to_csv() const;
};

EnergyAccount aggregate_products(const EnergyAccount& account, const ProductAggregationMap& map);

// Reorders account rows onto `product_order` (an error if the sets differ).
EnergyAccount reorder_products(const EnergyAccount& account,
                               const std::vector<std::string>& product_order);

}  // namespace eeio
