#include "eeio/allocation.hpp"

#include "eeio/csv.hpp"
#include "eeio/errors.hpp"
#include "eeio/log.hpp"
#include "eeio/text.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace eeio {

namespace {

// Shared reader for matrix-shaped CSVs: first column holds row ids, the
// header row holds column ids.
struct LabeledMatrix {
    std::vector<std::string> row_ids;
    std::vector<std::string> col_ids;
    Eigen::MatrixXd values;
};

LabeledMatrix read_labeled_matrix(std::istream& in, const std::string& source)
{
    auto rows = csv::read(in, source);
    if (rows.size() < 2) {
        throw ParseError("EmptyMatrix", source);
    }
    LabeledMatrix m;
    const auto& header = rows.front().fields;
    if (header.size() < 2) {
        throw ParseError("BadHeader", source + ": needs at least one data column");
    }
    m.col_ids.assign(header.begin() + 1, header.end());
    m.values.resize(static_cast<Eigen::Index>(rows.size() - 1),
                    static_cast<Eigen::Index>(m.col_ids.size()));
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.fields.size() != header.size()) {
            throw ParseError("MalformedRow", source + " line " + std::to_string(r.line_no));
        }
        m.row_ids.push_back(r.fields[0]);
        for (std::size_t j = 1; j < r.fields.size(); ++j) {
            auto v = parse_double(r.fields[j]);
            if (!v) {
                throw ParseError("MalformedRow", source + " line " + std::to_string(r.line_no) +
                                                     ": bad value '" + r.fields[j] + "'");
            }
            m.values(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1)) = *v;
        }
    }
    return m;
}

std::string labeled_matrix_csv(const std::string& corner, const std::vector<std::string>& row_ids,
                               const std::vector<std::string>& col_ids, const Eigen::MatrixXd& values)
{
    csv::Writer w;
    std::vector<std::string> header{corner};
    header.insert(header.end(), col_ids.begin(), col_ids.end());
    w.row(header);
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        std::vector<std::string> fields{row_ids[static_cast<std::size_t>(i)]};
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            fields.push_back(format_double(values(i, j)));
        }
        w.row(fields);
    }
    return w.str();
}

}  // namespace

void ConcordanceMatrix::validate() const
{
    if (cells.rows() != static_cast<Eigen::Index>(sectors.size()) ||
        cells.cols() != static_cast<Eigen::Index>(flows.size())) {
        throw ValidationError("concordance: shape mismatch");
    }
    for (Eigen::Index s = 0; s < cells.rows(); ++s) {
        for (Eigen::Index f = 0; f < cells.cols(); ++f) {
            double v = cells(s, f);
            if (v != 0.0 && v != 1.0) {
                throw ValidationError("concordance: cell (" + sectors[static_cast<std::size_t>(s)] +
                                      "," + flows[static_cast<std::size_t>(f)] + ") is not 0/1");
            }
        }
    }
    for (Eigen::Index f = 0; f < cells.cols(); ++f) {
        if (cells.col(f).sum() < 1.0) {
            throw ValidationError("concordance: flow '" + flows[static_cast<std::size_t>(f)] +
                                  "' is linked to no sector");
        }
    }
}

ConcordanceMatrix ConcordanceMatrix::from_csv(std::istream& in, const std::string& source)
{
    auto m = read_labeled_matrix(in, source);
    ConcordanceMatrix c;
    c.sectors = std::move(m.row_ids);
    c.flows = std::move(m.col_ids);
    c.cells = std::move(m.values);
    c.validate();
    return c;
}

std::string ConcordanceMatrix::to_csv() const
{
    return labeled_matrix_csv("sector", sectors, flows, cells);
}

void SplittingKey::validate() const
{
    if (weights.size() != static_cast<Eigen::Index>(sectors.size())) {
        throw ValidationError("splitting key: length does not match sector axis");
    }
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        if (!(weights(i) >= 0.0)) {
            throw ValidationError("splitting key: negative weight for sector '" +
                                  sectors[static_cast<std::size_t>(i)] + "'");
        }
    }
}

SplittingKey SplittingKey::from_csv(std::istream& in, const std::string& source)
{
    auto rows = csv::read(in, source);
    if (rows.empty() || rows.front().fields != std::vector<std::string>{"sector", "weight"}) {
        throw ParseError("BadHeader", source + ": expected 'sector,weight'");
    }
    SplittingKey key;
    std::vector<double> weights;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.fields.size() != 2) {
            throw ParseError("MalformedRow", source + " line " + std::to_string(r.line_no));
        }
        auto v = parse_double(r.fields[1]);
        if (!v) {
            throw ParseError("MalformedRow", source + " line " + std::to_string(r.line_no) +
                                                 ": bad weight '" + r.fields[1] + "'");
        }
        key.sectors.push_back(r.fields[0]);
        weights.push_back(*v);
    }
    key.weights = Eigen::Map<Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
    key.validate();
    return key;
}

std::string SplittingKey::to_csv() const
{
    csv::Writer w;
    w.row({"sector", "weight"});
    for (std::size_t i = 0; i < sectors.size(); ++i) {
        w.row({sectors[i], format_double(weights(static_cast<Eigen::Index>(i)))});
    }
    return w.str();
}

SplittingKey splitting_key_from_table(const std::vector<std::string>& row_ids,
                                      const std::vector<std::string>& col_ids,
                                      const Eigen::MatrixXd& table,
                                      const std::vector<std::string>& designated_rows)
{
    if (table.rows() != static_cast<Eigen::Index>(row_ids.size()) ||
        table.cols() != static_cast<Eigen::Index>(col_ids.size())) {
        throw AxisError("splitting key source table: shape mismatch");
    }
    SplittingKey key;
    key.sectors = col_ids;
    key.weights = Eigen::VectorXd::Zero(table.cols());
    for (const std::string& id : designated_rows) {
        auto it = std::find(row_ids.begin(), row_ids.end(), id);
        if (it == row_ids.end()) {
            throw AxisError("splitting key: designated row '" + id + "' not in table");
        }
        key.weights += table.row(it - row_ids.begin()).transpose();
    }
    key.validate();
    return key;
}

void MappingMatrix::validate(double tol) const
{
    if (shares.rows() != static_cast<Eigen::Index>(sectors.size()) ||
        shares.cols() != static_cast<Eigen::Index>(flows.size())) {
        throw ValidationError("mapping: shape mismatch");
    }
    for (Eigen::Index f = 0; f < shares.cols(); ++f) {
        double sum = shares.col(f).sum();
        if (std::abs(sum - 1.0) > tol) {
            throw ValidationError("mapping: column '" + flows[static_cast<std::size_t>(f)] +
                                  "' sums to " + format_double(sum) + ", not 1");
        }
    }
}

std::string MappingMatrix::to_csv() const
{
    return labeled_matrix_csv("sector", sectors, flows, shares);
}

MappingMatrix MappingMatrix::from_csv(std::istream& in, const std::string& source)
{
    auto m = read_labeled_matrix(in, source);
    MappingMatrix map;
    map.sectors = std::move(m.row_ids);
    map.flows = std::move(m.col_ids);
    map.shares = std::move(m.values);
    return map;
}

MappingMatrix build_mapping(const ConcordanceMatrix& concordance, const SplittingKey& key,
                            const BuildMappingOptions& options)
{
    concordance.validate();
    key.validate();
    if (key.sectors != concordance.sectors) {
        throw AxisError("splitting key sector axis differs from concordance");
    }

    const Eigen::Index S = concordance.cells.rows();
    const Eigen::Index F = concordance.cells.cols();

    MappingMatrix map;
    map.sectors = concordance.sectors;
    map.flows = concordance.flows;
    map.shares = Eigen::MatrixXd::Zero(S, F);

    for (Eigen::Index f = 0; f < F; ++f) {
        double denom = 0.0;
        for (Eigen::Index s = 0; s < S; ++s) {
            denom += key.weights(s) * concordance.cells(s, f);
        }
        if (denom > 0.0) {
            for (Eigen::Index s = 0; s < S; ++s) {
                if (concordance.cells(s, f) != 0.0) {
                    map.shares(s, f) = key.weights(s) / denom;
                }
            }
        } else {
            if (!options.zero_key_fallback) {
                throw Error("ZeroSplittingKey: flow '" +
                            concordance.flows[static_cast<std::size_t>(f)] +
                            "' links only zero-weight sectors (enable the uniform fallback to proceed)");
            }
            double linked = concordance.cells.col(f).sum();
            for (Eigen::Index s = 0; s < S; ++s) {
                if (concordance.cells(s, f) != 0.0) {
                    map.shares(s, f) = 1.0 / linked;
                }
            }
            log::warn("zero splitting key for flow '" +
                      concordance.flows[static_cast<std::size_t>(f)] +
                      "': shared uniformly over linked sectors");
        }
    }
    return map;
}

MappingMatrix expand_mapping(MappingMatrix mapping, int product_count)
{
    if (product_count < 1) {
        throw ValidationError("expand_mapping: product count must be >= 1");
    }
    const Eigen::Index S = mapping.shares.rows();
    const Eigen::Index F = mapping.shares.cols();
    const Eigen::Index P = product_count;

    Eigen::MatrixXd expanded(F * P, S);
    for (Eigen::Index f = 0; f < F; ++f) {
        for (Eigen::Index p = 0; p < P; ++p) {
            expanded.row(f * P + p) = mapping.shares.col(f).transpose();
        }
    }
    mapping.expanded = std::move(expanded);
    return mapping;
}

std::string to_string(AccountStage s)
{
    switch (s) {
        case AccountStage::Raw: return "raw";
        case AccountStage::Aggregated: return "aggregated";
        case AccountStage::Calibrated: return "calibrated";
    }
    return "?";
}

AccountStage account_stage_from_string(const std::string& s)
{
    if (s == "raw") return AccountStage::Raw;
    if (s == "aggregated") return AccountStage::Aggregated;
    if (s == "calibrated") return AccountStage::Calibrated;
    throw ParseError("UnknownStage", "'" + s + "'");
}

void EnergyAccount::validate() const
{
    if (values.rows() != static_cast<Eigen::Index>(products.size()) ||
        values.cols() != static_cast<Eigen::Index>(sectors.size())) {
        throw ValidationError("account " + country + "/" + std::to_string(year) +
                              ": shape mismatch");
    }
}

EnergyAccount allocate(const UseTable& use, const MappingMatrix& mapping)
{
    use.validate();
    if (use.flows != mapping.flows) {
        throw AxisError("allocate: use-table flow axis does not match the mapping flow axis");
    }

    // Computed per flow block instead of materializing the expanded
    // mapping; algebraically identical to multiplying the block-diagonal
    // product layout with it.
    EnergyAccount account;
    account.country = use.country;
    account.year = use.year;
    account.products = use.products;
    account.sectors = mapping.sectors;
    account.stage = AccountStage::Raw;
    account.values = use.values.transpose() * mapping.shares.transpose();
    account.validate();
    return account;
}

UseTable align_flows(const UseTable& use, const std::vector<std::string>& flow_axis)
{
    std::map<std::string, Eigen::Index> pos;
    for (std::size_t i = 0; i < flow_axis.size(); ++i) {
        pos[flow_axis[i]] = static_cast<Eigen::Index>(i);
    }
    for (const auto& flow : use.flows) {
        if (!pos.count(flow)) {
            throw AxisError("align_flows: use flow '" + flow + "' missing from target axis");
        }
    }

    UseTable aligned;
    aligned.country = use.country;
    aligned.year = use.year;
    aligned.products = use.products;
    aligned.flows = flow_axis;
    aligned.warnings = use.warnings;
    aligned.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(flow_axis.size()),
                                           static_cast<Eigen::Index>(use.products.size()));
    // padded rows are all-zero; their class is a placeholder
    aligned.flow_classes.assign(flow_axis.size(), FlowClass::FinalConsumption);
    for (std::size_t f = 0; f < use.flows.size(); ++f) {
        Eigen::Index target = pos[use.flows[f]];
        aligned.values.row(target) = use.values.row(static_cast<Eigen::Index>(f));
        aligned.flow_classes[static_cast<std::size_t>(target)] = use.flow_classes[f];
    }
    return aligned;
}

EnergyAccount residual_region(const EnergyAccount& world,
                              const std::vector<EnergyAccount>& members,
                              const std::string& residual_id)
{
    world.validate();
    EnergyAccount residual;
    residual.country = residual_id;
    residual.year = world.year;
    residual.products = world.products;
    residual.sectors = world.sectors;
    residual.stage = world.stage;
    residual.values = world.values;

    for (const EnergyAccount& m : members) {
        m.validate();
        if (m.products != world.products || m.sectors != world.sectors) {
            throw AxisError("residual_region: member '" + m.country +
                            "' axes differ from the world account");
        }
        if (m.stage != world.stage) {
            throw AxisError("residual_region: member '" + m.country +
                            "' stage differs from the world account");
        }
        residual.values -= m.values;
    }

    for (Eigen::Index p = 0; p < residual.values.rows(); ++p) {
        for (Eigen::Index s = 0; s < residual.values.cols(); ++s) {
            if (residual.values(p, s) < 0.0) {
                residual.warnings.push_back(
                    "negative residual cell at (" + residual.products[static_cast<std::size_t>(p)] +
                    "," + residual.sectors[static_cast<std::size_t>(s)] + ") = " +
                    format_double(residual.values(p, s)));
            }
        }
    }
    if (!residual.warnings.empty()) {
        log::warn(residual_id + "/" + std::to_string(residual.year) + ": " +
                  std::to_string(residual.warnings.size()) + " negative residual cell(s)");
    }
    return residual;
}

std::vector<std::string> ProductAggregationMap::sources_of(const std::string& aggregate) const
{
    std::vector<std::string> out;
    for (const auto& [agg, src] : entries) {
        if (agg == aggregate) {
            out.push_back(src);
        }
    }
    return out;
}

void ProductAggregationMap::validate() const
{
    std::set<std::string> agg_set(aggregates.begin(), aggregates.end());
    if (agg_set.size() != aggregates.size()) {
        throw ValidationError("aggregation map: duplicate aggregate id");
    }
    std::set<std::string> seen;
    for (const auto& [agg, src] : entries) {
        if (!agg_set.count(agg)) {
            throw ValidationError("aggregation map: aggregate '" + agg + "' not declared");
        }
        if (!seen.insert(src).second) {
            throw ValidationError("aggregation map: source product '" + src +
                                  "' mapped more than once");
        }
    }
}

ProductAggregationMap ProductAggregationMap::from_csv(std::istream& in, const std::string& source)
{
    // the "# aggregates:" directive declares the full ordered target list,
    // which is how groups with no source rows (e.g. losses) exist at all
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::istringstream dir_in(content);
    auto directives = csv::read_directives(dir_in);

    ProductAggregationMap map;
    for (const auto& [k, v] : directives) {
        if (k == "aggregates") {
            for (const auto& id : split(v, ',')) {
                std::string t = trim(id);
                if (!t.empty()) {
                    map.aggregates.push_back(t);
                }
            }
        }
    }

    std::istringstream csv_in(content);
    auto rows = csv::read(csv_in, source);
    if (rows.empty() ||
        rows.front().fields != std::vector<std::string>{"aggregate_product", "source_product"}) {
        throw ParseError("BadHeader", source + ": expected 'aggregate_product,source_product'");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.fields.size() != 2) {
            throw ParseError("MalformedRow", source + " line " + std::to_string(r.line_no));
        }
        if (map.aggregates.empty() ||
            std::find(map.aggregates.begin(), map.aggregates.end(), r.fields[0]) ==
                map.aggregates.end()) {
            if (!map.aggregates.empty()) {
                throw ParseError("UnknownAggregate",
                                 source + " line " + std::to_string(r.line_no) + ": '" +
                                     r.fields[0] + "' not in the aggregates directive");
            }
        }
        map.entries.emplace_back(r.fields[0], r.fields[1]);
    }
    if (map.aggregates.empty()) {
        // no directive: aggregate order is first appearance, no empty groups
        for (const auto& [agg, src] : map.entries) {
            if (std::find(map.aggregates.begin(), map.aggregates.end(), agg) ==
                map.aggregates.end()) {
                map.aggregates.push_back(agg);
            }
        }
    }
    map.validate();
    return map;
}

std::string ProductAggregationMap::to_csv() const
{
    csv::Writer w;
    std::string ids;
    for (std::size_t i = 0; i < aggregates.size(); ++i) {
        if (i > 0) {
            ids += ",";
        }
        ids += aggregates[i];
    }
    w.comment("aggregates: " + ids);
    w.row({"aggregate_product", "source_product"});
    for (const auto& [agg, src] : entries) {
        w.row({agg, src});
    }
    return w.str();
}

EnergyAccount aggregate_products(const EnergyAccount& account, const ProductAggregationMap& map)
{
    account.validate();
    map.validate();
    if (account.stage != AccountStage::Raw) {
        throw ValidationError("aggregate_products: account '" + account.country +
                              "' is already " + to_string(account.stage));
    }

    std::map<std::string, std::size_t> group_of;
    for (const auto& [agg, src] : map.entries) {
        auto it = std::find(map.aggregates.begin(), map.aggregates.end(), agg);
        group_of[src] = static_cast<std::size_t>(it - map.aggregates.begin());
    }
    for (const auto& product : account.products) {
        if (!group_of.count(product)) {
            throw AxisError("aggregate_products: source product '" + product +
                            "' has no aggregate group");
        }
    }

    EnergyAccount out;
    out.country = account.country;
    out.year = account.year;
    out.sectors = account.sectors;
    out.products = map.aggregates;
    out.stage = AccountStage::Aggregated;
    out.warnings = account.warnings;
    out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(map.aggregates.size()),
                                       static_cast<Eigen::Index>(account.sectors.size()));
    for (std::size_t p = 0; p < account.products.size(); ++p) {
        out.values.row(static_cast<Eigen::Index>(group_of[account.products[p]])) +=
            account.values.row(static_cast<Eigen::Index>(p));
    }
    return out;
}

EnergyAccount reorder_products(const EnergyAccount& account,
                               const std::vector<std::string>& product_order)
{
    if (account.products == product_order) {
        return account;
    }
    std::map<std::string, Eigen::Index> pos;
    for (std::size_t i = 0; i < account.products.size(); ++i) {
        pos[account.products[i]] = static_cast<Eigen::Index>(i);
    }
    if (pos.size() != product_order.size()) {
        throw AxisError("reorder_products: product sets differ in size");
    }
    EnergyAccount out = account;
    out.products = product_order;
    for (std::size_t i = 0; i < product_order.size(); ++i) {
        auto it = pos.find(product_order[i]);
        if (it == pos.end()) {
            throw AxisError("reorder_products: product '" + product_order[i] +
                            "' missing from account '" + account.country + "'");
        }
        out.values.row(static_cast<Eigen::Index>(i)) = account.values.row(it->second);
    }
    return out;
}

}  // namespace eeio
