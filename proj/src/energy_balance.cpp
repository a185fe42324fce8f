#include "eeio/energy_balance.hpp"

#include "eeio/csv.hpp"
#include "eeio/errors.hpp"
#include "eeio/log.hpp"
#include "eeio/text.hpp"

#include <map>
#include <set>

namespace eeio {

FlowClass flow_class_from_string(const std::string& s)
{
    if (s == "final_consumption") return FlowClass::FinalConsumption;
    if (s == "bunker") return FlowClass::Bunker;
    if (s == "energy_industry_own_use") return FlowClass::EnergyIndustryOwnUse;
    if (s == "transformation") return FlowClass::Transformation;
    if (s == "supply_side") return FlowClass::SupplySide;
    if (s == "statistical") return FlowClass::Statistical;
    throw ParseError("UnknownFlowClass", "'" + s + "'");
}

std::string to_string(FlowClass c)
{
    switch (c) {
        case FlowClass::FinalConsumption: return "final_consumption";
        case FlowClass::Bunker: return "bunker";
        case FlowClass::EnergyIndustryOwnUse: return "energy_industry_own_use";
        case FlowClass::Transformation: return "transformation";
        case FlowClass::SupplySide: return "supply_side";
        case FlowClass::Statistical: return "statistical";
    }
    return "?";
}

EnergyUnit energy_unit_from_string(const std::string& s)
{
    if (s == "TJ") return EnergyUnit::TJ;
    if (s == "Mtoe") return EnergyUnit::Mtoe;
    throw ParseError("UnknownUnit", "'" + s + "' (expected TJ or Mtoe)");
}

std::string to_string(EnergyUnit u)
{
    return u == EnergyUnit::TJ ? "TJ" : "Mtoe";
}

bool BalanceSchema::has_flow(const std::string& flow) const
{
    for (const auto& [id, cls] : flow_classes) {
        if (id == flow) {
            return true;
        }
    }
    return false;
}

FlowClass BalanceSchema::class_of(const std::string& flow) const
{
    for (const auto& [id, cls] : flow_classes) {
        if (id == flow) {
            return cls;
        }
    }
    throw ParseError("MissingFlowClass", "flow '" + flow + "' has no class in schema");
}

BalanceSchema BalanceSchema::from_csv(std::istream& in, const std::string& source)
{
    auto rows = csv::read(in, source);
    if (rows.empty()) {
        throw ParseError("EmptySchema", source);
    }
    if (rows.front().fields != std::vector<std::string>{"flow", "flow_class"}) {
        throw ParseError("BadHeader", source + ": expected 'flow,flow_class'");
    }
    BalanceSchema schema;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.fields.size() != 2) {
            throw ParseError("MalformedRow", source + " line " + std::to_string(r.line_no));
        }
        const std::string& flow = r.fields[0];
        if (schema.has_flow(flow)) {
            throw ParseError("DuplicateFlow", source + ": flow '" + flow + "' classified twice");
        }
        schema.flow_classes.emplace_back(flow, flow_class_from_string(r.fields[1]));
    }
    return schema;
}

std::string BalanceSchema::to_csv() const
{
    csv::Writer w;
    w.row({"flow", "flow_class"});
    for (const auto& [flow, cls] : flow_classes) {
        w.row({flow, to_string(cls)});
    }
    return w.str();
}

void EnergyBalanceTable::validate() const
{
    if (values.rows() != static_cast<Eigen::Index>(flows.size()) ||
        values.cols() != static_cast<Eigen::Index>(products.size())) {
        throw ValidationError("balance " + country + "/" + std::to_string(year) +
                              ": value matrix shape does not match axis labels");
    }
    if (flow_classes.size() != flows.size()) {
        throw ValidationError("balance " + country + "/" + std::to_string(year) +
                              ": every flow needs exactly one flow class");
    }
}

void UseTable::validate() const
{
    if (values.rows() != static_cast<Eigen::Index>(flows.size()) ||
        values.cols() != static_cast<Eigen::Index>(products.size())) {
        throw ValidationError("use table " + country + ": shape mismatch");
    }
    for (FlowClass c : flow_classes) {
        if (c == FlowClass::SupplySide || c == FlowClass::Statistical) {
            throw ValidationError("use table " + country + ": contains a supply-side flow");
        }
    }
}

EnergyBalanceTable parse_balance(std::istream& in, const BalanceSchema& schema,
                                 const std::string& country, int year,
                                 const std::string& source)
{
    auto rows = csv::read(in, source);
    if (rows.empty()) {
        throw ParseError("EmptyBalance", source + ": no header");
    }
    if (rows.front().fields != std::vector<std::string>{"flow", "product", "value"}) {
        throw ParseError("BadHeader", source + ": expected 'flow,product,value'");
    }
    if (rows.size() == 1) {
        throw ParseError("EmptyBalance", source + ": header only, no data rows");
    }

    const double scale = schema.unit == EnergyUnit::Mtoe ? kTjPerMtoe : 1.0;

    EnergyBalanceTable table;
    table.country = country;
    table.year = year;

    // first-appearance axis order, so serialize/parse round-trips
    std::map<std::string, int> flow_index;
    std::map<std::string, int> product_index;
    struct Cell {
        int flow;
        int product;
        double value;
    };
    std::vector<Cell> cells;
    std::set<std::pair<int, int>> seen;

    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.fields.size() != 3) {
            throw ParseError("MalformedRow", source + " line " + std::to_string(r.line_no) +
                                                 ": expected 3 columns, got " +
                                                 std::to_string(r.fields.size()));
        }
        const std::string& flow = r.fields[0];
        const std::string& product = r.fields[1];
        if (!schema.has_flow(flow)) {
            throw ParseError("UnknownFlow", source + " line " + std::to_string(r.line_no) +
                                                ": flow '" + flow + "' not in schema");
        }
        if (product.empty()) {
            throw ParseError("UnknownProduct",
                             source + " line " + std::to_string(r.line_no) + ": empty product id");
        }
        auto value = parse_double(r.fields[2]);
        if (!value || std::isnan(*value)) {
            throw ParseError("MalformedRow", source + " line " + std::to_string(r.line_no) +
                                                 ": bad value '" + r.fields[2] + "'");
        }
        auto [fit, fnew] = flow_index.try_emplace(flow, static_cast<int>(table.flows.size()));
        if (fnew) {
            table.flows.push_back(flow);
            table.flow_classes.push_back(schema.class_of(flow));
        }
        auto [pit, pnew] = product_index.try_emplace(product, static_cast<int>(table.products.size()));
        if (pnew) {
            table.products.push_back(product);
        }
        if (!seen.emplace(fit->second, pit->second).second) {
            throw ParseError("DuplicateCell", source + " line " + std::to_string(r.line_no) +
                                                  ": cell (" + flow + "," + product +
                                                  ") given more than once");
        }
        cells.push_back(Cell{fit->second, pit->second, *value * scale});
    }

    table.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(table.flows.size()),
                                         static_cast<Eigen::Index>(table.products.size()));
    for (const Cell& c : cells) {
        table.values(c.flow, c.product) = c.value;
    }
    table.validate();
    return table;
}

std::string serialize_balance(const EnergyBalanceTable& table)
{
    csv::Writer w;
    w.row({"flow", "product", "value"});
    for (Eigen::Index f = 0; f < table.values.rows(); ++f) {
        for (Eigen::Index p = 0; p < table.values.cols(); ++p) {
            double v = table.values(f, p);
            if (v != 0.0) {
                w.row({table.flows[static_cast<std::size_t>(f)],
                       table.products[static_cast<std::size_t>(p)], format_double(v)});
            }
        }
    }
    return w.str();
}

UseTable extract_use_table(const EnergyBalanceTable& balance)
{
    balance.validate();

    UseTable use;
    use.country = balance.country;
    use.year = balance.year;
    use.products = balance.products;

    std::vector<Eigen::Index> kept;
    std::vector<double> signs;
    for (std::size_t f = 0; f < balance.flows.size(); ++f) {
        switch (balance.flow_classes[f]) {
            case FlowClass::FinalConsumption:
            case FlowClass::Bunker:
                kept.push_back(static_cast<Eigen::Index>(f));
                signs.push_back(1.0);
                break;
            case FlowClass::EnergyIndustryOwnUse:
            case FlowClass::Transformation:
                kept.push_back(static_cast<Eigen::Index>(f));
                signs.push_back(-1.0);
                break;
            case FlowClass::SupplySide:
            case FlowClass::Statistical:
                break;
        }
    }

    use.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(kept.size()),
                                       static_cast<Eigen::Index>(balance.products.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) {
        use.flows.push_back(balance.flows[static_cast<std::size_t>(kept[i])]);
        use.flow_classes.push_back(balance.flow_classes[static_cast<std::size_t>(kept[i])]);
        use.values.row(static_cast<Eigen::Index>(i)) = signs[i] * balance.values.row(kept[i]);
    }

    // negative entries after the sign flip are kept, not clamped
    for (Eigen::Index f = 0; f < use.values.rows(); ++f) {
        for (Eigen::Index p = 0; p < use.values.cols(); ++p) {
            if (use.values(f, p) < 0.0) {
                std::string msg = "negative use value " + format_double(use.values(f, p)) +
                                  " at (" + use.flows[static_cast<std::size_t>(f)] + "," +
                                  use.products[static_cast<std::size_t>(p)] + ")";
                use.warnings.push_back(msg);
                log::warn(balance.country + "/" + std::to_string(balance.year) + ": " + msg);
            }
        }
    }
    if (use.flows.empty()) {
        std::string msg = "no use-side flows retained";
        use.warnings.push_back(msg);
        log::warn(balance.country + "/" + std::to_string(balance.year) + ": " + msg);
    }

    use.validate();
    return use;
}

std::string serialize_use_table(const UseTable& use)
{
    csv::Writer w;
    w.row({"flow", "product", "value"});
    for (Eigen::Index f = 0; f < use.values.rows(); ++f) {
        for (Eigen::Index p = 0; p < use.values.cols(); ++p) {
            double v = use.values(f, p);
            if (v != 0.0) {
                w.row({use.flows[static_cast<std::size_t>(f)],
                       use.products[static_cast<std::size_t>(p)], format_double(v)});
            }
        }
    }
    return w.str();
}

}  // namespace eeio
