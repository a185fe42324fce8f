#pragma once

#include <Eigen/Core>

#include <istream>
#include <string>
#include <vector>

namespace eeio {

// Balance rows are classed by what they describe; only the first four
// classes enter energy use, the last two are supply side bookkeeping.
enum class FlowClass {
    FinalConsumption,
    Bunker,
    EnergyIndustryOwnUse,
    Transformation,
    SupplySide,
    Statistical,
};

FlowClass flow_class_from_string(const std::string& s);
std::string to_string(FlowClass c);

enum class EnergyUnit { TJ, Mtoe };

EnergyUnit energy_unit_from_string(const std::string& s);
std::string to_string(EnergyUnit u);

// All quantities are stored in TJ; Mtoe inputs are converted at parse time.
inline constexpr double kTjPerMtoe = 41868.0;

// Flow classification and input unit for one run. The class map is data,
// not code: it comes from a CSV `flow,flow_class` in schema file order.
struct BalanceSchema {
    EnergyUnit unit = EnergyUnit::TJ;
    std::vector<std::pair<std::string, FlowClass>> flow_classes;

    bool has_flow(const std::string& flow) const;
    FlowClass class_of(const std::string& flow) const;

    static BalanceSchema from_csv(std::istream& in, const std::string& source = "schema");
    std::string to_csv() const;
};

// One country-year energy balance: flows x products, signed per the
// balance convention of the source (transformation and own use negative).
struct EnergyBalanceTable {
    std::string country;
    int year = 0;
    std::vector<std::string> flows;
    std::vector<std::string> products;
    std::vector<FlowClass> flow_classes;  // parallel to flows
    Eigen::MatrixXd values;               // flows x products, TJ

    void validate() const;
};

// Use-side rows only, signs normalized so energy use is nonnegative.
// Negative cells that survive normalization are kept and reported in
// `warnings`; clamping them would break conservation checks downstream.
struct UseTable {
    std::string country;
    int year = 0;
    std::vector<std::string> flows;
    std::vector<std::string> products;
    std::vector<FlowClass> flow_classes;
    Eigen::MatrixXd values;  // flows x products, TJ
    std::vector<std::string> warnings;

    double total() const { return values.sum(); }
    void validate() const;
};

// CSV `flow,product,value`, one row per nonzero cell, '#' comments.
// Unknown flows (not in the schema) are an error. Missing cells are zero.
EnergyBalanceTable parse_balance(std::istream& in, const BalanceSchema& schema,
                                 const std::string& country, int year,
                                 const std::string& source = "balance");

std::string serialize_balance(const EnergyBalanceTable& table);

UseTable extract_use_table(const EnergyBalanceTable& balance);

std::string serialize_use_table(const UseTable& use);

}  // namespace eeio
