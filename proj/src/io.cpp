#include "eeio/io.hpp"

#include "eeio/csv.hpp"
#include "eeio/errors.hpp"
#include "eeio/text.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace eeio::io {

using nlohmann::json;

namespace {

fs::path sidecar_path(const fs::path& csv_path)
{
    fs::path p = csv_path;
    p.replace_extension(".meta.json");
    return p;
}

json load_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    return json::parse(in);
}

// region:sector style "A:B" labels
std::pair<std::string, std::string> split_label(const std::string& s, const std::string& context)
{
    auto pos = s.find(':');
    if (pos == std::string::npos || pos == 0 || pos + 1 == s.size()) {
        throw ParseError("BadLabel", context + ": expected 'region:item', got '" + s + "'");
    }
    return {s.substr(0, pos), s.substr(pos + 1)};
}

}  // namespace

void write_account(const fs::path& csv_path, const EnergyAccount& account)
{
    account.validate();
    csv::Writer w;
    w.row({"product", "sector", "value_tj"});
    for (Eigen::Index p = 0; p < account.values.rows(); ++p) {
        for (Eigen::Index s = 0; s < account.values.cols(); ++s) {
            w.row({account.products[static_cast<std::size_t>(p)],
                   account.sectors[static_cast<std::size_t>(s)],
                   format_double(account.values(p, s))});
        }
    }
    csv::write_file_atomic(csv_path, w.str());

    json meta;
    meta["country"] = account.country;
    meta["year"] = account.year;
    meta["stage"] = to_string(account.stage);
    meta["unit"] = "TJ";
    meta["products"] = account.products;
    meta["sectors"] = account.sectors;
    meta["warnings"] = account.warnings;
    csv::write_file_atomic(sidecar_path(csv_path), meta.dump(2) + "\n");
}

EnergyAccount read_account(const fs::path& csv_path)
{
    EnergyAccount account;
    json meta = load_json(sidecar_path(csv_path));
    account.country = meta.at("country").get<std::string>();
    account.year = meta.at("year").get<int>();
    account.stage = account_stage_from_string(meta.at("stage").get<std::string>());
    account.products = meta.at("products").get<std::vector<std::string>>();
    account.sectors = meta.at("sectors").get<std::vector<std::string>>();
    account.warnings = meta.at("warnings").get<std::vector<std::string>>();

    std::map<std::string, Eigen::Index> prow, scol;
    for (std::size_t i = 0; i < account.products.size(); ++i) {
        prow[account.products[i]] = static_cast<Eigen::Index>(i);
    }
    for (std::size_t i = 0; i < account.sectors.size(); ++i) {
        scol[account.sectors[i]] = static_cast<Eigen::Index>(i);
    }
    account.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(account.products.size()),
                                           static_cast<Eigen::Index>(account.sectors.size()));

    auto rows = csv::read_file(csv_path);
    if (rows.empty() ||
        rows.front().fields != std::vector<std::string>{"product", "sector", "value_tj"}) {
        throw ParseError("BadHeader", csv_path.string() + ": expected 'product,sector,value_tj'");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.fields.size() != 3) {
            throw ParseError("MalformedRow",
                             csv_path.string() + " line " + std::to_string(r.line_no));
        }
        auto p = prow.find(r.fields[0]);
        auto s = scol.find(r.fields[1]);
        auto v = parse_double(r.fields[2]);
        if (p == prow.end() || s == scol.end() || !v) {
            throw ParseError("MalformedRow", csv_path.string() + " line " +
                                                 std::to_string(r.line_no) +
                                                 ": cell not in sidecar axes");
        }
        account.values(p->second, s->second) = *v;
    }
    account.validate();
    return account;
}

void write_use_table(const fs::path& csv_path, const UseTable& use)
{
    use.validate();
    csv::write_file_atomic(csv_path, serialize_use_table(use));

    json meta;
    meta["country"] = use.country;
    meta["year"] = use.year;
    meta["unit"] = "TJ";
    meta["flows"] = use.flows;
    json classes = json::array();
    for (FlowClass c : use.flow_classes) {
        classes.push_back(to_string(c));
    }
    meta["flow_classes"] = classes;
    meta["products"] = use.products;
    meta["warnings"] = use.warnings;
    csv::write_file_atomic(sidecar_path(csv_path), meta.dump(2) + "\n");
}

UseTable read_use_table(const fs::path& csv_path)
{
    UseTable use;
    json meta = load_json(sidecar_path(csv_path));
    use.country = meta.at("country").get<std::string>();
    use.year = meta.at("year").get<int>();
    use.flows = meta.at("flows").get<std::vector<std::string>>();
    use.products = meta.at("products").get<std::vector<std::string>>();
    use.warnings = meta.at("warnings").get<std::vector<std::string>>();
    for (const auto& c : meta.at("flow_classes")) {
        use.flow_classes.push_back(flow_class_from_string(c.get<std::string>()));
    }

    std::map<std::string, Eigen::Index> frow, pcol;
    for (std::size_t i = 0; i < use.flows.size(); ++i) {
        frow[use.flows[i]] = static_cast<Eigen::Index>(i);
    }
    for (std::size_t i = 0; i < use.products.size(); ++i) {
        pcol[use.products[i]] = static_cast<Eigen::Index>(i);
    }
    use.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(use.flows.size()),
                                       static_cast<Eigen::Index>(use.products.size()));

    auto rows = csv::read_file(csv_path);
    if (rows.empty() || rows.front().fields != std::vector<std::string>{"flow", "product", "value"}) {
        throw ParseError("BadHeader", csv_path.string() + ": expected 'flow,product,value'");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        auto f = frow.find(r.fields[0]);
        auto p = pcol.find(r.fields[1]);
        auto v = r.fields.size() == 3 ? parse_double(r.fields[2]) : std::nullopt;
        if (f == frow.end() || p == pcol.end() || !v) {
            throw ParseError("MalformedRow",
                             csv_path.string() + " line " + std::to_string(r.line_no));
        }
        use.values(f->second, p->second) = *v;
    }
    use.validate();
    return use;
}

namespace {

struct LabeledCsvMatrix {
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    Eigen::MatrixXd values;
};

LabeledCsvMatrix read_matrix_csv(const fs::path& path)
{
    auto rows = csv::read_file(path);
    if (rows.size() < 2 || rows.front().fields.size() < 2) {
        throw ParseError("EmptyMatrix", path.string());
    }
    LabeledCsvMatrix m;
    m.col_labels.assign(rows.front().fields.begin() + 1, rows.front().fields.end());
    m.values.resize(static_cast<Eigen::Index>(rows.size() - 1),
                    static_cast<Eigen::Index>(m.col_labels.size()));
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.fields.size() != rows.front().fields.size()) {
            throw ParseError("MalformedRow", path.string() + " line " + std::to_string(r.line_no));
        }
        m.row_labels.push_back(r.fields[0]);
        for (std::size_t j = 1; j < r.fields.size(); ++j) {
            auto v = parse_double(r.fields[j]);
            if (!v) {
                throw ParseError("MalformedRow",
                                 path.string() + " line " + std::to_string(r.line_no));
            }
            m.values(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1)) = *v;
        }
    }
    return m;
}

// Derives the (regions, items) structure from region:item labels, checking
// the block layout is region-major with a constant item list.
std::pair<std::vector<std::string>, std::vector<std::string>> block_structure(
    const std::vector<std::string>& labels, const std::string& context)
{
    std::vector<std::string> regions;
    std::vector<std::string> items;
    for (const auto& label : labels) {
        auto [region, item] = split_label(label, context);
        if (regions.empty() || regions.back() != region) {
            if (std::find(regions.begin(), regions.end(), region) != regions.end()) {
                throw ParseError("BadLabel", context + ": region '" + region + "' not contiguous");
            }
            regions.push_back(region);
        }
        if (regions.size() == 1) {
            items.push_back(item);
        }
    }
    if (labels.size() != regions.size() * items.size()) {
        throw ParseError("BadLabel", context + ": ragged region blocks");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        std::string expect = regions[i / items.size()] + ":" + items[i % items.size()];
        if (labels[i] != expect) {
            throw ParseError("BadLabel", context + ": expected '" + expect + "' at position " +
                                             std::to_string(i) + ", got '" + labels[i] + "'");
        }
    }
    return {regions, items};
}

}  // namespace

MrioInput read_mrio_dir(const fs::path& dir)
{
    auto z = read_matrix_csv(dir / "Z.csv");
    auto y = read_matrix_csv(dir / "Y.csv");

    MrioInput input;
    auto [regions, sectors] = block_structure(z.row_labels, "Z.csv rows");
    input.regions = regions;
    input.sectors = sectors;
    if (z.col_labels != z.row_labels) {
        throw ParseError("BadLabel", "Z.csv: row and column labels differ");
    }
    input.Z = std::move(z.values);

    if (y.row_labels != z.row_labels) {
        throw ParseError("BadLabel", "Y.csv: row labels differ from Z.csv");
    }
    auto [y_regions, categories] = block_structure(y.col_labels, "Y.csv columns");
    if (y_regions != input.regions) {
        throw ParseError("BadLabel", "Y.csv: demand regions differ from Z.csv regions");
    }
    input.demand_categories = categories;
    input.Y = std::move(y.values);

    auto xrows = csv::read_file(dir / "x.csv");
    if (xrows.empty() || xrows.front().fields != std::vector<std::string>{"region:sector", "value"}) {
        throw ParseError("BadHeader", (dir / "x.csv").string() + ": expected 'region:sector,value'");
    }
    if (xrows.size() - 1 != z.row_labels.size()) {
        throw ParseError("MalformedRow", (dir / "x.csv").string() + ": row count differs from Z");
    }
    input.x.resize(static_cast<Eigen::Index>(z.row_labels.size()));
    for (std::size_t i = 1; i < xrows.size(); ++i) {
        const auto& r = xrows[i];
        auto v = r.fields.size() == 2 ? parse_double(r.fields[1]) : std::nullopt;
        if (!v || r.fields[0] != z.row_labels[i - 1]) {
            throw ParseError("MalformedRow",
                             (dir / "x.csv").string() + " line " + std::to_string(r.line_no));
        }
        input.x(static_cast<Eigen::Index>(i - 1)) = *v;
    }
    return input;
}

void write_mrio_dir(const fs::path& dir, const MrioInput& input)
{
    std::vector<std::string> row_labels;
    for (const auto& r : input.regions) {
        for (const auto& s : input.sectors) {
            row_labels.push_back(r + ":" + s);
        }
    }
    std::vector<std::string> demand_labels;
    for (const auto& r : input.regions) {
        for (const auto& c : input.demand_categories) {
            demand_labels.push_back(r + ":" + c);
        }
    }

    auto matrix_csv = [](const std::string& corner, const std::vector<std::string>& rows,
                         const std::vector<std::string>& cols, const Eigen::MatrixXd& m) {
        csv::Writer w;
        std::vector<std::string> header{corner};
        header.insert(header.end(), cols.begin(), cols.end());
        w.row(header);
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            std::vector<std::string> fields{rows[static_cast<std::size_t>(i)]};
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                fields.push_back(format_double(m(i, j)));
            }
            w.row(fields);
        }
        return w.str();
    };

    csv::write_file_atomic(dir / "Z.csv", matrix_csv("region:sector", row_labels, row_labels, input.Z));
    csv::write_file_atomic(dir / "Y.csv", matrix_csv("region:sector", row_labels, demand_labels, input.Y));

    csv::Writer xw;
    xw.row({"region:sector", "value"});
    for (std::size_t i = 0; i < row_labels.size(); ++i) {
        xw.row({row_labels[i], format_double(input.x(static_cast<Eigen::Index>(i)))});
    }
    csv::write_file_atomic(dir / "x.csv", xw.str());
}

std::map<std::string, std::map<int, double>> read_population(const fs::path& path)
{
    auto rows = csv::read_file(path);
    if (rows.empty() ||
        rows.front().fields != std::vector<std::string>{"region", "year", "persons"}) {
        throw ParseError("BadHeader", path.string() + ": expected 'region,year,persons'");
    }
    std::map<std::string, std::map<int, double>> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        auto year = r.fields.size() == 3 ? parse_int(r.fields[1]) : std::nullopt;
        auto persons = r.fields.size() == 3 ? parse_double(r.fields[2]) : std::nullopt;
        if (!year || !persons) {
            throw ParseError("MalformedRow", path.string() + " line " + std::to_string(r.line_no));
        }
        out[r.fields[0]][static_cast<int>(*year)] = *persons;
    }
    return out;
}

std::string factors_to_csv(const std::vector<CalibrationFactors>& factors)
{
    csv::Writer w;
    w.row({"country", "year", "product", "alpha", "provenance"});
    for (const auto& f : factors) {
        for (std::size_t p = 0; p < f.products.size(); ++p) {
            w.row({f.country, std::to_string(f.year), f.products[p],
                   format_double(f.alpha(static_cast<Eigen::Index>(p))), to_string(f.provenance)});
        }
    }
    return w.str();
}

std::vector<CalibrationFactors> factors_from_csv(const fs::path& path)
{
    auto rows = csv::read_file(path);
    std::vector<std::string> header{"country", "year", "product", "alpha", "provenance"};
    if (rows.empty() || rows.front().fields != header) {
        throw ParseError("BadHeader", path.string());
    }
    std::vector<CalibrationFactors> out;
    std::vector<double> alphas;
    auto flush = [&]() {
        if (!out.empty()) {
            out.back().alpha = Eigen::Map<Eigen::VectorXd>(alphas.data(),
                                                           static_cast<Eigen::Index>(alphas.size()));
            alphas.clear();
        }
    };
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.fields.size() != 5) {
            throw ParseError("MalformedRow", path.string() + " line " + std::to_string(r.line_no));
        }
        auto year = parse_int(r.fields[1]);
        auto alpha = parse_double(r.fields[3]);
        if (!year || !alpha) {
            throw ParseError("MalformedRow", path.string() + " line " + std::to_string(r.line_no));
        }
        if (out.empty() || out.back().country != r.fields[0] ||
            out.back().year != static_cast<int>(*year)) {
            flush();
            CalibrationFactors f;
            f.country = r.fields[0];
            f.year = static_cast<int>(*year);
            f.provenance = factor_provenance_from_string(r.fields[4]);
            out.push_back(std::move(f));
        }
        out.back().products.push_back(r.fields[2]);
        alphas.push_back(*alpha);
    }
    flush();
    for (auto& f : out) {
        f.validate();
    }
    return out;
}

}  // namespace eeio::io
