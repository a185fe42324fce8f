// Acceptance suite: one check per release criterion, one pass/fail line
// each, nonzero exit when anything fails. Tolerances and runtime budgets
// are pinned here, not configurable.

#include "eeio/allocation.hpp"
#include "eeio/calibration.hpp"
#include "eeio/csv.hpp"
#include "eeio/fixture.hpp"
#include "eeio/mrio.hpp"
#include "eeio/pipeline.hpp"
#include "eeio/text.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace eeio;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double ms_since(Clock::time_point start)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void report(int number, const std::string& name, bool ok, double elapsed_ms,
            const std::string& detail = "")
{
    std::ostringstream line;
    line << (ok ? "PASS" : "FAIL") << "  " << number << ". " << name << "  ("
         << format_double(elapsed_ms) << " ms)";
    if (!detail.empty()) {
        line << "  " << detail;
    }
    std::cout << line.str() << "\n";
    if (!ok) {
        ++g_failures;
    }
}

struct Check {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what)
    {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
    void require_close(double got, double want, double tol, const std::string& what)
    {
        if (!(std::abs(got - want) <= tol)) {
            require(false, what + ": got " + format_double(got) + ", want " +
                               format_double(want) + " within " + format_double(tol));
        }
    }
};

// deterministic uniforms for the random suites
class Uniform {
public:
    explicit Uniform(std::uint64_t seed) : engine_(seed) {}
    double operator()() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double operator()(double lo, double hi) { return lo + (hi - lo) * (*this)(); }
    int integer(int lo, int hi) { return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1)); }

private:
    std::mt19937_64 engine_;
};

ConcordanceMatrix paper_concordance()
{
    ConcordanceMatrix c;
    c.sectors = {"s1", "s2", "s3", "s4"};
    c.flows = {"fl1", "fl2", "fl3"};
    c.cells.resize(4, 3);
    c.cells << 1, 0, 1,
               1, 0, 1,
               0, 1, 1,
               0, 0, 1;
    return c;
}

SplittingKey paper_key()
{
    SplittingKey a;
    a.sectors = {"s1", "s2", "s3", "s4"};
    a.weights.resize(4);
    a.weights << 12, 4, 1, 14;
    return a;
}

// 1. mapping regression against the worked example
void criterion_mapping()
{
    auto start = Clock::now();
    auto mapping = build_mapping(paper_concordance(), paper_key());
    double elapsed = ms_since(start);

    Check c;
    Eigen::MatrixXd exact(4, 3);
    exact << 3.0 / 4.0, 0, 12.0 / 31.0,
             1.0 / 4.0, 0, 4.0 / 31.0,
             0, 1, 1.0 / 31.0,
             0, 0, 14.0 / 31.0;
    c.require(mapping.shares == exact, "shares differ from the exact fractions");

    Eigen::MatrixXd printed(4, 3);
    printed << 0.75, 0, 0.39,
               0.25, 0, 0.13,
               0, 1, 0.03,
               0, 0, 0.45;
    c.require((mapping.shares - printed).cwiseAbs().maxCoeff() <= 0.005,
              "two-decimal display deviates by more than 0.005");
    c.require(elapsed < 1.0, "runtime over 1 ms");
    report(1, "mapping regression", c.ok, elapsed, c.detail);
}

// 2. allocation regression against the worked example
void criterion_allocation()
{
    UseTable use;
    use.country = "X";
    use.year = 2000;
    use.flows = {"fl1", "fl2", "fl3"};
    use.flow_classes = {FlowClass::FinalConsumption, FlowClass::FinalConsumption,
                        FlowClass::FinalConsumption};
    use.products = {"pr1", "pr2"};
    use.values.resize(3, 2);
    use.values << 100, 20, 4, 2, 15, 1;

    MappingMatrix m;
    m.sectors = {"s1", "s2", "s3", "s4"};
    m.flows = use.flows;
    m.shares.resize(4, 3);
    m.shares << 0.75, 0, 0.39,
                0.25, 0, 0.13,
                0, 1, 0.03,
                0, 0, 0.45;

    auto start = Clock::now();
    auto account = allocate(use, m);
    double elapsed = ms_since(start);

    Check c;
    Eigen::MatrixXd expected(2, 4);
    expected << 80.85, 26.95, 4.45, 6.75,
                15.39, 5.13, 2.03, 0.45;
    c.require((account.values - expected).cwiseAbs().maxCoeff() < 1e-12,
              "allocation differs from the two-decimal expansion");
    Eigen::MatrixXd printed(2, 4);
    printed << 80, 27, 4, 6,
               15, 5, 2, 0.5;
    if ((account.values - printed).cwiseAbs().maxCoeff() > 0.5) {
        std::string cells;
        for (Eigen::Index p = 0; p < printed.rows(); ++p) {
            for (Eigen::Index s = 0; s < printed.cols(); ++s) {
                if (std::abs(account.values(p, s) - printed(p, s)) > 0.5) {
                    cells += " (" + std::to_string(p) + "," + std::to_string(s) + ") " +
                             format_double(account.values(p, s)) + " vs printed " +
                             format_double(printed(p, s)) + ";";
                }
            }
        }
        c.require(false,
                  "printed reference table deviates from its own arithmetic beyond the 0.5 "
                  "bound at:" + cells);
    }
    c.require(elapsed < 1.0, "runtime over 1 ms");
    report(2, "allocation regression", c.ok, elapsed, c.detail);
}

// 3. conservation on 200 seeded random instances
void criterion_conservation()
{
    auto start = Clock::now();
    Check c;
    Uniform rng(1003);
    for (int trial = 0; trial < 200; ++trial) {
        int F = rng.integer(1, 20);
        int P = rng.integer(1, 10);
        int S = rng.integer(1, 15);

        ConcordanceMatrix conc;
        for (int s = 0; s < S; ++s) conc.sectors.push_back("s" + std::to_string(s));
        for (int f = 0; f < F; ++f) conc.flows.push_back("f" + std::to_string(f));
        conc.cells = Eigen::MatrixXd::Zero(S, F);
        for (int f = 0; f < F; ++f) {
            int links = rng.integer(1, std::min(4, S));
            for (int k = 0; k < links; ++k) {
                conc.cells(rng.integer(0, S - 1), f) = 1.0;
            }
        }
        SplittingKey key;
        key.sectors = conc.sectors;
        key.weights.resize(S);
        for (int s = 0; s < S; ++s) key.weights(s) = rng(0.1, 10.0);

        UseTable use;
        use.country = "X";
        use.year = 2000;
        use.flows = conc.flows;
        use.flow_classes.assign(static_cast<std::size_t>(F), FlowClass::FinalConsumption);
        for (int p = 0; p < P; ++p) use.products.push_back("p" + std::to_string(p));
        use.values.resize(F, P);
        for (int f = 0; f < F; ++f) {
            for (int p = 0; p < P; ++p) {
                use.values(f, p) = rng(0.0, 100.0);
            }
        }

        auto account = allocate(use, build_mapping(conc, key));
        for (int p = 0; p < P; ++p) {
            double want = use.values.col(p).sum();
            double got = account.values.row(p).sum();
            if (std::abs(got - want) > 1e-9 * std::max(1.0, std::abs(want))) {
                c.require(false, "trial " + std::to_string(trial) + " product " +
                                     std::to_string(p) + ": " + format_double(got) + " vs " +
                                     format_double(want));
            }
        }
    }
    double elapsed = ms_since(start);
    c.require(elapsed < 5000.0, "suite over 5 s");
    report(3, "allocation conservation (200 random instances)", c.ok, elapsed, c.detail);
}

// 4. calibration round-trip on 100 seeded random pairs
void criterion_calibration()
{
    auto start = Clock::now();
    Check c;
    Uniform rng(1004);
    for (int trial = 0; trial < 100; ++trial) {
        int P = rng.integer(1, 12);
        int S = rng.integer(1, 10);
        EnergyAccount candidate;
        candidate.country = "X";
        candidate.year = 2000;
        candidate.stage = AccountStage::Aggregated;
        for (int p = 0; p < P; ++p) candidate.products.push_back("p" + std::to_string(p));
        for (int s = 0; s < S; ++s) candidate.sectors.push_back("s" + std::to_string(s));
        candidate.values.resize(P, S);
        for (int p = 0; p < P; ++p) {
            for (int s = 0; s < S; ++s) {
                candidate.values(p, s) = rng(0.5, 100.0);
            }
        }
        EnergyAccount reference = candidate;
        for (int p = 0; p < P; ++p) {
            reference.values.row(p) *= rng(0.5, 1.5);
        }

        auto factors = calibration_factors(candidate, reference);
        auto calibrated = apply_calibration(candidate, factors);

        Eigen::VectorXd got = calibrated.product_totals();
        Eigen::VectorXd want = reference.product_totals();
        for (int p = 0; p < P; ++p) {
            if (std::abs(got(p) - want(p)) > 1e-9 * want(p)) {
                c.require(false, "totals differ at trial " + std::to_string(trial));
            }
            double eps = (got(p) - want(p)) / want(p);
            if (std::abs(eps) > 1e-9) {
                c.require(false, "per-product epsilon nonzero at trial " + std::to_string(trial));
            }
            Eigen::VectorXd before = candidate.values.row(p) / candidate.values.row(p).sum();
            Eigen::VectorXd after = calibrated.values.row(p) / calibrated.values.row(p).sum();
            if ((before - after).cwiseAbs().maxCoeff() > 1e-12) {
                c.require(false, "sector shares moved at trial " + std::to_string(trial));
            }
        }
    }
    double elapsed = ms_since(start);
    c.require(elapsed < 5000.0, "suite over 5 s");
    report(4, "calibration round-trip (100 random pairs)", c.ok, elapsed, c.detail);
}

// 5. Leontief solve vs truncated power series
void criterion_leontief()
{
    auto start = Clock::now();
    Check c;

    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(5, 5);
    c.require(leontief_inverse(zero) == Eigen::MatrixXd::Identity(5, 5), "A=0 did not give I");

    Uniform rng(1005);
    for (int trial = 0; trial < 50; ++trial) {
        int n = rng.integer(2, 12);
        Eigen::MatrixXd A(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                A(i, j) = rng();
            }
            A.row(i) *= rng(0.1, 0.9) / A.row(i).sum();
        }
        Eigen::MatrixXd L = leontief_inverse(A);

        double q = A.rowwise().sum().maxCoeff();
        Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(n, n);
        Eigen::MatrixXd term = sum;
        for (int k = 1; std::pow(q, k) / (1.0 - q) > 1e-10; ++k) {
            term = term * A;
            sum += term;
        }
        if ((L - sum).cwiseAbs().maxCoeff() > 1e-8) {
            c.require(false, "trial " + std::to_string(trial) + ": max deviation " +
                                 format_double((L - sum).cwiseAbs().maxCoeff()));
        }
    }
    double elapsed = ms_since(start);
    c.require(elapsed < 5000.0, "suite over 5 s");
    report(5, "Leontief oracle (50 random systems)", c.ok, elapsed, c.detail);
}

// 6. global closure on 50 generated fixtures
void criterion_closure()
{
    auto start = Clock::now();
    Check c;
    Uniform rng(1006);
    fs::path base = fs::temp_directory_path() / "eeio_acceptance_closure";
    fs::remove_all(base);

    for (int trial = 0; trial < 50; ++trial) {
        FixtureSpec spec;
        spec.seed = 20000 + static_cast<std::uint64_t>(trial);
        spec.regions = rng.integer(1, 5);
        spec.sectors = rng.integer(2, 10);
        spec.flows = rng.integer(4, 8);
        spec.products = rng.integer(2, 6);
        spec.n_years = 1;
        spec.with_reference = false;
        spec.with_population = false;

        fs::path dir = base / std::to_string(trial);
        generate_fixture(spec, dir);
        RunConfig config = RunConfig::load(dir / "run.toml");
        auto manifest = run_pipeline(config, dir / "out");
        if (!manifest.all_ok()) {
            c.require(false, "pipeline failed on trial " + std::to_string(trial));
            continue;
        }

        auto rows = csv::read_file(dir / "out" / "footprints.csv");
        double pba = 0.0, cba = 0.0, beet_single = 0.0;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            pba += *parse_double(rows[i].fields[2]);
            cba += *parse_double(rows[i].fields[3]);
            beet_single = *parse_double(rows[i].fields[4]);
        }
        if (std::abs(pba - cba) > 1e-6 * std::max(1.0, pba)) {
            c.require(false, "closure violated on trial " + std::to_string(trial) + ": " +
                                 format_double(pba) + " vs " + format_double(cba));
        }
        if (spec.regions == 1 && std::abs(beet_single) > 1e-9 * std::max(1.0, pba)) {
            c.require(false, "single-region BEET nonzero on trial " + std::to_string(trial));
        }
    }
    fs::remove_all(base);
    double elapsed = ms_since(start);
    c.require(elapsed < 10000.0, "suite over 10 s");
    report(6, "global closure (50 generated fixtures)", c.ok, elapsed, c.detail);
}

// 7. the 4.1% world-average relative error as a formula check
void criterion_epsilon()
{
    auto start = Clock::now();
    EnergyAccount reference;
    reference.country = "WORLD";
    reference.year = 2005;
    reference.products = {"g1", "g2"};
    reference.sectors = {"s1", "s2"};
    reference.stage = AccountStage::Aggregated;
    reference.values.resize(2, 2);
    reference.values << 30, 20, 25, 25;  // total 100

    EnergyAccount candidate = reference;
    candidate.values *= 1.041;

    auto rep = relative_error(candidate, reference);
    double elapsed = ms_since(start);
    Check c;
    c.require(rep.epsilon.has_value(), "epsilon undefined");
    if (rep.epsilon) {
        c.require_close(*rep.epsilon, 0.041, 1e-12, "world-average epsilon");
    }
    c.require(elapsed < 1.0, "runtime over 1 ms");
    report(7, "world-average epsilon formula (+4.1%)", c.ok, elapsed, c.detail);
}

// 8. extrapolation: constants stay constant; [1,1,1,1,2] -> 1.2
void criterion_extrapolation()
{
    auto start = Clock::now();
    Check c;
    auto factors_for = [](int year, double value) {
        CalibrationFactors f;
        f.country = "X";
        f.year = year;
        f.products = {"g1"};
        f.alpha = Eigen::VectorXd::Constant(1, value);
        return f;
    };

    std::vector<CalibrationFactors> constant;
    for (int y = 2005; y <= 2009; ++y) {
        constant.push_back(factors_for(y, 0.93));
    }
    auto out = extrapolate_factors(constant, {2010, 2011, 2012});
    for (const auto& f : out) {
        c.require(f.alpha(0) == 0.93, "constant history drifted");
    }

    std::vector<CalibrationFactors> hand;
    double values[] = {1.0, 1.0, 1.0, 1.0, 2.0};
    for (int i = 0; i < 5; ++i) {
        hand.push_back(factors_for(2005 + i, values[i]));
    }
    auto hand_out = extrapolate_factors(hand, {2010});
    c.require(hand_out.front().alpha(0) == 1.2, "[1,1,1,1,2] did not average to 1.2");

    double elapsed = ms_since(start);
    c.require(elapsed < 1.0, "runtime over 1 ms");
    report(8, "factor extrapolation", c.ok, elapsed, c.detail);
}

// 9. end-to-end determinism of the bundled fixture, jobs=1 vs jobs=8
void criterion_determinism()
{
    auto start = Clock::now();
    Check c;
    fs::path base = fs::temp_directory_path() / "eeio_acceptance_determinism";
    fs::remove_all(base);

    FixtureSpec spec;
    spec.seed = 42;
    spec.regions = 3;
    spec.sectors = 4;
    spec.flows = 6;
    spec.products = 5;
    spec.n_years = 3;
    generate_fixture(spec, base / "fx");

    RunConfig config = RunConfig::load(base / "fx" / "run.toml");
    config.options.jobs = 1;
    run_pipeline(config, base / "out1");
    config.options.jobs = 8;
    run_pipeline(config, base / "out8");

    std::map<std::string, std::string> a, b;
    for (const auto& entry : fs::recursive_directory_iterator(base / "out1")) {
        if (entry.is_regular_file() && entry.path().filename() != "manifest.json") {
            a[fs::relative(entry.path(), base / "out1").generic_string()] =
                csv::read_file_bytes(entry.path());
        }
    }
    for (const auto& entry : fs::recursive_directory_iterator(base / "out8")) {
        if (entry.is_regular_file() && entry.path().filename() != "manifest.json") {
            b[fs::relative(entry.path(), base / "out8").generic_string()] =
                csv::read_file_bytes(entry.path());
        }
    }
    c.require(!a.empty(), "no outputs written");
    c.require(a == b, "outputs differ between jobs=1 and jobs=8");
    fs::remove_all(base);

    double elapsed = ms_since(start);
    c.require(elapsed < 10000.0, "runtime over 10 s");
    report(9, "end-to-end determinism (jobs=1 vs jobs=8)", c.ok, elapsed, c.detail);
}

// 10. footprint at full WIOD16 scale: 44 regions x 56 sectors
void criterion_scale()
{
    auto start = Clock::now();
    Check c;
    const int R = 44, N = 56, n = R * N;
    Uniform rng(1010);

    Eigen::MatrixXd A(n, n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            A(i, j) = rng() < 0.3 ? rng() : 0.0;
        }
        double sum = A.col(j).sum();
        if (sum > 0) {
            A.col(j) *= rng(0.3, 0.6) / sum;
        }
    }
    MrioSystem sys;
    for (int r = 0; r < R; ++r) sys.regions.push_back("r" + std::to_string(r));
    for (int s = 0; s < N; ++s) sys.sectors.push_back("s" + std::to_string(s));
    sys.demand_categories = {"fd1", "fd2"};
    sys.A = A;
    sys.Y.resize(n, R * 2);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < R * 2; ++j) {
            sys.Y(i, j) = rng() < 0.5 ? rng(0.0, 10.0) : 0.0;
        }
    }
    sys.x = LeontiefOperator(A).apply(sys.Y.rowwise().sum());

    IntensityVector iv;
    iv.e.resize(n);
    for (int i = 0; i < n; ++i) {
        iv.e(i) = rng(0.0, 2.0);
    }
    iv.household_direct.resize(R);
    for (int r = 0; r < R; ++r) {
        iv.household_direct(r) = rng(0.0, 100.0);
    }

    auto fp = footprint(sys, iv);
    double elapsed = ms_since(start);

    double pba = fp.pba.sum(), cba = fp.cba.sum();
    c.require(std::abs(pba - cba) <= 1e-6 * std::max(1.0, pba),
              "closure violated: " + format_double(pba) + " vs " + format_double(cba));
    c.require(elapsed < 60000.0, "runtime over 60 s");
    report(10, "scale smoke test (2464x2464 footprint)", c.ok, elapsed, c.detail);
}

}  // namespace

int main()
{
    criterion_mapping();
    criterion_allocation();
    criterion_conservation();
    criterion_calibration();
    criterion_leontief();
    criterion_closure();
    criterion_epsilon();
    criterion_extrapolation();
    criterion_determinism();
    criterion_scale();

    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all criteria passed\n";
    return 0;
}
