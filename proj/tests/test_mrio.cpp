#include "eeio/errors.hpp"
#include "eeio/mrio.hpp"

#include <doctest.h>

#include <random>

using namespace eeio;

namespace {

// random productive system with row sums of A below `row_sum_cap`
Eigen::MatrixXd random_coefficients(std::mt19937_64& rng, int n, double row_sum_cap)
{
    std::uniform_real_distribution<double> value(0.0, 1.0);
    Eigen::MatrixXd A = Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return value(rng); });
    for (int i = 0; i < n; ++i) {
        double sum = A.row(i).sum();
        A.row(i) *= (row_sum_cap * value(rng)) / sum;
    }
    return A;
}

// truncated power series with a geometric tail bound
Eigen::MatrixXd power_series_inverse(const Eigen::MatrixXd& A, double tail)
{
    double q = A.rowwise().sum().maxCoeff();
    REQUIRE(q < 1.0);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(A.rows(), A.cols());
    Eigen::MatrixXd term = sum;
    int k = 0;
    while (std::pow(q, k + 1) / (1.0 - q) > tail && k < 10000) {
        term = term * A;
        sum += term;
        ++k;
    }
    return sum;
}

MrioSystem two_region_system(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Y)
{
    MrioSystem sys;
    sys.regions = {"R1", "R2"};
    sys.sectors = {"s1"};
    sys.demand_categories = {"fd"};
    sys.A = A;
    sys.Y = Y;
    sys.x = leontief_inverse(A) * Y.rowwise().sum();
    return sys;
}

}  // namespace

TEST_CASE("assemble_system")
{
    SUBCASE("no intermediates: A = 0 and x = Y1")
    {
        Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(2, 2);
        Eigen::MatrixXd Y(2, 2);
        Y << 3, 1, 2, 2;
        Eigen::VectorXd x(2);
        x << 4, 4;
        auto sys = assemble_system(Z, Y, x, {"R1", "R2"}, {"s1"}, {"fd"});
        CHECK(sys.A.isZero(0.0));
        CHECK(sys.x == Y.rowwise().sum());
    }
    SUBCASE("two-sector closed fixture")
    {
        Eigen::MatrixXd Z(2, 2);
        Z << 0, 10, 20, 0;
        Eigen::VectorXd x(2);
        x << 100, 50;
        Eigen::MatrixXd Y(2, 1);
        Y << 90, 30;
        AssemblyReport report;
        auto sys = assemble_system(Z, Y, x, {"R1"}, {"s1", "s2"}, {"fd"}, &report);
        CHECK(sys.A(0, 1) == 0.2);
        CHECK(sys.A(1, 0) == 0.2);
        CHECK(sys.A(0, 0) == 0.0);
        CHECK(report.max_residual < 1e-12);
        CHECK(report.warnings.empty());
    }
    SUBCASE("output can be derived from the accounting identity")
    {
        Eigen::MatrixXd Z(2, 2);
        Z << 0, 10, 20, 0;
        Eigen::MatrixXd Y(2, 1);
        Y << 90, 30;
        AssemblyReport report;
        auto sys = assemble_system(Z, Y, {"R1"}, {"s1", "s2"}, {"fd"}, &report);
        CHECK(sys.x(0) == 100.0);
        CHECK(sys.x(1) == 50.0);
        CHECK(report.max_residual < 1e-12);
    }
    SUBCASE("zero output with nonzero intermediate inputs is ill-posed")
    {
        Eigen::MatrixXd Z(2, 2);
        Z << 0, 1, 0, 0;
        Eigen::VectorXd x(2);
        x << 1, 0;
        Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(2, 1);
        CHECK_THROWS_AS(assemble_system(Z, Y, x, {"R1"}, {"s1", "s2"}, {"fd"}), ValidationError);
    }
    SUBCASE("negative intermediate flows are rejected")
    {
        Eigen::MatrixXd Z(1, 1);
        Z << -1;
        Eigen::VectorXd x(1);
        x << 1;
        Eigen::MatrixXd Y = Eigen::MatrixXd::Ones(1, 1);
        CHECK_THROWS_AS(assemble_system(Z, Y, x, {"R1"}, {"s1"}, {"fd"}), ValidationError);
    }
    SUBCASE("identity violation is warned about with the worst row")
    {
        Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(2, 2);
        Eigen::MatrixXd Y(2, 1);
        Y << 1, 1;
        Eigen::VectorXd x(2);
        x << 5, 1;
        AssemblyReport report;
        assemble_system(Z, Y, x, {"R1"}, {"s1", "s2"}, {"fd"}, &report);
        REQUIRE(!report.warnings.empty());
        CHECK(report.worst_row == "R1:s1");
    }
}

TEST_CASE("leontief_inverse")
{
    SUBCASE("A = 0 gives the identity exactly")
    {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(4, 4);
        CHECK(leontief_inverse(A) == Eigen::MatrixXd::Identity(4, 4));
    }
    SUBCASE("2x2 closed form")
    {
        Eigen::MatrixXd A(2, 2);
        A << 0, 0.2, 0.2, 0;
        Eigen::MatrixXd expected(2, 2);
        expected << 1, 0.2, 0.2, 1;
        expected /= 0.96;
        CHECK(((leontief_inverse(A) - expected).cwiseAbs().maxCoeff()) < 1e-12);
    }
    SUBCASE("matches the truncated power series on random 8x8 systems")
    {
        std::mt19937_64 rng(11);
        for (int trial = 0; trial < 10; ++trial) {
            Eigen::MatrixXd A = random_coefficients(rng, 8, 0.9);
            Eigen::MatrixXd L = leontief_inverse(A);
            Eigen::MatrixXd oracle = power_series_inverse(A, 1e-10);
            CHECK(((L - oracle).cwiseAbs().maxCoeff()) < 1e-8);
        }
    }
    SUBCASE("L >= I in the productive sense")
    {
        std::mt19937_64 rng(13);
        Eigen::MatrixXd L = leontief_inverse(random_coefficients(rng, 6, 0.8));
        CHECK(L.diagonal().minCoeff() >= 1.0);
        CHECK(L.minCoeff() >= 0.0);
    }
    SUBCASE("a non-convergent system is rejected")
    {
        Eigen::MatrixXd A(2, 2);
        A << 0.9, 0.9, 0.9, 0.9;  // spectral radius 1.8
        CHECK_THROWS_AS(leontief_inverse(A), Error);
    }
    SUBCASE("operator transpose application matches the dense inverse")
    {
        std::mt19937_64 rng(17);
        Eigen::MatrixXd A = random_coefficients(rng, 5, 0.7);
        LeontiefOperator op(A);
        Eigen::VectorXd e = Eigen::VectorXd::LinSpaced(5, 0.1, 0.5);
        Eigen::VectorXd via_operator = op.apply_transpose(e);
        Eigen::VectorXd via_dense = op.dense().transpose() * e;
        CHECK(((via_operator - via_dense).cwiseAbs().maxCoeff()) < 1e-10);
    }
}

TEST_CASE("compute_intensity")
{
    MrioSystem sys;
    sys.regions = {"R1"};
    sys.sectors = {"s1", "s2"};
    sys.demand_categories = {"fd"};
    sys.A = Eigen::MatrixXd::Zero(2, 2);
    sys.Y = Eigen::MatrixXd::Zero(2, 1);
    sys.Y << 25, 0;
    sys.x = Eigen::VectorXd::Zero(2);
    sys.x << 25, 0;

    EnergyAccount acct;
    acct.country = "R1";
    acct.year = 2000;
    acct.products = {"g1"};
    acct.sectors = {"s1", "s2", "HH"};
    acct.stage = AccountStage::Calibrated;
    acct.values.resize(1, 3);
    acct.values << 50, 3, 7;

    std::map<std::string, EnergyAccount> accounts{{"R1", acct}};

    SUBCASE("intensity is energy over output; households are split out")
    {
        auto iv = compute_intensity(accounts, sys);
        CHECK(iv.e(0) == 2.0);  // 50 TJ / 25 units
        CHECK(iv.household_direct(0) == 7.0);
    }
    SUBCASE("zero-output sector energy is orphaned, not redistributed")
    {
        auto iv = compute_intensity(accounts, sys);
        CHECK(iv.e(1) == 0.0);
        CHECK(iv.orphaned_tj == 3.0);
        REQUIRE(!iv.warnings.empty());
        CHECK(iv.warnings.front().find("orphaned") != std::string::npos);
    }
    SUBCASE("a missing region account is an error")
    {
        std::map<std::string, EnergyAccount> empty;
        CHECK_THROWS_AS(compute_intensity(empty, sys), AxisError);
    }
    SUBCASE("all-zero accounts collapse the footprint to household direct energy")
    {
        auto zero = acct;
        zero.values.setZero();
        zero.values(0, 2) = 7.0;
        std::map<std::string, EnergyAccount> zero_accounts{{"R1", zero}};
        auto iv = compute_intensity(zero_accounts, sys);
        auto fp = footprint(sys, iv);
        CHECK(fp.pba(0) == 7.0);
        CHECK(fp.cba(0) == 7.0);
    }
}

TEST_CASE("footprint")
{
    SUBCASE("single region: PBA equals CBA, BEET is zero")
    {
        std::mt19937_64 rng(19);
        Eigen::MatrixXd A = random_coefficients(rng, 3, 0.6);
        MrioSystem sys;
        sys.regions = {"R1"};
        sys.sectors = {"s1", "s2", "s3"};
        sys.demand_categories = {"fd"};
        sys.A = A;
        sys.Y = Eigen::MatrixXd::Constant(3, 1, 10.0);
        sys.x = leontief_inverse(A) * sys.Y.rowwise().sum();

        IntensityVector iv;
        iv.e = Eigen::VectorXd::Constant(3, 0.5);
        iv.household_direct = Eigen::VectorXd::Constant(1, 11.0);

        auto fp = footprint(sys, iv);
        CHECK(fp.pba(0) == doctest::Approx(fp.cba(0)).epsilon(1e-9));
        CHECK(std::abs(fp.beet(0)) < 1e-9 * fp.pba(0));
    }
    SUBCASE("A = 0 two-region case is hand-computable")
    {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
        Eigen::MatrixXd Y(2, 2);
        Y << 6, 2,   // region R1's sector output consumed by R1 and R2
             1, 3;
        auto sys = two_region_system(A, Y);

        IntensityVector iv;
        iv.e.resize(2);
        iv.e << 2.0, 4.0;
        iv.household_direct = Eigen::VectorXd::Zero(2);
        iv.household_direct << 5.0, 0.0;

        auto fp = footprint(sys, iv);
        CHECK(fp.cba(0) == doctest::Approx(2.0 * 6 + 4.0 * 1 + 5.0));
        CHECK(fp.cba(1) == doctest::Approx(2.0 * 2 + 4.0 * 3));
        CHECK(fp.pba(0) == doctest::Approx(2.0 * 8 + 5.0));
        CHECK(fp.pba(1) == doctest::Approx(4.0 * 4));
    }
    SUBCASE("an exporter fixture gives antisymmetric BEET")
    {
        // region 1 produces the energy-intensive input consumed by region 2
        Eigen::MatrixXd A(2, 2);
        A << 0.0, 0.4,
             0.0, 0.0;
        Eigen::MatrixXd Y(2, 2);
        Y << 1, 0,
             0, 10;
        auto sys = two_region_system(A, Y);

        IntensityVector iv;
        iv.e.resize(2);
        iv.e << 3.0, 0.01;
        iv.household_direct = Eigen::VectorXd::Zero(2);

        auto fp = footprint(sys, iv);
        CHECK(fp.beet(0) > 0.0);
        CHECK(fp.beet(1) < 0.0);
        CHECK(fp.beet(0) == doctest::Approx(-fp.beet(1)).epsilon(1e-9));
    }
    SUBCASE("global closure and nonnegativity on random closed systems")
    {
        std::mt19937_64 rng(23);
        std::uniform_real_distribution<double> value(0.0, 1.0);
        for (int trial = 0; trial < 10; ++trial) {
            int R = 2 + static_cast<int>(rng() % 3);
            int N = 2 + static_cast<int>(rng() % 3);
            int n = R * N;
            Eigen::MatrixXd A = random_coefficients(rng, n, 0.7);
            MrioSystem sys;
            for (int r = 0; r < R; ++r) sys.regions.push_back("R" + std::to_string(r + 1));
            for (int s = 0; s < N; ++s) sys.sectors.push_back("s" + std::to_string(s + 1));
            sys.demand_categories = {"fd1", "fd2"};
            sys.A = A;
            sys.Y = Eigen::MatrixXd::NullaryExpr(n, R * 2, [&]() { return value(rng); });
            sys.x = leontief_inverse(A) * sys.Y.rowwise().sum();

            IntensityVector iv;
            iv.e = Eigen::VectorXd::NullaryExpr(n, [&]() { return value(rng); });
            iv.household_direct = Eigen::VectorXd::NullaryExpr(R, [&]() { return value(rng); });

            auto fp = footprint(sys, iv);
            CHECK(fp.pba.sum() == doctest::Approx(fp.cba.sum()).epsilon(1e-6));
            CHECK(fp.pba.minCoeff() >= 0.0);
            CHECK(fp.cba.minCoeff() >= 0.0);

            // demand linearity: doubling Y doubles CBA
            MrioSystem doubled = sys;
            doubled.Y *= 2.0;
            doubled.x = leontief_inverse(A) * doubled.Y.rowwise().sum();
            IntensityVector iv2 = iv;
            // keep intensities fixed: e is per unit of output
            iv2.household_direct *= 2.0;
            auto fp2 = footprint(doubled, iv2);
            CHECK(((fp2.cba - 2.0 * fp.cba).cwiseAbs().maxCoeff()) < 1e-6 * fp.cba.sum());
        }
    }
    SUBCASE("per-capita conversion and validation")
    {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
        Eigen::MatrixXd Y = Eigen::MatrixXd::Identity(2, 2);
        auto sys = two_region_system(A, Y);
        IntensityVector iv;
        iv.e = Eigen::VectorXd::Constant(2, 1.0);
        iv.household_direct = Eigen::VectorXd::Zero(2);

        Eigen::VectorXd pop(2);
        pop << 1000.0, 500.0;
        auto fp = footprint(sys, iv, pop);
        REQUIRE(fp.pba_gj_per_capita.has_value());
        CHECK((*fp.pba_gj_per_capita)(0) ==
              doctest::Approx(fp.pba(0) * 1000.0 / 1000.0));

        Eigen::VectorXd bad(2);
        bad << 1000.0, 0.0;
        CHECK_THROWS_AS(footprint(sys, iv, bad), ValidationError);
    }
    SUBCASE("household exclusion drops the direct energy from both sides")
    {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
        Eigen::MatrixXd Y = Eigen::MatrixXd::Identity(2, 2);
        auto sys = two_region_system(A, Y);
        IntensityVector iv;
        iv.e = Eigen::VectorXd::Constant(2, 1.0);
        iv.household_direct = Eigen::VectorXd::Constant(2, 9.0);

        FootprintOptions opts;
        opts.include_households = false;
        auto without = footprint(sys, iv, std::nullopt, opts);
        auto with = footprint(sys, iv);
        CHECK(with.pba(0) - without.pba(0) == doctest::Approx(9.0));
        CHECK(with.cba(0) - without.cba(0) == doctest::Approx(9.0));
        CHECK(with.beet(0) == doctest::Approx(without.beet(0)));
    }
}
