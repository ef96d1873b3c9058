#include "decotime/errors.hpp"
#include "decotime/vibrations.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace decotime;

namespace {

VibrationParams chain(double v0, double c)
{
    VibrationParams v;
    v.enabled = true;
    v.topology = Topology::chain1d;
    v.spring_constant = v0;
    v.chain_coupling = c;
    return v;
}

double orthogonality_residual(const NormalModes& nm)
{
    const auto n = nm.transform.rows();
    return (nm.transform.transpose() * nm.transform - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("independent modes: nu = sqrt(V/m) for both paths")
{
    const double v0 = 3.686248659647718e-11;
    const double m = 9.3373769348872e-25;
    const double nu = std::sqrt(v0 / m);
    const auto a = independent_modes(4, v0, m);
    CHECK(a.n_modes() == 12);
    for (Eigen::Index k = 0; k < 12; ++k) {
        CHECK(a.frequencies(k) == nu);
    }
    CHECK(a.transform.isIdentity(0.0));

    VibrationParams vp;
    vp.enabled = true;
    vp.spring_constant = v0;
    const auto b = solve_normal_modes(build_coupling_matrix(4, vp, m));
    for (Eigen::Index k = 0; k < 12; ++k) {
        CHECK(b.frequencies(k) == doctest::Approx(nu).epsilon(1e-14));
    }
    CHECK(orthogonality_residual(b) <= 1e-10);
    CHECK(mean_frequency(a, MeanStrategy::mean_inverse) == doctest::Approx(nu).epsilon(1e-15));
}

TEST_CASE("open chain reproduces the cosine band")
{
    const double v0 = 2.0;
    const double c = -0.7;
    const double m = 1.5;
    for (std::size_t n : {1U, 2U, 3U, 7U, 16U, 33U, 64U}) {
        const auto nm = solve_normal_modes(build_coupling_matrix(n, chain(v0, c), m));
        std::vector<double> expected;
        for (std::size_t k = 1; k <= n; ++k) {
            expected.push_back(std::sqrt((v0 + 2.0 * c * std::cos(k * std::numbers::pi / (n + 1.0))) / m));
        }
        for (std::size_t k = 0; k < 2 * n; ++k) {
            expected.push_back(std::sqrt(v0 / m));
        }
        std::sort(expected.begin(), expected.end());
        double worst = 0.0;
        for (std::size_t k = 0; k < expected.size(); ++k) {
            worst = std::max(worst, std::abs(nm.frequencies(static_cast<Eigen::Index>(k)) / expected[k] - 1.0));
        }
        CHECK(worst <= 1e-9);
        CHECK(orthogonality_residual(nm) <= 1e-10);
    }
}

TEST_CASE("mode vectors solve V S = m nu^2 S with the sign convention")
{
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    const Eigen::Index dim = 9;
    Eigen::MatrixXd a(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            a(i, j) = g(rng);
        }
    }
    CouplingMatrix cm;
    cm.mass = 2.0;
    cm.V = a * a.transpose() + dim * Eigen::MatrixXd::Identity(dim, dim);
    const auto nm = solve_normal_modes(cm);
    for (Eigen::Index k = 0; k < dim; ++k) {
        const Eigen::VectorXd s = nm.transform.col(k);
        const double lam = cm.mass * nm.frequencies(k) * nm.frequencies(k);
        CHECK((cm.V * s - lam * s).norm() <= 1e-10 * cm.V.norm());
        Eigen::Index first = 0;
        while (std::abs(s(first)) <= 1e-12) {
            ++first;
        }
        CHECK(s(first) > 0.0);
        CHECK(nm.zero_point(k) ==
              doctest::Approx(std::sqrt(1.054571817e-34 / (2.0 * cm.mass * nm.frequencies(k)))).epsilon(1e-14));
        if (k > 0) {
            CHECK(nm.frequencies(k) >= nm.frequencies(k - 1));
        }
    }
}

TEST_CASE("non-positive coupling matrix names the smallest eigenvalue")
{
    CouplingMatrix cm;
    cm.mass = 1.0;
    cm.V = Eigen::MatrixXd::Identity(3, 3);
    cm.V(2, 2) = -0.25;
    CHECK_THROWS_WITH_AS(solve_normal_modes(cm), doctest::Contains("-0.25"), NumericError);
}

TEST_CASE("custom matrix from a file")
{
    const auto path = std::filesystem::temp_directory_path() / "decotime_matrix_test.txt";
    {
        std::ofstream out(path);
        out << "3\n2 0.1 0\n0.1 2 0\n0 0 3\n";
    }
    const auto v = read_coupling_matrix_file(path);
    CHECK(v.rows() == 3);
    CHECK(v(0, 1) == 0.1);
    VibrationParams vp;
    vp.enabled = true;
    vp.topology = Topology::custom;
    vp.matrix_file = path.string();
    const auto nm = solve_normal_modes(build_coupling_matrix(1, vp, 1.0));
    CHECK(nm.frequencies(0) == doctest::Approx(std::sqrt(1.9)).epsilon(1e-14));
    CHECK(nm.frequencies(2) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));

    {
        std::ofstream out(path);
        out << "3\n2 0.1 0\n0.2 2 0\n0 0 3\n";
    }
    CHECK_THROWS_WITH_AS(build_coupling_matrix(1, vp, 1.0), doctest::Contains("symmetric"), ConfigError);
    std::filesystem::remove(path);
}

TEST_CASE("Lamb-Dicke coefficients and mean-frequency strategies")
{
    const auto nm = solve_normal_modes(build_coupling_matrix(3, chain(2.0, 0.5), 1.0));
    const Vec3 k(2.0, 0.0, 0.0);
    const auto c = lamb_dicke_coefficients(nm, k, 1);
    REQUIRE(c.size() == 9);
    double sum_sq = 0.0;
    double expected = 0.0;
    for (std::size_t K = 0; K < 9; ++K) {
        sum_sq += c[K] * c[K];
        const double s = nm.transform(3, static_cast<Eigen::Index>(K));
        expected += std::pow(nm.zero_point(static_cast<Eigen::Index>(K)) * 2.0 * s, 2);
    }
    CHECK(sum_sq == doctest::Approx(expected).epsilon(1e-13));

    const double harm = mean_frequency(nm, MeanStrategy::mean_inverse);
    const double arith = mean_frequency(nm, MeanStrategy::inverse_mean);
    CHECK(harm < arith);
    double inv = 0.0;
    for (Eigen::Index K = 0; K < 9; ++K) {
        inv += 1.0 / nm.frequencies(K);
    }
    CHECK(harm == doctest::Approx(9.0 / inv).epsilon(1e-14));
    CHECK(modes_to_json(nm)["frequencies"].size() == 9);
}
