#include "decotime/errors.hpp"
#include "decotime/oracle.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>

using namespace decotime;

namespace {

OracleSpec single_se(double g)
{
    OracleSpec s;
    s.name = "single-se";
    s.n_qubits = 1;
    s.qubit_omega = 1.0;
    OracleSEMode mode;
    mode.omega = 1.0;
    mode.truncation = 2;
    mode.g = {cplx{g, 0.0}};
    s.se.push_back(mode);
    return s;
}

std::vector<double> geometric(double lo, double hi, int n)
{
    std::vector<double> t;
    for (int k = 0; k < n; ++k) {
        t.push_back(lo * std::pow(hi / lo, k / (n - 1.0)));
    }
    return t;
}

} // namespace

TEST_CASE("one qubit and one truncated mode give the hand-built 4x4 Hamiltonian")
{
    const double g = 0.3;
    auto spec = single_se(g);
    spec.qubit_omega = 2.0;
    spec.se[0].omega = 0.7;
    const auto sys = build_small_system(spec);
    REQUIRE(sys.hamiltonian.rows() == 4);
    Eigen::MatrixXcd want = Eigen::MatrixXcd::Zero(4, 4);
    // basis |q, n>, qubit leading
    want(0, 0) = -1.0;
    want(1, 1) = -1.0 + 0.7;
    want(2, 2) = 1.0;
    want(3, 3) = 1.0 + 0.7;
    want(0, 3) = want(3, 0) = g;
    want(1, 2) = want(2, 1) = g;
    CHECK((sys.hamiltonian - want).norm() <= 1e-15);
    CHECK(sys.hermiticity_residual <= 1e-14);
    CHECK(sys.system_dim == 2);
    CHECK(sys.env_dim == 2);
}

TEST_CASE("thermal environment weights follow Boltzmann ratios")
{
    OracleSpec s;
    s.n_qubits = 1;
    s.state = StateSpec::hadamard();
    OracleVibMode v;
    v.truncation = 4;
    v.occupation = 1.0;
    v.classical = {0.1};
    s.vib.push_back(v);
    const auto sys = build_small_system(s);
    REQUIRE(sys.env_weights.size() == 4);
    const double z = 1.0 + 0.5 + 0.25 + 0.125;
    CHECK(sys.env_weights[0] == doctest::Approx(1.0 / z).epsilon(1e-14));
    CHECK(sys.env_weights[1] == doctest::Approx(0.5 / z).epsilon(1e-14));
    CHECK(sys.env_weights[2] == doctest::Approx(0.25 / z).epsilon(1e-14));
    CHECK(sys.env_weights[3] == doctest::Approx(0.125 / z).epsilon(1e-14));
    CHECK(sys.hermiticity_residual <= 1e-14);
}

TEST_CASE("oversized specs are rejected before assembly")
{
    OracleSpec s;
    s.n_qubits = 3;
    for (int k = 0; k < 4; ++k) {
        OracleSEMode m;
        m.truncation = 6;
        m.g = {1.0, 1.0, 1.0};
        s.se.push_back(m);
    }
    CHECK_THROWS_AS(check_spec(s), ValidationError);
}

TEST_CASE("zero coupling leaves the fidelity at one")
{
    const auto sys = build_small_system(single_se(0.0));
    const auto c = evolve_fidelity(sys, {0.0, 0.5, 3.0, 40.0});
    for (std::size_t k = 0; k < c.times.size(); ++k) {
        CHECK(c.one_minus_f[k] <= 1e-15);
        CHECK(c.fidelity[k] == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("resonant SE mode: tau2 = 1/(sqrt 2 g) and F(0) = 1")
{
    // g comparable to omega keeps the counter-rotating excitation from saturating inside the window
    const double g = 0.5;
    const auto sys = build_small_system(single_se(g));
    const auto c0 = evolve_fidelity(sys, {0.0});
    CHECK(c0.one_minus_f[0] <= 1e-15);
    const auto times = auto_time_grid(sys);
    const auto c = evolve_fidelity(sys, times);
    const auto fit = fit_tau2(c.times, c.one_minus_f);
    CHECK(fit.tau2 == doctest::Approx(1.0 / (std::sqrt(2.0) * g)).epsilon(1e-2));
    CHECK(fit.tau1_zero);
    CHECK(c.max_trace_error <= 1e-10);
    CHECK(c.max_purity_drift <= 1e-10);

    // a weak coupling saturates below the window: the grid search says so
    CHECK_THROWS_WITH_AS(auto_time_grid(build_small_system(single_se(1e-3))), doctest::Contains("too weak"),
                         NumericError);
}

TEST_CASE("fit recovers synthetic curves")
{
    const double tau = 1e-7;
    const auto t = geometric(tau * std::sqrt(2e-8), tau * std::sqrt(2e-3), 41);
    std::vector<double> pure;
    std::vector<double> bent;
    const double tmax = t.back();
    for (double s : t) {
        const double q = 0.5 * (s / tau) * (s / tau);
        pure.push_back(q);
        bent.push_back(q * (1.0 + 0.01 * s / tmax));
    }
    const auto a = fit_tau2(t, pure);
    CHECK(a.tau2 == doctest::Approx(tau).epsilon(1e-6));
    CHECK_FALSE(a.curvature);
    const auto b = fit_tau2(t, bent);
    CHECK(b.tau2 == doctest::Approx(tau).epsilon(1e-2));
    CHECK(b.curvature);
    CHECK_THROWS(fit_tau2(t, std::vector<double>(t.size(), 1.0)));
}

TEST_CASE("quick regression suite agrees with the engine")
{
    const auto specs = regression_suite(false);
    CHECK(specs.size() == 3);
    for (const auto& v : run_suite(specs)) {
        CAPTURE(v.name);
        CAPTURE(v.failure);
        CHECK(v.passed);
        CHECK(v.truncation_converged);
        CHECK(v.deviation < 0.01);
        CHECK(v.curve.max_trace_error <= 1e-10);
        CHECK(v.curve.max_purity_drift <= 1e-10);
    }
}

TEST_CASE("negative control is caught")
{
    const auto v = cross_validate(negative_control_spec());
    CHECK_FALSE(v.passed);
    CHECK(v.deviation > 0.1);
    CHECK(v.truncation_converged);
}

TEST_CASE("full regression suite")
{
    const auto specs = regression_suite(true);
    CHECK(specs.size() >= 10);
    for (const auto& v : run_suite(specs)) {
        CAPTURE(v.name);
        CAPTURE(v.failure);
        CHECK(v.passed);
        CHECK(v.deviation < 0.01);
        CHECK(v.curve.max_trace_error <= 1e-10);
        CHECK(v.curve.max_purity_drift <= 1e-10);
        const auto j = validation_to_json(v);
        CHECK(j["name"] == v.name);
    }
}

TEST_CASE("curve csv layout")
{
    const auto sys = build_small_system(single_se(1e-3));
    const auto c = evolve_fidelity(sys, {0.0, 1.0});
    const auto csv = curve_to_csv(c);
    CHECK(csv.rfind("t,F,one_minus_F\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
