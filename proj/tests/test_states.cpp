#include "decotime/errors.hpp"
#include "decotime/states.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace decotime;

namespace {

// Dense reference: apply the Pauli strings to the full amplitude vector.
std::vector<cplx> dense(const QubitRegisterState& s)
{
    const auto m = materialize(s);
    std::vector<cplx> v(std::size_t{1} << static_cast<unsigned>(s.n_qubits()));
    for (const auto& [i, a] : m.amplitudes()) {
        v[i] = a;
    }
    return v;
}

void apply(std::vector<cplx>& v, std::size_t site, Axis a)
{
    const std::size_t bit = std::size_t{1} << site;
    if (a == Axis::Z) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] *= (i & bit) ? 1.0 : -1.0;
        }
    } else {
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!(i & bit)) {
                std::swap(v[i], v[i | bit]);
            }
        }
    }
}

double dense_expect(const std::vector<cplx>& psi, std::vector<std::pair<std::size_t, Axis>> ops)
{
    auto phi = psi;
    for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
        apply(phi, it->first, it->second);
    }
    cplx acc{};
    for (std::size_t i = 0; i < psi.size(); ++i) {
        acc += std::conj(psi[i]) * phi[i];
    }
    return acc.real();
}

StateSpec random_sparse(std::mt19937_64& rng, unsigned n, std::size_t nnz)
{
    std::uniform_int_distribution<std::uint64_t> idx(0, (std::uint64_t{1} << n) - 1);
    std::normal_distribution<double> g;
    StateSpec s{StateTag::sparse, {}, {}};
    while (s.amplitudes.size() < nnz) {
        s.amplitudes[idx(rng)] = {g(rng), g(rng)};
    }
    double norm = 0.0;
    for (const auto& [i, a] : s.amplitudes) {
        norm += std::norm(a);
    }
    for (auto& [i, a] : s.amplitudes) {
        a /= std::sqrt(norm);
    }
    return s;
}

StateSpec random_product(std::mt19937_64& rng, unsigned n)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    StateSpec s{StateTag::product, {}, {}};
    for (unsigned i = 0; i < n; ++i) {
        const double th = std::acos(2 * u(rng) - 1);
        s.product.push_back({cplx{std::cos(th / 2), 0.0}, std::polar(std::sin(th / 2), 6.283 * u(rng))});
    }
    return s;
}

void check_against_dense(const QubitRegisterState& s)
{
    const auto psi = dense(s);
    const auto n = static_cast<std::size_t>(s.n_qubits());
    for (std::size_t i = 0; i < n; ++i) {
        for (Axis a : {Axis::X, Axis::Z}) {
            CHECK(expect_pauli(s, i, a) == doctest::Approx(dense_expect(psi, {{i, a}})).epsilon(1e-12));
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) {
                    continue;
                }
                for (Axis b : {Axis::X, Axis::Z}) {
                    const double want = dense_expect(psi, {{i, a}, {j, b}});
                    CHECK(std::abs(expect_pauli_pair(s, i, j, a, b) - want) <= 1e-12);
                }
            }
        }
    }
}

} // namespace

TEST_CASE("structured expectations match dense evaluation")
{
    for (unsigned n : {1U, 2U, 3U, 5U}) {
        for (auto spec : {StateSpec::hadamard(), StateSpec::ghz(), StateSpec::all_zero(), StateSpec::w()}) {
            CAPTURE(n);
            CAPTURE(to_string(spec.tag));
            check_against_dense(build_state(spec, n));
        }
    }
}

TEST_CASE("random product and sparse states match dense evaluation")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const unsigned n = 2 + trial % 4;
        check_against_dense(build_state(random_product(rng, n), n));
        check_against_dense(build_state(random_sparse(rng, n, std::min<std::size_t>(1 + trial % 6, std::size_t{1} << n)), n));
    }
}

TEST_CASE("analytic rules hold at sizes beyond any state vector")
{
    const double n = 1e22;
    const auto h = build_state(StateSpec::hadamard(), n);
    CHECK(expect_pauli(h, 123456789, Axis::X) == 1.0);
    CHECK(expect_pauli_pair(h, 0, 999999999999ULL, Axis::X, Axis::X) == 1.0);
    const auto g = build_state(StateSpec::ghz(), n);
    CHECK(expect_pauli(g, 7, Axis::X) == 0.0);
    CHECK(expect_pauli_pair(g, 1, 2, Axis::Z, Axis::Z) == 1.0);
    CHECK(expect_pauli_pair(g, 1, 2, Axis::X, Axis::X) == 0.0);
    CHECK(h.is_uniform());
    CHECK(g.is_uniform());
    CHECK(is_uncorrelated(h));
    CHECK(is_uncorrelated(g));
    CHECK_FALSE(is_uncorrelated(build_state(StateSpec::w(), 10)));
    CHECK_THROWS_AS(materialize(h), UsageError);
}

TEST_CASE("normalization policy")
{
    StateSpec s{StateTag::sparse, {}, {{0, 1.0 + 4e-7}}};
    const auto st = build_state(s, 2);
    CHECK(std::abs(st.amplitudes().at(0)) == doctest::Approx(1.0).epsilon(1e-15));
    StateSpec bad{StateTag::sparse, {}, {{0, 0.9}}};
    CHECK_THROWS_AS(build_state(bad, 2), ConfigError);
    StateSpec out_of_range{StateTag::sparse, {}, {{4, 1.0}}};
    CHECK_THROWS_AS(build_state(out_of_range, 2), ConfigError);
    StateSpec zero{StateTag::sparse, {}, {}};
    CHECK_THROWS_AS(build_state(zero, 2), ConfigError);
}

TEST_CASE("sparse amplitude files")
{
    std::istringstream in("# GHZ on three qubits\n0 0.7071067811865476,0\n7 0.7071067811865476,0\n");
    const auto a = read_sparse_amplitudes(in);
    REQUIRE(a.size() == 2);
    const auto s = build_state({StateTag::sparse, {}, a}, 3);
    CHECK(expect_pauli_pair(s, 0, 2, Axis::Z, Axis::Z) == doctest::Approx(1.0));
    std::istringstream broken("0 1,0\nxyz\n");
    CHECK_THROWS_WITH_AS(read_sparse_amplitudes(broken), doctest::Contains("line 2"), ConfigError);
}

TEST_CASE("uncorrelated check is exhaustive for small sparse states")
{
    std::mt19937_64 rng(3);
    const auto prod = build_state(random_product(rng, 4), 4);
    CHECK(is_uncorrelated(materialize(prod)));
    CHECK_FALSE(is_uncorrelated(build_state(StateSpec::ghz(), 2)));
}

TEST_CASE("cavity moments")
{
    const auto v = cavity_moments(CavityState::vacuum());
    CHECK(v.bbd == 1.0);
    CHECK(v.bdb == 0.0);
    const auto f = cavity_moments(CavityState::fock(3));
    CHECK(f.bbd == 4.0);
    CHECK(f.bdb == 3.0);
    CHECK(f.b == cplx{});
    const cplx alpha{0.3, -0.4};
    const auto c = cavity_moments(CavityState::coherent(alpha));
    CHECK(std::abs(c.b - alpha) < 1e-15);
    CHECK(c.bdb == doctest::Approx(0.25));
    CHECK(c.bbd == doctest::Approx(1.25));
    CHECK(std::abs(c.b2 - alpha * alpha) < 1e-15);
}
