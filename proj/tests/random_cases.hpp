#pragma once

#include "decotime/tau2.hpp"

#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

namespace random_cases {

using namespace decotime;

// Random small model around the chain config: sites nanometres apart so the SE
// cross terms are O(1), random axis, random vibrational topology.
inline Model random_model(std::mt19937_64& rng, std::size_t n, bool cavity, bool vib, double gamma)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g;
    Model m = load_model_file(fixtures::config("small_chain.cfg"));
    m.geometry = Geometry{};
    Vec3 axis(g(rng), g(rng), g(rng));
    axis.normalize();
    Vec3 r = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        m.geometry.positions.push_back(r);
        r += (1e-9 + 1e-8 * u(rng)) * axis;
    }
    m.qubits.gamma_se = gamma;
    m.cavity.enabled = cavity;
    m.vibrations.enabled = vib;
    m.vibrations.topology = u(rng) < 0.5 ? Topology::independent : Topology::chain1d;
    return m;
}

inline StateSpec random_sparse(std::mt19937_64& rng, std::size_t n)
{
    std::uniform_int_distribution<std::uint64_t> idx(0, (std::uint64_t{1} << n) - 1);
    std::normal_distribution<double> g;
    StateSpec s{StateTag::sparse, {}, {}};
    const std::size_t nnz = std::min<std::size_t>(1 + rng() % 6, std::size_t{1} << n);
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

inline StateSpec random_product(std::mt19937_64& rng, std::size_t n)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    StateSpec s{StateTag::product, {}, {}};
    for (std::size_t i = 0; i < n; ++i) {
        const double th = std::acos(2 * u(rng) - 1);
        s.product.push_back({cplx{std::cos(th / 2), 0.0}, std::polar(std::sin(th / 2), 6.283 * u(rng))});
    }
    return s;
}

struct Engines {
    DecoherenceReport general, pairs, automatic;
};

inline Engines evaluate(const Model& m, StateClass cls, const StateSpec& spec, double T)
{
    auto vm = std::make_shared<const ValidatedModel>(validate_model(m));
    std::shared_ptr<const NormalModes> modes;
    if (m.vibrations.enabled) {
        modes = std::make_shared<const NormalModes>(solve_normal_modes(*vm));
    }
    const auto terms = assemble_interaction_terms(*vm, modes);
    const auto n = static_cast<double>(m.geometry.size());
    const auto st = build_state(spec, n);
    Engines e;
    e.general = tau2_general(st, CavityState::vacuum(), terms, T);
    e.pairs = tau2_closed_form(cls, st, *vm, modes.get(), T, {SumMethod::automatic, true});
    e.automatic = tau2_closed_form(cls, st, *vm, modes.get(), T);
    return e;
}

inline constexpr StateClass kClosedClasses[] = {StateClass::se_stationary,      StateClass::correlated_vacuum,
                                                StateClass::uncorrelated_vacuum, StateClass::hadamard,
                                                StateClass::ghz,                StateClass::no_se};

struct Trial {
    StateClass cls;
    std::size_t n;
    Engines e;
};

// Trial k of the engine-vs-closed-form comparison; cycles through the classes.
inline Trial draw_trial(std::mt19937_64& rng, int k)
{
    const StateClass cls = kClosedClasses[k % 6];
    std::size_t n = 1 + rng() % 10;
    if (cls == StateClass::ghz) {
        n = std::max<std::size_t>(n, 3);
    }
    const bool full = cls != StateClass::se_stationary;
    const double gamma = cls == StateClass::no_se ? 0.0 : 1e8;
    const Model m = random_model(rng, n, full, full, gamma);
    StateSpec spec;
    switch (cls) {
    case StateClass::uncorrelated_vacuum:
        spec = random_product(rng, n);
        break;
    case StateClass::hadamard:
        spec = StateSpec::hadamard();
        break;
    case StateClass::ghz:
        spec = StateSpec::ghz();
        break;
    default:
        spec = random_sparse(rng, n);
    }
    const double T = cls == StateClass::se_stationary ? 1e6 * std::uniform_real_distribution<double>()(rng) : 0.0;
    return {cls, n, evaluate(m, cls, spec, T)};
}

} // namespace random_cases
