#include "decotime/errors.hpp"
#include "decotime/tau2.hpp"

#include "doctest.h"
#include "fixtures.hpp"
#include "random_cases.hpp"

#include <cmath>

using namespace decotime;
using namespace random_cases;

namespace {

double rel(double a, double b)
{
    return a == b ? 0.0 : std::abs(a - b) / std::max(std::abs(a), std::abs(b));
}

} // namespace

TEST_CASE("benchmark assembles seven bath families and no gating terms")
{
    const auto vm = validate_model(fixtures::benchmark(4));
    const auto modes = std::make_shared<const NormalModes>(solve_normal_modes(vm));
    const auto terms = assemble_interaction_terms(vm, modes);
    const auto fam = terms.bath_families();
    CHECK(fam.size() == 7);
    CHECK(terms.count(TermLabel::gating_rabi) == 0);
    CHECK(terms.count(TermLabel::gating_zeeman) == 0);
    CHECK(terms.count(TermLabel::se_dipole) == 4);
    CHECK(terms.count(TermLabel::ld_cavity) == 8);
    CHECK(terms.count(TermLabel::cavity_decay_w) == 2);

    auto m = fixtures::benchmark(4);
    m.gating.enabled = true;
    m.gating.omega_rabi = {cplx{1e6, 2e5}, {}, {}, {}};
    m.gating.delta_shift = {0.0, 3e5, 0.0, 0.0};
    const auto vg = validate_model(m);
    const auto tg = assemble_interaction_terms(vg, modes);
    CHECK(tg.count(TermLabel::gating_rabi) == 1);
    CHECK(tg.count(TermLabel::gating_zeeman) == 1);
}

TEST_CASE("engine equals every closed form on random states")
{
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto t = draw_trial(rng, trial);
        CAPTURE(trial);
        CAPTURE(to_string(t.cls));
        CAPTURE(t.n);
        const double a = t.e.general.inv_half_tau2_sq;
        CHECK(a > 0.0);
        CHECK(rel(a, t.e.pairs.inv_half_tau2_sq) <= 1e-10);
        CHECK(rel(a, t.e.automatic.inv_half_tau2_sq) <= 1e-10);
        worst = std::max({worst, rel(a, t.e.pairs.inv_half_tau2_sq), rel(a, t.e.automatic.inv_half_tau2_sq)});
    }
    MESSAGE("worst relative deviation " << worst);
}

TEST_CASE("Hadamard timescale and SE immunity on the benchmark")
{
    const auto vm = validate_model(fixtures::benchmark());
    const auto st = build_state(StateSpec::hadamard(), 1e4);
    const auto r = tau2_closed_form(StateClass::hadamard, st, vm, nullptr, 0.0);
    CHECK(r.tau2 == doctest::Approx(1.0 / (1e6 * std::sqrt(2e4))).epsilon(1e-12));
    CHECK(r.breakdown.at("SE-dipole") == 0.0);
    REQUIRE(r.approximation.has_value());
    CHECK(*r.approximation == doctest::Approx(1e16).epsilon(1e-12));
    CHECK(r.method == "closed-form-uniform");

    // the same statement from the general engine on a materialised register
    const auto v8 = std::make_shared<const ValidatedModel>(validate_model(fixtures::benchmark(8)));
    const auto modes = std::make_shared<const NormalModes>(solve_normal_modes(*v8));
    const auto terms = assemble_interaction_terms(*v8, modes);
    const auto g = tau2_general(build_state(StateSpec::hadamard(), 8), CavityState::vacuum(), terms, 0.0);
    CHECK(g.breakdown.at("SE-dipole") == 0.0);
    CHECK(g.breakdown.at("LD-SE") == 0.0);
    CHECK(g.inv_half_tau2_sq == doctest::Approx(8e12).epsilon(1e-12));
}

TEST_CASE("GHZ timescale and independent SE decoherence at a micron")
{
    const auto vm = validate_model(fixtures::benchmark());
    const auto r = tau2_closed_form(StateClass::ghz, build_state(StateSpec::ghz(), 1e4), vm, nullptr, 0.0);
    CHECK(r.tau2 >= 1e-18);
    CHECK(r.tau2 <= 1e-16);

    const auto v8 = std::make_shared<const ValidatedModel>(validate_model(fixtures::benchmark(8)));
    const auto modes = std::make_shared<const NormalModes>(solve_normal_modes(*v8));
    const auto terms = assemble_interaction_terms(*v8, modes);
    const auto g = tau2_general(build_state(StateSpec::ghz(), 8), CavityState::vacuum(), terms, 0.0);
    CHECK(g.cross_site_fraction_by_label.at("SE-dipole") < 1e-6);
    const auto p = tau2_closed_form(StateClass::ghz, build_state(StateSpec::ghz(), 8), *v8, modes.get(), 0.0,
                                    {SumMethod::automatic, true});
    CHECK(rel(g.inv_half_tau2_sq, p.inv_half_tau2_sq) <= 1e-10);
}

TEST_CASE("macroscopic no-SE register")
{
    auto m = fixtures::benchmark(1e22);
    m.qubits.gamma_se = 0.0;
    const auto vm = validate_model(m);
    const auto r = tau2_closed_form(StateClass::no_se, build_state(StateSpec::hadamard(), 1e22), vm, nullptr, 0.0);
    CHECK(r.tau2 == doctest::Approx(1.0 / (1e6 * std::sqrt(2e22))).epsilon(1e-12));
}

TEST_CASE("uniform and pair evaluation agree")
{
    const auto vm = validate_model(fixtures::benchmark(40));
    for (auto [cls, spec] : {std::pair{StateClass::hadamard, StateSpec::hadamard()},
                             std::pair{StateClass::ghz, StateSpec::ghz()},
                             std::pair{StateClass::correlated_vacuum, StateSpec::all_zero()},
                             std::pair{StateClass::se_stationary, StateSpec::all_zero()}}) {
        CAPTURE(to_string(cls));
        const auto st = build_state(spec, 40);
        const auto u = tau2_closed_form(cls, st, vm, nullptr, 0.0);
        const auto p = tau2_closed_form(cls, st, vm, nullptr, 0.0, {SumMethod::automatic, true});
        CHECK(u.method == "closed-form-uniform");
        CHECK(p.method == "closed-form-pairs");
        // the pair path keeps the (tiny) SE cross sums of all-zero, which the uniform path drops exactly
        CHECK(rel(u.inv_half_tau2_sq, p.inv_half_tau2_sq) <= 1e-8);
    }
}

TEST_CASE("all-zero register under SE alone is N times the diagonal sum")
{
    auto m = fixtures::benchmark(3);
    m.cavity.enabled = false;
    m.vibrations.enabled = false;
    m.geometry.spacing = 1e-3;
    auto vm = std::make_shared<const ValidatedModel>(validate_model(m));
    const auto terms = assemble_interaction_terms(*vm, nullptr);
    const auto r = tau2_general(build_state(StateSpec::all_zero(), 3), CavityState::vacuum(), terms, 0.0);
    CHECK(r.inv_half_tau2_sq == doctest::Approx(3.0 * se_diagonal_sum(*vm, 0.0).value).epsilon(1e-12));
}

TEST_CASE("zero couplings give an infinite timescale")
{
    auto m = fixtures::benchmark(3);
    m.qubits.gamma_se = 0.0;
    m.cavity.enabled = false;
    m.vibrations.enabled = false;
    auto vm = std::make_shared<const ValidatedModel>(validate_model(m));
    const auto terms = assemble_interaction_terms(*vm, nullptr);
    const auto r = tau2_general(build_state(StateSpec::ghz(), 3), CavityState::vacuum(), terms, 0.0);
    CHECK(r.inv_half_tau2_sq == 0.0);
    CHECK(std::isinf(r.tau2));
    CHECK(report_to_json(r)["tau2_s"].is_null());
    CHECK(fidelity_short_time(r, 1.0) == 1.0);
}

TEST_CASE("closed forms check their preconditions")
{
    const auto vm = validate_model(fixtures::benchmark());
    const auto h = build_state(StateSpec::hadamard(), 1e4);
    CHECK_THROWS_AS(tau2_closed_form(StateClass::hadamard, h, vm, nullptr, 4.0), UsageError);
    CHECK_THROWS_AS(tau2_closed_form(StateClass::ghz, h, vm, nullptr, 0.0), UsageError);
    CHECK_THROWS_AS(tau2_closed_form(StateClass::general, h, vm, nullptr, 0.0), UsageError);
    CHECK_THROWS_AS(tau2_closed_form(StateClass::hadamard, build_state(StateSpec::hadamard(), 10), vm, nullptr, 0.0),
                    UsageError);
    const auto v2 = validate_model(fixtures::benchmark(2));
    CHECK_THROWS_AS(tau2_closed_form(StateClass::ghz, build_state(StateSpec::ghz(), 2), v2, nullptr, 0.0), UsageError);
    CHECK_THROWS_AS(
        tau2_closed_form(StateClass::uncorrelated_vacuum, build_state(StateSpec::ghz(), 2), v2, nullptr, 0.0),
        UsageError);
    CHECK_NOTHROW(tau2_closed_form(StateClass::se_stationary, h, vm, nullptr, 300.0));

    auto g = fixtures::benchmark();
    g.gating.enabled = true;
    const auto r = tau2_closed_form(StateClass::hadamard, h, validate_model(g), nullptr, 0.0);
    CHECK(r.warnings.size() == 1);
}

TEST_CASE("decoherence regime classifier")
{
    CHECK(classify_decoherence(1e3, 0.0, 1.0) == Regime::independent);
    CHECK(classify_decoherence(1e-3, 1e-2, 1.0) == Regime::collective);
    CHECK(classify_decoherence(1.0, 0.0, 1.0) == Regime::intermediate);
    CHECK(classify_decoherence(1e-3, 1.0, 1.0) == Regime::intermediate);
    CHECK(classify_decoherence(5.0, 0.0, 1.0, {4.0, 0.1}) == Regime::independent);
    CHECK_THROWS_AS(classify_decoherence(1.0, 1.0, 1.0, {0.1, 0.2}), UsageError);

    const auto vm = validate_model(load_model_file(fixtures::config("small_chain.cfg")));
    // dk d = 1e7 * 5e-6 = 50
    CHECK(classify_decoherence(vm, 0, 1) == Regime::independent);
    CHECK_THROWS_AS(classify_decoherence(validate_model(fixtures::benchmark(4)), 0, 1), UsageError);
}

TEST_CASE("short-time fidelity")
{
    DecoherenceReport r;
    r.inv_half_tau2_sq = 2e16;
    finalize(r);
    CHECK(r.tau2 == doctest::Approx(5e-9).epsilon(1e-15));
    bool warn = true;
    CHECK(fidelity_short_time(r, 0.0, &warn) == 1.0);
    CHECK_FALSE(warn);
    CHECK(fidelity_short_time(r, r.tau2, &warn) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(warn);
    fidelity_short_time(r, 0.1 * r.tau2, &warn);
    CHECK_FALSE(warn);
}

TEST_CASE("scaling sweeps recover the inverse square root")
{
    const std::vector<double> ns = {1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8};
    const auto tmpl = fixtures::benchmark();
    const auto h = scaling_sweep(tmpl, StateClass::hadamard, StateSpec::hadamard(), ns);
    CHECK(std::abs(h.slope + 0.5) <= 1e-6);
    const auto g = scaling_sweep(tmpl, StateClass::ghz, StateSpec::ghz(), ns);
    CHECK(std::abs(g.slope + 0.5) <= 1e-3);
    const auto flat =
        scaling_sweep(tmpl, StateClass::hadamard, StateSpec::hadamard(), ns, [](double n) { return 1.0 / std::sqrt(n); });
    CHECK(std::abs(flat.slope) <= 1e-9);

    CHECK_THROWS_AS(scaling_sweep(tmpl, StateClass::hadamard, StateSpec::hadamard(), {1e2, 1e3}), UsageError);
    CHECK_THROWS_AS(scaling_sweep(tmpl, StateClass::hadamard, StateSpec::hadamard(), {1e2, 1e4, 1e3}), UsageError);
}

TEST_CASE("artifacts are deterministic")
{
    const std::vector<double> ns = {1e2, 1e3, 1e4};
    const auto tmpl = fixtures::benchmark();
    const auto a = scaling_sweep(tmpl, StateClass::ghz, StateSpec::ghz(), ns);
    const auto b = scaling_sweep(tmpl, StateClass::ghz, StateSpec::ghz(), ns);
    const auto csv = sweep_to_csv(a);
    CHECK(csv == sweep_to_csv(b));
    CHECK(csv.rfind("N,tau2_s,inv_half_tau2_sq,", 0) == 0);
    CHECK(report_to_json(a.rows[1].report).dump() == report_to_json(b.rows[1].report).dump());

    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(state_class_from_string(to_string(StateClass::uncorrelated_vacuum)) == StateClass::uncorrelated_vacuum);
    CHECK_THROWS_AS(state_class_from_string("bogus"), UsageError);
}
