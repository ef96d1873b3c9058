#pragma once

#include "decotime/states.hpp"
#include "decotime/tau2.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace decotime {

// Exact evolution of small instances with hbar = 1: frequencies and couplings
// share one unit and times are in its inverse.

struct OracleMode {
    double omega = 1.0;
    int truncation = 3;
    double occupation = 0.0; // Nbar of the initial thermal state
};

struct OracleSEMode : OracleMode {
    std::vector<cplx> g; // per qubit: sigma_X^i (g a + g* a^dag)
};

struct OracleDecayMode : OracleMode {
    cplx u, w; // b^dag (u d + w d^dag) + h.c.
};

struct OracleVibMode : OracleMode {
    std::vector<double> classical; // sigma_X^i c (A + A^dag)
    std::vector<double> magnetic;  // sigma_Z^i m (A + A^dag)
    std::vector<cplx> cavity;      // sigma_X^i (p b + p* b^dag)(A + A^dag)
};

struct OracleSpec {
    std::string name;
    std::size_t n_qubits = 1;
    double qubit_omega = 1.0;
    StateSpec state = StateSpec::all_zero();
    bool include_cavity = false;
    double cavity_omega = 1.0;
    int cavity_truncation = 3;
    int cavity_fock = 0;
    std::vector<OracleSEMode> se;
    std::vector<OracleDecayMode> decay;
    std::vector<OracleVibMode> vib;
    // ld_se[i][k][K]: sigma_X^i (n a_k + n* a_k^dag)(A_K + A_K^dag)
    std::vector<std::vector<std::vector<cplx>>> ld_se;
    // Negative control: the engine sees qubit 0's SE couplings with flipped sign.
    bool corrupt_engine_sign = false;
};

inline constexpr std::size_t kOracleMaxDimension = 20000;

/// Throws ValidationError listing every way the system exceeds the oracle limits.
void check_spec(const OracleSpec& spec);

/// Full tensor-product Hamiltonian; the system (qubits, then cavity) is the leading factor.
struct SmallSystem {
    Eigen::MatrixXcd hamiltonian;
    Eigen::VectorXd system_energies; // diagonal of H_S, the coherent-only generator
    Eigen::VectorXcd psi;            // initial pure state of qubits and cavity
    std::vector<std::size_t> env_states; // environment basis states kept in rho_E
    std::vector<double> env_weights;
    std::size_t system_dim = 0;
    std::size_t env_dim = 0;
    double coupling_norm = 0.0;        // spectral norm of V_I
    double hermiticity_residual = 0.0; // ||H - H^dag|| / ||H||
};

SmallSystem build_small_system(const OracleSpec& spec);

struct FitWindow {
    double lo = 1e-8;
    double hi = 1e-3;
};

struct Tau2Fit {
    double tau2 = 0.0;
    double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0; // 1 - F = c1 t + c2 t^2 + c3 t^3 + c4 t^4
    double quadratic_residual = 0.0;              // relative rms misfit of a pure t^2 law
    bool curvature = false;
    bool tau1_zero = true;
    std::size_t points = 0;
};

/// Needs at least 5 points with lo <= 1 - F <= hi; throws NumericError otherwise.
Tau2Fit fit_tau2(const std::vector<double>& times, const std::vector<double>& one_minus_f, const FitWindow& w = {});

struct FidelityCurve {
    std::vector<double> times;
    std::vector<double> fidelity;
    std::vector<double> one_minus_f; // evaluated directly, without cancellation
    double tau2_fit = 0.0;
    double fit_residual = 0.0;
    bool truncation_converged = false;
    double max_trace_error = 0.0;
    double max_purity_drift = 0.0;
    double min_eigenvalue = 0.0;
    Tau2Fit fit;
};

struct EvolveOptions {
    bool allow_long_time = false; // lifts the max(t) ||V_I|| <= 1 guard
    bool check_unitarity = true;
};

/// Evolves on the given grid (no fit).
FidelityCurve evolve_fidelity(const SmallSystem& sys, const std::vector<double>& times, const EvolveOptions& opt = {});

/// Log-spaced grid whose 1 - F spans the fit window. Empty when F stays at 1.
std::vector<double> auto_time_grid(const SmallSystem& sys, const FitWindow& w = {}, std::size_t points = 41);

/// Variance-engine terms on the same discrete modes the oracle evolves.
TermList engine_terms(const OracleSpec& spec);
DecoherenceReport engine_report(const OracleSpec& spec);

struct CrossValidation {
    std::string name;
    double tau2_engine = 0.0;
    double tau2_oracle = 0.0;
    double deviation = 0.0; // |tau2_engine / tau2_oracle - 1|
    bool truncation_converged = false;
    int truncation_steps = 0;
    std::size_t dimension = 0;
    FidelityCurve curve;
    bool passed = false;
    std::string failure;
    double seconds = 0.0;
};

struct CrossValidateOptions {
    double tolerance = 0.01;
    double convergence = 0.002;
    int max_truncation_steps = 4;
    FitWindow window;
};

CrossValidation cross_validate(const OracleSpec& spec, const CrossValidateOptions& opt = {});

/// Three specs for the quick suite, at least ten for the full one.
std::vector<OracleSpec> regression_suite(bool full);
OracleSpec negative_control_spec();

/// Runs the specs concurrently; results keep the input order.
std::vector<CrossValidation> run_suite(const std::vector<OracleSpec>& specs, const CrossValidateOptions& opt = {});

std::string curve_to_csv(const FidelityCurve& c);
nlohmann::json validation_to_json(const CrossValidation& v);

} // namespace decotime
