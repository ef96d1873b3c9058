#pragma once

#include "decotime/constants.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace decotime {

using Vec3 = Eigen::Vector3d;
using cplx = std::complex<double>;

/// Sites beyond this count are only handled by the uniform-register paths.
inline constexpr double kMaxMaterializedSites = 1.0e6;

struct QubitParams {
    double omega0 = 0.0;          // rad/s
    Vec3 dipole = Vec3::Zero();   // d10, C m
    double gamma_se = 0.0;        // 1/s
    double mass = 0.0;            // kg
    Vec3 moment0 = Vec3::Zero();  // m00, J/T
    Vec3 moment1 = Vec3::Zero();  // m11, J/T
};

enum class GeometryKind { explicit_positions, chain };

/// Equilibrium positions r_i0. Either an explicit list or a regular chain
/// whose site count may be far too large to enumerate.
struct Geometry {
    GeometryKind kind = GeometryKind::explicit_positions;
    std::vector<Vec3> positions;
    double count = 0.0;
    double spacing = 0.0;
    Vec3 axis = Vec3::UnitX();

    double n_sites() const;
    bool materializable() const { return n_sites() <= kMaxMaterializedSites; }
    std::size_t size() const; // throws UsageError when not materializable
    Vec3 position(std::size_t i) const;
};

struct CavityParams {
    bool enabled = false;
    double omega_b = 0.0;                      // rad/s
    double mode_volume = 0.0;                  // m^3
    Vec3 wavevector = Vec3::Zero();            // 1/m
    Vec3 polarization = Vec3::UnitZ();
};

struct SEBathParams {
    double cutoff = 1.0e17;          // omega_c, rad/s
    double temperature = 0.0;        // K, shared by all baths
    double bandwidth_dk = 0.0;       // 1/m
    double mean_k = 0.0;             // 1/m
    double recoil_wavenumber = 0.0;  // 1/m, 0 selects omega0/c
};

enum class ProfileKind { zero, flat, power };

/// Spectral amplitude of a quasi-mode coupling: |w(xi)|^2 = A^2 (xi/xi_c)^p exp(-xi/xi_c).
struct SpectralProfile {
    ProfileKind kind = ProfileKind::zero;
    double amplitude = 0.0; // rad/s
    double exponent = 0.0;

    bool is_zero() const { return kind == ProfileKind::zero || amplitude == 0.0; }
    double effective_exponent() const { return kind == ProfileKind::power ? exponent : 0.0; }
};

struct CavityDecayParams {
    SpectralProfile u;
    SpectralProfile w;
    double cutoff = 0.0;        // xi_c, rad/s
    double mode_density = 0.0;  // modes per rad/s
};

/// Gating couplings frozen at t = 0. Empty vectors mean all-zero.
struct GatingSnapshot {
    bool enabled = false;
    std::vector<cplx> omega_rabi;      // Omega_i, rad/s
    std::vector<double> delta_shift;   // Delta_i1 - Delta_i0, rad/s
    Vec3 classical_wavevector = Vec3::Zero();
    std::vector<Vec3> zeeman_gradient0; // grad(m00 . B) at r_i0, J/m
    std::vector<Vec3> zeeman_gradient1; // grad(m11 . B) at r_i0, J/m

    cplx rabi(std::size_t i) const { return i < omega_rabi.size() ? omega_rabi[i] : cplx{}; }
    double delta(std::size_t i) const { return i < delta_shift.size() ? delta_shift[i] : 0.0; }
    Vec3 gradient(int level, std::size_t i) const;
};

enum class Topology { independent, chain1d, custom };
enum class MeanStrategy { mean_inverse, inverse_mean };

struct VibrationParams {
    bool enabled = false;
    Topology topology = Topology::independent;
    double spring_constant = 0.0; // V0, J/m^2
    double chain_coupling = 0.0;  // c_nn, J/m^2
    std::string matrix_file;
    Eigen::MatrixXd custom;       // 3N x 3N, J/m^2
    MeanStrategy mean_strategy = MeanStrategy::mean_inverse;
};

struct Model {
    PhysicalConstants constants;
    QubitParams qubits;
    Geometry geometry;
    CavityParams cavity;
    SEBathParams se_bath;
    CavityDecayParams cavity_decay;
    GatingSnapshot gating;
    VibrationParams vibrations;
};

/// A Model whose invariants have been checked. Only validate_model creates one.
class ValidatedModel {
public:
    const Model& model() const noexcept { return model_; }
    const Model* operator->() const noexcept { return &model_; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

private:
    friend ValidatedModel validate_model(Model model);
    ValidatedModel(Model m, std::vector<std::string> w) : model_(std::move(m)), warnings_(std::move(w)) {}

    Model model_;
    std::vector<std::string> warnings_;
};

/// Checks every invariant and collects all failures into one ValidationError.
ValidatedModel validate_model(Model model);

struct NormalModes;

struct DerivedParams {
    double g_b = 0.0;               // rad/s
    double eta = 0.0;               // uniform Lamb-Dicke parameter
    std::vector<double> eta_site;   // exact per-site value from the modes (empty when not materializable)
    double se_sum_prefactor = 0.0;  // Gamma omega_c (omega_c/omega0)^3, 1/s^2
    double mean_frequency = 0.0;    // nu-bar used for eta, rad/s
    std::vector<std::string> warnings;
};

/// Requires solved normal modes whenever vibrations are enabled.
DerivedParams derived_quantities(const ValidatedModel& model, const NormalModes* modes);

/// Free-space spontaneous emission rate implied by |d10|.
double free_space_gamma(const Model& model);

/// |d10|^2 implied by Gamma; the SE mode sums use this magnitude.
double dipole_sq_from_gamma(const Model& model);

/// Unit vector along d10, or z when the dipole vector is zero.
Vec3 dipole_direction(const Model& model);

/// Cavity coupling prefactor sqrt(omega_b / 2 eps0 hbar V_b) (d10 . e_b), rad/s.
double cavity_coupling(const Model& model);

/// Recoil wavenumber used for the Lamb-Dicke SE coupling.
double recoil_wavenumber(const Model& model);

// ---- configuration -----------------------------------------------------

/// Parses the sectioned key-value format documented in docs/config.md.
/// Relative paths inside the document resolve against base_dir.
Model load_model(std::string_view text, const std::filesystem::path& base_dir = {});
Model load_model_file(const std::filesystem::path& path);

/// Emits a config document that load_model maps back to the same Model.
std::string serialize_model(const Model& model);

nlohmann::json model_to_json(const Model& model);

/// FNV-1a hash of serialize_model, rendered as 16 hex digits.
std::string parameter_hash(const Model& model);

std::string_view to_string(Topology t);
std::string_view to_string(MeanStrategy s);

} // namespace decotime
