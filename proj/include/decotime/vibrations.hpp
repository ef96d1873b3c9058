#pragma once

#include "decotime/model.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <vector>

namespace decotime {

/// Harmonic CM coupling V_ij^{ab}; row/column index is 3 i + a.
struct CouplingMatrix {
    Eigen::MatrixXd V; // J/m^2
    double mass = 0.0; // kg

    std::size_t n_sites() const { return static_cast<std::size_t>(V.rows() / 3); }
};

/// Solution of V S_K = m nu_K^2 S_K. Columns of `transform` are the mode
/// vectors S_{ia;K}, ordered by ascending frequency; the first component
/// of each column with magnitude above 1e-12 is positive.
struct NormalModes {
    Eigen::VectorXd frequencies; // nu_K, rad/s
    Eigen::MatrixXd transform;   // S, 3N x 3N
    Eigen::VectorXd zero_point;  // sqrt(hbar / 2 m nu_K), m
    double mass = 0.0;

    std::size_t n_sites() const { return static_cast<std::size_t>(transform.rows() / 3); }
    std::size_t n_modes() const { return static_cast<std::size_t>(frequencies.size()); }

    /// Rows 3 site .. 3 site + 2 of S.
    Eigen::Matrix<double, 3, Eigen::Dynamic> site_block(std::size_t site) const;
};

CouplingMatrix build_coupling_matrix(std::size_t n_sites, const VibrationParams& vib, double mass);
CouplingMatrix build_coupling_matrix(const ValidatedModel& model);

NormalModes solve_normal_modes(const CouplingMatrix& cm);

/// V = V0 * identity without an eigensolve: nu = sqrt(V0/m), S = identity.
NormalModes independent_modes(std::size_t n_sites, double spring_constant, double mass);

/// Picks the analytic path for independent vibrations, otherwise builds and solves.
NormalModes solve_normal_modes(const ValidatedModel& model);

/// c_K = sqrt(hbar / 2 m nu_K) (k . S_{site,:;K}) for every mode K.
std::vector<double> lamb_dicke_coefficients(const NormalModes& nm, const Vec3& k, std::size_t site);

/// Representative nu-bar: harmonic mean of nu_K (mean-inverse) or arithmetic mean (inverse-mean).
double mean_frequency(const NormalModes& nm, MeanStrategy strategy);

/// As above but analytic for independent vibrations, so it works for any site count.
double mean_frequency(const ValidatedModel& model);

/// Dense whitespace-separated matrix with a leading dimension line.
Eigen::MatrixXd read_coupling_matrix_file(const std::filesystem::path& path);

nlohmann::json modes_to_json(const NormalModes& nm);

} // namespace decotime
