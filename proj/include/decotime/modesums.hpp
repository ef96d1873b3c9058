#pragma once

#include "decotime/model.hpp"
#include "decotime/vibrations.hpp"

#include <Eigen/Dense>

#include <string_view>

namespace decotime {

// closed_form uses the analytic radial integral (a rapidly convergent series
// when T > 0); quadrature integrates the radial variable numerically.
enum class SumMethod { automatic, quadrature, closed_form };

struct SpectralSumResult {
    double value = 0.0;          // 1/s^2
    SumMethod method = SumMethod::closed_form;
    double est_abs_error = 0.0;  // 1/s^2
};

std::string_view to_string(SumMethod m);

/// Planck occupation 1/(exp(hbar w / kB T) - 1); exactly 0 at T = 0.
double thermal_occupation(double omega, double temperature);

/// 2 nbar + 1 = coth(hbar w / 2 kB T).
double thermal_weight(double omega, double temperature);

/// Angular factor of the transverse dipole pattern, normalized to 1 at u = 0:
/// (3/2) [j0(u) - j1(u)/u + c2 j2(u)].
double se_angular_factor(double u, double cos2theta);

/// F(x, c2) = (1 - (1 - 2 c2) x^2) / (1 + x^2)^3.
double F_closed_form(double x, double cos2theta);

/// Radial integral (1/6) int s^3 e^-s a(s x) coth(beta s / 2) ds; beta = hbar omega_c / kB T.
/// beta = +inf gives F. The error estimate is written to *abs_error when given.
double se_kernel(double x, double cos2theta, double beta, SumMethod method, double* abs_error = nullptr);

/// Sum over SE modes of |g_k|^2 cos(k.d) coth(hbar w_k / 2 kB T) for separation d.
SpectralSumResult se_pair_sum(const Model& model, const Vec3& separation, double temperature,
                              SumMethod method = SumMethod::automatic);

SpectralSumResult se_diagonal_sum(const ValidatedModel& model, double temperature,
                                  SumMethod method = SumMethod::automatic);

/// Requires i != j.
SpectralSumResult se_cross_sum(const ValidatedModel& model, std::size_t i, std::size_t j, double temperature,
                               SumMethod method = SumMethod::automatic);

/// se_cross_sum / se_diagonal_sum at T = 0, as a function of x = omega_c d / c.
double extract_F(const ValidatedModel& model, double x, double cos2theta, SumMethod method = SumMethod::automatic);

/// L = sum_k |w_k|^2 at T = 0.
SpectralSumResult cavity_decay_sum(const ValidatedModel& model, SumMethod method = SumMethod::automatic);

/// Thermal second moments of the cavity-decay bath: `plus` carries (mbar + 1), `minus` carries mbar.
struct CavityDecayMoments {
    double uu_plus = 0.0, uu_minus = 0.0;
    double ww_plus = 0.0, ww_minus = 0.0;
    double uw_plus = 0.0, uw_minus = 0.0;
};

/// Profiles are taken real and non-negative, so cross moments use sqrt(|u|^2 |w|^2).
CavityDecayMoments cavity_decay_moments(const Model& model, double temperature,
                                        SumMethod method = SumMethod::automatic);

/// W_ij = sum_K x0_K^2 (2 Nbar_K + 1) S_{i,:;K} S_{j,:;K}^T, m^2.
Eigen::Matrix3d vibrational_block(const NormalModes& nm, std::size_t i, std::size_t j, double temperature);

/// K_ij = sum_K p_K^i p_K^j* (2 Nbar_K + 1), 1/s^2.
cplx lamb_dicke_cavity_sum(const ValidatedModel& model, const NormalModes& nm, std::size_t i, std::size_t j,
                           double temperature = 0.0);

/// Recoil factor k_rec^2 tr(A W_ij) with A = (2 - d d^T)/5 the dipole-weighted direction average.
double lamb_dicke_recoil_factor(const Model& model, const NormalModes& nm, std::size_t i, std::size_t j,
                                double temperature);

/// sum_kK n_kK^i n_kK^j* weighted by thermal factors of both baths.
double lamb_dicke_se_sum(const ValidatedModel& model, const NormalModes& nm, std::size_t i, std::size_t j,
                         double temperature, SumMethod method = SumMethod::automatic);

/// sum_{n>=1} (1 + n beta)^-s for s > 1, beta > 0.
double shifted_power_sum(double s, double beta);

} // namespace decotime
