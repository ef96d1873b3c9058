#include "decotime/modesums.hpp"

#include "decotime/errors.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace decotime {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Euler-Maclaurin split point for the thermal image sums.
constexpr int kExplicitTerms = 1000;

// Neumaier compensated accumulator.
struct CompensatedSum {
    double sum = 0.0;
    double c = 0.0;
    void add(double v)
    {
        const double t = sum + v;
        c += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + c; }
};

double F_derivative(double y, double a)
{
    const double q = 1.0 + y * y;
    return -2.0 * a * y / (q * q * q) - 6.0 * y * (1.0 - a * y * y) / (q * q * q * q);
}

// int_0^Y y^2 F(y) dy
double F_moment(double Y, double a)
{
    if (Y < 1e-2) {
        const double y2 = Y * Y;
        return Y * y2 *
               (1.0 / 3.0 +
                y2 * (-(a + 3.0) / 5.0 + y2 * ((3.0 * a + 6.0) / 7.0 + y2 * (-(2.0 * a / 3.0 + 10.0 / 9.0) + y2 * (10.0 * a + 15.0) / 11.0))));
    }
    const double q = 1.0 + Y * Y;
    return (Y * Y * Y * (5.0 * a + 1.0) + Y * (3.0 * a - 1.0)) / (8.0 * q * q) - (3.0 * a - 1.0) * std::atan(Y) / 8.0;
}

double kernel_closed(double x, double c2, double beta)
{
    const double f0 = F_closed_form(x, c2);
    if (std::isinf(beta)) {
        return f0;
    }
    const double a = 1.0 - 2.0 * c2;
    auto term = [&](double p) { return F_closed_form(x / p, c2) / (p * p * p * p); };
    CompensatedSum s;
    for (int n = 1; n < kExplicitTerms; ++n) {
        s.add(term(1.0 + n * beta));
    }
    const double p0 = 1.0 + kExplicitTerms * beta;
    const double integral = x > 0.0 ? F_moment(x / p0, a) / (beta * x * x * x) : 1.0 / (3.0 * beta * p0 * p0 * p0);
    const double y0 = x / p0;
    const double df = beta * (-4.0 * F_closed_form(y0, c2) / std::pow(p0, 5) - x * F_derivative(y0, a) / std::pow(p0, 6));
    s.add(integral);
    s.add(0.5 * term(p0));
    s.add(-df / 12.0);
    return f0 + 2.0 * s.value();
}

// Zero temperature, x > 1: a(u) = Im[e^{iu} P(u)] with s^3 P(sx) a quadratic in s,
// so the ray s = t / (1 - ix) turns e^{-s} e^{isx} into e^{-t} and removes the oscillation.
double kernel_contour(double x, double c2, double* abs_error)
{
    using boost::math::quadrature::gauss_kronrod;
    const cplx w = 1.0 / cplx(1.0, -x);
    const cplx q2 = 1.5 * (1.0 - c2) / x;
    const cplx q1{0.0, 1.5 * (1.0 - 3.0 * c2) / (x * x)};
    const cplx q0 = 1.5 * (3.0 * c2 - 1.0) / (x * x * x);
    auto integrand = [&](double t) {
        const cplx s = t * w;
        return (w * std::exp(-t) * ((q2 * s + q1) * s + q0)).imag();
    };
    double err = 0.0;
    double l1 = 0.0;
    const double v = gauss_kronrod<double, 31>::integrate(integrand, 0.0, kInf, 10, 1e-15, &err, &l1);
    err += 4.0 * std::numeric_limits<double>::epsilon() * l1;
    if (abs_error != nullptr) {
        *abs_error = err / 6.0;
    }
    return v / 6.0;
}

double kernel_quadrature(double x, double c2, double beta, double* abs_error)
{
    if (std::isinf(beta) && x > 1.0) {
        return kernel_contour(x, c2, abs_error);
    }
    using boost::math::quadrature::gauss_kronrod;
    const bool cold = std::isinf(beta);
    auto integrand = [&](double s) {
        if (s <= 0.0) {
            return 0.0;
        }
        const double w = cold ? 1.0 : 1.0 + 2.0 / std::expm1(beta * s);
        return s * s * s * std::exp(-s) * se_angular_factor(s * x, c2) * w;
    };
    const double s_max = 60.0 + 3.0 * std::log1p(x);
    const double width = x > 0.0 ? std::min(1.0, std::numbers::pi / x) : 1.0;
    const auto panels = static_cast<long>(std::ceil(s_max / width));
    CompensatedSum total;
    double err = 0.0;
    double l1 = 0.0;
    for (long k = 0; k < panels; ++k) {
        const double a = k * width;
        const double b = std::min(s_max, a + width);
        double e = 0.0;
        double l = 0.0;
        total.add(gauss_kronrod<double, 31>::integrate(integrand, a, b, 6, 1e-14, &e, &l));
        err += e;
        l1 += l;
    }
    err += std::numeric_limits<double>::epsilon() * l1 * std::sqrt(static_cast<double>(panels));
    if (abs_error != nullptr) {
        *abs_error = err / 6.0;
    }
    return total.value() / 6.0;
}

double se_prefactor(const Model& m)
{
    const double wc = m.se_bath.cutoff;
    const double r = wc / m.qubits.omega0;
    return 3.0 / std::numbers::pi * m.qubits.gamma_se * wc * r * r * r;
}

double beta_for(double omega, double temperature)
{
    return temperature > 0.0 ? kConstants.hbar * omega / (kConstants.kB * temperature) : kInf;
}

double profile_exponent(const SpectralProfile& p)
{
    return p.effective_exponent();
}

// rho A^2 xi_c int t^p e^-t {1 or mbar} dt for one (combined) profile.
void profile_moments(double amp2, double p, const Model& m, double temperature, SumMethod method, double& plus,
                     double& minus)
{
    plus = minus = 0.0;
    if (amp2 == 0.0) {
        return;
    }
    const auto& cd = m.cavity_decay;
    if (!(p > -1.0)) {
        throw NumericError("cavity-decay profile exponent " + std::to_string(p) + " is not integrable");
    }
    const double base = cd.mode_density * amp2 * cd.cutoff;
    const double zero_t = base * std::tgamma(p + 1.0);
    if (!(temperature > 0.0)) {
        plus = zero_t;
        return;
    }
    if (!(p > 0.0)) {
        throw NumericError("thermal cavity-decay moment diverges at low frequency for profile exponent " +
                           std::to_string(p) + " (need > 0)");
    }
    const double beta = beta_for(cd.cutoff, temperature);
    if (method == SumMethod::quadrature) {
        boost::math::quadrature::exp_sinh<double> integrator;
        auto f = [&](double t) { return std::pow(t, p) * std::exp(-t) / std::expm1(beta * t); };
        minus = base * integrator.integrate(f, 0.0, kInf);
    } else {
        minus = zero_t * shifted_power_sum(p + 1.0, beta);
    }
    plus = zero_t + minus;
}

} // namespace

std::string_view to_string(SumMethod m)
{
    switch (m) {
    case SumMethod::automatic: return "automatic";
    case SumMethod::quadrature: return "quadrature";
    case SumMethod::closed_form: return "closed_form";
    }
    return "unknown";
}

double thermal_occupation(double omega, double temperature)
{
    if (!(omega > 0.0)) {
        throw UsageError("thermal_occupation: omega must be > 0");
    }
    if (temperature < 0.0) {
        throw UsageError("thermal_occupation: temperature must be >= 0");
    }
    if (temperature == 0.0) {
        return 0.0;
    }
    return 1.0 / std::expm1(kConstants.hbar * omega / (kConstants.kB * temperature));
}

double thermal_weight(double omega, double temperature)
{
    return 2.0 * thermal_occupation(omega, temperature) + 1.0;
}

double se_angular_factor(double u, double c2)
{
    u = std::abs(u);
    double j0_minus_j1u = 0.0;
    double j2 = 0.0;
    if (u < 0.1) {
        // j_l(u) = u^l sum_n (-1)^n u^2n / (2^n n! (2n+2l+1)!!)
        const double u2 = u * u;
        double t0 = 1.0;       // j0 series term
        double t1 = 1.0 / 3.0; // j1/u series term
        double t2 = 1.0 / 15.0;
        double s0 = 0.0;
        double s1 = 0.0;
        double s2 = 0.0;
        for (int n = 0; n < 8; ++n) {
            s0 += t0;
            s1 += t1;
            s2 += t2;
            const double k = 2.0 * (n + 1);
            t0 *= -u2 / (k * (2.0 * n + 3.0));
            t1 *= -u2 / (k * (2.0 * n + 5.0));
            t2 *= -u2 / (k * (2.0 * n + 7.0));
        }
        j0_minus_j1u = s0 - s1;
        j2 = u2 * s2;
    } else {
        const double s = std::sin(u);
        const double c = std::cos(u);
        const double j0 = s / u;
        const double j1 = s / (u * u) - c / u;
        j0_minus_j1u = j0 - j1 / u;
        j2 = (3.0 / (u * u * u) - 1.0 / u) * s - 3.0 * c / (u * u);
    }
    return 1.5 * (j0_minus_j1u + c2 * j2);
}

double F_closed_form(double x, double c2)
{
    const double x2 = x * x;
    const double q = 1.0 + x2;
    return (1.0 - (1.0 - 2.0 * c2) * x2) / (q * q * q);
}

double se_kernel(double x, double c2, double beta, SumMethod method, double* abs_error)
{
    if (x < 0.0 || c2 < 0.0 || c2 > 1.0 || !(beta > 0.0)) {
        throw UsageError("se_kernel: need x >= 0, cos2theta in [0, 1], beta > 0");
    }
    if (method == SumMethod::quadrature) {
        double err = 0.0;
        const double v = kernel_quadrature(x, c2, beta, &err);
        if (err > 1e-8 * std::abs(v)) {
            std::ostringstream o;
            o.precision(6);
            o << "SE radial quadrature did not reach 1e-8 relative accuracy at omega_c tau = " << x
              << " (value " << v << ", error estimate " << err << ")";
            throw NumericError(o.str());
        }
        if (abs_error != nullptr) {
            *abs_error = err;
        }
        return v;
    }
    const double v = kernel_closed(x, c2, beta);
    if (abs_error != nullptr) {
        *abs_error = 1e-14 * (std::abs(v) + (std::isinf(beta) ? 0.0 : 1.0 / beta));
    }
    return v;
}

SpectralSumResult se_pair_sum(const Model& m, const Vec3& d, double temperature, SumMethod method)
{
    if (!(temperature >= 0.0)) {
        throw UsageError("se_pair_sum: temperature must be >= 0");
    }
    SpectralSumResult r;
    r.method = method == SumMethod::quadrature ? SumMethod::quadrature : SumMethod::closed_form;
    if (m.qubits.gamma_se == 0.0) {
        return r;
    }
    const double dist = d.norm();
    const double x = m.se_bath.cutoff * dist / kConstants.c;
    double c2 = 0.0;
    if (dist > 0.0) {
        const double c = d.dot(dipole_direction(m)) / dist;
        c2 = std::min(1.0, c * c);
    }
    const double pref = se_prefactor(m);
    double err = 0.0;
    r.value = pref * se_kernel(x, c2, beta_for(m.se_bath.cutoff, temperature), r.method, &err);
    r.est_abs_error = pref * err;
    return r;
}

SpectralSumResult se_diagonal_sum(const ValidatedModel& model, double temperature, SumMethod method)
{
    return se_pair_sum(model.model(), Vec3::Zero(), temperature, method);
}

SpectralSumResult se_cross_sum(const ValidatedModel& model, std::size_t i, std::size_t j, double temperature,
                               SumMethod method)
{
    if (i == j) {
        throw UsageError("se_cross_sum needs i != j; use se_diagonal_sum");
    }
    const auto& g = model->geometry;
    return se_pair_sum(model.model(), g.position(i) - g.position(j), temperature, method);
}

double extract_F(const ValidatedModel&, double x, double c2, SumMethod method)
{
    return se_kernel(x, c2, kInf, method == SumMethod::quadrature ? method : SumMethod::closed_form);
}

double shifted_power_sum(double s, double beta)
{
    if (!(s > 1.0) || !(beta > 0.0)) {
        throw UsageError("shifted_power_sum: need s > 1 and beta > 0");
    }
    CompensatedSum acc;
    for (int n = 1; n < kExplicitTerms; ++n) {
        acc.add(std::pow(1.0 + n * beta, -s));
    }
    const double p0 = 1.0 + kExplicitTerms * beta;
    acc.add(std::pow(p0, 1.0 - s) / (beta * (s - 1.0)));
    acc.add(0.5 * std::pow(p0, -s));
    acc.add(s * beta * std::pow(p0, -s - 1.0) / 12.0);
    return acc.value();
}

SpectralSumResult cavity_decay_sum(const ValidatedModel& model, SumMethod method)
{
    const Model& m = model.model();
    SpectralSumResult r;
    r.method = method == SumMethod::quadrature ? SumMethod::quadrature : SumMethod::closed_form;
    const auto& w = m.cavity_decay.w;
    if (w.is_zero()) {
        return r;
    }
    const double p = profile_exponent(w);
    if (r.method == SumMethod::quadrature) {
        boost::math::quadrature::exp_sinh<double> integrator;
        double err = 0.0;
        const double v = integrator.integrate([&](double t) { return std::pow(t, p) * std::exp(-t); }, 0.0, kInf,
                                              1e-12, &err);
        const double scale = m.cavity_decay.mode_density * w.amplitude * w.amplitude * m.cavity_decay.cutoff;
        r.value = scale * v;
        r.est_abs_error = scale * err;
        return r;
    }
    double minus = 0.0;
    profile_moments(w.amplitude * w.amplitude, p, m, 0.0, r.method, r.value, minus);
    r.est_abs_error = 1e-15 * r.value;
    return r;
}

CavityDecayMoments cavity_decay_moments(const Model& m, double temperature, SumMethod method)
{
    const auto& cd = m.cavity_decay;
    CavityDecayMoments out;
    const double au = cd.u.is_zero() ? 0.0 : cd.u.amplitude;
    const double aw = cd.w.is_zero() ? 0.0 : cd.w.amplitude;
    const double pu = profile_exponent(cd.u);
    const double pw = profile_exponent(cd.w);
    profile_moments(au * au, pu, m, temperature, method, out.uu_plus, out.uu_minus);
    profile_moments(aw * aw, pw, m, temperature, method, out.ww_plus, out.ww_minus);
    profile_moments(au * aw, 0.5 * (pu + pw), m, temperature, method, out.uw_plus, out.uw_minus);
    return out;
}

Eigen::Matrix3d vibrational_block(const NormalModes& nm, std::size_t i, std::size_t j, double temperature)
{
    const auto bi = nm.site_block(i);
    const auto bj = nm.site_block(j);
    Eigen::VectorXd w(nm.n_modes());
    for (Eigen::Index k = 0; k < w.size(); ++k) {
        w(k) = nm.zero_point(k) * nm.zero_point(k) * thermal_weight(nm.frequencies(k), temperature);
    }
    return bi * w.asDiagonal() * bj.transpose();
}

cplx lamb_dicke_cavity_sum(const ValidatedModel& model, const NormalModes& nm, std::size_t i, std::size_t j,
                           double temperature)
{
    const Model& m = model.model();
    if (!m.cavity.enabled) {
        return {};
    }
    const Vec3& kb = m.cavity.wavevector;
    const double g = cavity_coupling(m);
    const double phase = kb.dot(m.geometry.position(i) - m.geometry.position(j));
    const double s = kb.dot(vibrational_block(nm, i, j, temperature) * kb);
    return g * g * s * std::polar(1.0, phase);
}

double lamb_dicke_recoil_factor(const Model& m, const NormalModes& nm, std::size_t i, std::size_t j,
                                double temperature)
{
    const Vec3 dh = dipole_direction(m);
    const Eigen::Matrix3d A = (2.0 * Eigen::Matrix3d::Identity() - dh * dh.transpose()) / 5.0;
    const double k = recoil_wavenumber(m);
    return k * k * (A * vibrational_block(nm, i, j, temperature)).trace();
}

double lamb_dicke_se_sum(const ValidatedModel& model, const NormalModes& nm, std::size_t i, std::size_t j,
                         double temperature, SumMethod method)
{
    const Model& m = model.model();
    const double recoil = lamb_dicke_recoil_factor(m, nm, i, j, temperature);
    if (recoil == 0.0) {
        return 0.0;
    }
    const auto se = i == j ? se_diagonal_sum(model, temperature, method) : se_cross_sum(model, i, j, temperature, method);
    return se.value * recoil;
}

} // namespace decotime
