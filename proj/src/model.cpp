#include "decotime/errors.hpp"
#include "decotime/model.hpp"
#include "decotime/vibrations.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace decotime {

ValidationError::ValidationError(std::vector<std::string> failures)
    : ConfigError([&] {
          std::string msg = "model validation failed:";
          for (const auto& f : failures) {
              msg += "\n  - " + f;
          }
          return msg;
      }()),
      failures_(std::move(failures))
{
}

double Geometry::n_sites() const
{
    return kind == GeometryKind::explicit_positions ? static_cast<double>(positions.size()) : count;
}

std::size_t Geometry::size() const
{
    if (!materializable()) {
        throw UsageError("geometry with " + std::to_string(n_sites()) + " sites cannot be enumerated");
    }
    return static_cast<std::size_t>(n_sites());
}

Vec3 Geometry::position(std::size_t i) const
{
    if (static_cast<double>(i) >= n_sites()) {
        throw UsageError("site index " + std::to_string(i) + " out of range");
    }
    if (kind == GeometryKind::explicit_positions) {
        return positions[i];
    }
    return static_cast<double>(i) * spacing * axis.normalized();
}

Vec3 GatingSnapshot::gradient(int level, std::size_t i) const
{
    const auto& g = level == 0 ? zeeman_gradient0 : zeeman_gradient1;
    return i < g.size() ? g[i] : Vec3::Zero();
}

namespace {

std::string num(double v)
{
    std::ostringstream o;
    o.precision(6);
    o << v;
    return o.str();
}

} // namespace

ValidatedModel validate_model(Model m)
{
    std::vector<std::string> bad;
    std::vector<std::string> warn;
    auto require = [&](bool ok, std::string what) {
        if (!ok) {
            bad.push_back(std::move(what));
        }
    };

    const auto& q = m.qubits;
    require(q.omega0 > 0.0, "qubits.omega0 must be > 0 (got " + num(q.omega0) + ")");
    require(q.gamma_se >= 0.0, "qubits.gamma_se must be >= 0 (got " + num(q.gamma_se) + ")");
    require(q.mass >= 0.0, "qubits.mass must be >= 0 (got " + num(q.mass) + ")");
    require(q.dipole.allFinite(), "qubits.dipole must be finite");

    const auto& g = m.geometry;
    const double n = g.n_sites();
    require(n >= 1.0, "geometry must hold at least one site");
    if (g.kind == GeometryKind::chain) {
        require(std::floor(g.count) == g.count, "geometry.count must be an integer");
        require(n <= 1.0 || g.spacing > 0.0, "geometry.spacing must be > 0 (got " + num(g.spacing) + ")");
        require(g.axis.norm() > 0.0, "geometry.axis must be nonzero");
    } else {
        for (std::size_t i = 0; i < g.positions.size(); ++i) {
            for (std::size_t j = i + 1; j < g.positions.size(); ++j) {
                if ((g.positions[i] - g.positions[j]).norm() == 0.0) {
                    bad.push_back("positions of sites " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
                }
            }
        }
    }

    const auto& c = m.cavity;
    if (c.enabled) {
        require(c.omega_b > 0.0, "cavity.omega_b must be > 0 (got " + num(c.omega_b) + ")");
        require(c.mode_volume > 0.0, "cavity.mode_volume must be > 0 (got " + num(c.mode_volume) + ")");
        require(std::abs(c.polarization.norm() - 1.0) <= 1e-10, "cavity.polarization must be a unit vector");
        if (c.wavevector.norm() > 0.0) {
            const double dot = std::abs(c.polarization.dot(c.wavevector.normalized()));
            require(dot <= 1e-10, "cavity.polarization is not transverse to cavity.wavevector (|e.k^| = " + num(dot) + ")");
        }
    }

    const auto& s = m.se_bath;
    require(s.cutoff > 0.0, "bath.se.cutoff must be > 0 (got " + num(s.cutoff) + ")");
    require(s.temperature >= 0.0, "bath.se.temperature must be >= 0 (got " + num(s.temperature) + ")");
    require(s.bandwidth_dk >= 0.0, "bath.se.bandwidth must be >= 0");
    require(s.mean_k >= 0.0, "bath.se.mean_k must be >= 0");
    require(s.recoil_wavenumber >= 0.0, "bath.se.recoil_wavenumber must be >= 0");

    const auto& cd = m.cavity_decay;
    for (const auto& [name, p] : {std::pair{"u", cd.u}, std::pair{"w", cd.w}}) {
        const std::string key = std::string("bath.cavity_decay.") + name;
        require(p.amplitude >= 0.0, key + "_amplitude must be >= 0");
        if (p.kind == ProfileKind::power) {
            require(p.exponent > -1.0, key + "_exponent must be > -1 (profile not integrable)");
        }
        if (!p.is_zero()) {
            require(cd.cutoff > 0.0, "bath.cavity_decay.cutoff must be > 0 when " + std::string(name) + " is nonzero");
            require(cd.mode_density > 0.0, "bath.cavity_decay.mode_density must be > 0 when " + std::string(name) + " is nonzero");
        }
    }

    const auto& gt = m.gating;
    auto check_len = [&](std::size_t len, const char* key) {
        if (len != 0 && static_cast<double>(len) != n) {
            bad.push_back(std::string("gating.") + key + " length " + std::to_string(len) + " does not match site count");
        }
    };
    check_len(gt.omega_rabi.size(), "omega_rabi");
    check_len(gt.delta_shift.size(), "delta_shift");
    check_len(gt.zeeman_gradient0.size(), "zeeman_gradient0");
    check_len(gt.zeeman_gradient1.size(), "zeeman_gradient1");

    const auto& v = m.vibrations;
    if (v.enabled) {
        require(q.mass > 0.0, "qubits.mass must be > 0 when vibrations are enabled");
        if (v.topology == Topology::custom) {
            require(v.custom.rows() == v.custom.cols() && static_cast<double>(v.custom.rows()) == 3.0 * n,
                    "vibrations custom matrix must be 3N x 3N");
            if (v.custom.rows() == v.custom.cols() && v.custom.size() > 0) {
                const double scale = v.custom.cwiseAbs().maxCoeff();
                require((v.custom - v.custom.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
                        "vibrations custom matrix is not symmetric");
            }
        } else {
            require(v.spring_constant > 0.0, "vibrations.spring_constant must be > 0 (got " + num(v.spring_constant) + ")");
            if (v.topology == Topology::chain1d) {
                require(v.spring_constant > 2.0 * std::abs(v.chain_coupling),
                        "chain is unstable: spring_constant must exceed 2|chain_coupling|");
            }
        }
    }

    if (!bad.empty()) {
        throw ValidationError(std::move(bad));
    }

    if (q.gamma_se > 0.0 && q.dipole.norm() > 0.0) {
        const double g0 = free_space_gamma(m);
        if (std::abs(g0 - q.gamma_se) > 0.05 * q.gamma_se) {
            warn.push_back("gamma_se = " + num(q.gamma_se) + " differs from the free-space rate " + num(g0) +
                           " implied by |d10| by more than 5%");
        }
    }
    return ValidatedModel(std::move(m), std::move(warn));
}

double free_space_gamma(const Model& m)
{
    const auto& k = m.constants;
    const double w0 = m.qubits.omega0;
    return w0 * w0 * w0 * m.qubits.dipole.squaredNorm() / (3.0 * std::numbers::pi * k.eps0 * k.hbar * k.c * k.c * k.c);
}

double dipole_sq_from_gamma(const Model& m)
{
    const auto& k = m.constants;
    const double w0 = m.qubits.omega0;
    return 3.0 * std::numbers::pi * k.eps0 * k.hbar * k.c * k.c * k.c * m.qubits.gamma_se / (w0 * w0 * w0);
}

Vec3 dipole_direction(const Model& m)
{
    const double d = m.qubits.dipole.norm();
    return d > 0.0 ? Vec3(m.qubits.dipole / d) : Vec3::UnitZ();
}

double cavity_coupling(const Model& m)
{
    if (!m.cavity.enabled) {
        return 0.0;
    }
    const auto& k = m.constants;
    return std::sqrt(m.cavity.omega_b / (2.0 * k.eps0 * k.hbar * m.cavity.mode_volume)) *
           m.qubits.dipole.dot(m.cavity.polarization);
}

double recoil_wavenumber(const Model& m)
{
    return m.se_bath.recoil_wavenumber > 0.0 ? m.se_bath.recoil_wavenumber : m.qubits.omega0 / m.constants.c;
}

DerivedParams derived_quantities(const ValidatedModel& vm, const NormalModes* modes)
{
    const Model& m = vm.model();
    const auto& k = m.constants;
    DerivedParams d;
    d.g_b = std::abs(cavity_coupling(m));
    const double wc = m.se_bath.cutoff;
    const double ratio = wc / m.qubits.omega0;
    d.se_sum_prefactor = m.qubits.gamma_se * wc * ratio * ratio * ratio;

    if (m.vibrations.enabled) {
        if (modes == nullptr || modes->n_modes() == 0) {
            throw UsageError("derived_quantities: the Lamb-Dicke parameter requires solved normal modes");
        }
        d.mean_frequency = mean_frequency(*modes, m.vibrations.mean_strategy);
        if (!(d.mean_frequency > 0.0)) {
            throw UsageError("derived_quantities: mean vibrational frequency is zero");
        }
        const double kb = m.cavity.enabled ? m.cavity.wavevector.norm() : 0.0;
        d.eta = kb * std::sqrt(k.hbar / (2.0 * modes->mass * d.mean_frequency));
        for (std::size_t i = 0; i < modes->n_sites(); ++i) {
            double s2 = 0.0;
            for (double c : lamb_dicke_coefficients(*modes, m.cavity.enabled ? m.cavity.wavevector : Vec3::Zero(), i)) {
                s2 += c * c;
            }
            d.eta_site.push_back(std::sqrt(s2));
        }
        if (d.eta > 0.3) {
            d.warnings.push_back("Lamb-Dicke parameter " + num(d.eta) + " exceeds 0.3; the Lamb-Dicke expansion is not reliable");
        }
    }
    return d;
}

} // namespace decotime
