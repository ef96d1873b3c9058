#include "decotime/vibrations.hpp"

#include "decotime/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace decotime {

Eigen::Matrix<double, 3, Eigen::Dynamic> NormalModes::site_block(std::size_t site) const
{
    if (site >= n_sites()) {
        throw UsageError("site_block: site " + std::to_string(site) + " out of range");
    }
    return transform.middleRows(static_cast<Eigen::Index>(3 * site), 3);
}

CouplingMatrix build_coupling_matrix(std::size_t n_sites, const VibrationParams& vib, double mass)
{
    if (n_sites == 0) {
        throw UsageError("build_coupling_matrix: no sites");
    }
    if (!(mass > 0.0)) {
        throw ConfigError("vibrations require a positive qubit mass");
    }
    const auto dim = static_cast<Eigen::Index>(3 * n_sites);
    CouplingMatrix cm;
    cm.mass = mass;
    switch (vib.topology) {
    case Topology::independent:
    case Topology::chain1d: {
        if (!(vib.spring_constant > 0.0)) {
            throw ConfigError("vibrations.spring_constant must be > 0");
        }
        cm.V = vib.spring_constant * Eigen::MatrixXd::Identity(dim, dim);
        if (vib.topology == Topology::chain1d) {
            if (!(vib.spring_constant > 2.0 * std::abs(vib.chain_coupling))) {
                throw ConfigError("chain is unstable: spring_constant must exceed 2|chain_coupling|");
            }
            // nearest neighbours couple along x only
            for (std::size_t i = 0; i + 1 < n_sites; ++i) {
                const auto a = static_cast<Eigen::Index>(3 * i);
                cm.V(a, a + 3) = vib.chain_coupling;
                cm.V(a + 3, a) = vib.chain_coupling;
            }
        }
        break;
    }
    case Topology::custom: {
        Eigen::MatrixXd v = vib.custom;
        if (v.size() == 0) {
            if (vib.matrix_file.empty()) {
                throw ConfigError("custom vibrations need a matrix or matrix_file");
            }
            v = read_coupling_matrix_file(vib.matrix_file);
        }
        if (v.rows() != dim || v.cols() != dim) {
            throw ConfigError("custom coupling matrix is " + std::to_string(v.rows()) + "x" + std::to_string(v.cols()) +
                              ", expected " + std::to_string(dim) + "x" + std::to_string(dim));
        }
        const double scale = v.cwiseAbs().maxCoeff();
        if ((v - v.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
            throw ConfigError("custom coupling matrix is not symmetric");
        }
        cm.V = 0.5 * (v + v.transpose());
        break;
    }
    }
    return cm;
}

CouplingMatrix build_coupling_matrix(const ValidatedModel& model)
{
    const Model& m = model.model();
    return build_coupling_matrix(m.geometry.size(), m.vibrations, m.qubits.mass);
}

namespace {

void fix_signs(Eigen::MatrixXd& s)
{
    for (Eigen::Index k = 0; k < s.cols(); ++k) {
        for (Eigen::Index r = 0; r < s.rows(); ++r) {
            if (std::abs(s(r, k)) > 1e-12) {
                if (s(r, k) < 0.0) {
                    s.col(k) *= -1.0;
                }
                break;
            }
        }
    }
}

Eigen::VectorXd zero_point_lengths(const Eigen::VectorXd& nu, double mass)
{
    return (kConstants.hbar / (2.0 * mass) * nu.cwiseInverse()).cwiseSqrt();
}

} // namespace

NormalModes solve_normal_modes(const CouplingMatrix& cm)
{
    if (cm.V.rows() == 0 || cm.V.rows() != cm.V.cols() || cm.V.rows() % 3 != 0) {
        throw UsageError("solve_normal_modes: coupling matrix must be 3N x 3N");
    }
    const double norm = cm.V.norm();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cm.V);
    if (es.info() != Eigen::Success) {
        throw NumericError("solve_normal_modes: eigendecomposition failed");
    }
    const Eigen::VectorXd& lambda = es.eigenvalues();
    if (!(lambda(0) > 0.0)) {
        std::ostringstream o;
        o.precision(6);
        o << "vibrational instability: smallest eigenvalue of V is " << lambda(0) << " J/m^2";
        throw NumericError(o.str());
    }

    NormalModes nm;
    nm.mass = cm.mass;
    nm.frequencies = (lambda / cm.mass).cwiseSqrt();
    nm.transform = es.eigenvectors();
    fix_signs(nm.transform);
    nm.zero_point = zero_point_lengths(nm.frequencies, cm.mass);

    const auto n = nm.transform.cols();
    const double ortho = (nm.transform.transpose() * nm.transform - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
    if (ortho > 1e-10) {
        throw NumericError("solve_normal_modes: orthogonality residual " + std::to_string(ortho));
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        const double res = (cm.V * nm.transform.col(k) - lambda(k) * nm.transform.col(k)).norm();
        if (res > 1e-10 * norm) {
            throw NumericError("solve_normal_modes: eigen-residual too large for mode " + std::to_string(k));
        }
    }
    return nm;
}

NormalModes independent_modes(std::size_t n_sites, double spring_constant, double mass)
{
    if (n_sites == 0 || !(spring_constant > 0.0) || !(mass > 0.0)) {
        throw UsageError("independent_modes: need sites, spring_constant > 0 and mass > 0");
    }
    const auto dim = static_cast<Eigen::Index>(3 * n_sites);
    NormalModes nm;
    nm.mass = mass;
    nm.frequencies = Eigen::VectorXd::Constant(dim, std::sqrt(spring_constant / mass));
    nm.transform = Eigen::MatrixXd::Identity(dim, dim);
    nm.zero_point = zero_point_lengths(nm.frequencies, mass);
    return nm;
}

NormalModes solve_normal_modes(const ValidatedModel& model)
{
    const Model& m = model.model();
    if (!m.vibrations.enabled) {
        throw UsageError("solve_normal_modes: vibrations are disabled");
    }
    if (m.vibrations.topology == Topology::independent) {
        return independent_modes(m.geometry.size(), m.vibrations.spring_constant, m.qubits.mass);
    }
    return solve_normal_modes(build_coupling_matrix(model));
}

std::vector<double> lamb_dicke_coefficients(const NormalModes& nm, const Vec3& k, std::size_t site)
{
    const auto block = nm.site_block(site);
    const Eigen::VectorXd proj = block.transpose() * k;
    std::vector<double> c(static_cast<std::size_t>(proj.size()));
    for (Eigen::Index K = 0; K < proj.size(); ++K) {
        c[static_cast<std::size_t>(K)] = nm.zero_point(K) * proj(K);
    }
    return c;
}

double mean_frequency(const NormalModes& nm, MeanStrategy strategy)
{
    if (nm.n_modes() == 0) {
        return 0.0;
    }
    if (strategy == MeanStrategy::mean_inverse) {
        return 1.0 / nm.frequencies.cwiseInverse().mean();
    }
    return nm.frequencies.mean();
}

double mean_frequency(const ValidatedModel& model)
{
    const Model& m = model.model();
    if (!m.vibrations.enabled) {
        return 0.0;
    }
    if (m.vibrations.topology == Topology::independent) {
        return std::sqrt(m.vibrations.spring_constant / m.qubits.mass);
    }
    return mean_frequency(solve_normal_modes(model), m.vibrations.mean_strategy);
}

nlohmann::json modes_to_json(const NormalModes& nm)
{
    nlohmann::json j;
    j["mass"] = nm.mass;
    j["frequencies"] = std::vector<double>(nm.frequencies.data(), nm.frequencies.data() + nm.frequencies.size());
    j["zero_point"] = std::vector<double>(nm.zero_point.data(), nm.zero_point.data() + nm.zero_point.size());
    auto& s = j["transform"] = nlohmann::json::array();
    for (Eigen::Index r = 0; r < nm.transform.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(nm.transform.cols()));
        for (Eigen::Index c = 0; c < nm.transform.cols(); ++c) {
            row[static_cast<std::size_t>(c)] = nm.transform(r, c);
        }
        s.push_back(std::move(row));
    }
    return j;
}

} // namespace decotime
