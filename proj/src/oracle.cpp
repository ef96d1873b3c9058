#include "decotime/oracle.hpp"

#include "decotime/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <numeric>
#include <sstream>

namespace decotime {

namespace {

using Mat = Eigen::MatrixXcd;

Mat annihilation(int d)
{
    Mat a = Mat::Zero(d, d);
    for (int n = 1; n < d; ++n) {
        a(n - 1, n) = std::sqrt(static_cast<double>(n));
    }
    return a;
}

Mat number(int d)
{
    Mat m = Mat::Zero(d, d);
    for (int n = 0; n < d; ++n) {
        m(n, n) = n;
    }
    return m;
}

Mat sigma_x()
{
    Mat m = Mat::Zero(2, 2);
    m(0, 1) = m(1, 0) = 1.0;
    return m;
}

Mat sigma_z()
{
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = -1.0;
    m(1, 1) = 1.0;
    return m;
}

// Tensor-product layout: qubits (qubit 0 least significant within the qubit block),
// cavity, SE modes, decay modes, vibrational modes.
struct Layout {
    std::vector<int> dims;
    std::size_t n_qubits = 0;
    int cavity = -1;
    int se0 = 0, decay0 = 0, vib0 = 0;
    std::size_t total = 1;
    std::size_t system_dim = 1;

    explicit Layout(const OracleSpec& s)
    {
        n_qubits = s.n_qubits;
        // qubit factors in decreasing order so that bit i of the qubit index is qubit i
        for (std::size_t i = 0; i < s.n_qubits; ++i) {
            dims.push_back(2);
        }
        if (s.include_cavity) {
            cavity = static_cast<int>(dims.size());
            dims.push_back(s.cavity_truncation);
        }
        se0 = static_cast<int>(dims.size());
        for (const auto& m : s.se) {
            dims.push_back(m.truncation);
        }
        decay0 = static_cast<int>(dims.size());
        for (const auto& m : s.decay) {
            dims.push_back(m.truncation);
        }
        vib0 = static_cast<int>(dims.size());
        for (const auto& m : s.vib) {
            dims.push_back(m.truncation);
        }
        for (std::size_t f = 0; f < dims.size(); ++f) {
            total *= static_cast<std::size_t>(dims[f]);
            if (static_cast<int>(f) < se0) {
                system_dim *= static_cast<std::size_t>(dims[f]);
            }
        }
    }

    // factor index of qubit i: qubit n-1 is the leading factor
    int qubit(std::size_t i) const { return static_cast<int>(n_qubits - 1 - i); }
};

// Kronecker product of per-factor operators, identity where none is given.
Mat embed(const Layout& L, const std::vector<std::pair<int, Mat>>& ops)
{
    Mat out = Mat::Identity(1, 1);
    for (std::size_t f = 0; f < L.dims.size(); ++f) {
        const Mat* op = nullptr;
        for (const auto& [idx, m] : ops) {
            if (idx == static_cast<int>(f)) {
                op = &m;
            }
        }
        const int d = L.dims[f];
        Mat next(out.rows() * d, out.cols() * d);
        for (Eigen::Index r = 0; r < out.rows(); ++r) {
            for (Eigen::Index c = 0; c < out.cols(); ++c) {
                if (op) {
                    next.block(r * d, c * d, d, d) = out(r, c) * *op;
                } else {
                    next.block(r * d, c * d, d, d) = out(r, c) * Mat::Identity(d, d);
                }
            }
        }
        out = std::move(next);
    }
    return out;
}

std::vector<double> thermal_levels(const OracleMode& m)
{
    std::vector<double> p(static_cast<std::size_t>(m.truncation));
    const double r = m.occupation > 0.0 ? m.occupation / (m.occupation + 1.0) : 0.0;
    double acc = 0.0;
    for (std::size_t n = 0; n < p.size(); ++n) {
        p[n] = std::pow(r, static_cast<double>(n));
        acc += p[n];
    }
    for (auto& v : p) {
        v /= acc;
    }
    return p;
}

double spectral_norm(const Mat& v)
{
    if (v.rows() == 0) {
        return 0.0;
    }
    Eigen::VectorXcd x = Eigen::VectorXcd::Ones(v.rows()).normalized();
    double lambda = 0.0;
    for (int it = 0; it < 200; ++it) {
        Eigen::VectorXcd y = v * (v * x);
        const double n = y.norm();
        if (n == 0.0) {
            return 0.0;
        }
        const double next = std::sqrt(n);
        x = y / n;
        if (std::abs(next - lambda) <= 1e-12 * next) {
            return next;
        }
        lambda = next;
    }
    return lambda;
}

} // namespace

void check_spec(const OracleSpec& s)
{
    std::vector<std::string> f;
    if (s.n_qubits < 1 || s.n_qubits > 4) {
        f.push_back("n_qubits must be 1..4");
    }
    if (s.se.size() > 3) {
        f.push_back("at most 3 SE modes");
    }
    if (s.vib.size() > 2) {
        f.push_back("at most 2 vibrational modes");
    }
    auto mode = [&](const OracleMode& m, const std::string& what, int cap) {
        if (m.truncation < 2 || (cap > 0 && m.truncation > cap)) {
            f.push_back(what + " truncation must be in [2, " + (cap > 0 ? std::to_string(cap) : "inf") + "]");
        }
        if (!(m.occupation >= 0.0)) {
            f.push_back(what + " occupation must be >= 0");
        }
    };
    for (const auto& m : s.se) {
        mode(m, "SE mode", 6);
        if (m.g.size() != s.n_qubits) {
            f.push_back("SE mode needs one coupling per qubit");
        }
    }
    for (const auto& m : s.decay) {
        mode(m, "decay mode", 0);
    }
    for (const auto& m : s.vib) {
        mode(m, "vibrational mode", 0);
        for (const auto* v : {&m.classical, &m.magnetic}) {
            if (!v->empty() && v->size() != s.n_qubits) {
                f.push_back("vibrational couplings need one value per qubit");
            }
        }
        if (!m.cavity.empty() && m.cavity.size() != s.n_qubits) {
            f.push_back("vibrational cavity couplings need one value per qubit");
        }
        if (!m.cavity.empty() && !s.include_cavity) {
            f.push_back("Lamb-Dicke cavity couplings need the cavity");
        }
    }
    if (!s.decay.empty() && !s.include_cavity) {
        f.push_back("cavity-decay modes need the cavity");
    }
    if (s.include_cavity && (s.cavity_truncation < 2 || s.cavity_fock < 0 || s.cavity_fock >= s.cavity_truncation)) {
        f.push_back("cavity truncation must be >= 2 and exceed the Fock number");
    }
    if (!s.ld_se.empty()) {
        if (s.ld_se.size() != s.n_qubits) {
            f.push_back("ld_se needs one block per qubit");
        }
        for (const auto& blk : s.ld_se) {
            if (blk.size() != s.se.size()) {
                f.push_back("ld_se blocks need one row per SE mode");
                break;
            }
            for (const auto& row : blk) {
                if (row.size() != s.vib.size()) {
                    f.push_back("ld_se rows need one value per vibrational mode");
                    break;
                }
            }
        }
    }
    if (f.empty()) {
        const Layout L(s);
        if (L.total > kOracleMaxDimension) {
            f.push_back("Hilbert dimension " + std::to_string(L.total) + " exceeds " +
                        std::to_string(kOracleMaxDimension));
        }
    }
    if (!f.empty()) {
        throw ValidationError(f);
    }
}

SmallSystem build_small_system(const OracleSpec& s)
{
    check_spec(s);
    const Layout L(s);
    const auto D = static_cast<Eigen::Index>(L.total);
    Mat h0 = Mat::Zero(D, D);
    Mat v = Mat::Zero(D, D);

    for (std::size_t i = 0; i < s.n_qubits; ++i) {
        h0 += 0.5 * s.qubit_omega * embed(L, {{L.qubit(i), sigma_z()}});
    }
    if (L.cavity >= 0) {
        h0 += s.cavity_omega * embed(L, {{L.cavity, number(s.cavity_truncation)}});
    }
    auto boson_energy = [&](int factor, const OracleMode& m) {
        h0 += m.omega * embed(L, {{factor, number(m.truncation)}});
    };
    for (std::size_t k = 0; k < s.se.size(); ++k) {
        boson_energy(L.se0 + static_cast<int>(k), s.se[k]);
    }
    for (std::size_t k = 0; k < s.decay.size(); ++k) {
        boson_energy(L.decay0 + static_cast<int>(k), s.decay[k]);
    }
    for (std::size_t k = 0; k < s.vib.size(); ++k) {
        boson_energy(L.vib0 + static_cast<int>(k), s.vib[k]);
    }

    const Mat sx = sigma_x();
    const Mat sz = sigma_z();
    for (std::size_t k = 0; k < s.se.size(); ++k) {
        const Mat a = annihilation(s.se[k].truncation);
        for (std::size_t i = 0; i < s.n_qubits; ++i) {
            const cplx g = s.se[k].g[i];
            const Mat field = g * a + std::conj(g) * Mat(a.adjoint());
            v += embed(L, {{L.qubit(i), sx}, {L.se0 + static_cast<int>(k), field}});
        }
    }
    if (L.cavity >= 0) {
        const Mat b = annihilation(s.cavity_truncation);
        for (std::size_t k = 0; k < s.decay.size(); ++k) {
            const Mat d = annihilation(s.decay[k].truncation);
            const Mat bath = s.decay[k].u * d + s.decay[k].w * Mat(d.adjoint());
            const Mat term = embed(L, {{L.cavity, Mat(b.adjoint())}, {L.decay0 + static_cast<int>(k), bath}});
            v += term + Mat(term.adjoint());
        }
    }
    for (std::size_t K = 0; K < s.vib.size(); ++K) {
        const auto& m = s.vib[K];
        const Mat A = annihilation(m.truncation);
        const Mat q = A + Mat(A.adjoint());
        const int f = L.vib0 + static_cast<int>(K);
        for (std::size_t i = 0; i < s.n_qubits; ++i) {
            if (!m.classical.empty() && m.classical[i] != 0.0) {
                v += m.classical[i] * embed(L, {{L.qubit(i), sx}, {f, q}});
            }
            if (!m.magnetic.empty() && m.magnetic[i] != 0.0) {
                v += m.magnetic[i] * embed(L, {{L.qubit(i), sz}, {f, q}});
            }
            if (!m.cavity.empty() && m.cavity[i] != cplx{}) {
                const Mat b = annihilation(s.cavity_truncation);
                const Mat cav = m.cavity[i] * b + std::conj(m.cavity[i]) * Mat(b.adjoint());
                v += embed(L, {{L.qubit(i), sx}, {L.cavity, cav}, {f, q}});
            }
        }
    }
    if (!s.ld_se.empty()) {
        for (std::size_t i = 0; i < s.n_qubits; ++i) {
            for (std::size_t k = 0; k < s.se.size(); ++k) {
                const Mat a = annihilation(s.se[k].truncation);
                for (std::size_t K = 0; K < s.vib.size(); ++K) {
                    const cplx n = s.ld_se[i][k][K];
                    if (n == cplx{}) {
                        continue;
                    }
                    const Mat A = annihilation(s.vib[K].truncation);
                    v += embed(L, {{L.qubit(i), sx},
                                   {L.se0 + static_cast<int>(k), Mat(n * a + std::conj(n) * Mat(a.adjoint()))},
                                   {L.vib0 + static_cast<int>(K), Mat(A + Mat(A.adjoint()))}});
                }
            }
        }
    }

    SmallSystem sys;
    sys.system_dim = L.system_dim;
    sys.env_dim = L.total / L.system_dim;
    sys.hamiltonian = h0 + v;
    const double hn = sys.hamiltonian.norm();
    sys.hermiticity_residual = hn > 0.0 ? (sys.hamiltonian - sys.hamiltonian.adjoint()).norm() / hn : 0.0;
    if (sys.hermiticity_residual > 1e-14) {
        throw NumericError("build_small_system: Hamiltonian is not Hermitian (residual " +
                           format_number(sys.hermiticity_residual) + ")");
    }
    sys.coupling_norm = spectral_norm(v);

    // H_S is diagonal in the product basis; read it off the system block of h0
    sys.system_energies = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(L.system_dim));
    for (std::size_t sidx = 0; sidx < L.system_dim; ++sidx) {
        double e = 0.0;
        const std::size_t qidx = L.cavity >= 0 ? sidx / static_cast<std::size_t>(s.cavity_truncation) : sidx;
        for (std::size_t i = 0; i < s.n_qubits; ++i) {
            e += 0.5 * s.qubit_omega * (((qidx >> i) & 1U) ? 1.0 : -1.0);
        }
        if (L.cavity >= 0) {
            e += s.cavity_omega * static_cast<double>(sidx % static_cast<std::size_t>(s.cavity_truncation));
        }
        sys.system_energies(static_cast<Eigen::Index>(sidx)) = e;
    }

    // initial qubit amplitudes, then the cavity Fock state
    const QubitRegisterState q = materialize(build_state(s.state, static_cast<double>(s.n_qubits)));
    sys.psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(L.system_dim));
    const std::size_t cav_dim = L.cavity >= 0 ? static_cast<std::size_t>(s.cavity_truncation) : 1;
    const std::size_t cav_n = L.cavity >= 0 ? static_cast<std::size_t>(s.cavity_fock) : 0;
    for (const auto& [idx, amp] : q.amplitudes()) {
        sys.psi(static_cast<Eigen::Index>(idx * cav_dim + cav_n)) = amp;
    }

    // rho_E: product of truncated thermal distributions, keeping the heaviest
    // basis states up to a cumulative weight of 1 - 1e-6
    std::vector<std::vector<double>> levels;
    for (const auto& m : s.se) {
        levels.push_back(thermal_levels(m));
    }
    for (const auto& m : s.decay) {
        levels.push_back(thermal_levels(m));
    }
    for (const auto& m : s.vib) {
        levels.push_back(thermal_levels(m));
    }
    std::vector<std::pair<double, std::size_t>> w(sys.env_dim);
    for (std::size_t e = 0; e < sys.env_dim; ++e) {
        double p = 1.0;
        std::size_t rem = e;
        for (std::size_t f = levels.size(); f-- > 0;) {
            const std::size_t d = levels[f].size();
            p *= levels[f][rem % d];
            rem /= d;
        }
        w[e] = {p, e};
    }
    std::stable_sort(w.begin(), w.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    double cum = 0.0;
    for (const auto& [p, e] : w) {
        if (p <= 0.0 || cum >= 1.0 - 1e-6) {
            break;
        }
        sys.env_states.push_back(e);
        sys.env_weights.push_back(p);
        cum += p;
    }
    for (auto& p : sys.env_weights) {
        p /= cum;
    }
    return sys;
}

namespace {

struct Propagator {
    Eigen::VectorXd energies;
    Mat vectors;
    std::vector<Eigen::VectorXcd> initial; // eigenbasis coefficients of psi (x) e

    explicit Propagator(const SmallSystem& sys)
    {
        Eigen::SelfAdjointEigenSolver<Mat> es(sys.hamiltonian);
        if (es.info() != Eigen::Success) {
            throw NumericError("oracle: Hermitian eigendecomposition failed");
        }
        energies = es.eigenvalues();
        vectors = es.eigenvectors();
        const auto D = sys.hamiltonian.rows();
        for (std::size_t e : sys.env_states) {
            Eigen::VectorXcd v = Eigen::VectorXcd::Zero(D);
            for (std::size_t s = 0; s < sys.system_dim; ++s) {
                v(static_cast<Eigen::Index>(s * sys.env_dim + e)) = sys.psi(static_cast<Eigen::Index>(s));
            }
            initial.push_back(vectors.adjoint() * v);
        }
    }

    Eigen::VectorXcd evolve(std::size_t e, double t) const
    {
        Eigen::VectorXcd c = initial[e];
        for (Eigen::Index k = 0; k < c.size(); ++k) {
            c(k) *= std::polar(1.0, -energies(k) * t);
        }
        return vectors * c;
    }
};

struct Point {
    double one_minus_f = 0.0;
    double trace = 0.0;
    double purity = 0.0;
    double min_eig = 0.0;
};

Point evaluate(const SmallSystem& sys, const Propagator& prop, double t, bool unitarity)
{
    Eigen::VectorXcd psi0(sys.psi.size());
    for (Eigen::Index s = 0; s < psi0.size(); ++s) {
        psi0(s) = sys.psi(s) * std::polar(1.0, -sys.system_energies(s) * t);
    }
    const auto S = static_cast<Eigen::Index>(sys.system_dim);
    const auto E = static_cast<Eigen::Index>(sys.env_dim);
    Point p;
    std::vector<Eigen::VectorXcd> phis;
    for (std::size_t k = 0; k < sys.env_states.size(); ++k) {
        Eigen::VectorXcd phi = prop.evolve(k, t);
        // phi as an S x E matrix (row-major in the system index)
        const Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(phi.data(), S,
                                                                                                          E);
        const Eigen::RowVectorXcd overlap = psi0.adjoint() * m;
        const Mat rest = m - psi0 * overlap;
        p.one_minus_f += sys.env_weights[k] * rest.squaredNorm();
        if (unitarity) {
            p.trace += sys.env_weights[k] * phi.squaredNorm();
            phis.push_back(std::move(phi));
        }
    }
    if (unitarity) {
        // W(t) = sum_e p_e |phi_e><phi_e|; its spectrum is that of sqrt(p) G sqrt(p)
        const auto n = static_cast<Eigen::Index>(phis.size());
        Mat g(n, n);
        for (Eigen::Index a = 0; a < n; ++a) {
            for (Eigen::Index b = 0; b < n; ++b) {
                g(a, b) = std::sqrt(sys.env_weights[a] * sys.env_weights[b]) * phis[a].dot(phis[b]);
            }
        }
        p.purity = g.squaredNorm();
        Eigen::SelfAdjointEigenSolver<Mat> es(g, Eigen::EigenvaluesOnly);
        p.min_eig = es.eigenvalues().minCoeff();
    }
    return p;
}

} // namespace

FidelityCurve evolve_fidelity(const SmallSystem& sys, const std::vector<double>& times, const EvolveOptions& opt)
{
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (!(times[k] >= 0.0) || (k > 0 && !(times[k] > times[k - 1]))) {
            throw UsageError("evolve_fidelity: times must be non-negative and increasing");
        }
    }
    if (!opt.allow_long_time && !times.empty() && times.back() * sys.coupling_norm > 1.0) {
        throw UsageError("evolve_fidelity: max(t) ||V_I|| = " + format_number(times.back() * sys.coupling_norm) +
                         " leaves the short-time regime");
    }
    const Propagator prop(sys);
    double purity0 = 0.0;
    for (double p : sys.env_weights) {
        purity0 += p * p;
    }
    FidelityCurve c;
    c.times = times;
    for (double t : times) {
        const Point p = evaluate(sys, prop, t, opt.check_unitarity);
        c.one_minus_f.push_back(p.one_minus_f);
        c.fidelity.push_back(1.0 - p.one_minus_f);
        if (opt.check_unitarity) {
            c.max_trace_error = std::max(c.max_trace_error, std::abs(p.trace - 1.0));
            c.max_purity_drift = std::max(c.max_purity_drift, std::abs(p.purity - purity0));
            c.min_eigenvalue = std::min(c.min_eigenvalue, p.min_eig);
        }
    }
    return c;
}

std::vector<double> auto_time_grid(const SmallSystem& sys, const FitWindow& w, std::size_t points)
{
    if (sys.coupling_norm == 0.0) {
        return {};
    }
    const Propagator prop(sys);
    // 1 - F <= ||V||^2 t^2, so t0 lands inside the window or below it
    double t = std::sqrt(w.hi) / sys.coupling_norm;
    double y = evaluate(sys, prop, t, false).one_minus_f;
    for (int it = 0; it < 40 && y < 1e-3 * w.hi; ++it) {
        t *= 4.0;
        y = evaluate(sys, prop, t, false).one_minus_f;
    }
    if (!(y >= 1e-3 * w.hi)) {
        throw NumericError("auto_time_grid: 1 - F stays below " + format_number(1e-3 * w.hi) +
                           "; the coupling is too weak for the fit window, regrid by hand or lower the window");
    }
    // refine with the local quadratic law
    for (int it = 0; it < 3; ++it) {
        t *= std::sqrt(0.8 * w.hi / y);
        y = evaluate(sys, prop, t, false).one_minus_f;
    }
    const double t_hi = t;
    const double t_lo = t_hi * std::sqrt(2.0 * w.lo / (0.8 * w.hi));
    std::vector<double> grid(points);
    for (std::size_t k = 0; k < points; ++k) {
        const double f = static_cast<double>(k) / static_cast<double>(points - 1);
        grid[k] = t_lo * std::pow(t_hi / t_lo, f);
    }
    return grid;
}

Tau2Fit fit_tau2(const std::vector<double>& times, const std::vector<double>& y, const FitWindow& w)
{
    if (times.size() != y.size()) {
        throw UsageError("fit_tau2: times and values differ in length");
    }
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (y[k] >= w.lo && y[k] <= w.hi) {
            idx.push_back(k);
        }
    }
    if (idx.size() < 5) {
        throw NumericError("fit_tau2: only " + std::to_string(idx.size()) +
                           " points inside the fit window; regrid so that 1 - F spans [" + format_number(w.lo) +
                           ", " + format_number(w.hi) + "]");
    }
    double t_max = 0.0;
    for (std::size_t k : idx) {
        t_max = std::max(t_max, times[k]);
    }
    const auto n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd a(n, 4);
    Eigen::VectorXd b(n);
    Eigen::VectorXd wgt(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double s = times[idx[static_cast<std::size_t>(r)]] / t_max;
        const double v = y[idx[static_cast<std::size_t>(r)]];
        // relative least squares: the window spans five decades
        wgt(r) = 1.0 / v;
        a(r, 0) = s * wgt(r);
        a(r, 1) = s * s * wgt(r);
        a(r, 2) = s * s * s * wgt(r);
        a(r, 3) = s * s * s * s * wgt(r);
        b(r) = 1.0;
    }
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
    Tau2Fit f;
    f.points = idx.size();
    f.c1 = c(0) / t_max;
    f.c2 = c(1) / (t_max * t_max);
    f.c3 = c(2) / (t_max * t_max * t_max);
    f.c4 = c(3) / (t_max * t_max * t_max * t_max);
    if (!(f.c2 > 0.0)) {
        throw NumericError("fit_tau2: non-positive quadratic coefficient");
    }
    f.tau2 = 1.0 / std::sqrt(2.0 * f.c2);
    f.tau1_zero = std::abs(c(0)) < 1e-3 * std::abs(c(1));

    // pure t^2 law, also in relative terms
    double num = 0.0, den = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
        num += a(r, 1);
        den += a(r, 1) * a(r, 1);
    }
    const double q = num / den;
    double res = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
        res += (1.0 - q * a(r, 1)) * (1.0 - q * a(r, 1));
    }
    f.quadratic_residual = std::sqrt(res / static_cast<double>(n));
    f.curvature = f.quadratic_residual > 1e-4;
    return f;
}

TermList engine_terms(const OracleSpec& s)
{
    check_spec(s);
    DiscreteModes dm;
    TermList tl;
    tl.n_sites = s.n_qubits;
    auto add = [&](TermLabel l, SystemOperator op, BathOperator b) { tl.terms.push_back({l, op, b}); };

    for (const auto& m : s.se) {
        DiscreteModes::SEMode mode{m.omega, m.g};
        if (s.corrupt_engine_sign) {
            mode.g[0] = -mode.g[0];
        }
        dm.se.push_back(mode);
        dm.se_occupation.push_back(m.occupation);
    }
    for (const auto& m : s.decay) {
        dm.decay.push_back({m.omega, m.u, m.w});
        dm.decay_occupation.push_back(m.occupation);
    }
    for (const auto& m : s.vib) {
        dm.vib_frequency.push_back(m.omega);
        dm.vib_occupation.push_back(m.occupation);
    }
    auto table_row = [&](auto getter) {
        std::vector<cplx> row;
        for (const auto& m : s.vib) {
            row.push_back(getter(m));
        }
        dm.vib_table.push_back(std::move(row));
        return dm.vib_table.size() - 1;
    };

    for (std::size_t i = 0; i < s.n_qubits; ++i) {
        const SystemOperator sx{i, QubitOp::x, CavityOp::one};
        if (!s.se.empty()) {
            add(TermLabel::se_dipole, sx, {BathKind::se, i});
        }
        if (!s.ld_se.empty()) {
            add(TermLabel::ld_se, sx, {BathKind::ld_se, i});
        }
        if (s.vib.empty()) {
            continue;
        }
        const auto rc = table_row([&](const OracleVibMode& m) { return m.classical.empty() ? 0.0 : m.classical[i]; });
        add(TermLabel::ld_classical, sx, {BathKind::vibration, i, false, 1.0, Vec3::Zero(), rc});
        const auto rm = table_row([&](const OracleVibMode& m) { return m.magnetic.empty() ? 0.0 : m.magnetic[i]; });
        add(TermLabel::ld_magnetic, {i, QubitOp::z, CavityOp::one},
            {BathKind::vibration, i, false, 1.0, Vec3::Zero(), rm});
        if (s.include_cavity) {
            const auto rp = table_row([&](const OracleVibMode& m) { return m.cavity.empty() ? cplx{} : m.cavity[i]; });
            add(TermLabel::ld_cavity, {i, QubitOp::x, CavityOp::b},
                {BathKind::vibration, i, false, 1.0, Vec3::Zero(), rp});
            add(TermLabel::ld_cavity, {i, QubitOp::x, CavityOp::bdag},
                {BathKind::vibration, i, true, 1.0, Vec3::Zero(), rp});
        }
    }
    if (!s.ld_se.empty()) {
        dm.n = s.ld_se;
    }
    if (!s.decay.empty()) {
        add(TermLabel::cavity_decay_u, {kNoSite, QubitOp::identity, CavityOp::bdag}, {BathKind::cavity_u});
        add(TermLabel::cavity_decay_w, {kNoSite, QubitOp::identity, CavityOp::bdag}, {BathKind::cavity_w});
        add(TermLabel::cavity_decay_u, {kNoSite, QubitOp::identity, CavityOp::b}, {BathKind::cavity_u, kNoSite, true});
        add(TermLabel::cavity_decay_w, {kNoSite, QubitOp::identity, CavityOp::b}, {BathKind::cavity_w, kNoSite, true});
    }
    tl.baths = std::make_shared<DiscreteBath>(std::move(dm));
    return tl;
}

DecoherenceReport engine_report(const OracleSpec& s)
{
    const auto state = build_state(s.state, static_cast<double>(s.n_qubits));
    const CavityState cav = s.include_cavity && s.cavity_fock > 0
                                ? CavityState::fock(static_cast<unsigned>(s.cavity_fock))
                                : CavityState::vacuum();
    // occupations are explicit, so the temperature argument is inert
    return tau2_general(state, cav, engine_terms(s), 0.0);
}

namespace {

// One more level on every bosonic factor. `capped` is set when an SE mode
// with thermal population sits at its truncation limit, since its error cannot be probed.
OracleSpec bumped(const OracleSpec& s, bool& capped)
{
    OracleSpec t = s;
    capped = false;
    for (auto& m : t.se) {
        if (m.truncation >= 6 && m.occupation > 0.0) {
            capped = true;
        }
        m.truncation = std::min(m.truncation + 1, 6);
    }
    for (auto& m : t.decay) {
        ++m.truncation;
    }
    for (auto& m : t.vib) {
        ++m.truncation;
    }
    if (t.include_cavity) {
        ++t.cavity_truncation;
    }
    return t;
}

FidelityCurve oracle_curve(const OracleSpec& s, const FitWindow& w, std::size_t& dim)
{
    const SmallSystem sys = build_small_system(s);
    dim = sys.hamiltonian.rows();
    const auto grid = auto_time_grid(sys, w);
    if (grid.empty()) {
        FidelityCurve c;
        c.tau2_fit = std::numeric_limits<double>::infinity();
        return c;
    }
    EvolveOptions eo;
    // the grid is chosen from 1 - F itself; weak decoherence may need times beyond 1/||V||
    eo.allow_long_time = true;
    FidelityCurve c = evolve_fidelity(sys, grid, eo);
    c.fit = fit_tau2(c.times, c.one_minus_f, w);
    c.tau2_fit = c.fit.tau2;
    c.fit_residual = c.fit.quadratic_residual;
    return c;
}

} // namespace

CrossValidation cross_validate(const OracleSpec& spec, const CrossValidateOptions& opt)
{
    const auto start = std::chrono::steady_clock::now();
    CrossValidation r;
    r.name = spec.name;
    try {
        r.tau2_engine = engine_report(spec).tau2;
        OracleSpec cur = spec;
        r.curve = oracle_curve(cur, opt.window, r.dimension);
        for (int step = 1; step <= opt.max_truncation_steps; ++step) {
            bool capped = false;
            OracleSpec next = bumped(cur, capped);
            if (capped) {
                throw ConfigError("SE truncation limit");
            }
            check_spec(next);
            std::size_t dim = 0;
            FidelityCurve c = oracle_curve(next, opt.window, dim);
            const double shift = std::abs(c.tau2_fit / r.curve.tau2_fit - 1.0);
            r.truncation_steps = step;
            r.curve = std::move(c);
            r.dimension = dim;
            cur = std::move(next);
            if (shift < opt.convergence || (std::isinf(r.curve.tau2_fit) && std::isinf(r.tau2_engine))) {
                r.truncation_converged = true;
                break;
            }
        }
        r.curve.truncation_converged = r.truncation_converged;
        r.tau2_oracle = r.curve.tau2_fit;
        r.deviation = std::isinf(r.tau2_oracle) && std::isinf(r.tau2_engine)
                          ? 0.0
                          : std::abs(r.tau2_engine / r.tau2_oracle - 1.0);
        if (!std::isfinite(r.deviation)) {
            r.deviation = std::numeric_limits<double>::infinity();
        }
        if (!r.truncation_converged) {
            r.failure = "truncation did not converge";
        } else if (!(r.deviation < opt.tolerance)) {
            r.failure = "deviation " + format_number(r.deviation) + " exceeds " + format_number(opt.tolerance);
        } else if (r.curve.max_trace_error > 1e-10 || r.curve.max_purity_drift > 1e-10 ||
                   r.curve.min_eigenvalue < -1e-12) {
            r.failure = "unitarity check failed";
        } else if (!r.curve.fidelity.empty() && !r.curve.fit.tau1_zero) {
            r.failure = "linear-in-t term in 1 - F";
        }
        r.passed = r.failure.empty();
    } catch (const ConfigError& e) {
        r.failure = std::string("truncation cap reached: ") + e.what();
    } catch (const std::exception& e) {
        r.failure = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

namespace {

Bloch bloch(double theta, double phi)
{
    return {cplx{std::cos(theta / 2.0), 0.0}, std::polar(std::sin(theta / 2.0), phi)};
}

OracleSpec ghz2_se()
{
    OracleSpec s;
    s.name = "ghz2-se-vacuum";
    s.n_qubits = 2;
    s.state = StateSpec::ghz();
    OracleSEMode m;
    m.omega = 1.3;
    m.truncation = 3;
    m.g = {0.4, 0.4};
    s.se = {m};
    return s;
}

OracleSpec hadamard1_cavity_ld()
{
    OracleSpec s;
    s.name = "hadamard1-cavity-ld-vacuum";
    s.state = StateSpec::hadamard();
    s.include_cavity = true;
    s.cavity_omega = 0.9;
    s.cavity_truncation = 3;
    OracleVibMode v;
    v.omega = 0.7;
    v.truncation = 3;
    v.cavity = {cplx{0.3, 0.1}};
    s.vib = {v};
    return s;
}

OracleSpec two_qubit_vib_thermal()
{
    OracleSpec s;
    s.name = "product2-vib-thermal";
    s.n_qubits = 2;
    s.state = {StateTag::product, {bloch(1.1, 0.3), bloch(2.0, -0.7)}, {}};
    OracleVibMode v;
    v.omega = 0.8;
    v.truncation = 8;
    v.occupation = 0.5;
    v.classical = {0.3, -0.2};
    v.magnetic = {0.1, 0.25};
    s.vib = {v};
    return s;
}

} // namespace

OracleSpec negative_control_spec()
{
    OracleSpec s = ghz2_se();
    s.name = "negative-control-flipped-sign";
    s.se[0].g = {0.4, 0.2};
    s.corrupt_engine_sign = true;
    return s;
}

std::vector<OracleSpec> regression_suite(bool full)
{
    std::vector<OracleSpec> out = {ghz2_se(), hadamard1_cavity_ld(), two_qubit_vib_thermal()};
    if (!full) {
        return out;
    }
    {
        OracleSpec s;
        s.name = "allzero1-se-two-modes";
        OracleSEMode a;
        a.omega = 1.0;
        a.g = {cplx{0.3, 0.2}};
        OracleSEMode b;
        b.omega = 1.7;
        b.g = {cplx{-0.1, 0.25}};
        s.se = {a, b};
        out.push_back(s);
    }
    {
        OracleSpec s;
        s.name = "w3-se-complex";
        s.n_qubits = 3;
        s.state = StateSpec::w();
        OracleSEMode m;
        m.omega = 1.2;
        m.g = {cplx{0.3, 0.0}, std::polar(0.3, 0.8), std::polar(0.25, -1.9)};
        s.se = {m};
        out.push_back(s);
    }
    {
        OracleSpec s;
        s.name = "product1-se-thermal";
        s.state = {StateTag::product, {bloch(0.9, 0.4)}, {}};
        OracleSEMode m;
        m.omega = 1.1;
        m.truncation = 5;
        m.occupation = 0.2;
        m.g = {cplx{0.35, -0.1}};
        s.se = {m};
        out.push_back(s);
    }
    {
        OracleSpec s;
        s.name = "cavity-decay-vacuum";
        s.state = StateSpec::all_zero();
        s.include_cavity = true;
        s.cavity_truncation = 3;
        OracleDecayMode d;
        d.omega = 1.4;
        d.u = 0.2;
        d.w = 0.3;
        s.decay = {d};
        out.push_back(s);
    }
    {
        OracleSpec s;
        s.name = "cavity-decay-thermal-fock1";
        s.state = StateSpec::hadamard();
        s.include_cavity = true;
        s.cavity_truncation = 4;
        s.cavity_fock = 1;
        OracleDecayMode d;
        d.omega = 0.9;
        d.truncation = 6;
        d.occupation = 0.5;
        d.u = cplx{0.2, 0.1};
        d.w = 0.25;
        s.decay = {d};
        out.push_back(s);
    }
    {
        OracleSpec s;
        s.name = "allzero1-ld-se-thermal-vib";
        OracleSEMode m;
        m.omega = 1.3;
        m.g = {0.2};
        s.se = {m};
        OracleVibMode v;
        v.omega = 0.6;
        v.truncation = 8;
        v.occupation = 0.5;
        s.vib = {v};
        s.ld_se = {{{cplx{0.15, 0.05}}}};
        out.push_back(s);
    }
    {
        OracleSpec s;
        s.name = "sparse2-mixed-thermal";
        s.n_qubits = 2;
        s.state = {StateTag::sparse, {}, {{0, 0.5}, {1, cplx{0.0, 0.5}}, {2, -0.5}, {3, cplx{0.3, 0.4}}}};
        s.include_cavity = true;
        s.cavity_truncation = 3;
        OracleSEMode m;
        m.omega = 1.5;
        m.g = {0.25, cplx{0.1, 0.2}};
        s.se = {m};
        OracleVibMode v;
        v.omega = 0.7;
        v.truncation = 7;
        v.occupation = 0.5;
        v.magnetic = {0.15, -0.1};
        v.cavity = {0.2, cplx{0.0, 0.15}};
        s.vib = {v};
        out.push_back(s);
    }
    {
        OracleSpec s;
        s.name = "ghz3-se-vib";
        s.n_qubits = 3;
        s.state = StateSpec::ghz();
        OracleSEMode m;
        m.omega = 1.2;
        m.g = {0.2, 0.25, cplx{0.1, 0.1}};
        s.se = {m};
        OracleVibMode v;
        v.omega = 0.9;
        v.truncation = 4;
        v.classical = {0.2, 0.1, -0.15};
        v.magnetic = {0.05, 0.1, 0.2};
        s.vib = {v};
        out.push_back(s);
    }
    {
        OracleSpec s;
        s.name = "product2-two-vib-thermal";
        s.n_qubits = 2;
        s.state = {StateTag::product, {bloch(0.5, 0.0), bloch(2.5, 1.0)}, {}};
        OracleVibMode a;
        a.omega = 0.8;
        a.truncation = 7;
        a.occupation = 0.5;
        a.classical = {0.2, 0.1};
        a.magnetic = {-0.1, 0.2};
        OracleVibMode b;
        b.omega = 1.3;
        b.truncation = 5;
        b.classical = {-0.1, 0.25};
        b.magnetic = {0.15, 0.05};
        s.vib = {a, b};
        out.push_back(s);
    }
    {
        OracleSpec s;
        s.name = "ghz2-se-thermal";
        s.n_qubits = 2;
        s.state = StateSpec::ghz();
        OracleSEMode m;
        m.omega = 1.0;
        m.truncation = 5;
        m.occupation = 0.2;
        m.g = {0.3, cplx{0.0, -0.2}};
        s.se = {m};
        out.push_back(s);
    }
    return out;
}

std::vector<CrossValidation> run_suite(const std::vector<OracleSpec>& specs, const CrossValidateOptions& opt)
{
    std::vector<std::future<CrossValidation>> jobs;
    jobs.reserve(specs.size());
    for (const auto& s : specs) {
        jobs.push_back(std::async(std::launch::async, [&s, &opt] { return cross_validate(s, opt); }));
    }
    std::vector<CrossValidation> out;
    for (auto& j : jobs) {
        out.push_back(j.get());
    }
    return out;
}

std::string curve_to_csv(const FidelityCurve& c)
{
    std::ostringstream o;
    o << "t,F,one_minus_F\n";
    for (std::size_t k = 0; k < c.times.size(); ++k) {
        o << format_number(c.times[k]) << ',' << format_number(c.fidelity[k]) << ','
          << format_number(c.one_minus_f[k]) << '\n';
    }
    return o.str();
}

nlohmann::json validation_to_json(const CrossValidation& v)
{
    auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(format_number(x)); };
    return {
        {"name", v.name},
        {"tau2_engine", num(v.tau2_engine)},
        {"tau2_oracle", num(v.tau2_oracle)},
        {"deviation", num(v.deviation)},
        {"truncation_converged", v.truncation_converged},
        {"truncation_steps", v.truncation_steps},
        {"dimension", v.dimension},
        {"fit_points", v.curve.fit.points},
        {"fit_residual", v.curve.fit_residual},
        {"curvature", v.curve.fit.curvature},
        {"tau1_zero", v.curve.fit.tau1_zero},
        {"max_trace_error", v.curve.max_trace_error},
        {"max_purity_drift", v.curve.max_purity_drift},
        {"min_eigenvalue", v.curve.min_eigenvalue},
        {"passed", v.passed},
        {"failure", v.failure},
        {"seconds", v.seconds},
    };
}

} // namespace decotime
