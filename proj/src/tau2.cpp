#include "decotime/tau2.hpp"

#include "decotime/errors.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace decotime {

std::string_view to_string(TermLabel l)
{
    switch (l) {
    case TermLabel::se_dipole: return "SE-dipole";
    case TermLabel::cavity_decay_u: return "cavity-decay-u";
    case TermLabel::cavity_decay_w: return "cavity-decay-w";
    case TermLabel::ld_se: return "LD-SE";
    case TermLabel::ld_cavity: return "LD-cavity";
    case TermLabel::ld_classical: return "LD-classical";
    case TermLabel::ld_magnetic: return "LD-magnetic";
    case TermLabel::gating_rabi: return "gating-rabi";
    case TermLabel::gating_zeeman: return "gating-zeeman";
    }
    return "unknown";
}

std::string_view to_string(StateClass c)
{
    switch (c) {
    case StateClass::general: return "general";
    case StateClass::se_stationary: return "se-stationary";
    case StateClass::correlated_vacuum: return "correlated-vacuum";
    case StateClass::uncorrelated_vacuum: return "uncorrelated-vacuum";
    case StateClass::hadamard: return "hadamard";
    case StateClass::ghz: return "ghz";
    case StateClass::no_se: return "no-se";
    }
    return "unknown";
}

StateClass state_class_from_string(std::string_view s)
{
    for (auto c : {StateClass::general, StateClass::se_stationary, StateClass::correlated_vacuum,
                   StateClass::uncorrelated_vacuum, StateClass::hadamard, StateClass::ghz, StateClass::no_se}) {
        if (to_string(c) == s) {
            return c;
        }
    }
    throw UsageError("unknown state class '" + std::string(s) + "'");
}

std::string_view to_string(Regime r)
{
    switch (r) {
    case Regime::independent: return "independent";
    case Regime::collective: return "collective";
    case Regime::intermediate: return "intermediate";
    }
    return "unknown";
}

std::string format_number(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

void finalize(DecoherenceReport& r)
{
    r.tau2 = r.inv_half_tau2_sq > 0.0 ? 1.0 / std::sqrt(2.0 * r.inv_half_tau2_sq)
                                      : std::numeric_limits<double>::infinity();
}

namespace {

bool is_identity_transform(const NormalModes& nm)
{
    return nm.transform.isIdentity(0.0);
}

// W = S diag(x0^2 (2 Nbar + 1)) S^T, kept diagonal when S is the identity.
class VibCovariance {
public:
    VibCovariance() = default;
    VibCovariance(const NormalModes& nm, double temperature)
    {
        Eigen::VectorXd w(nm.n_modes());
        for (Eigen::Index k = 0; k < w.size(); ++k) {
            w(k) = nm.zero_point(k) * nm.zero_point(k) * thermal_weight(nm.frequencies(k), temperature);
        }
        diagonal_ = is_identity_transform(nm);
        if (diagonal_) {
            diag_ = w;
        } else {
            full_ = nm.transform * w.asDiagonal() * nm.transform.transpose();
        }
        present_ = true;
    }

    bool present() const { return present_; }
    bool diagonal() const { return diagonal_; }

    Eigen::Matrix3d block(std::size_t i, std::size_t j) const
    {
        if (!present_) {
            return Eigen::Matrix3d::Zero();
        }
        const auto a = static_cast<Eigen::Index>(3 * i);
        const auto b = static_cast<Eigen::Index>(3 * j);
        if (diagonal_) {
            if (i != j) {
                return Eigen::Matrix3d::Zero();
            }
            return diag_.segment<3>(a).asDiagonal();
        }
        return full_.block<3, 3>(a, b);
    }

private:
    bool present_ = false;
    bool diagonal_ = true;
    Eigen::VectorXd diag_;
    Eigen::MatrixXd full_;
};

int bath_group(BathKind k)
{
    switch (k) {
    case BathKind::se: return 0;
    case BathKind::ld_se: return 1;
    case BathKind::cavity_u:
    case BathKind::cavity_w: return 2;
    case BathKind::vibration: return 3;
    case BathKind::none: break;
    }
    return -1;
}

enum class Prof { none, u, w };

// Cavity-decay bath operator as sum_k alpha_k b_k + beta_k b_k^dag.
struct AlphaBeta {
    Prof alpha = Prof::none;
    Prof beta = Prof::none;
};

AlphaBeta alpha_beta(const BathOperator& op)
{
    if (op.kind == BathKind::cavity_u) {
        return op.adjoint ? AlphaBeta{Prof::none, Prof::u} : AlphaBeta{Prof::u, Prof::none};
    }
    return op.adjoint ? AlphaBeta{Prof::w, Prof::none} : AlphaBeta{Prof::none, Prof::w};
}

cplx vib_coefficient(const BathOperator& op)
{
    return op.adjoint ? std::conj(op.coefficient) : op.coefficient;
}

class ContinuumTable final : public CorrelationTable {
public:
    ContinuumTable(const ValidatedModel& model, const NormalModes* modes, double temperature, SumMethod method)
        : model_(model.model()), temperature_(temperature), method_(method)
    {
        if (modes != nullptr) {
            vib_ = VibCovariance(*modes, temperature);
        }
        if (model_.cavity.enabled) {
            decay_ = cavity_decay_moments(model_, temperature, method);
        }
        const Vec3 dh = dipole_direction(model_);
        recoil_ = (2.0 * Eigen::Matrix3d::Identity() - dh * dh.transpose()) / 5.0;
        const double k = recoil_wavenumber(model_);
        recoil_ *= k * k;
    }

    cplx second_moment(const BathOperator& a, const BathOperator& b) const override
    {
        if (bath_group(a.kind) != bath_group(b.kind) || a.kind == BathKind::none) {
            return {};
        }
        switch (a.kind) {
        case BathKind::se:
            return se(a.site, b.site);
        case BathKind::ld_se: {
            const double r = (recoil_ * vib_.block(a.site, b.site)).trace();
            return r == 0.0 ? 0.0 : se(a.site, b.site) * r;
        }
        case BathKind::vibration: {
            const double s = a.direction.dot(vib_.block(a.site, b.site) * b.direction);
            return vib_coefficient(a) * vib_coefficient(b) * s;
        }
        case BathKind::cavity_u:
        case BathKind::cavity_w: {
            const auto pa = alpha_beta(a);
            const auto pb = alpha_beta(b);
            return moment(pa.alpha, pb.beta, true) + moment(pa.beta, pb.alpha, false);
        }
        case BathKind::none:
            break;
        }
        return {};
    }

private:
    double se(std::size_t i, std::size_t j) const
    {
        if (i > j) {
            std::swap(i, j);
        }
        const auto key = std::pair{i, j};
        if (const auto it = se_cache_.find(key); it != se_cache_.end()) {
            return it->second;
        }
        const auto& g = model_.geometry;
        const Vec3 d = i == j ? Vec3::Zero() : Vec3(g.position(i) - g.position(j));
        const double v = se_pair_sum(model_, d, temperature_, method_).value;
        se_cache_.emplace(key, v);
        return v;
    }

    double moment(Prof p, Prof q, bool plus) const
    {
        if (p == Prof::none || q == Prof::none) {
            return 0.0;
        }
        if (p == Prof::u && q == Prof::u) {
            return plus ? decay_.uu_plus : decay_.uu_minus;
        }
        if (p == Prof::w && q == Prof::w) {
            return plus ? decay_.ww_plus : decay_.ww_minus;
        }
        return plus ? decay_.uw_plus : decay_.uw_minus;
    }

    struct PairHash {
        std::size_t operator()(const std::pair<std::size_t, std::size_t>& p) const noexcept
        {
            return std::hash<std::size_t>{}(p.first * 0x9e3779b97f4a7c15ULL ^ p.second);
        }
    };

    const Model& model_;
    double temperature_;
    SumMethod method_;
    VibCovariance vib_;
    CavityDecayMoments decay_;
    Eigen::Matrix3d recoil_;
    mutable std::unordered_map<std::pair<std::size_t, std::size_t>, double, PairHash> se_cache_;
};

class DiscreteTable final : public CorrelationTable {
public:
    DiscreteTable(const DiscreteModes& m, double temperature) : m_(m)
    {
        auto occ = [&](const std::vector<double>& override_occ, std::size_t k, double omega) {
            if (k < override_occ.size() && override_occ[k] >= 0.0) {
                return override_occ[k];
            }
            return thermal_occupation(omega, temperature);
        };
        for (std::size_t k = 0; k < m.se.size(); ++k) {
            nbar_.push_back(occ(m.se_occupation, k, m.se[k].omega));
        }
        for (std::size_t k = 0; k < m.decay.size(); ++k) {
            mbar_.push_back(occ(m.decay_occupation, k, m.decay[k].xi));
        }
        for (std::size_t K = 0; K < m.vib_frequency.size(); ++K) {
            vib_weight_.push_back(2.0 * occ(m.vib_occupation, K, m.vib_frequency[K]) + 1.0);
        }
    }

    cplx second_moment(const BathOperator& a, const BathOperator& b) const override
    {
        if (bath_group(a.kind) != bath_group(b.kind) || a.kind == BathKind::none) {
            return {};
        }
        cplx acc{};
        switch (a.kind) {
        case BathKind::se:
            for (std::size_t k = 0; k < m_.se.size(); ++k) {
                const cplx gi = m_.se[k].g[a.site];
                const cplx gj = m_.se[k].g[b.site];
                acc += gi * std::conj(gj) * (nbar_[k] + 1.0) + std::conj(gi) * gj * nbar_[k];
            }
            return acc;
        case BathKind::ld_se:
            if (m_.n.empty()) {
                return {};
            }
            for (std::size_t k = 0; k < m_.se.size(); ++k) {
                for (std::size_t K = 0; K < vib_weight_.size(); ++K) {
                    const cplx ni = m_.n[a.site][k][K];
                    const cplx nj = m_.n[b.site][k][K];
                    acc += (ni * std::conj(nj) * (nbar_[k] + 1.0) + std::conj(ni) * nj * nbar_[k]) * vib_weight_[K];
                }
            }
            return acc;
        case BathKind::vibration: {
            const auto& ra = m_.vib_table.at(a.table);
            const auto& rb = m_.vib_table.at(b.table);
            for (std::size_t K = 0; K < vib_weight_.size(); ++K) {
                const cplx ca = a.adjoint ? std::conj(ra[K]) : ra[K];
                const cplx cb = b.adjoint ? std::conj(rb[K]) : rb[K];
                acc += ca * cb * vib_weight_[K];
            }
            return acc;
        }
        case BathKind::cavity_u:
        case BathKind::cavity_w:
            for (std::size_t k = 0; k < m_.decay.size(); ++k) {
                const auto [aa, ab] = coeffs(a, k);
                const auto [ba, bb] = coeffs(b, k);
                acc += aa * bb * (mbar_[k] + 1.0) + ab * ba * mbar_[k];
            }
            return acc;
        case BathKind::none:
            break;
        }
        return {};
    }

private:
    // (alpha_k, beta_k) of a cavity-decay operator.
    std::pair<cplx, cplx> coeffs(const BathOperator& op, std::size_t k) const
    {
        const auto& d = m_.decay[k];
        if (op.kind == BathKind::cavity_u) {
            return op.adjoint ? std::pair{cplx{}, std::conj(d.u)} : std::pair{d.u, cplx{}};
        }
        return op.adjoint ? std::pair{std::conj(d.w), cplx{}} : std::pair{cplx{}, d.w};
    }

    const DiscreteModes& m_;
    std::vector<double> nbar_;
    std::vector<double> mbar_;
    std::vector<double> vib_weight_;
};

} // namespace

ContinuumBath::ContinuumBath(std::shared_ptr<const ValidatedModel> model, std::shared_ptr<const NormalModes> modes,
                             SumMethod method)
    : model_(std::move(model)), modes_(std::move(modes)), method_(method)
{
    if (!model_) {
        throw UsageError("ContinuumBath needs a model");
    }
}

std::unique_ptr<CorrelationTable> ContinuumBath::at(double temperature) const
{
    return std::make_unique<ContinuumTable>(*model_, modes_.get(), temperature, method_);
}

std::unique_ptr<CorrelationTable> DiscreteBath::at(double temperature) const
{
    return std::make_unique<DiscreteTable>(modes_, temperature);
}

std::size_t TermList::count(TermLabel l) const
{
    return static_cast<std::size_t>(std::count_if(terms.begin(), terms.end(), [&](const auto& t) { return t.label == l; }));
}

std::vector<TermLabel> TermList::bath_families() const
{
    std::vector<TermLabel> out;
    for (const auto& t : terms) {
        if (t.bath.kind != BathKind::none && std::find(out.begin(), out.end(), t.label) == out.end()) {
            out.push_back(t.label);
        }
    }
    return out;
}

TermList assemble_interaction_terms(const ValidatedModel& model, std::shared_ptr<const NormalModes> modes,
                                    SumMethod method)
{
    const Model& m = model.model();
    const std::size_t n = m.geometry.size();
    const bool vib = m.vibrations.enabled;
    const bool se = m.qubits.gamma_se > 0.0;
    const bool cav = m.cavity.enabled;
    if (vib && !modes) {
        throw UsageError("assemble_interaction_terms: Lamb-Dicke terms need solved normal modes");
    }
    if (vib && modes->n_sites() != n) {
        throw UsageError("assemble_interaction_terms: normal modes do not match the site count");
    }

    TermList tl;
    tl.n_sites = n;
    auto add = [&](TermLabel l, SystemOperator op, BathOperator b) { tl.terms.push_back({l, op, b}); };
    const double g = cavity_coupling(m);
    const auto& gt = m.gating;
    const constexpr double hbar = kConstants.hbar;

    for (std::size_t i = 0; i < n; ++i) {
        const SystemOperator sx{i, QubitOp::x, CavityOp::one};
        if (se) {
            add(TermLabel::se_dipole, sx, {BathKind::se, i});
            if (vib) {
                add(TermLabel::ld_se, sx, {BathKind::ld_se, i});
            }
        }
        if (vib && cav) {
            const cplx p = g * std::polar(1.0, m.cavity.wavevector.dot(m.geometry.position(i)));
            add(TermLabel::ld_cavity, {i, QubitOp::x, CavityOp::b},
                {BathKind::vibration, i, false, p, m.cavity.wavevector});
            add(TermLabel::ld_cavity, {i, QubitOp::x, CavityOp::bdag},
                {BathKind::vibration, i, true, p, m.cavity.wavevector});
        }
        if (vib) {
            // Theta_K^i = i Omega_i x0_K (k_c . S_iK); the term plus its adjoint couples through 2 Re Theta.
            const cplx omega = gt.enabled ? gt.rabi(i) : cplx{};
            add(TermLabel::ld_classical, sx,
                {BathKind::vibration, i, false, cplx{-2.0 * omega.imag(), 0.0}, gt.classical_wavevector});
            const Vec3 g0 = gt.enabled ? gt.gradient(0, i) : Vec3::Zero();
            const Vec3 g1 = gt.enabled ? gt.gradient(1, i) : Vec3::Zero();
            // m_aK^i = -x0_K (grad_a . S_iK) / hbar
            add(TermLabel::ld_magnetic, {i, QubitOp::z, CavityOp::one},
                {BathKind::vibration, i, false, 1.0, Vec3(-(g1 - g0) / (2.0 * hbar))});
            add(TermLabel::ld_magnetic, {kNoSite, QubitOp::identity, CavityOp::one},
                {BathKind::vibration, i, false, 1.0, Vec3(-(g1 + g0) / (2.0 * hbar))});
        }
        if (gt.enabled && gt.rabi(i) != cplx{}) {
            add(TermLabel::gating_rabi, sx, {});
        }
        if (gt.enabled && gt.delta(i) != 0.0) {
            add(TermLabel::gating_zeeman, {i, QubitOp::z, CavityOp::one}, {});
        }
    }
    if (cav) {
        add(TermLabel::cavity_decay_u, {kNoSite, QubitOp::identity, CavityOp::bdag}, {BathKind::cavity_u});
        add(TermLabel::cavity_decay_w, {kNoSite, QubitOp::identity, CavityOp::bdag}, {BathKind::cavity_w});
        add(TermLabel::cavity_decay_u, {kNoSite, QubitOp::identity, CavityOp::b}, {BathKind::cavity_u, kNoSite, true});
        add(TermLabel::cavity_decay_w, {kNoSite, QubitOp::identity, CavityOp::b}, {BathKind::cavity_w, kNoSite, true});
    }
    tl.baths = std::make_shared<ContinuumBath>(std::make_shared<ValidatedModel>(model), std::move(modes), method);
    return tl;
}

// ---- variance engine -------------------------------------------------------

namespace {

bool structurally_zero(const InteractionTerm& t)
{
    const auto& b = t.bath;
    if (b.kind == BathKind::none) {
        return true;
    }
    if (b.kind == BathKind::vibration && b.table == kNoSite) {
        return b.coefficient == cplx{} || b.direction.isZero(0.0);
    }
    return false;
}

cplx cavity_single(const CavityMoments& c, CavityOp op)
{
    switch (op) {
    case CavityOp::one: return 1.0;
    case CavityOp::b: return c.b;
    case CavityOp::bdag: return c.bd;
    }
    return 0.0;
}

cplx cavity_pair(const CavityMoments& c, CavityOp x, CavityOp y)
{
    if (x == CavityOp::one) {
        return cavity_single(c, y);
    }
    if (y == CavityOp::one) {
        return cavity_single(c, x);
    }
    if (x == CavityOp::b) {
        return y == CavityOp::b ? c.b2 : cplx{c.bbd};
    }
    return y == CavityOp::b ? cplx{c.bdb} : c.bd2;
}

Axis axis_of(QubitOp q)
{
    return q == QubitOp::x ? Axis::X : Axis::Z;
}

class QubitExpectations {
public:
    QubitExpectations(const QubitRegisterState& s, std::size_t n) : s_(s)
    {
        x_.resize(n);
        z_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            x_[i] = expect_pauli(s, i, Axis::X);
            z_[i] = expect_pauli(s, i, Axis::Z);
        }
    }

    double single(const SystemOperator& op) const
    {
        if (op.qubit == QubitOp::identity) {
            return 1.0;
        }
        return op.qubit == QubitOp::x ? x_[op.site] : z_[op.site];
    }

    // Valid unless both act on the same site with different axes.
    double pair(const SystemOperator& a, const SystemOperator& b) const
    {
        if (a.qubit == QubitOp::identity) {
            return single(b);
        }
        if (b.qubit == QubitOp::identity) {
            return single(a);
        }
        if (a.site == b.site) {
            return 1.0;
        }
        return expect_pauli_pair(s_, a.site, b.site, axis_of(a.qubit), axis_of(b.qubit));
    }

private:
    const QubitRegisterState& s_;
    std::vector<double> x_;
    std::vector<double> z_;
};

bool anticommuting(const SystemOperator& a, const SystemOperator& b)
{
    return a.qubit != QubitOp::identity && b.qubit != QubitOp::identity && a.site == b.site && a.qubit != b.qubit;
}

struct Accumulator {
    std::map<TermLabel, double> by_label;
    std::map<TermLabel, double> abs_by_label;
    std::map<TermLabel, double> cross_abs_by_label;
    double imag = 0.0;
    double abs_total = 0.0;

    void add(const InteractionTerm& a, const InteractionTerm& b, cplx v)
    {
        imag += v.imag();
        const double re = v.real();
        const bool cross = a.op.site != kNoSite && b.op.site != kNoSite && a.op.site != b.op.site;
        for (const auto* t : {&a, &b}) {
            by_label[t->label] += 0.5 * re;
            abs_by_label[t->label] += 0.5 * std::abs(re);
            if (cross) {
                cross_abs_by_label[t->label] += 0.5 * std::abs(re);
            }
        }
        abs_total += std::abs(re);
    }
};

} // namespace

DecoherenceReport tau2_general(const QubitRegisterState& state, const CavityState& cavity, const TermList& terms,
                               double temperature)
{
    if (temperature < 0.0) {
        throw UsageError("tau2_general: temperature must be >= 0");
    }
    if (!terms.baths) {
        throw UsageError("tau2_general: term list has no bath correlator");
    }
    if (state.n_qubits() != static_cast<double>(terms.n_sites)) {
        throw UsageError("tau2_general: state has " + format_number(state.n_qubits()) + " qubits, terms describe " +
                         std::to_string(terms.n_sites));
    }
    const auto table = terms.baths->at(temperature);
    const QubitExpectations q(state, terms.n_sites);
    const CavityMoments cm = cavity_moments(cavity);

    std::array<std::vector<const InteractionTerm*>, 4> groups;
    for (const auto& t : terms.terms) {
        if (!structurally_zero(t)) {
            groups[static_cast<std::size_t>(bath_group(t.bath.kind))].push_back(&t);
        }
    }

    Accumulator acc;
    for (const auto& grp : groups) {
        for (std::size_t ia = 0; ia < grp.size(); ++ia) {
            const auto& a = *grp[ia];
            const double qa = q.single(a.op);
            const cplx ca = cavity_single(cm, a.op.cavity);
            for (std::size_t ib = ia; ib < grp.size(); ++ib) {
                const auto& b = *grp[ib];
                const double qb = q.single(b.op);
                const cplx cb = cavity_single(cm, b.op.cavity);
                const cplx c_ab = table->second_moment(a.bath, b.bath);
                const cplx c_ba = ia == ib ? c_ab : table->second_moment(b.bath, a.bath);
                if (c_ab == cplx{} && c_ba == cplx{}) {
                    continue;
                }
                const cplx cab = cavity_pair(cm, a.op.cavity, b.op.cavity);
                const cplx cba = cavity_pair(cm, b.op.cavity, a.op.cavity);
                cplx v;
                if (anticommuting(a.op, b.op)) {
                    // sigma_X sigma_Z = -i sigma_Y; the sigma_Y parts of (a,b) and (b,a) must cancel
                    const cplx y_part = cab * c_ab - cba * c_ba;
                    if (std::abs(y_part) > 1e-12 * (std::abs(cab * c_ab) + std::abs(cba * c_ba))) {
                        throw NumericError("tau2_general: same-site sigma_X/sigma_Z pair leaves an uncancelled sigma_Y term");
                    }
                    v = -qa * qb * ca * cb * (c_ab + c_ba);
                } else {
                    const double qab = q.pair(a.op, b.op);
                    v = (qab * cab - qa * qb * ca * cb) * c_ab;
                    if (ia != ib) {
                        v += (qab * cba - qa * qb * cb * ca) * c_ba;
                    }
                }
                acc.add(a, b, v);
            }
        }
    }

    DecoherenceReport r;
    r.state_class = StateClass::general;
    r.state = std::string(to_string(state.tag()));
    r.n_qubits = state.n_qubits();
    r.temperature = temperature;
    r.method = "general";
    double total = 0.0;
    double cross_abs = 0.0;
    for (const auto& [label, v] : acc.by_label) {
        r.breakdown[std::string(to_string(label))] = v;
        total += v;
    }
    for (const auto& t : terms.terms) {
        r.breakdown.try_emplace(std::string(to_string(t.label)), 0.0);
    }
    for (const auto& [label, v] : acc.abs_by_label) {
        const double c = acc.cross_abs_by_label.count(label) ? acc.cross_abs_by_label.at(label) : 0.0;
        cross_abs += c;
        r.cross_site_fraction_by_label[std::string(to_string(label))] = v > 0.0 ? c / v : 0.0;
    }
    r.cross_site_fraction = acc.abs_total > 0.0 ? cross_abs / acc.abs_total : 0.0;
    if (std::abs(acc.imag) > 1e-9 * std::max(acc.abs_total, 1e-300)) {
        r.warnings.push_back("imaginary residue " + format_number(acc.imag) + " in the variance");
    }
    if (total < 0.0) {
        if (-total > 1e-12 * acc.abs_total) {
            throw NumericError("tau2_general: negative variance " + format_number(total));
        }
        total = 0.0;
    }
    r.inv_half_tau2_sq = total;
    finalize(r);
    return r;
}

// ---- closed forms ----------------------------------------------------------

namespace {

struct ClosedInputs {
    const Model& m;
    const NormalModes* modes;
    double temperature;
    SumMethod method;
    VibCovariance vib;
    Eigen::Matrix3d recoil;

    ClosedInputs(const Model& model, const NormalModes* nm, double t, SumMethod meth)
        : m(model), modes(nm), temperature(t), method(meth)
    {
        if (nm != nullptr) {
            vib = VibCovariance(*nm, t);
        }
        const Vec3 dh = dipole_direction(m);
        const double k = recoil_wavenumber(m);
        recoil = k * k * (2.0 * Eigen::Matrix3d::Identity() - dh * dh.transpose()) / 5.0;
    }

    Vec3 pos(std::size_t i) const { return m.geometry.position(i); }

    double g_se(std::size_t i, std::size_t j) const
    {
        return se_pair_sum(m, i == j ? Vec3::Zero() : Vec3(pos(i) - pos(j)), temperature, method).value;
    }
    double se_diag() const { return se_pair_sum(m, Vec3::Zero(), temperature, method).value; }

    double recoil_factor(std::size_t i, std::size_t j) const
    {
        return vib.present() ? (recoil * vib.block(i, j)).trace() : 0.0;
    }

    cplx k_pair(std::size_t i, std::size_t j) const
    {
        if (!m.cavity.enabled || !vib.present()) {
            return {};
        }
        const Vec3& kb = m.cavity.wavevector;
        const double g = cavity_coupling(m);
        const double s = kb.dot(vib.block(i, j) * kb);
        if (s == 0.0) {
            return {};
        }
        return g * g * s * std::polar(1.0, kb.dot(pos(i) - pos(j)));
    }

    bool offdiag_vib_zero() const { return !vib.present() || vib.diagonal(); }
};

struct ClosedTotals {
    double se = 0.0, ld_se = 0.0, ld_cavity = 0.0, decay = 0.0;
    double se_abs = 0.0, se_cross = 0.0;
    double ld_se_abs = 0.0, ld_se_cross = 0.0;
    double k_abs = 0.0, k_cross = 0.0;

    void add_se(double v, bool cross)
    {
        se += v;
        se_abs += std::abs(v);
        if (cross) {
            se_cross += std::abs(v);
        }
    }
    void add_ld_se(double v, bool cross)
    {
        ld_se += v;
        ld_se_abs += std::abs(v);
        if (cross) {
            ld_se_cross += std::abs(v);
        }
    }
    void add_k(double v, bool cross)
    {
        ld_cavity += v;
        k_abs += std::abs(v);
        if (cross) {
            k_cross += std::abs(v);
        }
    }
};

void require_vacuum_case(StateClass cls, double temperature)
{
    if (cls != StateClass::se_stationary && temperature != 0.0) {
        throw UsageError(std::string("closed form '") + std::string(to_string(cls)) +
                         "' holds at zero temperature only; use se-stationary or the general engine");
    }
}

void require_state(StateClass cls, const QubitRegisterState& s)
{
    switch (cls) {
    case StateClass::hadamard:
        if (s.tag() != StateTag::hadamard) {
            throw UsageError("closed form 'hadamard' needs the Hadamard state, got " + std::string(to_string(s.tag())));
        }
        break;
    case StateClass::ghz:
        if (s.tag() != StateTag::ghz) {
            throw UsageError("closed form 'ghz' needs the GHZ state, got " + std::string(to_string(s.tag())));
        }
        if (s.n_qubits() < 3.0) {
            throw UsageError("closed form 'ghz' holds for N >= 3; for N = 2 use correlated-vacuum");
        }
        break;
    case StateClass::uncorrelated_vacuum:
        if (!is_uncorrelated(s)) {
            throw UsageError("closed form 'uncorrelated-vacuum' needs <X_i X_j> = <X_i><X_j> for all pairs");
        }
        break;
    case StateClass::general:
        throw UsageError("tau2_closed_form: 'general' is not a closed-form class");
    default:
        break;
    }
}

void fill_report(DecoherenceReport& r, const ClosedTotals& t)
{
    r.breakdown["SE-dipole"] = t.se;
    r.breakdown["LD-SE"] = t.ld_se;
    r.breakdown["LD-cavity"] = t.ld_cavity;
    r.breakdown["cavity-decay-w"] = t.decay;
    r.inv_half_tau2_sq = t.se + t.ld_se + t.ld_cavity + t.decay;
    const double abs_total = t.se_abs + t.ld_se_abs + t.k_abs + std::abs(t.decay);
    r.cross_site_fraction = abs_total > 0.0 ? (t.se_cross + t.ld_se_cross + t.k_cross) / abs_total : 0.0;
    r.cross_site_fraction_by_label["SE-dipole"] = t.se_abs > 0.0 ? t.se_cross / t.se_abs : 0.0;
    r.cross_site_fraction_by_label["LD-SE"] = t.ld_se_abs > 0.0 ? t.ld_se_cross / t.ld_se_abs : 0.0;
    r.cross_site_fraction_by_label["LD-cavity"] = t.k_abs > 0.0 ? t.k_cross / t.k_abs : 0.0;
    r.cross_site_fraction_by_label["cavity-decay-w"] = 0.0;
    finalize(r);
}

bool uses_ld(StateClass c)
{
    return c != StateClass::se_stationary;
}

bool uses_g(StateClass c)
{
    return c != StateClass::hadamard && c != StateClass::no_se;
}

} // namespace

DecoherenceReport tau2_closed_form(StateClass cls, const QubitRegisterState& state, const ValidatedModel& model,
                                   const NormalModes* modes, double temperature, const ClosedFormOptions& opt)
{
    if (!(temperature >= 0.0)) {
        throw UsageError("tau2_closed_form: temperature must be >= 0");
    }
    require_vacuum_case(cls, temperature);
    require_state(cls, state);
    const Model& m = model.model();
    const double n = state.n_qubits();
    if (n != m.geometry.n_sites()) {
        throw UsageError("tau2_closed_form: state has " + format_number(n) + " qubits but the geometry has " +
                         format_number(m.geometry.n_sites()) + " sites");
    }

    DecoherenceReport r;
    r.state_class = cls;
    r.state = std::string(to_string(state.tag()));
    r.n_qubits = n;
    r.temperature = temperature;
    if (m.gating.enabled) {
        r.warnings.push_back("closed forms assume no gating; the gating snapshot is ignored");
    }

    const bool vib = m.vibrations.enabled && uses_ld(cls);
    const bool indep = !m.vibrations.enabled || m.vibrations.topology == Topology::independent;

    // Off-diagonal covariance of a uniform state, read from sites 0 and 1.
    auto uniform_offdiag_zero = [&] {
        if (!state.is_uniform()) {
            return false;
        }
        if (n < 2.0) {
            return true;
        }
        const double x = expect_pauli(state, 0, Axis::X);
        return std::abs(expect_pauli_pair(state, 0, 1, Axis::X, Axis::X) - x * x) == 0.0;
    };

    std::optional<NormalModes> own_modes;
    const double L = m.cavity.enabled ? cavity_decay_sum(model, opt.method).value : 0.0;

    if (!opt.force_pairs && indep && uniform_offdiag_zero()) {
        // every site is equivalent and no pair i != j contributes
        r.method = "closed-form-uniform";
        if (vib) {
            own_modes = independent_modes(1, m.vibrations.spring_constant, m.qubits.mass);
        }
        ClosedInputs in(m, own_modes ? &*own_modes : nullptr, temperature, opt.method);
        const double x = expect_pauli(state, 0, Axis::X);
        const double g00 = uses_g(cls) ? in.se_diag() : 0.0;
        const double r00 = vib ? in.recoil_factor(0, 0) : 0.0;
        const double k00 = vib ? in.k_pair(0, 0).real() : 0.0;
        ClosedTotals t;
        const double m_ii = 1.0 - x * x;
        switch (cls) {
        case StateClass::se_stationary:
            t.add_se(n * m_ii * g00, false);
            break;
        case StateClass::correlated_vacuum:
        case StateClass::uncorrelated_vacuum:
            t.add_se(n * m_ii * g00, false);
            t.add_ld_se(n * m_ii * g00 * r00, false);
            t.add_k(n * k00, false);
            break;
        case StateClass::hadamard:
        case StateClass::no_se:
            t.add_k(n * k00, false);
            break;
        case StateClass::ghz:
            t.add_se(n * g00, false);
            t.add_ld_se(n * g00 * r00, false);
            t.add_k(n * k00, false);
            break;
        case StateClass::general:
            break;
        }
        t.decay = cls == StateClass::se_stationary ? 0.0 : L;
        fill_report(r, t);
    } else {
        if (!m.geometry.materializable()) {
            throw UsageError("tau2_closed_form: " + format_number(n) +
                             " sites need independent vibrations and a uniform state without pair correlations");
        }
        const std::size_t ns = m.geometry.size();
        if (vib && modes == nullptr) {
            own_modes = solve_normal_modes(model);
            modes = &*own_modes;
        }
        r.method = "closed-form-pairs";
        const ClosedInputs in(m, vib ? modes : nullptr, temperature, opt.method);
        std::vector<double> x(ns);
        for (std::size_t i = 0; i < ns; ++i) {
            x[i] = expect_pauli(state, i, Axis::X);
        }
        auto xx = [&](std::size_t i, std::size_t j) {
            return i == j ? 1.0 : expect_pauli_pair(state, i, j, Axis::X, Axis::X);
        };
        const double g_diag = uses_g(cls) ? in.se_diag() : 0.0;
        ClosedTotals t;
        const bool k_offdiag = vib && !in.offdiag_vib_zero();
        for (std::size_t i = 0; i < ns; ++i) {
            const double kii = vib ? in.k_pair(i, i).real() : 0.0;
            const double rii = vib ? in.recoil_factor(i, i) : 0.0;
            const double mii = 1.0 - x[i] * x[i];
            switch (cls) {
            case StateClass::se_stationary:
                t.add_se(mii * g_diag, false);
                break;
            case StateClass::correlated_vacuum:
            case StateClass::uncorrelated_vacuum:
                t.add_se(mii * g_diag, false);
                t.add_ld_se(mii * g_diag * rii, false);
                t.add_k(cls == StateClass::correlated_vacuum ? kii : mii * kii + x[i] * x[i] * kii, false);
                break;
            case StateClass::hadamard:
            case StateClass::no_se:
                t.add_k(kii, false);
                break;
            case StateClass::ghz:
                t.add_se(g_diag, false);
                t.add_ld_se(g_diag * rii, false);
                t.add_k(kii, false);
                break;
            case StateClass::general:
                break;
            }
            if (cls == StateClass::ghz) {
                continue;
            }
            for (std::size_t j = i + 1; j < ns; ++j) {
                double wk = 0.0; // weight of K_ij + K_ji
                double wm = 0.0; // covariance M_ij
                switch (cls) {
                case StateClass::se_stationary:
                    wm = xx(i, j) - x[i] * x[j];
                    break;
                case StateClass::correlated_vacuum:
                    wm = xx(i, j) - x[i] * x[j];
                    wk = k_offdiag ? xx(i, j) : 0.0;
                    break;
                case StateClass::uncorrelated_vacuum:
                    wk = k_offdiag ? x[i] * x[j] : 0.0;
                    break;
                case StateClass::hadamard:
                    wk = k_offdiag ? 1.0 : 0.0;
                    break;
                case StateClass::no_se:
                    wk = k_offdiag ? xx(i, j) : 0.0;
                    break;
                default:
                    break;
                }
                if (wm != 0.0) {
                    const double gij = in.g_se(i, j);
                    t.add_se(2.0 * wm * gij, true);
                    if (vib && cls != StateClass::se_stationary) {
                        const double rij = in.recoil_factor(i, j);
                        t.add_ld_se(2.0 * wm * gij * rij, true);
                    }
                }
                if (wk != 0.0) {
                    t.add_k(2.0 * wk * in.k_pair(i, j).real(), true);
                }
            }
        }
        t.decay = cls == StateClass::se_stationary ? 0.0 : L;
        fill_report(r, t);
    }

    if (cls == StateClass::hadamard || cls == StateClass::ghz || cls == StateClass::no_se) {
        if (m.vibrations.enabled && m.cavity.enabled) {
            const NormalModes one = m.vibrations.topology == Topology::independent
                                        ? independent_modes(1, m.vibrations.spring_constant, m.qubits.mass)
                                        : (modes ? *modes : solve_normal_modes(model));
            const double nu = mean_frequency(one, m.vibrations.mean_strategy);
            const double eta = m.cavity.wavevector.norm() * std::sqrt(kConstants.hbar / (2.0 * m.qubits.mass * nu));
            const double g = cavity_coupling(m);
            r.approximation = n * eta * eta * g * g;
        } else {
            r.approximation = 0.0;
        }
    }
    return r;
}

// ---- classifier, fidelity, sweeps -------------------------------------------

Regime classify_decoherence(double delta_k, double mean_k, double d, const RegimeThresholds& th)
{
    if (!(th.low < th.high)) {
        throw UsageError("classify_decoherence: low threshold must be below the high threshold");
    }
    if (delta_k * d > th.high) {
        return Regime::independent;
    }
    if (delta_k * d < th.low && mean_k * d < th.low) {
        return Regime::collective;
    }
    return Regime::intermediate;
}

Regime classify_decoherence(const ValidatedModel& model, std::size_t i, std::size_t j, const RegimeThresholds& th)
{
    const auto& b = model->se_bath;
    if (!(b.bandwidth_dk > 0.0)) {
        throw UsageError("classify_decoherence: bath.se.bandwidth is not configured");
    }
    const double d = (model->geometry.position(i) - model->geometry.position(j)).norm();
    return classify_decoherence(b.bandwidth_dk, b.mean_k, d, th);
}

double fidelity_short_time(const DecoherenceReport& r, double t, bool* warning)
{
    if (t < 0.0) {
        throw UsageError("fidelity_short_time: t must be >= 0");
    }
    const double loss = std::isinf(r.tau2) ? 0.0 : t * t * r.inv_half_tau2_sq;
    if (warning != nullptr) {
        *warning = loss > 0.1;
    }
    return 1.0 - loss;
}

namespace {

Model sweep_point(const Model& tmpl, double n, double scale)
{
    Model m = tmpl;
    Geometry g;
    g.kind = GeometryKind::chain;
    g.count = n;
    if (tmpl.geometry.kind == GeometryKind::chain) {
        g.spacing = tmpl.geometry.spacing;
        g.axis = tmpl.geometry.axis;
    } else if (tmpl.geometry.positions.size() >= 2) {
        const Vec3 d = tmpl.geometry.positions[1] - tmpl.geometry.positions[0];
        g.spacing = d.norm();
        g.axis = d.normalized();
    } else {
        g.spacing = 1e-6;
    }
    m.geometry = g;
    // per-site gating data cannot follow the site count; closed forms ignore it anyway
    m.gating = GatingSnapshot{};
    if (scale != 1.0) {
        const double s2 = scale * scale;
        m.qubits.gamma_se *= s2;
        m.cavity.mode_volume /= s2;
        m.cavity_decay.u.amplitude *= scale;
        m.cavity_decay.w.amplitude *= scale;
    }
    return m;
}

} // namespace

SweepResult scaling_sweep(const Model& tmpl, StateClass cls, const StateSpec& spec, const std::vector<double>& n_list,
                          const CouplingScale& scale, const ClosedFormOptions& opt)
{
    if (n_list.size() < 3) {
        throw UsageError("scaling_sweep needs at least 3 values of N");
    }
    for (std::size_t k = 1; k < n_list.size(); ++k) {
        if (!(n_list[k] > n_list[k - 1])) {
            throw UsageError("scaling_sweep: N values must be strictly increasing");
        }
    }
    SweepResult out;
    for (double n : n_list) {
        const double f = scale ? scale(n) : 1.0;
        const ValidatedModel vm = validate_model(sweep_point(tmpl, n, f));
        const auto state = build_state(spec, n);
        SweepRow row;
        row.n = n;
        row.report = tau2_closed_form(cls, state, vm, nullptr, 0.0, opt);
        out.rows.push_back(std::move(row));
    }
    // least squares of log tau2 against log N
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double k = static_cast<double>(out.rows.size());
    for (const auto& row : out.rows) {
        if (!(std::isfinite(row.report.tau2) && row.report.tau2 > 0.0)) {
            throw NumericError("scaling_sweep: tau2 is not finite at N = " + format_number(row.n));
        }
        const double lx = std::log(row.n);
        const double ly = std::log(row.report.tau2);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    out.slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    out.intercept = (sy - out.slope * sx) / k;
    return out;
}

nlohmann::json report_to_json(const DecoherenceReport& r)
{
    nlohmann::json j;
    j["tau2_s"] = std::isfinite(r.tau2) ? nlohmann::json(r.tau2) : nlohmann::json(nullptr);
    j["tau2_infinite"] = !std::isfinite(r.tau2);
    j["inv_half_tau2_sq"] = r.inv_half_tau2_sq;
    j["tau1_inverse"] = r.tau1_inverse;
    j["breakdown"] = r.breakdown;
    j["cross_site_fraction"] = r.cross_site_fraction;
    j["cross_site_fraction_by_label"] = r.cross_site_fraction_by_label;
    j["state_class"] = std::string(to_string(r.state_class));
    j["state"] = r.state;
    j["n_qubits"] = r.n_qubits;
    j["temperature_K"] = r.temperature;
    j["method"] = r.method;
    if (r.approximation) {
        j["approximation_N_eta2_gb2"] = *r.approximation;
    }
    j["warnings"] = r.warnings;
    return j;
}

std::string sweep_to_csv(const SweepResult& s)
{
    std::vector<std::string> labels;
    for (const auto& row : s.rows) {
        for (const auto& kv : row.report.breakdown) {
            if (std::find(labels.begin(), labels.end(), kv.first) == labels.end()) {
                labels.push_back(kv.first);
            }
        }
    }
    std::sort(labels.begin(), labels.end());
    std::ostringstream o;
    o << "N,tau2_s,inv_half_tau2_sq";
    for (const auto& l : labels) {
        o << ',' << l;
    }
    o << '\n';
    for (const auto& row : s.rows) {
        o << format_number(row.n) << ',' << format_number(row.report.tau2) << ','
          << format_number(row.report.inv_half_tau2_sq);
        for (const auto& l : labels) {
            const auto it = row.report.breakdown.find(l);
            o << ',' << format_number(it == row.report.breakdown.end() ? 0.0 : it->second);
        }
        o << '\n';
    }
    return o.str();
}

} // namespace decotime
