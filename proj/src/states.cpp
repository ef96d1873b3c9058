#include "decotime/states.hpp"

#include "decotime/errors.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

namespace decotime {

namespace {

constexpr double kRenormTol = 1e-6;
constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

void check_site(const QubitRegisterState& s, std::uint64_t site)
{
    if (static_cast<double>(site) >= s.n_qubits()) {
        throw UsageError("site " + std::to_string(site) + " out of range for " + std::to_string(s.n_qubits()) + " qubits");
    }
}

// Scales to unit norm; silent within kRenormTol, an error beyond it.
template <class Range>
void normalize(Range& values, const char* what)
{
    double n2 = 0.0;
    for (const auto& v : values) {
        n2 += std::norm(v);
    }
    if (!(n2 > 0.0)) {
        throw ConfigError(std::string(what) + ": cannot normalize a zero vector");
    }
    if (std::abs(n2 - 1.0) > kRenormTol) {
        std::ostringstream o;
        o.precision(10);
        o << what << ": squared norm " << n2 << " deviates from 1 by more than 1e-6";
        throw ConfigError(o.str());
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& v : values) {
        v *= inv;
    }
}

const Bloch& product_site(const QubitRegisterState& s, std::uint64_t i)
{
    const auto& p = s.product_sites();
    return p.size() == 1 ? p.front() : p[static_cast<std::size_t>(i)];
}

double bloch_expect(const Bloch& q, Axis a)
{
    if (a == Axis::X) {
        return 2.0 * std::real(std::conj(q[0]) * q[1]);
    }
    return std::norm(q[1]) - std::norm(q[0]);
}

double zsign(std::uint64_t basis, std::uint64_t site)
{
    return ((basis >> site) & 1U) ? 1.0 : -1.0;
}

// <psi| P |psi> for P a product of X on flip_mask and Z on z_mask.
double sparse_expect(const Amplitudes& amps, std::uint64_t flip_mask, std::uint64_t z_mask)
{
    cplx acc{};
    for (const auto& [b, c] : amps) {
        double sign = 1.0;
        for (std::uint64_t m = z_mask; m != 0; m &= m - 1) {
            sign *= zsign(b, static_cast<std::uint64_t>(std::countr_zero(m)));
        }
        const auto it = amps.find(b ^ flip_mask);
        if (it != amps.end()) {
            acc += std::conj(it->second) * sign * c;
        }
    }
    return acc.real();
}

std::uint64_t bit(std::uint64_t i) { return std::uint64_t{1} << i; }

double structured_single(const QubitRegisterState& s, std::uint64_t site, Axis a)
{
    const double n = s.n_qubits();
    switch (s.tag()) {
    case StateTag::hadamard:
        return a == Axis::X ? 1.0 : 0.0;
    case StateTag::all_zero:
        return a == Axis::X ? 0.0 : -1.0;
    case StateTag::ghz:
        if (n == 1.0) {
            return a == Axis::X ? 1.0 : 0.0;
        }
        return 0.0;
    case StateTag::w:
        return a == Axis::X ? 0.0 : (2.0 - n) / n;
    case StateTag::product:
        return bloch_expect(product_site(s, site), a);
    case StateTag::sparse:
        break;
    }
    throw UsageError("structured_single called on a sparse state");
}

double structured_pair(const QubitRegisterState& s, std::uint64_t i, std::uint64_t j, Axis a, Axis b)
{
    const double n = s.n_qubits();
    switch (s.tag()) {
    case StateTag::hadamard:
    case StateTag::all_zero:
    case StateTag::product:
        return structured_single(s, i, a) * structured_single(s, j, b);
    case StateTag::ghz:
        if (a == Axis::Z && b == Axis::Z) {
            return 1.0;
        }
        if (a == Axis::X && b == Axis::X) {
            return n == 2.0 ? 1.0 : 0.0;
        }
        return 0.0;
    case StateTag::w:
        if (a == Axis::Z && b == Axis::Z) {
            return (n - 4.0) / n;
        }
        if (a == Axis::X && b == Axis::X) {
            return 2.0 / n;
        }
        return 0.0;
    case StateTag::sparse:
        break;
    }
    throw UsageError("structured_pair called on a sparse state");
}

} // namespace

bool QubitRegisterState::is_uniform() const
{
    switch (tag_) {
    case StateTag::hadamard:
    case StateTag::all_zero:
    case StateTag::ghz:
    case StateTag::w:
        return true;
    case StateTag::product:
        return product_.size() == 1;
    case StateTag::sparse:
        return false;
    }
    return false;
}

QubitRegisterState build_state(const StateSpec& spec, double n_qubits)
{
    if (!(n_qubits >= 1.0) || std::floor(n_qubits) != n_qubits) {
        throw ConfigError("state needs a positive integer qubit count");
    }
    QubitRegisterState s;
    s.tag_ = spec.tag;
    s.n_ = n_qubits;
    switch (spec.tag) {
    case StateTag::product: {
        if (spec.product.size() != 1 && static_cast<double>(spec.product.size()) != n_qubits) {
            throw ConfigError("product state needs one Bloch entry or one per site");
        }
        s.product_ = spec.product;
        for (auto& q : s.product_) {
            normalize(q, "product state site");
        }
        break;
    }
    case StateTag::sparse: {
        if (n_qubits > 63.0) {
            throw ConfigError("sparse states are limited to 63 qubits");
        }
        const auto n = static_cast<std::uint64_t>(n_qubits);
        for (const auto& [idx, c] : spec.amplitudes) {
            if (n < 64 && (idx >> n) != 0) {
                throw ConfigError("sparse basis index " + std::to_string(idx) + " is not below 2^" + std::to_string(n));
            }
            if (c != cplx{}) {
                s.amps_.emplace(idx, c);
            }
        }
        std::vector<cplx> vals;
        vals.reserve(s.amps_.size());
        for (const auto& kv : s.amps_) {
            vals.push_back(kv.second);
        }
        normalize(vals, "sparse state");
        std::size_t k = 0;
        for (auto& kv : s.amps_) {
            kv.second = vals[k++];
        }
        break;
    }
    default:
        break;
    }
    return s;
}

QubitRegisterState materialize(const QubitRegisterState& s)
{
    if (!s.is_structured()) {
        return s;
    }
    const double n = s.n_qubits();
    const bool dense = s.tag() == StateTag::hadamard || s.tag() == StateTag::product;
    if (n > (dense ? 20.0 : 63.0)) {
        throw UsageError("materialize: too many qubits for a sparse expansion");
    }
    const auto nq = static_cast<std::uint64_t>(n);
    StateSpec spec;
    spec.tag = StateTag::sparse;
    auto& a = spec.amplitudes;
    switch (s.tag()) {
    case StateTag::hadamard:
    case StateTag::product:
        for (std::uint64_t b = 0; b < bit(nq); ++b) {
            cplx c{1.0};
            for (std::uint64_t i = 0; i < nq; ++i) {
                const Bloch q = s.tag() == StateTag::hadamard ? Bloch{kInvSqrt2, kInvSqrt2} : product_site(s, i);
                c *= q[(b >> i) & 1U];
            }
            if (c != cplx{}) {
                a[b] = c;
            }
        }
        break;
    case StateTag::all_zero:
        a[0] = 1.0;
        break;
    case StateTag::ghz:
        a[0] = kInvSqrt2;
        a[bit(nq) - 1] = kInvSqrt2;
        break;
    case StateTag::w:
        for (std::uint64_t i = 0; i < nq; ++i) {
            a[bit(i)] = 1.0 / std::sqrt(n);
        }
        break;
    case StateTag::sparse:
        break;
    }
    return build_state(spec, n);
}

double expect_pauli(const QubitRegisterState& s, std::uint64_t site, Axis axis)
{
    check_site(s, site);
    if (s.is_structured()) {
        return structured_single(s, site, axis);
    }
    return axis == Axis::X ? sparse_expect(s.amplitudes(), bit(site), 0) : sparse_expect(s.amplitudes(), 0, bit(site));
}

double expect_pauli_pair(const QubitRegisterState& s, std::uint64_t i, std::uint64_t j, Axis a, Axis b)
{
    check_site(s, i);
    check_site(s, j);
    if (i == j) {
        throw UsageError("expect_pauli_pair needs distinct sites; same-site products reduce to one-site operators");
    }
    if (s.is_structured()) {
        return structured_pair(s, i, j, a, b);
    }
    std::uint64_t flip = 0;
    std::uint64_t z = 0;
    (a == Axis::X ? flip : z) |= bit(i);
    (b == Axis::X ? flip : z) |= bit(j);
    return sparse_expect(s.amplitudes(), flip, z);
}

bool is_uncorrelated(const QubitRegisterState& s, double tol)
{
    if (!(tol > 0.0)) {
        throw UsageError("is_uncorrelated: tol must be > 0");
    }
    const double n = s.n_qubits();
    if (n == 1.0) {
        return true;
    }
    switch (s.tag()) {
    case StateTag::hadamard:
    case StateTag::all_zero:
    case StateTag::product:
        return true;
    case StateTag::ghz:
        return n >= 3.0; // <XX> = 0 = <X><X> once no pair of flips closes the two branches
    case StateTag::w:
        return false;    // <XX> = 2/N against <X> = 0
    case StateTag::sparse:
        break;
    }
    if (n > 20.0) {
        throw UsageError("is_uncorrelated: sparse states above 20 qubits need explicit pair sampling");
    }
    const auto nq = static_cast<std::uint64_t>(n);
    std::vector<double> x(nq);
    for (std::uint64_t i = 0; i < nq; ++i) {
        x[i] = expect_pauli(s, i, Axis::X);
    }
    for (std::uint64_t i = 0; i < nq; ++i) {
        for (std::uint64_t j = i + 1; j < nq; ++j) {
            if (std::abs(expect_pauli_pair(s, i, j, Axis::X, Axis::X) - x[i] * x[j]) > tol) {
                return false;
            }
        }
    }
    return true;
}

Amplitudes read_sparse_amplitudes(std::istream& in)
{
    Amplitudes out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) {
            line.erase(h);
        }
        std::istringstream ls(line);
        std::string idx_tok;
        std::string amp_tok;
        if (!(ls >> idx_tok)) {
            continue;
        }
        auto fail = [&](const std::string& why) {
            throw ConfigError("sparse amplitudes line " + std::to_string(lineno) + ": " + why);
        };
        if (!(ls >> amp_tok)) {
            fail("expected 'index re,im'");
        }
        std::string extra;
        if (ls >> extra) {
            fail("unexpected trailing token '" + extra + "'");
        }
        std::uint64_t idx = 0;
        double re = 0.0;
        double im = 0.0;
        try {
            std::size_t used = 0;
            idx = std::stoull(idx_tok, &used);
            if (used != idx_tok.size()) {
                fail("bad index '" + idx_tok + "'");
            }
            const auto comma = amp_tok.find(',');
            const std::string re_s = amp_tok.substr(0, comma);
            re = std::stod(re_s, &used);
            if (used != re_s.size()) {
                fail("bad real part '" + re_s + "'");
            }
            if (comma != std::string::npos) {
                const std::string im_s = amp_tok.substr(comma + 1);
                im = std::stod(im_s, &used);
                if (used != im_s.size()) {
                    fail("bad imaginary part '" + im_s + "'");
                }
            }
        } catch (const std::logic_error&) {
            fail("cannot parse '" + line + "'");
        }
        if (!out.emplace(idx, cplx{re, im}).second) {
            fail("duplicate basis index " + std::to_string(idx));
        }
    }
    return out;
}

Amplitudes read_sparse_amplitudes_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open state file '" + path.string() + "'");
    }
    return read_sparse_amplitudes(in);
}

std::string_view to_string(StateTag t)
{
    switch (t) {
    case StateTag::hadamard: return "hadamard";
    case StateTag::ghz: return "ghz";
    case StateTag::all_zero: return "allzero";
    case StateTag::product: return "product";
    case StateTag::w: return "w";
    case StateTag::sparse: return "sparse";
    }
    return "unknown";
}

CavityMoments cavity_moments(const CavityState& cs)
{
    CavityMoments m;
    switch (cs.kind) {
    case CavityState::Kind::vacuum:
        break;
    case CavityState::Kind::fock:
        m.bdb = cs.n;
        m.bbd = cs.n + 1.0;
        break;
    case CavityState::Kind::coherent:
        m.b = cs.alpha;
        m.bd = std::conj(cs.alpha);
        m.bdb = std::norm(cs.alpha);
        m.bbd = m.bdb + 1.0;
        m.b2 = cs.alpha * cs.alpha;
        m.bd2 = std::conj(m.b2);
        break;
    }
    return m;
}

} // namespace decotime
