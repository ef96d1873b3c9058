#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace decotime {

using cplx = std::complex<double>;

// sigma_Z = |1><1| - |0><0|; bit i of a basis index is the state of qubit i.
enum class Axis { X, Z };

enum class StateTag { hadamard, ghz, all_zero, product, w, sparse };

using Amplitudes = std::unordered_map<std::uint64_t, cplx>;

/// Amplitudes (c0, c1) of one qubit in a product state.
using Bloch = std::array<cplx, 2>;

struct StateSpec {
    StateTag tag = StateTag::hadamard;
    std::vector<Bloch> product; // one entry per site, or a single entry applied to every site
    Amplitudes amplitudes;      // sparse only

    static StateSpec hadamard() { return {StateTag::hadamard, {}, {}}; }
    static StateSpec ghz() { return {StateTag::ghz, {}, {}}; }
    static StateSpec all_zero() { return {StateTag::all_zero, {}, {}}; }
    static StateSpec w() { return {StateTag::w, {}, {}}; }
};

/// Pure N-qubit state. Structured tags keep N symbolic (it may exceed 2^64),
/// sparse states hold at most 63 qubits.
class QubitRegisterState {
public:
    StateTag tag() const noexcept { return tag_; }
    double n_qubits() const noexcept { return n_; }
    bool is_structured() const noexcept { return tag_ != StateTag::sparse; }
    const Amplitudes& amplitudes() const noexcept { return amps_; }
    const std::vector<Bloch>& product_sites() const noexcept { return product_; }

    /// True when every site carries the same one- and two-site expectations.
    bool is_uniform() const;

private:
    friend QubitRegisterState build_state(const StateSpec& spec, double n_qubits);
    QubitRegisterState() = default;

    StateTag tag_ = StateTag::hadamard;
    double n_ = 0.0;
    std::vector<Bloch> product_;
    Amplitudes amps_;
};

QubitRegisterState build_state(const StateSpec& spec, double n_qubits);

/// Expands a structured state into sparse amplitudes. Hadamard and product
/// states are limited to 20 qubits, the others to 63.
QubitRegisterState materialize(const QubitRegisterState& s);

double expect_pauli(const QubitRegisterState& s, std::uint64_t site, Axis axis);

/// <sigma_A^i sigma_B^j> for i != j.
double expect_pauli_pair(const QubitRegisterState& s, std::uint64_t i, std::uint64_t j, Axis a, Axis b);

/// sigma_X factorization over all pairs. Sparse states above 20 qubits are refused.
bool is_uncorrelated(const QubitRegisterState& s, double tol = 1e-12);

/// Lines of "index re,im"; '#' starts a comment.
Amplitudes read_sparse_amplitudes(std::istream& in);
Amplitudes read_sparse_amplitudes_file(const std::filesystem::path& path);

std::string_view to_string(StateTag t);

// ---- cavity ancilla ------------------------------------------------------

struct CavityState {
    enum class Kind { vacuum, fock, coherent };
    Kind kind = Kind::vacuum;
    unsigned n = 0;
    cplx alpha{};

    static CavityState vacuum() { return {}; }
    static CavityState fock(unsigned n) { return {Kind::fock, n, {}}; }
    static CavityState coherent(cplx a) { return {Kind::coherent, 0, a}; }
};

struct CavityMoments {
    cplx b, bd;
    double bdb = 0.0; // <b^dag b>
    double bbd = 1.0; // <b b^dag>
    cplx b2, bd2;
};

CavityMoments cavity_moments(const CavityState& cs);

} // namespace decotime
