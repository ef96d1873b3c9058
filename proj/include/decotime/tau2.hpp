#pragma once

#include "decotime/model.hpp"
#include "decotime/modesums.hpp"
#include "decotime/states.hpp"
#include "decotime/vibrations.hpp"

#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace decotime {

enum class TermLabel {
    se_dipole,
    cavity_decay_u,
    cavity_decay_w,
    ld_se,
    ld_cavity,
    ld_classical,
    ld_magnetic,
    gating_rabi,
    gating_zeeman,
};

std::string_view to_string(TermLabel l);
inline constexpr std::size_t kNoSite = std::numeric_limits<std::size_t>::max();

enum class QubitOp { identity, x, z };
enum class CavityOp { one, b, bdag };

struct SystemOperator {
    std::size_t site = kNoSite; // kNoSite when the qubit part is the identity
    QubitOp qubit = QubitOp::identity;
    CavityOp cavity = CavityOp::one;
};

enum class BathKind { none, se, ld_se, cavity_u, cavity_w, vibration };

/// Bath factor of one interaction term.
///  se        sum_k g_k^i a_k + h.c. on `site`
///  ld_se     sum_kK (n_kK^i a_k + h.c.)(A_K + A_K^dag) on `site`
///  cavity_u  sum_k u_k b_k, or its adjoint
///  cavity_w  sum_k w_k b_k^dag, or its adjoint
///  vibration sum_K c_K (A_K + A_K^dag). Continuum baths use
///            c_K = coefficient * x0_K (direction . S_{site,:;K}); discrete baths
///            read row `table` of their coefficient table. `adjoint` conjugates c_K.
struct BathOperator {
    BathKind kind = BathKind::none;
    std::size_t site = kNoSite;
    bool adjoint = false;
    cplx coefficient{1.0, 0.0};
    Vec3 direction = Vec3::Zero();
    std::size_t table = kNoSite;
};

struct InteractionTerm {
    TermLabel label = TermLabel::se_dipole;
    SystemOperator op;
    BathOperator bath;
};

/// Thermal second moments <B_a B_b> of the (independent, Gaussian) baths at a fixed temperature.
class CorrelationTable {
public:
    virtual ~CorrelationTable() = default;
    virtual cplx second_moment(const BathOperator& a, const BathOperator& b) const = 0;
};

class BathCorrelator {
public:
    virtual ~BathCorrelator() = default;
    virtual std::unique_ptr<CorrelationTable> at(double temperature) const = 0;
};

/// Continuum SE and cavity-decay baths from the model, vibrational modes from `modes`.
class ContinuumBath final : public BathCorrelator {
public:
    ContinuumBath(std::shared_ptr<const ValidatedModel> model, std::shared_ptr<const NormalModes> modes,
                  SumMethod method = SumMethod::automatic);
    std::unique_ptr<CorrelationTable> at(double temperature) const override;

    const ValidatedModel& model() const { return *model_; }
    const NormalModes* modes() const { return modes_.get(); }

private:
    std::shared_ptr<const ValidatedModel> model_;
    std::shared_ptr<const NormalModes> modes_;
    SumMethod method_;
};

/// Explicit finite mode sets, as used by the exact oracle.
struct DiscreteModes {
    struct SEMode {
        double omega = 0.0;
        std::vector<cplx> g; // per site
    };
    struct DecayMode {
        double xi = 0.0;
        cplx u, w;
    };
    std::vector<SEMode> se;
    std::vector<DecayMode> decay;
    std::vector<double> vib_frequency;
    std::vector<double> vib_occupation;    // Nbar_K, used when non-negative; else Planck at T
    std::vector<std::vector<cplx>> vib_table; // rows referenced by BathOperator::table
    // n[site][k][K] for the Lamb-Dicke SE coupling; empty when absent
    std::vector<std::vector<std::vector<cplx>>> n;
    std::vector<double> se_occupation;      // optional overrides of the Planck occupations
    std::vector<double> decay_occupation;
};

class DiscreteBath final : public BathCorrelator {
public:
    explicit DiscreteBath(DiscreteModes modes) : modes_(std::move(modes)) {}
    std::unique_ptr<CorrelationTable> at(double temperature) const override;
    const DiscreteModes& modes() const { return modes_; }

private:
    DiscreteModes modes_;
};

struct TermList {
    std::vector<InteractionTerm> terms;
    std::shared_ptr<const BathCorrelator> baths;
    std::size_t n_sites = 0;

    std::size_t count(TermLabel l) const;
    /// Labels with at least one term that couples to a bath.
    std::vector<TermLabel> bath_families() const;
};

/// Builds V_I(0) for a materializable model. `modes` may be null when vibrations are off.
TermList assemble_interaction_terms(const ValidatedModel& model, std::shared_ptr<const NormalModes> modes,
                                    SumMethod method = SumMethod::automatic);

enum class StateClass { general, se_stationary, correlated_vacuum, uncorrelated_vacuum, hadamard, ghz, no_se };

std::string_view to_string(StateClass c);
StateClass state_class_from_string(std::string_view s);

struct DecoherenceReport {
    double tau2 = std::numeric_limits<double>::infinity(); // s
    double inv_half_tau2_sq = 0.0;                         // 1/(2 tau2^2), 1/s^2
    double tau1_inverse = 0.0;                             // identically zero for thermal baths
    std::map<std::string, double> breakdown;               // label -> 1/s^2
    double cross_site_fraction = 0.0;
    std::map<std::string, double> cross_site_fraction_by_label;
    StateClass state_class = StateClass::general;
    std::string state;
    double n_qubits = 0.0;
    double temperature = 0.0;
    std::string method;
    std::optional<double> approximation; // N eta^2 g_b^2 for the Hadamard, GHZ and no-SE classes
    std::vector<std::string> warnings;
};

/// Sets tau2 from inv_half_tau2_sq.
void finalize(DecoherenceReport& r);

/// <<Delta V_I(0)^2>_S>_BC / hbar^2 for a pure qubit state times a cavity state.
DecoherenceReport tau2_general(const QubitRegisterState& state, const CavityState& cavity, const TermList& terms,
                               double temperature);

struct ClosedFormOptions {
    SumMethod method = SumMethod::automatic;
    /// Uniform O(1) evaluation is used whenever it is exact; force_pairs disables it.
    bool force_pairs = false;
};

/// Published special-case formulas. Every class except se_stationary assumes T = 0 and a vacuum cavity.
DecoherenceReport tau2_closed_form(StateClass cls, const QubitRegisterState& state, const ValidatedModel& model,
                                   const NormalModes* modes, double temperature, const ClosedFormOptions& opt = {});

enum class Regime { independent, collective, intermediate };
std::string_view to_string(Regime r);

struct RegimeThresholds {
    double high = 10.0;
    double low = 0.1;
};

Regime classify_decoherence(const ValidatedModel& model, std::size_t i, std::size_t j,
                            const RegimeThresholds& th = {});
Regime classify_decoherence(double delta_k, double mean_k, double d, const RegimeThresholds& th = {});

/// 1 - t^2 / (2 tau2^2). `warning` is set when 1 - F exceeds 0.1.
double fidelity_short_time(const DecoherenceReport& r, double t, bool* warning = nullptr);

struct SweepRow {
    double n = 0.0;
    DecoherenceReport report;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double slope = 0.0;     // d log tau2 / d log N
    double intercept = 0.0;
};

/// Multiplies every coupling constant by scale(N) before evaluating point N.
using CouplingScale = std::function<double(double n)>;

/// Re-evaluates the closed form for each N with the template geometry extended to N sites.
SweepResult scaling_sweep(const Model& model_template, StateClass cls, const StateSpec& state,
                          const std::vector<double>& n_list, const CouplingScale& scale = {},
                          const ClosedFormOptions& opt = {});

nlohmann::json report_to_json(const DecoherenceReport& r);
std::string sweep_to_csv(const SweepResult& s);

/// Fixed 17-significant-digit rendering used by every artifact writer.
std::string format_number(double v);

} // namespace decotime
