// decotime command-line front end.
#include "decotime/errors.hpp"
#include "decotime/model.hpp"
#include "decotime/modesums.hpp"
#include "decotime/oracle.hpp"
#include "decotime/states.hpp"
#include "decotime/tau2.hpp"
#include "decotime/vibrations.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#ifndef DECOTIME_VERSION
#define DECOTIME_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace decotime;

namespace {

enum Exit { ok = 0, regression = 1, usage = 2, numeric = 3 };

struct Manifest {
    std::string command;
    std::string config;
    std::string hash;
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    // written next to the first output as <output>.manifest.json
    void write() const
    {
        if (outputs.empty()) {
            return;
        }
        nlohmann::json j;
        j["command"] = command;
        j["config_path"] = config;
        j["parameter_hash"] = hash;
        j["output_paths"] = outputs;
        j["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        j["library_version"] = DECOTIME_VERSION;
        std::ofstream out(outputs.front() + ".manifest.json");
        out << j.dump(2) << '\n';
        if (!out) {
            throw ConfigError("cannot write manifest for " + outputs.front());
        }
    }
};

void write_file(const std::string& path, const std::string& text)
{
    const auto parent = std::filesystem::path(path).parent_path();
    std::error_code ec;
    if (!parent.empty()) {
        std::filesystem::create_directories(parent, ec);
    }
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw ConfigError("cannot write " + path);
    }
}

std::string resolve_config(const std::string& flag)
{
    if (!flag.empty()) {
        return flag;
    }
    if (const char* env = std::getenv("DECOTIME_CONFIG"); env != nullptr && *env != '\0') {
        return env;
    }
    throw UsageError("no config given (pass --config or set DECOTIME_CONFIG)");
}

SumMethod parse_method(const std::string& s)
{
    if (s == "auto") {
        return SumMethod::automatic;
    }
    if (s == "quadrature") {
        return SumMethod::quadrature;
    }
    if (s == "closed") {
        return SumMethod::closed_form;
    }
    throw UsageError("unknown method '" + s + "'");
}

StateSpec parse_state(const std::string& name, const std::string& file)
{
    if (name == "hadamard") {
        return StateSpec::hadamard();
    }
    if (name == "ghz") {
        return StateSpec::ghz();
    }
    if (name == "allzero") {
        return StateSpec::all_zero();
    }
    if (name == "w") {
        return StateSpec::w();
    }
    if (name == "file") {
        if (file.empty()) {
            throw UsageError("--state file needs --state-file");
        }
        return {StateTag::sparse, {}, read_sparse_amplitudes_file(file)};
    }
    throw UsageError("unknown state '" + name + "'");
}

// --case maps onto a closed-form class; "vacuum" picks the class that matches the state.
std::optional<StateClass> parse_case(const std::string& c, const QubitRegisterState& st)
{
    if (c == "general") {
        return std::nullopt;
    }
    if (c == "se") {
        return StateClass::se_stationary;
    }
    if (c == "no-se") {
        return StateClass::no_se;
    }
    if (c == "vacuum") {
        if (st.tag() == StateTag::hadamard) {
            return StateClass::hadamard;
        }
        if (st.tag() == StateTag::ghz && st.n_qubits() >= 3.0) {
            return StateClass::ghz;
        }
        return StateClass::correlated_vacuum;
    }
    return state_class_from_string(c);
}

std::vector<double> parse_list(const std::string& text, const std::string& what)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw UsageError(what + ": cannot parse '" + item + "'");
        }
    }
    return out;
}

Model load_with_n(const std::string& path, double n)
{
    Model m = load_model_file(path);
    if (n > 0.0) {
        if (m.geometry.kind != GeometryKind::chain) {
            throw UsageError("--n needs a chain geometry (geometry.count)");
        }
        m.geometry.count = n;
    }
    return m;
}

struct Tau2Args {
    std::string config, state = "hadamard", state_file, kase = "vacuum", out, method = "auto";
    std::optional<double> temp;
    double n = 0.0;
};

int cmd_tau2(const Tau2Args& a)
{
    Manifest man;
    man.command = "tau2";
    man.config = resolve_config(a.config);
    const ValidatedModel vm = validate_model(load_with_n(man.config, a.n));
    man.hash = parameter_hash(vm.model());
    for (const auto& w : vm.warnings()) {
        std::cerr << "warning: " << w << '\n';
    }
    const double temp = a.temp ? *a.temp : vm->se_bath.temperature;
    const auto state = build_state(parse_state(a.state, a.state_file), vm->geometry.n_sites());
    const auto cls = parse_case(a.kase, state);
    const SumMethod method = parse_method(a.method);

    DecoherenceReport r;
    if (cls) {
        ClosedFormOptions opt;
        opt.method = method;
        r = tau2_closed_form(*cls, state, vm, nullptr, temp, opt);
    } else {
        if (!vm->geometry.materializable()) {
            throw UsageError("--case general needs a materializable geometry");
        }
        std::shared_ptr<const NormalModes> modes;
        if (vm->vibrations.enabled) {
            modes = std::make_shared<NormalModes>(solve_normal_modes(vm));
        }
        r = tau2_general(state, CavityState::vacuum(), assemble_interaction_terms(vm, modes, method), temp);
    }
    for (const auto& w : r.warnings) {
        std::cerr << "warning: " << w << '\n';
    }
    if (!a.out.empty()) {
        write_file(a.out, report_to_json(r).dump(2) + "\n");
        man.outputs.push_back(a.out);
        man.write();
    }
    std::cout << "tau2 = " << format_number(r.tau2) << " s\n";
    return ok;
}

struct SweepArgs {
    std::string config, state = "hadamard", kase = "vacuum", n_list, out, method = "auto";
    double scale_exponent = 0.0;
};

int cmd_sweep(const SweepArgs& a)
{
    Manifest man;
    man.command = "sweep";
    man.config = resolve_config(a.config);
    const auto ns = parse_list(a.n_list, "--n-list");
    if (ns.size() < 3) {
        throw UsageError("--n-list needs at least 3 values");
    }
    const Model tmpl = load_model_file(man.config);
    man.hash = parameter_hash(tmpl);
    const StateSpec spec = parse_state(a.state, "");
    // the class is fixed by the smallest N
    const auto probe = build_state(spec, ns.front());
    const auto cls = parse_case(a.kase, probe);
    if (!cls) {
        throw UsageError("sweeps use the closed forms; --case general is not available");
    }
    CouplingScale scale;
    if (a.scale_exponent != 0.0) {
        const double n0 = ns.front();
        const double s = a.scale_exponent;
        scale = [n0, s](double n) { return std::pow(n / n0, s); };
    }
    ClosedFormOptions opt;
    opt.method = parse_method(a.method);
    const SweepResult res = scaling_sweep(tmpl, *cls, spec, ns, scale, opt);
    const std::string csv = sweep_to_csv(res);
    if (!a.out.empty()) {
        write_file(a.out, csv);
        man.outputs.push_back(a.out);
        man.write();
    } else {
        std::cout << csv;
    }
    char line[64];
    std::snprintf(line, sizeof line, "slope = %.6f", res.slope);
    std::cout << line << '\n';
    return ok;
}

struct ValidateArgs {
    std::string suite = "quick", out;
    bool negative_control = false;
};

int cmd_validate(const ValidateArgs& a)
{
    if (a.suite != "quick" && a.suite != "full") {
        throw UsageError("--suite must be quick or full");
    }
    Manifest man;
    man.command = "validate";
    auto specs = regression_suite(a.suite == "full");
    if (a.negative_control) {
        specs.push_back(negative_control_spec());
    }
    const auto results = run_suite(specs);
    bool all = true;
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : results) {
        all = all && r.passed;
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "  engine=" << format_number(r.tau2_engine)
                  << "  oracle=" << format_number(r.tau2_oracle) << "  deviation=" << format_number(r.deviation);
        if (!r.passed) {
            std::cout << "  (" << r.failure << ")";
        }
        std::cout << '\n';
        auto e = validation_to_json(r);
        e.erase("seconds");
        j.push_back(e);
    }
    if (!a.out.empty()) {
        write_file(a.out, j.dump(2) + "\n");
        man.outputs.push_back(a.out);
        man.write();
    }
    std::cout << (all ? "all specs passed" : "regression failure") << '\n';
    return all ? ok : regression;
}

struct ModesumArgs {
    std::string config, which = "diagonal", dij, method = "auto";
    std::optional<double> temp;
};

int cmd_modesum(const ModesumArgs& a)
{
    const ValidatedModel vm = validate_model(load_model_file(resolve_config(a.config)));
    const double temp = a.temp ? *a.temp : vm->se_bath.temperature;
    const SumMethod method = parse_method(a.method);
    const Vec3 axis = vm->geometry.kind == GeometryKind::chain ? Vec3(vm->geometry.axis.normalized())
                      : vm->geometry.size() >= 2 ? Vec3((vm->geometry.position(1) - vm->geometry.position(0)).normalized())
                                                 : Vec3::UnitX();
    const auto print = [](const std::string& label, const SpectralSumResult& r) {
        std::cout << label << " value = " << format_number(r.value) << " s^-2  method = " << to_string(r.method)
                  << "  est_error = " << format_number(r.est_abs_error) << '\n';
    };
    const auto diag = se_pair_sum(vm.model(), Vec3::Zero(), temp, method);
    if (a.which == "diagonal") {
        print("diagonal", diag);
        std::cout << "sqrt(value) = " << format_number(std::sqrt(diag.value)) << " s^-1\n";
        return ok;
    }
    if (a.which != "cross" && a.which != "F") {
        throw UsageError("--which must be diagonal, cross or F");
    }
    std::vector<double> ds;
    if (a.dij.empty()) {
        if (vm->geometry.size() < 2) {
            throw UsageError("--dij is required with fewer than two sites");
        }
        ds.push_back((vm->geometry.position(1) - vm->geometry.position(0)).norm());
    } else {
        ds = parse_list(a.dij, "--dij");
    }
    const double wc = vm->se_bath.cutoff;
    const double c = vm->constants.c;
    const Vec3 dh = dipole_direction(vm.model());
    const double c2 = std::pow(axis.dot(dh), 2);
    std::vector<double> xs, fs;
    for (double d : ds) {
        if (!(d > 0.0)) {
            throw UsageError("--dij values must be positive");
        }
        const auto cross = se_pair_sum(vm.model(), Vec3(d * axis), temp, method);
        const double x = wc * d / c;
        if (a.which == "cross") {
            print("cross d=" + format_number(d), cross);
            std::cout << "ratio to diagonal = " << format_number(cross.value / diag.value) << '\n';
        } else {
            const double f = extract_F(vm, x, c2, method);
            std::cout << "F x=" << format_number(x) << " value = " << format_number(f) << '\n';
            xs.push_back(x);
            fs.push_back(std::abs(f));
        }
    }
    if (xs.size() >= 2) {
        for (std::size_t k = 1; k < xs.size(); ++k) {
            const double slope = std::log(fs[k] / fs[k - 1]) / std::log(xs[k] / xs[k - 1]);
            std::cout << "local slope [" << format_number(xs[k - 1]) << ", " << format_number(xs[k])
                      << "] = " << format_number(slope) << '\n';
        }
    }
    return ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"decotime: short-time decoherence timescales of qubit arrays"};
    app.require_subcommand(1);
    app.set_version_flag("--version", DECOTIME_VERSION);

    Tau2Args t;
    auto* tau2 = app.add_subcommand("tau2", "tau2 for one configuration and initial state");
    tau2->add_option("config,--config", t.config, "config file (default: $DECOTIME_CONFIG)");
    tau2->add_option("--state", t.state, "hadamard | ghz | allzero | w | file");
    tau2->add_option("--state-file", t.state_file, "sparse amplitudes for --state file");
    tau2->add_option("--case", t.kase, "general | se | vacuum | no-se, or a closed-form class name");
    tau2->add_option("--temp", t.temp, "temperature in K (default: bath.se.temperature)");
    tau2->add_option("--n", t.n, "override geometry.count");
    tau2->add_option("--method", t.method, "auto | quadrature | closed");
    tau2->add_option("--out", t.out, "write the report as JSON");

    SweepArgs s;
    auto* sweep = app.add_subcommand("sweep", "tau2 against N and the fitted log-log slope");
    sweep->add_option("config,--config", s.config, "config file (default: $DECOTIME_CONFIG)");
    sweep->add_option("--state", s.state, "hadamard | ghz | allzero | w");
    sweep->add_option("--case", s.kase, "se | vacuum | no-se, or a closed-form class name");
    sweep->add_option("--n-list", s.n_list, "comma-separated N values")->required();
    sweep->add_option("--scale-exponent", s.scale_exponent, "couplings scale as (N/N0)^s");
    sweep->add_option("--method", s.method, "auto | quadrature | closed");
    sweep->add_option("--out", s.out, "CSV output (default: standard output)");

    ValidateArgs v;
    std::string ignored_config;
    auto* validate = app.add_subcommand("validate", "engine against exact evolution on small systems");
    validate->add_option("config,--config", ignored_config, "accepted for symmetry; the suite is self-contained");
    validate->add_option("--suite", v.suite, "quick | full");
    validate->add_flag("--negative-control", v.negative_control, "append a fixture with a corrupted coupling sign");
    validate->add_option("--out", v.out, "write per-spec results as JSON");

    ModesumArgs m;
    auto* modesum = app.add_subcommand("modesum", "spontaneous-emission mode sums");
    modesum->add_option("config,--config", m.config, "config file (default: $DECOTIME_CONFIG)");
    modesum->add_option("--which", m.which, "diagonal | cross | F");
    modesum->add_option("--dij", m.dij, "separation(s) in m, comma-separated");
    modesum->add_option("--temp", m.temp, "temperature in K (default: bath.se.temperature)");
    modesum->add_option("--method", m.method, "auto | quadrature | closed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage;
    }

    try {
        if (tau2->parsed()) {
            return cmd_tau2(t);
        }
        if (sweep->parsed()) {
            return cmd_sweep(s);
        }
        if (validate->parsed()) {
            return cmd_validate(v);
        }
        if (modesum->parsed()) {
            return cmd_modesum(m);
        }
    } catch (const ValidationError& e) {
        std::cerr << "config error:\n";
        for (const auto& f : e.failures()) {
            std::cerr << "  " << f << '\n';
        }
        return usage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return usage;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return usage;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return numeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return numeric;
    }
    return usage;
}
