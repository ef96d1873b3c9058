// Config document parsing and serialization for Model.
#include "decotime/errors.hpp"
#include "decotime/model.hpp"
#include "decotime/vibrations.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace decotime {
namespace {

struct Entry {
    std::string value;
    int line = 0;
};

struct Section {
    int line = 0;
    std::map<std::string, Entry> entries;
};

std::string_view trim(std::string_view s)
{
    const auto* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::string_view strip_comment(std::string_view s)
{
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') {
            quoted = !quoted;
        } else if (!quoted && (s[i] == '#' || s[i] == ';')) {
            return s.substr(0, i);
        }
    }
    return s;
}

[[noreturn]] void fail_at(int line, const std::string& what)
{
    throw ConfigError("line " + std::to_string(line) + ": " + what);
}

std::map<std::string, Section> parse_document(std::string_view text)
{
    std::map<std::string, Section> doc;
    Section* current = nullptr;
    std::string current_name;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        auto line = trim(strip_comment(raw));
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[' && line.find('=') == std::string_view::npos) {
            if (line.back() != ']') {
                fail_at(line_no, "unterminated section header");
            }
            auto name = trim(line.substr(1, line.size() - 2));
            if (name.empty()) {
                fail_at(line_no, "empty section name");
            }
            for (char ch : name) {
                if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.' || ch == '-')) {
                    fail_at(line_no, "invalid character in section name '" + std::string(name) + "'");
                }
            }
            current_name = std::string(name);
            if (doc.count(current_name)) {
                fail_at(line_no, "duplicate section [" + current_name + "]");
            }
            current = &doc[current_name];
            current->line = line_no;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            fail_at(line_no, "expected 'key = value'");
        }
        if (current == nullptr) {
            fail_at(line_no, "key outside of any [section]");
        }
        const std::string key{trim(line.substr(0, eq))};
        std::string value{trim(line.substr(eq + 1))};
        if (key.empty()) {
            fail_at(line_no, "empty key in [" + current_name + "]");
        }
        const int key_line = line_no;
        // Bracketed lists may span several lines.
        if (!value.empty() && value.front() == '[') {
            while (value.find(']') == std::string::npos) {
                if (!std::getline(in, raw)) {
                    fail_at(key_line, "unterminated list for '" + current_name + "." + key + "'");
                }
                ++line_no;
                value += ' ';
                value += trim(strip_comment(raw));
            }
            if (trim(std::string_view(value).substr(value.find(']') + 1)).size() != 0) {
                fail_at(line_no, "trailing characters after list for '" + current_name + "." + key + "'");
            }
        }
        if (value.empty()) {
            fail_at(key_line, "missing value for '" + current_name + "." + key + "'");
        }
        if (current->entries.count(key)) {
            fail_at(key_line, "duplicate key '" + current_name + "." + key + "'");
        }
        current->entries[key] = Entry{value, key_line};
    }
    return doc;
}

double parse_number(std::string_view s, int line, const std::string& name)
{
    s = trim(s);
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        fail_at(line, "'" + name + "' expects a number, got '" + std::string(s) + "'");
    }
    return v;
}

/// Typed access to one section; records which keys were consumed.
class SectionReader {
public:
    SectionReader(std::string name, const Section* sec) : name_(std::move(name)), sec_(sec) {}

    bool present() const { return sec_ != nullptr; }
    bool has(const std::string& key) const { return sec_ && sec_->entries.count(key); }

    const Entry& entry(const std::string& key)
    {
        if (!has(key)) {
            throw ConfigError("missing required key '" + full(key) + "'");
        }
        used_.insert(key);
        return sec_->entries.at(key);
    }

    double number(const std::string& key) { const auto& e = entry(key); return parse_number(e.value, e.line, full(key)); }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

    std::vector<double> list(const std::string& key)
    {
        const auto& e = entry(key);
        std::string_view v = e.value;
        if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
            fail_at(e.line, "'" + full(key) + "' expects a bracketed list");
        }
        v = trim(v.substr(1, v.size() - 2));
        std::vector<double> out;
        while (!v.empty()) {
            const auto comma = v.find(',');
            out.push_back(parse_number(v.substr(0, comma), e.line, full(key)));
            if (comma == std::string_view::npos) {
                break;
            }
            v = trim(v.substr(comma + 1));
            if (v.empty()) {
                fail_at(e.line, "trailing comma in '" + full(key) + "'");
            }
        }
        return out;
    }

    Vec3 vec3(const std::string& key)
    {
        const auto l = list(key);
        if (l.size() != 3) {
            fail_at(sec_->entries.at(key).line, "'" + full(key) + "' expects 3 components");
        }
        return Vec3(l[0], l[1], l[2]);
    }
    Vec3 vec3(const std::string& key, const Vec3& fallback) { return has(key) ? vec3(key) : fallback; }

    std::vector<Vec3> vec3_list(const std::string& key)
    {
        const auto l = list(key);
        if (l.size() % 3 != 0) {
            fail_at(sec_->entries.at(key).line, "'" + full(key) + "' length must be a multiple of 3");
        }
        std::vector<Vec3> out;
        for (std::size_t i = 0; i < l.size(); i += 3) {
            out.emplace_back(l[i], l[i + 1], l[i + 2]);
        }
        return out;
    }

    std::string word(const std::string& key)
    {
        const auto& e = entry(key);
        std::string v = e.value;
        if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
            return v.substr(1, v.size() - 2);
        }
        return v;
    }
    std::string word(const std::string& key, const std::string& fallback) { return has(key) ? word(key) : fallback; }

    bool boolean(const std::string& key, bool fallback)
    {
        if (!has(key)) {
            return fallback;
        }
        const auto w = word(key);
        if (w == "true") {
            return true;
        }
        if (w == "false") {
            return false;
        }
        fail_at(sec_->entries.at(key).line, "'" + full(key) + "' expects true or false");
    }

    int line_of(const std::string& key) const { return sec_->entries.at(key).line; }

    void reject_unknown() const
    {
        if (!sec_) {
            return;
        }
        for (const auto& [k, e] : sec_->entries) {
            if (!used_.count(k)) {
                fail_at(e.line, "unknown key '" + full(k) + "'");
            }
        }
    }

private:
    std::string full(const std::string& key) const { return name_ + "." + key; }

    std::string name_;
    const Section* sec_;
    std::set<std::string> used_;
};

SpectralProfile read_profile(SectionReader& r, const std::string& prefix)
{
    SpectralProfile p;
    const auto kind = r.word(prefix + "_profile", "zero");
    if (kind == "zero") {
        p.kind = ProfileKind::zero;
    } else if (kind == "flat") {
        p.kind = ProfileKind::flat;
    } else if (kind == "power") {
        p.kind = ProfileKind::power;
    } else {
        fail_at(r.line_of(prefix + "_profile"), "unknown profile '" + kind + "' (zero, flat, power)");
    }
    p.amplitude = r.number(prefix + "_amplitude", 0.0);
    p.exponent = r.number(prefix + "_exponent", 0.0);
    return p;
}

Eigen::MatrixXd read_matrix_text(std::istream& in, const std::string& origin)
{
    long n = 0;
    if (!(in >> n) || n <= 0) {
        throw ConfigError(origin + ": expected a positive dimension header");
    }
    Eigen::MatrixXd m(n, n);
    for (long i = 0; i < n; ++i) {
        for (long j = 0; j < n; ++j) {
            if (!(in >> m(i, j))) {
                throw ConfigError(origin + ": expected " + std::to_string(n * n) + " matrix entries");
            }
        }
    }
    double extra = 0.0;
    if (in >> extra) {
        throw ConfigError(origin + ": trailing data after " + std::to_string(n * n) + " entries");
    }
    return m;
}

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_list(const std::vector<double>& v)
{
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? ", " : "") + fmt(v[i]);
    }
    return s + "]";
}

std::string fmt_vec(const Vec3& v) { return fmt_list({v.x(), v.y(), v.z()}); }

std::string fmt_vec_list(const std::vector<Vec3>& vs)
{
    std::vector<double> flat;
    for (const auto& v : vs) {
        flat.insert(flat.end(), {v.x(), v.y(), v.z()});
    }
    return fmt_list(flat);
}

std::string_view to_string(ProfileKind k)
{
    switch (k) {
    case ProfileKind::zero: return "zero";
    case ProfileKind::flat: return "flat";
    case ProfileKind::power: return "power";
    }
    return "zero";
}

} // namespace

Eigen::MatrixXd read_coupling_matrix_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open coupling matrix file '" + path.string() + "'");
    }
    return read_matrix_text(in, path.string());
}

std::string_view to_string(Topology t)
{
    switch (t) {
    case Topology::independent: return "independent";
    case Topology::chain1d: return "chain";
    case Topology::custom: return "custom";
    }
    return "independent";
}

std::string_view to_string(MeanStrategy s)
{
    return s == MeanStrategy::mean_inverse ? "mean-inverse" : "inverse-mean";
}

Model load_model(std::string_view text, const std::filesystem::path& base_dir)
{
    const auto doc = parse_document(text);
    static const std::set<std::string> known = {
        "qubits", "geometry", "cavity", "bath.se", "bath.cavity_decay", "gating", "vibrations"};
    for (const auto& [name, sec] : doc) {
        if (!known.count(name)) {
            fail_at(sec.line, "unknown section [" + name + "]");
        }
    }
    auto reader = [&](const std::string& name) {
        const auto it = doc.find(name);
        return SectionReader(name, it == doc.end() ? nullptr : &it->second);
    };

    Model m;

    auto q = reader("qubits");
    if (!q.present()) {
        throw ConfigError("missing required section [qubits]");
    }
    m.qubits.omega0 = q.number("omega0");
    m.qubits.gamma_se = q.number("gamma_se", 0.0);
    m.qubits.dipole = q.vec3("dipole", Vec3::Zero());
    m.qubits.mass = q.number("mass", 0.0);
    m.qubits.moment0 = q.vec3("moment0", Vec3::Zero());
    m.qubits.moment1 = q.vec3("moment1", Vec3::Zero());
    q.reject_unknown();

    auto g = reader("geometry");
    if (!g.present()) {
        throw ConfigError("missing required section [geometry]");
    }
    if (g.has("positions")) {
        m.geometry.kind = GeometryKind::explicit_positions;
        m.geometry.positions = g.vec3_list("positions");
        m.geometry.count = static_cast<double>(m.geometry.positions.size());
    } else if (g.has("count")) {
        m.geometry.kind = GeometryKind::chain;
        m.geometry.count = g.number("count");
        m.geometry.spacing = g.number("spacing");
        m.geometry.axis = g.vec3("axis", Vec3::UnitX());
    } else {
        throw ConfigError("missing required key 'geometry.positions' (or 'geometry.count')");
    }
    g.reject_unknown();

    if (auto c = reader("cavity"); c.present()) {
        m.cavity.enabled = c.boolean("enabled", true);
        m.cavity.omega_b = c.number("omega_b");
        m.cavity.wavevector = c.vec3("wavevector", Vec3::Zero());
        m.cavity.polarization = c.vec3("polarization", Vec3::UnitZ());
        if (c.has("mode_volume") && c.has("vacuum_rabi")) {
            fail_at(c.line_of("vacuum_rabi"), "give either cavity.mode_volume or cavity.vacuum_rabi, not both");
        }
        if (c.has("vacuum_rabi")) {
            const double gb = c.number("vacuum_rabi");
            const double d2 = m.qubits.dipole.squaredNorm();
            if (gb <= 0.0 || d2 == 0.0) {
                fail_at(c.line_of("vacuum_rabi"), "cavity.vacuum_rabi needs a positive value and a nonzero qubits.dipole");
            }
            m.cavity.mode_volume = m.cavity.omega_b * d2 / (2.0 * m.constants.eps0 * m.constants.hbar * gb * gb);
        } else {
            m.cavity.mode_volume = c.number("mode_volume");
        }
        c.reject_unknown();
    }

    if (auto s = reader("bath.se"); s.present()) {
        m.se_bath.cutoff = s.number("cutoff", m.se_bath.cutoff);
        m.se_bath.temperature = s.number("temperature", 0.0);
        m.se_bath.bandwidth_dk = s.number("bandwidth", 0.0);
        m.se_bath.mean_k = s.number("mean_k", 0.0);
        m.se_bath.recoil_wavenumber = s.number("recoil_wavenumber", 0.0);
        s.reject_unknown();
    }

    if (auto d = reader("bath.cavity_decay"); d.present()) {
        m.cavity_decay.cutoff = d.number("cutoff", 0.0);
        m.cavity_decay.mode_density = d.number("mode_density", 0.0);
        m.cavity_decay.u = read_profile(d, "u");
        m.cavity_decay.w = read_profile(d, "w");
        d.reject_unknown();
    }

    if (auto gt = reader("gating"); gt.present()) {
        m.gating.enabled = gt.boolean("enabled", true);
        std::vector<double> re, im;
        if (gt.has("omega_rabi_re")) {
            re = gt.list("omega_rabi_re");
        }
        if (gt.has("omega_rabi_im")) {
            im = gt.list("omega_rabi_im");
        }
        if (!re.empty() || !im.empty()) {
            const auto n = std::max(re.size(), im.size());
            if ((!re.empty() && re.size() != n) || (!im.empty() && im.size() != n)) {
                throw ConfigError("gating.omega_rabi_re and gating.omega_rabi_im lengths differ");
            }
            re.resize(n, 0.0);
            im.resize(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                m.gating.omega_rabi.emplace_back(re[i], im[i]);
            }
        }
        if (gt.has("delta_shift")) {
            m.gating.delta_shift = gt.list("delta_shift");
        }
        m.gating.classical_wavevector = gt.vec3("classical_wavevector", Vec3::Zero());
        if (gt.has("zeeman_gradient0")) {
            m.gating.zeeman_gradient0 = gt.vec3_list("zeeman_gradient0");
        }
        if (gt.has("zeeman_gradient1")) {
            m.gating.zeeman_gradient1 = gt.vec3_list("zeeman_gradient1");
        }
        gt.reject_unknown();
    }

    if (auto v = reader("vibrations"); v.present()) {
        m.vibrations.enabled = v.boolean("enabled", true);
        const auto topo = v.word("topology");
        if (topo == "independent") {
            m.vibrations.topology = Topology::independent;
        } else if (topo == "chain") {
            m.vibrations.topology = Topology::chain1d;
        } else if (topo == "custom") {
            m.vibrations.topology = Topology::custom;
        } else {
            fail_at(v.line_of("topology"), "unknown topology '" + topo + "' (independent, chain, custom)");
        }
        if (m.vibrations.topology == Topology::custom) {
            if (v.has("matrix_file")) {
                m.vibrations.matrix_file = v.word("matrix_file");
                auto p = std::filesystem::path(m.vibrations.matrix_file);
                if (p.is_relative() && !base_dir.empty()) {
                    p = base_dir / p;
                }
                m.vibrations.custom = read_coupling_matrix_file(p);
            } else {
                const auto flat = v.list("matrix");
                const auto n = static_cast<long>(std::llround(std::sqrt(static_cast<double>(flat.size()))));
                if (n * n != static_cast<long>(flat.size()) || n == 0) {
                    fail_at(v.line_of("matrix"), "vibrations.matrix must hold a square number of entries");
                }
                m.vibrations.custom = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                    flat.data(), n, n);
            }
        } else {
            m.vibrations.spring_constant = v.number("spring_constant");
            if (m.vibrations.topology == Topology::chain1d) {
                m.vibrations.chain_coupling = v.number("chain_coupling");
            }
        }
        const auto mean = v.word("mean", "mean-inverse");
        if (mean == "mean-inverse") {
            m.vibrations.mean_strategy = MeanStrategy::mean_inverse;
        } else if (mean == "inverse-mean") {
            m.vibrations.mean_strategy = MeanStrategy::inverse_mean;
        } else {
            fail_at(v.line_of("mean"), "unknown mean strategy '" + mean + "' (mean-inverse, inverse-mean)");
        }
        v.reject_unknown();
    }

    // Surfaces sign and consistency problems as a ValidationError.
    return validate_model(std::move(m)).model();
}

Model load_model_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return load_model(ss.str(), path.parent_path());
    } catch (const ValidationError&) {
        throw;
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string serialize_model(const Model& m)
{
    std::ostringstream o;
    o << "[qubits]\n"
      << "omega0 = " << fmt(m.qubits.omega0) << "\n"
      << "gamma_se = " << fmt(m.qubits.gamma_se) << "\n"
      << "dipole = " << fmt_vec(m.qubits.dipole) << "\n"
      << "mass = " << fmt(m.qubits.mass) << "\n"
      << "moment0 = " << fmt_vec(m.qubits.moment0) << "\n"
      << "moment1 = " << fmt_vec(m.qubits.moment1) << "\n\n";

    o << "[geometry]\n";
    if (m.geometry.kind == GeometryKind::explicit_positions) {
        o << "positions = " << fmt_vec_list(m.geometry.positions) << "\n\n";
    } else {
        o << "count = " << fmt(m.geometry.count) << "\n"
          << "spacing = " << fmt(m.geometry.spacing) << "\n"
          << "axis = " << fmt_vec(m.geometry.axis) << "\n\n";
    }

    if (m.cavity.enabled || m.cavity.omega_b != 0.0) {
        o << "[cavity]\n"
          << "enabled = " << (m.cavity.enabled ? "true" : "false") << "\n"
          << "omega_b = " << fmt(m.cavity.omega_b) << "\n"
          << "mode_volume = " << fmt(m.cavity.mode_volume) << "\n"
          << "wavevector = " << fmt_vec(m.cavity.wavevector) << "\n"
          << "polarization = " << fmt_vec(m.cavity.polarization) << "\n\n";
    }

    o << "[bath.se]\n"
      << "cutoff = " << fmt(m.se_bath.cutoff) << "\n"
      << "temperature = " << fmt(m.se_bath.temperature) << "\n"
      << "bandwidth = " << fmt(m.se_bath.bandwidth_dk) << "\n"
      << "mean_k = " << fmt(m.se_bath.mean_k) << "\n"
      << "recoil_wavenumber = " << fmt(m.se_bath.recoil_wavenumber) << "\n\n";

    const auto& cd = m.cavity_decay;
    o << "[bath.cavity_decay]\n"
      << "cutoff = " << fmt(cd.cutoff) << "\n"
      << "mode_density = " << fmt(cd.mode_density) << "\n";
    for (const auto& [name, p] : {std::pair{"u", cd.u}, std::pair{"w", cd.w}}) {
        o << name << "_profile = " << to_string(p.kind) << "\n"
          << name << "_amplitude = " << fmt(p.amplitude) << "\n"
          << name << "_exponent = " << fmt(p.exponent) << "\n";
    }
    o << "\n";

    const auto& gt = m.gating;
    o << "[gating]\n"
      << "enabled = " << (gt.enabled ? "true" : "false") << "\n";
    if (!gt.omega_rabi.empty()) {
        std::vector<double> re, im;
        for (const auto& z : gt.omega_rabi) {
            re.push_back(z.real());
            im.push_back(z.imag());
        }
        o << "omega_rabi_re = " << fmt_list(re) << "\n"
          << "omega_rabi_im = " << fmt_list(im) << "\n";
    }
    if (!gt.delta_shift.empty()) {
        o << "delta_shift = " << fmt_list(gt.delta_shift) << "\n";
    }
    o << "classical_wavevector = " << fmt_vec(gt.classical_wavevector) << "\n";
    if (!gt.zeeman_gradient0.empty()) {
        o << "zeeman_gradient0 = " << fmt_vec_list(gt.zeeman_gradient0) << "\n";
    }
    if (!gt.zeeman_gradient1.empty()) {
        o << "zeeman_gradient1 = " << fmt_vec_list(gt.zeeman_gradient1) << "\n";
    }
    o << "\n";

    const auto& v = m.vibrations;
    if (v.enabled || v.spring_constant != 0.0 || v.custom.size() != 0) {
        o << "[vibrations]\n"
          << "enabled = " << (v.enabled ? "true" : "false") << "\n"
          << "topology = " << to_string(v.topology) << "\n";
        if (v.topology == Topology::custom) {
            if (!v.matrix_file.empty()) {
                o << "matrix_file = \"" << v.matrix_file << "\"\n";
            } else {
                std::vector<double> flat;
                for (Eigen::Index i = 0; i < v.custom.rows(); ++i) {
                    for (Eigen::Index j = 0; j < v.custom.cols(); ++j) {
                        flat.push_back(v.custom(i, j));
                    }
                }
                o << "matrix = " << fmt_list(flat) << "\n";
            }
        } else {
            o << "spring_constant = " << fmt(v.spring_constant) << "\n";
            if (v.topology == Topology::chain1d) {
                o << "chain_coupling = " << fmt(v.chain_coupling) << "\n";
            }
        }
        o << "mean = " << to_string(v.mean_strategy) << "\n";
    }
    return o.str();
}

nlohmann::json model_to_json(const Model& m)
{
    using nlohmann::json;
    auto vec = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };
    json j;
    j["constants"] = {{"hbar", m.constants.hbar}, {"kB", m.constants.kB}, {"eps0", m.constants.eps0}, {"c", m.constants.c}};
    j["qubits"] = {{"omega0", m.qubits.omega0},
                   {"gamma_se", m.qubits.gamma_se},
                   {"dipole", vec(m.qubits.dipole)},
                   {"mass", m.qubits.mass},
                   {"moment0", vec(m.qubits.moment0)},
                   {"moment1", vec(m.qubits.moment1)}};
    if (m.geometry.kind == GeometryKind::explicit_positions) {
        json pos = json::array();
        for (const auto& p : m.geometry.positions) {
            pos.push_back(vec(p));
        }
        j["geometry"] = {{"kind", "explicit"}, {"positions", pos}};
    } else {
        j["geometry"] = {{"kind", "chain"}, {"count", m.geometry.count}, {"spacing", m.geometry.spacing}, {"axis", vec(m.geometry.axis)}};
    }
    j["cavity"] = {{"enabled", m.cavity.enabled},
                   {"omega_b", m.cavity.omega_b},
                   {"mode_volume", m.cavity.mode_volume},
                   {"wavevector", vec(m.cavity.wavevector)},
                   {"polarization", vec(m.cavity.polarization)}};
    j["bath_se"] = {{"cutoff", m.se_bath.cutoff},
                    {"temperature", m.se_bath.temperature},
                    {"bandwidth", m.se_bath.bandwidth_dk},
                    {"mean_k", m.se_bath.mean_k},
                    {"recoil_wavenumber", m.se_bath.recoil_wavenumber}};
    auto prof = [](const SpectralProfile& p) {
        return json{{"profile", std::string(to_string(p.kind))}, {"amplitude", p.amplitude}, {"exponent", p.exponent}};
    };
    j["bath_cavity_decay"] = {{"cutoff", m.cavity_decay.cutoff},
                              {"mode_density", m.cavity_decay.mode_density},
                              {"u", prof(m.cavity_decay.u)},
                              {"w", prof(m.cavity_decay.w)}};
    json rabi = json::array();
    for (const auto& z : m.gating.omega_rabi) {
        rabi.push_back(json::array({z.real(), z.imag()}));
    }
    j["gating"] = {{"enabled", m.gating.enabled},
                   {"omega_rabi", rabi},
                   {"delta_shift", m.gating.delta_shift},
                   {"classical_wavevector", vec(m.gating.classical_wavevector)}};
    j["vibrations"] = {{"enabled", m.vibrations.enabled},
                       {"topology", std::string(to_string(m.vibrations.topology))},
                       {"spring_constant", m.vibrations.spring_constant},
                       {"chain_coupling", m.vibrations.chain_coupling},
                       {"matrix_file", m.vibrations.matrix_file},
                       {"mean", std::string(to_string(m.vibrations.mean_strategy))}};
    return j;
}

std::string parameter_hash(const Model& m)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : serialize_model(m)) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace decotime
