#include "maglorentz/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace mlg {

namespace {

struct Default {
    const char *key;
    const char *value;
};

const Default schema[] = {
    {"run.experiment", "kinetic"},
    {"run.seed", "1"},
    {"run.workers", "0"},
    {"run.out", "out"},
    {"run.t_end", "1"},

    {"field.B", "1"},
    {"field.orientation", "1"},

    {"regime.kind", "intermediate"},
    {"regime.mu", "1"},
    {"regime.eps", "0.01"},
    {"regime.eps_list", ""},
    {"regime.alpha", "0.1"},
    {"regime.gamma", "0.9"},
    {"regime.s", "3"},
    {"regime.profile", "cubic_bump"},
    {"regime.steepness", "20"},

    {"scatter.nodes", "4097"},
    {"scatter.rho_max", "0"},
    {"scatter.with_field", "true"},

    {"micro.n_seeds", "1000"},
    {"micro.arc_nu", "-1"},
    {"micro.arc_slack", "0"},
    {"micro.require_decades", "true"},

    {"kinetic.kernel", "boltzmann"},
    {"kinetic.nphi", "64"},
    {"kinetic.dt", "0.015625"},
    {"kinetic.mode", "homogeneous"},
    {"kinetic.nx", "16"},
    {"kinetic.ny", "16"},
    {"kinetic.dx", "0.25"},
    {"kinetic.dy", "0.25"},
    {"kinetic.x0", "-2"},
    {"kinetic.y0", "-2"},
    {"kinetic.boundary", "periodic"},
    {"kinetic.interp", "bilinear"},
    {"kinetic.kappa", "1"},
    {"kinetic.blob_width", "0.5"},
    {"kinetic.xi", "0"},
    {"kinetic.theta_min", "0.05"},
    {"kinetic.fg_mode", "memory_reads"},
    {"kinetic.fixed_theta", "none"},
    {"kinetic.checkpoints", ""},
    {"kinetic.dsmc_particles", "0"},
    {"kinetic.nodes", "4097"},

    {"converge.n_seeds", "400"},
    {"converge.nphi", "32"},
    {"converge.kappa", "1"},
    {"converge.dt", "0.015625"},

    {"compare.n_blocks", "200"},
    {"compare.block_media", "16"},
    {"compare.nphi", "32"},
    {"compare.kappa", "2"},
    {"compare.samples", "9"},
    {"compare.curve_blocks", "25"},
    {"compare.smooth_eps", "0.001"},
    {"compare.smooth_alpha", "0.1"},
    {"compare.hard_eps", "0.01"},
};

double to_double(const std::string &key, const std::string &v) {
    std::string s = boost::algorithm::trim_copy(v);
    if (s == "nan" || s == "none") return std::nan("");
    char *end = nullptr;
    errno = 0;
    double d = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
        throw ConfigError(key, "config: '" + key + "' expects a number, got '" + v + "'");
    return d;
}

}  // namespace

Config::Config() {
    for (const auto &d : schema) entries_.push_back({d.key, d.value, false});
}

Config::Entry &Config::entry(const std::string &key) {
    for (auto &e : entries_)
        if (e.key == key) return e;
    throw ConfigError(key, "config: unknown key '" + key + "'");
}

const Config::Entry &Config::entry(const std::string &key) const {
    for (const auto &e : entries_)
        if (e.key == key) return e;
    throw ConfigError(key, "config: unknown key '" + key + "'");
}

bool Config::has(const std::string &key) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const Entry &e) { return e.key == key; });
}

bool Config::explicitly_set(const std::string &key) const { return entry(key).set; }

void Config::set(const std::string &key, const std::string &value) {
    Entry &e = entry(key);
    e.value = boost::algorithm::trim_copy(value);
    e.set = true;
}

Config Config::parse(const std::string &text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream is(text);
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error &e) {
        throw ConfigError("", std::string("config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    Config c;
    for (const auto &[section, body] : tree) {
        if (body.empty()) {
            if (!body.data().empty())
                throw ConfigError(section, "config: unknown key '" + section + "' outside any section");
            bool known = false;
            for (const auto &k : c.keys()) known = known || k.rfind(section + ".", 0) == 0;
            if (!known) throw ConfigError(section, "config: unknown section '" + section + "'");
            continue;
        }
        for (const auto &[key, value] : body) c.set(section + "." + key, value.data());
    }
    return c;
}

Config Config::load(const std::string &path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("", "config: cannot read " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
}

const std::string &Config::str(const std::string &key) const { return entry(key).value; }

double Config::num(const std::string &key) const { return to_double(key, str(key)); }

long Config::integer(const std::string &key) const {
    double d = num(key);
    if (!(d == std::floor(d)) || std::abs(d) > 9e15)
        throw ConfigError(key, "config: '" + key + "' expects an integer");
    return static_cast<long>(d);
}

std::uint64_t Config::u64(const std::string &key) const {
    const std::string &s = str(key);
    char *end = nullptr;
    errno = 0;
    unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || s[0] == '-' || end != s.c_str() + s.size() || errno == ERANGE)
        throw ConfigError(key, "config: '" + key + "' expects an unsigned 64-bit integer");
    return v;
}

bool Config::flag(const std::string &key) const {
    std::string s = boost::algorithm::to_lower_copy(str(key));
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(key, "config: '" + key + "' expects true or false");
}

std::vector<double> Config::list(const std::string &key) const {
    std::vector<double> out;
    std::vector<std::string> parts;
    boost::algorithm::split(parts, str(key), boost::is_any_of(", "), boost::token_compress_on);
    for (const auto &p : parts)
        if (!p.empty()) out.push_back(to_double(key, p));
    return out;
}

namespace {

double time_token(const std::string &key, const std::string &s, double T_L) {
    if (boost::algorithm::iends_with(s, "TL")) {
        std::string head = s.substr(0, s.size() - 2);
        double f = head.empty() ? 1.0 : to_double(key, head);
        return f * T_L;
    }
    return to_double(key, s);
}

}  // namespace

double Config::time(const std::string &key, double T_L) const { return time_token(key, str(key), T_L); }

std::vector<double> Config::times(const std::string &key, double T_L) const {
    std::vector<double> out;
    std::vector<std::string> parts;
    boost::algorithm::split(parts, str(key), boost::is_any_of(", "), boost::token_compress_on);
    for (const auto &p : parts)
        if (!p.empty()) out.push_back(time_token(key, p, T_L));
    return out;
}

std::vector<std::string> Config::keys() const {
    std::vector<std::string> k;
    for (const auto &e : entries_) k.push_back(e.key);
    return k;
}

void Config::validate() const {
    auto fail = [](const std::string &key, const std::string &why) {
        throw ConfigError(key, "config: '" + key + "' " + why);
    };
    static const char *experiments[] = {"scatter", "micro", "kinetic", "converge", "pathology", "compare"};
    if (std::find(std::begin(experiments), std::end(experiments), str("run.experiment")) == std::end(experiments))
        fail("run.experiment", "must be one of scatter, micro, kinetic, converge, pathology, compare");
    u64("run.seed");
    if (integer("run.workers") < 0) fail("run.workers", "must be >= 0");
    if (!(num("field.B") > 0.0)) fail("field.B", "must be > 0");
    long o = integer("field.orientation");
    if (o != 1 && o != -1) fail("field.orientation", "must be +1 or -1");
    const std::string kind = str("regime.kind");
    if (kind != "weak_coupling" && kind != "intermediate" && kind != "boltzmann_grad" && kind != "long_range")
        fail("regime.kind", "must be weak_coupling, intermediate, boltzmann_grad or long_range");
    if (!(num("regime.mu") >= 0.0)) fail("regime.mu", "must be >= 0");
    double eps = num("regime.eps");
    if (!(eps > 0.0 && eps <= 1.0)) fail("regime.eps", "must lie in (0, 1]");
    for (double e : list("regime.eps_list"))
        if (!(e > 0.0 && e <= 1.0)) fail("regime.eps_list", "entries must lie in (0, 1]");
    double a = num("regime.alpha");
    if (!(a > 0.0 && a < 0.125)) fail("regime.alpha", "must lie in (0, 1/8)");
    double g = num("regime.gamma");
    if (!(g > 6.0 / 7.0 && g < 1.0)) fail("regime.gamma", "must lie in (6/7, 1)");
    if (!(num("regime.s") > 2.0)) fail("regime.s", "must be > 2");
    const std::string prof = str("regime.profile");
    if (prof != "cubic_bump" && prof != "steep_wall") fail("regime.profile", "must be cubic_bump or steep_wall");
    if (!(num("regime.steepness") > 0.0)) fail("regime.steepness", "must be > 0");
    if (integer("scatter.nodes") < 2) fail("scatter.nodes", "must be >= 2");
    if (!(num("scatter.rho_max") >= 0.0)) fail("scatter.rho_max", "must be >= 0");
    flag("scatter.with_field");
    if (integer("micro.n_seeds") < 1) fail("micro.n_seeds", "must be >= 1");
    num("micro.arc_nu");
    if (!(num("micro.arc_slack") >= 0.0)) fail("micro.arc_slack", "must be >= 0");
    flag("micro.require_decades");
    static const char *kernels[] = {"none", "landau", "hard_disk", "boltzmann", "uncut", "gbe"};
    if (std::find(std::begin(kernels), std::end(kernels), str("kinetic.kernel")) == std::end(kernels))
        fail("kinetic.kernel", "must be one of none, landau, hard_disk, boltzmann, uncut, gbe");
    long n = integer("kinetic.nphi");
    if (n < 4 || (n & (n - 1))) fail("kinetic.nphi", "must be a power of two >= 4");
    if (!(time("kinetic.dt", 1.0) > 0.0)) fail("kinetic.dt", "must be > 0");
    if (str("kinetic.mode") != "homogeneous" && str("kinetic.mode") != "gridded")
        fail("kinetic.mode", "must be homogeneous or gridded");
    if (integer("kinetic.nx") < 1) fail("kinetic.nx", "must be >= 1");
    if (integer("kinetic.ny") < 1) fail("kinetic.ny", "must be >= 1");
    if (!(num("kinetic.dx") > 0.0)) fail("kinetic.dx", "must be > 0");
    if (!(num("kinetic.dy") > 0.0)) fail("kinetic.dy", "must be > 0");
    num("kinetic.x0");
    num("kinetic.y0");
    if (str("kinetic.boundary") != "periodic" && str("kinetic.boundary") != "absorbing")
        fail("kinetic.boundary", "must be periodic or absorbing");
    if (str("kinetic.interp") != "bilinear" && str("kinetic.interp") != "spectral")
        fail("kinetic.interp", "must be bilinear or spectral");
    if (!(num("kinetic.kappa") >= 0.0)) fail("kinetic.kappa", "must be >= 0");
    if (!(num("kinetic.blob_width") > 0.0)) fail("kinetic.blob_width", "must be > 0");
    if (!(num("kinetic.xi") >= 0.0)) fail("kinetic.xi", "must be >= 0");
    if (!(num("kinetic.theta_min") > 0.0 && num("kinetic.theta_min") < 3.141592653589793)) fail("kinetic.theta_min", "must lie in (0, pi)");
    const std::string fg = str("kinetic.fg_mode");
    if (fg != "memory_reads" && fg != "literal" && fg != "off" && fg != "active")
        fail("kinetic.fg_mode", "must be memory_reads, literal, off or active");
    num("kinetic.fixed_theta");
    for (double t : times("kinetic.checkpoints", 1.0))
        if (!(t >= 0.0)) fail("kinetic.checkpoints", "entries must be >= 0");
    if (integer("kinetic.dsmc_particles") < 0) fail("kinetic.dsmc_particles", "must be >= 0");
    if (integer("kinetic.nodes") < 2) fail("kinetic.nodes", "must be >= 2");
    if (integer("converge.n_seeds") < 1) fail("converge.n_seeds", "must be >= 1");
    long cn = integer("converge.nphi");
    if (cn < 4 || (cn & (cn - 1))) fail("converge.nphi", "must be a power of two >= 4");
    if (!(num("converge.kappa") >= 0.0)) fail("converge.kappa", "must be >= 0");
    if (!(num("converge.dt") > 0.0)) fail("converge.dt", "must be > 0");
    if (integer("compare.n_blocks") < 2) fail("compare.n_blocks", "must be >= 2");
    if (integer("compare.block_media") < 1) fail("compare.block_media", "must be >= 1");
    long pn = integer("compare.nphi");
    if (pn < 4 || (pn & (pn - 1))) fail("compare.nphi", "must be a power of two >= 4");
    if (!(num("compare.kappa") >= 0.0)) fail("compare.kappa", "must be >= 0");
    if (integer("compare.samples") < 2) fail("compare.samples", "must be >= 2");
    if (integer("compare.curve_blocks") < 2) fail("compare.curve_blocks", "must be >= 2");
    if (!(num("compare.smooth_eps") > 0.0 && num("compare.smooth_eps") <= 1.0))
        fail("compare.smooth_eps", "must lie in (0, 1]");
    double sa = num("compare.smooth_alpha");
    if (!(sa > 0.0 && sa < 0.125)) fail("compare.smooth_alpha", "must lie in (0, 1/8)");
    if (!(num("compare.hard_eps") > 0.0 && num("compare.hard_eps") <= 1.0))
        fail("compare.hard_eps", "must lie in (0, 1]");
    time("run.t_end", 1.0);
}

std::string Config::manifest() const {
    std::ostringstream os;
    std::string section;
    for (const auto &e : entries_) {
        auto dot = e.key.find('.');
        std::string s = e.key.substr(0, dot);
        if (s != section) {
            if (!section.empty()) os << '\n';
            os << '[' << s << "]\n";
            section = s;
        }
        os << e.key.substr(dot + 1) << " = " << e.value << '\n';
    }
    return os.str();
}

}  // namespace mlg
