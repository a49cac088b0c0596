#include "qosc/experiment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qosc/kernels.hpp"
#include "qosc/observables.hpp"
#include "qosc/perturbation.hpp"
#include "qosc/reference.hpp"
#include "qosc/semiclassical.hpp"
#include "qosc/wigner.hpp"

namespace qosc {

namespace {

namespace fs = std::filesystem;

constexpr std::array<std::pair<const char*, ExperimentKind>, 9> kKinds{{
    {"moments", ExperimentKind::moments},
    {"commuting", ExperimentKind::commuting},
    {"harmonic", ExperimentKind::harmonic},
    {"first-passage", ExperimentKind::first_passage},
    {"propagator", ExperimentKind::propagator},
    {"dyson", ExperimentKind::dyson},
    {"semiclassical-G", ExperimentKind::semiclassical_g},
    {"partition", ExperimentKind::partition},
    {"wigner", ExperimentKind::wigner},
}};

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Entry {
    std::string value;
    int line = 0;
};

using Raw = std::map<std::string, std::map<std::string, Entry>>;

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"experiment",
         {"kind", "t_grid", "orders", "which", "x", "x0", "branches", "n_grid", "dim",
          "lead_cols", "order_max", "lambdas", "horizon", "beta_grid", "x_cutoff", "n_quad"}},
        {"model", {"m", "hbar", "omega_sq", "lambda"}},
        {"packet", {"sigma", "a", "k"}},
        {"noise", {"n_traj", "seed", "dt"}},
        {"grid", {"x_min", "x_max", "n_points", "dt", "p_min", "p_max", "n_p"}},
        {"output", {"dir", "plots"}},
        {"provenance", {"code_version", "seed_used"}},
    };
    return keys;
}

Raw tokenize(const std::string& text) {
    Raw raw;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        const std::string s = trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']') fail("line " + std::to_string(ln) + ": unterminated section");
            section = trim(s.substr(1, s.size() - 2));
            if (!known_keys().count(section))
                fail("line " + std::to_string(ln) + ": unknown section [" + section + "]");
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            fail("line " + std::to_string(ln) + ": expected key = value");
        if (section.empty())
            fail("line " + std::to_string(ln) + ": key before any [section]");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (key.empty()) fail("line " + std::to_string(ln) + ": empty key");
        if (!known_keys().at(section).count(key))
            fail("line " + std::to_string(ln) + ": unknown key [" + section + "] " + key);
        auto [it, inserted] = raw[section].emplace(key, Entry{value, ln});
        if (!inserted)
            fail("line " + std::to_string(ln) + ": duplicate key [" + section + "] " + key +
                 " (first at line " + std::to_string(it->second.line) + ")");
    }
    return raw;
}

double parse_double(const std::string& v, const std::string& where) {
    const char* begin = v.c_str();
    char* end = nullptr;
    const double out = std::strtod(begin, &end);
    if (end != begin + v.size() || v.empty() || !std::isfinite(out))
        fail(where + ": '" + v + "' is not a finite number");
    return out;
}

long long parse_integer(const std::string& v, const std::string& where) {
    const char* begin = v.c_str();
    char* end = nullptr;
    const long long out = std::strtoll(begin, &end, 10);
    if (end != begin + v.size() || v.empty()) fail(where + ": '" + v + "' is not an integer");
    return out;
}

std::uint64_t parse_seed(const std::string& v, const std::string& where) {
    const char* begin = v.c_str();
    char* end = nullptr;
    const unsigned long long out = std::strtoull(begin, &end, 10);
    if (end != begin + v.size() || v.empty() || v[0] == '-')
        fail(where + ": '" + v + "' is not an unsigned integer");
    return out;
}

std::vector<std::string> split(const std::string& v, char sep) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = v.find(sep, pos);
        parts.push_back(trim(v.substr(pos, next - pos)));
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return parts;
}

// Either "start:step:stop" (inclusive) or a comma list.
std::vector<double> parse_number_list(const std::string& v, const std::string& where) {
    std::vector<double> out;
    if (v.find(':') != std::string::npos) {
        const auto parts = split(v, ':');
        if (parts.size() != 3) fail(where + ": range needs start:step:stop");
        const double start = parse_double(parts[0], where);
        const double step = parse_double(parts[1], where);
        const double stop = parse_double(parts[2], where);
        if (!(step > 0.0) || stop < start) fail(where + ": range needs step > 0, stop >= start");
        const long n = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
        for (long i = 0; i < n; ++i) out.push_back(start + step * static_cast<double>(i));
        return out;
    }
    for (const auto& p : split(v, ',')) out.push_back(parse_double(p, where));
    if (out.empty()) fail(where + ": empty list");
    return out;
}

Schedule parse_schedule(const std::string& v, const std::string& where) {
    const std::size_t colon = v.find(':');
    if (colon == std::string::npos)
        fail(where + ": expected constant:<v>, sinsq:<amplitude>, or table:t,v;t,v;...");
    const std::string head = trim(v.substr(0, colon));
    const std::string rest = trim(v.substr(colon + 1));
    if (head == "constant") return Schedule::constant(parse_double(rest, where));
    if (head == "sinsq") return Schedule::sin_squared(parse_double(rest, where));
    if (head == "table") {
        std::vector<double> times, values;
        for (const auto& pair : split(rest, ';')) {
            const auto tv = split(pair, ',');
            if (tv.size() != 2) fail(where + ": table entries are t,v pairs separated by ;");
            times.push_back(parse_double(tv[0], where));
            values.push_back(parse_double(tv[1], where));
        }
        try {
            return Schedule::tabulated(std::move(times), std::move(values));
        } catch (const std::exception& e) {
            fail(where + ": " + e.what());
        }
    }
    fail(where + ": unknown schedule kind '" + head + "'");
}

struct Reader {
    Raw raw;
    std::set<std::pair<std::string, std::string>> used;
    std::string kind_label;

    bool has(const std::string& sec, const std::string& key) {
        auto s = raw.find(sec);
        return s != raw.end() && s->second.count(key) != 0;
    }
    std::string where(const std::string& sec, const std::string& key) const {
        return "[" + sec + "] " + key;
    }
    const std::string& require(const std::string& sec, const std::string& key) {
        if (!has(sec, key))
            fail(where(sec, key) + " is required for kind=" + kind_label);
        used.insert({sec, key});
        return raw[sec][key].value;
    }
    std::string text_or(const std::string& sec, const std::string& key, std::string def) {
        if (!has(sec, key)) return def;
        used.insert({sec, key});
        return raw[sec][key].value;
    }
    double number(const std::string& sec, const std::string& key, double def) {
        if (!has(sec, key)) return def;
        used.insert({sec, key});
        return parse_double(raw[sec][key].value, where(sec, key));
    }
    double required_number(const std::string& sec, const std::string& key) {
        return parse_double(require(sec, key), where(sec, key));
    }
    long long integer(const std::string& sec, const std::string& key, long long def) {
        if (!has(sec, key)) return def;
        used.insert({sec, key});
        return parse_integer(raw[sec][key].value, where(sec, key));
    }
    bool flag(const std::string& sec, const std::string& key, bool def) {
        if (!has(sec, key)) return def;
        used.insert({sec, key});
        const std::string& v = raw[sec][key].value;
        if (v == "true" || v == "on" || v == "1") return true;
        if (v == "false" || v == "off" || v == "0") return false;
        fail(where(sec, key) + ": '" + v + "' is not a boolean");
    }
    std::vector<double> list(const std::string& sec, const std::string& key) {
        if (!has(sec, key)) return {};
        used.insert({sec, key});
        return parse_number_list(raw[sec][key].value, where(sec, key));
    }
    void mark_section(const std::string& sec) {
        auto s = raw.find(sec);
        if (s == raw.end()) return;
        for (const auto& [key, entry] : s->second) used.insert({sec, key});
    }
    void finish() const {
        for (const auto& [sec, entries] : raw)
            for (const auto& [key, entry] : entries)
                if (!used.count({sec, key}))
                    fail("line " + std::to_string(entry.line) + ": [" + sec + "] " + key +
                         " is not used by kind=" + kind_label);
    }
};

bool is_mc_kind(ExperimentKind k) {
    return k == ExperimentKind::moments || k == ExperimentKind::commuting ||
           k == ExperimentKind::harmonic || k == ExperimentKind::first_passage ||
           k == ExperimentKind::propagator;
}

bool uses_packet(ExperimentKind k) {
    return k == ExperimentKind::moments || k == ExperimentKind::commuting ||
           k == ExperimentKind::harmonic || k == ExperimentKind::first_passage ||
           k == ExperimentKind::wigner;
}

bool uses_t_grid(ExperimentKind k) {
    return k != ExperimentKind::first_passage && k != ExperimentKind::partition;
}

// Stepping-kernel kinds sample on exact multiples of dt.
bool needs_step_grid(ExperimentKind k) {
    return k == ExperimentKind::moments || k == ExperimentKind::harmonic ||
           k == ExperimentKind::propagator;
}

void check_lambda_non_negative(const ExperimentConfig& c, double t_max) {
    const int n = 512;
    for (int i = 0; i <= n; ++i) {
        const double t = t_max * static_cast<double>(i) / n;
        if (c.model.lambda(t) < 0.0)
            fail("[model] lambda: negative at t=" + format_double(t));
    }
}

void validate_config(const ExperimentConfig& c) {
    c.model.validate();
    c.packet.validate();
    const std::string kind = kind_name(c.kind);

    if (uses_t_grid(c.kind)) {
        if (c.t_grid.empty()) fail("[experiment] t_grid is required for kind=" + kind);
        double prev = 0.0;
        for (double t : c.t_grid) {
            if (!(t > 0.0) || t < prev)
                fail("[experiment] t_grid: times must be positive and ascending");
            prev = t;
        }
    }
    if (c.kind == ExperimentKind::dyson && c.t_grid.size() != 1)
        fail("[experiment] t_grid: kind=dyson takes exactly one time");

    if (is_mc_kind(c.kind)) {
        if (c.n_traj < 1) fail("[noise] n_traj must be at least 1");
        if (!(c.dt > 0.0)) fail("[noise] dt must be positive");
    }
    if (needs_step_grid(c.kind)) {
        for (double t : c.t_grid) {
            const double r = t / c.dt;
            if (std::abs(r - std::round(r)) > 1e-6)
                fail("[experiment] t_grid: t=" + format_double(t) +
                     " is off the dt step grid");
        }
    }

    const bool moment_kind = c.kind == ExperimentKind::moments ||
                             c.kind == ExperimentKind::commuting ||
                             c.kind == ExperimentKind::harmonic;
    if (moment_kind) {
        if (c.orders.empty()) fail("[experiment] orders: empty list");
        for (int o : c.orders)
            if (o < 0 || o > 12) fail("[experiment] orders: order must lie in [0, 12]");
        if (!c.want_x && !c.want_p) fail("[experiment] which: must be x, p, or both");
    }

    if (c.kind == ExperimentKind::harmonic) {
        if (!c.model.lambda.is_constant() || c.model.lambda(0.0) != 0.0)
            fail("[model] lambda: kind=harmonic needs lambda = constant:0");
        if (!c.model.omega_sq.is_constant() || !(c.model.omega_sq(0.0) > 0.0))
            fail("[model] omega_sq: kind=harmonic needs a constant positive omega_sq");
    }

    if (c.kind == ExperimentKind::first_passage) {
        if (c.lambdas.empty()) fail("[experiment] lambdas is required for kind=" + kind);
        for (double l : c.lambdas)
            if (l < 0.0) fail("[experiment] lambdas: values must be non-negative");
        if (!(c.horizon > 0.0)) fail("[experiment] horizon must be positive");
        if (c.lambda_spec.rfind("table:", 0) == 0)
            fail("[experiment] lambdas: sweep needs a constant or sinsq lambda schedule");
    }

    if (c.kind == ExperimentKind::dyson) {
        if (c.dim < 4) fail("[experiment] dim must be at least 4");
        if (c.lead_cols < 0 || c.lead_cols > c.dim)
            fail("[experiment] lead_cols must lie in [0, dim]");
        if (c.order_max < 0 || c.order_max > 2)
            fail("[experiment] order_max must lie in [0, 2]");
        if (c.lambdas.size() < 2) fail("[experiment] lambdas: need at least two couplings");
        for (double l : c.lambdas)
            if (!(l > 0.0)) fail("[experiment] lambdas: couplings must be positive");
        if (!c.model.omega_sq.is_constant() || !(c.model.omega_sq(0.0) > 0.0))
            fail("[model] omega_sq: kind=dyson needs a constant positive omega_sq");
        if (!c.model.lambda.is_constant())
            fail("[model] lambda: kind=dyson needs a constant lambda");
    }

    if (c.kind == ExperimentKind::semiclassical_g) {
        if (c.branches < 1) fail("[experiment] branches must be at least 1");
        if (c.n_grid < 16 || c.n_grid % 2 != 0)
            fail("[experiment] n_grid must be even and at least 16");
    }

    if (c.kind == ExperimentKind::partition) {
        if (c.beta_grid.empty()) fail("[experiment] beta_grid is required for kind=" + kind);
        for (double b : c.beta_grid)
            if (!(b > 0.0)) fail("[experiment] beta_grid: values must be positive");
        if (!(c.x_cutoff > 0.0)) fail("[experiment] x_cutoff must be positive");
        if (c.n_quad < 8 || c.n_quad % 2 != 0)
            fail("[experiment] n_quad must be even and at least 8");
        if (c.dim < 4) fail("[experiment] dim must be at least 4");
        if (!c.model.omega_sq.is_constant() || !(c.model.omega_sq(0.0) > 0.0))
            fail("[model] omega_sq: kind=partition needs a constant positive omega_sq");
        if (!c.model.lambda.is_constant())
            fail("[model] lambda: kind=partition needs a constant lambda");
    }

    if (c.kind == ExperimentKind::wigner) {
        if (!(c.grid_x_max > c.grid_x_min)) fail("[grid] x_max must exceed x_min");
        if (c.grid_points < 64) fail("[grid] n_points must be at least 64");
        if (!(c.grid_dt > 0.0)) fail("[grid] dt must be positive");
        if (!(c.p_max > c.p_min)) fail("[grid] p_max must exceed p_min");
        if (c.n_p < 2) fail("[grid] n_p must be at least 2");
    }

    const double horizon = c.kind == ExperimentKind::first_passage
                               ? c.horizon
                               : (c.t_grid.empty() ? 1.0 : c.t_grid.back());
    check_lambda_non_negative(c, horizon);
}

std::string which_text(const ExperimentConfig& c) {
    if (c.want_x && c.want_p) return "both";
    return c.want_p ? "p" : "x";
}

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    return out;
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace

const char* kind_name(ExperimentKind kind) {
    for (const auto& [name, k] : kKinds)
        if (k == kind) return name;
    return "?";
}

ExperimentConfig parse_config(const std::string& text) {
    Reader r{tokenize(text), {}, "?"};

    ExperimentConfig c;
    const std::string kind_text = r.require("experiment", "kind");
    bool found = false;
    for (const auto& [name, k] : kKinds)
        if (kind_text == name) {
            c.kind = k;
            found = true;
        }
    if (!found) fail("[experiment] kind: unknown experiment '" + kind_text + "'");
    r.kind_label = kind_text;

    c.model.m = r.number("model", "m", 1.0);
    c.model.hbar = r.number("model", "hbar", 1.0);
    c.omega_spec = r.text_or("model", "omega_sq", "constant:1");
    c.lambda_spec = r.text_or("model", "lambda", "constant:0");
    c.model.omega_sq = parse_schedule(c.omega_spec, "[model] omega_sq");
    c.model.lambda = parse_schedule(c.lambda_spec, "[model] lambda");

    if (uses_packet(c.kind))
        c.packet.sigma = r.required_number("packet", "sigma");
    else
        c.packet.sigma = r.number("packet", "sigma", 1.0);
    c.packet.a = r.number("packet", "a", 0.0);
    c.packet.k = r.number("packet", "k", 0.0);

    if (is_mc_kind(c.kind)) {
        if (!r.has("noise", "n_traj"))
            fail("[noise] n_traj is required for kind=" + r.kind_label);
        c.n_traj = static_cast<long>(r.integer("noise", "n_traj", 0));
        c.dt = r.required_number("noise", "dt");
    } else {
        c.n_traj = static_cast<long>(r.integer("noise", "n_traj", 10000));
        c.dt = r.number("noise", "dt", 1e-4);
    }
    if (r.has("noise", "seed")) {
        r.used.insert({"noise", "seed"});
        c.seed = parse_seed(r.raw["noise"]["seed"].value, "[noise] seed");
    }

    if (r.has("experiment", "t_grid")) c.t_grid = r.list("experiment", "t_grid");

    if (r.has("experiment", "orders")) {
        c.orders.clear();
        for (double o : r.list("experiment", "orders")) {
            if (o != std::floor(o)) fail("[experiment] orders: orders must be integers");
            c.orders.push_back(static_cast<int>(o));
        }
    }
    const std::string which = r.text_or("experiment", "which", "x");
    if (which == "x") {
        c.want_x = true;
        c.want_p = false;
    } else if (which == "p") {
        c.want_x = false;
        c.want_p = true;
    } else if (which == "both") {
        c.want_x = c.want_p = true;
    } else {
        fail("[experiment] which: must be x, p, or both");
    }

    const bool needs_endpoints =
        c.kind == ExperimentKind::propagator || c.kind == ExperimentKind::semiclassical_g;
    c.x = needs_endpoints ? r.required_number("experiment", "x")
                          : r.number("experiment", "x", 0.0);
    c.x0 = needs_endpoints ? r.required_number("experiment", "x0")
                           : r.number("experiment", "x0", 0.0);
    c.branches = static_cast<int>(r.integer("experiment", "branches", 1));
    c.n_grid = static_cast<int>(r.integer("experiment", "n_grid", 2000));
    c.dim = static_cast<int>(r.integer("experiment", "dim", 64));
    c.lead_cols = static_cast<int>(r.integer("experiment", "lead_cols", 4));
    c.order_max = static_cast<int>(r.integer("experiment", "order_max", 2));
    if (r.has("experiment", "lambdas")) c.lambdas = r.list("experiment", "lambdas");
    c.horizon = r.number("experiment", "horizon", 50.0);
    if (r.has("experiment", "beta_grid")) c.beta_grid = r.list("experiment", "beta_grid");
    c.x_cutoff = r.number("experiment", "x_cutoff", 8.0);
    c.n_quad = static_cast<long>(r.integer("experiment", "n_quad", 4000));

    c.grid_x_min = r.number("grid", "x_min", -8.0);
    c.grid_x_max = r.number("grid", "x_max", 8.0);
    c.grid_points = static_cast<int>(r.integer("grid", "n_points", 1921));
    c.grid_dt = r.number("grid", "dt", 1e-3);
    c.p_min = r.number("grid", "p_min", -5.0);
    c.p_max = r.number("grid", "p_max", 5.0);
    c.n_p = static_cast<int>(r.integer("grid", "n_p", 41));

    c.out_dir = r.text_or("output", "dir", ".");
    c.plots = r.flag("output", "plots", true);

    r.mark_section("provenance");
    r.finish();
    validate_config(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& c) {
    std::string out;
    out += "[experiment]\n";
    out += "kind = " + std::string(kind_name(c.kind)) + "\n";
    if (!c.t_grid.empty()) out += "t_grid = " + join_doubles(c.t_grid) + "\n";
    out += "orders = " + join_ints(c.orders) + "\n";
    out += "which = " + which_text(c) + "\n";
    out += "x = " + format_double(c.x) + "\n";
    out += "x0 = " + format_double(c.x0) + "\n";
    out += "branches = " + std::to_string(c.branches) + "\n";
    out += "n_grid = " + std::to_string(c.n_grid) + "\n";
    out += "dim = " + std::to_string(c.dim) + "\n";
    out += "lead_cols = " + std::to_string(c.lead_cols) + "\n";
    out += "order_max = " + std::to_string(c.order_max) + "\n";
    if (!c.lambdas.empty()) out += "lambdas = " + join_doubles(c.lambdas) + "\n";
    out += "horizon = " + format_double(c.horizon) + "\n";
    if (!c.beta_grid.empty()) out += "beta_grid = " + join_doubles(c.beta_grid) + "\n";
    out += "x_cutoff = " + format_double(c.x_cutoff) + "\n";
    out += "n_quad = " + std::to_string(c.n_quad) + "\n";
    out += "\n[model]\n";
    out += "m = " + format_double(c.model.m) + "\n";
    out += "hbar = " + format_double(c.model.hbar) + "\n";
    out += "omega_sq = " + c.omega_spec + "\n";
    out += "lambda = " + c.lambda_spec + "\n";
    out += "\n[packet]\n";
    out += "sigma = " + format_double(c.packet.sigma) + "\n";
    out += "a = " + format_double(c.packet.a) + "\n";
    out += "k = " + format_double(c.packet.k) + "\n";
    out += "\n[noise]\n";
    out += "n_traj = " + std::to_string(c.n_traj) + "\n";
    out += "seed = " + std::to_string(c.seed) + "\n";
    out += "dt = " + format_double(c.dt) + "\n";
    out += "\n[grid]\n";
    out += "x_min = " + format_double(c.grid_x_min) + "\n";
    out += "x_max = " + format_double(c.grid_x_max) + "\n";
    out += "n_points = " + std::to_string(c.grid_points) + "\n";
    out += "dt = " + format_double(c.grid_dt) + "\n";
    out += "p_min = " + format_double(c.p_min) + "\n";
    out += "p_max = " + format_double(c.p_max) + "\n";
    out += "n_p = " + std::to_string(c.n_p) + "\n";
    out += "\n[output]\n";
    out += "dir = " + c.out_dir + "\n";
    out += "plots = " + std::string(c.plots ? "true" : "false") + "\n";
    return out;
}

std::string describe_config(const ExperimentConfig& c) {
    std::string out;
    out += "kind: " + std::string(kind_name(c.kind)) + "\n";
    out += "model: m=" + format_double(c.model.m) + " hbar=" + format_double(c.model.hbar) +
           " omega_sq=" + c.omega_spec + " lambda=" + c.lambda_spec + "\n";
    if (uses_packet(c.kind))
        out += "packet: sigma=" + format_double(c.packet.sigma) +
               " a=" + format_double(c.packet.a) + " k=" + format_double(c.packet.k) + "\n";
    long double cost = 0.0L;
    switch (c.kind) {
        case ExperimentKind::moments:
        case ExperimentKind::commuting:
        case ExperimentKind::harmonic: {
            const double t_max = c.t_grid.back();
            const long n_steps = static_cast<long>(std::llround(t_max / c.dt));
            out += "noise: n_traj=" + std::to_string(c.n_traj) +
                   " seed=" + std::to_string(c.seed) + " dt=" + format_double(c.dt) + "\n";
            out += "t_grid: " + std::to_string(c.t_grid.size()) + " times in [" +
                   format_double(c.t_grid.front()) + ", " + format_double(t_max) + "]\n";
            out += "observables: orders=" + join_ints(c.orders) + " which=" + which_text(c) +
                   "\n";
            cost = static_cast<long double>(c.n_traj) * static_cast<long double>(n_steps);
            out += "cost: n_traj x n_steps = " + std::to_string(c.n_traj) + " x " +
                   std::to_string(n_steps) + "\n";
            break;
        }
        case ExperimentKind::first_passage: {
            const long n_steps = static_cast<long>(std::llround(c.horizon / c.dt));
            out += "noise: n_traj=" + std::to_string(c.n_traj) +
                   " seed=" + std::to_string(c.seed) + " dt=" + format_double(c.dt) + "\n";
            out += "sweep: lambdas=" + join_doubles(c.lambdas) +
                   " horizon=" + format_double(c.horizon) + "\n";
            cost = static_cast<long double>(c.n_traj) * static_cast<long double>(n_steps) *
                   static_cast<long double>(c.lambdas.size());
            out += "cost: n_traj x n_steps x sweeps = " + std::to_string(c.n_traj) + " x " +
                   std::to_string(n_steps) + " x " + std::to_string(c.lambdas.size()) + "\n";
            break;
        }
        case ExperimentKind::propagator: {
            const double t_max = c.t_grid.back();
            const long n_steps = static_cast<long>(std::llround(t_max / c.dt));
            out += "noise: n_traj=" + std::to_string(c.n_traj) +
                   " seed=" + std::to_string(c.seed) + " dt=" + format_double(c.dt) + "\n";
            out += "endpoints: x=" + format_double(c.x) + " x0=" + format_double(c.x0) + "\n";
            cost = static_cast<long double>(c.n_traj) * static_cast<long double>(n_steps) *
                   static_cast<long double>(c.t_grid.size());
            out += "cost: n_traj x n_steps x times = " + std::to_string(c.n_traj) + " x " +
                   std::to_string(n_steps) + " x " + std::to_string(c.t_grid.size()) + "\n";
            break;
        }
        case ExperimentKind::dyson:
            out += "dyson: dim=" + std::to_string(c.dim) +
                   " order_max=" + std::to_string(c.order_max) +
                   " lead_cols=" + std::to_string(c.lead_cols) +
                   " lambdas=" + join_doubles(c.lambdas) + "\n";
            cost = static_cast<long double>(c.dim) * c.dim * 240.0L *
                   static_cast<long double>(c.lambdas.size());
            out += "cost: dim^2 x nodes x sweeps\n";
            break;
        case ExperimentKind::semiclassical_g:
            out += "endpoints: x=" + format_double(c.x) + " x0=" + format_double(c.x0) +
                   " branches=" + std::to_string(c.branches) +
                   " n_grid=" + std::to_string(c.n_grid) + "\n";
            cost = 500.0L * static_cast<long double>(c.n_grid) *
                   static_cast<long double>(c.t_grid.size());
            out += "cost: shots x n_grid x times\n";
            break;
        case ExperimentKind::partition:
            out += "partition: beta_grid=" + join_doubles(c.beta_grid) +
                   " x_cutoff=" + format_double(c.x_cutoff) +
                   " n_quad=" + std::to_string(c.n_quad) + " dim=" + std::to_string(c.dim) +
                   "\n";
            cost = static_cast<long double>(c.n_quad) *
                   static_cast<long double>(c.beta_grid.size());
            out += "cost: n_quad x betas plus one spectral solve\n";
            break;
        case ExperimentKind::wigner: {
            const long cn_steps =
                static_cast<long>(std::llround(c.t_grid.back() / c.grid_dt));
            out += "grid: x in [" + format_double(c.grid_x_min) + ", " +
                   format_double(c.grid_x_max) + "] n_points=" + std::to_string(c.grid_points) +
                   " dt=" + format_double(c.grid_dt) + " p in [" + format_double(c.p_min) +
                   ", " + format_double(c.p_max) + "] n_p=" + std::to_string(c.n_p) + "\n";
            cost = static_cast<long double>(cn_steps) *
                   static_cast<long double>(c.grid_points);
            out += "cost: cn_steps x n_points\n";
            break;
        }
    }
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3Lg", cost);
    out += "estimated work: " + std::string(buf) + " kernel steps\n";
    out += "output: dir=" + c.out_dir + " plots=" + (c.plots ? "on" : "off") + "\n";
    return out;
}

RunOptions options_from_environment() {
    RunOptions opts;
    if (const char* th = std::getenv("THREADS")) {
        const long long v = parse_integer(th, "THREADS");
        if (v < 1 || v > 4096) fail("THREADS: must lie in [1, 4096]");
        opts.threads = static_cast<int>(v);
    } else {
        opts.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    }
    if (const char* sd = std::getenv("SEED")) {
        opts.seed = parse_seed(sd, "SEED");
        opts.has_seed = true;
    }
    return opts;
}

namespace {

struct Row {
    double t = 0.0;
    double value = 0.0;
    double std_error = 0.0;
    long n_samples = 0;
    long n_excluded = 0;
};

struct Table {
    std::string name;  // file stem
    std::vector<Row> rows;
};

Row estimate_row(double t, const MomentEstimate& est, bool imag_part) {
    return {t, imag_part ? est.value.imag() : est.value.real(),
            imag_part ? est.std_error_imag : est.std_error, est.n_used, est.n_excluded};
}

std::vector<Table> run_moment_kind(const ExperimentConfig& c, int threads) {
    std::vector<MomentRequest> requests;
    std::vector<std::string> names;
    const std::string prefix =
        c.kind == ExperimentKind::commuting ? "commuting" : "moments";
    for (int order : c.orders) {
        if (c.want_x) {
            requests.push_back({order, Which::position});
            names.push_back(prefix + "_x" + std::to_string(order));
        }
        if (c.want_p) {
            requests.push_back({order, Which::momentum});
            names.push_back(prefix + "_p" + std::to_string(order));
        }
    }
    MCConfig cfg{c.n_traj, c.seed, c.dt, c.kind == ExperimentKind::commuting, threads};
    const auto estimates = estimate_moments(c.model, c.packet, requests, c.t_grid, cfg);

    std::vector<Table> tables;
    for (std::size_t ri = 0; ri < requests.size(); ++ri) {
        Table tab{names[ri], {}};
        for (std::size_t ti = 0; ti < c.t_grid.size(); ++ti) {
            const auto& est = estimates[ri][ti];
            if (est.n_used == 0)
                throw std::runtime_error("estimation failed: every trajectory blew up by t=" +
                                         format_double(c.t_grid[ti]));
            tab.rows.push_back(estimate_row(c.t_grid[ti], est, false));
        }
        tables.push_back(std::move(tab));
    }
    if (c.kind == ExperimentKind::harmonic) {
        for (std::size_t ri = 0; ri < requests.size(); ++ri) {
            Table tab{"harmonic" + names[ri].substr(prefix.size()), {}};
            for (double t : c.t_grid)
                tab.rows.push_back(
                    {t, harmonic_moment(c.model, c.packet, t, requests[ri].order,
                                        requests[ri].which),
                     0.0, 0, 0});
            tables.push_back(std::move(tab));
        }
    }
    return tables;
}

std::vector<Table> run_first_passage_kind(const ExperimentConfig& c) {
    const bool sinsq_sweep = c.lambda_spec.rfind("sinsq:", 0) == 0;
    const long n_steps = static_cast<long>(std::llround(c.horizon / c.dt));
    const double inv_sigma_sq = 1.0 / (c.packet.sigma * c.packet.sigma);

    Table mean_tab{"first_passage_mean", {}};
    Table std_tab{"first_passage_std", {}};
    for (double lam : c.lambdas) {
        ModelParams swept = c.model;
        swept.lambda = sinsq_sweep ? Schedule::sin_squared(lam) : Schedule::constant(lam);
        const auto table = kern::build_step_table(swept, c.dt, n_steps);
        const auto fp = kern::run_first_passage(table, swept.m, c.seed, 0, c.n_traj,
                                                inv_sigma_sq);
        const double n = static_cast<double>(fp.t_exit.size());
        double mean = 0.0;
        for (double t : fp.t_exit) mean += t;
        mean /= n;
        double var = 0.0;
        for (double t : fp.t_exit) var += (t - mean) * (t - mean);
        var = n > 1.5 ? var / (n - 1.0) : 0.0;
        const double sd = std::sqrt(var);
        long censored = 0;
        for (auto crossed : fp.crossed)
            if (!crossed) ++censored;
        const double se_sd = n > 1.5 ? sd / std::sqrt(2.0 * (n - 1.0)) : 0.0;
        mean_tab.rows.push_back({lam, mean, sd / std::sqrt(n), c.n_traj, censored});
        std_tab.rows.push_back({lam, sd, se_sd, c.n_traj, censored});
    }
    return {std::move(mean_tab), std::move(std_tab)};
}

std::vector<Table> run_propagator_kind(const ExperimentConfig& c, int threads) {
    MCConfig cfg{c.n_traj, c.seed, c.dt, false, threads};
    Table re{"propagator_re", {}}, im{"propagator_im", {}};
    for (double t : c.t_grid) {
        const auto est = estimate_propagator(c.model, c.x, c.x0, t, cfg);
        if (est.n_used == 0)
            throw std::runtime_error("estimation failed: every trajectory blew up by t=" +
                                     format_double(t));
        re.rows.push_back(estimate_row(t, est, false));
        im.rows.push_back(estimate_row(t, est, true));
    }
    return {std::move(re), std::move(im)};
}

std::vector<Table> run_dyson_kind(const ExperimentConfig& c) {
    const auto rs = residual_scaling(c.model, c.dim, c.t_grid[0], c.lambdas, c.order_max,
                                     c.lead_cols);
    std::vector<Table> tables;
    for (int k = 0; k <= c.order_max; ++k) {
        Table tab{"dyson_residual_order" + std::to_string(k), {}};
        for (std::size_t i = 0; i < rs.lambdas.size(); ++i)
            tab.rows.push_back({rs.lambdas[i], rs.residuals[static_cast<std::size_t>(k)][i],
                                0.0, 0, 0});
        tables.push_back(std::move(tab));
    }
    Table slopes{"dyson_slopes", {}};
    for (int k = 0; k <= c.order_max; ++k)
        slopes.rows.push_back(
            {static_cast<double>(k), rs.slopes[static_cast<std::size_t>(k)], 0.0, 0, 0});
    tables.push_back(std::move(slopes));
    return tables;
}

std::vector<Table> run_semiclassical_kind(const ExperimentConfig& c) {
    Table re{"semiclassical_g_re", {}}, im{"semiclassical_g_im", {}};
    for (double t : c.t_grid) {
        const complex g = semiclassical_propagator(c.model, c.x0, c.x, t, c.branches,
                                                   c.n_grid);
        re.rows.push_back({t, g.real(), 0.0, 0, 0});
        im.rows.push_back({t, g.imag(), 0.0, 0, 0});
    }
    return {std::move(re), std::move(im)};
}

std::vector<Table> run_partition_kind(const ExperimentConfig& c) {
    Table cl{"partition_classical", {}}, semi{"partition_semiclassical", {}},
        spec{"partition_spectral", {}};
    for (double beta : c.beta_grid) {
        cl.rows.push_back(
            {beta, partition_classical(c.model, beta, c.x_cutoff, c.n_quad), 0.0, 0, 0});
        semi.rows.push_back(
            {beta, partition_semiclassical(c.model, beta, c.x_cutoff, c.n_quad), 0.0, 0, 0});
        spec.rows.push_back({beta, partition_spectral(c.model, beta, c.dim), 0.0, 0, 0});
    }
    return {std::move(cl), std::move(semi), std::move(spec)};
}

std::vector<Table> run_wigner_kind(const ExperimentConfig& c) {
    Grid grid{c.grid_x_min, c.grid_x_max, c.grid_points, c.grid_dt};
    std::vector<double> momenta(static_cast<std::size_t>(c.n_p));
    for (int j = 0; j < c.n_p; ++j)
        momenta[static_cast<std::size_t>(j)] =
            c.p_min + (c.p_max - c.p_min) * static_cast<double>(j) /
                          static_cast<double>(c.n_p - 1);

    std::vector<Table> tables;
    for (const char* name : {"wigner_mass", "wigner_mean_x", "wigner_mean_p",
                             "wigner_cov_xx", "wigner_cov_xp", "wigner_cov_pp"})
        tables.push_back({name, {}});

    auto state = init_packet(c.packet, grid);
    for (double t : c.t_grid) {
        state = cn_evolve(std::move(state), grid, c.model, t);
        const auto wt = grid_wigner(state.psi, grid, momenta, c.model.hbar);
        const auto cum = cumulants(wt);
        const double vals[6] = {cum.mass,   cum.mean_x, cum.mean_p,
                                cum.cov_xx, cum.cov_xp, cum.cov_pp};
        for (int i = 0; i < 6; ++i)
            tables[static_cast<std::size_t>(i)].rows.push_back({t, vals[i], 0.0, 0, 0});
    }
    return tables;
}

std::string csv_text(const Table& table) {
    std::string out = "t,value,std_error,n_samples,n_excluded\n";
    for (const auto& row : table.rows) {
        out += format_double(row.t);
        out += ',';
        out += format_double(row.value);
        out += ',';
        out += format_double(row.std_error);
        out += ',';
        out += std::to_string(row.n_samples);
        out += ',';
        out += std::to_string(row.n_excluded);
        out += '\n';
    }
    return out;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string svg_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// Minimal polyline plot; purely cosmetic, callers swallow any failure.
std::string svg_text(const Table& table) {
    const double width = 640.0, height = 400.0;
    const double left = 70.0, right = 20.0, top = 20.0, bottom = 50.0;
    double t_lo = 0.0, t_hi = 1.0, v_lo = 0.0, v_hi = 1.0;
    bool first = true;
    for (const auto& row : table.rows) {
        if (!std::isfinite(row.value)) continue;
        if (first) {
            t_lo = t_hi = row.t;
            v_lo = v_hi = row.value;
            first = false;
        } else {
            t_lo = std::min(t_lo, row.t);
            t_hi = std::max(t_hi, row.t);
            v_lo = std::min(v_lo, row.value);
            v_hi = std::max(v_hi, row.value);
        }
    }
    if (t_hi <= t_lo) t_hi = t_lo + 1.0;
    if (v_hi <= v_lo) {
        v_lo -= 1.0;
        v_hi += 1.0;
    }
    const double pad = 0.05 * (v_hi - v_lo);
    v_lo -= pad;
    v_hi += pad;

    auto sx = [&](double t) {
        return left + (width - left - right) * (t - t_lo) / (t_hi - t_lo);
    };
    auto sy = [&](double v) {
        return height - bottom - (height - top - bottom) * (v - v_lo) / (v_hi - v_lo);
    };

    std::string pts;
    for (const auto& row : table.rows) {
        if (!std::isfinite(row.value)) continue;
        pts += svg_number(sx(row.t)) + "," + svg_number(sy(row.value)) + " ";
    }

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
           "viewBox=\"0 0 640 400\">\n";
    out += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n";
    out += "<line x1=\"" + svg_number(left) + "\" y1=\"" + svg_number(height - bottom) +
           "\" x2=\"" + svg_number(width - right) + "\" y2=\"" +
           svg_number(height - bottom) + "\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + svg_number(left) + "\" y1=\"" + svg_number(top) + "\" x2=\"" +
           svg_number(left) + "\" y2=\"" + svg_number(height - bottom) +
           "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + svg_number(left) + "\" y=\"" + svg_number(height - bottom + 18.0) +
           "\" font-size=\"12\">" + svg_number(t_lo) + "</text>\n";
    out += "<text x=\"" + svg_number(width - right - 40.0) + "\" y=\"" +
           svg_number(height - bottom + 18.0) + "\" font-size=\"12\">" + svg_number(t_hi) +
           "</text>\n";
    out += "<text x=\"4\" y=\"" + svg_number(height - bottom) + "\" font-size=\"12\">" +
           svg_number(v_lo) + "</text>\n";
    out += "<text x=\"4\" y=\"" + svg_number(top + 10.0) + "\" font-size=\"12\">" +
           svg_number(v_hi) + "</text>\n";
    out += "<text x=\"" + svg_number(width / 2.0) + "\" y=\"" + svg_number(height - 12.0) +
           "\" font-size=\"13\">t</text>\n";
    out += "<text x=\"8\" y=\"" + svg_number(height / 2.0) +
           "\" font-size=\"13\">" + table.name + "</text>\n";
    out += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"" + pts +
           "\"/>\n";
    out += "</svg>\n";
    return out;
}

}  // namespace

std::vector<std::string> run_experiment(const ExperimentConfig& config,
                                        const RunOptions& options) {
    ExperimentConfig resolved = config;
    if (options.has_seed) resolved.seed = options.seed;
    if (!options.out_dir.empty()) resolved.out_dir = options.out_dir;
    const int threads = options.threads > 0 ? options.threads : 1;

    std::vector<Table> tables;
    switch (resolved.kind) {
        case ExperimentKind::moments:
        case ExperimentKind::commuting:
        case ExperimentKind::harmonic:
            tables = run_moment_kind(resolved, threads);
            break;
        case ExperimentKind::first_passage:
            tables = run_first_passage_kind(resolved);
            break;
        case ExperimentKind::propagator:
            tables = run_propagator_kind(resolved, threads);
            break;
        case ExperimentKind::dyson:
            tables = run_dyson_kind(resolved);
            break;
        case ExperimentKind::semiclassical_g:
            tables = run_semiclassical_kind(resolved);
            break;
        case ExperimentKind::partition:
            tables = run_partition_kind(resolved);
            break;
        case ExperimentKind::wigner:
            tables = run_wigner_kind(resolved);
            break;
    }

    const fs::path dir{resolved.out_dir};
    fs::create_directories(dir);

    std::vector<std::string> written;
    for (const auto& table : tables) {
        const fs::path csv = dir / (table.name + ".csv");
        write_file(csv, csv_text(table));
        written.push_back(csv.string());
        if (resolved.plots && !options.no_plots) {
            try {
                const fs::path svg = dir / (table.name + ".svg");
                write_file(svg, svg_text(table));
                written.push_back(svg.string());
            } catch (...) {
                // Plot output never affects the run result.
            }
        }
    }

    std::string manifest = serialize_config(resolved);
    manifest += "\n[provenance]\n";
    manifest += "code_version = " +
                (options.code_version.empty() ? std::string("untracked")
                                              : options.code_version) +
                "\n";
    manifest += "seed_used = " + std::to_string(resolved.seed) + "\n";
    const fs::path mpath = dir / "manifest.ini";
    write_file(mpath, manifest);
    written.push_back(mpath.string());
    return written;
}

}  // namespace qosc
