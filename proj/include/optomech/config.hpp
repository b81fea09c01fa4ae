#pragma once

// JSON run configuration: defaults, unit-bearing frequencies, dotted-path
// overrides and a resolved document that replays the run.

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "optomech/errors.hpp"
#include "optomech/protocols.hpp"
#include "optomech/units.hpp"

namespace optomech {

using json = nlohmann::ordered_json;

inline constexpr const char* version = "1.0.0";

/// Keys whose config value f means the angular frequency 2 pi f.
inline bool is_angular_key(const std::string& key) {
    return key == "omega_m" || key == "kappa" || key == "g0" || key == "G" || key == "Delta_e";
}

/// Keys quoted as plain rates (value f means f s^-1).
inline bool is_rate_key(const std::string& key) { return key == "gamma_c" || key == "Gamma_L"; }

/// Parses "<number> <unit>" with unit Hz, kHz, MHz or GHz into Hz.
inline double parse_frequency(const json& v, const std::string& where) {
    if (!v.is_string()) throw ConfigError(where + ": frequency needs a unit (e.g. \"10 MHz\")");
    const std::string s = v.get<std::string>();
    std::size_t pos = 0;
    double number = 0.0;
    try {
        number = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ConfigError(where + ": cannot read a number from \"" + s + "\"");
    }
    std::string unit = s.substr(pos);
    unit.erase(0, unit.find_first_not_of(" \t"));
    unit.erase(unit.find_last_not_of(" \t") + 1);
    double scale = 0.0;
    if (unit == "Hz") scale = 1.0;
    else if (unit == "kHz") scale = units::kHz;
    else if (unit == "MHz") scale = units::MHz;
    else if (unit == "GHz") scale = units::GHz;
    else if (unit.empty()) throw ConfigError(where + ": frequency \"" + s + "\" is missing a unit (Hz, kHz, MHz, GHz)");
    else throw ConfigError(where + ": unknown unit \"" + unit + "\"");
    return number * scale;
}

/// Internal value of a frequency key: rad/s for 2pi-implied keys, s^-1 otherwise.
inline double frequency_value(const std::string& key, const json& v, const std::string& where) {
    const double hz = parse_frequency(v, where);
    return is_angular_key(key) ? units::angular(hz) : hz;
}

inline std::string format_hz(double hz) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g Hz", hz);
    return buf;
}

struct KerrInputs {
    double wavelength_nm = 1064.0;
    double n0 = 2.0;
    double n2 = 1e-13;  ///< cm^2/W
    double V_eff = 1e2; ///< um^3
};

struct ValidateSettings {
    std::string model = "decoupled"; ///< decoupled | memory
    long n_traj = 2000;
};

struct RunConfig {
    std::string experiment; ///< memory | entangle | sweep | validate | kerr
    OperatingPoint op;
    MemoryInput input;
    MemoryOptions memory;
    std::string sweep_experiment = "memory";
    std::vector<Axis> axes;
    ValidateSettings validate;
    KerrInputs kerr;
    std::optional<std::string> output;
    std::uint64_t seed = 42;
    std::optional<int> threads;

    json resolved;                       ///< full document, replayable
    std::vector<std::string> defaults;   ///< dotted paths filled from defaults
};

inline const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> kinds{"memory", "entangle", "sweep", "validate", "kerr"};
    return kinds;
}

namespace detail {

inline json params_defaults(bool entangle) {
    json p;
    p["omega_m"] = "10 MHz";
    p["quality_factor"] = 2e6;
    p["kappa"] = entangle ? "5 MHz" : "100 kHz";
    p["g0"] = "100 Hz";
    p["n_th"] = 3.0;
    p["gamma_c"] = "10 kHz";
    p["Gamma_L"] = "10 kHz";
    p["G_ratio"] = entangle ? 0.5 : 0.05;
    p["G"] = nullptr;
    p["eta_ratio"] = max_eta_ratio;
    p["r_prime"] = 0.0;
    p["Delta_e"] = nullptr;
    return p;
}

inline json protocol_defaults() {
    json p;
    p["mu_re"] = 0.5;
    p["mu_im"] = 0.0;
    p["chi"] = 0.0;
    p["t_store_omega_m"] = 65.0;
    p["read_phase_noise"] = true;
    p["phase_noise"] = true;
    p["interaction_frame"] = true;
    p["steps_per_period"] = default_steps_per_period;
    return p;
}

inline json axis_defaults() {
    json a;
    a["name"] = nullptr;
    a["min"] = nullptr;
    a["max"] = nullptr;
    a["points"] = nullptr;
    a["spacing"] = "linear";
    a["values"] = nullptr;
    return a;
}

inline json defaults_for(const std::string& kind, const std::string& sweep_kind) {
    json d;
    d["experiment"] = kind;
    d["seed"] = 42;
    d["threads"] = nullptr;
    d["output"] = nullptr;
    if (kind == "memory" || kind == "entangle" || kind == "sweep") {
        d["params"] = params_defaults(kind == "entangle" || (kind == "sweep" && sweep_kind == "entangle"));
    }
    if (kind == "memory" || kind == "sweep") d["protocol"] = protocol_defaults();
    if (kind == "sweep") {
        d["sweep"]["experiment"] = "memory";
        d["sweep"]["axes"] = json::array();
    }
    if (kind == "validate") {
        d["validate"]["model"] = "decoupled";
        d["validate"]["n_traj"] = 2000;
    }
    if (kind == "kerr") {
        d["kerr"]["wavelength_nm"] = 1064.0;
        d["kerr"]["n0"] = 2.0;
        d["kerr"]["n2"] = 1e-13;
        d["kerr"]["V_eff"] = 1e2;
    }
    return d;
}

// Merges `user` onto `defaults`, rejecting unknown keys and recording
// every leaf that came from the defaults.
inline void merge(json& target, const json& user, const std::string& path, std::vector<std::string>& filled) {
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!target.contains(it.key())) throw ConfigError("unknown configuration key '" + key + "'");
    }
    for (auto it = target.begin(); it != target.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!user.contains(it.key())) {
            if (it.value().is_object()) merge(it.value(), json::object(), key, filled);
            else filled.push_back(key);
            continue;
        }
        const json& u = user.at(it.key());
        if (it.value().is_object()) {
            if (!u.is_object()) throw ConfigError("'" + key + "' must be an object");
            merge(it.value(), u, key, filled);
        } else if (key == "sweep.axes") {
            if (!u.is_array()) throw ConfigError("'sweep.axes' must be an array");
            json axes = json::array();
            for (std::size_t i = 0; i < u.size(); ++i) {
                if (!u[i].is_object()) throw ConfigError("sweep axis " + std::to_string(i) + " must be an object");
                json a = axis_defaults();
                std::vector<std::string> ignored;
                merge(a, u[i], key + "[" + std::to_string(i) + "]", ignored);
                axes.push_back(a);
            }
            it.value() = axes;
        } else {
            it.value() = u;
        }
    }
}

inline json& at_path(json& doc, const std::string& dotted, bool create) {
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = dotted.find('.', start);
        const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("malformed override path '" + dotted + "'");
        if (!node->is_object()) {
            if (!create || !node->is_null()) throw ConfigError("override path '" + dotted + "' crosses a non-object");
            *node = json::object();
        }
        node = &(*node)[part];
        if (dot == std::string::npos) return *node;
        start = dot + 1;
    }
}

/// Applies "a.b.c=value" overrides; the value is read as JSON when it
/// parses, otherwise as a string.
inline void apply_overrides(json& doc, const std::vector<std::string>& overrides) {
    for (const auto& ov : overrides) {
        const std::size_t eq = ov.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + ov + "' is not key=value");
        const std::string key = ov.substr(0, eq);
        const std::string raw = ov.substr(eq + 1);
        json value = json::parse(raw, nullptr, false);
        if (value.is_discarded()) value = raw;
        at_path(doc, key, true) = value;
    }
}

inline double number_at(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError("'" + where + "' must be a number");
    return v.get<double>();
}

inline bool bool_at(const json& v, const std::string& where) {
    if (!v.is_boolean()) throw ConfigError("'" + where + "' must be true or false");
    return v.get<bool>();
}

inline std::string string_at(const json& v, const std::string& where) {
    if (!v.is_string()) throw ConfigError("'" + where + "' must be a string");
    return v.get<std::string>();
}

inline std::string parse_error_position(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline double axis_value(const std::string& name, const json& v, const std::string& where) {
    if (is_angular_key(name) || is_rate_key(name) || name == "kappa") return frequency_value(name, v, where);
    return number_at(v, where);
}

inline Axis build_axis(const json& a, std::size_t index) {
    const std::string where = "sweep.axes[" + std::to_string(index) + "]";
    const std::string name = string_at(a["name"], where + ".name");
    const auto& names = axis_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        throw ConfigError(where + ": unknown sweep axis '" + name + "'");
    }
    if (!a["values"].is_null()) {
        if (!a["values"].is_array()) throw ConfigError(where + ".values must be an array");
        Axis axis{name, {}};
        for (std::size_t i = 0; i < a["values"].size(); ++i) {
            axis.values.push_back(axis_value(name, a["values"][i], where + ".values[" + std::to_string(i) + "]"));
        }
        return axis;
    }
    if (a["min"].is_null() || a["max"].is_null() || a["points"].is_null()) {
        throw ConfigError(where + ": give either values or min, max and points");
    }
    const double lo = axis_value(name, a["min"], where + ".min");
    const double hi = axis_value(name, a["max"], where + ".max");
    if (!a["points"].is_number_integer() || a["points"].get<long>() < 0) {
        throw ConfigError(where + ".points must be a non-negative integer");
    }
    const int points = a["points"].get<int>();
    const std::string spacing = string_at(a["spacing"], where + ".spacing");
    if (spacing == "linear") return linear_axis(name, lo, hi, points);
    if (spacing == "log") return log_axis(name, lo, hi, points);
    throw ConfigError(where + ".spacing must be 'linear' or 'log'");
}

} // namespace detail

/// Parses a configuration document for `subcommand`. An empty text means
/// "all defaults". Overrides are dotted paths applied before validation.
inline RunConfig parse_config(const std::string& text, const std::string& subcommand,
                              const std::vector<std::string>& overrides = {}) {
    const auto& kinds = experiment_kinds();
    if (std::find(kinds.begin(), kinds.end(), subcommand) == kinds.end()) {
        throw ConfigError("unknown experiment '" + subcommand + "'");
    }

    json user = json::object();
    if (!text.empty()) {
        try {
            user = json::parse(text);
        } catch (const json::parse_error& e) {
            // nlohmann embeds its own position; keep only the reason.
            std::string reason = e.what();
            const std::size_t colon = reason.find(": ", reason.find("column"));
            if (colon != std::string::npos) reason = reason.substr(colon + 2);
            throw ConfigError("parse error at " + detail::parse_error_position(text, e.byte == 0 ? 0 : e.byte - 1) +
                              ": " + reason);
        }
        if (!user.is_object()) throw ConfigError("configuration must be a JSON object");
    }
    detail::apply_overrides(user, overrides);

    if (user.contains("experiment")) {
        if (!user["experiment"].is_string() || user["experiment"].get<std::string>() != subcommand) {
            throw ConfigError("configuration experiment does not match subcommand '" + subcommand + "'");
        }
    }
    std::string sweep_kind = "memory";
    if (subcommand == "sweep" && user.contains("sweep") && user["sweep"].is_object() &&
        user["sweep"].contains("experiment")) {
        sweep_kind = detail::string_at(user["sweep"]["experiment"], "sweep.experiment");
        if (sweep_kind != "memory" && sweep_kind != "entangle") {
            throw ConfigError("sweep.experiment must be 'memory' or 'entangle'");
        }
    }

    RunConfig cfg;
    cfg.experiment = subcommand;
    json doc = detail::defaults_for(subcommand, sweep_kind);
    detail::merge(doc, user, "", cfg.defaults);

    // Top level.
    if (!doc["seed"].is_number_unsigned() && !(doc["seed"].is_number_integer() && doc["seed"].get<long long>() >= 0)) {
        throw ConfigError("'seed' must be a non-negative integer");
    }
    cfg.seed = doc["seed"].get<std::uint64_t>();
    if (!doc["threads"].is_null()) {
        if (!doc["threads"].is_number_integer() || doc["threads"].get<int>() < 1) {
            throw ConfigError("'threads' must be a positive integer");
        }
        cfg.threads = doc["threads"].get<int>();
    }
    if (!doc["output"].is_null()) cfg.output = detail::string_at(doc["output"], "output");

    if (doc.contains("params")) {
        const json& p = doc["params"];
        OperatingPoint& op = cfg.op;
        op.omega_m = frequency_value("omega_m", p["omega_m"], "params.omega_m");
        op.quality_factor = detail::number_at(p["quality_factor"], "params.quality_factor");
        op.kappa = frequency_value("kappa", p["kappa"], "params.kappa");
        op.g0 = frequency_value("g0", p["g0"], "params.g0");
        op.n_th = detail::number_at(p["n_th"], "params.n_th");
        op.gamma_c = frequency_value("gamma_c", p["gamma_c"], "params.gamma_c");
        op.Gamma_L = frequency_value("Gamma_L", p["Gamma_L"], "params.Gamma_L");
        op.G = p["G"].is_null() ? detail::number_at(p["G_ratio"], "params.G_ratio") * op.omega_m
                                : frequency_value("G", p["G"], "params.G");
        op.eta_ratio = detail::number_at(p["eta_ratio"], "params.eta_ratio");
        op.r_prime = detail::number_at(p["r_prime"], "params.r_prime");
        if (!p["Delta_e"].is_null()) op.Delta_e = frequency_value("Delta_e", p["Delta_e"], "params.Delta_e");

        if (!(op.omega_m > 0.0)) throw ConfigError("params.omega_m must be positive");
        if (!(op.kappa > 0.0)) throw ConfigError("params.kappa must be positive");
        if (!(op.g0 > 0.0)) throw ConfigError("params.g0 must be positive");
        if (!(op.quality_factor > 0.0)) throw ConfigError("params.quality_factor must be positive");
        if (op.n_th < 0.0) throw ConfigError("params.n_th must be non-negative");
        if (op.gamma_c < 0.0 || op.Gamma_L < 0.0) throw ConfigError("params.gamma_c and Gamma_L must be non-negative");
        if (!(op.G > 0.0)) throw ConfigError("params.G must be positive");
        if (!(op.eta_ratio >= 0.0) || op.eta_ratio > max_eta_ratio) {
            throw ConfigError("params.eta_ratio must lie in [0, 0.9999]");
        }
    }
    if (doc.contains("protocol")) {
        const json& p = doc["protocol"];
        cfg.input.mu = {detail::number_at(p["mu_re"], "protocol.mu_re"), detail::number_at(p["mu_im"], "protocol.mu_im")};
        cfg.input.chi = detail::number_at(p["chi"], "protocol.chi");
        cfg.memory.t_store_omega_m = detail::number_at(p["t_store_omega_m"], "protocol.t_store_omega_m");
        if (cfg.memory.t_store_omega_m < 0.0) throw ConfigError("protocol.t_store_omega_m must be non-negative");
        cfg.memory.read_phase_noise = detail::bool_at(p["read_phase_noise"], "protocol.read_phase_noise");
        cfg.memory.phase_noise = detail::bool_at(p["phase_noise"], "protocol.phase_noise");
        cfg.memory.interaction_frame = detail::bool_at(p["interaction_frame"], "protocol.interaction_frame");
        if (!p["steps_per_period"].is_number_integer() || p["steps_per_period"].get<int>() < 1) {
            throw ConfigError("protocol.steps_per_period must be a positive integer");
        }
        cfg.memory.steps_per_period = p["steps_per_period"].get<int>();
    }
    if (doc.contains("sweep")) {
        cfg.sweep_experiment = sweep_kind;
        const json& axes = doc["sweep"]["axes"];
        if (axes.empty()) throw ConfigError("sweep.axes must list at least one axis");
        for (std::size_t i = 0; i < axes.size(); ++i) cfg.axes.push_back(detail::build_axis(axes[i], i));
    }
    if (doc.contains("validate")) {
        const json& v = doc["validate"];
        cfg.validate.model = detail::string_at(v["model"], "validate.model");
        if (cfg.validate.model != "decoupled" && cfg.validate.model != "memory") {
            throw ConfigError("validate.model must be 'decoupled' or 'memory'");
        }
        if (!v["n_traj"].is_number_integer() || v["n_traj"].get<long>() < 100) {
            throw ConfigError("validate.n_traj must be an integer of at least 100");
        }
        cfg.validate.n_traj = v["n_traj"].get<long>();
    }
    if (doc.contains("kerr")) {
        const json& k = doc["kerr"];
        cfg.kerr.wavelength_nm = detail::number_at(k["wavelength_nm"], "kerr.wavelength_nm");
        cfg.kerr.n0 = detail::number_at(k["n0"], "kerr.n0");
        cfg.kerr.n2 = detail::number_at(k["n2"], "kerr.n2");
        cfg.kerr.V_eff = detail::number_at(k["V_eff"], "kerr.V_eff");
        if (!(cfg.kerr.wavelength_nm > 0.0) || !(cfg.kerr.n0 > 0.0) || !(cfg.kerr.n2 > 0.0) || !(cfg.kerr.V_eff > 0.0)) {
            throw ConfigError("kerr inputs must be positive");
        }
    }
    cfg.resolved = doc;
    return cfg;
}

/// Thread count: command line, then configuration, then OPTOMECH_THREADS, then 1.
inline int resolve_threads(std::optional<int> cli, const RunConfig& cfg) {
    if (cli) return std::max(1, *cli);
    if (cfg.threads) return *cfg.threads;
    if (const char* env = std::getenv("OPTOMECH_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
        throw ConfigError("OPTOMECH_THREADS must be a positive integer");
    }
    return 1;
}

} // namespace optomech
