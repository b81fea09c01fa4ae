#pragma once

// Runs a resolved configuration and renders the metadata header plus CSV.
// Argument parsing lives in the executable; this layer is testable as is.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "optomech/config.hpp"
#include "optomech/errors.hpp"
#include "optomech/model.hpp"
#include "optomech/protocols.hpp"
#include "optomech/units.hpp"
#include "optomech/validation.hpp"

namespace optomech {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 2;
inline constexpr int numerical = 3;
inline constexpr int io = 4;
} // namespace exit_code

inline constexpr const char* timestamp_begin = "# ---- begin timestamp ----";
inline constexpr const char* timestamp_end = "# ---- end timestamp ----";

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v); // no "-0"
    return buf;
}

namespace detail {

inline std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else if (c == '\n') out += ' ';
        else out += c;
    }
    return out + "\"";
}

inline std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void write_header(std::ostream& os, const RunConfig& cfg, const std::vector<std::string>& extra) {
    os << "# optomech " << version << "\n";
    os << "# experiment: " << cfg.experiment << "\n";
    os << "# seed: " << cfg.seed << "\n";
    os << "# units: config omega_m, kappa, g0, G, Delta_e are 2pi-implied (f -> 2*pi*f rad/s)\n";
    os << "# units: config gamma_c, Gamma_L are plain rates (f -> f s^-1)\n";
    os << "# units: CSV frequencies are internal values (rad/s or s^-1); quadratures use vacuum variance 1/2\n";
    if (cfg.defaults.empty()) {
        os << "# defaults applied: none\n";
    } else {
        os << "# defaults applied:";
        for (const auto& d : cfg.defaults) os << " " << d;
        os << "\n";
    }
    for (const auto& line : extra) os << "# " << line << "\n";
    os << "# config: " << cfg.resolved.dump() << "\n";
    os << timestamp_begin << "\n";
    os << "# timestamp: " << utc_now() << "\n";
    os << timestamp_end << "\n";
}

inline std::vector<std::string> prep_notes(const OperatingPoint& op) {
    std::vector<std::string> notes;
    if (!op.Delta_e) notes.push_back("note: Delta_e defaulted to Delta_m = omega_m");
    return notes;
}

inline void write_rows(std::ostream& os, const std::vector<std::string>& coords, const std::vector<SweepRow>& rows,
                       Experiment exp) {
    // The input G is the requested coupling; the effective G column is what the drive realises.
    for (const auto& c : coords) os << (c == "G" ? "G_target" : c) << ",";
    os << "alpha_abs,r,r_m,G,Delta_e,Delta_m,alpha_e_minus_r,";
    if (exp == Experiment::Memory) os << "F,n_bar_h,Theta_sq,";
    else os << "E_N,eta_minus,";
    os << "margin,cond_a,cond_b,status,message\n";
    for (const auto& r : rows) {
        for (const auto& c : coords) {
            double v = 0.0;
            if (c == "eta_ratio") v = r.eta_ratio;
            else if (c == "gamma_c") v = r.gamma_c;
            else if (c == "Gamma_L") v = r.Gamma_L;
            else if (c == "kappa") v = r.kappa;
            else if (c == "chi") v = r.chi;
            else if (c == "G") v = r.G;
            os << fmt(v) << ",";
        }
        os << fmt(r.alpha_abs) << "," << fmt(r.r) << "," << fmt(r.r_m) << "," << fmt(r.G_eff) << ","
           << fmt(r.Delta_e) << "," << fmt(r.Delta_m) << "," << fmt(r.alpha_e_minus_r) << ",";
        if (exp == Experiment::Memory) os << fmt(r.F) << "," << fmt(r.n_bar_h) << "," << fmt(r.Theta_sq) << ",";
        else os << fmt(r.E_N) << "," << fmt(r.eta_minus) << ",";
        os << fmt(r.margin) << "," << r.cond_a << "," << r.cond_b << "," << r.status << "," << csv_quote(r.message)
           << "\n";
    }
}

inline void render_grid(std::ostream& os, const RunConfig& cfg, int threads) {
    const Experiment exp = (cfg.experiment == "entangle" || (cfg.experiment == "sweep" && cfg.sweep_experiment == "entangle"))
                               ? Experiment::Entanglement
                               : Experiment::Memory;
    SweepSpec spec;
    spec.base = cfg.op;
    spec.input = cfg.input;
    spec.memory = cfg.memory;
    spec.threads = threads;
    std::vector<std::string> coords;
    std::vector<SweepRow> rows;
    if (cfg.experiment == "sweep") {
        spec.axes = cfg.axes;
        for (const auto& a : cfg.axes) coords.push_back(a.name);
        rows = sweep(spec, exp);
    } else {
        coords = {"eta_ratio", "gamma_c", "Gamma_L", "kappa", "G"};
        if (exp == Experiment::Memory) coords.push_back("chi");
        rows = {detail::evaluate_point(exp, cfg.op, cfg.input, spec)};
    }
    std::vector<std::string> extra = prep_notes(cfg.op);
    long unstable = 0;
    for (const auto& r : rows) unstable += r.status != "ok";
    extra.push_back("points: " + std::to_string(rows.size()) + ", not ok: " + std::to_string(unstable));
    write_header(os, cfg, extra);
    write_rows(os, coords, rows, exp);
}

inline void render_validate(std::ostream& os, const RunConfig& cfg, int threads) {
    ValidationCase c = cfg.validate.model == "memory" ? memory_case(cfg.seed, cfg.validate.n_traj)
                                                      : decoupled_case(cfg.seed, cfg.validate.n_traj);
    const ValidationReport rep = run_validation(c, threads);
    write_header(os, cfg,
                 {"validation model: " + rep.name, "trajectories: " + std::to_string(rep.mc.n_traj),
                  "duration: " + fmt(c.duration) + " s, dt: " + fmt(c.spec.dt) + " s",
                  "max |z|: " + fmt(rep.max_abs_z)});
    os << "row,col,moment_equation,monte_carlo,std_error,z\n";
    for (const auto& r : rep.rows) {
        os << quadrature_name(r.i) << "," << quadrature_name(r.j) << "," << fmt(r.expected) << ","
           << fmt(r.monte_carlo) << "," << fmt(r.std_error) << "," << fmt(r.z) << "\n";
    }
}

inline void render_kerr(std::ostream& os, const RunConfig& cfg) {
    const double omega_c = units::two_pi * units::speed_of_light / (cfg.kerr.wavelength_nm * 1e-9);
    const KerrEstimate k = kerr_coefficient(omega_c, cfg.kerr.n0, cfg.kerr.n2, cfg.kerr.V_eff);
    std::vector<std::string> extra;
    for (const auto& w : k.warnings) extra.push_back("warning: " + w);
    write_header(os, cfg, extra);
    const bool inside = k.u >= kerr_window_low && k.u <= kerr_window_high;
    os << "wavelength_nm,n0,n2_cm2_per_W,V_eff_um3,omega_c,u,window_low,window_high,in_window\n";
    os << fmt(cfg.kerr.wavelength_nm) << "," << fmt(cfg.kerr.n0) << "," << fmt(cfg.kerr.n2) << ","
       << fmt(cfg.kerr.V_eff) << "," << fmt(omega_c) << "," << fmt(k.u) << "," << fmt(kerr_window_low) << ","
       << fmt(kerr_window_high) << "," << (inside ? 1 : 0) << "\n";
}

} // namespace detail

/// Runs the experiment and returns the full output document. Throws on
/// configuration or numerical failure; per-point failures in grids become
/// status rows instead.
inline std::string render(const RunConfig& cfg, int threads = 1) {
    std::ostringstream os;
    if (cfg.experiment == "validate") detail::render_validate(os, cfg, threads);
    else if (cfg.experiment == "kerr") detail::render_kerr(os, cfg);
    else detail::render_grid(os, cfg, threads);
    return os.str();
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("cannot read '" + path + "'");
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("cannot write '" + path + "'");
}

struct Invocation {
    std::string subcommand;
    std::optional<std::string> config_path;
    std::optional<std::string> out_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::vector<std::string> overrides;
};

/// Maps a failure to its exit code and prints a one-line message.
inline int report_failure(std::exception_ptr failure, std::ostream& err) {
    try {
        std::rethrow_exception(failure);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return exit_code::config;
    } catch (const PreconditionError& e) {
        err << "config error: " << e.what() << "\n";
        return exit_code::config;
    } catch (const DomainError& e) {
        err << "config error: " << e.what() << "\n";
        return exit_code::config;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << "\n";
        return exit_code::io;
    } catch (const std::exception& e) {
        err << "numerical error: " << e.what() << "\n";
        return exit_code::numerical;
    } catch (...) {
        err << "numerical error: unknown failure\n";
        return exit_code::numerical;
    }
}

/// Whole pipeline with exit-code mapping: 2 config, 3 numerical, 4 I/O.
inline int run(const Invocation& inv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    try {
        const std::string text = inv.config_path ? read_file(*inv.config_path) : std::string();
        std::vector<std::string> overrides = inv.overrides;
        if (inv.seed) overrides.push_back("seed=" + std::to_string(*inv.seed));
        if (inv.out_path) overrides.push_back("output=" + json(*inv.out_path).dump());
        const RunConfig cfg = parse_config(text, inv.subcommand, overrides);
        const int threads = resolve_threads(inv.threads, cfg);
        const std::string doc = render(cfg, threads);
        if (cfg.output) write_file(*cfg.output, doc);
        else out << doc << std::flush;
        return exit_code::ok;
    } catch (...) {
        return report_failure(std::current_exception(), err);
    }
}

} // namespace optomech
