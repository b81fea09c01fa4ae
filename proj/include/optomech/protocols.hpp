#pragma once

// Write/store/read quantum memory and stationary optomechanical
// entanglement, plus grid sweeps over either experiment.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "optomech/dynamics.hpp"
#include "optomech/errors.hpp"
#include "optomech/gaussian.hpp"
#include "optomech/model.hpp"
#include "optomech/stochastic.hpp"
#include "optomech/units.hpp"

namespace optomech {

/// Laboratory operating point before inversion. omega_m is the nominal
/// mechanical frequency: the squeezing-frame frequency Delta_m the drive is
/// tuned to, and the reference for gamma_m = omega_m / (2 Q).
struct OperatingPoint {
    double omega_m = units::angular(10.0 * units::MHz);
    double quality_factor = 2e6;
    double kappa = units::angular(100.0 * units::kHz);
    double g0 = units::angular(100.0);
    double n_th = 3.0;
    double gamma_c = 10.0 * units::kHz;
    double Gamma_L = 10.0 * units::kHz;
    double G = 0.05 * units::angular(10.0 * units::MHz);
    double eta_ratio = max_eta_ratio;
    double r_prime = 0.0;
    std::optional<double> Delta_e; ///< defaults to Delta_m = omega_m
};

inline OperatingPoint memory_defaults() { return {}; }

inline OperatingPoint entanglement_defaults() {
    OperatingPoint op;
    op.kappa = units::angular(5.0 * units::MHz);
    op.G = 0.5 * op.omega_m;
    return op;
}

struct Prepared {
    PhysicalParams params;
    DriveSolution drive;
    SteadyState steady;
    EffectiveParams eff;
};

/// Inverts the operating point for the drive, re-solves the mean field from
/// the constructed root and derives the effective parameters.
inline Prepared prepare(const OperatingPoint& op) {
    PhysicalParams base;
    base.omega_m = op.omega_m;
    base.gamma_m = gamma_from_quality(op.omega_m, op.quality_factor);
    base.kappa = op.kappa;
    base.g0 = op.g0;
    base.n_th = op.n_th;
    base.gamma_c = op.gamma_c;
    base.Gamma_L = op.Gamma_L;

    DriveTarget target;
    target.G = op.G;
    target.eta_ratio = op.eta_ratio;
    target.r_prime = op.r_prime;
    target.Delta_m = op.omega_m;
    target.Delta_e = op.Delta_e;

    Prepared out;
    out.drive = invert_for_drive(target, base);
    out.params = out.drive.params;
    SteadyStateOptions sso;
    sso.seed = std::pair{out.drive.alpha, out.drive.beta};
    out.steady = solve_steady_state(out.params, sso);
    out.eff = derive_effective(out.params, out.steady.alpha, out.steady.beta);
    return out;
}

// ---------------------------------------------------------------------------
// Quantum memory

struct MemorySchedule {
    double t_write = 0.0;
    double t_store = 0.0;
    double t_read = 0.0;
    int read_sign = -1;
    bool read_phase_noise = true;

    /// pi/(2G) pulses around a 65/omega_m storage interval.
    static MemorySchedule standard(double G, double omega_m) {
        MemorySchedule s;
        s.t_write = units::pi / (2.0 * G);
        s.t_read = s.t_write;
        s.t_store = 65.0 / omega_m;
        return s;
    }
};

struct MemoryInput {
    std::complex<double> mu{0.5, 0.0};
    double chi = 0.0;
};

struct MemoryOptions {
    int steps_per_period = default_steps_per_period;
    bool phase_noise = true; ///< false forces phase_noise_on off in every phase
    bool interaction_frame = true; ///< undo the free optical rotation before comparing
    // Used only when no explicit schedule is given.
    double t_store_omega_m = 65.0;
    bool read_phase_noise = true;
};

struct MemoryResult {
    double F = 0.0;
    double n_bar_h = 0.0;
    double Theta_sq = 0.0;
    GaussianState final_optical;
    std::vector<MomentState> snapshots; ///< start, after write, after store, after read
    Prepared prep;
    MemorySchedule schedule;
    double margin = 0.0; ///< smallest stability margin over the three phases
};

namespace detail {

inline double phase_margin(const LinearModel& m, const char* phase) {
    const StabilityReport st = is_stable(active_drift(m));
    if (!st.stable) throw StabilityError(std::string("memory protocol: ") + phase + " phase is unstable", st.margin);
    return st.margin;
}

} // namespace detail

inline MemoryResult run_memory(const OperatingPoint& op, const MemoryInput& in = {},
                               std::optional<MemorySchedule> schedule = std::nullopt,
                               const MemoryOptions& opt = {}) {
    MemoryResult res;
    res.prep = prepare(op);
    const EffectiveParams& eff = res.prep.eff;
    const PhysicalParams& p = res.prep.params;
    if (schedule) {
        res.schedule = *schedule;
    } else {
        res.schedule = MemorySchedule::standard(eff.G, op.omega_m);
        res.schedule.t_store = opt.t_store_omega_m / op.omega_m;
        res.schedule.read_phase_noise = opt.read_phase_noise;
    }
    const MemorySchedule& sch = res.schedule;
    if (!(sch.t_write > 0.0) || !(sch.t_store >= 0.0) || !(sch.t_read > 0.0)) {
        throw PreconditionError("memory schedule times must be positive");
    }

    const LinearModel write = make_model(eff, p, {true, +1, opt.phase_noise, true});
    const LinearModel store = make_model(eff, p, {false, +1, false, false});
    const LinearModel read = make_model(eff, p, {true, sch.read_sign, opt.phase_noise && sch.read_phase_noise, true});
    res.margin = std::min({detail::phase_margin(write, "write"), detail::phase_margin(store, "store"),
                           detail::phase_margin(read, "read")});

    const GaussianState input = initial_memory_state(in.mu, in.chi);
    MomentState s;
    s.mean.head<2>() = input.mean;
    s.V.topLeftCorner<2, 2>() = input.cov;
    s.V(2, 2) = 0.5;
    s.V(3, 3) = 0.5;
    s.V(4, 4) = p.gamma_c * p.Gamma_L; // stationary phase noise
    res.snapshots.push_back(s);

    auto step = [&](const LinearModel& m, double duration) {
        s = evolve(m, s, duration, recommended_dt(m, opt.steps_per_period));
        res.snapshots.push_back(s);
    };
    step(write, sch.t_write);
    step(store, sch.t_store);
    step(read, sch.t_read);

    GaussianState out = partial_state(s, {0});
    if (opt.interaction_frame) {
        // Free evolution X' = De P, P' = -De X rotates by De t; rotate back.
        const double ph = eff.Delta_e * s.t;
        Eigen::Matrix2d rot;
        rot << std::cos(ph), std::sin(ph), -std::sin(ph), std::cos(ph);
        out.cov = rot.transpose() * out.cov * rot;
        out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
        out.mean = rot.transpose() * out.mean;
    }
    const FidelityResult fid = gaussian_fidelity(input, out);
    res.F = fid.F;
    res.n_bar_h = fid.n_bar_h;
    res.Theta_sq = fid.Theta_sq;
    res.final_optical = out;
    return res;
}

// ---------------------------------------------------------------------------
// Stationary entanglement

struct EntanglementResult {
    double E_N = 0.0;
    double eta_minus = 0.0;
    double margin = 0.0;
    bool cond_a = false;
    bool cond_b = false;
    double r_max = 0.0;
    double G_max = 0.0;
    Mat5 V = Mat5::Zero();
    Prepared prep;
};

/// Stability failure that also carries the Routh-Hurwitz diagnostics.
class EntanglementStabilityError : public StabilityError {
public:
    EntanglementStabilityError(const std::string& what, double margin, bool a, bool b)
        : StabilityError(what, margin), cond_a(a), cond_b(b) {}
    bool cond_a;
    bool cond_b;
};

inline EntanglementResult run_entanglement(const OperatingPoint& op) {
    EntanglementResult res;
    res.prep = prepare(op);
    const EffectiveParams& eff = res.prep.eff;
    const PhysicalParams& p = res.prep.params;
    const LinearModel m = make_model(eff, p, {});

    const RouthHurwitz rh = routh_hurwitz(eff, p.kappa, p.gamma_m);
    res.cond_a = rh.cond_a;
    res.cond_b = rh.cond_b;
    res.r_max = rh.r_max;
    res.G_max = rh.G_max;
    const StabilityReport st = is_stable(active_drift(m));
    res.margin = st.margin;
    if (!st.stable) {
        throw EntanglementStabilityError("entanglement: drift matrix is unstable (cond_a=" +
                                             std::to_string(rh.cond_a) + ", cond_b=" + std::to_string(rh.cond_b) + ")",
                                         st.margin, rh.cond_a, rh.cond_b);
    }
    res.V = steady_covariance(m);
    const NegativityResult neg = negativity(res.V.topLeftCorner<4, 4>());
    res.E_N = neg.E_N;
    res.eta_minus = neg.eta_minus;
    return res;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class Experiment { Memory, Entanglement };

/// Axis values are in internal units (rad/s for kappa and G, s^-1 for
/// gamma_c and Gamma_L).
struct Axis {
    std::string name;
    std::vector<double> values;
};

inline const std::vector<std::string>& axis_names() {
    static const std::vector<std::string> names{"eta_ratio", "gamma_c", "Gamma_L", "kappa", "chi", "G"};
    return names;
}

inline Axis linear_axis(std::string name, double lo, double hi, int points) {
    Axis a{std::move(name), {}};
    for (int i = 0; i < points; ++i) a.values.push_back(points == 1 ? lo : lo + (hi - lo) * i / (points - 1));
    return a;
}

inline Axis log_axis(std::string name, double lo, double hi, int points) {
    if (!(lo > 0.0) || !(hi > 0.0)) throw ConfigError("log axis '" + name + "' needs positive bounds");
    Axis a{std::move(name), {}};
    for (int i = 0; i < points; ++i) {
        a.values.push_back(points == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1)));
    }
    return a;
}

struct SweepSpec {
    std::vector<Axis> axes;
    OperatingPoint base;
    MemoryInput input;
    std::optional<MemorySchedule> schedule;
    MemoryOptions memory;
    int threads = 1;
};

struct SweepRow {
    static constexpr double nan = std::numeric_limits<double>::quiet_NaN();

    // inputs
    double eta_ratio = nan, gamma_c = nan, Gamma_L = nan, kappa = nan, chi = nan, G = nan;
    // effective parameters
    double alpha_abs = nan, r = nan, r_m = nan, G_eff = nan, Delta_e = nan, Delta_m = nan, alpha_e_minus_r = nan;
    // results
    double F = nan, n_bar_h = nan, Theta_sq = nan, E_N = nan, eta_minus = nan, margin = nan;
    int cond_a = -1, cond_b = -1; ///< -1 when not evaluated
    std::string status = "ok";
    std::string message;
};

namespace detail {

inline void apply_axis(const std::string& name, double v, OperatingPoint& op, MemoryInput& in) {
    if (name == "eta_ratio") op.eta_ratio = v;
    else if (name == "gamma_c") op.gamma_c = v;
    else if (name == "Gamma_L") op.Gamma_L = v;
    else if (name == "kappa") op.kappa = v;
    else if (name == "chi") in.chi = v;
    else if (name == "G") op.G = v;
    else throw ConfigError("unknown sweep axis '" + name + "'");
}

inline void fill_effective(SweepRow& row, const EffectiveParams& e) {
    row.alpha_abs = e.alpha_abs;
    row.r = e.r;
    row.r_m = e.r_m;
    row.G_eff = e.G;
    row.Delta_e = e.Delta_e;
    row.Delta_m = e.Delta_m;
    row.alpha_e_minus_r = e.alpha_e_minus_r();
}

inline SweepRow evaluate_point(Experiment exp, const OperatingPoint& op, const MemoryInput& in,
                               const SweepSpec& spec) {
    SweepRow row;
    row.eta_ratio = op.eta_ratio;
    row.gamma_c = op.gamma_c;
    row.Gamma_L = op.Gamma_L;
    row.kappa = op.kappa;
    row.chi = in.chi;
    row.G = op.G;
    try {
        if (exp == Experiment::Memory) {
            const MemoryResult m = run_memory(op, in, spec.schedule, spec.memory);
            fill_effective(row, m.prep.eff);
            row.F = m.F;
            row.n_bar_h = m.n_bar_h;
            row.Theta_sq = m.Theta_sq;
            row.margin = m.margin;
            const RouthHurwitz rh = routh_hurwitz(m.prep.eff, m.prep.params.kappa, m.prep.params.gamma_m);
            row.cond_a = rh.cond_a;
            row.cond_b = rh.cond_b;
        } else {
            const EntanglementResult e = run_entanglement(op);
            fill_effective(row, e.prep.eff);
            row.E_N = e.E_N;
            row.eta_minus = e.eta_minus;
            row.margin = e.margin;
            row.cond_a = e.cond_a;
            row.cond_b = e.cond_b;
        }
    } catch (const EntanglementStabilityError& e) {
        row.status = "unstable";
        row.margin = e.margin();
        row.cond_a = e.cond_a;
        row.cond_b = e.cond_b;
        row.message = e.what();
    } catch (const StabilityError& e) {
        row.status = "unstable";
        row.margin = e.margin();
        row.message = e.what();
    } catch (const ConvergenceError& e) {
        row.status = "no_convergence";
        row.message = e.what();
    } catch (const DivergenceError& e) {
        row.status = "diverged";
        row.message = e.what();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        row.status = "infeasible";
        row.message = e.what();
    }
    return row;
}

} // namespace detail

/// Cartesian product of the axes (first axis slowest). Rows come back in
/// grid order regardless of thread count; failing points carry a status
/// instead of being dropped.
inline std::vector<SweepRow> sweep(const SweepSpec& spec, Experiment exp) {
    for (const auto& a : spec.axes) {
        if (std::find(axis_names().begin(), axis_names().end(), a.name) == axis_names().end()) {
            throw ConfigError("unknown sweep axis '" + a.name + "'");
        }
        for (double v : a.values) {
            if (!std::isfinite(v)) throw ConfigError("sweep axis '" + a.name + "' has a non-finite value");
        }
    }
    long total = spec.axes.empty() ? 0 : 1;
    for (const auto& a : spec.axes) total *= static_cast<long>(a.values.size());

    std::vector<SweepRow> rows(total);
    detail::parallel_for(total, spec.threads, [&](long idx) {
        OperatingPoint op = spec.base;
        MemoryInput in = spec.input;
        long rem = idx;
        for (auto it = spec.axes.rbegin(); it != spec.axes.rend(); ++it) {
            const long n = static_cast<long>(it->values.size());
            detail::apply_axis(it->name, it->values[rem % n], op, in);
            rem /= n;
        }
        rows[idx] = detail::evaluate_point(exp, op, in, spec);
    });
    return rows;
}

} // namespace optomech
