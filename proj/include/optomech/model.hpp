#pragma once

// Laboratory parameters, mean-field steady state and the squeezing-frame
// effective parameters of the Kerr/Duffing optomechanical system.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "optomech/errors.hpp"
#include "optomech/units.hpp"

namespace optomech {

using cplx = std::complex<double>;

/// Laboratory-frame inputs. Every frequency is angular (rad/s) except the
/// phase-noise rates gamma_c and Gamma_L, which are plain rates (s^-1).
struct PhysicalParams {
    double omega_m = 0.0;     ///< bare mechanical frequency
    double gamma_m = 0.0;     ///< mechanical damping
    double kappa = 0.0;       ///< cavity decay
    double g0 = 0.0;          ///< single-photon coupling
    double delta0 = 0.0;      ///< bare laser-cavity detuning
    double kerr_u = 0.0;      ///< Kerr coefficient u
    double duffing_eta = 0.0; ///< Duffing amplitude
    double drive_EL = 0.0;    ///< drive strength E_L
    double n_th = 0.0;        ///< mean thermal phonon number
    double gamma_c = 0.0;     ///< phase-noise cut-off
    double Gamma_L = 0.0;     ///< laser linewidth
    double r_e = 0.0;         ///< squeezed-bath amplitude
    double Phi_e = 0.0;       ///< squeezed-bath angle
};

/// gamma_m = omega_m / (2 Q_m).
inline double gamma_from_quality(double omega_m, double quality_factor) {
    if (!(quality_factor > 0.0)) throw DomainError("quality factor must be positive");
    return omega_m / (2.0 * quality_factor);
}

/// Largest Duffing amplitude accepted without a warning, in units of omega_m.
inline constexpr double duffing_warning_ratio = 1e-4;

/// Validates the invariants of PhysicalParams. Throws DomainError on a
/// violation and returns warnings for values outside the physically quoted
/// ranges.
inline std::vector<std::string> check(const PhysicalParams& p) {
    auto finite = [](double v) { return std::isfinite(v); };
    for (double v : {p.omega_m, p.gamma_m, p.kappa, p.g0, p.delta0, p.kerr_u, p.duffing_eta,
                     p.drive_EL, p.n_th, p.gamma_c, p.Gamma_L, p.r_e, p.Phi_e}) {
        if (!finite(v)) throw DomainError("non-finite physical parameter");
    }
    if (!(p.omega_m > 0.0)) throw DomainError("omega_m must be positive");
    if (!(p.kappa > 0.0)) throw DomainError("kappa must be positive");
    if (p.gamma_m < 0.0) throw DomainError("gamma_m must be non-negative");
    if (p.n_th < 0.0) throw DomainError("n_th must be non-negative");
    if (p.gamma_c < 0.0) throw DomainError("gamma_c must be non-negative");
    if (p.Gamma_L < 0.0) throw DomainError("Gamma_L must be non-negative");

    std::vector<std::string> warnings;
    if (std::abs(p.duffing_eta) > duffing_warning_ratio * p.omega_m) {
        warnings.push_back("duffing_eta = " + std::to_string(p.duffing_eta / p.omega_m) +
                           " omega_m exceeds the 1e-4 omega_m reachable via qubit coupling");
    }
    return warnings;
}

// ---------------------------------------------------------------------------
// Kerr coefficient

/// Window of u quoted for silica microspheres at 1064 nm (same numeric units
/// as the returned u).
inline constexpr double kerr_window_low = 0.0006;
inline constexpr double kerr_window_high = 2721.0;

struct KerrEstimate {
    double u = 0.0; ///< rad/s
    std::vector<std::string> warnings;
};

/// u = hbar omega_c^2 c n2 / (n0^2 V_eff). Inputs: omega_c in rad/s, n2 in
/// cm^2/W, V_eff in um^3. Values outside the tabulated material ranges are
/// accepted with a warning.
inline KerrEstimate kerr_coefficient(double omega_c, double n0, double n2_cm2_per_W,
                                     double v_eff_um3) {
    if (!(omega_c > 0.0) || !(n0 > 0.0) || !(n2_cm2_per_W > 0.0) || !(v_eff_um3 > 0.0)) {
        throw DomainError("kerr_coefficient: inputs must be positive");
    }
    KerrEstimate est;
    if (n0 < 2.0 || n0 > 4.0) est.warnings.push_back("n0 outside [2, 4]");
    if (n2_cm2_per_W < 1e-17 || n2_cm2_per_W > 1e-13) est.warnings.push_back("n2 outside [1e-17, 1e-13] cm^2/W");
    if (v_eff_um3 < 1e2 || v_eff_um3 > 1e4) est.warnings.push_back("V_eff outside [1e2, 1e4] um^3");

    const double n2 = n2_cm2_per_W * 1e-4; // m^2/W
    const double v_eff = v_eff_um3 * 1e-18; // m^3
    est.u = units::hbar * omega_c * omega_c * units::speed_of_light * n2 / (n0 * n0 * v_eff);
    return est;
}

// ---------------------------------------------------------------------------
// Mean-field steady state

struct SteadyStateOptions {
    int homotopy_steps = 100;
    int max_iterations = 200;
    double tolerance = 1e-10;
    /// Start Newton at this (alpha, beta) at full drive instead of
    /// continuing from the undriven state.
    std::optional<std::pair<cplx, cplx>> seed;
};

struct SteadyState {
    cplx alpha;
    cplx beta;
    double optical_residual = 0.0;    ///< |line 1| / |E_L|
    double mechanical_residual = 0.0; ///< |line 2| / (g0 |alpha|^2)
    bool multistable = false;
    bool branch_jump = false;
    std::vector<std::string> warnings;
};

namespace detail {

struct MeanFieldSystem {
    const PhysicalParams& p;
    double drive;

    // Unknowns: (Re alpha, Im alpha, Re beta, Im beta).
    Eigen::Vector4d residual(const Eigen::Vector4d& z) const {
        const double ar = z[0], ai = z[1], x = z[2], y = z[3];
        const double n = ar * ar + ai * ai;
        const double d = p.delta0 - 2.0 * p.g0 * x + 2.0 * p.kerr_u * n;
        const double duff = 4.0 * p.duffing_eta * (4.0 * x * x * x + 3.0 * x);
        Eigen::Vector4d f;
        f[0] = -p.kappa * ar + d * ai + drive;
        f[1] = -p.kappa * ai - d * ar;
        f[2] = -p.gamma_m * x + p.omega_m * y;
        f[3] = -p.omega_m * x - p.gamma_m * y + p.g0 * n + duff;
        return f;
    }

    Eigen::Matrix4d jacobian(const Eigen::Vector4d& z) const {
        const double ar = z[0], ai = z[1], x = z[2];
        const double n = ar * ar + ai * ai;
        const double d = p.delta0 - 2.0 * p.g0 * x + 2.0 * p.kerr_u * n;
        const double u4 = 4.0 * p.kerr_u;
        Eigen::Matrix4d j = Eigen::Matrix4d::Zero();
        j(0, 0) = -p.kappa + ai * u4 * ar;
        j(0, 1) = d + ai * u4 * ai;
        j(0, 2) = -2.0 * p.g0 * ai;
        j(1, 0) = -d - ar * u4 * ar;
        j(1, 1) = -p.kappa - ar * u4 * ai;
        j(1, 2) = 2.0 * p.g0 * ar;
        j(2, 2) = -p.gamma_m;
        j(2, 3) = p.omega_m;
        j(3, 0) = 2.0 * p.g0 * ar;
        j(3, 1) = 2.0 * p.g0 * ai;
        j(3, 2) = -p.omega_m + 4.0 * p.duffing_eta * (12.0 * x * x + 3.0);
        j(3, 3) = -p.gamma_m;
        return j;
    }

    // Relative residuals as defined for the steady-state contract.
    std::pair<double, double> scaled(const Eigen::Vector4d& z) const {
        const Eigen::Vector4d f = residual(z);
        const double n = z[0] * z[0] + z[1] * z[1];
        const double opt_scale = std::abs(drive) > 0.0 ? std::abs(drive) : 1.0;
        const double mech_ref = std::abs(p.g0) * n;
        const double mech_scale = mech_ref > 0.0 ? mech_ref : 1.0;
        return {std::hypot(f[0], f[1]) / opt_scale, std::hypot(f[2], f[3]) / mech_scale};
    }

    double merit(const Eigen::Vector4d& z) const {
        auto [a, b] = scaled(z);
        return std::max(a, b);
    }
};

// Damped fixed-point map of the two mean-field lines.
inline std::optional<Eigen::Vector4d> fixed_point(const MeanFieldSystem& sys, Eigen::Vector4d z,
                                                  int iterations, double tol) {
    const auto& p = sys.p;
    constexpr double relax = 0.5;
    for (int it = 0; it < iterations; ++it) {
        const cplx a(z[0], z[1]);
        const double x = z[2];
        const double n = std::norm(a);
        const double d = p.delta0 - 2.0 * p.g0 * x + 2.0 * p.kerr_u * n;
        const cplx a_new = sys.drive / cplx(p.kappa, d);
        const double duff = 4.0 * p.duffing_eta * (4.0 * x * x * x + 3.0 * x);
        const cplx b_new = cplx(0.0, p.g0 * n + duff) / cplx(p.gamma_m, p.omega_m);
        Eigen::Vector4d next;
        next << a_new.real(), a_new.imag(), b_new.real(), b_new.imag();
        z = (1.0 - relax) * z + relax * next;
        if (!z.allFinite()) return std::nullopt;
        if (sys.merit(z) < tol) return z;
    }
    return std::nullopt;
}

inline std::optional<Eigen::Vector4d> newton(const MeanFieldSystem& sys, Eigen::Vector4d z,
                                             int iterations, double tol, double& last_merit) {
    last_merit = sys.merit(z);
    for (int it = 0; it < iterations; ++it) {
        if (last_merit < tol) return z;
        const Eigen::Vector4d f = sys.residual(z);
        const Eigen::Matrix4d j = sys.jacobian(z);
        Eigen::FullPivLU<Eigen::Matrix4d> lu(j);
        if (!lu.isInvertible()) return std::nullopt;
        const Eigen::Vector4d step = lu.solve(-f);
        double lambda = 1.0;
        bool improved = false;
        for (int ls = 0; ls < 40; ++ls) {
            const Eigen::Vector4d trial = z + lambda * step;
            const double m = sys.merit(trial);
            if (std::isfinite(m) && m < last_merit) {
                z = trial;
                last_merit = m;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!improved) {
            // Stagnation at round-off: accept if already near tolerance.
            return last_merit < 10.0 * tol ? std::optional(z) : std::nullopt;
        }
    }
    return last_merit < tol ? std::optional(z) : std::nullopt;
}

// Roots in n = |alpha|^2 of the optical line at fixed Re(beta):
// 4u^2 n^3 + 4u D n^2 + (kappa^2 + D^2) n - E^2 = 0, D = delta0 - 2 g0 x.
// Returns all positive real roots, ascending.
inline std::vector<double> kerr_intensity_roots(const PhysicalParams& p, double x, double drive,
                                                double known_root) {
    const double u = p.kerr_u;
    if (u == 0.0) return {known_root};
    const double d = p.delta0 - 2.0 * p.g0 * x;
    const double c3 = 4.0 * u * u, c2 = 4.0 * u * d, c1 = p.kappa * p.kappa + d * d;
    (void)drive;
    // Deflate by the known root: c3 n^2 + (c2 + c3 n0) n + (c1 + n0 (c2 + c3 n0)).
    const double b = c2 + c3 * known_root;
    const double c = c1 + known_root * b;
    const double disc = b * b - 4.0 * c3 * c;
    std::vector<double> roots{known_root};
    if (disc > 0.0) {
        const double s = std::sqrt(disc);
        const double q = -0.5 * (b + std::copysign(s, b));
        for (double r : {q / c3, c / q}) {
            if (r > 0.0 && std::abs(r - known_root) > 1e-9 * std::max(1.0, known_root)) roots.push_back(r);
        }
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

} // namespace detail

/// Solves the two mean-field lines
///   -(i(Delta - 2u|alpha|^2) + kappa) alpha + E_L = 0
///   -(i omega_m + gamma_m) beta + i g0 |alpha|^2 + 4 i eta (4 Re(beta)^3 + 3 Re(beta)) = 0
/// with Delta = delta0 - 2 g0 Re(beta) + 4u|alpha|^2. Without a seed the
/// branch is continued from (0, 0) at E_L = 0 in homotopy_steps increments of
/// the drive; each increment uses a damped fixed-point iteration and falls
/// back to Newton.
inline SteadyState solve_steady_state(const PhysicalParams& p, const SteadyStateOptions& opt = {}) {
    SteadyState out;
    out.warnings = check(p);

    Eigen::Vector4d z = Eigen::Vector4d::Zero();
    if (p.drive_EL == 0.0 && !opt.seed) {
        return out;
    }

    auto solve_at = [&](double drive, const Eigen::Vector4d& start) {
        detail::MeanFieldSystem sys{p, drive};
        if (auto fp = detail::fixed_point(sys, start, 50, opt.tolerance)) return *fp;
        double merit = 0.0;
        if (auto nw = detail::newton(sys, start, opt.max_iterations, opt.tolerance, merit)) return *nw;
        throw ConvergenceError("mean-field solve did not converge at E_L = " + std::to_string(drive),
                               merit);
    };

    int prev_rank = -1;
    double prev_middle = 0.0;
    auto track_branch = [&](const Eigen::Vector4d& sol, double drive) {
        const double n = sol[0] * sol[0] + sol[1] * sol[1];
        const auto roots = detail::kerr_intensity_roots(p, sol[2], drive, n);
        if (roots.size() == 3) {
            out.multistable = true;
            const int rank = static_cast<int>(std::find(roots.begin(), roots.end(), n) - roots.begin());
            if (prev_rank == 0 && rank > 0) out.branch_jump = true;
            prev_rank = rank;
            prev_middle = roots[1];
        } else {
            if (prev_rank == 0 && n > prev_middle) out.branch_jump = true;
            prev_rank = -1;
        }
    };

    if (opt.seed) {
        z << opt.seed->first.real(), opt.seed->first.imag(), opt.seed->second.real(),
            opt.seed->second.imag();
        z = solve_at(p.drive_EL, z);
        track_branch(z, p.drive_EL);
    } else {
        const int steps = std::max(1, opt.homotopy_steps);
        for (int k = 1; k <= steps; ++k) {
            const double drive = p.drive_EL * static_cast<double>(k) / steps;
            z = solve_at(drive, z);
            track_branch(z, drive);
        }
    }

    detail::MeanFieldSystem sys{p, p.drive_EL};
    std::tie(out.optical_residual, out.mechanical_residual) = sys.scaled(z);
    out.alpha = cplx(z[0], z[1]);
    out.beta = cplx(z[2], z[3]);
    if (out.multistable) out.warnings.push_back("Kerr response is multistable at this drive");
    if (out.branch_jump) out.warnings.push_back("branch jump detected during drive continuation");
    return out;
}

// ---------------------------------------------------------------------------
// Squeezing-frame effective parameters

struct EffectiveParams {
    cplx alpha;
    cplx beta;
    double alpha_abs = 0.0;
    double theta = 0.0;         ///< alpha = |alpha| e^{-i theta}
    double Delta = 0.0;         ///< delta0 - 2 g0 Re(beta) + 4u|alpha|^2
    double Omega_abs = 0.0;     ///< 2u|alpha|^2
    double Omega_m = 0.0;       ///< 6 eta (4 Re(beta)^2 + 1)
    double omega_m_prime = 0.0; ///< omega_m - Omega_m
    double eta_ratio = 0.0;     ///< |Omega| / Delta
    double eta1_ratio = 0.0;    ///< |Omega_m| / omega_m'
    double r = 0.0;
    double r_m = 0.0;
    double r_prime = 0.0;
    double g = 0.0;             ///< g0 |alpha|
    double G = 0.0;             ///< g e^{r'}
    double Delta_e = 0.0;
    double Delta_m = 0.0;
    double lambda = 1.0;        ///< e^{-2 r_m}

    /// Effective phase-noise lever arm |alpha| e^{-r}.
    double alpha_e_minus_r() const { return alpha_abs * std::exp(-r); }
};

/// r = (1/4) ln((1 + eta) / (1 - eta)).
inline double squeezing_from_ratio(double ratio) {
    if (!(ratio >= 0.0) || !(ratio < 1.0)) {
        throw ParametricInstabilityError("squeezing ratio must lie in [0, 1), got " + std::to_string(ratio));
    }
    return 0.25 * std::log((1.0 + ratio) / (1.0 - ratio));
}

/// Inverse of squeezing_from_ratio.
inline double ratio_from_squeezing(double r) { return std::tanh(2.0 * r); }

inline EffectiveParams derive_effective(const PhysicalParams& p, cplx alpha, cplx beta) {
    EffectiveParams e;
    e.alpha = alpha;
    e.beta = beta;
    e.alpha_abs = std::abs(alpha);
    e.theta = e.alpha_abs > 0.0 ? -std::arg(alpha) : 0.0;
    const double n = std::norm(alpha);
    const double x = beta.real();

    e.Delta = p.delta0 - 2.0 * p.g0 * x + 4.0 * p.kerr_u * n;
    e.Omega_abs = std::abs(2.0 * p.kerr_u * n);
    e.Omega_m = 6.0 * p.duffing_eta * (4.0 * x * x + 1.0);
    e.omega_m_prime = p.omega_m - e.Omega_m;

    if (e.Omega_abs > 0.0) {
        if (!(e.Delta > 0.0)) throw ParametricInstabilityError("optical parametric term with non-positive Delta");
        e.eta_ratio = e.Omega_abs / e.Delta;
    }
    if (e.Omega_m != 0.0) {
        if (!(e.omega_m_prime > 0.0)) {
            throw ParametricInstabilityError("mechanical parametric term with non-positive omega_m'");
        }
        e.eta1_ratio = std::abs(e.Omega_m) / e.omega_m_prime;
    }
    e.r = squeezing_from_ratio(e.eta_ratio);
    e.r_m = squeezing_from_ratio(e.eta1_ratio);
    e.r_prime = e.r_m - e.r;

    e.g = p.g0 * e.alpha_abs;
    e.G = e.g * std::exp(e.r_prime);
    e.Delta_e = e.Delta * std::sqrt(1.0 - e.eta_ratio * e.eta_ratio);
    e.Delta_m = e.omega_m_prime * std::sqrt(1.0 - e.eta1_ratio * e.eta1_ratio);
    e.lambda = std::exp(-2.0 * e.r_m);
    return e;
}

// ---------------------------------------------------------------------------
// Inverted workflow: choose the drive for a target (G, eta)

/// Upper limit of the optical squeezing ratio used by the protocols.
inline constexpr double max_eta_ratio = 0.9999;

struct DriveTarget {
    double G = 0.0;          ///< effective coupling, rad/s
    double eta_ratio = 0.0;  ///< |Omega| / Delta
    double r_prime = 0.0;    ///< r_m - r
    double Delta_m = 0.0;    ///< squeezing-frame mechanical frequency, rad/s
    std::optional<double> Delta_e; ///< defaults to Delta_m (resonant)
};

struct DriveSolution {
    double alpha_abs = 0.0;
    double drive_EL = 0.0;
    double kerr_u = 0.0;
    double duffing_eta = 0.0;
    double omega_m = 0.0; ///< bare mechanical frequency realising Delta_m
    double delta0 = 0.0;
    cplx alpha;
    cplx beta;
    PhysicalParams params; ///< base with the solved fields filled in
    std::vector<std::string> warnings;
};

/// Builds the laboratory parameters that realise a target effective
/// coupling G, optical squeezing ratio eta and r' with effective detunings
/// (Delta_e, Delta_m). From `base` only gamma_m, kappa, g0, n_th, gamma_c and
/// Gamma_L are used. The squeezed bath is matched (r_e = r, Phi_e = 2 theta + pi).
///
/// The mechanical parametric term takes the softening branch Omega_m > 0, so
/// the bare frequency is omega_m = omega_m' (1 + eta1) with
/// omega_m' = Delta_m / sqrt(1 - eta1^2).
inline DriveSolution invert_for_drive(const DriveTarget& t, const PhysicalParams& base) {
    if (!(t.G > 0.0)) throw PreconditionError("target G must be positive");
    if (!(t.eta_ratio >= 0.0) || t.eta_ratio > max_eta_ratio) {
        throw PreconditionError("target eta_ratio must lie in [0, 0.9999]");
    }
    if (!(t.Delta_m > 0.0)) throw PreconditionError("target Delta_m must be positive");
    if (!(base.g0 > 0.0)) throw InfeasibleError("g0 must be positive to build any coupling");
    if (!(base.kappa > 0.0)) throw DomainError("kappa must be positive");
    const double delta_e = t.Delta_e.value_or(t.Delta_m);
    if (!(delta_e > 0.0)) throw InfeasibleError("effective optical detuning must be positive");

    DriveSolution s;
    const double r = squeezing_from_ratio(t.eta_ratio);
    const double r_m = r + t.r_prime;
    if (r_m < 0.0) throw InfeasibleError("r' below -r would need negative mechanical squeezing");
    const double eta1 = ratio_from_squeezing(r_m);
    if (!(eta1 < 1.0)) throw InfeasibleError("mechanical squeezing ratio rounds to 1");

    s.alpha_abs = t.G / (base.g0 * std::exp(t.r_prime));
    const double n = s.alpha_abs * s.alpha_abs;

    // Mechanics: omega' = Delta_m / sqrt(1 - eta1^2), Omega_m = eta1 omega'.
    const double omega_prime = t.Delta_m / std::sqrt(1.0 - eta1 * eta1);
    const double omega_par = eta1 * omega_prime;
    s.omega_m = omega_prime + omega_par;
    const double gm = base.gamma_m;
    const double lin = s.omega_m + gm * gm / s.omega_m;
    // x (omega + gm^2/omega) - (2 Omega_m / 3) x (4x^2+3)/(4x^2+1) = g0 n, increasing in x.
    auto f = [&](double x) {
        const double h = (4.0 * x * x + 3.0) / (4.0 * x * x + 1.0);
        return x * lin - (2.0 / 3.0) * omega_par * x * h - base.g0 * n;
    };
    double lo = 0.0;
    double hi = base.g0 * n / (lin - 2.0 * omega_par) * 1.5 + 1.0;
    while (f(hi) < 0.0) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    const double x = 0.5 * (lo + hi);
    s.duffing_eta = omega_par / (6.0 * (4.0 * x * x + 1.0));
    s.beta = cplx(x, gm * x / s.omega_m);

    // Optics: Delta = Delta_e / sqrt(1 - eta^2), |Omega| = eta Delta = 2u n.
    const double delta = delta_e / std::sqrt(1.0 - t.eta_ratio * t.eta_ratio);
    s.kerr_u = t.eta_ratio * delta / (2.0 * n);
    s.delta0 = delta + 2.0 * base.g0 * x - 4.0 * s.kerr_u * n;
    const double d_line = delta - 2.0 * s.kerr_u * n;
    s.drive_EL = s.alpha_abs * std::abs(cplx(base.kappa, d_line));
    s.alpha = s.drive_EL / cplx(base.kappa, d_line);

    s.params = base;
    s.params.omega_m = s.omega_m;
    s.params.duffing_eta = s.duffing_eta;
    s.params.kerr_u = s.kerr_u;
    s.params.delta0 = s.delta0;
    s.params.drive_EL = s.drive_EL;
    s.params.r_e = r;
    s.params.Phi_e = 2.0 * (-std::arg(s.alpha)) + units::pi;

    s.warnings = check(s.params);
    if (s.kerr_u > kerr_window_high) {
        s.warnings.push_back("required Kerr coefficient exceeds the 2721 rad/s material window");
    }
    return s;
}

} // namespace optomech
