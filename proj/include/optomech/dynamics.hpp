#pragma once

// Five-dimensional linear model u = (X, P, X_m, P_m, psi): drift and
// diffusion matrices, moment integration, Lyapunov steady state and
// stability diagnostics.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "optomech/errors.hpp"
#include "optomech/gaussian.hpp"
#include "optomech/model.hpp"

namespace optomech {

using Mat5 = Eigen::Matrix<double, 5, 5>;
using Vec5 = Eigen::Matrix<double, 5, 1>;

/// Index of the phase-noise auxiliary mode psi in u.
inline constexpr int psi_index = 4;

struct Switches {
    bool coupling_on = true;
    int coupling_sign = +1;
    bool phase_noise_on = true;
    bool drive_on = true;
};

struct LinearModel {
    Mat5 A = Mat5::Zero();
    Mat5 N = Mat5::Zero();
    Switches switches;
};

struct MomentState {
    double t = 0.0;
    Vec5 mean = Vec5::Zero();
    Mat5 V = Mat5::Zero();
};

/// Drift matrix:
///   [ -k      De     0     0    0          ]
///   [ -De     -k     2G s  0    -sqrt2|a|e^-r ]
///   [  0      0      -gm   Dm   0          ]
///   [  2G s   0      -Dm   -gm  0          ]
///   [  0      0      0     0    -gamma_c   ]
inline Mat5 build_drift(const EffectiveParams& eff, double kappa, double gamma_m, double gamma_c,
                        const Switches& sw) {
    Mat5 a = Mat5::Zero();
    a(0, 0) = -kappa;
    a(0, 1) = eff.Delta_e;
    a(1, 0) = -eff.Delta_e;
    a(1, 1) = -kappa;
    a(2, 2) = -gamma_m;
    a(2, 3) = eff.Delta_m;
    a(3, 2) = -eff.Delta_m;
    a(3, 3) = -gamma_m;
    a(4, 4) = -gamma_c;
    if (sw.coupling_on) {
        const double c = 2.0 * eff.G * (sw.coupling_sign < 0 ? -1.0 : 1.0);
        a(1, 2) = c;
        a(3, 0) = c;
    }
    if (sw.phase_noise_on) a(1, 4) = -std::sqrt(2.0) * eff.alpha_e_minus_r();
    return a;
}

/// Diagonal diffusion matrix for the matched squeezed bath:
/// diag(k, k, gm lambda (2n+1), gm/lambda (2n+1), 2 gamma_c^2 Gamma_L).
/// With drive_on = false the squeezing transform is absent and lambda = 1.
inline Mat5 build_noise(const EffectiveParams& eff, double kappa, double gamma_m, double gamma_c,
                        double Gamma_L, double n_th, bool drive_on = true) {
    const double lambda = drive_on ? eff.lambda : 1.0;
    const double thermal = 2.0 * n_th + 1.0;
    Mat5 n = Mat5::Zero();
    n(0, 0) = kappa;
    n(1, 1) = kappa;
    n(2, 2) = gamma_m * lambda * thermal;
    n(3, 3) = gamma_m / lambda * thermal;
    n(4, 4) = 2.0 * gamma_c * gamma_c * Gamma_L;
    return n;
}

inline LinearModel make_model(const EffectiveParams& eff, const PhysicalParams& p, const Switches& sw) {
    return {build_drift(eff, p.kappa, p.gamma_m, p.gamma_c, sw),
            build_noise(eff, p.kappa, p.gamma_m, p.gamma_c, p.Gamma_L, p.n_th, sw.drive_on), sw};
}

// ---------------------------------------------------------------------------
// Squeezed-bath correlations

struct BathCorrelations {
    std::complex<double> xx, yy, xy, yx;
};

/// Delta-correlation coefficients of the squeezing-frame input noises when
/// the vacuum input is squeezed by (r_e, Phi_e):
///   <XX> = e^{2r}/2  (sh^2 + ch^2 + sinh 2r_e cos phi)
///   <YY> = e^{-2r}/2 (sh^2 + ch^2 - sinh 2r_e cos phi)
///   <XY> = -1/(2i)  (ch^2 - sh^2 + i sinh 2r_e sin phi)
///   <YX> =  1/(2i)  (ch^2 - sh^2 - i sinh 2r_e sin phi)
/// with sh = sinh r_e, ch = cosh r_e, phi = Phi_e - 2 theta.
inline BathCorrelations squeezed_bath_correlations(double r, double r_e, double Phi_e, double theta) {
    using c = std::complex<double>;
    const double sh2 = std::sinh(r_e) * std::sinh(r_e);
    const double ch2 = std::cosh(r_e) * std::cosh(r_e);
    const double s2 = std::sinh(2.0 * r_e);
    const double phi = Phi_e - 2.0 * theta;
    const c i(0.0, 1.0);
    BathCorrelations out;
    out.xx = 0.5 * std::exp(2.0 * r) * (sh2 + ch2 + s2 * std::cos(phi));
    out.yy = 0.5 * std::exp(-2.0 * r) * (sh2 + ch2 - s2 * std::cos(phi));
    out.xy = -1.0 / (2.0 * i) * (c(ch2 - sh2) + i * s2 * std::sin(phi));
    out.yx = 1.0 / (2.0 * i) * (c(ch2 - sh2) - i * s2 * std::sin(phi));
    return out;
}

// ---------------------------------------------------------------------------
// Moment integration

/// Steps per period of the fastest rate used by recommended_dt.
inline constexpr int default_steps_per_period = 2000;

/// dt = 2 pi / omega_fast / steps, omega_fast the largest rate among the
/// optical and mechanical frequencies, the coupling 2G, kappa and gamma_c.
inline double recommended_dt(const LinearModel& m, int steps_per_period = default_steps_per_period) {
    const Mat5& a = m.A;
    const double w = std::max({std::abs(a(0, 1)), std::abs(a(2, 3)), std::abs(a(1, 2)), std::abs(a(3, 0)),
                               std::abs(a(0, 0)), std::abs(a(2, 2)), std::abs(a(4, 4))});
    if (!(w > 0.0)) throw DomainError("recommended_dt: model has no time scale");
    return 2.0 * units::pi / w / steps_per_period;
}

/// Classical RK4 on d<u>/dt = A<u>, dV/dt = AV + VA^T + N. The step is
/// shrunk so an integer number of steps covers `duration`; V is
/// re-symmetrised after every step.
inline MomentState evolve(const LinearModel& model, const MomentState& start, double duration, double dt) {
    if (!(dt > 0.0)) throw PreconditionError("evolve: dt must be positive");
    if (!(duration >= 0.0)) throw PreconditionError("evolve: duration must be non-negative");
    MomentState s = start;
    if (duration == 0.0) return s;

    const long steps = std::max(1L, static_cast<long>(std::ceil(duration / dt - 1e-9)));
    const double h = duration / static_cast<double>(steps);
    const Mat5& a = model.A;
    const Mat5& n = model.N;
    auto fv = [&](const Mat5& v) -> Mat5 { return a * v + v * a.transpose() + n; };

    for (long k = 0; k < steps; ++k) {
        const Vec5 m1 = a * s.mean;
        const Vec5 m2 = a * (s.mean + 0.5 * h * m1);
        const Vec5 m3 = a * (s.mean + 0.5 * h * m2);
        const Vec5 m4 = a * (s.mean + h * m3);
        s.mean += (h / 6.0) * (m1 + 2.0 * m2 + 2.0 * m3 + m4);

        const Mat5 k1 = fv(s.V);
        const Mat5 k2 = fv(s.V + 0.5 * h * k1);
        const Mat5 k3 = fv(s.V + 0.5 * h * k2);
        const Mat5 k4 = fv(s.V + h * k3);
        s.V += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        s.V = 0.5 * (s.V + s.V.transpose()).eval();

        if (!s.mean.allFinite() || !s.V.allFinite()) {
            throw DivergenceError("evolve: non-finite state", start.t + h * static_cast<double>(k + 1));
        }
    }
    s.t = start.t + duration;
    return s;
}

/// Optical (0) and mechanical (1) modes of a moment state; psi is dropped.
inline GaussianState partial_state(const MomentState& s, const std::vector<int>& modes) {
    GaussianState full(s.mean.head<4>(), s.V.topLeftCorner<4, 4>());
    return partial_state(full, modes);
}

// ---------------------------------------------------------------------------
// Stability

struct StabilityReport {
    bool stable = false;
    double margin = 0.0;   ///< -max Re(eigenvalue)
};

/// Stable iff max Re(lambda) < -1e-9 ||A||_max.
inline StabilityReport is_stable(const Eigen::MatrixXd& a) {
    if (!a.allFinite()) throw NumericalError("is_stable: non-finite drift matrix");
    Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
    if (es.info() != Eigen::Success) throw NumericalError("is_stable: eigenvalue computation failed");
    const double max_re = es.eigenvalues().real().maxCoeff();
    const double scale = a.cwiseAbs().maxCoeff();
    return {max_re < -1e-9 * scale, -max_re};
}

/// True when psi carries no fluctuations (gamma_c = 0 and no injected
/// noise), so the optomechanical block decouples from the fifth mode.
inline bool psi_frozen(const LinearModel& m) {
    return m.A(psi_index, psi_index) == 0.0 && m.N(psi_index, psi_index) == 0.0;
}

/// The drift that governs the fluctuations: the 4x4 block when psi is
/// frozen, the full 5x5 matrix otherwise.
inline Eigen::MatrixXd active_drift(const LinearModel& m) {
    if (psi_frozen(m)) return m.A.topLeftCorner<4, 4>();
    return m.A;
}

struct RouthHurwitz {
    bool cond_a = false;
    bool cond_b = false;
    double r_max = 0.0; ///< bound on r with G read as g e^{r}
    double G_max = 0.0; ///< largest G allowed by cond_a
};

inline RouthHurwitz routh_hurwitz(const EffectiveParams& eff, double kappa, double gamma_m) {
    const double de = eff.Delta_e, dm = eff.Delta_m;
    if (!(de > 0.0) || !(dm > 0.0)) throw PreconditionError("routh_hurwitz: Delta_e and Delta_m must be positive");
    const double g2 = gamma_m * gamma_m, k2 = kappa * kappa, G2 = eff.G * eff.G;
    const double kg = kappa + gamma_m;

    RouthHurwitz out;
    out.cond_a = g2 * de * de + k2 * g2 + k2 * dm * dm + (de * dm - 4.0 * G2) * de * dm > 0.0;
    const double bracket = ((de - dm) * (de - dm) + kg * kg) * ((de + dm) * (de + dm) + kg * kg);
    out.cond_b = 4.0 * kappa * gamma_m * bracket + 16.0 * G2 * de * kg * kg * dm > 0.0;

    const double s = g2 * de * de + k2 * g2 + k2 * dm * dm + de * de * dm * dm;
    out.G_max = std::sqrt(s / (4.0 * de * dm));
    const double g_sq = eff.g * eff.g;
    out.r_max = g_sq > 0.0 ? 0.5 * std::log(s / (4.0 * g_sq * de * dm)) : std::numeric_limits<double>::infinity();
    return out;
}

// ---------------------------------------------------------------------------
// Lyapunov steady state

/// Solves A V + V A^T = -N through the Kronecker form
/// (I (x) A + A (x) I) vec V = -vec N, with one step of iterative refinement.
/// Throws NumericalError when the residual exceeds 1e-10 ||N||_max.
inline Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& n) {
    const Eigen::Index d = a.rows();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd k(d * d, d * d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            k.block(i * d, j * d, d, d) = id(i, j) * a + a(i, j) * id;
        }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
    if (!lu.isInvertible()) throw NumericalError("solve_lyapunov: singular Kronecker system");

    auto residual = [&](const Eigen::MatrixXd& v) -> Eigen::MatrixXd { return a * v + v * a.transpose() + n; };
    Eigen::MatrixXd rhs = -n;
    Eigen::VectorXd x = lu.solve(Eigen::Map<const Eigen::VectorXd>(rhs.data(), d * d));
    Eigen::MatrixXd v = Eigen::Map<Eigen::MatrixXd>(x.data(), d, d);
    v = 0.5 * (v + v.transpose()).eval();

    Eigen::MatrixXd res = residual(v);
    Eigen::VectorXd dx = lu.solve(Eigen::Map<const Eigen::VectorXd>(res.data(), d * d));
    Eigen::MatrixXd corrected = v - Eigen::Map<Eigen::MatrixXd>(dx.data(), d, d);
    corrected = 0.5 * (corrected + corrected.transpose()).eval();
    if (residual(corrected).cwiseAbs().maxCoeff() < res.cwiseAbs().maxCoeff()) {
        v = corrected;
        res = residual(v);
    }

    const double scale = n.cwiseAbs().maxCoeff();
    const double err = res.cwiseAbs().maxCoeff();
    if (!v.allFinite() || err > 1e-10 * scale) {
        throw NumericalError("solve_lyapunov: residual " + std::to_string(err) + " above tolerance");
    }
    return v;
}

/// Stationary covariance. When psi is frozen the 4x4 optomechanical block is
/// solved alone and Var(psi) = 0.
inline Mat5 steady_covariance(const LinearModel& m) {
    const Eigen::MatrixXd drift = active_drift(m);
    const StabilityReport st = is_stable(drift);
    if (!st.stable) throw StabilityError("steady_covariance: drift matrix is not stable", st.margin);
    Mat5 v = Mat5::Zero();
    if (psi_frozen(m)) {
        v.topLeftCorner<4, 4>() = solve_lyapunov(drift, m.N.topLeftCorner<4, 4>());
    } else {
        v = solve_lyapunov(m.A, m.N);
    }
    return v;
}

} // namespace optomech
