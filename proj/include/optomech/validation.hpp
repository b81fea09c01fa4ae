#pragma once

// Moment equations against Monte Carlo: the two reference models and an
// element-wise z-score comparison.

#include <cmath>
#include <string>
#include <vector>

#include "optomech/dynamics.hpp"
#include "optomech/protocols.hpp"
#include "optomech/stochastic.hpp"

namespace optomech {

struct ValidationCase {
    std::string name;
    LinearModel model;
    MomentState init;
    double duration = 0.0;
    NoiseSpec spec;
    McScheme scheme = McScheme::EulerMaruyama;
};

/// Non-rotating, uncoupled model with O(1) rates: every quadrature is an
/// independent scalar OU process.
inline ValidationCase decoupled_case(std::uint64_t seed = 42, long n_traj = 10000) {
    EffectiveParams eff;
    eff.r_m = 0.3;
    eff.lambda = std::exp(-2.0 * eff.r_m);
    const double kappa = 1.0, gamma_m = 0.5, gamma_c = 2.0, Gamma_L = 0.25, n_th = 3.0;
    ValidationCase c;
    c.name = "decoupled";
    c.model = {build_drift(eff, kappa, gamma_m, gamma_c, {false, +1, false, true}),
               build_noise(eff, kappa, gamma_m, gamma_c, Gamma_L, n_th), {false, +1, false, true}};
    c.init.V = 0.5 * Mat5::Identity();
    c.init.V(4, 4) = gamma_c * Gamma_L;
    c.duration = 10.0;
    c.spec = {gamma_c, Gamma_L, seed, n_traj, 1e-3};
    return c;
}

/// Write-phase model of the memory protocol at its default operating
/// point, run for 40/kappa from vacuum with stationary phase noise. Uses
/// exact linear stepping: Euler-Maruyama needs dt << 1/omega_m here.
inline ValidationCase memory_case(std::uint64_t seed = 42, long n_traj = 10000) {
    const OperatingPoint op = memory_defaults();
    const Prepared prep = prepare(op);
    ValidationCase c;
    c.name = "memory";
    c.model = make_model(prep.eff, prep.params, {});
    c.init.V = 0.5 * Mat5::Identity();
    c.init.V(4, 4) = prep.params.gamma_c * prep.params.Gamma_L;
    c.duration = 40.0 / prep.params.kappa;
    c.spec = {prep.params.gamma_c, prep.params.Gamma_L, seed, n_traj, 1e-6};
    c.scheme = McScheme::ExactLinear;
    return c;
}

struct ComparisonRow {
    int i = 0, j = 0;
    double expected = 0.0;
    double monte_carlo = 0.0;
    double std_error = 0.0;
    double z = 0.0;
};

inline const char* quadrature_name(int i) {
    static const char* names[] = {"X", "P", "X_m", "P_m", "psi"};
    return names[i];
}

/// Upper-triangle comparison of a reference covariance with an ensemble.
inline std::vector<ComparisonRow> compare_covariance(const Mat5& expected, const McResult& mc) {
    std::vector<ComparisonRow> rows;
    for (int i = 0; i < 5; ++i) {
        for (int j = i; j < 5; ++j) {
            ComparisonRow r{i, j, expected(i, j), mc.cov(i, j), mc.cov_se(i, j), 0.0};
            const double diff = r.monte_carlo - r.expected;
            r.z = r.std_error > 0.0 ? diff / r.std_error : (diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff));
            rows.push_back(r);
        }
    }
    return rows;
}

struct ValidationReport {
    std::string name;
    Mat5 expected;
    McResult mc;
    std::vector<ComparisonRow> rows;
    double max_abs_z = 0.0;
};

inline ValidationReport run_validation(const ValidationCase& c, int threads = 1) {
    ValidationReport rep;
    rep.name = c.name;
    rep.expected = steady_covariance(c.model);
    rep.mc = mc_ensemble(c.model, c.init, c.duration, c.spec, {c.scheme, threads});
    rep.rows = compare_covariance(rep.expected, rep.mc);
    for (const auto& r : rep.rows) rep.max_abs_z = std::max(rep.max_abs_z, std::abs(r.z));
    return rep;
}

} // namespace optomech
