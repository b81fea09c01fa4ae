#include <gtest/gtest.h>

#include <cmath>

#include "optomech/model.hpp"
#include "optomech/protocols.hpp"
#include "optomech/units.hpp"

using namespace optomech;

namespace {

constexpr double omega_1064 = units::two_pi * units::speed_of_light / 1064e-9;

PhysicalParams memory_base() {
    PhysicalParams p;
    p.omega_m = units::angular(10 * units::MHz);
    p.gamma_m = gamma_from_quality(p.omega_m, 2e6);
    p.kappa = units::angular(100 * units::kHz);
    p.g0 = units::angular(100.0);
    p.n_th = 3.0;
    p.gamma_c = 10 * units::kHz;
    p.Gamma_L = 10 * units::kHz;
    return p;
}

DriveTarget memory_target(double eta) {
    DriveTarget t;
    t.G = 0.05 * units::angular(10 * units::MHz);
    t.eta_ratio = eta;
    t.Delta_m = units::angular(10 * units::MHz);
    return t;
}

// Brute-force root finder that shares no code with the solver. The
// mechanical line fixes |alpha|^2 as a function of x = Re(beta); the optical
// line is then a scalar equation in x, scanned on a dense grid and refined by
// bisection. Returns every root (x, |alpha|^2).
std::vector<std::pair<double, double>> scan_roots(const PhysicalParams& p) {
    const double w = p.omega_m, gm = p.gamma_m;
    auto intensity = [&](double x) {
        const double duff = 4.0 * p.duffing_eta * (4.0 * x * x * x + 3.0 * x);
        return (x * (gm * gm + w * w) / w - duff) / p.g0;
    };
    auto h = [&](double x) {
        const double n = intensity(x);
        const double d = p.delta0 - 2.0 * p.g0 * x + 2.0 * p.kerr_u * n;
        return n * (p.kappa * p.kappa + d * d) - p.drive_EL * p.drive_EL;
    };
    // |alpha|^2 <= E^2 / kappa^2 bounds the admissible x range.
    const double n_max = p.drive_EL * p.drive_EL / (p.kappa * p.kappa);
    double x_hi = 1e-6;
    while (intensity(x_hi) < n_max && intensity(x_hi) >= 0.0) x_hi *= 1.5;
    const int samples = 400000;
    std::vector<std::pair<double, double>> roots;
    double prev_x = 0.0, prev_h = h(0.0);
    for (int i = 1; i <= samples; ++i) {
        const double x = x_hi * i / samples;
        const double hx = h(x);
        if ((prev_h < 0.0) != (hx < 0.0)) {
            double lo = prev_x, hi = x;
            for (int k = 0; k < 200; ++k) {
                const double mid = 0.5 * (lo + hi);
                ((h(mid) < 0.0) == (h(lo) < 0.0) ? lo : hi) = mid;
            }
            const double xr = 0.5 * (lo + hi);
            roots.emplace_back(xr, intensity(xr));
        }
        prev_x = x;
        prev_h = hx;
    }
    return roots;
}

} // namespace

TEST(Params, QualityFactorConvention) {
    EXPECT_DOUBLE_EQ(gamma_from_quality(2.0e6, 1e6), 1.0);
    EXPECT_THROW(gamma_from_quality(1.0, 0.0), DomainError);
}

TEST(Params, CheckRejectsInvalidAndWarnsOnLargeDuffing) {
    PhysicalParams p = memory_base();
    EXPECT_TRUE(check(p).empty());
    p.duffing_eta = 2e-4 * p.omega_m;
    EXPECT_EQ(check(p).size(), 1u);
    p = memory_base();
    p.kappa = 0.0;
    EXPECT_THROW(check(p), DomainError);
    p = memory_base();
    p.n_th = -1.0;
    EXPECT_THROW(check(p), DomainError);
    p = memory_base();
    p.g0 = std::nan("");
    EXPECT_THROW(check(p), DomainError);
}

TEST(Kerr, HandEvaluatedCorners) {
    // hbar w^2 c n2 / (n0^2 V) evaluated by hand in SI units.
    const KerrEstimate high = kerr_coefficient(omega_1064, 2.0, 1e-13, 1e2);
    EXPECT_NEAR(high.u, 2477.1639952723935, 1e-9 * 2477.0);
    EXPECT_TRUE(high.warnings.empty());
    const KerrEstimate low = kerr_coefficient(omega_1064, 4.0, 1e-17, 1e4);
    EXPECT_NEAR(low.u, 6.192909988e-4, 1e-12);
    for (double u : {high.u, low.u}) {
        EXPECT_GE(u, kerr_window_low);
        EXPECT_LE(u, kerr_window_high);
    }
}

TEST(Kerr, ExactProportionality) {
    const double u = kerr_coefficient(omega_1064, 3.0, 1e-15, 1e3).u;
    EXPECT_DOUBLE_EQ(kerr_coefficient(omega_1064, 3.0, 2e-15, 1e3).u, 2.0 * u);
    EXPECT_DOUBLE_EQ(kerr_coefficient(omega_1064, 3.0, 1e-15, 2e3).u, 0.5 * u);
}

TEST(Kerr, OutOfRangeWarnsNonPositiveThrows) {
    EXPECT_EQ(kerr_coefficient(omega_1064, 1.5, 1e-12, 1e5).warnings.size(), 3u);
    EXPECT_THROW(kerr_coefficient(omega_1064, 2.0, 0.0, 1e2), DomainError);
    EXPECT_THROW(kerr_coefficient(-1.0, 2.0, 1e-13, 1e2), DomainError);
}

TEST(SteadyState, ZeroDrive) {
    const SteadyState s = solve_steady_state(memory_base());
    EXPECT_EQ(s.alpha, cplx(0.0));
    EXPECT_EQ(s.beta, cplx(0.0));
}

TEST(SteadyState, LinearEmptyCavityClosedForm) {
    PhysicalParams p = memory_base();
    p.g0 = 0.0;
    p.delta0 = 3.0 * p.kappa;
    p.drive_EL = 1e9;
    const SteadyState s = solve_steady_state(p);
    const cplx expected = p.drive_EL / cplx(p.kappa, p.delta0);
    EXPECT_LT(std::abs(s.alpha - expected), 1e-10 * std::abs(expected));
    EXPECT_LT(std::abs(s.beta), 1e-12);
}

TEST(SteadyState, MatchesGridScanOracle) {
    for (double eta : {0.0, 0.5, 0.99, max_eta_ratio}) {
        const DriveSolution d = invert_for_drive(memory_target(eta), memory_base());
        SteadyStateOptions opt;
        opt.seed = std::pair{d.alpha, d.beta};
        const SteadyState s = solve_steady_state(d.params, opt);
        EXPECT_LT(s.optical_residual, 1e-10);
        EXPECT_LT(s.mechanical_residual, 1e-10);

        const auto roots = scan_roots(d.params);
        ASSERT_FALSE(roots.empty()) << "eta " << eta;
        const double n = std::norm(s.alpha);
        double best = INFINITY;
        std::pair<double, double> nearest;
        for (const auto& r : roots) {
            const double dist = std::abs(r.second - n) / n;
            if (dist < best) {
                best = dist;
                nearest = r;
            }
        }
        EXPECT_LT(best, 1e-6) << "eta " << eta;
        EXPECT_LT(std::abs(nearest.first - s.beta.real()) / s.beta.real(), 1e-6) << "eta " << eta;
    }
}

TEST(SteadyState, HomotopyFollowsLowestBranch) {
    // Unseeded continuation stays on the branch connected to zero drive,
    // which is the smallest intensity root.
    const DriveSolution d = invert_for_drive(memory_target(0.5), memory_base());
    const SteadyState s = solve_steady_state(d.params);
    const auto roots = scan_roots(d.params);
    ASSERT_FALSE(roots.empty());
    EXPECT_LT(std::abs(std::norm(s.alpha) - roots.front().second) / roots.front().second, 1e-6);
}

TEST(SteadyState, MultistabilityFlaggedAtStrongKerr) {
    const DriveSolution d = invert_for_drive(memory_target(max_eta_ratio), memory_base());
    SteadyStateOptions opt;
    opt.seed = std::pair{d.alpha, d.beta};
    const SteadyState s = solve_steady_state(d.params, opt);
    EXPECT_TRUE(s.multistable);
    // Kerr bistability plus the softening Duffing response: several branches.
    EXPECT_GE(scan_roots(d.params).size(), 3u);
    EXPECT_FALSE(s.warnings.empty());
}

TEST(SteadyState, NonConvergenceReportsResidual) {
    const DriveSolution d = invert_for_drive(memory_target(0.5), memory_base());
    SteadyStateOptions opt;
    opt.homotopy_steps = 1;
    opt.max_iterations = 1;
    opt.tolerance = 1e-300;
    try {
        solve_steady_state(d.params, opt);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_GT(e.last_residual(), 0.0);
    }
}

TEST(Effective, ZeroSqueezingIdentity) {
    PhysicalParams p = memory_base();
    p.delta0 = 1e7;
    const EffectiveParams e = derive_effective(p, cplx(100.0, -20.0), cplx(0.0, 0.0));
    EXPECT_EQ(e.r, 0.0);
    EXPECT_EQ(e.r_m, 0.0);
    EXPECT_DOUBLE_EQ(e.G, e.g);
    EXPECT_DOUBLE_EQ(e.Delta_e, e.Delta);
    EXPECT_DOUBLE_EQ(e.Delta_m, e.omega_m_prime);
    EXPECT_EQ(e.lambda, 1.0);
    EXPECT_NEAR(std::abs(e.alpha * std::exp(cplx(0.0, e.theta)) - e.alpha_abs), 0.0, 1e-12);
}

TEST(Effective, ClosedFormSqueezing) {
    EXPECT_DOUBLE_EQ(squeezing_from_ratio(0.5), 0.25 * std::log(3.0));
    EXPECT_NEAR(squeezing_from_ratio(max_eta_ratio), 0.25 * std::log(19999.0), 1e-12);
    EXPECT_NEAR(5000.0 * std::exp(-squeezing_from_ratio(max_eta_ratio)), 420.45, 0.01 * 420.45);
    EXPECT_THROW(squeezing_from_ratio(1.0), ParametricInstabilityError);
    EXPECT_THROW(squeezing_from_ratio(-0.1), ParametricInstabilityError);
    double prev = -1.0;
    for (int i = 0; i < 1000; ++i) {
        const double r = squeezing_from_ratio(i / 1000.0);
        EXPECT_GT(r, prev);
        EXPECT_NEAR(ratio_from_squeezing(r), i / 1000.0, 1e-12);
        prev = r;
    }
}

TEST(Effective, InvariantsOnSqueezedPoint) {
    const DriveSolution d = invert_for_drive(memory_target(0.9), memory_base());
    const EffectiveParams e = derive_effective(d.params, d.alpha, d.beta);
    EXPECT_NEAR(e.G / e.g, std::exp(e.r_m - e.r), 1e-14);
    EXPECT_DOUBLE_EQ(e.lambda, std::exp(-2.0 * e.r_m));
    EXPECT_LT(e.Delta_e, e.Delta);
    EXPECT_LT(e.Delta_m, e.omega_m_prime);
    EXPECT_GE(e.eta_ratio, 0.0);
    EXPECT_LT(e.eta_ratio, 1.0);
    EXPECT_LT(e.eta1_ratio, 1.0);
}

TEST(Effective, RatioAtOrAboveOneThrows) {
    PhysicalParams p = memory_base();
    p.kerr_u = 1.0;
    p.delta0 = -10.0; // Delta = -10 + 4 n, |Omega| = 2 n > Delta for small n
    EXPECT_THROW(derive_effective(p, cplx(2.0, 0.0), cplx(0.0, 0.0)), ParametricInstabilityError);
}

TEST(Inversion, AlphaFromTargetCoupling) {
    const DriveSolution d = invert_for_drive(memory_target(0.0), memory_base());
    EXPECT_NEAR(d.alpha_abs, 5000.0, 1e-9);
    EXPECT_GT(d.drive_EL, 0.0);
}

TEST(Inversion, RoundTripIsIdentity) {
    for (double eta : {0.0, 0.3, 0.9, 0.999, max_eta_ratio}) {
        for (double r_prime : {0.0, 0.2}) {
            DriveTarget t = memory_target(eta);
            t.r_prime = r_prime;
            const DriveSolution d = invert_for_drive(t, memory_base());
            SteadyStateOptions opt;
            opt.seed = std::pair{d.alpha, d.beta};
            const SteadyState s = solve_steady_state(d.params, opt);
            const EffectiveParams e = derive_effective(d.params, s.alpha, s.beta);
            EXPECT_NEAR(e.G, t.G, 1e-8 * t.G) << eta << " " << r_prime;
            EXPECT_NEAR(e.eta_ratio, eta, 1e-8 * std::max(eta, 1e-3)) << eta;
            EXPECT_NEAR(e.r_prime, r_prime, 1e-8) << eta;
            EXPECT_NEAR(e.Delta_m, t.Delta_m, 1e-8 * t.Delta_m) << eta;
            EXPECT_NEAR(e.Delta_e, t.Delta_m, 1e-8 * t.Delta_m) << eta;
        }
    }
}

TEST(Inversion, SuppressedLeverArmAtMaximalSqueezing) {
    const DriveSolution d = invert_for_drive(memory_target(max_eta_ratio), memory_base());
    const EffectiveParams e = derive_effective(d.params, d.alpha, d.beta);
    EXPECT_NEAR(e.alpha_e_minus_r(), 420.45, 0.01 * 420.45);
}

TEST(Inversion, MatchedBath) {
    const DriveSolution d = invert_for_drive(memory_target(0.9), memory_base());
    const EffectiveParams e = derive_effective(d.params, d.alpha, d.beta);
    EXPECT_NEAR(d.params.r_e, e.r, 1e-12);
    EXPECT_NEAR(std::remainder(d.params.Phi_e - 2.0 * e.theta - units::pi, units::two_pi), 0.0, 1e-12);
}

TEST(Inversion, RejectsBadTargets) {
    DriveTarget t = memory_target(0.5);
    t.G = 0.0;
    EXPECT_THROW(invert_for_drive(t, memory_base()), PreconditionError);
    t = memory_target(0.99995);
    EXPECT_THROW(invert_for_drive(t, memory_base()), PreconditionError);
    t = memory_target(0.5);
    t.r_prime = -1.0;
    EXPECT_THROW(invert_for_drive(t, memory_base()), InfeasibleError);
    PhysicalParams b = memory_base();
    b.g0 = 0.0;
    EXPECT_THROW(invert_for_drive(memory_target(0.5), b), InfeasibleError);
}
