#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "optomech/dynamics.hpp"
#include "optomech/protocols.hpp"

using namespace optomech;

namespace {

Prepared memory_point() { return prepare(memory_defaults()); }

// Random physical effective parameters with O(1) rates.
struct RandomPoint {
    EffectiveParams eff;
    double kappa, gamma_m, gamma_c, Gamma_L, n_th;
};

RandomPoint random_point(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RandomPoint p;
    p.eff.Delta_e = 0.5 + 2.0 * u(rng);
    p.eff.Delta_m = 0.5 + 2.0 * u(rng);
    p.eff.G = 0.8 * u(rng);
    p.eff.g = p.eff.G;
    p.eff.alpha_abs = 1.0 + 5.0 * u(rng);
    p.eff.r = 1.5 * u(rng);
    p.eff.r_m = p.eff.r;
    p.eff.lambda = std::exp(-2.0 * p.eff.r_m);
    p.kappa = 0.05 + u(rng);
    p.gamma_m = 0.01 + 0.3 * u(rng);
    p.gamma_c = 0.1 + u(rng);
    p.Gamma_L = 0.1 + u(rng);
    p.n_th = 3.0 * u(rng);
    return p;
}

LinearModel model_of(const RandomPoint& p, Switches sw = {}) {
    return {build_drift(p.eff, p.kappa, p.gamma_m, p.gamma_c, sw),
            build_noise(p.eff, p.kappa, p.gamma_m, p.gamma_c, p.Gamma_L, p.n_th), sw};
}

double rel_max(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

} // namespace

TEST(Drift, AllSwitchesOffIsBlockDiagonal) {
    EffectiveParams e;
    e.Delta_e = 3.0;
    e.Delta_m = 2.0;
    e.G = 0.4;
    e.alpha_abs = 10.0;
    const Mat5 a = build_drift(e, 0.5, 0.1, 0.7, {false, +1, false, true});
    Mat5 expected = Mat5::Zero();
    expected.topLeftCorner<2, 2>() << -0.5, 3.0, -3.0, -0.5;
    expected.block<2, 2>(2, 2) << -0.1, 2.0, -2.0, -0.1;
    expected(4, 4) = -0.7;
    EXPECT_EQ(a, expected);
}

TEST(Drift, OperatingPointLayout) {
    const Prepared prep = memory_point();
    const Mat5 a = make_model(prep.eff, prep.params, {}).A;
    const double G = 0.05 * units::angular(10 * units::MHz);
    EXPECT_NEAR(a(1, 2), 2.0 * G, 1e-8 * G);
    EXPECT_NEAR(a(3, 0), 2.0 * G, 1e-8 * G);
    EXPECT_NEAR(a(1, 4), -std::sqrt(2.0) * 5000.0 * std::exp(-squeezing_from_ratio(max_eta_ratio)), 1e-6);
    EXPECT_EQ(a(1, 2), a(3, 0));
    EXPECT_EQ(a(2, 1), 0.0);
    EXPECT_EQ(a(0, 3), 0.0);
    // psi couples only into the optical momentum.
    for (int i = 0; i < 4; ++i) EXPECT_EQ(a(psi_index, i), 0.0);
    for (int i : {0, 2, 3}) EXPECT_EQ(a(i, psi_index), 0.0);
    EXPECT_EQ(a(4, 4), -prep.params.gamma_c);
}

TEST(Drift, ReadSignFlipsCoupling) {
    const Prepared prep = memory_point();
    const Mat5 w = make_model(prep.eff, prep.params, {true, +1, true, true}).A;
    const Mat5 r = make_model(prep.eff, prep.params, {true, -1, true, true}).A;
    EXPECT_EQ(r(1, 2), -w(1, 2));
    EXPECT_EQ(r(3, 0), -w(3, 0));
}

TEST(Noise, VacuumBathAndSqueezedRatio) {
    EffectiveParams e;
    Mat5 n = build_noise(e, 2.0, 0.3, 5.0, 7.0, 0.0);
    EXPECT_EQ(n.diagonal(), (Vec5() << 2.0, 2.0, 0.3, 0.3, 2.0 * 25.0 * 7.0).finished());
    EXPECT_TRUE((n - Mat5(n.diagonal().asDiagonal())).isZero());
    e.r_m = 0.7;
    e.lambda = std::exp(-1.4);
    n = build_noise(e, 2.0, 0.3, 5.0, 7.0, 3.0);
    EXPECT_NEAR(n(2, 2) / n(3, 3), e.lambda * e.lambda, 1e-15);
    EXPECT_NEAR(n(2, 2), 0.3 * e.lambda * 7.0, 1e-15);
    // Drive off: bare thermal bath.
    n = build_noise(e, 2.0, 0.3, 5.0, 7.0, 3.0, false);
    EXPECT_EQ(n(2, 2), n(3, 3));
}

TEST(BathCorrelations, MatchedBathIsEffectiveVacuum) {
    for (double r : {0.0, 0.4, 2.4758}) {
        for (double theta : {0.0, 0.3, -1.2}) {
            const BathCorrelations c = squeezed_bath_correlations(r, r, 2.0 * theta + units::pi, theta);
            EXPECT_NEAR(std::abs(c.xx - 0.5), 0.0, 1e-12);
            EXPECT_NEAR(std::abs(c.yy - 0.5), 0.0, 1e-12);
            EXPECT_NEAR(std::abs(c.xy - (-1.0 / std::complex<double>(0, 2))), 0.0, 1e-12);
            EXPECT_NEAR(std::abs(c.yx - (1.0 / std::complex<double>(0, 2))), 0.0, 1e-12);
        }
    }
}

TEST(BathCorrelations, NoSqueezingAndAmplifiedExposure) {
    for (double phi : {0.0, 1.0, 2.5}) {
        const BathCorrelations c = squeezed_bath_correlations(0.0, 0.0, phi, 0.4);
        EXPECT_NEAR(std::abs(c.xx - 0.5), 0.0, 1e-15);
        EXPECT_NEAR(std::abs(c.yy - 0.5), 0.0, 1e-15);
        EXPECT_NEAR(std::abs(c.xy - std::complex<double>(0, 0.5)), 0.0, 1e-15);
    }
    EXPECT_NEAR(squeezed_bath_correlations(1.0, 0.0, 0.3, 0.1).xx.real(), 0.5 * std::exp(2.0), 1e-14);
}

TEST(Evolve, IdentityFlow) {
    LinearModel m;
    MomentState s;
    s.mean << 1, 2, 3, 4, 5;
    s.V = Mat5::Identity() * 0.7;
    const MomentState out = evolve(m, s, 3.0, 0.01);
    EXPECT_EQ(out.mean, s.mean);
    EXPECT_EQ(out.V, s.V);
    EXPECT_DOUBLE_EQ(out.t, 3.0);
}

TEST(Evolve, ScalarOrnsteinUhlenbeckClosedForm) {
    EffectiveParams e;
    e.r_m = 0.25;
    e.lambda = std::exp(-0.5);
    const double gamma_m = 0.8, n_th = 2.0;
    const LinearModel m{build_drift(e, 1.0, gamma_m, 1.0, {false, +1, false, true}),
                        build_noise(e, 1.0, gamma_m, 1.0, 0.0, n_th), {false, +1, false, true}};
    MomentState s;
    s.V = 0.5 * Mat5::Identity();
    s.V(2, 2) = 4.0;
    for (double t : {0.1, 1.0, 3.0}) {
        const MomentState out = evolve(m, s, t, 1e-3);
        const double decay = std::exp(-2.0 * gamma_m * t);
        const double expected = decay * 4.0 + (1.0 - decay) * e.lambda * (2.0 * n_th + 1.0) / 2.0;
        EXPECT_NEAR(out.V(2, 2), expected, 1e-11);
    }
}

TEST(Evolve, HalvingStepConvergesAtOperatingPoint) {
    const Prepared prep = memory_point();
    const LinearModel m = make_model(prep.eff, prep.params, {});
    MomentState s;
    s.mean << 0.7, 0.0, 0.0, 0.0, 0.0;
    s.V = 0.5 * Mat5::Identity();
    s.V(4, 4) = prep.params.gamma_c * prep.params.Gamma_L;
    const double t = units::pi / (2.0 * prep.eff.G);
    const double dt = recommended_dt(m);
    const MomentState a = evolve(m, s, t, dt);
    const MomentState b = evolve(m, s, t, 0.5 * dt);
    EXPECT_LT(rel_max(a.V, b.V), 1e-8);
    EXPECT_LT((a.mean - b.mean).cwiseAbs().maxCoeff() / b.mean.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Evolve, SteadyStateIsFixedPointAndStaysPhysical) {
    const Prepared prep = memory_point();
    const LinearModel m = make_model(prep.eff, prep.params, {});
    MomentState s;
    s.V = steady_covariance(m);
    const MomentState out = evolve(m, s, 10.0 / prep.params.kappa, recommended_dt(m, 200));
    EXPECT_LT(rel_max(out.V, s.V), 1e-8);

    MomentState v;
    v.V = 0.5 * Mat5::Identity();
    v.V(4, 4) = prep.params.gamma_c * prep.params.Gamma_L;
    const double chunk = 1.0 / prep.params.kappa;
    for (int k = 0; k < 5; ++k) {
        v = evolve(m, v, chunk, recommended_dt(m, 200));
        for (int mode : {0, 1}) {
            for (double nu : symplectic_eigenvalues(partial_state(v, {mode}).cov)) EXPECT_GE(nu, 0.5 - 1e-9);
        }
        for (double nu : symplectic_eigenvalues(partial_state(v, {0, 1}).cov)) EXPECT_GE(nu, 0.5 - 1e-9);
    }
}

TEST(Evolve, DivergenceIsReported) {
    LinearModel m;
    m.A = 800.0 * Mat5::Identity();
    MomentState s;
    s.mean.setOnes();
    try {
        evolve(m, s, 10.0, 0.01);
        FAIL();
    } catch (const DivergenceError& e) {
        EXPECT_GT(e.time(), 0.0);
        EXPECT_LT(e.time(), 10.0);
    }
    EXPECT_THROW(evolve(m, s, 1.0, 0.0), PreconditionError);
}

TEST(Stability, Basics) {
    EXPECT_TRUE(is_stable(-Mat5::Identity()).stable);
    EXPECT_DOUBLE_EQ(is_stable(-Mat5::Identity()).margin, 1.0);
    Mat5 a = -Mat5::Identity();
    a.row(2).setZero();
    EXPECT_FALSE(is_stable(a).stable);
}

TEST(Stability, EntanglementGridAcrossKappa) {
    for (double mhz : {1.0, 2.0, 3.0, 5.0, 8.0, 10.0}) {
        for (double eta : {0.0, 0.9, 0.9999}) {
            OperatingPoint op = entanglement_defaults();
            op.kappa = units::angular(mhz * units::MHz);
            op.eta_ratio = eta;
            const Prepared prep = prepare(op);
            EXPECT_TRUE(is_stable(make_model(prep.eff, prep.params, {}).A).stable) << mhz << " " << eta;
        }
    }
}

TEST(RouthHurwitz, ZeroCouplingAndThreshold) {
    EffectiveParams e;
    e.Delta_e = 2.0;
    e.Delta_m = 1.5;
    const double kappa = 0.3, gm = 0.01;
    RouthHurwitz rh = routh_hurwitz(e, kappa, gm);
    EXPECT_TRUE(rh.cond_a);
    EXPECT_TRUE(rh.cond_b);
    e.G = 1.01 * rh.G_max;
    EXPECT_FALSE(routh_hurwitz(e, kappa, gm).cond_a);
    e.G = 0.99 * rh.G_max;
    EXPECT_TRUE(routh_hurwitz(e, kappa, gm).cond_a);
    e.Delta_m = 0.0;
    EXPECT_THROW(routh_hurwitz(e, kappa, gm), PreconditionError);
}

TEST(RouthHurwitz, AgreesWithEigenvaluesOnRandomModels) {
    std::mt19937_64 rng(2024);
    int compared = 0, unstable = 0;
    while (compared < 100) {
        RandomPoint p = random_point(rng);
        p.eff.G *= 2.0; // straddle the threshold
        const Mat5 a = build_drift(p.eff, p.kappa, p.gamma_m, p.gamma_c, {});
        const StabilityReport st = is_stable(a);
        if (std::abs(st.margin) < 1e-6 * p.eff.Delta_m) continue;
        const RouthHurwitz rh = routh_hurwitz(p.eff, p.kappa, p.gamma_m);
        EXPECT_EQ(rh.cond_a && rh.cond_b, st.stable) << "G " << p.eff.G << " G_max " << rh.G_max;
        unstable += !st.stable;
        ++compared;
    }
    // Both outcomes must be represented for the comparison to mean anything.
    EXPECT_GT(unstable, 10);
    EXPECT_LT(unstable, 90);
}

TEST(Lyapunov, TrivialDiagonalModel) {
    EffectiveParams e;
    const double gamma_c = 3.0, Gamma_L = 0.2;
    const LinearModel m{build_drift(e, 1.0, 0.5, gamma_c, {false, +1, false, true}),
                        build_noise(e, 1.0, 0.5, gamma_c, Gamma_L, 0.0), {false, +1, false, true}};
    const Mat5 v = steady_covariance(m);
    Vec5 d;
    d << 0.5, 0.5, 0.5, 0.5, gamma_c * Gamma_L;
    EXPECT_TRUE(v.isApprox(Mat5(d.asDiagonal()), 1e-14));
}

TEST(Lyapunov, ResidualOnRandomStableMatrices) {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int k = 0; k < 100; ++k) {
        Mat5 a;
        for (int i = 0; i < 25; ++i) a.data()[i] = z(rng);
        Eigen::EigenSolver<Mat5> es(a, false);
        a -= (es.eigenvalues().real().maxCoeff() + 0.1 + u(rng)) * Mat5::Identity();
        Mat5 n = Mat5::Zero();
        for (int i = 0; i < 5; ++i) n(i, i) = u(rng);
        const Eigen::MatrixXd v = solve_lyapunov(a, n);
        EXPECT_LE((a * v + v * a.transpose() + n).cwiseAbs().maxCoeff(), 1e-10 * n.cwiseAbs().maxCoeff());
        EXPECT_TRUE(v.isApprox(v.transpose(), 1e-15));
    }
}

TEST(Lyapunov, PhysicalModelsResidualAndPhaseNoiseVariance) {
    std::mt19937_64 rng(5);
    int done = 0;
    while (done < 100) {
        const RandomPoint p = random_point(rng);
        const LinearModel m = model_of(p);
        if (!is_stable(m.A).stable) continue;
        const Mat5 v = steady_covariance(m);
        EXPECT_LE((m.A * v + v * m.A.transpose() + m.N).cwiseAbs().maxCoeff(), 1e-10 * m.N.cwiseAbs().maxCoeff());
        EXPECT_NEAR(v(4, 4), p.gamma_c * p.Gamma_L, 1e-9 * p.gamma_c * p.Gamma_L);
        ++done;
    }
}

TEST(Lyapunov, OperatingPointPhaseNoiseVariance) {
    const Prepared prep = memory_point();
    const Mat5 v = steady_covariance(make_model(prep.eff, prep.params, {}));
    const double expected = prep.params.gamma_c * prep.params.Gamma_L;
    EXPECT_NEAR(v(4, 4), expected, 1e-9 * expected);
}

TEST(Lyapunov, AgreesWithLongIntegration) {
    std::mt19937_64 rng(17);
    int done = 0;
    while (done < 5) {
        const RandomPoint p = random_point(rng);
        const LinearModel m = model_of(p);
        if (!is_stable(m.A).stable) continue;
        const Mat5 v = steady_covariance(m);
        MomentState s;
        s.V = 0.5 * Mat5::Identity();
        const double t = 20.0 / std::min({p.kappa, p.gamma_m, p.gamma_c, is_stable(m.A).margin});
        const MomentState out = evolve(m, s, t, recommended_dt(m, 100));
        EXPECT_LT(rel_max(out.V, v), 1e-6);
        ++done;
    }
}

TEST(Lyapunov, UnstableModelThrows) {
    LinearModel m;
    m.A = Mat5::Identity();
    m.N = Mat5::Identity();
    EXPECT_THROW(steady_covariance(m), StabilityError);
}

TEST(Lyapunov, PhaseNoiseOffDecouplesNoiseParameters) {
    std::mt19937_64 rng(3);
    RandomPoint p = random_point(rng);
    while (!is_stable(model_of(p).A).stable) p = random_point(rng);
    const Switches off{true, +1, false, true};
    const Mat5 ref = steady_covariance(model_of(p, off));
    for (auto [gc, gl] : {std::pair{0.0, 0.0}, std::pair{5.0, 0.1}, std::pair{0.2, 9.0}}) {
        RandomPoint q = p;
        q.gamma_c = gc;
        q.Gamma_L = gl;
        const Mat5 v = steady_covariance(model_of(q, off));
        EXPECT_LT(rel_max(v.topLeftCorner<4, 4>(), ref.topLeftCorner<4, 4>()), 1e-12);
        EXPECT_TRUE(v.col(4).head(4).isZero(0.0));
    }
}
