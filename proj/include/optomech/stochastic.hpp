#pragma once

// Trajectory-level sampling: the Ornstein-Uhlenbeck phase-noise process and
// Monte Carlo ensembles of the full linear SDE du = A u dt + sqrt(N) dW.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "optomech/dynamics.hpp"
#include "optomech/errors.hpp"
#include "optomech/random.hpp"

namespace optomech {

struct NoiseSpec {
    double gamma_c = 0.0;
    double Gamma_L = 0.0;
    std::uint64_t seed = 42;
    long n_traj = 1000;
    double dt = 0.0;
};

inline void check(const NoiseSpec& s) {
    if (!(s.dt > 0.0)) throw PreconditionError("NoiseSpec: dt must be positive");
    if (!(s.dt * s.gamma_c < 0.1)) throw PreconditionError("NoiseSpec: dt * gamma_c must be below 0.1");
    if (s.n_traj < 100) throw PreconditionError("NoiseSpec: at least 100 trajectories required");
    if (s.gamma_c < 0.0 || s.Gamma_L < 0.0) throw DomainError("NoiseSpec: negative rate");
}

namespace detail {

/// Pairwise sum of term(i) over the non-empty range [lo, hi), independent
/// of any execution schedule.
template <class T, class F>
T pairwise_sum(long lo, long hi, const F& term) {
    if (hi <= lo) throw PreconditionError("pairwise_sum: empty range");
    if (hi - lo <= 8) {
        T acc = term(lo);
        for (long i = lo + 1; i < hi; ++i) acc += term(i);
        return acc;
    }
    const long mid = lo + (hi - lo) / 2;
    return T(pairwise_sum<T>(lo, mid, term) + pairwise_sum<T>(mid, hi, term));
}

/// Runs body(i) for i in [0, n) on up to `threads` workers. The first
/// failure by index is rethrown.
template <class F>
void parallel_for(long n, int threads, const F& body) {
    threads = std::max(1, std::min<int>(threads, static_cast<int>(std::min<long>(n, 1 << 16))));
    std::vector<std::exception_ptr> errors(threads);
    std::vector<long> error_index(threads, n);
    auto work = [&](int w) {
        for (long i = w; i < n; i += threads) {
            try {
                body(i);
            } catch (...) {
                errors[w] = std::current_exception();
                error_index[w] = i;
                return;
            }
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    int first = -1;
    for (int w = 0; w < threads; ++w) {
        if (errors[w] && (first < 0 || error_index[w] < error_index[first])) first = w;
    }
    if (first >= 0) std::rethrow_exception(errors[first]);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Ornstein-Uhlenbeck phase noise

struct OuEnsemble {
    double dt = 0.0;
    double gamma_c = 0.0;
    Eigen::MatrixXd paths; ///< one trajectory per row, column k at t = k dt
};

/// Euler-Maruyama for d psi = -gamma_c psi dt + dW, <dW^2> = 2 gamma_c^2 Gamma_L dt,
/// started from the stationary law N(0, gamma_c Gamma_L).
inline OuEnsemble sample_ou(const NoiseSpec& spec, double duration) {
    check(spec);
    if (!(duration >= 0.0)) throw PreconditionError("sample_ou: duration must be non-negative");
    const long steps = static_cast<long>(std::llround(duration / spec.dt));
    OuEnsemble out;
    out.dt = spec.dt;
    out.gamma_c = spec.gamma_c;
    out.paths.resize(spec.n_traj, steps + 1);
    const double sd0 = std::sqrt(spec.gamma_c * spec.Gamma_L);
    const double kick = std::sqrt(2.0 * spec.gamma_c * spec.gamma_c * spec.Gamma_L * spec.dt);
    const double decay = 1.0 - spec.gamma_c * spec.dt;
    for (long j = 0; j < spec.n_traj; ++j) {
        auto rng = Philox4x32::stream(spec.seed, static_cast<std::uint64_t>(j));
        double psi = sd0 * rng.normal();
        out.paths(j, 0) = psi;
        for (long k = 1; k <= steps; ++k) {
            psi = decay * psi + kick * rng.normal();
            out.paths(j, k) = psi;
        }
    }
    return out;
}

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Mean and standard error of per-trajectory values.
inline Estimate mean_with_error(const std::vector<double>& x) {
    const long n = static_cast<long>(x.size());
    if (n < 2) throw PreconditionError("mean_with_error: need at least two samples");
    const double mean = detail::pairwise_sum<double>(0, n, [&](long i) { return x[i]; }) / n;
    const double ss = detail::pairwise_sum<double>(0, n, [&](long i) { return (x[i] - mean) * (x[i] - mean); });
    return {mean, std::sqrt(ss / (n - 1) / n)};
}

/// Autocovariance at lag tau: each trajectory contributes the time average
/// of psi(t) psi(t + tau); the error bar is across trajectories.
inline Estimate autocovariance(const OuEnsemble& e, double tau) {
    const long lag = static_cast<long>(std::llround(tau / e.dt));
    const long len = e.paths.cols();
    if (lag < 0 || lag >= len) throw PreconditionError("autocovariance: lag outside the trajectory");
    std::vector<double> per(e.paths.rows());
    for (long j = 0; j < e.paths.rows(); ++j) {
        const auto row = e.paths.row(j);
        const long m = len - lag;
        per[j] = detail::pairwise_sum<double>(0, m, [&](long k) { return row(k) * row(k + lag); }) / m;
    }
    return mean_with_error(per);
}

struct Spectrum {
    std::vector<double> omega; ///< rad/s
    std::vector<double> power;
    std::vector<double> std_error;
};

/// Averaged periodogram P(w) = |sum_k psi_k e^{-i w t_k} dt|^2 / T on a
/// uniform grid [0, 10 gamma_c]; matches the two-sided spectrum
/// 2 Gamma_L / (1 + w^2 / gamma_c^2) of the process.
inline Spectrum estimate_spectrum(const OuEnsemble& e, int n_freq = 41) {
    const long len = e.paths.cols();
    const double total = static_cast<double>(len) * e.dt;
    if (!(e.gamma_c > 0.0) || total < 100.0 / e.gamma_c) {
        throw PreconditionError("estimate_spectrum: trajectories must span at least 100 / gamma_c");
    }
    if (n_freq < 2) throw PreconditionError("estimate_spectrum: need at least two frequencies");
    Spectrum s;
    std::vector<double> per(e.paths.rows());
    for (int f = 0; f < n_freq; ++f) {
        const double w = 10.0 * e.gamma_c * f / (n_freq - 1);
        const std::complex<double> step = std::polar(1.0, -w * e.dt);
        for (long j = 0; j < e.paths.rows(); ++j) {
            std::complex<double> phase(1.0, 0.0), acc(0.0, 0.0);
            for (long k = 0; k < len; ++k) {
                acc += e.paths(j, k) * phase;
                phase *= step;
                if ((k & 1023) == 1023) phase = std::polar(1.0, -w * e.dt * (k + 1));
            }
            per[j] = e.dt * e.dt / total * std::norm(acc);
        }
        const Estimate est = mean_with_error(per);
        s.omega.push_back(w);
        s.power.push_back(est.value);
        s.std_error.push_back(est.std_error);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Linear-SDE ensembles

enum class McScheme {
    EulerMaruyama, ///< u += A u dt + sqrt(N_ii dt) xi_i
    ExactLinear,   ///< u = e^{A dt} u + chol(Q) xi with Q the exact step covariance
};

struct McOptions {
    McScheme scheme = McScheme::EulerMaruyama;
    int threads = 1;
};

struct McResult {
    long n_traj = 0;
    Vec5 mean = Vec5::Zero();
    Mat5 cov = Mat5::Zero();
    Vec5 mean_se = Vec5::Zero();
    Mat5 cov_se = Mat5::Zero();
};

namespace detail {

/// Symmetric square root of a positive semi-definite matrix (clips
/// round-off negatives).
inline Mat5 psd_sqrt(const Mat5& m) {
    Eigen::SelfAdjointEigenSolver<Mat5> es(0.5 * (m + m.transpose()));
    const Vec5 ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// e^{A h} and the exact noise covariance of one step (Van Loan).
inline std::pair<Mat5, Mat5> exact_step(const Mat5& a, const Mat5& n, double h) {
    Eigen::Matrix<double, 10, 10> big = Eigen::Matrix<double, 10, 10>::Zero();
    big.topLeftCorner<5, 5>() = -a * h;
    big.topRightCorner<5, 5>() = n * h;
    big.bottomRightCorner<5, 5>() = a.transpose() * h;
    const Eigen::Matrix<double, 10, 10> e = big.exp();
    const Mat5 phi = e.bottomRightCorner<5, 5>().transpose();
    Mat5 q = phi * e.topRightCorner<5, 5>();
    q = 0.5 * (q + q.transpose()).eval();
    return {phi, q};
}

} // namespace detail

/// Sample mean and unbiased covariance at t = duration over spec.n_traj
/// trajectories started from N(init.mean, init.V). Trajectory j draws from
/// Philox stream (spec.seed, j); results are reduced in index order.
inline McResult mc_ensemble(const LinearModel& model, const MomentState& init, double duration,
                            const NoiseSpec& spec, const McOptions& opt = {}) {
    check(spec);
    if (!model.A.allFinite() || !model.N.allFinite()) throw DomainError("mc_ensemble: non-finite model");
    if (!(duration >= 0.0)) throw PreconditionError("mc_ensemble: duration must be non-negative");

    const long steps = duration > 0.0 ? std::max(1L, static_cast<long>(std::ceil(duration / spec.dt - 1e-9))) : 0;
    const double h = steps > 0 ? duration / static_cast<double>(steps) : 0.0;
    const Mat5 init_root = detail::psd_sqrt(init.V);

    Mat5 phi = Mat5::Identity() + h * model.A;
    Mat5 noise_root = Mat5::Zero();
    Vec5 noise_diag = Vec5::Zero();
    const bool exact = opt.scheme == McScheme::ExactLinear && steps > 0;
    if (exact) {
        auto [p, q] = detail::exact_step(model.A, model.N, h);
        phi = p;
        noise_root = detail::psd_sqrt(q);
    } else {
        for (int i = 0; i < 5; ++i) noise_diag[i] = std::sqrt(std::max(model.N(i, i), 0.0) * h);
    }

    std::vector<Vec5> finals(spec.n_traj);
    detail::parallel_for(spec.n_traj, opt.threads, [&](long j) {
        auto rng = Philox4x32::stream(spec.seed, static_cast<std::uint64_t>(j));
        Vec5 xi;
        for (int i = 0; i < 5; ++i) xi[i] = rng.normal();
        Vec5 u = init.mean + init_root * xi;
        for (long k = 0; k < steps; ++k) {
            for (int i = 0; i < 5; ++i) xi[i] = rng.normal();
            u = exact ? Vec5(phi * u + noise_root * xi) : Vec5(phi * u + noise_diag.cwiseProduct(xi));
            if (!u.allFinite()) {
                throw DivergenceError("mc_ensemble: trajectory " + std::to_string(j) + " diverged",
                                      init.t + h * static_cast<double>(k + 1), j);
            }
        }
        finals[j] = u;
    });

    const long n = spec.n_traj;
    McResult r;
    r.n_traj = n;
    r.mean = detail::pairwise_sum<Vec5>(0, n, [&](long j) { return finals[j]; }) / static_cast<double>(n);
    const Vec5 var_mean = detail::pairwise_sum<Vec5>(0, n, [&](long j) {
        return Vec5((finals[j] - r.mean).cwiseAbs2());
    });
    r.mean_se = (var_mean / static_cast<double>(n - 1) / static_cast<double>(n)).cwiseSqrt();

    r.cov = detail::pairwise_sum<Mat5>(0, n, [&](long j) {
                const Vec5 d = finals[j] - r.mean;
                return Mat5(d * d.transpose());
            }) / static_cast<double>(n - 1);
    // Standard error of each covariance element: spread of the centred
    // products d_i d_j across trajectories.
    const Mat5 mean_prod = r.cov * (static_cast<double>(n - 1) / n);
    const Mat5 ss = detail::pairwise_sum<Mat5>(0, n, [&](long j) {
        const Vec5 d = finals[j] - r.mean;
        const Mat5 dev = d * d.transpose() - mean_prod;
        return Mat5(dev.cwiseAbs2());
    });
    r.cov_se = (ss / static_cast<double>(n - 1) / static_cast<double>(n)).cwiseSqrt();
    return r;
}

} // namespace optomech
