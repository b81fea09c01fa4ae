#pragma once

// Continuous-variable Gaussian states in (X1, P1, X2, P2, ...) ordering with
// vacuum variance 1/2.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "optomech/errors.hpp"

namespace optomech {

struct GaussianState {
    int n_modes = 0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    GaussianState() = default;
    GaussianState(Eigen::VectorXd m, Eigen::MatrixXd v)
        : n_modes(static_cast<int>(m.size() / 2)), mean(std::move(m)), cov(std::move(v)) {
        if (mean.size() % 2 != 0 || cov.rows() != mean.size() || cov.cols() != mean.size()) {
            throw DomainError("GaussianState: mean and covariance must have matching even size");
        }
    }

    /// 1 / (2^n sqrt(det V)).
    double purity() const { return 1.0 / (std::pow(2.0, n_modes) * std::sqrt(cov.determinant())); }

    static GaussianState vacuum(int n) {
        return {Eigen::VectorXd::Zero(2 * n), 0.5 * Eigen::MatrixXd::Identity(2 * n, 2 * n)};
    }
};

/// Block-diagonal symplectic form, [[0, 1], [-1, 0]] per mode.
inline Eigen::MatrixXd symplectic_form(int n_modes) {
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(2 * n_modes, 2 * n_modes);
    for (int k = 0; k < n_modes; ++k) {
        omega(2 * k, 2 * k + 1) = 1.0;
        omega(2 * k + 1, 2 * k) = -1.0;
    }
    return omega;
}

namespace detail {

inline void require_symmetric(const Eigen::MatrixXd& v, const char* who) {
    if (v.rows() != v.cols() || v.rows() == 0 || v.rows() % 2 != 0) {
        throw DomainError(std::string(who) + ": covariance must be square with even dimension");
    }
    if (!v.allFinite()) throw DomainError(std::string(who) + ": non-finite covariance");
    const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
    if ((v - v.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw DomainError(std::string(who) + ": covariance is not symmetric");
    }
}

} // namespace detail

/// Symplectic eigenvalues, one per mode, descending. Computed as the square
/// roots of the (doubly degenerate) eigenvalues of M^T M with
/// M = V^{1/2} Omega V^{1/2}.
inline std::vector<double> symplectic_eigenvalues(const Eigen::MatrixXd& cov) {
    detail::require_symmetric(cov, "symplectic_eigenvalues");
    const Eigen::MatrixXd v = 0.5 * (cov + cov.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
    if (es.info() != Eigen::Success) throw NumericalError("symplectic_eigenvalues: eigen-decomposition failed");
    if (es.eigenvalues().minCoeff() <= 0.0) {
        throw DomainError("symplectic_eigenvalues: covariance is not positive definite");
    }
    const Eigen::MatrixXd root = es.operatorSqrt();
    const int n = static_cast<int>(v.rows() / 2);
    const Eigen::MatrixXd m = root * symplectic_form(n) * root;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ms(m.transpose() * m, Eigen::EigenvaluesOnly);
    if (ms.info() != Eigen::Success) throw NumericalError("symplectic_eigenvalues: eigen-decomposition failed");
    std::vector<double> sq(ms.eigenvalues().data(), ms.eigenvalues().data() + ms.eigenvalues().size());
    std::sort(sq.begin(), sq.end(), std::greater<>());
    std::vector<double> nu;
    nu.reserve(n);
    for (int k = 0; k < n; ++k) {
        // Average each degenerate pair.
        nu.push_back(std::sqrt(0.5 * (std::max(sq[2 * k], 0.0) + std::max(sq[2 * k + 1], 0.0))));
    }
    return nu;
}

struct NegativityResult {
    double E_N = 0.0;
    double eta_minus = 0.0; ///< smallest symplectic eigenvalue of the partial transpose
};

/// Logarithmic negativity (natural log) of a two-mode covariance
/// [[A, C], [C^T, B]]: Sigma = det A + det B - 2 det C,
/// eta- = sqrt((Sigma - sqrt(Sigma^2 - 4 det V)) / 2), E_N = max(0, -ln 2 eta-).
inline NegativityResult negativity(const Eigen::Matrix4d& cov4) {
    detail::require_symmetric(cov4, "log_negativity");
    const double det_a = cov4.block<2, 2>(0, 0).determinant();
    const double det_b = cov4.block<2, 2>(2, 2).determinant();
    const double det_c = cov4.block<2, 2>(0, 2).determinant();
    const double det_v = cov4.determinant();
    const double sigma = det_a + det_b - 2.0 * det_c;
    double disc = sigma * sigma - 4.0 * det_v;
    if (disc < 0.0) {
        if (disc < -1e-12 * sigma * sigma) throw DomainError("log_negativity: invalid covariance (negative discriminant)");
        disc = 0.0;
    }
    const double denom = sigma + std::sqrt(disc);
    if (!(denom > 0.0) || !(det_v > 0.0)) throw DomainError("log_negativity: invalid covariance");
    NegativityResult out;
    out.eta_minus = std::sqrt(2.0 * det_v / denom);
    out.E_N = std::max(0.0, -std::log(2.0 * out.eta_minus));
    return out;
}

inline double log_negativity(const Eigen::Matrix4d& cov4) { return negativity(cov4).E_N; }

struct FidelityResult {
    double F = 0.0;
    double n_bar_h = 0.0;
    double Theta_sq = 0.0;
};

/// Fidelity between a pure single-mode state and an arbitrary single-mode
/// Gaussian state: F = exp(-Theta^2 / (1 + n_h)) / (1 + n_h) with
/// n_h = 2 sqrt(det S) - 1, S = (V_i + V_f)/2, and
/// Theta^2 = d^T [sqrt(det S) (V_i + V_f)^{-1}] d.
inline FidelityResult gaussian_fidelity(const GaussianState& initial, const GaussianState& final_state) {
    if (initial.n_modes != 1 || final_state.n_modes != 1) {
        throw PreconditionError("gaussian_fidelity: single-mode states required");
    }
    detail::require_symmetric(initial.cov, "gaussian_fidelity");
    detail::require_symmetric(final_state.cov, "gaussian_fidelity");
    if (std::abs(initial.purity() - 1.0) > 1e-6) {
        throw PreconditionError("gaussian_fidelity: initial state must be pure");
    }
    const Eigen::Matrix2d sum = initial.cov + final_state.cov;
    const double det_sum = sum.determinant();
    if (!(std::abs(det_sum) > 1e-300)) throw DomainError("gaussian_fidelity: singular V_i + V_f");
    const double sd = std::sqrt(0.25 * det_sum);
    const Eigen::Vector2d d = initial.mean - final_state.mean;

    FidelityResult out;
    out.n_bar_h = 2.0 * sd - 1.0;
    out.Theta_sq = sd * d.dot(sum.inverse() * d);
    out.F = std::exp(-out.Theta_sq / (1.0 + out.n_bar_h)) / (1.0 + out.n_bar_h);
    return out;
}

/// Reduced state over the given 0-based mode indices, in the given order.
inline GaussianState partial_state(const GaussianState& s, const std::vector<int>& modes) {
    const int k = static_cast<int>(modes.size());
    for (int i = 0; i < k; ++i) {
        if (modes[i] < 0 || modes[i] >= s.n_modes) throw DomainError("partial_state: mode index out of range");
        for (int j = 0; j < i; ++j) {
            if (modes[i] == modes[j]) throw DomainError("partial_state: repeated mode index");
        }
    }
    Eigen::VectorXd mean(2 * k);
    Eigen::MatrixXd cov(2 * k, 2 * k);
    for (int i = 0; i < k; ++i) {
        mean.segment<2>(2 * i) = s.mean.segment<2>(2 * modes[i]);
        for (int j = 0; j < k; ++j) cov.block<2, 2>(2 * i, 2 * j) = s.cov.block<2, 2>(2 * modes[i], 2 * modes[j]);
    }
    return {mean, cov};
}

/// D(mu) S(chi)|0>: mean (sqrt2 Re mu, sqrt2 Im mu), cov diag(e^{-2chi}/2, e^{2chi}/2).
inline GaussianState initial_memory_state(std::complex<double> mu, double chi) {
    Eigen::VectorXd mean(2);
    mean << std::sqrt(2.0) * mu.real(), std::sqrt(2.0) * mu.imag();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2, 2);
    cov(0, 0) = 0.5 * std::exp(-2.0 * chi);
    cov(1, 1) = 0.5 * std::exp(2.0 * chi);
    return {mean, cov};
}

} // namespace optomech
