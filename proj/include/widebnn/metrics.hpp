#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "widebnn/gaussian.hpp"
#include "widebnn/numkit.hpp"

namespace widebnn {

/// ‖A − B‖_F / ‖B‖_F.
inline double rel_frobenius(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "rel_frobenius");
    const double ref = frobenius_norm(b);
    if (ref == 0.0) {
        throw ZeroReference("reference matrix has zero Frobenius norm");
    }
    return frobenius_norm(a - b) / ref;
}

inline double rel_frobenius(std::span<const double> a, std::span<const double> b) {
    return rel_frobenius(DenseMatrix::column(a), DenseMatrix::column(b));
}

namespace detail {

inline void require_same_dim(const GaussianDist& p, const GaussianDist& q) {
    p.check();
    q.check();
    if (p.dim() != q.dim()) {
        throw DimensionMismatch("Gaussians of dimension " + std::to_string(p.dim()) + " and " +
                                std::to_string(q.dim()));
    }
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace detail

/// Squared 2-Wasserstein distance (Bures form):
/// ‖μ_P − μ_Q‖² + Tr(Σ_P + Σ_Q − 2·(Σ_Q^{1/2} Σ_P Σ_Q^{1/2})^{1/2}).
inline double w2_gaussian(const GaussianDist& p, const GaussianDist& q) {
    detail::require_same_dim(p, q);
    const double mean_term = detail::squared_distance(p.mean, q.mean);
    if (p.dim() == 0) {
        return mean_term;
    }
    const DenseMatrix root_q = sym_sqrt(symmetrize(q.cov));
    const DenseMatrix inner = symmetrize(matmul(root_q, matmul(symmetrize(p.cov), root_q)));
    const double cross = trace(sym_sqrt(inner));
    const double w2 = mean_term + trace(p.cov) + trace(q.cov) - 2.0 * cross;
    return std::max(w2, 0.0);
}

/// KL(P ‖ Q) = ½[Tr(Σ_Q⁻¹Σ_P) + (μ_Q−μ_P)ᵀΣ_Q⁻¹(μ_Q−μ_P) − dim + ln det Σ_Q − ln det Σ_P].
inline double kl_gaussian(const GaussianDist& p, const GaussianDist& q) {
    detail::require_same_dim(p, q);
    const std::size_t n = p.dim();
    if (n == 0) {
        return 0.0;
    }
    const DenseMatrix lq = cholesky(symmetrize(q.cov));
    DenseMatrix lp;
    try {
        lp = cholesky(symmetrize(p.cov));
    } catch (const NotPositiveDefinite&) {
        throw SingularP("covariance of P is singular");
    }
    // Tr(Σ_Q⁻¹Σ_P) = ‖L_Q⁻¹ L_P‖_F²
    DenseMatrix whitened = lp;
    forward_substitute(lq, whitened);
    const double tr = std::pow(frobenius_norm(whitened), 2);

    DenseMatrix diff(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        diff(i, 0) = q.mean[i] - p.mean[i];
    }
    forward_substitute(lq, diff);
    const double maha = std::pow(frobenius_norm(diff), 2);

    const double kl = 0.5 * (tr + maha - static_cast<double>(n) + log_det_from_cholesky(lq) -
                             log_det_from_cholesky(lp));
    return kl < -1e-12 ? kl : std::max(kl, 0.0);
}

/// Squared W2 against the isotropic reference N(0, v·I) for P given through
/// the eigenvalues of its covariance (commuting case, no matrix roots):
/// ‖μ‖² + Σᵢ (√σᵢ − √v)².
inline double w2_to_isotropic(std::span<const double> mean, std::span<const double> cov_eigenvalues, double v) {
    double s = squared_norm(mean);
    const double rv = std::sqrt(v);
    for (double sigma : cov_eigenvalues) {
        const double d = std::sqrt(std::max(sigma, 0.0)) - rv;
        s += d * d;
    }
    return s;
}

/// KL(P ‖ N(0, v·I)) from the eigenvalues of Σ_P:
/// ½ Σᵢ [σᵢ/v − 1 − ln(σᵢ/v)] + ½‖μ‖²/v.
inline double kl_to_isotropic(std::span<const double> mean, std::span<const double> cov_eigenvalues, double v) {
    double s = squared_norm(mean) / v;
    for (double sigma : cov_eigenvalues) {
        if (!(sigma > 0.0)) {
            throw SingularP("covariance of P is singular");
        }
        const double t = sigma / v - 1.0;
        s += t - std::log1p(t);
    }
    return 0.5 * s;
}

}  // namespace widebnn
