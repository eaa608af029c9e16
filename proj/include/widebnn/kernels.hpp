#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "widebnn/gaussian.hpp"
#include "widebnn/network.hpp"
#include "widebnn/numkit.hpp"

namespace widebnn {

/// E[φ(u)φ(v)] and E[φ′(u)φ′(v)] for (u, v) ~ N(0, [[a, c], [c, b]]).
struct DualExpectation {
    double phi = 0.0;
    double dphi = 0.0;
};

inline double clamp_unit(double x) noexcept { return std::clamp(x, -1.0, 1.0); }

inline DualExpectation erf_dual(double a, double b, double c) noexcept {
    const double pa = 1.0 + 2.0 * a;
    const double pb = 1.0 + 2.0 * b;
    const double phi = (2.0 / std::numbers::pi) * std::asin(clamp_unit(2.0 * c / std::sqrt(pa * pb)));
    // pa·pb − 4c² >= 1 whenever c² <= ab.
    const double det = std::max(pa * pb - 4.0 * c * c, 1.0);
    return {phi, (4.0 / std::numbers::pi) / std::sqrt(det)};
}

/// Arc-cosine kernel of degree 1 and its derivative (degree 0).
inline DualExpectation relu_dual(double a, double b, double c) noexcept {
    if (!(a > 0.0) || !(b > 0.0)) {
        return {0.0, 0.0};
    }
    const double norm = std::sqrt(a * b);
    const double theta = std::acos(clamp_unit(c / norm));
    const double pi = std::numbers::pi;
    return {norm / (2.0 * pi) * (std::sin(theta) + (pi - theta) * std::cos(theta)), (pi - theta) / (2.0 * pi)};
}

inline DualExpectation dual_expectation(Nonlinearity n, double a, double b, double c) noexcept {
    switch (n) {
        case Nonlinearity::Erf: return erf_dual(a, b, c);
        case Nonlinearity::ReLU: return relu_dual(a, b, c);
        case Nonlinearity::Identity: return {c, 1.0};
    }
    return {};
}

/// NNGP kernel K and NTK Θ on the grid X1 x X2.
struct KernelPair {
    DenseMatrix K;
    DenseMatrix Theta;
};

namespace detail {

inline Vector input_sq_norms(const DenseMatrix& x, const NetworkConfig& config) {
    Vector out(x.rows());
    const double s2w = config.sigma_w * config.sigma_w;
    const double s2b = config.sigma_b * config.sigma_b;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        out[i] = s2b + s2w * squared_norm(x.row(i)) / static_cast<double>(config.input_dim);
    }
    return out;
}

inline KernelPair kernel_recursion(const NetworkConfig& config, const DenseMatrix& x1, const DenseMatrix& x2,
                                   bool with_ntk) {
    config.validate();
    if (x1.cols() != config.input_dim || x2.cols() != config.input_dim) {
        throw DimensionMismatch("kernel inputs must have " + std::to_string(config.input_dim) + " columns");
    }
    const double s2w = config.sigma_w * config.sigma_w;
    const double s2b = config.sigma_b * config.sigma_b;
    const double inv_d0 = 1.0 / static_cast<double>(config.input_dim);

    // (x,x), (x',x') and (x,x') recursions carried together.
    Vector diag1 = input_sq_norms(x1, config);
    Vector diag2 = input_sq_norms(x2, config);
    DenseMatrix k = matmul_transposed(x1, x2);
    for (double& v : k.entries()) {
        v = s2b + s2w * v * inv_d0;
    }
    DenseMatrix theta = with_ntk ? k : DenseMatrix{};

    for (std::size_t l = 0; l < config.depth; ++l) {
        for (std::size_t i = 0; i < k.rows(); ++i) {
            for (std::size_t j = 0; j < k.cols(); ++j) {
                const DualExpectation e = dual_expectation(config.nonlinearity, diag1[i], diag2[j], k(i, j));
                k(i, j) = s2b + s2w * e.phi;
                if (with_ntk) {
                    theta(i, j) = k(i, j) + s2w * e.dphi * theta(i, j);
                }
            }
        }
        for (double& a : diag1) {
            a = s2b + s2w * dual_expectation(config.nonlinearity, a, a, a).phi;
        }
        for (double& b : diag2) {
            b = s2b + s2w * dual_expectation(config.nonlinearity, b, b, b).phi;
        }
    }
    return {std::move(k), std::move(theta)};
}

}  // namespace detail

inline DenseMatrix nngp_kernel(const NetworkConfig& config, const DenseMatrix& x1, const DenseMatrix& x2) {
    return detail::kernel_recursion(config, x1, x2, false).K;
}

inline KernelPair ntk_kernel(const NetworkConfig& config, const DenseMatrix& x1, const DenseMatrix& x2) {
    return detail::kernel_recursion(config, x1, x2, true);
}

namespace detail {

inline DenseMatrix add_diagonal(DenseMatrix a, double v) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
        a(i, i) += v;
    }
    return a;
}

inline GaussianPredictive flatten_outputs(const DenseMatrix& mean_by_point, const DenseMatrix& cov_points) {
    const std::size_t d = mean_by_point.cols();
    GaussianPredictive out;
    out.mean.assign(mean_by_point.entries().begin(), mean_by_point.entries().end());
    out.cov = kron_identity(cov_points, d);
    return out;
}

inline void check_regression_inputs(const DenseMatrix& train_x, const DenseMatrix& train_y,
                                    const DenseMatrix& test_x) {
    if (train_x.rows() != train_y.rows()) {
        throw DimensionMismatch("train inputs and targets disagree on point count");
    }
    if (train_x.rows() > 0 && test_x.cols() != train_x.cols()) {
        throw DimensionMismatch("train and test inputs disagree on dimension");
    }
}

}  // namespace detail

/// GP posterior predictive at test_x, one independent GP per output column of train_y.
template <typename KernelFn>
GaussianPredictive gp_posterior(KernelFn&& kernel, const DenseMatrix& train_x, const DenseMatrix& train_y,
                                double sigma2, const DenseMatrix& test_x) {
    if (!(sigma2 > 0.0)) {
        throw InvalidConfig("gp_posterior needs sigma2 > 0");
    }
    detail::check_regression_inputs(train_x, train_y, test_x);
    const DenseMatrix k_tt = kernel(test_x, test_x);
    if (train_x.rows() == 0) {
        return detail::flatten_outputs(DenseMatrix(test_x.rows(), std::max<std::size_t>(train_y.cols(), 1)), k_tt);
    }
    const DenseMatrix l = cholesky(detail::add_diagonal(kernel(train_x, train_x), sigma2));
    const DenseMatrix k_tx = kernel(test_x, train_x);
    const DenseMatrix mean = matmul(k_tx, cholesky_solve(l, train_y));
    DenseMatrix v = transpose(k_tx);
    forward_substitute(l, v);
    const DenseMatrix cov = symmetrize(k_tt - matmul(transpose(v), v));
    return detail::flatten_outputs(mean, cov);
}

/// NNGP posterior: gp_posterior with the network's NNGP kernel.
inline GaussianPredictive nngp_posterior(const NetworkConfig& config, const DenseMatrix& train_x,
                                         const DenseMatrix& train_y, double sigma2, const DenseMatrix& test_x) {
    return gp_posterior([&config](const DenseMatrix& a, const DenseMatrix& b) { return nngp_kernel(config, a, b); },
                        train_x, train_y, sigma2, test_x);
}

/// Predictive of an infinitely wide network trained to convergence by
/// gradient descent on squared loss, with prior-sampled initialisation.
///
/// With S = (Θ(X,X) + σ²I)⁻¹:
///   mean = Θ(T,X)·S·Y
///   cov  = K(T,T) + Θ(T,X)·S·(K(X,X) + σ²I)·S·Θ(X,T) − (Θ(T,X)·S·K(X,T) + transpose)
inline GaussianPredictive ntk_posterior(const NetworkConfig& config, const DenseMatrix& train_x,
                                        const DenseMatrix& train_y, double sigma2, const DenseMatrix& test_x) {
    if (!(sigma2 >= 0.0)) {
        throw InvalidConfig("ntk_posterior needs sigma2 >= 0");
    }
    detail::check_regression_inputs(train_x, train_y, test_x);
    const DenseMatrix k_tt = nngp_kernel(config, test_x, test_x);
    if (train_x.rows() == 0) {
        return detail::flatten_outputs(DenseMatrix(test_x.rows(), std::max<std::size_t>(train_y.cols(), 1)), k_tt);
    }
    const KernelPair xx = ntk_kernel(config, train_x, train_x);
    const KernelPair tx = ntk_kernel(config, test_x, train_x);

    const DenseMatrix l = cholesky(detail::add_diagonal(xx.Theta, sigma2));
    const DenseMatrix mean = matmul(tx.Theta, cholesky_solve(l, train_y));

    const DenseMatrix b = cholesky_solve(l, transpose(tx.Theta));  // S·Θ(X,T)
    const DenseMatrix k_noisy = detail::add_diagonal(xx.K, sigma2);
    const DenseMatrix quad = matmul(transpose(b), matmul(k_noisy, b));
    const DenseMatrix cross = matmul(transpose(b), transpose(tx.K));  // Θ(T,X)·S·K(X,T)
    const DenseMatrix cov = k_tt + quad - (cross + transpose(cross));
    return detail::flatten_outputs(mean, clamp_psd(cov));
}

}  // namespace widebnn
