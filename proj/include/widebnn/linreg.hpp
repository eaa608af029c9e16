#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "widebnn/gaussian.hpp"
#include "widebnn/metrics.hpp"
#include "widebnn/numkit.hpp"

namespace widebnn {

/// Bayesian linear regression y | X, w ~ N(Xw, I_m), w ~ N(0, (1/n)·I_n).
struct LinRegProblem {
    DenseMatrix X;  // m x n
    Vector y;       // m

    std::size_t m() const noexcept { return X.rows(); }
    std::size_t n() const noexcept { return X.cols(); }

    void check() const {
        if (X.rows() == 0 || X.cols() == 0) {
            throw DimensionMismatch("linear regression needs m >= 1 and n >= 1");
        }
        if (y.size() != X.rows()) {
            throw DimensionMismatch("y has length " + std::to_string(y.size()) + ", X has " +
                                    std::to_string(X.rows()) + " rows");
        }
    }
};

namespace detail {

// (I_m + XXᵀ/n)
inline DenseMatrix scaled_gram_plus_identity(const DenseMatrix& x) {
    const double n = static_cast<double>(x.cols());
    DenseMatrix g = (1.0 / n) * matmul_transposed(x, x);
    for (std::size_t i = 0; i < g.rows(); ++i) {
        g(i, i) += 1.0;
    }
    return symmetrize(g);
}

}  // namespace detail

/// μ_n = (1/n)·Xᵀ(I_m + XXᵀ/n)⁻¹y.
inline Vector linreg_posterior_mean(const LinRegProblem& prob) {
    prob.check();
    const double n = static_cast<double>(prob.n());
    const DenseMatrix alpha = solve_spd(detail::scaled_gram_plus_identity(prob.X), DenseMatrix::column(prob.y));
    Vector mu(prob.n(), 0.0);
    for (std::size_t i = 0; i < prob.m(); ++i) {
        const auto xi = prob.X.row(i);
        for (std::size_t j = 0; j < prob.n(); ++j) {
            mu[j] += xi[j] * alpha(i, 0) / n;
        }
    }
    return mu;
}

/// Σ_n = (n·I_n + XᵀX)⁻¹, inverted directly.
inline DenseMatrix linreg_posterior_cov_direct(const LinRegProblem& prob) {
    prob.check();
    DenseMatrix precision = matmul(transpose(prob.X), prob.X);
    for (std::size_t j = 0; j < prob.n(); ++j) {
        precision(j, j) += static_cast<double>(prob.n());
    }
    return symmetrize(spd_inverse(symmetrize(precision)));
}

/// Σ_n = (1/n)·(I_n − (1/n)·Xᵀ(I_m + XXᵀ/n)⁻¹X), the Woodbury form.
inline DenseMatrix linreg_posterior_cov_woodbury(const LinRegProblem& prob) {
    prob.check();
    const double n = static_cast<double>(prob.n());
    const DenseMatrix inner = solve_spd(detail::scaled_gram_plus_identity(prob.X), prob.X);  // m x n
    DenseMatrix cov = (-1.0 / (n * n)) * matmul(transpose(prob.X), inner);
    for (std::size_t j = 0; j < prob.n(); ++j) {
        cov(j, j) += 1.0 / n;
    }
    return symmetrize(cov);
}

inline GaussianDist linreg_posterior(const LinRegProblem& prob) {
    return {linreg_posterior_mean(prob), linreg_posterior_cov_direct(prob)};
}

inline GaussianDist isotropic_prior(std::size_t n) {
    return {Vector(n, 0.0), (1.0 / static_cast<double>(n)) * DenseMatrix::identity(n)};
}

/// N(√n·μ, n·Σ): the same posterior expressed in NTK-parametrised weights.
inline GaussianDist ntk_rescale(const GaussianDist& p, std::size_t n) {
    p.check();
    if (p.dim() != n) {
        throw DimensionMismatch("ntk_rescale: distribution has dimension " + std::to_string(p.dim()) +
                                ", expected " + std::to_string(n));
    }
    const double root = std::sqrt(static_cast<double>(n));
    GaussianDist out{p.mean, static_cast<double>(n) * p.cov};
    for (double& v : out.mean) {
        v *= root;
    }
    return out;
}

/// Predictive over f(x) = xᵀw at test_x for prior w ~ N(0, (α/n)·I) and
/// y | w ~ N(Xw, σ²·I). An empty X gives the prior predictive.
inline GaussianPredictive linreg_predictive(const DenseMatrix& x, std::span<const double> y, double sigma2,
                                            const DenseMatrix& test_x, double alpha = 1.0) {
    if (!(sigma2 > 0.0) || !(alpha > 0.0)) {
        throw InvalidConfig("linreg_predictive needs sigma2 > 0 and alpha > 0");
    }
    if (x.rows() != y.size()) {
        throw DimensionMismatch("linreg_predictive: X rows and y length differ");
    }
    const std::size_t n = test_x.cols();
    if (x.rows() > 0 && x.cols() != n) {
        throw DimensionMismatch("linreg_predictive: train and test feature counts differ");
    }
    DenseMatrix precision = (1.0 / sigma2) * (x.rows() > 0 ? matmul(transpose(x), x) : DenseMatrix(n, n));
    for (std::size_t j = 0; j < n; ++j) {
        precision(j, j) += static_cast<double>(n) / alpha;
    }
    const DenseMatrix l = cholesky(symmetrize(precision));
    const DenseMatrix cov_w = symmetrize(cholesky_solve(l, DenseMatrix::identity(n)));
    Vector xty(n, 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            xty[j] += x(i, j) * y[i] / sigma2;
        }
    }
    const Vector mu_w = matvec(cov_w, xty);
    GaussianPredictive out;
    out.mean = matvec(test_x, mu_w);
    out.cov = symmetrize(matmul(test_x, matmul_transposed(cov_w, test_x)));
    return out;
}

inline GaussianPredictive linreg_predictive(const LinRegProblem& prob, double sigma2, const DenseMatrix& test_x,
                                            double alpha = 1.0) {
    prob.check();
    return linreg_predictive(prob.X, prob.y, sigma2, test_x, alpha);
}

/// Eigen-structure of Σ_n obtained from the m x m Gram matrix XXᵀ.
///
/// Σ_n has eigenvalue 1/(n + λ_j) for each nonzero-spectrum eigenvalue λ_j of
/// XXᵀ (at most min(m, n) of them) and 1/n with the remaining multiplicity.
struct PosteriorSpectrum {
    std::size_t n = 0;
    Vector gram_eigenvalues;  // eigenvalues of XXᵀ, ascending, clamped at 0
    Vector cov_eigenvalues;   // all n eigenvalues of Σ_n
    Vector mean;              // μ_n

    static PosteriorSpectrum from(const LinRegProblem& prob) {
        prob.check();
        PosteriorSpectrum s;
        s.n = prob.n();
        s.gram_eigenvalues = sym_eigen(symmetrize(matmul_transposed(prob.X, prob.X))).values;
        for (double& v : s.gram_eigenvalues) {
            v = std::max(v, 0.0);
        }
        const double n = static_cast<double>(s.n);
        s.cov_eigenvalues.assign(s.n, 1.0 / n);
        const std::size_t k = std::min(prob.m(), prob.n());
        for (std::size_t j = 0; j < k; ++j) {
            const double lam = s.gram_eigenvalues[s.gram_eigenvalues.size() - 1 - j];
            s.cov_eigenvalues[j] = 1.0 / (n + lam);
        }
        s.mean = linreg_posterior_mean(prob);
        return s;
    }

    double lambda_min_k() const { return gram_eigenvalues.front() / static_cast<double>(n); }
    double lambda_max_k() const { return gram_eigenvalues.back() / static_cast<double>(n); }
};

/// Tr(I/n + Σ_n − (2/√n)·Σ_n^{1/2}) = Σᵢ (√σᵢ − 1/√n)².
inline double trace_term(const PosteriorSpectrum& s) {
    const double rn = 1.0 / std::sqrt(static_cast<double>(s.n));
    double t = 0.0;
    for (double sigma : s.cov_eigenvalues) {
        const double d = std::sqrt(sigma) - rn;
        t += d * d;
    }
    return t;
}

/// (m/n)·(1 − (1 + λ(K_n))^{−1/2})² evaluated at a chosen eigenvalue of K_n = XXᵀ/n.
inline double trace_term_bound(std::size_t m, std::size_t n, double lambda_k) {
    const double g = 1.0 - 1.0 / std::sqrt(1.0 + lambda_k);
    return static_cast<double>(m) / static_cast<double>(n) * g * g;
}

/// 2·KL(posterior ‖ prior) written as n‖μ‖² − n + n·Tr(Σ) − n·ln n − ln|Σ|.
inline double kl_expansion(const PosteriorSpectrum& s) {
    const double n = static_cast<double>(s.n);
    double tr = 0.0;
    double logdet = 0.0;
    for (double sigma : s.cov_eigenvalues) {
        tr += sigma;
        logdet += std::log(sigma);
    }
    return 0.5 * (n * squared_norm(s.mean) - n + n * tr - n * std::log(n) - logdet);
}

/// Generates the regression problem with n features.
using DataRule = std::function<LinRegProblem(std::size_t n)>;

/// X entries i.i.d. uniform on [−1, 1], y i.i.d. N(0, 1) and shared across n.
/// Feature column j comes from its own substream, so the design for n is the
/// leading n columns of the design for any larger n.
inline DataRule uniform_data_rule(std::size_t m, std::uint64_t seed) {
    return [m, seed](std::size_t n) {
        LinRegProblem prob;
        prob.X = DenseMatrix(m, n);
        const GaussianStream root(seed, 0);
        for (std::size_t j = 0; j < n; ++j) {
            GaussianStream col = root.substream(j + 1);
            for (std::size_t i = 0; i < m; ++i) {
                prob.X(i, j) = 2.0 * uniform_from(col) - 1.0;
            }
        }
        GaussianStream targets = root.substream(0);
        prob.y = gaussian_draw(targets, m);
        return prob;
    };
}

struct RateRow {
    std::size_t n = 0;
    double w2_sq = 0.0;               // spectral evaluation
    double kl = 0.0;
    double kl_expanded = 0.0;         // n‖μ‖² − n + n·TrΣ − n ln n − ln|Σ|, halved
    double n_mu_norm_sq = 0.0;
    double trace_term = 0.0;
    double trace_bound_min = 0.0;     // bound evaluated at λ_min(K_n)
    double trace_bound_max = 0.0;     // same expression at λ_max(K_n)
    double w2_sq_ntk = 0.0;
    double kl_ntk = 0.0;
    std::optional<double> w2_sq_bures;  // dense Bures formula, small n only
    std::optional<double> kl_dense;     // dense kl_gaussian, small n only
};

struct RateSlopes {
    double w2 = 0.0;
    double kl = 0.0;
    double n_mu_norm_sq = 0.0;
    double trace_term = 0.0;
};

/// Ordinary least-squares slope of log(value) against log(n).
inline double loglog_slope(std::span<const double> ns, std::span<const double> values) {
    if (ns.size() != values.size() || ns.size() < 2) {
        throw DimensionMismatch("slope fit needs at least two matching points");
    }
    double mx = 0.0;
    double my = 0.0;
    const double k = static_cast<double>(ns.size());
    for (std::size_t i = 0; i < ns.size(); ++i) {
        mx += std::log(ns[i]);
        my += std::log(values[i]);
    }
    mx /= k;
    my /= k;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        const double dx = std::log(ns[i]) - mx;
        sxy += dx * (std::log(values[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

struct RateTable {
    std::vector<RateRow> rows;

    /// Slopes over all rows but the two smallest n.
    RateSlopes slopes() const {
        const std::size_t skip = rows.size() > 3 ? 2 : 0;
        Vector ns;
        Vector w2;
        Vector kl;
        Vector nmu;
        Vector tr;
        for (std::size_t i = skip; i < rows.size(); ++i) {
            ns.push_back(static_cast<double>(rows[i].n));
            w2.push_back(std::sqrt(rows[i].w2_sq));
            kl.push_back(rows[i].kl);
            nmu.push_back(rows[i].n_mu_norm_sq);
            tr.push_back(rows[i].trace_term);
        }
        return {loglog_slope(ns, w2), loglog_slope(ns, kl), loglog_slope(ns, nmu), loglog_slope(ns, tr)};
    }
};

inline RateRow rate_row(const LinRegProblem& prob, std::size_t dense_max_n) {
    const PosteriorSpectrum s = PosteriorSpectrum::from(prob);
    const double n = static_cast<double>(s.n);
    RateRow row;
    row.n = s.n;
    row.w2_sq = w2_to_isotropic(s.mean, s.cov_eigenvalues, 1.0 / n);
    row.kl = kl_to_isotropic(s.mean, s.cov_eigenvalues, 1.0 / n);
    row.kl_expanded = kl_expansion(s);
    row.n_mu_norm_sq = n * squared_norm(s.mean);
    row.trace_term = trace_term(s);
    row.trace_bound_min = trace_term_bound(prob.m(), s.n, s.lambda_min_k());
    row.trace_bound_max = trace_term_bound(prob.m(), s.n, s.lambda_max_k());

    Vector scaled_mean = s.mean;
    for (double& v : scaled_mean) {
        v *= std::sqrt(n);
    }
    Vector scaled_eigs = s.cov_eigenvalues;
    for (double& v : scaled_eigs) {
        v *= n;
    }
    row.w2_sq_ntk = w2_to_isotropic(scaled_mean, scaled_eigs, 1.0);
    row.kl_ntk = kl_to_isotropic(scaled_mean, scaled_eigs, 1.0);

    if (s.n <= dense_max_n) {
        const GaussianDist post = linreg_posterior(prob);
        const GaussianDist prior = isotropic_prior(s.n);
        row.w2_sq_bures = w2_gaussian(post, prior);
        row.kl_dense = kl_gaussian(post, prior);
    }
    return row;
}

/// Prior-to-posterior discrepancies across feature counts.
///
/// Every row uses the spectral route; rows with n <= dense_max_n are also
/// evaluated with the dense Bures and KL formulas.
inline RateTable rate_sweep(const DataRule& rule, std::span<const std::size_t> n_grid,
                            std::size_t dense_max_n = 512) {
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        if (n_grid[i] == 0 || (i > 0 && n_grid[i] <= n_grid[i - 1])) {
            throw InvalidConfig("n grid must be positive and strictly increasing");
        }
    }
    RateTable table;
    for (std::size_t n : n_grid) {
        const LinRegProblem prob = rule(n);
        if (prob.n() != n) {
            throw DimensionMismatch("data rule returned the wrong feature count");
        }
        if (prob.m() > n) {
            throw InvalidConfig("rate sweep needs n >= m");
        }
        table.rows.push_back(rate_row(prob, dense_max_n));
    }
    return table;
}

}  // namespace widebnn
