#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "widebnn/numkit/dense_matrix.hpp"

namespace widebnn {

inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kJitterScale = 1e-10;
inline constexpr double kEigenClampTolerance = 1e-10;

namespace detail {

// Plain lower Cholesky; returns nullopt on the first pivot <= 0.
inline std::optional<DenseMatrix> try_cholesky(const DenseMatrix& a, double diagonal_shift) {
    const std::size_t n = a.rows();
    DenseMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto lj = l.row(j);
        double pivot = a(j, j) + diagonal_shift;
        for (std::size_t k = 0; k < j; ++k) {
            pivot -= lj[k] * lj[k];
        }
        if (!(pivot > 0.0)) {
            return std::nullopt;
        }
        const double ljj = std::sqrt(pivot);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            const auto li = l.row(i);
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) {
                s -= li[k] * lj[k];
            }
            l(i, j) = s / ljj;
        }
    }
    return l;
}

inline void require_symmetric(const DenseMatrix& a, const char* what) {
    if (!a.is_square()) {
        throw DimensionMismatch(std::string(what) + ": matrix is " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()));
    }
    const double asym = relative_asymmetry(a);
    if (asym > kSymmetryTolerance) {
        throw NotSymmetric(std::string(what) + ": relative asymmetry " + std::to_string(asym));
    }
}

}  // namespace detail

/// Lower-triangular L with L·Lᵀ = A.
///
/// A failed factorisation is retried once with 1e-10·trace(A)/dim added to the
/// diagonal before NotPositiveDefinite is raised.
inline DenseMatrix cholesky(const DenseMatrix& a) {
    detail::require_symmetric(a, "cholesky");
    if (a.rows() == 0) {
        return a;
    }
    if (auto l = detail::try_cholesky(a, 0.0)) {
        return *std::move(l);
    }
    const double jitter = kJitterScale * trace(a) / static_cast<double>(a.rows());
    if (jitter > 0.0) {
        if (auto l = detail::try_cholesky(a, jitter)) {
            return *std::move(l);
        }
    }
    throw NotPositiveDefinite("non-positive pivot in " + std::to_string(a.rows()) + "x" +
                              std::to_string(a.rows()) + " matrix");
}

/// Solves L·X = B in place for lower-triangular L.
inline void forward_substitute(const DenseMatrix& l, DenseMatrix& b) {
    const std::size_t n = l.rows();
    for (std::size_t c = 0; c < b.cols(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = b(i, c);
            const auto li = l.row(i);
            for (std::size_t k = 0; k < i; ++k) {
                s -= li[k] * b(k, c);
            }
            b(i, c) = s / li[i];
        }
    }
}

/// Solves Lᵀ·X = B in place for lower-triangular L.
inline void backward_substitute_transposed(const DenseMatrix& l, DenseMatrix& b) {
    const std::size_t n = l.rows();
    for (std::size_t c = 0; c < b.cols(); ++c) {
        for (std::size_t ii = n; ii-- > 0;) {
            double s = b(ii, c);
            for (std::size_t k = ii + 1; k < n; ++k) {
                s -= l(k, ii) * b(k, c);
            }
            b(ii, c) = s / l(ii, ii);
        }
    }
}

/// X = A⁻¹·B given the Cholesky factor of A.
inline DenseMatrix cholesky_solve(const DenseMatrix& l, const DenseMatrix& b) {
    if (b.rows() != l.rows()) {
        throw DimensionMismatch("solve: A is " + std::to_string(l.rows()) + "x" +
                                std::to_string(l.rows()) + ", B has " + std::to_string(b.rows()) +
                                " rows");
    }
    DenseMatrix x = b;
    forward_substitute(l, x);
    backward_substitute_transposed(l, x);
    return x;
}

inline DenseMatrix solve_spd(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.is_square() && b.rows() != a.rows()) {
        throw DimensionMismatch("solve_spd: A is " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + ", B has " + std::to_string(b.rows()) +
                                " rows");
    }
    return cholesky_solve(cholesky(a), b);
}

inline DenseMatrix spd_inverse(const DenseMatrix& a) {
    return solve_spd(a, DenseMatrix::identity(a.rows()));
}

/// log det A from its Cholesky factor.
inline double log_det_from_cholesky(const DenseMatrix& l) {
    double s = 0.0;
    for (std::size_t i = 0; i < l.rows(); ++i) {
        s += std::log(l(i, i));
    }
    return 2.0 * s;
}

struct SymmetricEigen {
    Vector values;        // ascending
    DenseMatrix vectors;  // column k is the eigenvector of values[k]
};

inline SymmetricEigen sym_eigen(const DenseMatrix& a) {
    detail::require_symmetric(a, "sym_eigen");
    if (a.rows() == 0) {
        return {};
    }
    const Eigen::MatrixXd dense = a.map();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
    if (solver.info() != Eigen::Success) {
        throw NotSymmetric("eigendecomposition did not converge");
    }
    SymmetricEigen out;
    out.values.assign(solver.eigenvalues().data(),
                      solver.eigenvalues().data() + solver.eigenvalues().size());
    out.vectors = DenseMatrix::from_eigen(solver.eigenvectors());
    return out;
}

/// V·diag(g(λ))·Vᵀ.
template <typename Fn>
DenseMatrix eigen_reassemble(const SymmetricEigen& e, Fn&& g) {
    const std::size_t n = e.values.size();
    DenseMatrix scaled = e.vectors;
    for (std::size_t k = 0; k < n; ++k) {
        const double gk = g(e.values[k]);
        for (std::size_t i = 0; i < n; ++i) {
            scaled(i, k) *= gk;
        }
    }
    return symmetrize(matmul_transposed(scaled, e.vectors));
}

/// Threshold below which an eigenvalue counts as a negative one rather than
/// rounding noise: 1e-10, scaled up for matrices with spectral radius above 1.
inline double negative_eigen_threshold(const Vector& values) {
    double radius = 1.0;
    for (double v : values) {
        radius = std::max(radius, std::abs(v));
    }
    return -kEigenClampTolerance * radius;
}

/// Symmetric PSD square root with eigenvalues clamped at zero.
inline DenseMatrix sym_sqrt(const DenseMatrix& a) {
    const SymmetricEigen e = sym_eigen(a);
    if (!e.values.empty() && e.values.front() < negative_eigen_threshold(e.values)) {
        throw NotPSD("smallest eigenvalue " + std::to_string(e.values.front()));
    }
    return eigen_reassemble(e, [](double v) { return std::sqrt(std::max(v, 0.0)); });
}

/// Symmetrises and clamps negative eigenvalues to zero.
inline DenseMatrix clamp_psd(const DenseMatrix& a) {
    const DenseMatrix s = symmetrize(a);
    const SymmetricEigen e = sym_eigen(s);
    if (e.values.empty() || e.values.front() >= 0.0) {
        return s;
    }
    return eigen_reassemble(e, [](double v) { return std::max(v, 0.0); });
}

}  // namespace widebnn
