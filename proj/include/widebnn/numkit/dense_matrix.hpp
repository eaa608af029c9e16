#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "widebnn/errors.hpp"

namespace widebnn {

using Vector = std::vector<double>;

/// Row-major dense matrix of doubles.
///
/// Construction from explicit entries rejects NaN/Inf; element access through
/// operator() is unchecked. Heavy kernels (products) go through an Eigen map of
/// the same storage.
class DenseMatrix {
  public:
    using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Map = Eigen::Map<EigenRowMajor>;
    using ConstMap = Eigen::Map<const EigenRowMajor>;

    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), entries_(rows * cols, fill) {
        if (!std::isfinite(fill)) {
            throw NonFiniteEntry("fill value is not finite");
        }
    }

    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
        : rows_(rows), cols_(cols), entries_(std::move(entries)) {
        if (entries_.size() != rows_ * cols_) {
            throw DimensionMismatch("entries length " + std::to_string(entries_.size()) +
                                    " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
        }
        for (double v : entries_) {
            if (!std::isfinite(v)) {
                throw NonFiniteEntry("matrix entry is NaN or Inf");
            }
        }
    }

    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        entries_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) {
                throw DimensionMismatch("ragged initializer list");
            }
            for (double v : r) {
                if (!std::isfinite(v)) {
                    throw NonFiniteEntry("matrix entry is NaN or Inf");
                }
                entries_.push_back(v);
            }
        }
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            m(i, i) = 1.0;
        }
        return m;
    }

    static DenseMatrix diagonal(std::span<const double> diag) {
        DenseMatrix m(diag.size(), diag.size());
        for (std::size_t i = 0; i < diag.size(); ++i) {
            m(i, i) = diag[i];
        }
        return m;
    }

    /// Single column from a vector.
    static DenseMatrix column(std::span<const double> v) {
        return DenseMatrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
    }

    static DenseMatrix from_eigen(const Eigen::Ref<const Eigen::MatrixXd>& m) {
        DenseMatrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
        out.map() = m;
        return out;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    bool is_square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) noexcept { return entries_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return entries_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) noexcept { return {entries_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {entries_.data() + i * cols_, cols_};
    }

    std::span<double> entries() noexcept { return entries_; }
    std::span<const double> entries() const noexcept { return entries_; }
    double* data() noexcept { return entries_.data(); }
    const double* data() const noexcept { return entries_.data(); }

    Map map() noexcept {
        return Map(entries_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
    }
    ConstMap map() const noexcept {
        return ConstMap(entries_.data(), static_cast<Eigen::Index>(rows_),
                        static_cast<Eigen::Index>(cols_));
    }

    /// Reshape in place without touching entries; used for scratch buffers.
    void resize(std::size_t rows, std::size_t cols) {
        rows_ = rows;
        cols_ = cols;
        entries_.resize(rows * cols);
    }

    bool all_finite() const noexcept {
        for (double v : entries_) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
        return true;
    }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> entries_;
};

inline void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionMismatch(std::string(what) + ": " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
    }
}

inline DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            t(j, i) = a(i, j);
        }
    }
    return t;
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionMismatch("matmul inner dimensions " + std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()));
    }
    DenseMatrix c(a.rows(), b.cols());
    if (a.cols() != 0) {
        c.map().noalias() = a.map() * b.map();
    }
    return c;
}

/// a * bᵀ without forming the transpose.
inline DenseMatrix matmul_transposed(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols()) {
        throw DimensionMismatch("matmul_transposed inner dimensions " + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.cols()));
    }
    DenseMatrix c(a.rows(), b.rows());
    if (a.cols() != 0) {
        c.map().noalias() = a.map() * b.map().transpose();
    }
    return c;
}

inline Vector matvec(const DenseMatrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) {
        throw DimensionMismatch("matvec");
    }
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto r = a.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j) {
            s += r[j] * x[j];
        }
        y[i] = s;
    }
    return y;
}

inline DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "add");
    DenseMatrix c = a;
    for (std::size_t k = 0; k < c.size(); ++k) {
        c.entries()[k] += b.entries()[k];
    }
    return c;
}

inline DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
    require_same_shape(a, b, "subtract");
    DenseMatrix c = a;
    for (std::size_t k = 0; k < c.size(); ++k) {
        c.entries()[k] -= b.entries()[k];
    }
    return c;
}

inline DenseMatrix operator*(double s, const DenseMatrix& a) {
    DenseMatrix c = a;
    for (double& v : c.entries()) {
        v *= s;
    }
    return c;
}

inline double frobenius_norm(const DenseMatrix& a) {
    double s = 0.0;
    for (double v : a.entries()) {
        s += v * v;
    }
    return std::sqrt(s);
}

inline double trace(const DenseMatrix& a) {
    if (!a.is_square()) {
        throw DimensionMismatch("trace of non-square matrix");
    }
    double t = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        t += a(i, i);
    }
    return t;
}

/// ‖A − Aᵀ‖_F / ‖A‖_F (0 for the zero matrix).
inline double relative_asymmetry(const DenseMatrix& a) {
    if (!a.is_square()) {
        throw DimensionMismatch("asymmetry of non-square matrix");
    }
    double diff = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double d = a(i, j) - a(j, i);
            diff += d * d;
            norm += a(i, j) * a(i, j);
        }
    }
    return norm == 0.0 ? 0.0 : std::sqrt(diff / norm);
}

/// (A + Aᵀ)/2.
inline DenseMatrix symmetrize(const DenseMatrix& a) {
    if (!a.is_square()) {
        throw DimensionMismatch("symmetrize non-square matrix");
    }
    DenseMatrix s = a;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = i + 1; j < a.cols(); ++j) {
            const double v = 0.5 * (a(i, j) + a(j, i));
            s(i, j) = v;
            s(j, i) = v;
        }
    }
    return s;
}

inline Vector diagonal_of(const DenseMatrix& a) {
    const std::size_t n = std::min(a.rows(), a.cols());
    Vector d(n);
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = a(i, i);
    }
    return d;
}

/// Kronecker product A ⊗ I_k.
inline DenseMatrix kron_identity(const DenseMatrix& a, std::size_t k) {
    if (k == 1) {
        return a;
    }
    DenseMatrix out(a.rows() * k, a.cols() * k);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            for (std::size_t r = 0; r < k; ++r) {
                out(i * k + r, j * k + r) = a(i, j);
            }
        }
    }
    return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionMismatch("dot");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

}  // namespace widebnn
