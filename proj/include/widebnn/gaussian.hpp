#pragma once

#include "widebnn/numkit/dense_matrix.hpp"

namespace widebnn {

/// Multivariate Gaussian N(mean, cov); cov may be singular (point masses have cov = 0).
struct GaussianDist {
    Vector mean;
    DenseMatrix cov;

    std::size_t dim() const noexcept { return mean.size(); }

    void check() const {
        if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
            throw DimensionMismatch("Gaussian mean has length " + std::to_string(mean.size()) +
                                    " but covariance is " + std::to_string(cov.rows()) + "x" +
                                    std::to_string(cov.cols()));
        }
    }
};

/// Gaussian over function values at test points. For d outputs per point the
/// entries are point-major: index i·d + k is output k at test point i.
using GaussianPredictive = GaussianDist;

}  // namespace widebnn
