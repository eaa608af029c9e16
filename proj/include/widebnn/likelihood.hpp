#pragma once

#include <algorithm>
#include <cmath>
#include <variant>

#include "widebnn/numkit/dense_matrix.hpp"

namespace widebnn {

struct GaussianLikelihood {
    double sigma2 = 0.01;  // observation-noise variance
};

struct CategoricalLikelihood {
    std::size_t num_classes = 2;
};

/// Likelihood of the data given network outputs, in envelope form: its
/// supremum over outputs is exactly 1.
struct LikelihoodSpec {
    std::variant<GaussianLikelihood, CategoricalLikelihood> kind = GaussianLikelihood{};

    void validate() const {
        if (const auto* g = std::get_if<GaussianLikelihood>(&kind)) {
            if (!(g->sigma2 > 0.0) || !std::isfinite(g->sigma2)) {
                throw InvalidConfig("Gaussian likelihood needs sigma2 > 0");
            }
        } else if (std::get<CategoricalLikelihood>(kind).num_classes < 2) {
            throw InvalidConfig("Categorical likelihood needs at least 2 classes");
        }
    }
};

/// −(1/2σ²) Σᵢ ‖yᵢ − f(xᵢ)‖².
inline double gaussian_log_likelihood(const DenseMatrix& outputs, const DenseMatrix& targets, double sigma2) {
    require_same_shape(outputs, targets, "gaussian_likelihood");
    double ss = 0.0;
    const auto f = outputs.entries();
    const auto y = targets.entries();
    for (std::size_t k = 0; k < f.size(); ++k) {
        const double r = y[k] - f[k];
        ss += r * r;
    }
    return -0.5 * ss / sigma2;
}

inline double gaussian_likelihood(const DenseMatrix& outputs, const DenseMatrix& targets, double sigma2) {
    return std::exp(gaussian_log_likelihood(outputs, targets, sigma2));
}

inline std::size_t one_hot_class(std::span<const double> row) {
    std::size_t hot = row.size();
    for (std::size_t c = 0; c < row.size(); ++c) {
        if (row[c] == 1.0) {
            if (hot != row.size()) {
                throw MalformedTarget("target row has more than one hot entry");
            }
            hot = c;
        } else if (row[c] != 0.0) {
            throw MalformedTarget("target row entries must be 0 or 1");
        }
    }
    if (hot == row.size()) {
        throw MalformedTarget("target row has no hot entry");
    }
    return hot;
}

/// Σᵢ log softmax(logitsᵢ)[classᵢ], with max-subtraction.
inline double categorical_log_likelihood(const DenseMatrix& logits, const DenseMatrix& onehot_targets) {
    require_same_shape(logits, onehot_targets, "categorical_likelihood");
    double total = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto z = logits.row(i);
        const std::size_t cls = one_hot_class(onehot_targets.row(i));
        const double zmax = *std::max_element(z.begin(), z.end());
        double norm = 0.0;
        for (double v : z) {
            norm += std::exp(v - zmax);
        }
        total += (z[cls] - zmax) - std::log(norm);
    }
    return total;
}

inline double categorical_likelihood(const DenseMatrix& logits, const DenseMatrix& onehot_targets) {
    return std::exp(categorical_log_likelihood(logits, onehot_targets));
}

inline double log_likelihood(const LikelihoodSpec& spec, const DenseMatrix& outputs, const DenseMatrix& targets) {
    if (const auto* g = std::get_if<GaussianLikelihood>(&spec.kind)) {
        return gaussian_log_likelihood(outputs, targets, g->sigma2);
    }
    const auto& c = std::get<CategoricalLikelihood>(spec.kind);
    if (outputs.cols() != c.num_classes) {
        throw DimensionMismatch("logits have " + std::to_string(outputs.cols()) + " columns, expected " +
                                std::to_string(c.num_classes));
    }
    return categorical_log_likelihood(outputs, targets);
}

}  // namespace widebnn
