#include <gtest/gtest.h>

#include <cmath>

#include "widebnn/likelihood.hpp"
#include "widebnn/numkit.hpp"

namespace widebnn {
namespace {

TEST(GaussianLikelihood, PerfectFitIsOne) {
    const DenseMatrix y{{0.3}, {-1.0}, {2.0}};
    EXPECT_EQ(gaussian_likelihood(y, y, 0.01), 1.0);
    EXPECT_EQ(gaussian_log_likelihood(y, y, 0.01), 0.0);
}

TEST(GaussianLikelihood, SingleResidual) {
    const DenseMatrix f{{0.0}};
    const DenseMatrix y{{1.0}};
    EXPECT_NEAR(gaussian_likelihood(f, y, 0.5), std::exp(-1.0), 1e-15);
    EXPECT_NEAR(gaussian_log_likelihood(f, y, 0.01), -50.0, 1e-12);
}

TEST(GaussianLikelihood, SumsOverPointsAndOutputs) {
    const DenseMatrix f{{0.0, 1.0}, {2.0, 0.0}};
    const DenseMatrix y{{1.0, 1.0}, {0.0, 3.0}};
    EXPECT_NEAR(gaussian_log_likelihood(f, y, 2.0), -(1.0 + 4.0 + 9.0) / 4.0, 1e-15);
    EXPECT_THROW(gaussian_log_likelihood(f, DenseMatrix{{1.0, 1.0}}, 1.0), DimensionMismatch);
}

TEST(GaussianLikelihood, BoundedByOne) {
    GaussianStream s(3, 3);
    for (int i = 0; i < 100; ++i) {
        DenseMatrix f(4, 1);
        DenseMatrix y(4, 1);
        s.fill(f.entries());
        s.fill(y.entries());
        const double l = gaussian_likelihood(f, y, 0.1);
        EXPECT_GE(l, 0.0);
        EXPECT_LE(l, 1.0);
    }
}

TEST(CategoricalLikelihood, ByHand) {
    const DenseMatrix logits{{0.0, 0.0}};
    EXPECT_NEAR(categorical_likelihood(logits, DenseMatrix{{1.0, 0.0}}), 0.5, 1e-15);
    const DenseMatrix three{{1.0, 2.0, 3.0}};
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    EXPECT_NEAR(categorical_likelihood(three, DenseMatrix{{0, 0, 1}}), std::exp(3.0) / z, 1e-14);
}

TEST(CategoricalLikelihood, StableForHugeLogits) {
    const DenseMatrix logits{{1000.0, 0.0}};
    const double l = categorical_log_likelihood(logits, DenseMatrix{{1.0, 0.0}});
    EXPECT_TRUE(std::isfinite(l));
    EXPECT_NEAR(l, 0.0, 1e-300);
    EXPECT_NEAR(categorical_log_likelihood(logits, DenseMatrix{{0.0, 1.0}}), -1000.0, 1e-9);
}

TEST(CategoricalLikelihood, MalformedTargetsRejected) {
    const DenseMatrix logits{{0.0, 1.0}};
    EXPECT_THROW(categorical_likelihood(logits, DenseMatrix{{1.0, 1.0}}), MalformedTarget);
    EXPECT_THROW(categorical_likelihood(logits, DenseMatrix{{0.0, 0.0}}), MalformedTarget);
    EXPECT_THROW(categorical_likelihood(logits, DenseMatrix{{0.5, 0.5}}), MalformedTarget);
}

TEST(LikelihoodSpec, DispatchAndValidation) {
    const DenseMatrix f{{0.0}};
    const DenseMatrix y{{1.0}};
    EXPECT_NEAR(log_likelihood(LikelihoodSpec{GaussianLikelihood{0.5}}, f, y), -1.0, 1e-15);
    EXPECT_THROW(LikelihoodSpec{GaussianLikelihood{0.0}}.validate(), InvalidConfig);
    EXPECT_THROW(LikelihoodSpec{CategoricalLikelihood{1}}.validate(), InvalidConfig);
    const LikelihoodSpec cat{CategoricalLikelihood{3}};
    EXPECT_THROW(log_likelihood(cat, DenseMatrix{{0.0, 0.0}}, DenseMatrix{{1.0, 0.0}}), DimensionMismatch);
}

}  // namespace
}  // namespace widebnn
