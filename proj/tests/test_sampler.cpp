#include <gtest/gtest.h>

#include <cmath>

#include "widebnn/linreg.hpp"
#include "widebnn/sampler.hpp"

namespace widebnn {
namespace {

TEST(MomentAccumulator, MatchesTwoPass) {
    const std::vector<Vector> xs{{1, 2}, {3, -1}, {0.5, 0.5}, {-2, 4}, {1, 1}};
    MomentAccumulator acc(2);
    for (const auto& x : xs) {
        acc = accumulate(acc, x);
    }
    Vector mean(2, 0.0);
    for (const auto& x : xs) {
        mean[0] += x[0] / 5;
        mean[1] += x[1] / 5;
    }
    DenseMatrix cov(2, 2);
    for (const auto& x : xs) {
        for (std::size_t a = 0; a < 2; ++a) {
            for (std::size_t b = 0; b < 2; ++b) {
                cov(a, b) += (x[a] - mean[a]) * (x[b] - mean[b]) / 4;
            }
        }
    }
    const Moments m = finalize(acc);
    EXPECT_EQ(acc.count(), 5u);
    EXPECT_NEAR(m.mean[0], mean[0], 1e-15);
    EXPECT_NEAR(m.mean[1], mean[1], 1e-15);
    EXPECT_LE(frobenius_norm(m.cov - cov), 1e-14);
    EXPECT_EQ(relative_asymmetry(m.cov), 0.0);
}

TEST(MomentAccumulator, MergeEqualsSequential) {
    GaussianStream s(1, 1);
    MomentAccumulator all(3);
    MomentAccumulator left(3);
    MomentAccumulator right(3);
    for (int i = 0; i < 200; ++i) {
        const Vector x = gaussian_draw(s, 3);
        all.add(x);
        (i < 70 ? left : right).add(x);
    }
    const MomentAccumulator merged = merge(left, right);
    EXPECT_EQ(merged.count(), all.count());
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_NEAR(merged.mean()[k], all.mean()[k], 1e-13);
    }
    EXPECT_LE(frobenius_norm(merged.scatter() - all.scatter()), 1e-11);
    EXPECT_EQ(merge(MomentAccumulator(3), all).count(), all.count());
    EXPECT_THROW(merge(MomentAccumulator(2), all), DimensionMismatch);
}

TEST(MomentAccumulator, FinalizeNeedsTwoSamples) {
    MomentAccumulator acc(1);
    EXPECT_THROW(finalize(acc), InsufficientSamples);
    acc.add(Vector{1.0});
    EXPECT_THROW(finalize(acc), InsufficientSamples);
    acc.add(Vector{3.0});
    EXPECT_NEAR(finalize(acc).cov(0, 0), 2.0, 1e-15);
    EXPECT_THROW(acc.add(Vector{1.0, 2.0}), DimensionMismatch);
}

NetworkConfig tiny_config() {
    NetworkConfig c;
    c.depth = 2;
    c.hidden_width = 20;
    return c;
}

struct Data {
    DenseMatrix x{{-1.0}, {0.0}, {1.0}};
    DenseMatrix y{{-0.5}, {0.1}, {0.6}};
    DenseMatrix eval{{-0.5}, {0.5}, {2.0}};
};

TEST(RejectionSample, ReportDoesNotDependOnWorkers) {
    const Data d;
    const LikelihoodSpec lik{GaussianLikelihood{0.1}};
    for (auto path : {ProposalPath::Weights, ProposalPath::Preactivations}) {
        SamplerOptions opt;
        opt.n_proposals = 3000;
        opt.seed = 12;
        opt.chunk_size = 256;
        opt.path = path;
        opt.record_params = {0, 5, 30};
        opt.workers = 1;
        const SamplerReport a = rejection_sample(tiny_config(), d.x, d.y, lik, d.eval, opt);
        opt.workers = 4;
        const SamplerReport b = rejection_sample(tiny_config(), d.x, d.y, lik, d.eval, opt);
        EXPECT_GT(a.accepts, 2u);
        EXPECT_EQ(a.accepts, b.accepts);
        EXPECT_EQ(a.posterior_mean, b.posterior_mean);
        EXPECT_EQ(a.posterior_cov, b.posterior_cov);
        ASSERT_EQ(a.recorded_param_stats.size(), 3u);
        for (std::size_t k = 0; k < 3; ++k) {
            EXPECT_EQ(a.recorded_param_stats[k].mean, b.recorded_param_stats[k].mean);
            EXPECT_EQ(a.recorded_param_stats[k].variance, b.recorded_param_stats[k].variance);
        }
    }
}

TEST(RejectionSample, EmptyTrainingSetAcceptsEverything) {
    const Data d;
    SamplerOptions opt;
    opt.n_proposals = 500;
    const SamplerReport r =
        rejection_sample(tiny_config(), DenseMatrix{}, DenseMatrix{}, LikelihoodSpec{}, d.eval, opt);
    EXPECT_EQ(r.accepts, 500u);
    EXPECT_EQ(r.accept_rate, 1.0);
    EXPECT_TRUE(r.moments_valid);
    EXPECT_EQ(r.posterior_mean.size(), 3u);
}

TEST(RejectionSample, NoAcceptsIsReportedNotThrown) {
    const Data d;
    const DenseMatrix far{{50.0}, {-50.0}, {50.0}};
    SamplerOptions opt;
    opt.n_proposals = 200;
    const SamplerReport r =
        rejection_sample(tiny_config(), d.x, far, LikelihoodSpec{GaussianLikelihood{1e-4}}, d.eval, opt);
    EXPECT_TRUE(r.no_accepts());
    EXPECT_FALSE(r.moments_valid);
    EXPECT_TRUE(r.posterior_mean.empty());
}

TEST(RejectionSample, InvalidInputsRejected) {
    const Data d;
    SamplerOptions opt;
    opt.n_proposals = 0;
    EXPECT_THROW(rejection_sample(tiny_config(), d.x, d.y, LikelihoodSpec{}, d.eval, opt), InvalidConfig);
    opt.n_proposals = 10;
    EXPECT_THROW(rejection_sample(tiny_config(), d.x, DenseMatrix{{1.0}}, LikelihoodSpec{}, d.eval, opt),
                 DimensionMismatch);
    EXPECT_THROW(rejection_sample(tiny_config(), d.x, d.y, LikelihoodSpec{}, DenseMatrix(2, 2), opt),
                 DimensionMismatch);
    EXPECT_THROW(rejection_sample(tiny_config(), d.x, d.y, LikelihoodSpec{GaussianLikelihood{-1.0}}, d.eval, opt),
                 InvalidConfig);
}

TEST(RejectionSample, AcceptanceRateMatchesPriorExpectedLikelihood) {
    // Depth-0 identity network: f(x) = w·x + b with w ~ N(0,1), b ~ N(0,1).
    // With one point x = 1, y = 0: E[exp(−f²/2σ²)] for f ~ N(0, 2) is
    // (1 + 2/σ²)^(−1/2).
    NetworkConfig c;
    c.depth = 0;
    c.sigma_w = 1.0;
    c.sigma_b = 1.0;
    const double sigma2 = 0.5;
    SamplerOptions opt;
    opt.n_proposals = 200000;
    opt.seed = 3;
    const SamplerReport r = rejection_sample(c, DenseMatrix{{1.0}}, DenseMatrix{{0.0}},
                                             LikelihoodSpec{GaussianLikelihood{sigma2}}, DenseMatrix{{1.0}}, opt);
    const double p = 1.0 / std::sqrt(1.0 + 2.0 / sigma2);
    EXPECT_NEAR(r.accept_rate, p, 4.0 * std::sqrt(p * (1 - p) / opt.n_proposals));
}

TEST(RejectionSample, LinearModelMatchesClosedForm) {
    NetworkConfig c;
    c.depth = 0;
    c.sigma_w = 1.0;
    c.sigma_b = 1.0;
    const DenseMatrix x{{-1.0}, {0.5}};
    const DenseMatrix y{{-0.3}, {0.4}};
    const DenseMatrix eval{{0.0}, {2.0}};
    const double sigma2 = 0.2;
    // Features [x, 1] with unit prior variance: alpha = n = 2.
    const DenseMatrix feat{{-1.0, 1.0}, {0.5, 1.0}};
    const DenseMatrix feat_eval{{0.0, 1.0}, {2.0, 1.0}};
    const GaussianPredictive exact = linreg_predictive(feat, y.entries(), sigma2, feat_eval, 2.0);
    for (auto path : {ProposalPath::Weights, ProposalPath::Preactivations}) {
        SamplerOptions opt;
        opt.n_proposals = 300000;
        opt.seed = 5;
        opt.path = path;
        const SamplerReport r = rejection_sample(c, x, y, LikelihoodSpec{GaussianLikelihood{sigma2}}, eval, opt);
        ASSERT_TRUE(r.moments_valid);
        const double n = static_cast<double>(r.accepts);
        for (std::size_t k = 0; k < 2; ++k) {
            const double v = exact.cov(k, k);
            EXPECT_NEAR(r.posterior_mean[k], exact.mean[k], 4.0 * std::sqrt(v / n));
            EXPECT_NEAR(r.posterior_cov(k, k), v, 4.0 * v * std::sqrt(2.0 / (n - 1)));
        }
    }
}

}  // namespace
}  // namespace widebnn
