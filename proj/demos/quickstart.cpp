// Rejection-sample a small Erf network on three sine points and compare the
// posterior predictive at a few test inputs against the NNGP predictive.

#include <cmath>
#include <cstdio>

#include "widebnn/kernels.hpp"
#include "widebnn/sampler.hpp"

int main() {
    using namespace widebnn;

    NetworkConfig net;
    net.depth = 2;
    net.hidden_width = 200;

    const DenseMatrix train_x{{-2.0}, {0.0}, {2.0}};
    const DenseMatrix train_y{{std::sin(-2.0)}, {0.0}, {std::sin(2.0)}};
    const DenseMatrix test_x{{-1.0}, {0.5}, {3.0}};
    const double sigma2 = 0.1;

    SamplerOptions opts;
    opts.n_proposals = 100000;
    opts.seed = 1;
    opts.workers = 2;

    const SamplerReport r =
        rejection_sample(net, train_x, train_y, LikelihoodSpec{GaussianLikelihood{sigma2}}, test_x, opts);
    std::printf("accepted %zu of %zu proposals\n", r.accepts, r.proposals);
    if (!r.moments_valid) {
        return 1;
    }

    const GaussianPredictive gp = nngp_posterior(net, train_x, train_y, sigma2, test_x);
    std::printf("%8s %12s %12s %12s %12s\n", "x", "bnn mean", "nngp mean", "bnn var", "nngp var");
    for (std::size_t i = 0; i < test_x.rows(); ++i) {
        std::printf("%8.3f %12.5f %12.5f %12.5f %12.5f\n", test_x(i, 0), r.posterior_mean[i], gp.mean[i],
                    r.posterior_cov(i, i), gp.cov(i, i));
    }
    return 0;
}
