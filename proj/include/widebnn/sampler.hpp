#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

#include "widebnn/likelihood.hpp"
#include "widebnn/network.hpp"
#include "widebnn/numkit.hpp"

namespace widebnn {

/// Streaming count / mean / centred scatter (Welford), mergeable (Chan et al.).
class MomentAccumulator {
  public:
    MomentAccumulator() = default;
    explicit MomentAccumulator(std::size_t dim) : mean_(dim, 0.0), scatter_(dim, dim) {}

    std::size_t dim() const noexcept { return mean_.size(); }
    std::size_t count() const noexcept { return count_; }
    const Vector& mean() const noexcept { return mean_; }
    const DenseMatrix& scatter() const noexcept { return scatter_; }

    void add(std::span<const double> x) {
        if (x.size() != dim()) {
            throw DimensionMismatch("sample has length " + std::to_string(x.size()) + ", accumulator " +
                                    std::to_string(dim()));
        }
        ++count_;
        const double n = static_cast<double>(count_);
        delta_.resize(dim());
        for (std::size_t i = 0; i < dim(); ++i) {
            delta_[i] = x[i] - mean_[i];
            mean_[i] += delta_[i] / n;
        }
        rank_one_update(delta_, (n - 1.0) / n);
    }

    /// Pairwise merge; equals sequential accumulation of both sample sets.
    friend MomentAccumulator merge(const MomentAccumulator& a, const MomentAccumulator& b) {
        if (a.dim() != b.dim()) {
            throw DimensionMismatch("merging accumulators of dimension " + std::to_string(a.dim()) + " and " +
                                    std::to_string(b.dim()));
        }
        if (b.count_ == 0) {
            return a;
        }
        if (a.count_ == 0) {
            return b;
        }
        MomentAccumulator out = a;
        const double na = static_cast<double>(a.count_);
        const double nb = static_cast<double>(b.count_);
        const double n = na + nb;
        out.count_ = a.count_ + b.count_;
        Vector delta(a.dim());
        for (std::size_t i = 0; i < a.dim(); ++i) {
            delta[i] = b.mean_[i] - a.mean_[i];
            out.mean_[i] = (na * a.mean_[i] + nb * b.mean_[i]) / n;
        }
        for (std::size_t k = 0; k < out.scatter_.size(); ++k) {
            out.scatter_.entries()[k] += b.scatter_.entries()[k];
        }
        out.rank_one_update(delta, na * nb / n);
        return out;
    }

  private:
    // scatter += f·δδᵀ, written from the upper triangle so it stays exactly symmetric.
    void rank_one_update(const Vector& delta, double f) {
        const std::size_t d = dim();
        for (std::size_t i = 0; i < d; ++i) {
            const double fi = f * delta[i];
            auto row = scatter_.row(i);
            for (std::size_t j = i; j < d; ++j) {
                row[j] += fi * delta[j];
            }
        }
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                scatter_(i, j) = scatter_(j, i);
            }
        }
    }

    std::size_t count_ = 0;
    Vector mean_;
    DenseMatrix scatter_;
    Vector delta_;
};

inline MomentAccumulator accumulate(MomentAccumulator acc, std::span<const double> sample) {
    acc.add(sample);
    return acc;
}

struct Moments {
    Vector mean;
    DenseMatrix cov;  // unbiased
};

inline Moments finalize(const MomentAccumulator& acc) {
    if (acc.count() < 2) {
        throw InsufficientSamples("need at least 2 samples, have " + std::to_string(acc.count()));
    }
    return {acc.mean(), (1.0 / static_cast<double>(acc.count() - 1)) * acc.scatter()};
}

/// How a proposal's training outputs are produced. Both give exact prior draws.
enum class ProposalPath {
    Weights,         // sample_prior, then forward on the training inputs
    Preactivations,  // LazyPriorDraw; parameters rebuilt only for accepted proposals
};

struct SamplerOptions {
    std::size_t n_proposals = 1;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::size_t chunk_size = 4096;  // part of the determinism contract, not a tuning knob
    ProposalPath path = ProposalPath::Preactivations;
    std::vector<std::size_t> record_params;  // flat parameter indices, see locate_parameter
};

struct ParamStat {
    std::size_t index = 0;
    double mean = 0.0;
    double variance = 0.0;  // unbiased
};

struct SamplerReport {
    std::size_t proposals = 0;
    std::size_t accepts = 0;
    double accept_rate = 0.0;
    bool moments_valid = false;  // false when fewer than 2 accepts
    Vector posterior_mean;       // point-major over eval points x outputs
    DenseMatrix posterior_cov;
    std::vector<ParamStat> recorded_param_stats;

    bool no_accepts() const noexcept { return accepts == 0; }
};

namespace detail {

struct ChunkResult {
    std::size_t accepts = 0;
    MomentAccumulator outputs;
    MomentAccumulator params;
};

struct SamplingProblem {
    const NetworkConfig& config;
    const DenseMatrix& train_x;
    const DenseMatrix& train_y;
    const LikelihoodSpec& likelihood;
    const DenseMatrix& eval_x;
    const SamplerOptions& options;
    std::vector<ParameterLocation> locations;
};

inline void record(ChunkResult& out, const DenseMatrix& eval_outputs, const Vector& params) {
    if (out.outputs.dim() > 0) {
        out.outputs.add(eval_outputs.entries());
    }
    if (out.params.dim() > 0) {
        out.params.add(params);
    }
}

inline ChunkResult run_chunk(const SamplingProblem& p, std::size_t begin, std::size_t end) {
    const std::size_t out_dim = p.eval_x.rows() * p.config.output_dim;
    ChunkResult result{0, MomentAccumulator(out_dim), MomentAccumulator(p.locations.size())};
    Vector params(p.locations.size());
    const bool want_eval = out_dim > 0;
    for (std::size_t i = begin; i < end; ++i) {
        GaussianStream stream(p.options.seed, i);
        if (p.options.path == ProposalPath::Weights) {
            const ParameterSet theta = sample_prior(p.config, stream);
            const double logl = log_likelihood(p.likelihood, forward(theta, p.config, p.train_x), p.train_y);
            if (!(std::log(uniform_from(stream)) < logl)) {
                continue;
            }
            ++result.accepts;
            for (std::size_t k = 0; k < p.locations.size(); ++k) {
                params[k] = parameter_at(theta, p.locations[k]);
            }
            record(result, want_eval ? forward(theta, p.config, p.eval_x) : DenseMatrix{}, params);
        } else {
            GaussianStream replay = stream;
            const double logl = log_likelihood(
                p.likelihood, LazyPriorDraw(p.config, p.train_x, stream, false).outputs(), p.train_y);
            if (!(std::log(uniform_from(stream)) < logl)) {
                continue;
            }
            ++result.accepts;
            const LazyPriorDraw draw(p.config, p.train_x, replay);
            DenseMatrix eval_outputs;
            if (want_eval) {
                const ParameterSet theta = draw.materialise();
                eval_outputs = forward(theta, p.config, p.eval_x);
                for (std::size_t k = 0; k < p.locations.size(); ++k) {
                    params[k] = parameter_at(theta, p.locations[k]);
                }
            } else {
                for (std::size_t k = 0; k < p.locations.size(); ++k) {
                    params[k] = draw.parameter(p.locations[k]);
                }
            }
            record(result, eval_outputs, params);
        }
    }
    return result;
}

inline void check_sampling_inputs(const SamplingProblem& p) {
    p.config.validate();
    p.likelihood.validate();
    if (p.options.n_proposals == 0) {
        throw InvalidConfig("n_proposals must be >= 1");
    }
    if (p.options.chunk_size == 0) {
        throw InvalidConfig("chunk_size must be >= 1");
    }
    if (p.train_x.cols() != p.config.input_dim && p.train_x.rows() > 0) {
        throw DimensionMismatch("train inputs have " + std::to_string(p.train_x.cols()) + " columns");
    }
    if (p.train_y.rows() != p.train_x.rows() || (p.train_y.rows() > 0 && p.train_y.cols() != p.config.output_dim)) {
        throw DimensionMismatch("train targets must be " + std::to_string(p.train_x.rows()) + "x" +
                                std::to_string(p.config.output_dim));
    }
    if (p.eval_x.rows() > 0 && p.eval_x.cols() != p.config.input_dim) {
        throw DimensionMismatch("eval inputs have " + std::to_string(p.eval_x.cols()) + " columns");
    }
}

}  // namespace detail

/// Exact posterior samples of a finite network by rejection against the prior.
///
/// Proposal i draws its parameters from GaussianStream(seed, i), evaluates
/// the likelihood on the training set, and draws u = Φ(z) from the next value
/// of the same stream; it is accepted iff u < ℓ. Accepted proposals are
/// evaluated on eval_x and folded into the moments. Proposals are grouped in
/// fixed-size chunks whose results are merged in ascending chunk order, so the
/// report does not depend on the number of workers.
inline SamplerReport rejection_sample(const NetworkConfig& config, const DenseMatrix& train_x,
                                      const DenseMatrix& train_y, const LikelihoodSpec& likelihood,
                                      const DenseMatrix& eval_x, const SamplerOptions& options) {
    // An empty training set may arrive as a 0x0 matrix.
    const DenseMatrix train_x_shaped = train_x.rows() == 0 ? DenseMatrix(0, config.input_dim) : train_x;
    const DenseMatrix train_y_shaped = train_y.rows() == 0 ? DenseMatrix(0, config.output_dim) : train_y;
    detail::SamplingProblem p{config, train_x_shaped, train_y_shaped, likelihood, eval_x, options, {}};
    detail::check_sampling_inputs(p);
    for (std::size_t idx : options.record_params) {
        p.locations.push_back(locate_parameter(config, idx));
    }

    const std::size_t n_chunks = (options.n_proposals + options.chunk_size - 1) / options.chunk_size;
    std::vector<std::optional<detail::ChunkResult>> chunks(n_chunks);
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> failures(n_chunks);
    auto worker = [&]() {
        for (std::size_t c = next++; c < n_chunks; c = next++) {
            const std::size_t begin = c * options.chunk_size;
            const std::size_t end = std::min(begin + options.chunk_size, options.n_proposals);
            try {
                chunks[c] = detail::run_chunk(p, begin, end);
            } catch (...) {
                failures[c] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, n_chunks));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
    }

    for (const auto& f : failures) {
        if (f) {
            std::rethrow_exception(f);
        }
    }

    SamplerReport report;
    report.proposals = options.n_proposals;
    MomentAccumulator outputs(eval_x.rows() * config.output_dim);
    MomentAccumulator params(p.locations.size());
    for (auto& c : chunks) {
        report.accepts += c->accepts;
        outputs = merge(outputs, c->outputs);
        params = merge(params, c->params);
    }
    report.accept_rate = static_cast<double>(report.accepts) / static_cast<double>(report.proposals);
    report.moments_valid = report.accepts >= 2;
    if (report.moments_valid && outputs.dim() > 0) {
        Moments m = finalize(outputs);
        report.posterior_mean = std::move(m.mean);
        report.posterior_cov = std::move(m.cov);
    }
    if (report.moments_valid && params.dim() > 0) {
        const Moments pm = finalize(params);
        for (std::size_t k = 0; k < p.locations.size(); ++k) {
            report.recorded_param_stats.push_back({options.record_params[k], pm.mean[k], pm.cov(k, k)});
        }
    }
    return report;
}

}  // namespace widebnn
