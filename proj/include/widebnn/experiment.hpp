#pragma once

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "widebnn/kernels.hpp"
#include "widebnn/likelihood.hpp"
#include "widebnn/linreg.hpp"
#include "widebnn/metrics.hpp"
#include "widebnn/network.hpp"
#include "widebnn/sampler.hpp"

namespace widebnn {

/// Malformed or inconsistent experiment configuration (CLI exit code 2).
class ConfigError : public Error {
  public:
    explicit ConfigError(const std::string& what) : Error("ConfigError: " + what) {}
};

enum class TargetRule { Sin, PriorDraw };

struct Range {
    double lo = -std::numbers::pi;
    double hi = std::numbers::pi;
};

struct DatasetConfig {
    std::size_t train_m = 4;
    Range train_range;
    TargetRule target_rule = TargetRule::Sin;
};

struct EvalConfig {
    std::size_t test_m = 100;
    Range test_range;
};

/// Everything a width sweep needs. The defaults are the standard experiment:
/// depth-3 Erf network, 4 sine points on [−π, π], σ² = 0.01, 100 test points.
struct ExperimentConfig {
    NetworkConfig network{.depth = 3};
    LikelihoodSpec likelihood{GaussianLikelihood{0.01}};
    DatasetConfig dataset;
    EvalConfig eval;
    std::vector<std::size_t> widths{1, 10, 100, 1000};
    std::size_t n_proposals = 200000;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::string output_path = "sweep.csv";
    ProposalPath proposal_path = ProposalPath::Preactivations;
    std::vector<std::size_t> record_params;

    void validate() const {
        if (widths.empty()) {
            throw ConfigError("widths must be nonempty");
        }
        for (std::size_t i = 0; i < widths.size(); ++i) {
            if (widths[i] == 0 || (i > 0 && widths[i] <= widths[i - 1])) {
                throw ConfigError("widths must be positive and strictly increasing");
            }
        }
        if (n_proposals == 0) {
            throw ConfigError("n_proposals must be >= 1");
        }
        try {
            network.validate();
            likelihood.validate();
        } catch (const InvalidConfig& e) {
            throw ConfigError(e.what());
        }
    }

    double sigma2() const {
        const auto* g = std::get_if<GaussianLikelihood>(&likelihood.kind);
        if (g == nullptr) {
            throw ConfigError("this experiment needs a Gaussian likelihood");
        }
        return g->sigma2;
    }
};

// --- JSON ------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) {
        throw ConfigError(where + " must be a JSON object");
    }
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& item : obj.items()) {
        if (!keys.contains(item.key())) {
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
        }
    }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) {
        return;
    }
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

inline Range read_range(const json& obj, const char* key, Range fallback, const std::string& where) {
    if (!obj.contains(key)) {
        return fallback;
    }
    const json& r = obj.at(key);
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
        throw ConfigError(where + "." + key + " must be [lo, hi]");
    }
    return {r[0].get<double>(), r[1].get<double>()};
}

template <typename Enum>
Enum parse_enum(const std::string& text, std::initializer_list<std::pair<const char*, Enum>> options,
                const std::string& where) {
    for (const auto& [name, value] : options) {
        if (text == name) {
            return value;
        }
    }
    throw ConfigError("unrecognised value '" + text + "' for " + where);
}

inline NetworkConfig parse_network(const json& j, NetworkConfig net) {
    reject_unknown_keys(j,
                        {"depth", "input_dim", "output_dim", "hidden_width", "sigma_w", "sigma_b", "nonlinearity",
                         "parametrisation"},
                        "network");
    read_field(j, "depth", net.depth, "network");
    read_field(j, "input_dim", net.input_dim, "network");
    read_field(j, "output_dim", net.output_dim, "network");
    read_field(j, "hidden_width", net.hidden_width, "network");
    read_field(j, "sigma_w", net.sigma_w, "network");
    read_field(j, "sigma_b", net.sigma_b, "network");
    std::string text;
    if (j.contains("nonlinearity")) {
        read_field(j, "nonlinearity", text, "network");
        net.nonlinearity = parse_enum<Nonlinearity>(
            text, {{"Erf", Nonlinearity::Erf}, {"ReLU", Nonlinearity::ReLU}, {"Identity", Nonlinearity::Identity}},
            "network.nonlinearity");
    }
    if (j.contains("parametrisation")) {
        read_field(j, "parametrisation", text, "network");
        net.parametrisation = parse_enum<Parametrisation>(
            text, {{"Standard", Parametrisation::Standard}, {"NTK", Parametrisation::NTK}}, "network.parametrisation");
    }
    return net;
}

inline LikelihoodSpec parse_likelihood(const json& j) {
    reject_unknown_keys(j, {"kind", "sigma2", "num_classes"}, "likelihood");
    std::string kind = "Gaussian";
    read_field(j, "kind", kind, "likelihood");
    if (kind == "Gaussian") {
        if (j.contains("num_classes")) {
            throw ConfigError("likelihood.num_classes is only valid for Categorical");
        }
        GaussianLikelihood g;
        read_field(j, "sigma2", g.sigma2, "likelihood");
        return {g};
    }
    if (kind == "Categorical") {
        if (j.contains("sigma2")) {
            throw ConfigError("likelihood.sigma2 is only valid for Gaussian");
        }
        CategoricalLikelihood c;
        read_field(j, "num_classes", c.num_classes, "likelihood");
        return {c};
    }
    throw ConfigError("unrecognised likelihood kind '" + kind + "'");
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    using detail::read_field;
    detail::reject_unknown_keys(j,
                                {"network", "likelihood", "dataset", "eval", "widths", "n_proposals", "seed",
                                 "workers", "output_path", "proposal_path", "record_params"},
                                "config");
    ExperimentConfig c;
    if (j.contains("network")) {
        c.network = detail::parse_network(j.at("network"), c.network);
    }
    if (j.contains("likelihood")) {
        c.likelihood = detail::parse_likelihood(j.at("likelihood"));
    }
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        detail::reject_unknown_keys(d, {"train_m", "train_range", "target_rule"}, "dataset");
        read_field(d, "train_m", c.dataset.train_m, "dataset");
        c.dataset.train_range = detail::read_range(d, "train_range", c.dataset.train_range, "dataset");
        if (d.contains("target_rule")) {
            std::string text;
            read_field(d, "target_rule", text, "dataset");
            c.dataset.target_rule = detail::parse_enum<TargetRule>(
                text, {{"Sin", TargetRule::Sin}, {"PriorDraw", TargetRule::PriorDraw}}, "dataset.target_rule");
        }
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        detail::reject_unknown_keys(e, {"test_m", "test_range"}, "eval");
        read_field(e, "test_m", c.eval.test_m, "eval");
        c.eval.test_range = detail::read_range(e, "test_range", c.eval.test_range, "eval");
    }
    read_field(j, "widths", c.widths, "config");
    read_field(j, "n_proposals", c.n_proposals, "config");
    read_field(j, "seed", c.seed, "config");
    read_field(j, "workers", c.workers, "config");
    read_field(j, "output_path", c.output_path, "config");
    read_field(j, "record_params", c.record_params, "config");
    if (j.contains("proposal_path")) {
        std::string text;
        read_field(j, "proposal_path", text, "config");
        c.proposal_path = detail::parse_enum<ProposalPath>(
            text, {{"Weights", ProposalPath::Weights}, {"Preactivations", ProposalPath::Preactivations}},
            "proposal_path");
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid JSON in '" + path + "': " + e.what());
    }
    return parse_experiment_config(j);
}

// --- Dataset ---------------------------------------------------------------

struct Dataset {
    DenseMatrix train_x;  // m x 1
    DenseMatrix train_y;  // m x output_dim
    DenseMatrix test_x;   // t x 1
};

/// `count` equidistant points spanning [lo, hi] inclusive; one point sits at the midpoint.
inline DenseMatrix equidistant_grid(std::size_t count, Range range) {
    if (!std::isfinite(range.lo) || !std::isfinite(range.hi) || range.hi < range.lo ||
        (range.hi == range.lo && count > 1)) {
        throw BadRange("range [" + std::to_string(range.lo) + ", " + std::to_string(range.hi) + "] for " +
                       std::to_string(count) + " points");
    }
    DenseMatrix x(count, 1);
    if (count == 0) {
        return x;
    }
    if (count == 1) {
        x(0, 0) = 0.5 * (range.lo + range.hi);
        return x;
    }
    const double step = (range.hi - range.lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) {
        x(i, 0) = range.lo + step * static_cast<double>(i);
    }
    x(count - 1, 0) = range.hi;
    return x;
}

inline Dataset build_dataset(const ExperimentConfig& config, GaussianStream& stream) {
    if (config.network.input_dim != 1) {
        throw ConfigError("grid datasets need input_dim = 1");
    }
    if (!std::holds_alternative<GaussianLikelihood>(config.likelihood.kind)) {
        throw ConfigError("grid datasets produce regression targets; use a Gaussian likelihood");
    }
    Dataset d;
    d.train_x = equidistant_grid(config.dataset.train_m, config.dataset.train_range);
    d.test_x = equidistant_grid(config.eval.test_m, config.eval.test_range);
    const std::size_t out = config.network.output_dim;
    d.train_y = DenseMatrix(d.train_x.rows(), out);
    if (config.dataset.target_rule == TargetRule::Sin) {
        for (std::size_t i = 0; i < d.train_x.rows(); ++i) {
            for (std::size_t k = 0; k < out; ++k) {
                d.train_y(i, k) = std::sin(d.train_x(i, 0));
            }
        }
    } else {
        NetworkConfig widest = config.network;
        widest.hidden_width = config.widths.back();
        const ParameterSet theta = sample_prior(widest, stream);
        d.train_y = forward(theta, widest, d.train_x);
    }
    return d;
}

// --- CSV -------------------------------------------------------------------

/// 17 significant digits: round-trips every double.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

// --- Width sweep -----------------------------------------------------------

struct SweepRow {
    std::size_t width = 0;
    std::size_t proposals = 0;
    std::size_t accepts = 0;
    std::optional<double> rf_mean_nngp;
    std::optional<double> rf_cov_nngp;
    std::optional<double> rf_mean_ntk;
    std::optional<double> rf_cov_ntk;
    double wall_seconds = 0.0;
};

inline const char* sweep_csv_header() {
    return "width,proposals,accepts,rf_mean_nngp,rf_cov_nngp,rf_mean_ntk,rf_cov_ntk,wall_seconds";
}

inline std::string sweep_csv_line(const SweepRow& r) {
    return std::to_string(r.width) + "," + std::to_string(r.proposals) + "," + std::to_string(r.accepts) + "," +
           format_optional(r.rf_mean_nngp) + "," + format_optional(r.rf_cov_nngp) + "," +
           format_optional(r.rf_mean_ntk) + "," + format_optional(r.rf_cov_ntk) + "," +
           format_double(r.wall_seconds);
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << sweep_csv_header() << '\n';
    for (const auto& r : rows) {
        out << sweep_csv_line(r) << '\n';
    }
}

inline SamplerOptions sampler_options(const ExperimentConfig& config) {
    SamplerOptions o;
    o.n_proposals = config.n_proposals;
    o.seed = config.seed;
    o.workers = config.workers;
    o.path = config.proposal_path;
    o.record_params = config.record_params;
    return o;
}

inline NetworkConfig at_width(const ExperimentConfig& config, std::size_t width) {
    NetworkConfig net = config.network;
    net.hidden_width = width;
    return net;
}

/// Stream used for dataset construction; disjoint from proposal streams.
inline GaussianStream dataset_stream(const ExperimentConfig& config) {
    return GaussianStream(config.seed, 0).substream(0x64617461ULL);
}

struct SweepResult {
    Dataset data;
    std::vector<SweepRow> rows;
    std::vector<SamplerReport> reports;
};

/// Rejection-samples the finite network at every width and compares its
/// posterior moments at the test points against the NNGP and NTK predictives.
/// Writes the CSV to config.output_path unless it is empty.
inline SweepResult width_sweep(const ExperimentConfig& config,
                               const std::function<void(const SweepRow&)>& on_row = {}) {
    config.validate();
    const double sigma2 = config.sigma2();
    GaussianStream ds = dataset_stream(config);
    SweepResult result;
    result.data = build_dataset(config, ds);
    const Dataset& d = result.data;

    for (std::size_t width : config.widths) {
        const auto start = std::chrono::steady_clock::now();
        const NetworkConfig net = at_width(config, width);
        SamplerReport report = rejection_sample(net, d.train_x, d.train_y, config.likelihood, d.test_x,
                                                sampler_options(config));
        SweepRow row;
        row.width = width;
        row.proposals = report.proposals;
        row.accepts = report.accepts;
        if (report.moments_valid) {
            const GaussianPredictive nngp = nngp_posterior(net, d.train_x, d.train_y, sigma2, d.test_x);
            const GaussianPredictive ntk = ntk_posterior(net, d.train_x, d.train_y, sigma2, d.test_x);
            row.rf_mean_nngp = rel_frobenius(report.posterior_mean, nngp.mean);
            row.rf_cov_nngp = rel_frobenius(report.posterior_cov, nngp.cov);
            row.rf_mean_ntk = rel_frobenius(report.posterior_mean, ntk.mean);
            row.rf_cov_ntk = rel_frobenius(report.posterior_cov, ntk.cov);
        }
        row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (on_row) {
            on_row(row);
        }
        result.rows.push_back(row);
        result.reports.push_back(std::move(report));
    }

    if (!config.output_path.empty()) {
        std::ofstream out(config.output_path, std::ios::binary);
        if (!out) {
            throw ConfigError("cannot write '" + config.output_path + "'");
        }
        write_sweep_csv(out, result.rows);
    }
    return result;
}

// --- Linear-regression rates -----------------------------------------------

inline std::vector<std::size_t> default_n_grid() {
    std::vector<std::size_t> grid;
    for (std::size_t n = 16; n <= 16384; n *= 2) {
        grid.push_back(n);
    }
    return grid;
}

struct RateSlopeFooter {
    double w2 = 0.0;
    double kl = 0.0;
    double n_mu_norm_sq = 0.0;
    double trace_term = 0.0;
    double w2_ntk_scaled = 0.0;
    double kl_ntk_scaled = 0.0;
};

inline RateSlopeFooter rate_footer(const RateTable& table) {
    const RateSlopes s = table.slopes();
    const std::size_t skip = table.rows.size() > 3 ? 2 : 0;
    Vector ns;
    Vector w2n;
    Vector kln;
    for (std::size_t i = skip; i < table.rows.size(); ++i) {
        ns.push_back(static_cast<double>(table.rows[i].n));
        w2n.push_back(std::sqrt(table.rows[i].w2_sq_ntk));
        kln.push_back(table.rows[i].kl_ntk);
    }
    return {s.w2, s.kl, s.n_mu_norm_sq, s.trace_term, loglog_slope(ns, w2n), loglog_slope(ns, kln)};
}

inline const char* rates_csv_header() { return "n,w2,kl,n_mu_norm_sq,trace_term,w2_ntk_scaled,kl_ntk_scaled"; }

/// One row per n, then a footer row whose first field is "slope" and whose
/// other fields are the fitted log-log slopes of the corresponding columns.
inline void write_rates_csv(std::ostream& out, const RateTable& table) {
    out << rates_csv_header() << '\n';
    for (const auto& r : table.rows) {
        out << r.n << ',' << format_double(std::sqrt(r.w2_sq)) << ',' << format_double(r.kl) << ','
            << format_double(r.n_mu_norm_sq) << ',' << format_double(r.trace_term) << ','
            << format_double(std::sqrt(r.w2_sq_ntk)) << ',' << format_double(r.kl_ntk) << '\n';
    }
    const RateSlopeFooter f = rate_footer(table);
    out << "slope," << format_double(f.w2) << ',' << format_double(f.kl) << ',' << format_double(f.n_mu_norm_sq)
        << ',' << format_double(f.trace_term) << ',' << format_double(f.w2_ntk_scaled) << ','
        << format_double(f.kl_ntk_scaled) << '\n';
}

inline RateTable linreg_rates(std::span<const std::size_t> n_grid, std::size_t m, std::uint64_t seed,
                              const std::string& output_path, std::size_t dense_max_n = 512) {
    if (m == 0) {
        throw ConfigError("m must be >= 1");
    }
    RateTable table;
    try {
        table = rate_sweep(uniform_data_rule(m, seed), n_grid, dense_max_n);
    } catch (const InvalidConfig& e) {
        throw ConfigError(e.what());
    }
    if (!output_path.empty()) {
        std::ofstream out(output_path, std::ios::binary);
        if (!out) {
            throw ConfigError("cannot write '" + output_path + "'");
        }
        write_rates_csv(out, table);
    }
    return table;
}

// --- Reports ---------------------------------------------------------------

inline nlohmann::json report_to_json(const SamplerReport& r, std::size_t width) {
    nlohmann::json j;
    j["width"] = width;
    j["proposals"] = r.proposals;
    j["accepts"] = r.accepts;
    j["accept_rate"] = r.accept_rate;
    j["moments_valid"] = r.moments_valid;
    j["posterior_mean"] = r.posterior_mean;
    nlohmann::json cov = nlohmann::json::array();
    for (std::size_t i = 0; i < r.posterior_cov.rows(); ++i) {
        const auto row = r.posterior_cov.row(i);
        cov.push_back(std::vector<double>(row.begin(), row.end()));
    }
    j["posterior_cov"] = std::move(cov);
    nlohmann::json stats = nlohmann::json::array();
    for (const auto& s : r.recorded_param_stats) {
        stats.push_back({{"index", s.index}, {"mean", s.mean}, {"variance", s.variance}});
    }
    j["recorded_param_stats"] = std::move(stats);
    return j;
}

/// Analytic NNGP and NTK predictives at the test points as CSV:
/// x,output,nngp_mean,nngp_var,ntk_mean,ntk_var.
inline void write_analytic_csv(std::ostream& out, const ExperimentConfig& config, std::size_t width) {
    config.validate();
    GaussianStream ds = dataset_stream(config);
    const Dataset d = build_dataset(config, ds);
    const NetworkConfig net = at_width(config, width);
    const double sigma2 = config.sigma2();
    const GaussianPredictive nngp = nngp_posterior(net, d.train_x, d.train_y, sigma2, d.test_x);
    const GaussianPredictive ntk = ntk_posterior(net, d.train_x, d.train_y, sigma2, d.test_x);
    const std::size_t outs = net.output_dim;
    out << "x,output,nngp_mean,nngp_var,ntk_mean,ntk_var\n";
    for (std::size_t i = 0; i < d.test_x.rows(); ++i) {
        for (std::size_t k = 0; k < outs; ++k) {
            const std::size_t idx = i * outs + k;
            out << format_double(d.test_x(i, 0)) << ',' << k << ',' << format_double(nngp.mean[idx]) << ','
                << format_double(nngp.cov(idx, idx)) << ',' << format_double(ntk.mean[idx]) << ','
                << format_double(ntk.cov(idx, idx)) << '\n';
        }
    }
}

}  // namespace widebnn
