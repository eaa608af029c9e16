#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "widebnn/numkit.hpp"

namespace widebnn {

enum class Nonlinearity { Erf, ReLU, Identity };
enum class Parametrisation { Standard, NTK };

inline std::string_view to_string(Nonlinearity n) {
    switch (n) {
        case Nonlinearity::Erf: return "Erf";
        case Nonlinearity::ReLU: return "ReLU";
        case Nonlinearity::Identity: return "Identity";
    }
    return "?";
}

inline std::string_view to_string(Parametrisation p) {
    return p == Parametrisation::Standard ? "Standard" : "NTK";
}

inline double activate(Nonlinearity n, double x) noexcept {
    switch (n) {
        case Nonlinearity::Erf: return std::erf(x);
        case Nonlinearity::ReLU: return x > 0.0 ? x : 0.0;
        case Nonlinearity::Identity: return x;
    }
    return x;
}

inline void activate_in_place(Nonlinearity n, DenseMatrix& m) noexcept {
    if (n == Nonlinearity::Identity) {
        return;
    }
    for (double& v : m.entries()) {
        v = activate(n, v);
    }
}

/// Fully connected architecture with `depth` hidden layers of equal width.
struct NetworkConfig {
    std::size_t depth = 1;
    std::size_t input_dim = 1;
    std::size_t output_dim = 1;
    std::size_t hidden_width = 1;
    double sigma_w = std::sqrt(2.0);
    double sigma_b = std::sqrt(0.1);
    Nonlinearity nonlinearity = Nonlinearity::Erf;
    Parametrisation parametrisation = Parametrisation::Standard;

    void validate() const {
        if (input_dim == 0 || output_dim == 0 || hidden_width == 0) {
            throw InvalidConfig("all layer dimensions must be >= 1");
        }
        if (!(sigma_w > 0.0) || !std::isfinite(sigma_w)) {
            throw InvalidConfig("sigma_w must be positive");
        }
        if (!(sigma_b >= 0.0) || !std::isfinite(sigma_b)) {
            throw InvalidConfig("sigma_b must be nonnegative");
        }
    }

    /// d^0, ..., d^{L+1}.
    std::vector<std::size_t> layer_dims() const {
        std::vector<std::size_t> dims;
        dims.reserve(depth + 2);
        dims.push_back(input_dim);
        for (std::size_t l = 0; l < depth; ++l) {
            dims.push_back(hidden_width);
        }
        dims.push_back(output_dim);
        return dims;
    }

    std::size_t num_layers() const noexcept { return depth + 1; }

    /// Forward-pass multiplier of stored weights feeding a layer with `fan_in` inputs.
    double weight_scale(std::size_t fan_in) const noexcept {
        return sigma_w / std::sqrt(static_cast<double>(fan_in));
    }
};

/// Weights and biases of one network draw, in the convention of the generating config.
struct ParameterSet {
    std::vector<DenseMatrix> weights;  // layer l: d^l x d^{l-1}
    std::vector<Vector> biases;        // layer l: d^l

    std::size_t size() const noexcept {
        std::size_t n = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            n += weights[l].size() + biases[l].size();
        }
        return n;
    }
};

/// Position of a scalar parameter. Flat indices follow draw order: layer by
/// layer, each layer's weights row-major followed by its biases.
struct ParameterLocation {
    std::size_t layer = 0;
    bool is_bias = false;
    std::size_t row = 0;
    std::size_t col = 0;
};

inline ParameterLocation locate_parameter(const NetworkConfig& config, std::size_t flat) {
    const auto dims = config.layer_dims();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t w = dims[l + 1] * dims[l];
        if (flat < w) {
            return {l, false, flat / dims[l], flat % dims[l]};
        }
        flat -= w;
        if (flat < dims[l + 1]) {
            return {l, true, flat, 0};
        }
        flat -= dims[l + 1];
    }
    throw DimensionMismatch("parameter index out of range");
}

inline std::size_t weight_index(const NetworkConfig& config, std::size_t layer, std::size_t row,
                                std::size_t col) {
    const auto dims = config.layer_dims();
    if (layer + 1 >= dims.size() || row >= dims[layer + 1] || col >= dims[layer]) {
        throw DimensionMismatch("weight coordinate out of range");
    }
    std::size_t flat = 0;
    for (std::size_t l = 0; l < layer; ++l) {
        flat += dims[l + 1] * dims[l] + dims[l + 1];
    }
    return flat + row * dims[layer] + col;
}

inline std::size_t bias_index(const NetworkConfig& config, std::size_t layer, std::size_t row) {
    const auto dims = config.layer_dims();
    if (layer + 1 >= dims.size() || row >= dims[layer + 1]) {
        throw DimensionMismatch("bias coordinate out of range");
    }
    std::size_t flat = 0;
    for (std::size_t l = 0; l < layer; ++l) {
        flat += dims[l + 1] * dims[l] + dims[l + 1];
    }
    return flat + dims[layer + 1] * dims[layer] + row;
}

inline double parameter_at(const ParameterSet& params, const ParameterLocation& loc) {
    return loc.is_bias ? params.biases[loc.layer][loc.row] : params.weights[loc.layer](loc.row, loc.col);
}

/// One prior draw. Standard: W^l ~ N(0, σ_w²/d^{l-1}), b^l ~ N(0, σ_b²).
/// NTK: every stored entry ~ N(0, 1), scaling applied in forward().
inline ParameterSet sample_prior(const NetworkConfig& config, GaussianStream& stream) {
    config.validate();
    const auto dims = config.layer_dims();
    const bool standard = config.parametrisation == Parametrisation::Standard;
    ParameterSet p;
    p.weights.reserve(dims.size() - 1);
    p.biases.reserve(dims.size() - 1);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        DenseMatrix w(dims[l + 1], dims[l]);
        stream.fill(w.entries());
        Vector b = gaussian_draw(stream, dims[l + 1]);
        if (standard) {
            const double s = config.weight_scale(dims[l]);
            for (double& v : w.entries()) {
                v *= s;
            }
            for (double& v : b) {
                v *= config.sigma_b;
            }
        }
        p.weights.push_back(std::move(w));
        p.biases.push_back(std::move(b));
    }
    return p;
}

inline void check_parameter_shapes(const ParameterSet& params, const NetworkConfig& config) {
    const auto dims = config.layer_dims();
    if (params.weights.size() != dims.size() - 1 || params.biases.size() != dims.size() - 1) {
        throw DimensionMismatch("parameter set has wrong number of layers");
    }
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        if (params.weights[l].rows() != dims[l + 1] || params.weights[l].cols() != dims[l] ||
            params.biases[l].size() != dims[l + 1]) {
            throw DimensionMismatch("layer " + std::to_string(l + 1) + " shape inconsistent with config");
        }
    }
}

/// Network outputs for a batch of inputs (one per row).
inline DenseMatrix forward(const ParameterSet& params, const NetworkConfig& config, const DenseMatrix& x) {
    check_parameter_shapes(params, config);
    if (x.cols() != config.input_dim) {
        throw DimensionMismatch("input has " + std::to_string(x.cols()) + " columns, network expects " +
                                std::to_string(config.input_dim));
    }
    const bool ntk = config.parametrisation == Parametrisation::NTK;
    DenseMatrix act = x;
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        DenseMatrix h = matmul_transposed(act, params.weights[l]);
        const double ws = ntk ? config.weight_scale(params.weights[l].cols()) : 1.0;
        const double bs = ntk ? config.sigma_b : 1.0;
        const Vector& b = params.biases[l];
        for (std::size_t i = 0; i < h.rows(); ++i) {
            auto r = h.row(i);
            for (std::size_t j = 0; j < r.size(); ++j) {
                r[j] = ws * r[j] + bs * b[j];
            }
        }
        if (l + 1 < params.weights.size()) {
            activate_in_place(config.nonlinearity, h);
        }
        act = std::move(h);
    }
    return act;
}

/// Maps NTK-convention parameters to Standard-convention ones computing the
/// same function.
inline ParameterSet reparametrise(const ParameterSet& params_ntk, const NetworkConfig& config) {
    check_parameter_shapes(params_ntk, config);
    ParameterSet p = params_ntk;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        const double s = config.weight_scale(p.weights[l].cols());
        for (double& v : p.weights[l].entries()) {
            v *= s;
        }
        for (double& v : p.biases[l]) {
            v *= config.sigma_b;
        }
    }
    return p;
}

/// A prior draw of the network evaluated on a fixed input batch, sampled
/// layer by layer in pre-activation space.
///
/// For a layer with fan-in larger than the batch size m, the weight part of
/// the pre-activations of each unit is N(0, A·Aᵀ) given the layer input A
/// (m x fan_in), so it is drawn with m normals per unit instead of fan_in.
/// Layers with fan-in <= m draw their weights directly. The outputs have
/// exactly the distribution of forward(sample_prior(...), X).
///
/// materialise() then draws the parameters from their conditional given the
/// pre-activations: for each unit, ε = z + Aᵀ(A·Aᵀ)⁺(u − A·z) with
/// z ~ N(0, I). Unit r of layer l uses substream (l << 32 | r) of the stream
/// the draw was created from, so any subset of rows can be rebuilt
/// consistently.
///
/// With retain = false only the outputs are kept; the stream is advanced
/// identically, so replaying a copy of the stream with retain = true
/// reproduces the same draw.
class LazyPriorDraw {
  public:
    LazyPriorDraw(const NetworkConfig& config, const DenseMatrix& x, GaussianStream& stream, bool retain = true)
        : config_(config), origin_(stream), m_(x.rows()), retain_(retain) {
        config_.validate();
        if (x.cols() != config_.input_dim) {
            throw DimensionMismatch("input has " + std::to_string(x.cols()) + " columns, network expects " +
                                    std::to_string(config_.input_dim));
        }
        const auto dims = config_.layer_dims();
        layers_.resize(dims.size() - 1);
        DenseMatrix act = x;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Layer& layer = layers_[l];
            const std::size_t fan_in = dims[l];
            const std::size_t fan_out = dims[l + 1];
            DenseMatrix units;  // m x fan_out, unit-variance weight part
            if (fan_in <= m_) {
                layer.direct = true;
                layer.unit_weights = DenseMatrix(fan_out, fan_in);
                stream.fill(layer.unit_weights.entries());
                units = matmul_transposed(act, layer.unit_weights);
            } else {
                layer.direct = false;
                units = draw_units(act, fan_out, stream, layer);
            }
            layer.unit_biases = gaussian_draw(stream, fan_out);

            const double ws = config_.weight_scale(fan_in);
            for (std::size_t i = 0; i < m_; ++i) {
                auto r = units.row(i);
                for (std::size_t j = 0; j < fan_out; ++j) {
                    r[j] = ws * r[j] + config_.sigma_b * layer.unit_biases[j];
                }
            }
            if (l + 1 < layers_.size()) {
                activate_in_place(config_.nonlinearity, units);
            }
            if (!layer.direct && retain_) {
                layer.input = std::move(act);
            }
            act = std::move(units);
        }
        outputs_ = std::move(act);
    }

    const DenseMatrix& outputs() const noexcept { return outputs_; }

    /// Full parameter set in the convention of the config.
    ParameterSet materialise() const {
        require_retained();
        const auto dims = config_.layer_dims();
        ParameterSet p;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            DenseMatrix w(dims[l + 1], dims[l]);
            for (std::size_t r = 0; r < dims[l + 1]; ++r) {
                const Vector row = unit_weight_row(l, r);
                std::copy(row.begin(), row.end(), w.row(r).begin());
            }
            Vector b = layers_[l].unit_biases;
            to_convention(l, w.entries(), b);
            p.weights.push_back(std::move(w));
            p.biases.push_back(std::move(b));
        }
        return p;
    }

    /// Single stored parameter, rebuilding only the row it lives in.
    double parameter(const ParameterLocation& loc) const {
        require_retained();
        const bool standard = config_.parametrisation == Parametrisation::Standard;
        if (loc.is_bias) {
            const double v = layers_.at(loc.layer).unit_biases.at(loc.row);
            return standard ? config_.sigma_b * v : v;
        }
        const double v = unit_weight_row(loc.layer, loc.row).at(loc.col);
        const std::size_t fan_in = config_.layer_dims()[loc.layer];
        return standard ? config_.weight_scale(fan_in) * v : v;
    }

  private:
    struct Layer {
        bool direct = true;
        DenseMatrix unit_weights;  // direct layers
        DenseMatrix input;         // m x fan_in activations
        DenseMatrix gram_pinv;     // (A·Aᵀ)⁺
        DenseMatrix units;         // m x fan_out weight part, unit scale
        Vector unit_biases;
    };

    DenseMatrix draw_units(const DenseMatrix& act, std::size_t fan_out, GaussianStream& stream,
                           Layer& layer) const {
        DenseMatrix gram = symmetrize(matmul_transposed(act, act));
        DenseMatrix factor(m_, m_);
        layer.gram_pinv = DenseMatrix(m_, m_);
        if (m_ > 0) {
            const SymmetricEigen e = sym_eigen(gram);
            const double cutoff = 1e-12 * std::max(e.values.back(), 0.0);
            for (std::size_t k = 0; k < m_; ++k) {
                const double lam = e.values[k];
                const double root = lam > cutoff ? std::sqrt(lam) : 0.0;
                for (std::size_t i = 0; i < m_; ++i) {
                    factor(i, k) = e.vectors(i, k) * root;
                }
            }
            if (retain_) {
                layer.gram_pinv =
                    eigen_reassemble(e, [cutoff](double lam) { return lam > cutoff ? 1.0 / lam : 0.0; });
            }
        }
        // Column r of eta holds the m normals of unit r.
        Eigen::MatrixXd eta(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(fan_out));
        stream.fill(std::span<double>(eta.data(), m_ * fan_out));
        DenseMatrix units(m_, fan_out);
        if (m_ > 0) {
            units.map().noalias() = factor.map() * eta;
        }
        if (retain_) {
            layer.units = units;
        }
        return units;
    }

    Vector unit_weight_row(std::size_t l, std::size_t r) const {
        const Layer& layer = layers_.at(l);
        if (layer.direct) {
            const auto row = layer.unit_weights.row(r);
            return Vector(row.begin(), row.end());
        }
        const std::size_t fan_in = layer.input.cols();
        GaussianStream sub = origin_.substream((static_cast<std::uint64_t>(l) << 32) | r);
        Vector eps = gaussian_draw(sub, fan_in);
        // resid = u_r − A·z
        Vector resid(m_);
        for (std::size_t i = 0; i < m_; ++i) {
            resid[i] = layer.units(i, r) - dot(layer.input.row(i), eps);
        }
        const Vector coef = matvec(layer.gram_pinv, resid);
        for (std::size_t i = 0; i < m_; ++i) {
            const auto ai = layer.input.row(i);
            for (std::size_t k = 0; k < fan_in; ++k) {
                eps[k] += ai[k] * coef[i];
            }
        }
        return eps;
    }

    void to_convention(std::size_t l, std::span<double> w, Vector& b) const {
        if (config_.parametrisation != Parametrisation::Standard) {
            return;
        }
        const double s = config_.weight_scale(config_.layer_dims()[l]);
        for (double& v : w) {
            v *= s;
        }
        for (double& v : b) {
            v *= config_.sigma_b;
        }
    }

    void require_retained() const {
        if (!retain_) {
            throw InvalidConfig("draw was made without retain; parameters are not available");
        }
    }

    NetworkConfig config_;
    GaussianStream origin_;
    std::size_t m_;
    bool retain_;
    std::vector<Layer> layers_;
    DenseMatrix outputs_;
};

}  // namespace widebnn
