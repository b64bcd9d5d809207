#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "glab/common.hpp"
#include "glab/denoiser.hpp"
#include "glab/errors.hpp"
#include "glab/rng.hpp"

namespace glab {

// Architecture of the eps-prediction MLP. The input is the concatenation
// [z | sinusoidal lambda embedding | learned class embedding]; the class
// table has one extra row for the null token.
struct NetSpec {
    int data_dim = 2;
    int num_classes = 3;
    int hidden_width = 128;
    int hidden_layers = 3;
    int lambda_emb_pairs = 8;
    double lambda_emb_period_min = 0.5;
    double lambda_emb_period_max = 64.0;
    int class_emb_dim = 8;

    int input_dim() const { return data_dim + 2 * lambda_emb_pairs + class_emb_dim; }

    void validate() const {
        if (data_dim < 1) throw ConfigError("net.data_dim must be >= 1");
        if (num_classes < 1) throw ConfigError("net.num_classes must be >= 1");
        if (hidden_width < 1) throw ConfigError("net.hidden_width must be >= 1");
        if (hidden_layers < 1) throw ConfigError("net.hidden_layers must be >= 1");
        if (lambda_emb_pairs < 1) throw ConfigError("net.lambda_emb_pairs must be >= 1");
        if (class_emb_dim < 1) throw ConfigError("net.class_emb_dim must be >= 1");
        if (!(lambda_emb_period_min > 0.0) || !(lambda_emb_period_max > lambda_emb_period_min))
            throw ConfigError("net: lambda embedding periods must satisfy 0 < min < max");
    }

    bool operator==(const NetSpec&) const = default;
};

// Geometric ladder of sin/cos features of lambda.
inline Vec lambda_embedding(double lambda, const NetSpec& spec) {
    Vec emb(2 * spec.lambda_emb_pairs);
    const int pairs = spec.lambda_emb_pairs;
    for (int k = 0; k < pairs; ++k) {
        const double frac = pairs > 1 ? static_cast<double>(k) / (pairs - 1) : 0.0;
        const double period = spec.lambda_emb_period_min *
                              std::pow(spec.lambda_emb_period_max / spec.lambda_emb_period_min,
                                       frac);
        emb[2 * k] = std::sin(lambda / period);
        emb[2 * k + 1] = std::cos(lambda / period);
    }
    return emb;
}

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }
inline double silu_grad(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

// MLP denoiser with flat parameter storage. Parameters live in one
// contiguous vector so the optimizer, finite-difference checks and the
// checkpoint format all see the same layout:
//   [W_0 | b_0 | ... | W_L | b_L | class embedding table]
// with matrices stored column-major and the table holding num_classes + 1
// rows (the last one is the null token).
class DenoiserNet {
public:
    DenoiserNet(NetSpec spec, std::uint64_t init_seed) : spec_(spec) {
        spec_.validate();
        build_layout();
        params_ = Vec::Zero(total_params_);
        Rng rng(init_seed);
        for (std::size_t l = 0; l < weight_blocks_.size(); ++l) {
            auto w = weight(l);
            const double fan_in = static_cast<double>(w.cols());
            const bool output_layer = (l + 1 == weight_blocks_.size());
            const double scale = std::sqrt((output_layer ? 1.0 : 2.0) / fan_in);
            for (int j = 0; j < w.cols(); ++j)
                for (int i = 0; i < w.rows(); ++i) w(i, j) = scale * rng.normal();
        }
        auto e = embedding();
        for (int j = 0; j < e.cols(); ++j)
            for (int i = 0; i < e.rows(); ++i) e(i, j) = 0.5 * rng.normal();
    }

    static DenoiserNet zeros(NetSpec spec) {
        DenoiserNet net(spec, 0);
        net.params_.setZero();
        return net;
    }

    const NetSpec& spec() const { return spec_; }
    int data_dim() const { return spec_.data_dim; }
    int param_count() const { return total_params_; }
    Vec& params() { return params_; }
    const Vec& params() const { return params_; }

    // Activations captured by a forward pass, consumed by backward().
    struct Workspace {
        Mat input;                    // B x input_dim
        std::vector<Mat> pre;         // pre-activations per layer
        std::vector<Mat> post;        // activations per hidden layer
        std::vector<int> emb_rows;    // embedding row used per batch element
    };

    // Batched forward pass. Rows of z are batch elements.
    Mat forward(const Mat& z, const std::vector<double>& lambdas,
                const std::vector<Conditioning>& conds, Workspace* ws = nullptr) const {
        const int batch = static_cast<int>(z.rows());
        if (z.cols() != spec_.data_dim)
            throw ShapeError("net forward: z has dim " + std::to_string(z.cols()) +
                             ", expected " + std::to_string(spec_.data_dim));
        if (static_cast<int>(lambdas.size()) != batch ||
            static_cast<int>(conds.size()) != batch)
            throw ShapeError("net forward: batch size mismatch between z, lambdas, conds");

        Workspace local;
        Workspace& w = ws ? *ws : local;
        w.input.resize(batch, spec_.input_dim());
        w.emb_rows.resize(static_cast<std::size_t>(batch));
        const auto table = embedding();
        for (int i = 0; i < batch; ++i) {
            const int row = embedding_row(conds[static_cast<std::size_t>(i)]);
            w.emb_rows[static_cast<std::size_t>(i)] = row;
            w.input.block(i, 0, 1, spec_.data_dim) = z.row(i);
            w.input.block(i, spec_.data_dim, 1, 2 * spec_.lambda_emb_pairs) =
                lambda_embedding(lambdas[static_cast<std::size_t>(i)], spec_).transpose();
            w.input.block(i, spec_.data_dim + 2 * spec_.lambda_emb_pairs, 1,
                          spec_.class_emb_dim) = table.row(row);
        }

        const std::size_t layers = weight_blocks_.size();
        w.pre.resize(layers);
        w.post.resize(layers > 0 ? layers - 1 : 0);
        const Mat* current = &w.input;
        for (std::size_t l = 0; l < layers; ++l) {
            w.pre[l].noalias() = (*current) * weight(l).transpose();
            w.pre[l].rowwise() += bias(l).transpose();
            if (l + 1 < layers) {
                w.post[l] = w.pre[l].unaryExpr([](double x) { return silu(x); });
                current = &w.post[l];
            }
        }
        return w.pre.back();
    }

    // Gradient of a scalar loss with respect to all parameters, given the
    // loss gradient with respect to the network output.
    Vec backward(const Workspace& w, const Mat& grad_out) const {
        const std::size_t layers = weight_blocks_.size();
        Vec grad = Vec::Zero(total_params_);
        Mat g = grad_out;
        for (std::size_t l = layers; l-- > 0;) {
            const Mat& below = (l == 0) ? w.input : w.post[l - 1];
            grad_weight(grad, l).noalias() = g.transpose() * below;
            grad_bias(grad, l) = g.colwise().sum().transpose();
            if (l > 0) {
                Mat g_below = g * weight(l);
                g = g_below.cwiseProduct(
                    w.pre[l - 1].unaryExpr([](double x) { return silu_grad(x); }));
            } else {
                const Mat g_input = g * weight(0);
                auto emb_grad = grad_embedding(grad);
                const int emb_off = spec_.data_dim + 2 * spec_.lambda_emb_pairs;
                for (int i = 0; i < g_input.rows(); ++i)
                    emb_grad.row(w.emb_rows[static_cast<std::size_t>(i)]) +=
                        g_input.block(i, emb_off, 1, spec_.class_emb_dim);
            }
        }
        return grad;
    }

    Vec predict_eps(const Vec& z, double lambda, const Conditioning& c) const {
        Mat zb = z.transpose();
        const Mat out = forward(zb, {lambda}, {c});
        return out.row(0).transpose();
    }

    // Parameter views. Weights are out x in.
    Eigen::Map<Mat> weight(std::size_t l) { return map_block(params_, weight_blocks_[l]); }
    Eigen::Map<const Mat> weight(std::size_t l) const {
        return map_block(params_, weight_blocks_[l]);
    }
    Eigen::Map<Vec> bias(std::size_t l) {
        return {params_.data() + bias_blocks_[l].offset, bias_blocks_[l].rows};
    }
    Eigen::Map<const Vec> bias(std::size_t l) const {
        return {params_.data() + bias_blocks_[l].offset, bias_blocks_[l].rows};
    }
    Eigen::Map<Mat> embedding() { return map_block(params_, embedding_block_); }
    Eigen::Map<const Mat> embedding() const { return map_block(params_, embedding_block_); }
    std::size_t layer_count() const { return weight_blocks_.size(); }

    int embedding_row(const Conditioning& c) const {
        if (c.is_null()) return spec_.num_classes;
        if (c.value < 0 || c.value >= spec_.num_classes)
            throw LookupError("net: class index " + std::to_string(c.value) +
                              " out of range [0, " + std::to_string(spec_.num_classes) + ")");
        return c.value;
    }

private:
    struct Block {
        int offset = 0;
        int rows = 0;
        int cols = 0;
        int size() const { return rows * cols; }
    };

    static Eigen::Map<Mat> map_block(Vec& v, const Block& b) {
        return {v.data() + b.offset, b.rows, b.cols};
    }
    static Eigen::Map<const Mat> map_block(const Vec& v, const Block& b) {
        return {v.data() + b.offset, b.rows, b.cols};
    }

    Eigen::Map<Mat> grad_weight(Vec& grad, std::size_t l) const {
        return map_block(grad, weight_blocks_[l]);
    }
    Eigen::Map<Vec> grad_bias(Vec& grad, std::size_t l) const {
        return {grad.data() + bias_blocks_[l].offset, bias_blocks_[l].rows};
    }
    Eigen::Map<Mat> grad_embedding(Vec& grad) const { return map_block(grad, embedding_block_); }

    void build_layout() {
        weight_blocks_.clear();
        bias_blocks_.clear();
        int offset = 0;
        auto push = [&](int rows, int cols) {
            weight_blocks_.push_back(Block{offset, rows, cols});
            offset += rows * cols;
            bias_blocks_.push_back(Block{offset, rows, 1});
            offset += rows;
        };
        push(spec_.hidden_width, spec_.input_dim());
        for (int l = 1; l < spec_.hidden_layers; ++l)
            push(spec_.hidden_width, spec_.hidden_width);
        push(spec_.data_dim, spec_.hidden_width);
        embedding_block_ = Block{offset, spec_.num_classes + 1, spec_.class_emb_dim};
        offset += embedding_block_.size();
        total_params_ = offset;
    }

    NetSpec spec_;
    Vec params_;
    std::vector<Block> weight_blocks_;
    std::vector<Block> bias_blocks_;
    Block embedding_block_;
    int total_params_ = 0;
};

static_assert(Denoiser<DenoiserNet>);

}  // namespace glab
