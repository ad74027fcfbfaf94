#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gradmask/rng.hpp"

namespace gradmask {

enum class Activation { relu, tanh };
enum class PassMode { train, eval };

struct MlpSpec {
    int input_dim = 1;
    int depth = 1;  // number of hidden layers
    int width = 1;
    int output_dim = 1;
    Activation activation = Activation::relu;
    double dropout_rate = 0.0;

    void validate() const {
        if (input_dim < 1 || depth < 1 || width < 1 || output_dim < 1)
            throw std::invalid_argument("MlpSpec: dimensions must be positive");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            throw std::invalid_argument("MlpSpec: dropout_rate must be in [0,1)");
    }
};

struct LayerShape {
    std::string id;
    int fan_in = 0;
    int fan_out = 0;
    Eigen::Index w_offset = 0;
    Eigen::Index b_offset = 0;

    Eigen::Index param_count() const {
        return static_cast<Eigen::Index>(fan_in) * fan_out + fan_out;
    }
};

inline std::vector<LayerShape> mlp_layout(const MlpSpec& spec) {
    spec.validate();
    std::vector<LayerShape> layout;
    Eigen::Index offset = 0;
    auto push = [&](const std::string& id, int fin, int fout) {
        LayerShape s{id, fin, fout, offset, offset + static_cast<Eigen::Index>(fin) * fout};
        offset += s.param_count();
        layout.push_back(std::move(s));
    };
    push("hidden0", spec.input_dim, spec.width);
    for (int l = 1; l < spec.depth; ++l) push("hidden" + std::to_string(l), spec.width, spec.width);
    push("out", spec.width, spec.output_dim);
    return layout;
}

// Flat parameter storage plus the immutable layer layout mapping flat indices
// to (weight matrix, bias) blocks.
struct ParamVector {
    Eigen::VectorXd values;
    std::vector<LayerShape> layout;

    Eigen::Index size() const { return values.size(); }

    Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const {
        const LayerShape& s = layout[layer];
        return {values.data() + s.w_offset, s.fan_in, s.fan_out};
    }
    Eigen::Map<Eigen::MatrixXd> weight(std::size_t layer) {
        const LayerShape& s = layout[layer];
        return {values.data() + s.w_offset, s.fan_in, s.fan_out};
    }
    Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const {
        const LayerShape& s = layout[layer];
        return {values.data() + s.b_offset, s.fan_out};
    }
    Eigen::Map<Eigen::VectorXd> bias(std::size_t layer) {
        const LayerShape& s = layout[layer];
        return {values.data() + s.b_offset, s.fan_out};
    }

    void validate() const {
        Eigen::Index total = 0;
        for (const auto& s : layout) total += s.param_count();
        if (total != values.size()) throw std::invalid_argument("ParamVector: layout/storage size mismatch");
        if (!values.allFinite()) throw std::domain_error("ParamVector: non-finite parameter");
    }
};

// Glorot-style uniform init in [-s, +s], s = sqrt(6/(fan_in+fan_out)), scaled
// by init_scale_multiplier for initialization sweeps. Biases start at zero.
inline ParamVector init_params(const MlpSpec& spec, Rng& rng, double init_scale_multiplier = 1.0) {
    ParamVector p;
    p.layout = mlp_layout(spec);
    Eigen::Index total = 0;
    for (const auto& s : p.layout) total += s.param_count();
    p.values = Eigen::VectorXd::Zero(total);
    for (std::size_t l = 0; l < p.layout.size(); ++l) {
        const LayerShape& s = p.layout[l];
        const double scale =
            std::sqrt(6.0 / (s.fan_in + s.fan_out)) * init_scale_multiplier;
        auto w = p.weight(l);
        for (Eigen::Index c = 0; c < w.cols(); ++c)
            for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-scale, scale);
    }
    return p;
}

// Saved intermediates of one forward pass. The referenced parameters must
// stay alive and unchanged until backward consumes the tape.
struct GradTape {
    MlpSpec spec;
    const ParamVector* params = nullptr;
    PassMode mode = PassMode::eval;
    std::vector<Eigen::MatrixXd> layer_inputs;   // input to each affine layer
    std::vector<Eigen::MatrixXd> pre_acts;       // hidden pre-activations
    std::vector<Eigen::MatrixXd> dropout_scale;  // per-hidden-layer keep/scale factors; empty if unused
    bool consumed = false;
};

struct ForwardResult {
    Eigen::MatrixXd logits;
    GradTape tape;
};

inline ForwardResult mlp_forward(const MlpSpec& spec, const ParamVector& params,
                                 const Eigen::MatrixXd& batch, PassMode mode, Rng* rng = nullptr) {
    spec.validate();
    if (params.layout.empty() || params.layout.front().fan_in != spec.input_dim ||
        params.layout.back().fan_out != spec.output_dim)
        throw std::invalid_argument("mlp_forward: params layout does not match the spec");
    if (batch.cols() != spec.input_dim)
        throw std::invalid_argument("mlp_forward: layer hidden0 expects input_dim " +
                                    std::to_string(spec.input_dim) + ", batch has " +
                                    std::to_string(batch.cols()) + " columns");
    if (!batch.allFinite()) throw std::domain_error("mlp_forward: non-finite input batch");
    const bool use_dropout = mode == PassMode::train && spec.dropout_rate > 0.0;
    if (use_dropout && rng == nullptr)
        throw std::invalid_argument("mlp_forward: train-mode dropout requires an rng");

    ForwardResult res;
    GradTape& tape = res.tape;
    tape.spec = spec;
    tape.params = &params;
    tape.mode = mode;
    tape.layer_inputs.reserve(params.layout.size());
    tape.pre_acts.reserve(spec.depth);

    Eigen::MatrixXd h = batch;
    for (int l = 0; l < spec.depth; ++l) {
        Eigen::MatrixXd z;
        z.noalias() = h * params.weight(l);  // keep the product out of lazy expressions
        z.rowwise() += params.bias(l).transpose();
        if (!z.allFinite())
            throw std::domain_error("mlp_forward: non-finite pre-activation in layer " +
                                    params.layout[l].id);
        tape.layer_inputs.push_back(std::move(h));
        tape.pre_acts.push_back(std::move(z));
        const Eigen::MatrixXd& zl = tape.pre_acts.back();
        if (spec.activation == Activation::relu)
            h = zl.cwiseMax(0.0);
        else
            h = zl.array().tanh().matrix();
        if (use_dropout) {
            const double keep = 1.0 - spec.dropout_rate;
            Eigen::MatrixXd scale(h.rows(), h.cols());
            for (Eigen::Index c = 0; c < h.cols(); ++c)
                for (Eigen::Index r = 0; r < h.rows(); ++r)
                    scale(r, c) = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
            tape.dropout_scale.push_back(scale);
            h = h.cwiseProduct(scale);
        }
    }
    const std::size_t out_layer = params.layout.size() - 1;
    res.logits.noalias() = h * params.weight(out_layer);
    res.logits.rowwise() += params.bias(out_layer).transpose();
    tape.layer_inputs.push_back(std::move(h));
    if (!res.logits.allFinite())
        throw std::domain_error("mlp_forward: non-finite logits in layer out");
    return res;
}

// Reverse pass over a tape; returns dLoss/dtheta in ParamVector layout.
// Consumes the tape.
inline Eigen::VectorXd mlp_backward(GradTape& tape, const Eigen::MatrixXd& loss_grad) {
    if (tape.consumed) throw std::logic_error("mlp_backward: tape already consumed");
    if (tape.params == nullptr) throw std::logic_error("mlp_backward: tape has no parameters");
    tape.consumed = true;
    const ParamVector& params = *tape.params;
    const MlpSpec& spec = tape.spec;
    if (loss_grad.rows() != tape.layer_inputs.front().rows() || loss_grad.cols() != spec.output_dim)
        throw std::invalid_argument("mlp_backward: loss_grad shape mismatch for layer out");

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());
    auto grad_weight = [&](std::size_t l) {
        const LayerShape& s = params.layout[l];
        return Eigen::Map<Eigen::MatrixXd>(grad.data() + s.w_offset, s.fan_in, s.fan_out);
    };
    auto grad_bias = [&](std::size_t l) {
        const LayerShape& s = params.layout[l];
        return Eigen::Map<Eigen::VectorXd>(grad.data() + s.b_offset, s.fan_out);
    };

    const std::size_t out_layer = params.layout.size() - 1;
    Eigen::MatrixXd delta = loss_grad;  // dLoss/dz for the current layer
    grad_weight(out_layer).noalias() = tape.layer_inputs[out_layer].transpose() * delta;
    grad_bias(out_layer) = delta.colwise().sum();
    Eigen::MatrixXd dh = delta * params.weight(out_layer).transpose();

    for (int l = spec.depth - 1; l >= 0; --l) {
        if (!tape.dropout_scale.empty()) dh = dh.cwiseProduct(tape.dropout_scale[l]);
        const Eigen::MatrixXd& z = tape.pre_acts[l];
        if (spec.activation == Activation::relu)
            delta = dh.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
        else
            delta = dh.cwiseProduct((1.0 - z.array().tanh().square()).matrix());
        if (!delta.allFinite())
            throw std::domain_error("mlp_backward: non-finite intermediate in layer " +
                                    params.layout[l].id);
        grad_weight(l).noalias() = tape.layer_inputs[l].transpose() * delta;
        grad_bias(l) = delta.colwise().sum();
        if (l > 0) dh = delta * params.weight(l).transpose();
    }
    return grad;
}

struct CeLoss {
    double loss;                // mean over the batch
    Eigen::MatrixXd loss_grad;  // d(mean loss)/d(logits)
};

// Softmax cross-entropy with log-sum-exp stabilization.
inline CeLoss softmax_cross_entropy(const Eigen::MatrixXd& logits, const Eigen::VectorXi& labels) {
    const Eigen::Index n = logits.rows(), c = logits.cols();
    if (labels.size() != n) throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
    CeLoss out;
    out.loss_grad.resize(n, c);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (labels[i] < 0 || labels[i] >= c)
            throw std::invalid_argument("softmax_cross_entropy: label out of range");
        const double zmax = logits.row(i).maxCoeff();
        const Eigen::ArrayXd shifted = logits.row(i).transpose().array() - zmax;
        const double sum_exp = shifted.exp().sum();
        total += std::log(sum_exp) + zmax - logits(i, labels[i]);
        out.loss_grad.row(i) = (shifted.exp() / sum_exp).matrix().transpose();
        out.loss_grad(i, labels[i]) -= 1.0;
    }
    out.loss = total / static_cast<double>(n);
    out.loss_grad /= static_cast<double>(n);
    return out;
}

inline double accuracy(const Eigen::MatrixXd& logits, const Eigen::VectorXi& labels) {
    if (logits.rows() == 0) return 0.0;
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index pred;
        logits.row(i).maxCoeff(&pred);
        if (pred == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

struct FdGradient {
    Eigen::VectorXd grad;
    bool underflow_warning = false;
};

// Central-difference oracle (L(theta+h ei) - L(theta-h ei)) / 2h, evaluated
// in eval mode. Flags a warning when differences sit at the roundoff floor.
inline FdGradient finite_difference_gradient(
    const MlpSpec& spec, const ParamVector& params, const Eigen::MatrixXd& batch,
    const std::function<double(const Eigen::MatrixXd&)>& loss_fn, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference_gradient: h must be positive");
    FdGradient out;
    out.grad.resize(params.size());
    out.underflow_warning = h < 1e-12;
    ParamVector probe = params;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        const double saved = probe.values[i];
        probe.values[i] = saved + h;
        const double lp = loss_fn(mlp_forward(spec, probe, batch, PassMode::eval).logits);
        probe.values[i] = saved - h;
        const double lm = loss_fn(mlp_forward(spec, probe, batch, PassMode::eval).logits);
        probe.values[i] = saved;
        const double diff = lp - lm;
        const double floor = std::numeric_limits<double>::epsilon() * std::max(std::abs(lp), std::abs(lm));
        if (diff != 0.0 && std::abs(diff) <= floor) out.underflow_warning = true;
        out.grad[i] = diff / (2.0 * h);
    }
    return out;
}

}  // namespace gradmask
