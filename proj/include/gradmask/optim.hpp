#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

namespace gradmask {

enum class OptimizerKind { sgd_momentum, adam };

struct OptimConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;  // beta for sgd_momentum
    double weight_decay = 0.0;
    OptimizerKind optimizer = OptimizerKind::sgd_momentum;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const {
        if (!(learning_rate > 0.0)) throw std::invalid_argument("OptimConfig: learning_rate must be > 0");
        if (!(momentum >= 0.0 && momentum < 1.0))
            throw std::invalid_argument("OptimConfig: momentum must be in [0,1)");
        if (!(weight_decay >= 0.0)) throw std::invalid_argument("OptimConfig: weight_decay must be >= 0");
    }
};

struct MomentumState {
    Eigen::VectorXd velocity;       // first moment
    Eigen::VectorXd second_moment;  // adam only
    long step_count = 0;

    static MomentumState zeros(Eigen::Index n) {
        MomentumState s;
        s.velocity = Eigen::VectorXd::Zero(n);
        s.second_moment = Eigen::VectorXd::Zero(n);
        return s;
    }
};

namespace detail {
inline void check_step_args(const Eigen::VectorXd& params, const Eigen::VectorXd& update,
                            const MomentumState& state) {
    if (update.size() != params.size() || state.velocity.size() != params.size())
        throw std::invalid_argument("optimizer step: length mismatch");
    if (!update.allFinite()) throw std::domain_error("optimizer step: non-finite update");
}
}  // namespace detail

// Momentum SGD where the velocity keeps decaying through masked (zero)
// update coordinates: M' = beta*M + update + wd*theta, theta' = theta - lr*M'.
// A coordinate whose update was masked still moves by -lr*beta*M.
inline void sgd_momentum_step(Eigen::VectorXd& params, const Eigen::VectorXd& update,
                              MomentumState& state, const OptimConfig& cfg) {
    cfg.validate();
    detail::check_step_args(params, update, state);
    if (cfg.weight_decay > 0.0)
        state.velocity = cfg.momentum * state.velocity + update + cfg.weight_decay * params;
    else
        state.velocity = cfg.momentum * state.velocity + update;
    params -= cfg.learning_rate * state.velocity;
    ++state.step_count;
}

// Standard bias-corrected Adam applied to the already-masked update.
inline void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& update, MomentumState& state,
                      const OptimConfig& cfg) {
    cfg.validate();
    detail::check_step_args(params, update, state);
    const Eigen::VectorXd g =
        cfg.weight_decay > 0.0 ? (update + cfg.weight_decay * params).eval() : update;
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    state.velocity = cfg.adam_beta1 * state.velocity + (1.0 - cfg.adam_beta1) * g;
    state.second_moment =
        cfg.adam_beta2 * state.second_moment + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
    Eigen::VectorXd denom = (state.second_moment / bc2).cwiseSqrt();
    denom.array() += cfg.adam_eps;
    params -= (cfg.learning_rate / bc1) * state.velocity.cwiseQuotient(denom);
    if (!params.allFinite()) throw std::domain_error("adam_step: non-finite parameters");
}

inline void optimizer_step(Eigen::VectorXd& params, const Eigen::VectorXd& update,
                           MomentumState& state, const OptimConfig& cfg) {
    if (cfg.optimizer == OptimizerKind::sgd_momentum)
        sgd_momentum_step(params, update, state, cfg);
    else
        adam_step(params, update, state, cfg);
}

}  // namespace gradmask
