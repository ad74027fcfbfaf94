#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gradmask/masking.hpp"
#include "gradmask/rng.hpp"

namespace gradmask::landscape {

struct GaussianTerm {
    double cx = 0.0;
    double cy = 0.0;
    double amplitude = 0.0;  // negative = well, positive = bump
    double width = 1.0;
};

// Analytic 2D surface L(x,y) = sum_k a_k * exp(-((x-cx)^2+(y-cy)^2)/(2 w^2)).
struct LandscapeSpec {
    std::vector<GaussianTerm> terms;

    void validate() const {
        if (terms.empty()) throw std::invalid_argument("LandscapeSpec: needs at least one term");
        for (const auto& t : terms)
            if (!(t.width > 0.0)) throw std::invalid_argument("LandscapeSpec: widths must be positive");
    }
};

struct PointEval {
    double value = 0.0;
    Eigen::Vector2d grad = Eigen::Vector2d::Zero();
};

inline PointEval eval_grad(const LandscapeSpec& spec, double x, double y) {
    spec.validate();
    if (!std::isfinite(x) || !std::isfinite(y))
        throw std::invalid_argument("eval_grad: non-finite point");
    PointEval out;
    for (const auto& t : spec.terms) {
        const double dx = x - t.cx, dy = y - t.cy;
        const double w2 = t.width * t.width;
        const double g = t.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * w2));
        out.value += g;
        out.grad[0] += -dx / w2 * g;
        out.grad[1] += -dy / w2 * g;
    }
    return out;
}

// Two-environment toy pair: a well shared at (+1,+1); at (-1,-1) environment A
// has a deep well and environment B a shallow bump, so their arithmetic
// average keeps a spurious local minimum there while the gradients disagree.
inline std::pair<LandscapeSpec, LandscapeSpec> toy_conflict_pair() {
    LandscapeSpec a, b;
    a.terms = {{-1.0, -1.0, -2.0, 0.5}, {1.0, 1.0, -0.5, 0.5}};
    b.terms = {{-1.0, -1.0, +1.0, 0.5}, {1.0, 1.0, -0.5, 0.5}};
    return {a, b};
}

struct GridParams {
    double x_min = -2.5, x_max = 2.5;
    double y_min = -2.5, y_max = 2.5;
    int nx = 101, ny = 101;

    void validate() const {
        if (nx < 2 || ny < 2) throw std::invalid_argument("GridParams: resolution must be >= 2 per axis");
        if (!(x_max > x_min) || !(y_max > y_min))
            throw std::invalid_argument("GridParams: empty range");
    }
};

// Per-cell gradients, agreement statistics, mask and masked update over a
// regular grid. Cell c = iy * nx + ix.
struct FieldGrid {
    GridParams grid;
    Eigen::Index num_envs = 0;
    std::vector<Eigen::MatrixXd> env_grad;  // per env: cells x 2
    Eigen::MatrixXd agreement;              // cells x 2
    Eigen::MatrixXd sigma2;                 // cells x 2
    Eigen::MatrixXd mask;                   // cells x 2
    Eigen::MatrixXd mean_grad;              // unmasked arithmetic mean, cells x 2
    Eigen::MatrixXd update;                 // masked update, cells x 2

    Eigen::Index cells() const { return static_cast<Eigen::Index>(grid.nx) * grid.ny; }
    double x_at(int ix) const {
        return grid.x_min + (grid.x_max - grid.x_min) * ix / static_cast<double>(grid.nx - 1);
    }
    double y_at(int iy) const {
        return grid.y_min + (grid.y_max - grid.y_min) * iy / static_cast<double>(grid.ny - 1);
    }
};

inline FieldGrid compute_field(const std::vector<LandscapeSpec>& envs, const GridParams& grid,
                               const MaskConfig& cfg) {
    if (envs.size() < 2) throw std::invalid_argument("compute_field: needs >= 2 environments");
    grid.validate();
    cfg.validate();
    FieldGrid f;
    f.grid = grid;
    f.num_envs = static_cast<Eigen::Index>(envs.size());
    const Eigen::Index cells = f.cells();
    f.env_grad.assign(envs.size(), Eigen::MatrixXd(cells, 2));
    f.agreement.resize(cells, 2);
    f.sigma2.resize(cells, 2);
    f.mask.resize(cells, 2);
    f.mean_grad.resize(cells, 2);
    f.update.resize(cells, 2);

    EnvGradientSet gs;
    gs.grads.resize(f.num_envs, 2);
    for (std::size_t e = 0; e < envs.size(); ++e) gs.env_ids.push_back("env" + std::to_string(e));

    for (int iy = 0; iy < grid.ny; ++iy) {
        for (int ix = 0; ix < grid.nx; ++ix) {
            const Eigen::Index c = static_cast<Eigen::Index>(iy) * grid.nx + ix;
            const double x = f.x_at(ix), y = f.y_at(iy);
            for (std::size_t e = 0; e < envs.size(); ++e) {
                const PointEval pe = eval_grad(envs[e], x, y);
                gs.grads.row(static_cast<Eigen::Index>(e)) = pe.grad.transpose();
                f.env_grad[e].row(c) = pe.grad.transpose();
            }
            const MaskedUpdate mu = masked_update_gradient(gs, cfg);
            f.agreement.row(c) = mu.stats.agreement.transpose();
            f.sigma2.row(c) = mu.stats.sigma2.transpose();
            f.mask.row(c) = mu.mask.weights.transpose();
            f.mean_grad.row(c) = arithmetic_mean_grad(gs).transpose();
            f.update.row(c) = mu.update.transpose();
        }
    }
    return f;
}

struct DeadZoneMap {
    std::vector<std::uint8_t> dead;  // per cell
    double dead_fraction = 0.0;
};

// A cell is dead when the masked update is exactly the zero vector while the
// unmasked average gradient is not; true stationary points are not counted.
inline DeadZoneMap dead_zone_map(const FieldGrid& field) {
    DeadZoneMap out;
    out.dead.resize(static_cast<std::size_t>(field.cells()), 0);
    Eigen::Index count = 0;
    for (Eigen::Index c = 0; c < field.cells(); ++c) {
        const bool update_zero = field.update(c, 0) == 0.0 && field.update(c, 1) == 0.0;
        const bool mean_nonzero = field.mean_grad(c, 0) != 0.0 || field.mean_grad(c, 1) != 0.0;
        if (update_zero && mean_nonzero) {
            out.dead[static_cast<std::size_t>(c)] = 1;
            ++count;
        }
    }
    out.dead_fraction = static_cast<double>(count) / static_cast<double>(field.cells());
    return out;
}

struct OrthantDeadFraction {
    double analytic = 0.0;
    double monte_carlo = 0.0;
};

// Probability that n independent sign-symmetric gradients fail unanimous sign
// agreement: (2^n - 2) / 2^n analytically, cross-checked by sampling.
inline OrthantDeadFraction orthant_dead_fraction(int n_env, long trials, Rng& rng) {
    if (n_env < 1) throw std::invalid_argument("orthant_dead_fraction: n_env must be >= 1");
    if (trials < 1) throw std::invalid_argument("orthant_dead_fraction: trials must be >= 1");
    if (n_env > 62) throw std::overflow_error("orthant_dead_fraction: n_env too large for 2^n");
    OrthantDeadFraction out;
    const double total = std::pow(2.0, n_env);
    out.analytic = (total - 2.0) / total;
    long failures = 0;
    for (long t = 0; t < trials; ++t) {
        bool any_pos = false, any_neg = false;
        for (int e = 0; e < n_env; ++e) {
            if (rng.normal() > 0.0)
                any_pos = true;
            else
                any_neg = true;
        }
        if (any_pos && any_neg) ++failures;
    }
    out.monte_carlo = static_cast<double>(failures) / static_cast<double>(trials);
    return out;
}

// Diagonal quadratic environment 0.5*(theta-opt)' diag(lambda) (theta-opt).
struct QuadraticEnvSpec {
    Eigen::VectorXd eigenvalues;
    Eigen::VectorXd optimum;

    void validate() const {
        if (eigenvalues.size() == 0) throw std::invalid_argument("QuadraticEnvSpec: empty eigenvalues");
        if (eigenvalues.size() != optimum.size())
            throw std::invalid_argument("QuadraticEnvSpec: eigenvalue/optimum dimension mismatch");
        for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
            if (!(eigenvalues[i] > 0.0))
                throw std::invalid_argument("QuadraticEnvSpec: eigenvalues must be positive");
    }
};

struct HessianMeans {
    Eigen::VectorXd geometric;
    Eigen::VectorXd arithmetic;
};

inline HessianMeans hessian_means(const std::vector<QuadraticEnvSpec>& envs) {
    if (envs.empty()) throw std::invalid_argument("hessian_means: no environments");
    const Eigen::Index n = envs.front().eigenvalues.size();
    for (const auto& e : envs) {
        e.validate();
        if (e.eigenvalues.size() != n)
            throw std::invalid_argument("hessian_means: dimension mismatch across environments");
    }
    HessianMeans out;
    out.geometric = Eigen::VectorXd::Zero(n);
    out.arithmetic = Eigen::VectorXd::Zero(n);
    for (const auto& e : envs) {
        out.geometric += e.eigenvalues.array().log().matrix();
        out.arithmetic += e.eigenvalues;
    }
    const double d = static_cast<double>(envs.size());
    out.geometric = (out.geometric / d).array().exp().matrix();
    out.arithmetic /= d;
    return out;
}

struct GradIdentityReport {
    Eigen::VectorXd via_hessian_mean;   // H^geo (theta - opt)
    Eigen::VectorXd via_gradient_mean;  // coordinatewise geometric mean of env gradients
    double max_rel_error = 0.0;
};

// Checks that the geometric Hessian mean applied to (theta - opt) equals the
// coordinatewise geometric mean of the per-environment gradients. Requires a
// shared optimum and theta differing from it in every coordinate.
inline GradIdentityReport quadratic_grad_identity_check(const std::vector<QuadraticEnvSpec>& envs,
                                                        const Eigen::VectorXd& theta) {
    if (envs.empty()) throw std::invalid_argument("quadratic_grad_identity_check: no environments");
    const Eigen::VectorXd& opt = envs.front().optimum;
    for (const auto& e : envs) {
        e.validate();
        if (e.optimum != opt)
            throw std::invalid_argument("quadratic_grad_identity_check: environments must share the optimum");
    }
    if (theta.size() != opt.size())
        throw std::invalid_argument("quadratic_grad_identity_check: theta dimension mismatch");
    for (Eigen::Index i = 0; i < theta.size(); ++i)
        if (theta[i] == opt[i])
            throw std::invalid_argument(
                "quadratic_grad_identity_check: theta must differ from the optimum in every coordinate");

    GradIdentityReport rep;
    const Eigen::VectorXd offset = theta - opt;
    rep.via_hessian_mean = hessian_means(envs).geometric.cwiseProduct(offset);

    EnvGradientSet gs;
    gs.grads.resize(static_cast<Eigen::Index>(envs.size()), theta.size());
    for (std::size_t e = 0; e < envs.size(); ++e) {
        gs.grads.row(static_cast<Eigen::Index>(e)) =
            envs[e].eigenvalues.cwiseProduct(offset).transpose();
        gs.env_ids.push_back("env" + std::to_string(e));
    }
    rep.via_gradient_mean = geometric_mean_grad(gs);

    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double denom = std::max(std::abs(rep.via_hessian_mean[i]), 1e-300);
        rep.max_rel_error = std::max(
            rep.max_rel_error, std::abs(rep.via_hessian_mean[i] - rep.via_gradient_mean[i]) / denom);
    }
    return rep;
}

}  // namespace gradmask::landscape
