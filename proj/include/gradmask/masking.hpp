#pragma once

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace gradmask {

// Per-parameter gradients stacked across environments: row e holds the
// gradient of environment e's loss, one column per parameter.
struct EnvGradientSet {
    Eigen::MatrixXd grads;             // d x n
    std::vector<std::string> env_ids;  // size d, row order

    Eigen::Index num_envs() const { return grads.rows(); }
    Eigen::Index num_params() const { return grads.cols(); }

    void check_finite() const {
        for (Eigen::Index e = 0; e < grads.rows(); ++e)
            for (Eigen::Index j = 0; j < grads.cols(); ++j)
                if (!std::isfinite(grads(e, j)))
                    throw std::domain_error("EnvGradientSet: non-finite gradient at env " +
                                            std::to_string(e) + ", param " + std::to_string(j));
    }
};

enum class MaskMethod { none, and_mask, sand_mask };
enum class Averaging { arithmetic, geometric };

struct MaskConfig {
    MaskMethod method = MaskMethod::none;
    double tau = 1.0;
    double eps_avg = 1e-12;
    double eps_var = 1e-12;
    Averaging averaging = Averaging::arithmetic;

    void validate() const {
        if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("MaskConfig: tau must be in [0,1]");
        if (!(eps_avg > 0.0) || !(eps_var > 0.0))
            throw std::invalid_argument("MaskConfig: eps guards must be positive");
    }
};

struct ParamMask {
    Eigen::VectorXd weights;
};

namespace detail {
inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

inline void require_envs(const EnvGradientSet& g, Eigen::Index min_envs, const char* op) {
    if (g.num_envs() < min_envs)
        throw std::invalid_argument(std::string(op) + ": needs at least " + std::to_string(min_envs) +
                                    " environments, got " + std::to_string(g.num_envs()));
}
}  // namespace detail

// Normalized sign agreement a_j = |(1/d) sum_e sign(g_ej)|, with sign(0) = 0.
// a_j = 1 exactly when every environment's entry is nonzero with one shared sign.
inline Eigen::VectorXd sign_agreement(const EnvGradientSet& g) {
    detail::require_envs(g, 2, "sign_agreement");
    g.check_finite();
    const Eigen::Index d = g.num_envs(), n = g.num_params();
    Eigen::VectorXd a(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double s = 0.0;
        for (Eigen::Index e = 0; e < d; ++e) s += detail::sign(g.grads(e, j));
        a[j] = std::abs(s) / static_cast<double>(d);
    }
    return a;
}

// Gradient-magnitude dispersion sigma^2_j = var_e(g_ej) / avg_e(g_ej)^2,
// population variance. Degenerate means: avg^2 below eps_avg yields +inf when
// the variance is real, 0 when both are negligible.
inline Eigen::VectorXd dispersion(const EnvGradientSet& g, double eps_avg = 1e-12,
                                  double eps_var = 1e-12) {
    detail::require_envs(g, 2, "dispersion");
    g.check_finite();
    const Eigen::Index d = g.num_envs(), n = g.num_params();
    Eigen::VectorXd out(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        bool all_equal = true;
        double sum = 0.0;
        for (Eigen::Index e = 0; e < d; ++e) {
            all_equal = all_equal && g.grads(e, j) == g.grads(0, j);
            sum += g.grads(e, j);
        }
        const double avg = all_equal ? g.grads(0, j) : sum / static_cast<double>(d);
        double var = 0.0;
        if (!all_equal) {
            for (Eigen::Index e = 0; e < d; ++e) {
                const double dev = g.grads(e, j) - avg;
                var += dev * dev;
            }
            var /= static_cast<double>(d);
        }
        const double avg2 = avg * avg;
        if (avg2 < eps_avg) {
            out[j] = var < eps_var ? 0.0 : std::numeric_limits<double>::infinity();
        } else {
            out[j] = var / avg2;
        }
    }
    return out;
}

// Binary agreement threshold; the comparison is inclusive (a_j == tau passes).
inline ParamMask and_mask(const Eigen::VectorXd& agreement, double tau) {
    ParamMask m;
    m.weights = (agreement.array() >= tau).cast<double>();
    return m;
}

// Smoothed mask m_j = max(0, tanh((a_j - tau) / sigma^2_j)). Limits: with
// sigma^2 = 0 the mask snaps to the indicator of a_j > tau; with
// sigma^2 = +inf it vanishes.
inline ParamMask sand_mask(const Eigen::VectorXd& agreement, const Eigen::VectorXd& sigma2,
                           double tau) {
    if (agreement.size() != sigma2.size())
        throw std::invalid_argument("sand_mask: agreement/sigma2 length mismatch");
    ParamMask m;
    m.weights.resize(agreement.size());
    for (Eigen::Index j = 0; j < agreement.size(); ++j) {
        const double a = agreement[j], s2 = sigma2[j];
        if (a <= tau) {
            m.weights[j] = 0.0;
        } else if (s2 == 0.0) {
            m.weights[j] = 1.0;
        } else if (std::isinf(s2)) {
            m.weights[j] = 0.0;
        } else {
            m.weights[j] = std::max(0.0, std::tanh((a - tau) / s2));
        }
    }
    return m;
}

inline Eigen::VectorXd arithmetic_mean_grad(const EnvGradientSet& g) {
    detail::require_envs(g, 1, "arithmetic_mean_grad");
    return g.grads.colwise().mean();
}

// Coordinatewise geometric mean. Requires a strict shared sign per coordinate;
// any zero entry or sign disagreement yields 0 there.
inline Eigen::VectorXd geometric_mean_grad(const EnvGradientSet& g) {
    detail::require_envs(g, 1, "geometric_mean_grad");
    const Eigen::Index d = g.num_envs(), n = g.num_params();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double s = detail::sign(g.grads(0, j));
        if (s == 0.0) continue;
        bool consistent = true;
        double log_acc = 0.0;
        for (Eigen::Index e = 0; e < d; ++e) {
            const double v = g.grads(e, j);
            if (detail::sign(v) != s) {
                consistent = false;
                break;
            }
            log_acc += std::log(std::abs(v));
        }
        if (consistent) out[j] = s * std::exp(log_acc / static_cast<double>(d));
    }
    return out;
}

struct MaskStats {
    Eigen::VectorXd agreement;
    Eigen::VectorXd sigma2;
};

struct MaskedUpdate {
    Eigen::VectorXd update;
    ParamMask mask;
    MaskStats stats;
};

namespace detail {

// One fused pass over each (contiguous) parameter column: finiteness check,
// sign agreement, and dispersion. Accumulation order matches the reference
// sign_agreement/dispersion implementations, so the results are identical.
inline void fused_column_stats(const EnvGradientSet& g, double eps_avg, double eps_var,
                               Eigen::VectorXd& agreement, Eigen::VectorXd& sigma2) {
    const Eigen::Index d = g.num_envs(), n = g.num_params();
    agreement.resize(n);
    sigma2.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double* col = g.grads.col(j).data();
        double sign_sum = 0.0, sum = 0.0;
        bool all_equal = true;
        for (Eigen::Index e = 0; e < d; ++e) {
            const double v = col[e];
            if (!std::isfinite(v))
                throw std::domain_error("EnvGradientSet: non-finite gradient at env " +
                                        std::to_string(e) + ", param " + std::to_string(j));
            sign_sum += sign(v);
            sum += v;
            all_equal = all_equal && v == col[0];
        }
        agreement[j] = std::abs(sign_sum) / static_cast<double>(d);
        const double avg = all_equal ? col[0] : sum / static_cast<double>(d);
        double var = 0.0;
        if (!all_equal) {
            for (Eigen::Index e = 0; e < d; ++e) {
                const double dev = col[e] - avg;
                var += dev * dev;
            }
            var /= static_cast<double>(d);
        }
        const double avg2 = avg * avg;
        if (avg2 < eps_avg)
            sigma2[j] = var < eps_var ? 0.0 : std::numeric_limits<double>::infinity();
        else
            sigma2[j] = var / avg2;
    }
}

}  // namespace detail

// Full masked-update pipeline: agreement and dispersion statistics, the mask
// chosen by cfg.method, and the mask applied to the configured mean gradient.
inline MaskedUpdate masked_update_gradient(const EnvGradientSet& g, const MaskConfig& cfg) {
    cfg.validate();
    if (cfg.method != MaskMethod::none) detail::require_envs(g, 2, "masked_update_gradient");
    MaskedUpdate r;
    if (g.num_envs() >= 2) {
        detail::fused_column_stats(g, cfg.eps_avg, cfg.eps_var, r.stats.agreement, r.stats.sigma2);
    } else {
        g.check_finite();
        r.stats.agreement = Eigen::VectorXd::Ones(g.num_params());
        r.stats.sigma2 = Eigen::VectorXd::Zero(g.num_params());
    }
    switch (cfg.method) {
        case MaskMethod::none:
            r.mask.weights = Eigen::VectorXd::Ones(g.num_params());
            break;
        case MaskMethod::and_mask:
            r.mask = and_mask(r.stats.agreement, cfg.tau);
            break;
        case MaskMethod::sand_mask:
            r.mask = sand_mask(r.stats.agreement, r.stats.sigma2, cfg.tau);
            break;
    }
    const Eigen::VectorXd mean_grad =
        cfg.averaging == Averaging::arithmetic ? arithmetic_mean_grad(g) : geometric_mean_grad(g);
    r.update = r.mask.weights.cwiseProduct(mean_grad);
    return r;
}

struct MaskCurvePoint {
    double agreement;
    double sigma2;
    double mask;
};

// Tabulates the smoothed mask over an agreement grid for each dispersion
// level; used to export the mask-shape curves.
inline std::vector<MaskCurvePoint> mask_shape_curve(double tau, const std::vector<double>& sigma2_list,
                                                    const std::vector<double>& a_grid) {
    if (a_grid.empty()) throw std::invalid_argument("mask_shape_curve: empty agreement grid");
    std::vector<MaskCurvePoint> rows;
    rows.reserve(sigma2_list.size() * a_grid.size());
    for (double s2 : sigma2_list) {
        for (double a : a_grid) {
            Eigen::VectorXd av(1), sv(1);
            av[0] = a;
            sv[0] = s2;
            rows.push_back({a, s2, sand_mask(av, sv, tau).weights[0]});
        }
    }
    return rows;
}

}  // namespace gradmask
