#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gradmask/rng.hpp"

namespace gradmask {

struct Env {
    std::string id;
    Eigen::MatrixXd x;  // samples x feature_dim
    Eigen::VectorXi y;
};

struct EnvDataset {
    std::vector<Env> envs;
    int feature_dim = 0;
    int num_classes = 2;
    nlohmann::json provenance;

    std::size_t env_index(const std::string& id) const {
        for (std::size_t i = 0; i < envs.size(); ++i)
            if (envs[i].id == id) return i;
        throw std::invalid_argument("EnvDataset: unknown environment id '" + id + "'");
    }
    const Env& env(const std::string& id) const { return envs[env_index(id)]; }

    void validate() const {
        for (const auto& e : envs) {
            if (e.x.cols() != feature_dim)
                throw std::invalid_argument("EnvDataset: feature dim mismatch in env " + e.id);
            if (e.x.rows() != e.y.size())
                throw std::invalid_argument("EnvDataset: sample/label count mismatch in env " + e.id);
            if (!e.x.allFinite()) throw std::domain_error("EnvDataset: non-finite feature in env " + e.id);
            std::vector<int> seen(static_cast<std::size_t>(num_classes), 0);
            for (Eigen::Index i = 0; i < e.y.size(); ++i) {
                if (e.y[i] < 0 || e.y[i] >= num_classes)
                    throw std::invalid_argument("EnvDataset: label out of range in env " + e.id);
                seen[static_cast<std::size_t>(e.y[i])] = 1;
            }
            for (int c = 0; c < num_classes; ++c)
                if (!seen[static_cast<std::size_t>(c)])
                    throw std::invalid_argument("EnvDataset: env " + e.id + " missing class " +
                                                std::to_string(c));
        }
    }
};

// ---------------------------------------------------------------------------
// Spirals: 2 invariant dims (interleaved two-class spirals) plus one shortcut
// block per environment. The e-th block encodes the label inside environment
// e and is standard-normal noise everywhere else, so shortcuts never
// generalize across environments.
// ---------------------------------------------------------------------------

struct SpiralsConfig {
    int num_envs = 16;
    int samples_per_env = 512;
    double spiral_turns = 1.5;
    double invariant_noise_std = 0.0;
    int shortcut_dims_per_env = 1;
    double shortcut_flip_prob_train = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (num_envs < 2) throw std::invalid_argument("SpiralsConfig: num_envs must be >= 2");
        if (samples_per_env < 2) throw std::invalid_argument("SpiralsConfig: samples_per_env must be >= 2");
        if (!(spiral_turns > 0.0)) throw std::invalid_argument("SpiralsConfig: spiral_turns must be > 0");
        if (!(invariant_noise_std >= 0.0))
            throw std::invalid_argument("SpiralsConfig: invariant_noise_std must be >= 0");
        if (shortcut_dims_per_env < 1)
            throw std::invalid_argument("SpiralsConfig: shortcut_dims_per_env must be >= 1");
        if (!(shortcut_flip_prob_train >= 0.0 && shortcut_flip_prob_train <= 1.0))
            throw std::invalid_argument("SpiralsConfig: shortcut_flip_prob_train must be in [0,1]");
    }

    nlohmann::json to_json() const {
        return {{"num_envs", num_envs},
                {"samples_per_env", samples_per_env},
                {"spiral_turns", spiral_turns},
                {"invariant_noise_std", invariant_noise_std},
                {"shortcut_dims_per_env", shortcut_dims_per_env},
                {"shortcut_flip_prob_train", shortcut_flip_prob_train},
                {"seed", seed}};
    }
    static SpiralsConfig from_json(const nlohmann::json& j) {
        SpiralsConfig c;
        c.num_envs = j.value("num_envs", c.num_envs);
        c.samples_per_env = j.value("samples_per_env", c.samples_per_env);
        c.spiral_turns = j.value("spiral_turns", c.spiral_turns);
        c.invariant_noise_std = j.value("invariant_noise_std", c.invariant_noise_std);
        c.shortcut_dims_per_env = j.value("shortcut_dims_per_env", c.shortcut_dims_per_env);
        c.shortcut_flip_prob_train = j.value("shortcut_flip_prob_train", c.shortcut_flip_prob_train);
        c.seed = j.value("seed", c.seed);
        return c;
    }
};

namespace detail {
constexpr double kSpiralInnerRadius = 0.25;
constexpr double kSpiralOuterRadius = 2.25;
constexpr double kShortcutJitterStd = 0.1;
constexpr double kColorJitterStd = 0.1;
constexpr double kCoreMargin = 0.5;
}  // namespace detail

inline EnvDataset gen_spirals(const SpiralsConfig& cfg) {
    cfg.validate();
    EnvDataset ds;
    ds.num_classes = 2;
    ds.feature_dim = 2 + cfg.num_envs * cfg.shortcut_dims_per_env;
    ds.provenance = {{"generator", "spirals"}, {"config", cfg.to_json()}, {"seed", cfg.seed}};
    const Rng root(cfg.seed);
    for (int e = 0; e < cfg.num_envs; ++e) {
        Rng rng = root.fork(static_cast<std::uint64_t>(e));
        Env env;
        env.id = std::to_string(e);
        env.x.resize(cfg.samples_per_env, ds.feature_dim);
        env.y.resize(cfg.samples_per_env);
        for (int i = 0; i < cfg.samples_per_env; ++i) {
            const int label = i % 2;
            env.y[i] = label;
            const double u = rng.uniform01();
            const double angle = u * 2.0 * M_PI * cfg.spiral_turns + (label == 1 ? M_PI : 0.0);
            const double radius = detail::kSpiralInnerRadius +
                                  (detail::kSpiralOuterRadius - detail::kSpiralInnerRadius) * u;
            env.x(i, 0) = radius * std::cos(angle) + rng.normal(0.0, cfg.invariant_noise_std);
            env.x(i, 1) = radius * std::sin(angle) + rng.normal(0.0, cfg.invariant_noise_std);
            for (int b = 0; b < cfg.num_envs; ++b) {
                if (b == e) {
                    int enc_label = label;
                    if (cfg.shortcut_flip_prob_train > 0.0 && rng.bernoulli(cfg.shortcut_flip_prob_train))
                        enc_label = 1 - enc_label;
                    const double s = enc_label == 1 ? 1.0 : -1.0;
                    for (int k = 0; k < cfg.shortcut_dims_per_env; ++k)
                        env.x(i, 2 + b * cfg.shortcut_dims_per_env + k) =
                            s + rng.normal(0.0, detail::kShortcutJitterStd);
                } else {
                    for (int k = 0; k < cfg.shortcut_dims_per_env; ++k)
                        env.x(i, 2 + b * cfg.shortcut_dims_per_env + k) = rng.normal();
                }
            }
        }
        ds.envs.push_back(std::move(env));
    }
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------------
// Synthetic color-correlation dataset: core features decide the true label
// (decodable exactly via sign of core dim 0), labels are flipped with
// label_noise, and a 2-dim color block matches the observed label with
// probability (1+corr_e)/2 in environment e.
// ---------------------------------------------------------------------------

struct SyntheticCmnistConfig {
    std::vector<double> env_label_color_corr = {+0.9, +0.8, -0.9};
    double label_noise = 0.25;
    int core_feature_dim = 8;
    int samples_per_env = 2000;
    std::uint64_t seed = 0;

    void validate() const {
        if (env_label_color_corr.size() < 2)
            throw std::invalid_argument("SyntheticCmnistConfig: needs >= 2 environments");
        for (double c : env_label_color_corr)
            if (!(c >= -1.0 && c <= 1.0))
                throw std::invalid_argument("SyntheticCmnistConfig: |corr| must be <= 1");
        if (!(label_noise >= 0.0 && label_noise < 0.5))
            throw std::invalid_argument("SyntheticCmnistConfig: label_noise must be in [0,0.5)");
        if (core_feature_dim < 1)
            throw std::invalid_argument("SyntheticCmnistConfig: core_feature_dim must be >= 1");
        if (samples_per_env < 2)
            throw std::invalid_argument("SyntheticCmnistConfig: samples_per_env must be >= 2");
    }

    nlohmann::json to_json() const {
        return {{"env_label_color_corr", env_label_color_corr},
                {"label_noise", label_noise},
                {"core_feature_dim", core_feature_dim},
                {"samples_per_env", samples_per_env},
                {"seed", seed}};
    }
    static SyntheticCmnistConfig from_json(const nlohmann::json& j) {
        SyntheticCmnistConfig c;
        c.env_label_color_corr =
            j.value("env_label_color_corr", c.env_label_color_corr);
        c.label_noise = j.value("label_noise", c.label_noise);
        c.core_feature_dim = j.value("core_feature_dim", c.core_feature_dim);
        c.samples_per_env = j.value("samples_per_env", c.samples_per_env);
        c.seed = j.value("seed", c.seed);
        return c;
    }
};

inline std::string cmnist_env_id(double corr) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%+g", corr);
    return buf;
}

inline EnvDataset gen_synthetic_cmnist(const SyntheticCmnistConfig& cfg) {
    cfg.validate();
    EnvDataset ds;
    ds.num_classes = 2;
    ds.feature_dim = cfg.core_feature_dim + 2;
    ds.provenance = {{"generator", "cmnist"}, {"config", cfg.to_json()}, {"seed", cfg.seed}};
    const Rng root(cfg.seed);
    for (std::size_t e = 0; e < cfg.env_label_color_corr.size(); ++e) {
        const double corr = cfg.env_label_color_corr[e];
        Rng rng = root.fork(e);
        Env env;
        env.id = cmnist_env_id(corr);
        env.x.resize(cfg.samples_per_env, ds.feature_dim);
        env.y.resize(cfg.samples_per_env);
        for (int i = 0; i < cfg.samples_per_env; ++i) {
            const int true_label = i % 2;
            const double s = true_label == 1 ? 1.0 : -1.0;
            env.x(i, 0) = s * (detail::kCoreMargin + std::abs(rng.normal()));
            for (int k = 1; k < cfg.core_feature_dim; ++k) env.x(i, k) = rng.normal();
            const int label = rng.bernoulli(cfg.label_noise) ? 1 - true_label : true_label;
            env.y[i] = label;
            const double p_match = (1.0 + corr) / 2.0;
            const int color = rng.bernoulli(p_match) ? label : 1 - label;
            env.x(i, cfg.core_feature_dim) =
                (color == 0 ? 1.0 : 0.0) + rng.normal(0.0, detail::kColorJitterStd);
            env.x(i, cfg.core_feature_dim + 1) =
                (color == 1 ? 1.0 : 0.0) + rng.normal(0.0, detail::kColorJitterStd);
        }
        ds.envs.push_back(std::move(env));
    }
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

// Per-environment split, stratified by label. Held-out class counts follow
// the largest-remainder rule so each split stays within one sample of the
// parent class proportions.
inline std::pair<EnvDataset, EnvDataset> env_split(const EnvDataset& ds, double holdout_fraction,
                                                   std::uint64_t seed) {
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
        throw std::invalid_argument("env_split: holdout_fraction must be in (0,1)");
    EnvDataset train = ds, heldout = ds;
    train.envs.clear();
    heldout.envs.clear();
    const Rng root(seed);
    for (std::size_t ei = 0; ei < ds.envs.size(); ++ei) {
        const Env& env = ds.envs[ei];
        std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(ds.num_classes));
        for (Eigen::Index i = 0; i < env.y.size(); ++i)
            by_class[static_cast<std::size_t>(env.y[i])].push_back(i);
        for (const auto& members : by_class)
            if (members.size() < 2)
                throw std::invalid_argument("env_split: env " + env.id +
                                            " too small to stratify (needs >= 2 samples per class)");

        Rng rng = root.fork(ei);
        for (auto& members : by_class)
            for (std::size_t i = members.size(); i > 1; --i)
                std::swap(members[i - 1],
                          members[rng.uniform_int(0, static_cast<std::int64_t>(i) - 1)]);

        const auto total = static_cast<double>(env.y.size());
        const auto want_total =
            static_cast<std::size_t>(std::llround(holdout_fraction * total));
        std::vector<std::size_t> take(by_class.size());
        std::vector<std::pair<double, std::size_t>> remainders;
        std::size_t assigned = 0;
        for (std::size_t c = 0; c < by_class.size(); ++c) {
            const double exact = holdout_fraction * static_cast<double>(by_class[c].size());
            take[c] = static_cast<std::size_t>(exact);
            assigned += take[c];
            remainders.push_back({exact - static_cast<double>(take[c]), c});
        }
        std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        for (std::size_t k = 0; assigned < want_total && k < remainders.size(); ++k) {
            ++take[remainders[k].second];
            ++assigned;
        }
        // Keep at least one sample of each class on both sides.
        for (std::size_t c = 0; c < by_class.size(); ++c) {
            if (take[c] == 0) take[c] = 1;
            if (take[c] >= by_class[c].size()) take[c] = by_class[c].size() - 1;
        }

        std::vector<Eigen::Index> held_idx, train_idx;
        for (std::size_t c = 0; c < by_class.size(); ++c) {
            for (std::size_t i = 0; i < by_class[c].size(); ++i)
                (i < take[c] ? held_idx : train_idx).push_back(by_class[c][i]);
        }
        std::sort(held_idx.begin(), held_idx.end());
        std::sort(train_idx.begin(), train_idx.end());

        auto subset = [&](const std::vector<Eigen::Index>& idx) {
            Env out;
            out.id = env.id;
            out.x.resize(static_cast<Eigen::Index>(idx.size()), env.x.cols());
            out.y.resize(static_cast<Eigen::Index>(idx.size()));
            for (std::size_t i = 0; i < idx.size(); ++i) {
                out.x.row(static_cast<Eigen::Index>(i)) = env.x.row(idx[i]);
                out.y[static_cast<Eigen::Index>(i)] = env.y[idx[i]];
            }
            return out;
        };
        train.envs.push_back(subset(train_idx));
        heldout.envs.push_back(subset(held_idx));
    }
    return {train, heldout};
}

// Partition into (training environments, single test environment). The test
// environment is never consulted for training or non-oracle selection.
inline std::pair<EnvDataset, EnvDataset> leave_one_env_out(const EnvDataset& ds,
                                                           const std::string& test_env) {
    if (ds.envs.size() < 3)
        throw std::invalid_argument("leave_one_env_out: needs at least 3 environments");
    const std::size_t ti = ds.env_index(test_env);
    EnvDataset train = ds, test = ds;
    train.envs.clear();
    test.envs.clear();
    for (std::size_t i = 0; i < ds.envs.size(); ++i)
        (i == ti ? test : train).envs.push_back(ds.envs[i]);
    return {train, test};
}

}  // namespace gradmask
