#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "gradmask/datasets.hpp"
#include "gradmask/io.hpp"
#include "gradmask/stats.hpp"

using namespace gradmask;

namespace {

double frac_label_one(const Env& env) {
    return env.y.cast<double>().mean();
}

}  // namespace

TEST_CASE("spirals dimensions and balance", "[datasets]") {
    SpiralsConfig cfg;
    cfg.num_envs = 16;
    cfg.samples_per_env = 512;
    cfg.seed = 3;
    const EnvDataset ds = gen_spirals(cfg);
    CHECK(ds.feature_dim == 18);  // 2 invariant + 16 shortcut blocks
    CHECK(ds.envs.size() == 16);
    for (const auto& env : ds.envs) {
        CHECK(env.x.cols() == 18);
        CHECK(env.y.size() == 512);
        CHECK_THAT(frac_label_one(env), Catch::Matchers::WithinAbs(0.5, 0.02));
    }
    CHECK_THROWS_AS(gen_spirals(SpiralsConfig{1}), std::invalid_argument);
}

TEST_CASE("spirals are bitwise reproducible", "[datasets]") {
    SpiralsConfig cfg;
    cfg.num_envs = 4;
    cfg.samples_per_env = 64;
    cfg.seed = 99;
    const EnvDataset a = gen_spirals(cfg), b = gen_spirals(cfg);
    for (std::size_t e = 0; e < a.envs.size(); ++e) {
        CHECK(a.envs[e].x == b.envs[e].x);
        CHECK(a.envs[e].y == b.envs[e].y);
    }
    cfg.seed = 100;
    const EnvDataset c = gen_spirals(cfg);
    CHECK(a.envs[0].x != c.envs[0].x);
}

TEST_CASE("noise-free invariant dims sit exactly on the two spirals", "[datasets]") {
    SpiralsConfig cfg;
    cfg.num_envs = 3;
    cfg.samples_per_env = 200;
    cfg.invariant_noise_std = 0.0;
    cfg.spiral_turns = 1.5;
    cfg.seed = 12;
    const EnvDataset ds = gen_spirals(cfg);
    for (const auto& env : ds.envs) {
        for (Eigen::Index i = 0; i < env.y.size(); ++i) {
            const double x = env.x(i, 0), y = env.x(i, 1);
            const double r = std::hypot(x, y);
            CHECK(r >= 0.25 - 1e-9);
            CHECK(r <= 2.25 + 1e-9);
            const double u = (r - 0.25) / 2.0;
            const double expected = u * 2.0 * M_PI * cfg.spiral_turns + (env.y[i] == 1 ? M_PI : 0.0);
            const double got = std::atan2(y, x);
            const double diff = std::remainder(expected - got, 2.0 * M_PI);
            CHECK_THAT(diff, Catch::Matchers::WithinAbs(0.0, 1e-9));
        }
    }
}

TEST_CASE("shortcut blocks predict only inside their own environment", "[datasets]") {
    SpiralsConfig cfg;
    cfg.num_envs = 6;
    cfg.samples_per_env = 512;
    cfg.seed = 5;
    const EnvDataset ds = gen_spirals(cfg);
    for (std::size_t e = 0; e < ds.envs.size(); ++e) {
        // threshold probe on shortcut block e (encoding is +-1 with 0.1 jitter)
        auto probe_acc = [&](const Env& env) {
            Eigen::Index correct = 0;
            for (Eigen::Index i = 0; i < env.y.size(); ++i) {
                const int pred = env.x(i, 2 + static_cast<Eigen::Index>(e)) > 0.0 ? 1 : 0;
                if (pred == env.y[i]) ++correct;
            }
            return static_cast<double>(correct) / static_cast<double>(env.y.size());
        };
        CHECK(probe_acc(ds.envs[e]) > 0.95);
        for (std::size_t other = 0; other < ds.envs.size(); ++other)
            if (other != e) CHECK_THAT(probe_acc(ds.envs[other]), Catch::Matchers::WithinAbs(0.5, 0.07));
    }
}

TEST_CASE("color correlations per environment", "[datasets]") {
    SyntheticCmnistConfig cfg;
    cfg.env_label_color_corr = {0.9, 0.0, -0.9};
    cfg.samples_per_env = 10000;
    cfg.seed = 17;
    const EnvDataset ds = gen_synthetic_cmnist(cfg);
    CHECK(ds.envs[0].id == "+0.9");
    CHECK(ds.envs[2].id == "-0.9");
    CHECK(ds.feature_dim == cfg.core_feature_dim + 2);

    auto color_bit = [&](const Env& env, Eigen::Index i) {
        return env.x(i, cfg.core_feature_dim + 1) > env.x(i, cfg.core_feature_dim) ? 1 : 0;
    };
    // corr +0.9: color matches the observed label on ~95% of samples
    {
        Eigen::Index match = 0;
        for (Eigen::Index i = 0; i < ds.envs[0].y.size(); ++i)
            if (color_bit(ds.envs[0], i) == ds.envs[0].y[i]) ++match;
        CHECK_THAT(static_cast<double>(match) / 10000.0, Catch::Matchers::WithinAbs(0.95, 0.02));
    }
    // corr 0: chi-squared independence test, alpha = 0.01
    {
        double table[2][2] = {{0, 0}, {0, 0}};
        for (Eigen::Index i = 0; i < ds.envs[1].y.size(); ++i)
            table[color_bit(ds.envs[1], i)][ds.envs[1].y[i]] += 1.0;
        CHECK(stats::chi2_2x2(table[0][0], table[0][1], table[1][0], table[1][1]) <
              stats::kChi2Df1Alpha01);
    }
    // oracle classifier on core features: accuracy == 1 - label_noise everywhere
    for (const auto& env : ds.envs) {
        Eigen::Index correct = 0;
        for (Eigen::Index i = 0; i < env.y.size(); ++i) {
            const int pred = env.x(i, 0) > 0.0 ? 1 : 0;
            if (pred == env.y[i]) ++correct;
        }
        CHECK_THAT(static_cast<double>(correct) / static_cast<double>(env.y.size()),
                   Catch::Matchers::WithinAbs(0.75, 0.03));
        CHECK_THAT(frac_label_one(env), Catch::Matchers::WithinAbs(0.5, 0.02));
    }
}

TEST_CASE("stratified environment split", "[datasets]") {
    SpiralsConfig cfg;
    cfg.num_envs = 3;
    cfg.samples_per_env = 100;
    cfg.seed = 7;
    const EnvDataset ds = gen_spirals(cfg);
    auto [train, held] = env_split(ds, 0.2, 42);
    for (std::size_t e = 0; e < ds.envs.size(); ++e) {
        CHECK(train.envs[e].y.size() == 80);
        CHECK(held.envs[e].y.size() == 20);
        // class proportions within one sample of the parent's
        const double parent_ones = ds.envs[e].y.cast<double>().sum();
        CHECK(std::abs(held.envs[e].y.cast<double>().sum() - 0.2 * parent_ones) <= 1.0);

        // union reconstructs the original environment (as a multiset of rows)
        std::vector<std::string> original, rebuilt;
        auto row_key = [](const Env& env, Eigen::Index i) {
            std::string k;
            for (Eigen::Index f = 0; f < env.x.cols(); ++f)
                k += io::fmt_double(env.x(i, f)) + ",";
            return k + std::to_string(env.y[i]);
        };
        for (Eigen::Index i = 0; i < ds.envs[e].y.size(); ++i) original.push_back(row_key(ds.envs[e], i));
        for (Eigen::Index i = 0; i < train.envs[e].y.size(); ++i) rebuilt.push_back(row_key(train.envs[e], i));
        for (Eigen::Index i = 0; i < held.envs[e].y.size(); ++i) rebuilt.push_back(row_key(held.envs[e], i));
        std::sort(original.begin(), original.end());
        std::sort(rebuilt.begin(), rebuilt.end());
        CHECK(original == rebuilt);
    }

    // determinism: same seed, same index sets
    auto [train2, held2] = env_split(ds, 0.2, 42);
    for (std::size_t e = 0; e < ds.envs.size(); ++e) {
        CHECK(train.envs[e].x == train2.envs[e].x);
        CHECK(held.envs[e].x == held2.envs[e].x);
    }

    CHECK_THROWS_AS(env_split(ds, 0.0, 1), std::invalid_argument);
    // an environment with a single sample of some class cannot stratify
    EnvDataset tiny = ds;
    tiny.envs.resize(1);
    tiny.envs[0].x = ds.envs[0].x.topRows(3);
    tiny.envs[0].y.resize(3);
    tiny.envs[0].y << 0, 1, 0;
    CHECK_THROWS_AS(env_split(tiny, 0.2, 1), std::invalid_argument);
}

TEST_CASE("leave one environment out", "[datasets]") {
    SpiralsConfig cfg;
    cfg.num_envs = 16;
    cfg.samples_per_env = 16;
    cfg.seed = 1;
    const EnvDataset ds = gen_spirals(cfg);
    auto [train, test] = leave_one_env_out(ds, "0");
    CHECK(train.envs.size() == 15);
    CHECK(test.envs.size() == 1);
    CHECK(test.envs[0].id == "0");
    CHECK_THROWS_AS(leave_one_env_out(ds, "nope"), std::invalid_argument);

    SyntheticCmnistConfig ccfg;
    ccfg.samples_per_env = 50;
    const EnvDataset cds = gen_synthetic_cmnist(ccfg);
    auto [ctrain, ctest] = leave_one_env_out(cds, "-0.9");
    CHECK(ctrain.envs.size() == 2);
    CHECK(ctrain.envs[0].id == "+0.9");
    CHECK(ctrain.envs[1].id == "+0.8");

    EnvDataset two = cds;
    two.envs.resize(2);
    CHECK_THROWS_AS(leave_one_env_out(two, "+0.9"), std::invalid_argument);
}

TEST_CASE("dataset csv round trip", "[datasets]") {
    SpiralsConfig cfg;
    cfg.num_envs = 3;
    cfg.samples_per_env = 40;
    cfg.seed = 77;
    const EnvDataset ds = gen_spirals(cfg);
    const auto dir = std::filesystem::temp_directory_path() / "gradmask_ds_test";
    std::filesystem::remove_all(dir);
    io::save_dataset(ds, dir);
    CHECK(std::filesystem::exists(dir / "env_0.csv"));
    CHECK(std::filesystem::exists(dir / "manifest.json"));
    const EnvDataset back = io::load_dataset(dir);
    CHECK(back.feature_dim == ds.feature_dim);
    CHECK(back.provenance == ds.provenance);
    for (std::size_t e = 0; e < ds.envs.size(); ++e) {
        CHECK(back.envs[e].id == ds.envs[e].id);
        CHECK(back.envs[e].x == ds.envs[e].x);  // exact through shortest round-trip
        CHECK(back.envs[e].y == ds.envs[e].y);
    }
    std::filesystem::remove_all(dir);
}
