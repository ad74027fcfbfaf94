#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "gradmask/masking.hpp"
#include "gradmask/rng.hpp"

using namespace gradmask;
using Catch::Matchers::ContainsSubstring;

namespace {

EnvGradientSet column_set(std::initializer_list<double> column) {
    EnvGradientSet g;
    g.grads.resize(static_cast<Eigen::Index>(column.size()), 1);
    Eigen::Index e = 0;
    for (double v : column) {
        g.grads(e, 0) = v;
        g.env_ids.push_back("env" + std::to_string(e));
        ++e;
    }
    return g;
}

EnvGradientSet random_set(Rng& rng, Eigen::Index d, Eigen::Index n) {
    EnvGradientSet g;
    g.grads.resize(d, n);
    for (Eigen::Index e = 0; e < d; ++e) {
        g.env_ids.push_back("env" + std::to_string(e));
        for (Eigen::Index j = 0; j < n; ++j) {
            // Mix of scales and frequent exact sign collisions.
            const double mag = std::pow(10.0, rng.uniform(-3.0, 1.0));
            g.grads(e, j) = (rng.bernoulli(0.5) ? 1.0 : -1.0) * mag;
        }
    }
    return g;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_CASE("sign agreement on worked columns", "[masking]") {
    CHECK(sign_agreement(column_set({1.0, 2.0, 3.0}))[0] == 1.0);
    CHECK(sign_agreement(column_set({1.0, -1.0}))[0] == 0.0);
    CHECK_THAT(sign_agreement(column_set({2.0, -0.5, 0.1}))[0],
               Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-15));
    // sign(0) counts for neither direction
    CHECK(sign_agreement(column_set({0.0, 1.0}))[0] == 0.5);
    CHECK(sign_agreement(column_set({0.0, 0.0}))[0] == 0.0);
}

TEST_CASE("sign agreement input validation", "[masking]") {
    EnvGradientSet g = column_set({1.0, std::nan("")});
    CHECK_THROWS_WITH(sign_agreement(g), ContainsSubstring("env 1"));
    CHECK_THROWS_AS(sign_agreement(column_set({1.0})), std::invalid_argument);
}

TEST_CASE("dispersion matches hand evaluation", "[masking]") {
    CHECK_THAT(dispersion(column_set({0.9, 1.0, 1.1}))[0],
               Catch::Matchers::WithinAbs(0.02 / 3.0, 1e-15));
    CHECK(dispersion(column_set({0.7, 0.7, 0.7}))[0] == 0.0);
    CHECK(dispersion(column_set({1.0, -1.0}))[0] == kInf);  // zero-mean guard
    // both avg^2 and var negligible -> 0, not inf
    CHECK(dispersion(column_set({1e-8, 1e-8}))[0] == 0.0);
}

TEST_CASE("and_mask threshold is inclusive", "[masking]") {
    Eigen::VectorXd a(1);
    a[0] = 1.0;
    CHECK(and_mask(a, 1.0).weights[0] == 1.0);
    const Eigen::VectorXd agree4 = sign_agreement(column_set({1.0, 2.0, 0.5, -1.0}));
    CHECK(agree4[0] == 0.5);
    CHECK(and_mask(agree4, 0.5).weights[0] == 1.0);   // tau*d = 2 <= |sum| = 2
    CHECK(and_mask(agree4, 0.75).weights[0] == 0.0);  // tau*d = 3 > 2
    a[0] = 0.0;
    CHECK(and_mask(a, 0.25).weights[0] == 0.0);
}

TEST_CASE("sand_mask worked examples", "[masking]") {
    Eigen::VectorXd a(1), s2(1);

    a[0] = 1.0;
    s2[0] = dispersion(column_set({0.9, 1.0, 1.1}))[0];
    const double m1 = sand_mask(a, s2, 0.9).weights[0];
    CHECK_THAT(m1, Catch::Matchers::WithinAbs(std::tanh(15.0), 1e-12));
    CHECK_THAT(m1, Catch::Matchers::WithinAbs(1.0, 1e-9));

    a[0] = sign_agreement(column_set({2.0, -0.5, 0.1}))[0];
    s2[0] = dispersion(column_set({2.0, -0.5, 0.1}))[0];
    CHECK_THAT(s2[0], Catch::Matchers::WithinAbs(3.9921875, 1e-12));
    CHECK_THAT(sand_mask(a, s2, 0.2).weights[0],
               Catch::Matchers::WithinAbs(0.03338615214331319, 1e-9));

    // a <= tau -> 0 regardless of sigma^2
    a[0] = 0.3;
    for (double s : {0.0, 0.5, 7.0}) {
        s2[0] = s;
        CHECK(sand_mask(a, s2, 0.3).weights[0] == 0.0);
        CHECK(sand_mask(a, s2, 0.6).weights[0] == 0.0);
    }
}

TEST_CASE("sand_mask degenerate limits", "[masking]") {
    Eigen::VectorXd a(1), s2(1);
    a[0] = 0.8;
    s2[0] = 0.0;
    CHECK(sand_mask(a, s2, 0.5).weights[0] == 1.0);  // sigma2=0, a>tau
    CHECK(sand_mask(a, s2, 0.8).weights[0] == 0.0);  // sigma2=0, a<=tau
    s2[0] = kInf;
    CHECK(sand_mask(a, s2, 0.5).weights[0] == 0.0);  // tanh of 0+
    CHECK(sand_mask(a, s2, 0.9).weights[0] == 0.0);
}

TEST_CASE("mean gradients", "[masking]") {
    EnvGradientSet g;
    g.grads.resize(2, 1);
    g.grads << 2.0, 4.0;
    g.env_ids = {"a", "b"};
    CHECK(arithmetic_mean_grad(g)[0] == 3.0);

    EnvGradientSet single;
    single.grads.resize(1, 3);
    single.grads << -1.0, 0.5, 2.0;
    single.env_ids = {"only"};
    CHECK(arithmetic_mean_grad(single) == single.grads.row(0).transpose());
    CHECK_THAT(geometric_mean_grad(single)[1], Catch::Matchers::WithinAbs(0.5, 1e-15));

    g.grads << 2.0, 8.0;
    CHECK(arithmetic_mean_grad(g)[0] == 5.0);
    CHECK_THAT(geometric_mean_grad(g)[0], Catch::Matchers::WithinAbs(4.0, 1e-12));
    CHECK(arithmetic_mean_grad(g)[0] >= geometric_mean_grad(g)[0]);

    CHECK(geometric_mean_grad(column_set({1.0, -1.0}))[0] == 0.0);
    CHECK(geometric_mean_grad(column_set({0.0, 2.0}))[0] == 0.0);
    CHECK_THAT(geometric_mean_grad(column_set({-3.0, -3.0}))[0],
               Catch::Matchers::WithinAbs(-3.0, 1e-12));
}

TEST_CASE("masked_update_gradient composes the pieces", "[masking]") {
    Rng rng(7);
    EnvGradientSet g = random_set(rng, 4, 6);

    MaskConfig none;
    none.method = MaskMethod::none;
    const MaskedUpdate u0 = masked_update_gradient(g, none);
    CHECK(u0.update == arithmetic_mean_grad(g));
    CHECK(u0.mask.weights.minCoeff() == 1.0);

    MaskConfig am;
    am.method = MaskMethod::and_mask;
    am.tau = 1.0;
    const MaskedUpdate u1 = masked_update_gradient(column_set({1.0, -1.0}), am);
    CHECK(u1.update[0] == 0.0);

    MaskConfig sm;
    sm.method = MaskMethod::sand_mask;
    sm.tau = 0.9;
    const MaskedUpdate u2 = masked_update_gradient(column_set({0.9, 1.0, 1.1}), sm);
    CHECK_THAT(u2.update[0], Catch::Matchers::WithinAbs(1.0, 1e-6));
}

TEST_CASE("mask shape curve", "[masking]") {
    const auto rows = mask_shape_curve(0.9, {0.01, 10.0}, {0.0, 0.9, 1.0});
    REQUIRE(rows.size() == 6);
    CHECK_THAT(rows[2].mask, Catch::Matchers::WithinAbs(std::tanh(10.0), 1e-15));  // s2=0.01, a=1
    CHECK(rows[1].mask == 0.0);                                                    // a == tau
    CHECK_THAT(rows[5].mask, Catch::Matchers::WithinAbs(std::tanh(0.01), 1e-15));  // s2=10, a=1
    CHECK_THROWS_AS(mask_shape_curve(0.5, {1.0}, {}), std::invalid_argument);

    // monotone nondecreasing in a for fixed sigma^2
    std::vector<double> grid;
    for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
    for (double s2 : {0.01, 0.5, 10.0}) {
        const auto curve = mask_shape_curve(0.4, {s2}, grid);
        for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].mask >= curve[i - 1].mask);
    }
}

TEST_CASE("mask algebra properties on random gradient sets", "[masking][property]") {
    Rng rng(2024);
    for (int iter = 0; iter < 2000; ++iter) {
        const Eigen::Index d = 2 + rng.uniform_int(0, 6);
        const Eigen::Index n = 1 + rng.uniform_int(0, 7);
        EnvGradientSet g = random_set(rng, d, n);
        const double tau = rng.uniform01();
        const Eigen::VectorXd a = sign_agreement(g);
        const Eigen::VectorXd s2 = dispersion(g);
        const ParamMask am = and_mask(a, tau);
        const ParamMask sm = sand_mask(a, s2, tau);

        for (Eigen::Index j = 0; j < n; ++j) {
            CHECK(a[j] >= 0.0);
            CHECK(a[j] <= 1.0);
            CHECK((am.weights[j] == 0.0 || am.weights[j] == 1.0));
            CHECK(sm.weights[j] >= 0.0);
            CHECK(sm.weights[j] <= 1.0);
            // dominance (sigma^2 = +inf forces 0 even above threshold)
            if (sm.weights[j] > 0.0) CHECK(a[j] > tau);
            if (a[j] > tau && std::isfinite(s2[j])) CHECK(sm.weights[j] > 0.0);
            if (am.weights[j] == 1.0) CHECK(a[j] >= tau);
        }

        // positive per-environment rescaling leaves agreement untouched
        EnvGradientSet scaled = g;
        for (Eigen::Index e = 0; e < d; ++e)
            scaled.grads.row(e) *= std::pow(10.0, rng.uniform(-2.0, 2.0));
        CHECK(sign_agreement(scaled) == a);
        CHECK(and_mask(sign_agreement(scaled), tau).weights == am.weights);

        // permutation invariance of every statistic
        EnvGradientSet permuted = g;
        for (Eigen::Index e = d; e > 1; --e) {
            const Eigen::Index k = rng.uniform_int(0, e - 1);
            permuted.grads.row(e - 1).swap(permuted.grads.row(k));
        }
        CHECK(sign_agreement(permuted) == a);
        const Eigen::VectorXd s2p = dispersion(permuted);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (std::isinf(s2[j]))
                CHECK(std::isinf(s2p[j]));
            else
                CHECK_THAT(s2p[j], Catch::Matchers::WithinRel(s2[j], 1e-12) ||
                                       Catch::Matchers::WithinAbs(s2[j], 1e-15));
        }

        // AM-GM wherever the geometric mean is defined
        const Eigen::VectorXd geo = geometric_mean_grad(g);
        const Eigen::VectorXd arith = arithmetic_mean_grad(g);
        for (Eigen::Index j = 0; j < n; ++j)
            if (geo[j] != 0.0) CHECK(std::abs(geo[j]) <= std::abs(arith[j]) * (1.0 + 1e-12));
    }
}

TEST_CASE("sand_mask limit behavior in sigma2", "[masking][property]") {
    Rng rng(99);
    for (int iter = 0; iter < 200; ++iter) {
        const double tau = rng.uniform(0.0, 0.95);
        const double a_val = rng.uniform(tau + 1e-3, 1.0);
        Eigen::VectorXd a(1), s2(1);
        a[0] = a_val;
        double prev = 1.0;
        bool first = true;
        for (double s : {1e-9, 1e-3, 0.1, 1.0, 10.0, 1e6}) {
            s2[0] = s;
            const double m = sand_mask(a, s2, tau).weights[0];
            if (first) {
                CHECK_THAT(m, Catch::Matchers::WithinAbs(1.0, 1e-9));  // sigma2 -> 0+
                first = false;
            }
            CHECK(m <= prev);  // nonincreasing in sigma2
            prev = m;
        }
        CHECK(prev < 1e-5);  // sigma2 -> inf
    }
}
