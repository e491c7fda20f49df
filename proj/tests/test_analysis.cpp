#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fractal/analysis.hpp"
#include "fractal/build.hpp"
#include "fractal/rng.hpp"
#include "fractal/train.hpp"

using namespace fractal;

namespace {

FractalDistribution cantor_dist(int n, const ApproximationCurve& curve) {
    auto ifs = builtin_ifs("cantor1d");
    return FractalDistribution(ifs, n, 0.25 * ifs.margin_cap(n), curve);
}

ApproximationCurve random_curve(int n, Rng& rng) {
    std::vector<double> w(static_cast<std::size_t>(n));
    double sum = 0.0;
    for (double& v : w) {
        v = rng.uniform01();
        sum += v;
    }
    for (double& v : w) v /= sum;
    return ApproximationCurve(std::move(w));
}

} // namespace

TEST_CASE("interval moments closed forms") {
    auto fine = cantor_dist(6, fine_curve(6));
    auto im = interval_moments(fine, 3);
    REQUIRE(im.size() == 8);
    for (const auto& cell : im) {
        CHECK(cell.ey == 0.0);
        CHECK(cell.exy == 0.0);
        CHECK(cell.mass == doctest::Approx(std::ldexp(1.0, -3)));
        CHECK(cell.center == doctest::Approx(0.5 * (cell.lo + cell.hi)));
    }

    // P(n') = 3/4: |E[y|I]| = (1/4)/(3/4) = 1/3, below the 2(P-1/2) cap.
    ApproximationCurve half_then_rest({0.5, 0.0, 0.5});
    auto dist = cantor_dist(3, half_then_rest);
    auto im2 = interval_moments(dist, 2);
    for (const auto& cell : im2) {
        CHECK(std::abs(cell.ey) == doctest::Approx(1.0 / 3.0));
        CHECK(std::abs(cell.ey) <= 2.0 * (0.75 - 0.5) + 1e-12);
        CHECK(cell.exy == doctest::Approx(cell.center * cell.ey));
    }

    CHECK_THROWS_AS(interval_moments(dist, 3), IndexOutOfRange);
    auto ifs2 = builtin_ifs("cantor2d");
    FractalDistribution d2(ifs2, 2, 0.25 * ifs2.margin_cap(2), uniform_curve(2));
    CHECK_THROWS_AS(interval_moments(d2, 1), DimensionMismatch);
}

TEST_CASE("interval moments match Monte Carlo") {
    Rng rng(3);
    ApproximationCurve curve = random_curve(8, rng);
    auto dist = cantor_dist(8, curve);
    const int n_prime = 4;
    auto im = interval_moments(dist, n_prime);
    Dataset ds = dist.sample_dataset(200000, 17);
    const auto& ifs = dist.ifs();
    std::vector<long> count(im.size(), 0);
    std::vector<double> sum_y(im.size(), 0.0), sum_xy(im.size(), 0.0);
    for (const auto& s : ds.samples) {
        for (std::size_t j = 0; j < im.size(); ++j) {
            if (s.x[0] >= im[j].lo && s.x[0] <= im[j].hi) {
                ++count[j];
                sum_y[j] += s.y;
                sum_xy[j] += s.x[0] * s.y;
                break;
            }
        }
        (void)ifs;
    }
    for (std::size_t j = 0; j < im.size(); ++j) {
        const double mass_hat = double(count[j]) / double(ds.size());
        CHECK(std::abs(mass_hat - im[j].mass) <=
              4.0 * std::sqrt(im[j].mass * (1.0 - im[j].mass) / double(ds.size())) + 1e-9);
        if (count[j] < 100) continue;
        const double ey_hat = sum_y[j] / double(count[j]);
        const double exy_hat = sum_xy[j] / double(count[j]);
        const double sigma = 1.0 / std::sqrt(double(count[j]));
        CHECK(std::abs(ey_hat - im[j].ey) <= 4.0 * sigma);
        CHECK(std::abs(exy_hat - im[j].exy) <= 4.0 * sigma);
    }
}

TEST_CASE("population gradient is exactly zero for affine nets on fine curves") {
    auto dist = cantor_dist(8, fine_curve(8));
    LayeredNet affine;
    affine.layers = {{1, 1, {0.1}, {0.2}}};
    auto pg = exact_population_gradient(affine, dist, 4);
    CHECK(pg.w_max == 0.0);
    CHECK(pg.b_max == 0.0);

    // Paper-init nets that stay affine on the level-n' cells also land at 0.
    auto net = init_net(InitScheme::paper_uniform(0.5), {1, 4, 1}, 99);
    if (affine_on_leaves(extract_pwl_1d(net), dist.ifs(), 4)) {
        auto pg2 = exact_population_gradient(net, dist, 4);
        CHECK(pg2.w_max == 0.0);
        CHECK(pg2.b_max == 0.0);
    }
}

TEST_CASE("population gradient matches Monte Carlo") {
    Rng rng(7);
    for (int trial = 0; trial < 3; ++trial) {
        ApproximationCurve curve = random_curve(8, rng);
        auto dist = cantor_dist(8, curve);
        auto net = init_net(InitScheme::paper_uniform(0.5), {1, 6, 6, 1}, rng.next_u64());
        auto pg = exact_population_gradient(net, dist, 4);

        Dataset ds = dist.sample_dataset(200000, rng.next_u64());
        auto mc = hinge_loss_and_grad(net, ds.samples);
        const double tol = 4.0 / std::sqrt(double(ds.size())) + 1e-6;
        for (std::size_t l = 0; l < pg.grad.layers.size(); ++l) {
            for (std::size_t i = 0; i < pg.grad.layers[l].w.size(); ++i)
                CHECK(std::abs(pg.grad.layers[l].w[i] - mc.grad.layers[l].w[i]) <= tol);
            for (std::size_t i = 0; i < pg.grad.layers[l].b.size(); ++i)
                CHECK(std::abs(pg.grad.layers[l].b[i] - mc.grad.layers[l].b[i]) <= tol);
        }
    }
}

TEST_CASE("gradient bound decomposition from the moment lemma") {
    // Any paper-init net on any curve obeys the population bound
    // 5(P(n')-1/2) once it is affine on the cells.
    Rng rng(11);
    ApproximationCurve curve({0.3, 0.1, 0.0, 0.2, 0.0, 0.0, 0.0, 0.4});
    auto dist = cantor_dist(8, curve);
    int checked = 0;
    for (int trial = 0; trial < 20; ++trial) {
        auto net = init_net(InitScheme::paper_uniform(0.5), {1, 4, 1}, rng.next_u64());
        if (!affine_on_leaves(extract_pwl_1d(net), dist.ifs(), 5)) continue;
        auto pg = exact_population_gradient(net, dist, 5);
        CHECK(pg.w_max <= 5.0 * (curve.P(5) - 0.5) + 1e-12);
        CHECK(pg.b_max <= 3.0 * (curve.P(5) - 0.5) + 1e-12);
        ++checked;
    }
    CHECK(checked > 0);
}

TEST_CASE("margin saturation is rejected") {
    auto dist = cantor_dist(6, fine_curve(6));
    LayeredNet big;
    big.layers = {{1, 1, {0.0}, {2.0}}};
    CHECK_THROWS_AS(exact_population_gradient(big, dist, 3), MarginSaturated);
}

TEST_CASE("exact initialization error") {
    auto ifs = builtin_ifs("cantor1d");
    const int n = 4;
    const double gamma = 0.25 * ifs.margin_cap(n);
    FractalDistribution dist(ifs, n, gamma, uniform_curve(n));
    LayeredNet classifier = build_exact_classifier(ifs, n, gamma);
    CHECK(init_error_exact(classifier, dist) == doctest::Approx(0.0).epsilon(1e-12));

    // Constant sign on a fine curve: exactly one half.
    auto fine = cantor_dist(6, fine_curve(6));
    LayeredNet constant;
    constant.layers = {{1, 1, {0.0}, {0.4}}};
    CHECK(init_error_exact(constant, fine) == 0.5);

    // Monte Carlo agreement on a random net and curve.
    Rng rng(13);
    ApproximationCurve curve = random_curve(7, rng);
    auto d7 = cantor_dist(7, curve);
    auto net = init_net(InitScheme::paper_uniform(0.5), {1, 5, 5, 1}, 31);
    const double exact = init_error_exact(net, d7);
    Dataset ds = d7.sample_dataset(200000, 77);
    int wrong = 0;
    for (const auto& s : ds.samples)
        if ((forward(net, s.x) >= 0.0 ? 1 : -1) != s.y) ++wrong;
    const double mc = double(wrong) / double(ds.size());
    CHECK(std::abs(exact - mc) <=
          4.0 * std::sqrt(std::max(exact, 0.01) * (1.0 - std::min(exact, 0.99)) /
                          double(ds.size())) + 1e-9);
}

TEST_CASE("affine_on_leaves") {
    auto ifs = builtin_ifs("cantor1d");
    LayeredNet affine;
    affine.layers = {{1, 1, {1.5}, {-0.3}}};
    CHECK(affine_on_leaves(extract_pwl_1d(affine), ifs, 4));

    // One kink at the center of the first level-2 cell.
    const double center = 0.5 * std::pow(3.0, -2);
    LayeredNet kinked;
    kinked.layers = {{1, 1, {1.0}, {-center}}, {1, 1, {1.0}, {0.0}}};
    CHECK_FALSE(affine_on_leaves(extract_pwl_1d(kinked), ifs, 2));
}

TEST_CASE("hardness threshold arithmetic") {
    const double threshold = hardness_threshold(2, 4, 0.5);
    CHECK(threshold == doctest::Approx(std::log(256.0) / std::log(1.5)));
    CHECK(threshold > 13.6);
    CHECK(threshold < 13.7);
    CHECK_THROWS_AS(hardness_threshold(0, 4, 0.5), InvalidArgument);
    CHECK_THROWS_AS(hardness_threshold(2, 4, 1.5), InvalidArgument);
}

TEST_CASE("hardness probe on the fine curve") {
    auto report = hardness_probe(2, 4, fine_curve(15), 15, 0.5, 30, 2024);
    CHECK(report.n_prime == 14);
    CHECK(report.p_nprime == 0.5);
    CHECK(report.bound_w == 0.0);
    CHECK(report.bound_err == 0.5);
    CHECK(report.frac_w >= 0.5);
    CHECK(report.frac_err >= 0.5);
    for (const auto& row : report.rows) {
        if (row.affine_ok) {
            // Affine-on-cells seeds hit the theorem exactly.
            CHECK(row.grad_w_max == 0.0);
            CHECK(row.grad_b_max == 0.0);
            CHECK(row.init_error == 0.5);
        }
    }
    CHECK_THROWS_AS(hardness_probe(2, 4, fine_curve(14), 14, 0.5, 5, 1), ThresholdViolated);
    auto single = hardness_probe(2, 4, fine_curve(15), 15, 0.5, 1, 5);
    CHECK(single.rows.size() == 1);
}

TEST_CASE("hardness probe with slack bounds holds for every seed") {
    // P(n') = 0.9 keeps every bound far from the per-sample gradient cap.
    std::vector<double> w(15, 0.0);
    w[0] = 0.8;
    w[14] = 0.2;
    auto report = hardness_probe(2, 4, ApproximationCurve(std::move(w)), 15, 0.5, 10, 7);
    CHECK(report.p_nprime == doctest::Approx(0.9));
    CHECK(report.frac_w == 1.0);
    CHECK(report.frac_b == 1.0);
    CHECK(report.frac_err == 1.0);
}

TEST_CASE("region-budget oracle basics") {
    auto dist = cantor_dist(4, uniform_curve(4));
    // Enough budget to match every atom: zero error.
    CHECK(best_error_region_budget(dist, 3, 1 << 16) == 0.0);
    // Constant sign on a balanced distribution: one half.
    CHECK(best_error_region_budget(dist, 3, 1) == doctest::Approx(0.5));
    CHECK_THROWS_AS(best_error_region_budget(dist, 0, 4), IndexOutOfRange);
    auto central_ifs = builtin_ifs("cantor2d");
    FractalDistribution central(central_ifs, 2, 0.25 * central_ifs.margin_cap(2),
                                uniform_curve(2), GapStyle::CentralGap);
    CHECK_THROWS_AS(best_error_region_budget(central, 1, 4), DimensionMismatch);
}

TEST_CASE("region-budget oracle never undercuts the lower bound") {
    Rng rng(17);
    const int n = 8, j = 6;
    for (int trial = 0; trial < 5; ++trial) {
        ApproximationCurve curve = random_curve(n, rng);
        auto dist = cantor_dist(n, curve);
        for (int st = 1; st <= 3; ++st) {
            const long budget = 1L << st;
            const double dp = best_error_region_budget(dist, j, budget);
            const double bound = (1.0 - std::pow(2.0, st - j)) * (1.0 - curve.P(j));
            CHECK(dp >= bound - 1e-12);
        }
    }
}

TEST_CASE("region-budget oracle is monotone in the budget") {
    auto dist = cantor_dist(6, uniform_curve(6));
    double prev = 1.0;
    for (int st = 0; st <= 6; ++st) {
        const double dp = best_error_region_budget(dist, 4, 1L << st);
        CHECK(dp <= prev + 1e-15);
        prev = dp;
    }
}
