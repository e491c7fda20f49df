#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fractal/build.hpp"
#include "fractal/distribution.hpp"
#include "fractal/rng.hpp"

using namespace fractal;

TEST_CASE("choose_gain formula and degenerate input") {
    // d=1, gamma=0.01, eps=1/3: 4 * (1+1) / 0.01 = 800.
    CHECK(choose_gain(1, 0.01, 1.0 / 3.0) == doctest::Approx(800.0));
    // Larger margins never increase the gain.
    double prev = choose_gain(1, 0.001, 1.0 / 3.0);
    for (double g : {0.002, 0.01, 0.05, 0.15}) {
        double now = choose_gain(1, g, 1.0 / 3.0);
        CHECK(now <= prev);
        prev = now;
    }
    CHECK_THROWS_AS(choose_gain(1, 0.0, 1.0 / 3.0), DegenerateMargin);
}

TEST_CASE("box identity") {
    const double eps = 0.5;
    const double N = choose_gain(2, 0.1, eps);
    LayeredNet f = build_box_identity(2, eps, N);
    CHECK(f.depth() == 3);
    CHECK(f.max_width() == 6);

    auto out = forward_vector(f, {0.3, 0.7});
    CHECK(out[0] == doctest::Approx(0.3));
    CHECK(out[1] == doctest::Approx(0.7));

    auto far = forward_vector(f, {2.0, 0.5});
    CHECK(far[0] == 0.0);
    CHECK(far[1] == 0.0);

    // Dense in-box sweep: exact identity.
    Rng rng(3);
    double worst = 0.0;
    for (int it = 0; it < 10000; ++it) {
        Vec x{rng.uniform01(), rng.uniform01()};
        auto y = forward_vector(f, x);
        worst = std::max({worst, std::abs(y[0] - x[0]), std::abs(y[1] - x[1])});
    }
    CHECK(worst <= 1e-12);

    CHECK_THROWS_AS(build_box_identity(2, eps, 1.0), GainTooSmall);
}

TEST_CASE("box indicator") {
    const double gamma = 0.1;
    const double N = choose_gain(3, gamma, 1.0);
    LayeredNet f = build_box_indicator(3, gamma, N);
    CHECK(f.depth() == 3);
    CHECK(f.max_width() == 6);

    CHECK(forward(f, {-1.0, 0.5, 0.5}) == doctest::Approx(1.0));
    CHECK(forward(f, {0.5, 0.5, 0.5}) == 0.0);

    Rng rng(5);
    for (int it = 0; it < 10000; ++it) {
        Vec x{rng.uniform(-0.5, 1.5), rng.uniform(-0.5, 1.5), rng.uniform(-0.5, 1.5)};
        double v = forward(f, x);
        CHECK(v >= -1e-12);
        CHECK(v <= 1.0 + 1e-12);
    }
    CHECK_THROWS_AS(build_box_indicator(3, gamma, 0.5 / gamma), GainTooSmall);
}

TEST_CASE("fold block folds one level") {
    auto ifs = builtin_ifs("cantor1d");
    const double N = choose_gain(1, 0.01, ifs.separation());
    LayeredNet g = build_fold_block(ifs, N);
    CHECK(g.max_width() == 6); // 3dr

    CHECK(forward_vector(g, {1.0 / 9.0})[0] == doctest::Approx(1.0 / 3.0));
    CHECK(forward_vector(g, {7.0 / 9.0})[0] == doctest::Approx(1.0 / 3.0));

    // Gap point: the fold lands somewhere, but the gap detector fires on it.
    LayeredNet gap = build_gap_block(ifs, 0.01, N);
    CHECK(forward(gap, {0.5}) == doctest::Approx(1.0));

    // Fold contract on members, statistically.
    Rng rng(7);
    FractalDistribution dist(ifs, 4, 0.25 * ifs.margin_cap(4), uniform_curve(4));
    for (int it = 0; it < 500; ++it) {
        Vec x = dist.sample_positive(rng);
        Vec y = forward_vector(g, x);
        CHECK(ifs.membership(y, 3));
    }
}

TEST_CASE("gap block detects the complement of K_1") {
    auto ifs = builtin_ifs("cantor1d");
    const double N = choose_gain(1, 0.01, ifs.separation());
    LayeredNet gap = build_gap_block(ifs, 0.01, N);
    CHECK(gap.max_width() == 4); // 2dr

    CHECK(forward(gap, {0.5}) == doctest::Approx(1.0));
    CHECK(forward(gap, {1.0 / 6.0}) == 0.0);

    Rng rng(9);
    for (int it = 0; it < 10000; ++it) {
        double v = forward(gap, {rng.uniform(-0.5, 1.5)});
        CHECK(v >= -1e-12);
        CHECK(v <= 1.0 + 1e-12);
    }
}

TEST_CASE("exact classifier shape law") {
    auto c1 = builtin_ifs("cantor1d");
    LayeredNet n3 = build_exact_classifier(c1, 3, 0.005);
    CHECK(n3.depth() == 7);      // 2n+1
    CHECK(n3.max_width() == 10); // 5dr

    auto c2 = builtin_ifs("cantor2d");
    LayeredNet m2 = build_exact_classifier(c2, 2, 0.01);
    CHECK(m2.depth() == 5);
    CHECK(m2.max_width() == 40);

    for (int n = 1; n <= 5; ++n) {
        LayeredNet net = build_exact_classifier(c1, n, 0.25 * c1.margin_cap(n));
        CHECK(net.depth() == 2 * n + 1);
        CHECK(net.max_width() == 10);
    }
    CHECK_THROWS_AS(build_exact_classifier(c1, 2, 0.2), MarginTooLarge);
}

TEST_CASE("exact classifier signs match the membership oracle") {
    auto ifs = builtin_ifs("cantor1d");
    const int n = 3;
    const double gamma = 0.25 * ifs.margin_cap(n);
    LayeredNet net = build_exact_classifier(ifs, n, gamma);

    CHECK(forward(net, {0.5}) < 0.0);
    // Deep interior point of a level-3 cell.
    Vec inside{1.0 / 54.0};
    REQUIRE(ifs.margin_membership(inside, n, gamma) == MarginResult::InsideWithMargin);
    CHECK(forward(net, inside) > 0.0);

    VerificationReport report = verify_classifier(net, ifs, n, gamma, 4000, 123);
    CHECK(report.perfect());
    CHECK(report.pos_total + report.neg_total + report.boundary_skipped == 4000);
}

TEST_CASE("verification counts a bad net") {
    auto ifs = builtin_ifs("cantor1d");
    LayeredNet constant_one;
    LayeredNet::Layer l;
    l.rows = 1;
    l.cols = 1;
    l.w = {0.0};
    l.b = {1.0};
    constant_one.layers = {l};
    VerificationReport report = verify_classifier(constant_one, ifs, 2, 0.01, 2000, 5);
    CHECK(report.neg_correct == 0);
    CHECK(report.pos_correct == report.pos_total);
    CHECK(report.pos_total + report.neg_total + report.boundary_skipped == 2000);
}

TEST_CASE("blocked classifier shapes") {
    auto c1 = builtin_ifs("cantor1d");
    LayeredNet b = build_blocked_classifier(c1, 4, 2, 0.005);
    CHECK(b.depth() == 6);      // 2*(4/2)+2
    CHECK(b.max_width() == 20); // 5d r^2

    LayeredNet s1 = build_blocked_classifier(c1, 4, 1, 0.005);
    CHECK(s1.depth() == 10); // 2n+2 variant at s=1
    CHECK(s1.max_width() == 10);

    // Residual level: one extra layer pair beyond the divisible-case depth.
    LayeredNet r = build_blocked_classifier(c1, 5, 2, 0.002);
    CHECK(r.depth() == 7);
    CHECK(r.max_width() == 20);

    CHECK_THROWS_AS(build_blocked_classifier(c1, 4, 5, 0.005), InvalidArgument);
}

TEST_CASE("blocked classifier agrees with the exact classifier in sign") {
    Rng rng(13);
    auto ifs = builtin_ifs("cantor1d");
    const int n = 4;
    const double gamma = 0.25 * ifs.margin_cap(n);
    LayeredNet exact = build_exact_classifier(ifs, n, gamma);
    LayeredNet blocked = build_blocked_classifier(ifs, n, 2, gamma);
    LayeredNet residual = build_blocked_classifier(ifs, 5, 2, 0.25 * ifs.margin_cap(5));
    LayeredNet exact5 = build_exact_classifier(ifs, 5, 0.25 * ifs.margin_cap(5));
    int compared = 0;
    for (int it = 0; it < 10000; ++it) {
        Vec x{rng.uniform01()};
        if (ifs.near_membership(x, n, gamma) && !ifs.membership(x, n)) continue;
        if (ifs.membership(x, n) &&
            ifs.margin_membership(x, n, gamma) != MarginResult::InsideWithMargin)
            continue;
        CHECK((forward(exact, x) >= 0.0) == (forward(blocked, x) >= 0.0));
        ++compared;
    }
    CHECK(compared > 8000);
    for (int it = 0; it < 3000; ++it) {
        Vec x{rng.uniform01()};
        const double g5 = 0.25 * ifs.margin_cap(5);
        if (ifs.near_membership(x, 5, g5) && !ifs.membership(x, 5)) continue;
        if (ifs.membership(x, 5) &&
            ifs.margin_membership(x, 5, g5) != MarginResult::InsideWithMargin)
            continue;
        CHECK((forward(exact5, x) >= 0.0) == (forward(residual, x) >= 0.0));
    }
}

TEST_CASE("blocked classifier verifies on a 2-D system") {
    auto ifs = builtin_ifs("cantor2d");
    const double gamma = 0.25 * ifs.margin_cap(4);
    LayeredNet net = build_blocked_classifier(ifs, 4, 2, gamma);
    CHECK(net.depth() == 6);
    CHECK(net.max_width() == 5 * 2 * 16);
    VerificationReport report = verify_classifier(net, ifs, 4, gamma, 4000, 7);
    CHECK(report.perfect());
}

TEST_CASE("gain robustness: N and 10N classifiers agree in sign") {
    Rng rng(17);
    auto ifs = builtin_ifs("cantor1d");
    const int n = 3;
    const double gamma = 0.25 * ifs.margin_cap(n);
    const double N = choose_gain(1, gamma, ifs.separation());
    LayeredNet a = build_exact_classifier(ifs, n, gamma, N);
    LayeredNet b = build_exact_classifier(ifs, n, gamma, 10.0 * N);
    for (int it = 0; it < 10000; ++it) {
        Vec x{rng.uniform01()};
        if (ifs.near_membership(x, n, gamma) && !ifs.membership(x, n)) continue;
        if (ifs.membership(x, n) &&
            ifs.margin_membership(x, n, gamma) != MarginResult::InsideWithMargin)
            continue;
        CHECK((forward(a, x) >= 0.0) == (forward(b, x) >= 0.0));
    }
}

TEST_CASE("coarse classifier separates at its own level") {
    auto ifs = builtin_ifs("cantor1d");
    const int n = 5, j = 2;
    const double gamma = 0.25 * ifs.margin_cap(n);
    LayeredNet net = build_coarse_classifier(ifs, n, j, 1, gamma);
    CHECK(net.depth() == 2 * j + 2);
    // K_j members with margin are positive, complement of K_j negative.
    Rng rng(19);
    for (int it = 0; it < 2000; ++it) {
        Vec x{rng.uniform01()};
        if (!ifs.membership(x, j) && !ifs.near_membership(x, j, gamma))
            CHECK(forward(net, x) < 0.0);
        if (ifs.membership(x, j) &&
            ifs.margin_membership(x, j, gamma) == MarginResult::InsideWithMargin)
            CHECK(forward(net, x) > 0.0);
    }
    CHECK_THROWS_AS(build_coarse_classifier(ifs, 5, 6, 1, gamma), InvalidArgument);
}

TEST_CASE("coarse classifier error tracks 1 - P(j)") {
    // With all negative mass below level j the truncated classifier errs on
    // exactly the within-K_j negatives: error about 1 - P(j).
    auto ifs = builtin_ifs("cantor1d");
    const int n = 5, j = 2;
    ApproximationCurve coarse({0.25, 0.25, 0.25, 0.25, 0.0});
    const double gamma = 0.25 * ifs.margin_cap(n);
    FractalDistribution dist(ifs, n, gamma, coarse);
    LayeredNet net = build_coarse_classifier(ifs, n, j, 1, gamma);
    Dataset ds = dist.sample_dataset(100000, 3);
    int wrong = 0;
    for (const auto& s : ds.samples)
        if ((forward(net, s.x) >= 0.0 ? 1 : -1) != s.y) ++wrong;
    const double err = double(wrong) / double(ds.size());
    CHECK(err <= 1.0 - coarse.P(j) + 0.01);
    // With P(2) = 1 no negative mass sits inside K_2 and the error vanishes.
    ApproximationCurve half({0.5, 0.5, 0.0, 0.0, 0.0});
    FractalDistribution dist2(ifs, n, gamma, half);
    Dataset ds2 = dist2.sample_dataset(100000, 4);
    wrong = 0;
    for (const auto& s : ds2.samples)
        if ((forward(net, s.x) >= 0.0 ? 1 : -1) != s.y) ++wrong;
    CHECK(double(wrong) / double(ds2.size()) <= 0.005);
}

TEST_CASE("gain below the documented floor is rejected") {
    auto ifs = builtin_ifs("cantor1d");
    CHECK_THROWS_AS(build_exact_classifier(ifs, 3, 0.005, 2.0), GainTooSmall);
    CHECK_THROWS_AS(build_fold_block(ifs, 1.0), GainTooSmall);
    CHECK_THROWS_AS(build_gap_block(ifs, 0.01, 50.0), GainTooSmall);
}
