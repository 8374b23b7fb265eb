#include <doctest.h>

#include <cmath>
#include <random>

#include "tslab/manifold.hpp"

using namespace tslab;

TEST_CASE("chart_point evaluates the parameterization") {
    auto ell = ManifoldChart::ellipse(1.0, 2.0);
    Vec p = ell.point(0.0);
    CHECK(p[0] == doctest::Approx(1.0));
    CHECK(p[1] == doctest::Approx(0.0));

    auto circ = ManifoldChart::circle(1.0);
    Vec q = circ.point(std::numbers::pi / 2);
    CHECK(q[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(q[1] == doctest::Approx(1.0));

    Vec r = ell.point(std::numbers::pi / 4);
    CHECK(r[0] == doctest::Approx(std::sqrt(2.0) / 2));
    CHECK(r[1] == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("chart is 2*pi periodic") {
    auto ell = ManifoldChart::ellipse(1.0, 2.0);
    for (double h : {1e-3, 1e-6, 1e-9}) {
        Vec a = ell.point(0.0);
        Vec b = ell.point(two_pi - h);
        CHECK(norm(sub(a, b)) < 3.0 * h);
    }
}

TEST_CASE("chart_jet gives exact derivatives") {
    auto circ = ManifoldChart::circle(1.0);
    ChartJet j = circ.jet(0.0);
    CHECK(j.p[0] == doctest::Approx(1.0));
    CHECK(j.d1[1] == doctest::Approx(1.0));
    CHECK(j.d2[0] == doctest::Approx(-1.0));

    auto ell = ManifoldChart::ellipse(1.0, 2.0);
    ChartJet k = ell.jet(std::numbers::pi / 2);
    CHECK(k.p[1] == doctest::Approx(2.0));
    CHECK(k.d1[0] == doctest::Approx(-1.0));
    CHECK(k.d2[1] == doctest::Approx(-2.0));
}

TEST_CASE("chart_jet matches central differences at O(h^2)") {
    const double h = 1e-5;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(0.0, two_pi);
    for (const auto& chart : {ManifoldChart::circle(1.5), ManifoldChart::ellipse(1.0, 2.0),
                              ManifoldChart::embedded_circle(3)}) {
        for (int t = 0; t < 20; ++t) {
            double u = unif(rng);
            ChartJet j = chart.jet(u);
            Vec fd = scale(1.0 / (2 * h), sub(chart.point(u + h), chart.point(u - h)));
            CHECK(norm(sub(fd, j.d1)) < 1e-8);
            Vec fd2 = sub(add(chart.point(u + h), chart.point(u - h)), scale(2.0, chart.point(u)));
            CHECK(norm(sub(scale(1.0 / (h * h), fd2), j.d2)) < 1e-4);
        }
    }
}

TEST_CASE("volume_element equals the speed") {
    auto ell = ManifoldChart::ellipse(1.0, 2.0);
    CHECK(ell.speed(0.0) == doctest::Approx(2.0));
    CHECK(ell.speed(std::numbers::pi / 2) == doctest::Approx(1.0));
    auto circ = ManifoldChart::circle(1.0);
    for (double u : {0.0, 1.0, 3.0, 6.0}) CHECK(circ.speed(u) == doctest::Approx(1.0));
    // agrees with |Phi'| from the jet exactly
    for (double u : {0.3, 1.7, 4.4}) {
        ChartJet j = ell.jet(u);
        CHECK(ell.speed(u) == doctest::Approx(norm(j.d1)).epsilon(1e-15));
    }
}

TEST_CASE("project: axis-symmetric cases") {
    auto circ = ManifoldChart::circle(1.0);
    Projection p = circ.project({1.5, 0.0});
    CHECK(p.u_star == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(p.foot[0] == doctest::Approx(1.0));
    CHECK(p.half_sq_dist == doctest::Approx(0.125));

    auto ell = ManifoldChart::ellipse(1.0, 2.0);
    Projection q = ell.project({0.0, 1.9});
    CHECK(q.u_star == doctest::Approx(std::numbers::pi / 2));
    CHECK(q.foot[1] == doctest::Approx(2.0));
    CHECK(q.half_sq_dist == doctest::Approx(0.005));
}

TEST_CASE("project: circle center is degenerate") {
    auto circ = ManifoldChart::circle(1.0);
    CHECK_THROWS_AS(circ.project({0.0, 0.0}), DegenerateProjection);
}

TEST_CASE("project matches a brute-force angle scan") {
    auto ell = ManifoldChart::ellipse(1.0, 2.0);
    Vec x = {0.9, 0.8};
    // exhaustive minimization oracle over 1e6 angles
    double best = 1e300, bu = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
        double u = two_pi * i / n;
        Vec p = ell.point(u);
        double d2 = (x[0] - p[0]) * (x[0] - p[0]) + (x[1] - p[1]) * (x[1] - p[1]);
        if (d2 < best) {
            best = d2;
            bu = u;
        }
    }
    Projection pr = ell.project(x);
    CHECK(pr.u_star == doctest::Approx(bu).epsilon(1e-4));
    CHECK(pr.half_sq_dist == doctest::Approx(0.5 * best).epsilon(1e-8));
}

TEST_CASE("in_tube") {
    auto circ = ManifoldChart::circle(1.0);
    CHECK(circ.in_tube({1.05, 0.0}, 0.1));
    CHECK_FALSE(circ.in_tube({2.0, 0.0}, 0.1));
    auto ell = ManifoldChart::ellipse(1.0, 2.0);
    CHECK_FALSE(ell.in_tube({0.0, 0.0}, 0.5));  // nearest points (+-1, 0), distance 1
}

TEST_CASE("projection invariants on random tube points") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (const auto& chart : {ManifoldChart::circle(1.0), ManifoldChart::ellipse(1.0, 2.0)}) {
        double eps = chart.tube_radius();
        for (int t = 0; t < 1000; ++t) {
            double u = two_pi * unif(rng);
            ChartJet j = chart.jet(u);
            // offset along the curve normal, staying inside the tube
            double r = (2.0 * unif(rng) - 1.0) * 0.95 * eps;
            double sp = norm(j.d1);
            Vec x = {j.p[0] + r * j.d1[1] / sp, j.p[1] - r * j.d1[0] / sp};
            Projection pr = chart.project(x);

            // first-order optimality
            ChartJet js = chart.jet(pr.u_star);
            Vec res = sub(x, pr.foot);
            double ortho = std::fabs(dot(res, js.d1));
            CHECK(ortho <= 1e-10 * norm(js.d1) * std::max(norm(res), 1e-30) + 1e-18);

            // idempotence
            Projection pr2 = chart.project(pr.foot);
            CHECK(pr2.half_sq_dist <= 1e-18);
        }
    }
}

TEST_CASE("gradient identity: grad d_M(x) = x - P_M(x)") {
    auto ell = ManifoldChart::ellipse(1.0, 2.0);
    const double h = 1e-5;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        double u = two_pi * unif(rng);
        ChartJet j = ell.jet(u);
        double r = (2.0 * unif(rng) - 1.0) * 0.5 * ell.tube_radius();
        double sp = norm(j.d1);
        Vec x = {j.p[0] + r * j.d1[1] / sp, j.p[1] - r * j.d1[0] / sp};
        Vec expected = sub(x, ell.project(x).foot);
        if (norm(expected) < 1e-3) continue;  // relative check needs a scale
        Vec grad(2);
        for (int k = 0; k < 2; ++k) {
            Vec xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            grad[k] = (ell.project(xp).half_sq_dist - ell.project(xm).half_sq_dist) / (2 * h);
        }
        CHECK(norm(sub(grad, expected)) / norm(expected) < 1e-4);
    }
}

TEST_CASE("tube radius defaults sit inside the reach") {
    CHECK(ManifoldChart::ellipse(1.0, 2.0).tube_radius() == doctest::Approx(0.45));
    CHECK(ManifoldChart::circle(2.0).tube_radius() == doctest::Approx(1.8));
    CHECK(ManifoldChart::embedded_circle(4).tube_radius() == doctest::Approx(0.9));
}

TEST_CASE("outside-tube projection throws") {
    auto ell = ManifoldChart::ellipse(1.0, 2.0);
    CHECK_THROWS_AS(ell.project({3.5, 0.0}), OutsideTube);
}
