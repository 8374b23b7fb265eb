#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "tslab/fields.hpp"

using namespace tslab;

namespace {

std::shared_ptr<const SmoothedDensitySetup> ellipse_vm_setup() {
    static auto s = std::make_shared<const SmoothedDensitySetup>(
        ManifoldChart::ellipse(1.0, 2.0), DataDensity::von_mises(1.0, 0.0), SmoothMode::VE);
    return s;
}

std::shared_ptr<const SmoothedDensitySetup> circle_uniform_setup() {
    static auto s = std::make_shared<const SmoothedDensitySetup>(
        ManifoldChart::circle(1.0), DataDensity::uniform(), SmoothMode::VE);
    return s;
}

Vec tube_point(const ManifoldChart& chart, double u, double r) {
    ChartJet j = chart.jet(u);
    double sp = norm(j.d1);
    return {j.p[0] + r * j.d1[1] / sp, j.p[1] - r * j.d1[0] / sp};
}

std::vector<Vec> tube_grid(const ManifoldChart& chart, int n_angles = 32) {
    std::vector<Vec> grid;
    for (int i = 0; i < n_angles; ++i)
        for (double frac : {-0.5, 0.0, 0.5})
            grid.push_back(tube_point(chart, two_pi * i / n_angles,
                                      frac * chart.tube_radius()));
    return grid;
}

// numeric curl in 2-D: d1 s2 - d2 s1 by central differences
double curl2(const ScoreField& f, const Vec& x, double sigma, double h = 1e-4) {
    Vec xp = x, xm = x;
    xp[0] += h;
    xm[0] -= h;
    double d1s2 = (f(xp, sigma)[1] - f(xm, sigma)[1]) / (2 * h);
    xp = x;
    xm = x;
    xp[1] += h;
    xm[1] -= h;
    double d2s1 = (f(xp, sigma)[0] - f(xm, sigma)[0]) / (2 * h);
    return d1s2 - d2s1;
}

}  // namespace

TEST_CASE("exact_field wraps score_exact") {
    auto setup = ellipse_vm_setup();
    ScoreField f = exact_field(setup);
    CHECK(f.is_gradient);
    CHECK(f.error_class.kind == ErrorClass::Kind::none);
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        double sigma = 0.02 + 0.2 * unif(rng);
        Vec x = tube_point(setup->chart(), two_pi * unif(rng),
                           (2 * unif(rng) - 1) * 0.4 * setup->chart().tube_radius());
        CHECK(norm(sub(f(x, sigma), setup->score(x, sigma))) == 0.0);
    }
    // symmetry: no tangential component on the symmetric circle setup
    ScoreField c = exact_field(circle_uniform_setup());
    CHECK(std::fabs(c({1.2, 0.0}, 0.1)[1]) < 1e-10);
    // self-consistency through field_error
    CHECK(field_error(c, *circle_uniform_setup(), tube_grid(ManifoldChart::circle(1.0)), 0.1) <
          1e-6);
}

TEST_CASE("leading_field") {
    auto circ = ManifoldChart::circle(1.0);
    ScoreField f = leading_field(circ);
    Vec v = f({1.5, 0.0}, 0.1);
    CHECK(v[0] == doctest::Approx(-50.0));
    CHECK(v[1] == doctest::Approx(0.0));
    Vec on = f(circ.point(2.0), 0.1);
    CHECK(norm(on) < 1e-9);

    // O(1), not o(1): sup deviation from the exact field stays bounded
    auto setup = circle_uniform_setup();
    auto grid = tube_grid(circ);
    double prev = 0.0;
    for (double sigma : {0.1, 0.05, 0.02}) {
        double err = field_error(f, *setup, grid, sigma);
        CHECK(err < 5.0);
        CHECK(err > 1e-3);
        prev = err;
    }
    (void)prev;
}

TEST_CASE("perturb_field") {
    auto setup = circle_uniform_setup();
    ScoreField base = exact_field(setup);

    ScoreField zero = perturb_field(base, ErrorClass::Kind::rotational, 0.0, -1.0);
    Vec x = {1.1, 0.3};
    CHECK(norm(sub(zero(x, 0.1), base(x, 0.1))) == 0.0);

    // at the box corner |G| = 1, so the perturbation magnitude is c*sigma^beta
    ScoreField rot = perturb_field(base, ErrorClass::Kind::rotational, 0.5, -1.0);
    Vec corner = {4.0, 4.0};
    Vec diff = sub(rot(corner, 0.1), base(corner, 0.1));
    CHECK(norm(diff) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK_FALSE(rot.is_gradient);

    CHECK_THROWS_AS(perturb_field(base, ErrorClass::Kind::gradient, 1.0, -2.0), InvalidBeta);
    CHECK_THROWS_AS(perturb_field(base, ErrorClass::Kind::gradient, 1.0, -2.5), InvalidBeta);
}

TEST_CASE("rotational generator is divergence free") {
    auto setup = circle_uniform_setup();
    ScoreField base = exact_field(setup);
    ScoreField rot = perturb_field(base, ErrorClass::Kind::rotational, 1.0, 0.0);
    const double h = 1e-5;
    for (const Vec& x : tube_grid(setup->chart(), 8)) {
        double div = 0.0;
        for (int k = 0; k < 2; ++k) {
            Vec xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            Vec dp = sub(rot(xp, 0.1), base(xp, 0.1));
            Vec dm = sub(rot(xm, 0.1), base(xm, 0.1));
            div += (dp[k] - dm[k]) / (2 * h);
        }
        CHECK(std::fabs(div) < 1e-6);
    }
}

TEST_CASE("error-class realization: field_error / sigma^beta -> c * sup|G|") {
    auto setup = circle_uniform_setup();
    ScoreField base = exact_field(setup);
    const double c = 0.5, beta = -1.0;
    ScoreField rot = perturb_field(base, ErrorClass::Kind::rotational, c, beta);
    auto grid = tube_grid(setup->chart(), 64);
    grid.push_back({4.0, 4.0});  // corner realizes sup|G| = 1
    for (double sigma : {0.1, 0.05, 0.02}) {
        double ratio = field_error(rot, *setup, grid, sigma) / std::pow(sigma, beta);
        CHECK(ratio == doctest::Approx(c).epsilon(1e-4));
    }
}

TEST_CASE("designed_field structure") {
    auto chart = ManifoldChart::circle(1.0);
    ScoreField f = designed_field(chart, DataDensity::uniform());
    CHECK(f.is_gradient);
    CHECK(f.error_class.kind == ErrorClass::Kind::designed);

    // leading component matches the leading field to O(1)
    double sigma = 0.05;
    Vec v = f({1.1, 0.0}, sigma);
    CHECK(std::fabs(v[0] + 0.1 / (sigma * sigma)) < 5.0);
    CHECK(std::fabs(v[1]) < 1e-4);

    // finite on the manifold
    Vec on = f(chart.point(0.9), 0.01);
    CHECK(std::isfinite(on[0]));
    CHECK(std::isfinite(on[1]));
    CHECK(norm(on) < 100.0);

    // targeting the setup's own data density reproduces the exact field's
    // sigma^-2 structure: difference to exact is O(1) while both blow up
    auto setup = ellipse_vm_setup();
    ScoreField g = designed_field(setup->chart(), setup->data());
    Vec x = tube_point(setup->chart(), 0.8, 0.1);
    for (double s : {0.05, 0.02}) {
        Vec diff = sub(g(x, s), setup->score(x, s));
        CHECK(norm(diff) < 10.0);
        CHECK(norm(setup->score(x, s)) > 1.0 / (s * s) * 0.05);
    }
}

TEST_CASE("tamper") {
    auto setup = circle_uniform_setup();
    ScoreField base = exact_field(setup);
    Vec x = {1.1, 0.2};

    ScoreField id = tamper(base, 0.0);
    CHECK(norm(sub(id(x, 0.07), base(x, 0.07))) == 0.0);

    ScoreField stub;
    stub.eval = [](const Vec&, double) { return Vec{100.0, 0.0}; };
    ScoreField t1 = tamper(stub, 1.0);
    Vec v = t1({0.0, 0.0}, 0.01);
    CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(v[1] == 0.0);

    // alpha = 2 gives the sigma^2 * s training-target scaling
    ScoreField t2 = tamper(base, 2.0);
    double sigma = 0.05;
    Vec expected = scale(sigma * sigma, base(x, sigma));
    CHECK(norm(sub(t2(x, sigma), expected)) == 0.0);
}

TEST_CASE("guide") {
    auto setup = circle_uniform_setup();
    ScoreField base = exact_field(setup);
    Vec x = {0.9, 0.1};

    GuidancePotential zero{[](const Vec&) { return 0.0; }, 3.0, "zero"};
    CHECK(norm(sub(guide(base, zero)(x, 0.1), base(x, 0.1))) < 1e-9);

    GuidancePotential lin{[](const Vec& p) { return p[0]; }, 3.0, "x1"};
    Vec g = guide(base, lin)(x, 0.1);
    Vec b = base(x, 0.1);
    CHECK(g[0] - b[0] == doctest::Approx(-1.0).epsilon(1e-8));
    CHECK(g[1] - b[1] == doctest::Approx(0.0).epsilon(1e-8));

    // guidance must not be tampered: order of composition matters
    Vec a1 = guide(tamper(base, 1.0), lin)(x, 0.1);
    Vec a2 = tamper(guide(base, lin), 1.0)(x, 0.1);
    CHECK(norm(sub(a1, a2)) > 0.1);

    // clipping bounds the potential
    GuidancePotential clipped{[](const Vec& p) { return 100.0 * p[0]; }, 3.0, "steep"};
    CHECK(clipped({1.0, 0.0}) == 3.0);
    CHECK(clipped({-1.0, 0.0}) == -3.0);
}

TEST_CASE("gradient flag honesty via numeric curl") {
    auto setup = ellipse_vm_setup();
    double sigma = 0.3;
    Vec x = tube_point(setup->chart(), 1.1, 0.1);

    ScoreField ex = exact_field(setup);
    CHECK(std::fabs(curl2(ex, x, sigma)) < 1e-4 * norm(ex(x, sigma)));

    ScoreField des = designed_field(setup->chart(), DataDensity::uniform());
    CHECK(std::fabs(curl2(des, x, sigma)) < 1e-4 * norm(des(x, sigma)));

    ScoreField rot = perturb_field(ex, ErrorClass::Kind::rotational, 0.5, 0.0);
    double expected_curl = 2.0 * 0.5 / (4.0 * std::sqrt(2.0));
    CHECK(curl2(rot, x, sigma) == doctest::Approx(expected_curl).epsilon(1e-2));
}

TEST_CASE("field_error basics") {
    auto setup = circle_uniform_setup();
    auto grid = tube_grid(setup->chart());
    CHECK(field_error(exact_field(setup), *setup, grid, 0.1) < 1e-6);
    CHECK_THROWS_AS(field_error(exact_field(setup), *setup, {}, 0.1), EmptyInput);
}
