#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "tslab/common.hpp"
#include "tslab/smoothed.hpp"

namespace tslab {

struct ErrorClass {
    enum class Kind { none, gradient, rotational, designed };
    Kind kind = Kind::none;
    double beta = 0.0;
    double c = 0.0;
};

/// A score field (x, sigma) -> R^d with error-class metadata.
struct ScoreField {
    std::function<Vec(const Vec&, double)> eval;
    ErrorClass error_class;
    bool is_gradient = true;
    std::string descriptor;

    Vec operator()(const Vec& x, double sigma) const { return eval(x, sigma); }
};

/// Bounded guidance potential; output clipped to [-clip_level, clip_level].
struct GuidancePotential {
    std::function<double(const Vec&)> base;
    double clip_level = 3.0;
    std::string descriptor;

    double operator()(const Vec& x) const {
        return std::clamp(base(x), -clip_level, clip_level);
    }
};

inline ScoreField exact_field(std::shared_ptr<const SmoothedDensitySetup> setup) {
    ScoreField f;
    f.eval = [setup](const Vec& x, double sigma) { return setup->score(x, sigma); };
    f.error_class = {ErrorClass::Kind::none, 0.0, 0.0};
    f.is_gradient = true;
    f.descriptor = "exact";
    return f;
}

/// Leading-order field -(x - P_M(x)) / sigma^2, the gradient of -d_M/sigma^2.
inline ScoreField leading_field(ManifoldChart chart) {
    ScoreField f;
    f.eval = [chart](const Vec& x, double sigma) {
        Projection pr = chart.project(x);
        return scale(-1.0 / (sigma * sigma), sub(x, pr.foot));
    };
    f.error_class = {ErrorClass::Kind::gradient, 0.0, 1.0};  // O(1) deviation
    f.is_gradient = true;
    f.descriptor = "leading";
    return f;
}

/// Adds c * sigma^beta * G(x) with a fixed unit-normalized generator G.
///
/// gradient:   G = grad of sin(x1)*cos(x2), sup-norm 1 on any box around 0.
/// rotational: G = (-x2, x1, 0, ...) / (box_half * sqrt(2)), divergence-free,
///             sup-norm 1 on the clipping box [-box_half, box_half]^d.
inline ScoreField perturb_field(ScoreField base, ErrorClass::Kind kind, double c, double beta,
                                double box_half = 4.0) {
    if (!(beta > -2.0)) throw InvalidBeta("perturbation exponent must satisfy beta > -2");
    if (kind != ErrorClass::Kind::gradient && kind != ErrorClass::Kind::rotational)
        throw Error("perturb_field kind must be gradient or rotational");
    ScoreField f;
    double rot_norm = 1.0 / (box_half * std::sqrt(2.0));
    auto inner = base.eval;
    f.eval = [inner, kind, c, beta, rot_norm](const Vec& x, double sigma) {
        Vec v = inner(x, sigma);
        double amp = c * std::pow(sigma, beta);
        if (kind == ErrorClass::Kind::gradient) {
            v[0] += amp * std::cos(x[0]) * std::cos(x[1]);
            v[1] -= amp * std::sin(x[0]) * std::sin(x[1]);
        } else {
            v[0] -= amp * rot_norm * x[1];
            v[1] += amp * rot_norm * x[0];
        }
        return v;
    };
    f.error_class = {kind, beta, c};
    f.is_gradient = base.is_gradient && (kind == ErrorClass::Kind::gradient || c == 0.0);
    f.descriptor = base.descriptor + "+perturb(" +
                   (kind == ErrorClass::Kind::gradient ? "gradient" : "rotational") +
                   ",c=" + std::to_string(c) + ",beta=" + std::to_string(beta) + ")";
    return f;
}

/// Gradient field steering the small-sigma limit to an arbitrary on-manifold
/// target: grad of -d_M(x)/sigma^2 + log target(u*) - 0.5*log|H(u*, x)|,
/// by central differences of that scalar.
inline ScoreField designed_field(ManifoldChart chart, DataDensity target, int proj_grid = 128) {
    ScoreField f;
    auto scalar = [chart, target, proj_grid](const Vec& x, double sigma) {
        ManifoldChart::Closest cl = chart.closest(x, proj_grid);
        if (cl.degenerate) throw DegenerateProjection("designed_field near the medial axis");
        double hhat = curvature_matrix(chart, cl.u, x);
        return -0.5 * cl.dist * cl.dist / (sigma * sigma) + target.log_density(cl.u) -
               0.5 * std::log(std::fabs(hhat));
    };
    f.eval = [scalar](const Vec& x, double sigma) {
        double h = 1e-6 * std::max(1.0, norm(x));
        Vec g(x.size());
        Vec xp = x;
        for (std::size_t k = 0; k < x.size(); ++k) {
            xp[k] = x[k] + h;
            double fp = scalar(xp, sigma);
            xp[k] = x[k] - h;
            double fm = scalar(xp, sigma);
            xp[k] = x[k];
            g[k] = (fp - fm) / (2.0 * h);
        }
        return g;
    };
    f.error_class = {ErrorClass::Kind::designed, 0.0, 1.0};
    f.is_gradient = true;
    f.descriptor = "designed";
    return f;
}

/// Tampered score: sigma^alpha * base(x, sigma).
inline ScoreField tamper(ScoreField base, double alpha) {
    ScoreField f = base;
    auto inner = base.eval;
    f.eval = [inner, alpha](const Vec& x, double sigma) {
        Vec v = inner(x, sigma);
        double a = std::pow(sigma, alpha);
        for (double& c : v) c *= a;
        return v;
    };
    f.descriptor = "tamper(" + base.descriptor + ",alpha=" + std::to_string(alpha) + ")";
    return f;
}

/// Posterior drift: base(x, sigma) - grad v(x), guidance gradient by central
/// differences of the clipped potential. The guidance term is never tampered.
inline ScoreField guide(ScoreField base, GuidancePotential v) {
    ScoreField f = base;
    auto inner = base.eval;
    f.eval = [inner, v](const Vec& x, double sigma) {
        Vec g = inner(x, sigma);
        const double h = 1e-6;
        Vec xp = x;
        for (std::size_t k = 0; k < x.size(); ++k) {
            xp[k] = x[k] + h;
            double fp = v(xp);
            xp[k] = x[k] - h;
            double fm = v(xp);
            xp[k] = x[k];
            g[k] -= (fp - fm) / (2.0 * h);
        }
        return g;
    };
    f.descriptor = "guide(" + base.descriptor + "," + v.descriptor + ")";
    return f;
}

/// Grid lower bound on the sup-norm score error E_sigma over K.
inline double field_error(const ScoreField& field, const SmoothedDensitySetup& setup,
                          const std::vector<Vec>& grid, double sigma) {
    if (grid.empty()) throw EmptyInput("field_error requires a nonempty grid");
    double worst = 0.0;
    for (const Vec& x : grid) {
        Vec diff = sub(field(x, sigma), setup.score(x, sigma));
        worst = std::max(worst, norm(diff));
    }
    return worst;
}

}  // namespace tslab
