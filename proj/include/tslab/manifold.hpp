#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "tslab/common.hpp"

namespace tslab {

enum class ChartKind { circle, ellipse, embedded_circle };

/// Value of the chart map together with its first two u-derivatives.
struct ChartJet {
    Vec p;   // Phi(u)
    Vec d1;  // Phi'(u)
    Vec d2;  // Phi''(u)
};

struct Projection {
    double u_star;
    Vec foot;             // Phi(u_star)
    double half_sq_dist;  // d_M(x) = 0.5 * |x - foot|^2
};

/// One-dimensional embedded curve with a single 2*pi-periodic chart.
///
/// Supported shapes: a planar circle of radius a, a planar ellipse with
/// semi-axes (a, b), and an isometric linear embedding of the unit circle
/// into ambient dimension d >= 3 (codimension d - 1 > 1).
class ManifoldChart {
  public:
    static ManifoldChart circle(double a) {
        ManifoldChart c;
        c.kind_ = ChartKind::circle;
        c.a_ = a;
        c.b_ = a;
        c.dim_ = 2;
        c.eps_ = 0.9 * a;
        return c;
    }

    static ManifoldChart ellipse(double a, double b) {
        ManifoldChart c;
        c.kind_ = ChartKind::ellipse;
        c.a_ = a;
        c.b_ = b;
        c.dim_ = 2;
        double lo = std::min(a, b), hi = std::max(a, b);
        c.eps_ = 0.9 * lo * lo / hi;  // inside the reach
        return c;
    }

    /// Unit circle pushed into R^d by a fixed orthonormal 2-frame.
    static ManifoldChart embedded_circle(int ambient_dim) {
        if (ambient_dim < 3) throw Error("embedded_circle requires ambient dim >= 3");
        ManifoldChart c;
        c.kind_ = ChartKind::embedded_circle;
        c.a_ = 1.0;
        c.b_ = 1.0;
        c.dim_ = ambient_dim;
        c.eps_ = 0.9;
        c.q1_.assign(ambient_dim, 0.0);
        c.q1_[0] = 1.0;
        c.q2_.assign(ambient_dim, 0.0);
        double inv = 1.0 / std::sqrt(double(ambient_dim - 1));
        for (int i = 1; i < ambient_dim; ++i) c.q2_[i] = inv;
        return c;
    }

    ChartKind kind() const { return kind_; }
    int ambient_dim() const { return dim_; }
    double tube_radius() const { return eps_; }
    double semi_axis_a() const { return a_; }
    double semi_axis_b() const { return b_; }

    Vec point(double u) const {
        u = wrap_angle(u);
        double cu = std::cos(u), su = std::sin(u);
        if (kind_ == ChartKind::embedded_circle) {
            Vec p(dim_);
            for (int i = 0; i < dim_; ++i) p[i] = cu * q1_[i] + su * q2_[i];
            return p;
        }
        return {a_ * cu, b_ * su};
    }

    ChartJet jet(double u) const {
        u = wrap_angle(u);
        double cu = std::cos(u), su = std::sin(u);
        if (kind_ == ChartKind::embedded_circle) {
            ChartJet j;
            j.p.resize(dim_);
            j.d1.resize(dim_);
            j.d2.resize(dim_);
            for (int i = 0; i < dim_; ++i) {
                j.p[i] = cu * q1_[i] + su * q2_[i];
                j.d1[i] = -su * q1_[i] + cu * q2_[i];
                j.d2[i] = -j.p[i];
            }
            return j;
        }
        return {{a_ * cu, b_ * su}, {-a_ * su, b_ * cu}, {-a_ * cu, -b_ * su}};
    }

    /// Volume element sqrt(det g(u)) = |Phi'(u)|.
    double speed(double u) const {
        u = wrap_angle(u);
        if (kind_ == ChartKind::embedded_circle) return 1.0;
        double su = std::sin(u), cu = std::cos(u);
        return std::sqrt(a_ * a_ * su * su + b_ * b_ * cu * cu);
    }

    double max_speed() const { return std::max(a_, b_); }

    struct Closest {
        double u;
        double dist;
        bool degenerate;
    };

    /// Global closest point by dense grid scan plus Newton refinement on
    /// u -> 0.5*|x - Phi(u)|^2. Never throws; reports degeneracy instead.
    Closest closest(const Vec& x, int grid = 1024) const {
        const double h = two_pi / grid;
        double best = std::numeric_limits<double>::infinity();
        int besti = 0;
        std::vector<double> d2(grid);
        for (int i = 0; i < grid; ++i) {
            double u = i * h;
            double cu = std::cos(u), su = std::sin(u);
            double s;
            if (kind_ == ChartKind::embedded_circle) {
                s = 0.0;
                for (int k = 0; k < dim_; ++k) {
                    double diff = x[k] - (cu * q1_[k] + su * q2_[k]);
                    s += diff * diff;
                }
            } else {
                double dx = x[0] - a_ * cu, dy = x[1] - b_ * su;
                s = dx * dx + dy * dy;
            }
            d2[i] = s;
            if (s < best) {
                best = s;
                besti = i;
            }
        }

        // Medial-axis proximity: a second grid-local minimum with nearly the
        // same value but a well-separated angle.
        bool degenerate = false;
        for (int i = 0; i < grid && !degenerate; ++i) {
            if (i == besti) continue;
            double prev = d2[(i + grid - 1) % grid], next = d2[(i + 1) % grid];
            if (d2[i] <= prev && d2[i] <= next && std::fabs(d2[i] - best) < 1e-9) {
                double du = std::fabs(i * h - besti * h);
                du = std::min(du, two_pi - du);
                if (du > 0.1) degenerate = true;
            }
        }

        double u = refine(x, besti * h, h);
        Vec foot = point(u);
        return {u, norm(sub(x, foot)), degenerate};
    }

    /// Closest-point projection restricted to the tubular neighborhood.
    Projection project(const Vec& x, int grid = 1024) const {
        Closest c = closest(x, grid);
        if (c.degenerate) throw DegenerateProjection("projection ambiguous near the medial axis");
        if (c.dist >= eps_) throw OutsideTube("point outside the tubular neighborhood");
        Vec foot = point(c.u);
        return {c.u, foot, 0.5 * c.dist * c.dist};
    }

    bool in_tube(const Vec& x, double eps) const { return closest(x).dist < eps; }

  private:
    double refine(const Vec& x, double u, double grid_h) const {
        // Newton on f(u) = 0.5*|x - Phi(u)|^2; f' = -<x - Phi, Phi'>,
        // f'' = <Phi', Phi'> - <x - Phi, Phi''>.
        for (int it = 0; it < 60; ++it) {
            ChartJet j = jet(u);
            Vec r = sub(x, j.p);
            double f1 = -dot(r, j.d1);
            double f2 = dot(j.d1, j.d1) - dot(r, j.d2);
            if (f2 <= 1e-14) break;  // flat or concave; keep the grid value
            double step = f1 / f2;
            step = std::clamp(step, -grid_h, grid_h);
            u -= step;
            if (std::fabs(step) < 1e-12) break;
        }
        return wrap_angle(u);
    }

    ChartKind kind_ = ChartKind::circle;
    double a_ = 1.0, b_ = 1.0;
    int dim_ = 2;
    double eps_ = 0.9;
    Vec q1_, q2_;  // orthonormal frame for embedded_circle
};

}  // namespace tslab
