#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "tslab/common.hpp"
#include "tslab/density.hpp"
#include "tslab/manifold.hpp"

namespace tslab {

enum class SmoothMode { VE, VP };

/// Curvature pairing H(u, x) = <Phi'', Phi(u) - x> + <Phi', Phi'>.
/// Scalar for curves; coincides with the metric g(u) when x = Phi(u).
inline double curvature_matrix(const ManifoldChart& chart, double u, const Vec& x) {
    ChartJet j = chart.jet(u);
    return dot(j.d2, sub(j.p, x)) + dot(j.d1, j.d1);
}

struct ExpansionReport {
    double sigma;
    double leading_residual;  // |sigma^2 * log p_sigma(x) + d_M(x)|
    double order1_residual;   // deviation of the Theta(1) block from its limit
};

/// Gaussian-smoothed density p_sigma of an on-manifold data distribution,
/// evaluated by periodic trapezoid quadrature in log space.
///
/// VE smoothing uses gamma(sigma) = 1, VP uses gamma(sigma) = sqrt(1-sigma^2).
/// Immutable after construction; all evaluations are pure.
class SmoothedDensitySetup {
  public:
    SmoothedDensitySetup(ManifoldChart chart, DataDensity data, SmoothMode mode,
                         int quad_nodes = 4096)
        : chart_(std::move(chart)), data_(std::move(data)), mode_(mode), nodes_(quad_nodes) {
        if (quad_nodes < 256 || (quad_nodes & (quad_nodes - 1)) != 0)
            throw Error("quad_nodes must be a power of two >= 256");
        tab_ = make_table(nodes_);
        tab2_ = make_table(2 * nodes_);
    }

    const ManifoldChart& chart() const { return chart_; }
    const DataDensity& data() const { return data_; }
    SmoothMode mode() const { return mode_; }
    int quad_nodes() const { return nodes_; }

    double gamma(double sigma) const {
        return mode_ == SmoothMode::VP ? std::sqrt(1.0 - sigma * sigma) : 1.0;
    }

    /// log p_sigma(x); node-doubling convergence check on every call.
    double log_p(const Vec& x, double sigma) const {
        check_sigma(sigma);
        double v1 = log_p_table(tab_, x, sigma);
        double v2 = log_p_table(tab2_, x, sigma);
        if (std::fabs(v2 - v1) > 1e-6)
            throw QuadratureNotConverged("log_p_sigma quadrature did not converge under node doubling");
        return v2;
    }

    /// Exact score grad log p_sigma(x) as a quadrature ratio. The sum is
    /// restricted to nodes whose Gaussian exponent is within 45 of the
    /// maximum (relative truncation below e^-45), found by a coarse scan.
    Vec score(const Vec& x, double sigma) const {
        check_sigma(sigma);
        const int d = chart_.ambient_dim();
        const int n = nodes_;
        const double g = gamma(sigma);
        const double inv2s2 = 1.0 / (2.0 * sigma * sigma);

        const int stride = n > 256 ? n / 256 : 1;
        const int blocks = n / stride;
        thread_local std::vector<double> coarse_;
        thread_local std::vector<double> num_;
        // Coarse pass: squared distances to every stride-th node.
        double best = std::numeric_limits<double>::infinity();
        coarse_.resize(blocks);
        for (int b = 0; b < blocks; ++b) {
            const double* phi = &tab_.phi[std::size_t(b) * stride * d];
            double s = 0.0;
            for (int k = 0; k < d; ++k) {
                double diff = x[k] - g * phi[k];
                s += diff * diff;
            }
            coarse_[b] = s;
            if (s < best) best = s;
        }
        // Distance slack: sqrt(90)*sigma covers the e^-45 window, plus the
        // within-block variation of the distance to the curve.
        double block_h = two_pi / blocks;
        double margin = std::sqrt(90.0) * sigma + 2.0 * chart_.max_speed() * block_h;
        double thr = std::sqrt(best) + margin;
        double thr2 = thr * thr;

        // Fine pass over active blocks (and their neighbors), streaming
        // max-shifted accumulation of the density and the score numerator.
        double m = -std::numeric_limits<double>::infinity();
        double s0 = 0.0;
        num_.assign(d, 0.0);
        int next = 0;  // next unprocessed fine index, blocks scanned in order
        for (int b = 0; b < blocks; ++b) {
            bool active = coarse_[b] <= thr2 || coarse_[(b + 1) % blocks] <= thr2 ||
                          coarse_[(b + blocks - 1) % blocks] <= thr2;
            if (!active) continue;
            int lo = std::max(next, b * stride);
            int hi = (b + 1) * stride;
            for (int i = lo; i < hi; ++i) {
                const double* phi = &tab_.phi[std::size_t(i) * d];
                double s = 0.0;
                for (int k = 0; k < d; ++k) {
                    double diff = x[k] - g * phi[k];
                    s += diff * diff;
                }
                double e = -s * inv2s2 + tab_.logp[i];
                if (e > m) {
                    double c = std::exp(m - e);
                    s0 *= c;
                    for (int k = 0; k < d; ++k) num_[k] *= c;
                    m = e;
                }
                double w = std::exp(e - m);
                s0 += w;
                for (int k = 0; k < d; ++k) num_[k] += w * (g * phi[k] - x[k]);
            }
            next = hi;
        }
        Vec out(d);
        double inv = 1.0 / (s0 * sigma * sigma);
        for (int k = 0; k < d; ++k) out[k] = num_[k] * inv;
        return out;
    }

    /// Laplace-method approximation of log p_sigma around the closest point.
    double laplace_log_p(const Vec& x, double sigma) const {
        check_sigma(sigma);
        Projection pr = chart_.project(x);
        const int d = chart_.ambient_dim();
        double hhat = curvature_matrix(chart_, pr.u_star, x);
        double v = -pr.half_sq_dist / (sigma * sigma) -
                   0.5 * double(d - 1) * std::log(two_pi * sigma * sigma) -
                   0.5 * std::log(std::fabs(hhat)) + data_.log_density(pr.u_star);
        if (mode_ == SmoothMode::VP) v -= 0.5 * dot(pr.foot, sub(x, pr.foot));
        return v;
    }

    /// Residuals of the two leading blocks of the log-density expansion.
    std::vector<ExpansionReport> expansion_residuals(const Vec& x,
                                                     const std::vector<double>& sigmas) const {
        Projection pr = chart_.project(x);
        const int d = chart_.ambient_dim();
        double hhat = curvature_matrix(chart_, pr.u_star, x);
        double limit = data_.log_density(pr.u_star) - 0.5 * std::log(std::fabs(hhat));
        std::vector<ExpansionReport> out;
        out.reserve(sigmas.size());
        for (double sigma : sigmas) {
            double lp = log_p(x, sigma);
            double leading = std::fabs(sigma * sigma * lp + pr.half_sq_dist);
            double block = lp + pr.half_sq_dist / (sigma * sigma) +
                           0.5 * double(d - 1) * std::log(two_pi * sigma * sigma);
            if (mode_ == SmoothMode::VP) block += 0.5 * dot(pr.foot, sub(x, pr.foot));
            out.push_back({sigma, leading, std::fabs(block - limit)});
        }
        return out;
    }

  private:
    struct NodeTable {
        std::vector<double> phi;   // n x d, row-major
        std::vector<double> logp;  // n
        int n = 0;
    };

    NodeTable make_table(int n) const {
        NodeTable t;
        t.n = n;
        const int d = chart_.ambient_dim();
        t.phi.resize(std::size_t(n) * d);
        t.logp.resize(n);
        for (int i = 0; i < n; ++i) {
            double u = two_pi * i / n;
            Vec p = chart_.point(u);
            for (int k = 0; k < d; ++k) t.phi[std::size_t(i) * d + k] = p[k];
            t.logp[i] = data_.log_density(u);
        }
        return t;
    }

    double log_p_table(const NodeTable& t, const Vec& x, double sigma) const {
        const int d = chart_.ambient_dim();
        const double g = gamma(sigma);
        const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
        double m = -std::numeric_limits<double>::infinity();
        thread_local std::vector<double> exps_;
        exps_.resize(t.n);
        for (int i = 0; i < t.n; ++i) {
            const double* phi = &t.phi[std::size_t(i) * d];
            double s = 0.0;
            for (int k = 0; k < d; ++k) {
                double diff = x[k] - g * phi[k];
                s += diff * diff;
            }
            double e = -s * inv2s2 + t.logp[i];
            exps_[i] = e;
            if (e > m) m = e;
        }
        double s0 = 0.0;
        for (int i = 0; i < t.n; ++i) s0 += std::exp(exps_[i] - m);
        return m + std::log(s0) + std::log(two_pi / t.n) -
               0.5 * d * std::log(two_pi * sigma * sigma);
    }

    void check_sigma(double sigma) const {
        if (!(sigma > 0.0)) throw Error("sigma must be positive");
        if (mode_ == SmoothMode::VP && !(sigma < 1.0)) throw Error("VP smoothing requires sigma < 1");
    }

    ManifoldChart chart_;
    DataDensity data_;
    SmoothMode mode_;
    int nodes_;
    NodeTable tab_, tab2_;
};

}  // namespace tslab
