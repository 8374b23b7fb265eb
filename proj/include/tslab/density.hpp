#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "tslab/common.hpp"

namespace tslab {

/// Modified Bessel I0 by power series; adequate for kappa <= 10.
inline double bessel_i0(double x) {
    double term = 1.0, sum = 1.0;
    double q = 0.25 * x * x;
    for (int k = 1; k < 200; ++k) {
        term *= q / (double(k) * double(k));
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum;
}

enum class DensityKind { uniform_in_u, von_mises, table };

/// Strictly positive data density on the periodic chart domain [0, 2*pi),
/// normalized w.r.t. Lebesgue measure du.
class DataDensity {
  public:
    static DataDensity uniform() {
        DataDensity d;
        d.kind_ = DensityKind::uniform_in_u;
        d.build_cdf();
        return d;
    }

    static DataDensity von_mises(double kappa, double mu) {
        DataDensity d;
        d.kind_ = DensityKind::von_mises;
        d.kappa_ = kappa;
        d.mu_ = mu;
        d.log_norm_ = std::log(two_pi * bessel_i0(kappa));
        d.build_cdf();
        return d;
    }

    static DataDensity table(std::vector<double> values) {
        for (double v : values)
            if (!(v > 0.0)) throw NonPositiveTable("table density values must be strictly positive");
        DataDensity d;
        d.kind_ = DensityKind::table;
        d.values_ = std::move(values);
        // Normalize by the periodic trapezoid integral of the interpolant.
        double sum = 0.0;
        for (double v : d.values_) sum += v;
        d.table_norm_ = sum * two_pi / double(d.values_.size());
        d.build_cdf();
        return d;
    }

    DensityKind kind() const { return kind_; }
    double kappa() const { return kappa_; }
    double mu() const { return mu_; }

    double operator()(double u) const {
        u = wrap_angle(u);
        switch (kind_) {
            case DensityKind::uniform_in_u:
                return 1.0 / two_pi;
            case DensityKind::von_mises:
                return std::exp(kappa_ * std::cos(u - mu_) - log_norm_);
            case DensityKind::table: {
                // Periodic linear interpolation between equispaced nodes.
                double t = u / two_pi * double(values_.size());
                std::size_t i = std::size_t(t) % values_.size();
                std::size_t j = (i + 1) % values_.size();
                double frac = t - std::floor(t);
                return ((1.0 - frac) * values_[i] + frac * values_[j]) / table_norm_;
            }
        }
        return 0.0;
    }

    double log_density(double u) const { return std::log((*this)(u)); }

    /// n i.i.d. draws by inverse CDF on a 2^16-node tabulated CDF.
    std::vector<double> sample(std::size_t n, std::uint64_t seed) const {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::vector<double> out(n);
        for (std::size_t k = 0; k < n; ++k) out[k] = inverse_cdf(unif(rng));
        return out;
    }

    /// Per-bin probabilities over equal-width angular bins, summing to 1.
    std::vector<double> reference_table(int bins) const {
        if (bins < 2) throw Error("reference_table requires bins >= 2");
        const int sub = 256;
        std::vector<double> probs(bins, 0.0);
        double w = two_pi / bins;
        double sum = 0.0;
        for (int b = 0; b < bins; ++b) {
            double lo = b * w;
            double acc = 0.0;
            for (int s = 0; s <= sub; ++s) {
                double weight = (s == 0 || s == sub) ? 0.5 : 1.0;
                acc += weight * (*this)(lo + s * w / sub);
            }
            probs[b] = acc * w / sub;
            sum += probs[b];
        }
        for (double& p : probs) p /= sum;
        return probs;
    }

  private:
    void build_cdf() {
        const int n = 1 << 16;
        cdf_.resize(n + 1);
        cdf_[0] = 0.0;
        double h = two_pi / n;
        double prev = (*this)(0.0);
        for (int i = 1; i <= n; ++i) {
            double cur = (*this)(i * h);
            cdf_[i] = cdf_[i - 1] + 0.5 * (prev + cur) * h;
            prev = cur;
        }
        double total = cdf_[n];
        for (double& c : cdf_) c /= total;
    }

    double inverse_cdf(double p) const {
        std::size_t lo = 0, hi = cdf_.size() - 1;
        while (hi - lo > 1) {
            std::size_t mid = (lo + hi) / 2;
            if (cdf_[mid] <= p)
                lo = mid;
            else
                hi = mid;
        }
        double seg = cdf_[hi] - cdf_[lo];
        double frac = seg > 0.0 ? (p - cdf_[lo]) / seg : 0.0;
        double h = two_pi / double(cdf_.size() - 1);
        return wrap_angle((double(lo) + frac) * h);
    }

    DensityKind kind_ = DensityKind::uniform_in_u;
    double kappa_ = 0.0, mu_ = 0.0, log_norm_ = 0.0;
    std::vector<double> values_;
    double table_norm_ = 1.0;
    std::vector<double> cdf_;
};

}  // namespace tslab
