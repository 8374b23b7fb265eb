#pragma once

#include <atomic>
#include <cmath>
#include <limits>
#include <thread>
#include <vector>

#include "tslab/common.hpp"
#include "tslab/dynamics.hpp"
#include "tslab/fields.hpp"
#include "tslab/manifold.hpp"

namespace tslab {

struct ChartHistogram {
    int bins = 0;
    std::vector<double> probs;
};

struct ProjectedSamples {
    std::vector<double> u;     // chart coordinate; NaN when absent
    std::vector<double> dist;  // ambient distance to the manifold
    std::size_t degenerate = 0;
    std::size_t outside_tube = 0;
};

/// Per-sample closest-point data. Samples outside the tube or with a
/// degenerate projection get u = NaN; their distance is still recorded from
/// the global grid minimum.
inline ProjectedSamples project_samples(const ManifoldChart& chart, const SampleSet& s,
                                        int grid = 1024, int workers = 0) {
    const std::size_t n = s.points.size();
    ProjectedSamples out;
    out.u.assign(n, std::numeric_limits<double>::quiet_NaN());
    out.dist.assign(n, 0.0);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> degenerate{0}, outside{0};
    const double eps = chart.tube_radius();

    auto work = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(256);
            if (i >= n) return;
            std::size_t hi = std::min(n, i + 256);
            for (; i < hi; ++i) {
                ManifoldChart::Closest c = chart.closest(s.points[i], grid);
                out.dist[i] = c.dist;
                if (c.degenerate) {
                    degenerate.fetch_add(1, std::memory_order_relaxed);
                } else if (c.dist >= eps) {
                    outside.fetch_add(1, std::memory_order_relaxed);
                } else {
                    out.u[i] = c.u;
                }
            }
        }
    };
    int nw = resolve_workers(workers);
    if (nw <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nw; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    out.degenerate = degenerate.load();
    out.outside_tube = outside.load();
    return out;
}

/// Normalized counts over equal angular bins; NaN coordinates are skipped.
inline ChartHistogram chart_histogram(const std::vector<double>& us, int bins) {
    if (bins < 2) throw Error("chart_histogram requires bins >= 2");
    ChartHistogram h;
    h.bins = bins;
    h.probs.assign(bins, 0.0);
    std::size_t count = 0;
    for (double u : us) {
        if (!std::isfinite(u)) continue;
        int b = int(wrap_angle(u) / two_pi * bins);
        if (b >= bins) b = bins - 1;
        h.probs[b] += 1.0;
        ++count;
    }
    if (count == 0) throw EmptyInput("chart_histogram got no finite coordinates");
    for (double& p : h.probs) p /= double(count);
    return h;
}

inline double tv_distance(const ChartHistogram& h, const std::vector<double>& ref) {
    if (int(ref.size()) != h.bins) throw BinMismatch("histogram and reference bin counts differ");
    double s = 0.0;
    for (int i = 0; i < h.bins; ++i) s += std::fabs(h.probs[i] - ref[i]);
    return 0.5 * s;
}

inline double off_manifold_mass(const std::vector<double>& dists, double delta) {
    if (!(delta > 0.0)) throw Error("delta must be positive");
    if (dists.empty()) throw EmptyInput("off_manifold_mass got no distances");
    std::size_t over = 0;
    for (double d : dists)
        if (d > delta) ++over;
    return double(over) / double(dists.size());
}

/// Chart marginal of the Riemannian uniform law: bin mass proportional to
/// the integral of |Phi'(u)| over the bin (trapezoid, 64 sub-nodes).
inline std::vector<double> uniform_reference(const ManifoldChart& chart, int bins) {
    if (bins < 2) throw Error("uniform_reference requires bins >= 2");
    const int sub = 64;
    std::vector<double> table(bins);
    double w = two_pi / bins, sum = 0.0;
    for (int b = 0; b < bins; ++b) {
        double acc = 0.0;
        for (int s = 0; s <= sub; ++s) {
            double weight = (s == 0 || s == sub) ? 0.5 : 1.0;
            acc += weight * chart.speed(b * w + s * w / sub);
        }
        table[b] = acc;
        sum += acc;
    }
    for (double& t : table) t /= sum;
    return table;
}

/// Guided stationary reference: bin mass proportional to the integral of
/// exp(-v(Phi(u))) * |Phi'(u)| over the bin.
inline std::vector<double> guided_reference(const ManifoldChart& chart,
                                            const GuidancePotential& v, int bins) {
    if (bins < 2) throw Error("guided_reference requires bins >= 2");
    const int sub = 64;
    std::vector<double> table(bins);
    double w = two_pi / bins, sum = 0.0;
    for (int b = 0; b < bins; ++b) {
        double acc = 0.0;
        for (int s = 0; s <= sub; ++s) {
            double weight = (s == 0 || s == sub) ? 0.5 : 1.0;
            double u = b * w + s * w / sub;
            acc += weight * std::exp(-v(chart.point(u))) * chart.speed(u);
        }
        table[b] = acc;
        sum += acc;
    }
    for (double& t : table) t /= sum;
    return table;
}

}  // namespace tslab
