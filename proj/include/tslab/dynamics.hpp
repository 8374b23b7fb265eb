#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "tslab/common.hpp"
#include "tslab/fields.hpp"
#include "tslab/manifold.hpp"

namespace tslab {

struct SamplerConfig {
    double dt = 1e-3;
    long long n_steps = 100000;
    int n_chains = 8;
    long long burn_in = 50000;  // default: half of n_steps
    int thin = 10;
    double sigma = 0.01;
    std::uint64_t master_seed = 1;
    double clip_lo = -4.0, clip_hi = 4.0;  // axis-aligned box K, per coordinate
    enum class Init { on_manifold_uniform, gaussian } init = Init::on_manifold_uniform;
    double init_scale = 2.0;
    int workers = 0;  // 0: TSLAB_WORKERS env var, else hardware concurrency

    long long effective_samples() const {
        return (long long)n_chains * ((n_steps - burn_in + thin - 1) / thin);
    }
};

struct SampleSet {
    std::vector<Vec> points;
    std::vector<int> chain;
    std::vector<long long> step;
    SamplerConfig config;
    std::string field_descriptor;
    double clipped_fraction = 0.0;  // fraction of post-burn-in steps clipped
};

/// Explicit Euler stability heuristic: dt = safety * sigma^(2 - alpha).
inline double stiffness_dt(double sigma, double alpha, double safety) {
    if (!(safety > 0.0 && safety <= 1.0)) throw Error("safety must lie in (0, 1]");
    return safety * std::pow(sigma, 2.0 - alpha);
}

inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("TSLAB_WORKERS")) {
        int w = std::atoi(env);
        if (w > 0) return w;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? int(hw) : 1;
}

/// Euler-Maruyama integration of dX = field(X, sigma) dt + sqrt(2) dW with
/// per-coordinate clipping to the box K. Chains run in parallel; chain i
/// draws from an RNG stream derived from (master_seed, i), so the result is
/// independent of scheduling and bit-reproducible for a fixed seed.
inline SampleSet run_langevin(const ScoreField& field, const SamplerConfig& cfg,
                              const ManifoldChart& chart) {
    if (!(cfg.dt > 0.0)) throw Error("dt must be positive");
    if (cfg.burn_in >= cfg.n_steps) throw Error("burn_in must be smaller than n_steps");
    if (cfg.thin < 1) throw Error("thin must be >= 1");

    const int d = chart.ambient_dim();
    const long long kept_per_chain = (cfg.n_steps - cfg.burn_in + cfg.thin - 1) / cfg.thin;
    std::vector<std::vector<Vec>> chain_out(cfg.n_chains);
    std::vector<long long> chain_clipped(cfg.n_chains, 0);
    std::atomic<int> next_chain{0};
    std::exception_ptr failure;
    std::mutex failure_mu;

    auto run_chain = [&](int ci) {
        std::uint64_t s = cfg.master_seed;
        splitmix64(s);
        s ^= 0x9E3779B97F4A7C15ULL * (std::uint64_t(ci) + 1);
        std::mt19937_64 rng(splitmix64(s));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);

        Vec x(d);
        if (cfg.init == SamplerConfig::Init::on_manifold_uniform) {
            x = chart.point(two_pi * unif(rng));
        } else {
            for (int k = 0; k < d; ++k) x[k] = cfg.init_scale * gauss(rng);
        }

        const double noise = std::sqrt(2.0 * cfg.dt);
        std::vector<Vec>& out = chain_out[ci];
        out.reserve(kept_per_chain);
        long long clipped = 0;
        for (long long k = 0; k < cfg.n_steps; ++k) {
            Vec drift = field(x, cfg.sigma);
            bool step_clipped = false;
            for (int j = 0; j < d; ++j) {
                x[j] += cfg.dt * drift[j] + noise * gauss(rng);
                if (x[j] < cfg.clip_lo) {
                    x[j] = cfg.clip_lo;
                    step_clipped = true;
                } else if (x[j] > cfg.clip_hi) {
                    x[j] = cfg.clip_hi;
                    step_clipped = true;
                }
                if (!std::isfinite(x[j]))
                    throw NonFiniteState("chain state became non-finite; dt too large for the field");
            }
            if (k >= cfg.burn_in) {
                if (step_clipped) ++clipped;
                if ((k - cfg.burn_in) % cfg.thin == 0) out.push_back(x);
            }
        }
        chain_clipped[ci] = clipped;
    };

    auto worker = [&]() {
        for (;;) {
            int ci = next_chain.fetch_add(1);
            if (ci >= cfg.n_chains) return;
            try {
                run_chain(ci);
            } catch (...) {
                std::lock_guard<std::mutex> lk(failure_mu);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    int nw = std::min(resolve_workers(cfg.workers), cfg.n_chains);
    if (nw <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nw);
        for (int t = 0; t < nw; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    // Deterministic concatenation by chain index.
    SampleSet set;
    set.config = cfg;
    set.field_descriptor = field.descriptor;
    set.points.reserve(std::size_t(cfg.n_chains) * kept_per_chain);
    long long total_clipped = 0;
    for (int ci = 0; ci < cfg.n_chains; ++ci) {
        long long k = 0;
        for (Vec& p : chain_out[ci]) {
            set.points.push_back(std::move(p));
            set.chain.push_back(ci);
            set.step.push_back(cfg.burn_in + k * cfg.thin);
            ++k;
        }
        total_clipped += chain_clipped[ci];
    }
    double post = double(cfg.n_steps - cfg.burn_in) * cfg.n_chains;
    set.clipped_fraction = post > 0 ? double(total_clipped) / post : 0.0;
    return set;
}

}  // namespace tslab
