// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <iostream>
#include <vector>

#include "scgan/trainer.hpp"

namespace scgan {

// Symbolic complexity accounting for the three-stage schedule versus a
// plain baseline, plus the inference-side comparison against N-fold
// self-ensembling. The +2 and +12 terms come from the fixed two- and
// four-fold re-boosting rounds of one epoch each; they are deliberately
// not generalized.
struct CostParams {
    double t0 = 100.0;   // baseline training epochs
    double ts = 8.0;     // SC extension epochs (premise: ts << t0)
    double p0 = 1.0;     // cost units per baseline epoch
    double p_inf = 1.0;  // cost units per single restoration pass
    int n = 8;           // self-ensemble fold count

    void validate() const {
        require(t0 > 0.0, "cost: t0 must be > 0");
        require(ts >= 0.0, "cost: ts must be >= 0");
        require(p0 > 0.0, "cost: p0 must be > 0");
        require(p_inf > 0.0, "cost: p_inf must be > 0");
        require(n >= 1, "cost: n must be >= 1");
    }
};

struct CostBounds {
    double train_lower = 0.0;
    double train_upper = 0.0;
    double inference_sc = 0.0;  // one restoration pass
    double inference_se = 0.0;  // n restoration passes
};

// (t0 + ts + 2) * p0 < P_train < (t0 + 2*ts + 12) * p0
inline CostBounds training_bounds(const CostParams& p, std::ostream* warn = &std::cerr) {
    p.validate();
    if (p.ts >= p.t0 && warn)
        *warn << "warning: ts >= t0 violates the ts << t0 premise; bounds computed anyway\n";
    CostBounds b;
    b.train_lower = (p.t0 + p.ts + 2.0) * p.p0;
    b.train_upper = (p.t0 + 2.0 * p.ts + 12.0) * p.p0;
    b.inference_sc = p.p_inf;
    b.inference_se = p.n * p.p_inf;
    return b;
}

inline CostBounds inference_costs(const CostParams& p) {
    p.validate();
    CostBounds b;
    b.train_lower = (p.t0 + p.ts + 2.0) * p.p0;
    b.train_upper = (p.t0 + 2.0 * p.ts + 12.0) * p.p0;
    b.inference_sc = p.p_inf;
    b.inference_se = p.n * p.p_inf;
    return b;
}

// Median wall-clock seconds of p2gan_step over >= 5 repetitions on a
// warmed-up trainer. Parameters drift across repetitions; the timing is
// what matters here, so the trainer is handed in by the caller.
inline double measure_step_cost(Trainer& trainer, const PatchBatch& batch, int reps = 5) {
    require(reps >= 5, "measure_step_cost: need at least 5 repetitions");
    trainer.p2gan_step(batch);  // warm-up
    std::vector<double> times;
    times.reserve(reps);
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        trainer.p2gan_step(batch);
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

inline double median_wallclock(const std::function<void()>& fn, int reps = 5) {
    std::vector<double> times;
    times.reserve(reps);
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

}  // namespace scgan
