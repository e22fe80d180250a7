#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "thinning/load_state.hpp"

namespace thinning {

struct RunConfig {
    // Per-step max-load series. Stride 0 disables the series entirely.
    int64_t series_stride = 1;
    int64_t series_budget = int64_t(1) << 27;  // entries
    // Retain full StepRecords in memory (small runs / oracle comparisons).
    bool keep_step_records = false;
    int64_t step_record_budget = int64_t(1) << 24;
    // Optional newline-delimited JSON trace. Every trace_stride steps a slim
    // {k, max_scaled} record is written; every trace_full_stride steps (0 =
    // default of n) the record also carries primary/decision/final.
    std::ostream* trace_out = nullptr;
    int64_t trace_stride = 1;
    int64_t trace_full_stride = 0;
};

struct RunTrace {
    int64_t n = 0;
    int64_t m = 0;
    LoadState final_state;
    int64_t maxload_final_scaled = 0;
    int64_t maxload_alltime_scaled = 0;  // exact, maintained every step
    // Instantaneous n*MaxLoad(k) at k = stride, 2*stride, ... (k = m is always
    // the last entry when stride divides m).
    int64_t series_stride = 1;
    std::vector<int64_t> max_series;
    std::vector<StepRecord> steps;  // only if keep_step_records
    // Retries are undefined for coupled allocations; absent when the whole
    // run was coupled.
    std::optional<int64_t> retries;
    int64_t coupled_steps = 0;
    double wallclock_ms = 0.0;

    bool series_exact_for_intervals() const { return series_stride == 1; }
};

// Allocates one ball: primary draw from `primary`, decision variate and
// secondary draw (on rejection) from `aux`. Coupled policies produce the bin
// themselves from `aux`.
StepRecord step(LoadState& state, StrategyPolicy& policy, RandomStream& primary,
                RandomStream& aux);

// Runs m balls from a fresh state with the given initial loads.
RunTrace run(int64_t n, int64_t m, StrategyPolicy& policy,
             const std::vector<int64_t>& initial_loads, RandomStream& primary,
             RandomStream& aux, const RunConfig& cfg = {});

// Convenience entry point: both streams derived from one seed.
RunTrace run_seeded(int64_t n, int64_t m, StrategyPolicy& policy, uint64_t seed,
                    const std::vector<int64_t>& initial_loads = {},
                    const RunConfig& cfg = {});

// Comparator allocators (not two-thinning: they see both bins). Ties broken
// toward the lower bin index. beta = 1 is exactly two-choice, beta = 0 is
// exactly one-choice.
RunTrace run_two_choice(int64_t n, int64_t m, RandomStream& first, RandomStream& aux,
                        const std::vector<int64_t>& initial_loads = {},
                        const RunConfig& cfg = {});
RunTrace run_one_plus_beta(int64_t n, int64_t m, double beta, RandomStream& first,
                           RandomStream& aux,
                           const std::vector<int64_t>& initial_loads = {},
                           const RunConfig& cfg = {});

}  // namespace thinning
