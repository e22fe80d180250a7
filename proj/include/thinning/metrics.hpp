#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "thinning/engine.hpp"

namespace thinning::metrics {

// n * MaxLoad(k). Requires k to be a recorded step of the series.
int64_t maxload_at(const RunTrace& trace, int64_t k);

struct IntervalResult {
    int64_t value = 0;
    // False when the series is stride-subsampled: the max over recorded steps
    // is then only a lower bound on the true interval maximum.
    bool exact = true;
};

// Max over recorded steps k in [k_lo, k_hi] (defaults to the whole run).
IntervalResult maxload_interval(const RunTrace& trace, int64_t k_lo = 1, int64_t k_hi = -1);

struct TypicalResult {
    // Largest realized positive per-step maximum v with
    // |{k in M : n*MaxLoad(k) >= v}| >= eps|M|; nullopt when no positive
    // level clears the count.
    std::optional<int64_t> value;
    bool exact = true;
};

TypicalResult maxload_typical(const RunTrace& trace, double eps, int64_t k_lo = 1,
                              int64_t k_hi = -1);

// |{i in S : L_i >= ell}| over the final state; empty S means all bins.
int64_t level_set_count(const LoadState& state, const std::vector<int32_t>& S, double ell);

// |{i in S : bin suggested as primary at least ell times during steps in
// [k_lo, k_hi]}|. Needs retained full step records (stride 1).
int64_t primary_suggestion_count(const RunTrace& trace, const std::vector<int32_t>& S,
                                 int64_t ell, int64_t k_lo = 1, int64_t k_hi = -1);

// Per-bin decomposition checks: counts == accepted_primaries + secondaries
// for thinning runs; exposed for the invariant tests.
struct Decomposition {
    std::vector<int64_t> primary;    // L_{1,i}([m])
    std::vector<int64_t> secondary;  // L_{2,i}([m])
};
Decomposition decompose(const LoadState& state);

// One CSV row per trial. `typical` empty when undefined.
struct ResultRow {
    int64_t trial = 0;
    int64_t n = 0;
    int64_t m = 0;
    std::string strategy;
    uint64_t seed = 0;
    int64_t maxload_final_scaled = 0;
    int64_t maxload_alltime_scaled = 0;
    std::optional<int64_t> maxload_typical_scaled;
    double eps = 0.0;
    std::optional<int64_t> retries;
    int64_t coupled_steps = 0;
    double wallclock_ms = 0.0;
};

std::string csv_header();
std::string to_csv(const ResultRow& row);
ResultRow from_csv(const std::string& line);

}  // namespace thinning::metrics
