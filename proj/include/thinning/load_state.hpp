#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "thinning/errors.hpp"
#include "thinning/rng.hpp"

namespace thinning {

// Exact integer bookkeeping of a run. Loads are never stored as floats: the
// scaled load n*L_i = n*(initial_loads[i] + counts[i]) - k is an integer and
// the per-bin scaled loads sum to zero at every step.
struct LoadState {
    int64_t n = 0;
    int64_t k = 0;        // balls allocated so far
    int64_t retries = 0;  // rejected primaries among thinning steps
    int64_t coupled_steps = 0;
    std::vector<int64_t> counts;
    std::vector<int64_t> initial_loads;
    std::vector<int64_t> accepted_primaries;
    // max_i (counts[i] + initial_loads[i]); only grows, so it can be kept
    // incrementally and n*max_level - k is always the current max scaled load.
    int64_t max_level = 0;

    static LoadState make(int64_t n, std::vector<int64_t> initial_loads = {}) {
        if (n <= 0) throw std::invalid_argument("LoadState: n must be positive");
        LoadState s;
        s.n = n;
        s.counts.assign(size_t(n), 0);
        s.accepted_primaries.assign(size_t(n), 0);
        if (initial_loads.empty()) {
            s.initial_loads.assign(size_t(n), 0);
            s.max_level = 0;
        } else {
            if (int64_t(initial_loads.size()) != n)
                throw std::invalid_argument("LoadState: initial_loads size mismatch");
            int64_t sum = std::accumulate(initial_loads.begin(), initial_loads.end(), int64_t{0});
            if (sum != 0)
                throw std::invalid_argument("LoadState: initial loads must sum to zero");
            s.initial_loads = std::move(initial_loads);
            s.max_level = *std::max_element(s.initial_loads.begin(), s.initial_loads.end());
        }
        return s;
    }

    // n*L_i, exact. i is 0-based.
    int64_t scaled_load(int64_t i) const {
        if (i < 0 || i >= n) throw std::out_of_range("scaled_load: bin index out of range");
        return n * (initial_loads[size_t(i)] + counts[size_t(i)]) - k;
    }

    int64_t level(int64_t i) const { return initial_loads[size_t(i)] + counts[size_t(i)]; }

    int64_t max_scaled_load() const { return n * max_level - k; }

    // Load of bin i as a real number (for reporting; comparisons in the
    // library go through the scaled integer form).
    double load(int64_t i) const { return double(scaled_load(i)) / double(n); }
};

enum class StepKind : uint8_t {
    Accept,   // D_k = 1, ball placed at the primary
    Reject,   // D_k = 2, ball placed at a fresh uniform secondary
    Coupled,  // allocation produced directly by a coupled point process
};

inline const char* to_string(StepKind d) {
    switch (d) {
        case StepKind::Accept: return "accept";
        case StepKind::Reject: return "reject";
        case StepKind::Coupled: return "coupled";
    }
    return "?";
}

struct StepRecord {
    int64_t k = 0;
    int32_t primary = -1;  // -1 on coupled steps (no primary is materialized)
    StepKind decision = StepKind::Accept;
    int32_t final_bin = 0;
    int64_t max_scaled = 0;  // n * MaxLoad(k)
};

// Read-only view handed to a policy for one thinning decision. Strategies
// never mutate LoadState; anything beyond these summaries has to be
// accumulated by the policy itself through on_step().
struct DecisionContext {
    int64_t k = 0;  // 1-based index of the ball being decided
    int64_t n = 0;
    int32_t primary = 0;
    int64_t primary_scaled_load = 0;  // n * L_{primary} before this ball
    int64_t primary_accepted = 0;     // accepted primaries of that bin, whole run
    double u = 0.0;                   // fresh uniform variate
    RandomStream* aux = nullptr;      // extra variates for randomized strategies
};

// A decision rule bound to a single run. Policies are stateful; construct a
// fresh one per run.
class StrategyPolicy {
public:
    virtual ~StrategyPolicy() = default;

    virtual std::string name() const = 0;

    // Called once with the starting state before any ball is allocated.
    virtual void init(const LoadState& /*state*/) {}

    // True if the next allocation is produced by the policy itself (coupled
    // point-process strategies) instead of the primary/secondary mechanics.
    virtual bool coupled_next() const { return false; }

    // Produce the next coupled allocation. Only called when coupled_next().
    virtual int32_t couple(const LoadState& /*state*/, RandomStream& /*aux*/) {
        throw UnsupportedPolicy(name() + ": not a coupled policy");
    }

    // Thinning decision: true = accept the primary.
    virtual bool accept(const DecisionContext& ctx) = 0;

    // Observation hook, called after every allocated ball with the updated
    // state. Used for stage boundaries, feasibility monitors, hand-offs.
    virtual void on_step(const LoadState& /*state*/, const StepRecord& /*rec*/) {}
};

}  // namespace thinning
