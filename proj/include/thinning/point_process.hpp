#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "thinning/load_state.hpp"

namespace thinning::pp {

// Intensity specification for the n-fold ensemble.
//
// Drift:    lambda_i = 1+theta below the diagonal (X_i < t), 1-theta at or
//           above it.
// Varying:  1+theta1 below, 1-theta2 in the band [t, t+ell], theta3 above
//           t+ell.
struct DriftSpec {
    double theta = 0.2;
};

struct VaryingSpec {
    double theta1 = 0.0;
    double theta2 = 0.0;
    double theta3 = 0.0;
    double ell = 0.0;
};

enum class Regime : uint8_t { Below, Band, Above };

// n independent counting processes with state-dependent piecewise-constant
// intensities, sampled by dominating-rate thinning: candidates arrive at rate
// n*lambda_max, are assigned a uniform process and accepted with probability
// lambda_i(t)/lambda_max evaluated at the candidate time. Between points each
// lambda_i changes regime only at the deterministic crossings t = X_i (and
// t = X_i - ell in the varying case), which evaluating at the candidate time
// accounts for exactly.
class PointProcessEnsemble {
public:
    PointProcessEnsemble(int64_t n, DriftSpec spec, std::vector<double> initial = {});
    PointProcessEnsemble(int64_t n, VaryingSpec spec, std::vector<double> initial = {});

    // Advances to the next superposition point; returns its process index.
    int32_t next_allocation(RandomStream& rng);

    double time() const { return time_.value(); }
    int64_t total_points() const { return total_points_; }
    double value(int64_t i) const { return x0_[size_t(i)] + double(jumps_[size_t(i)]); }
    int64_t n() const { return n_; }
    bool is_varying() const { return varying_.has_value(); }
    double intensity(int64_t i, double t) const;
    Regime regime(int64_t i, double t) const;

    // |{i : X_i(now) > now + ell}| maintained incrementally (varying spec).
    int64_t count_above_band() const;

    // Diagnostic counters.
    int64_t candidates() const { return candidates_; }
    int64_t crossings() const { return crossings_; }
    int64_t violations() const { return violations_; }

private:
    void init_common(std::vector<double> initial);
    void refresh_band_counter();

    int64_t n_ = 0;
    std::optional<DriftSpec> drift_;
    std::optional<VaryingSpec> varying_;
    double lambda_max_ = 0.0;
    std::vector<double> x0_;
    std::vector<int64_t> jumps_;
    KahanSum time_;
    int64_t total_points_ = 0;
    int64_t candidates_ = 0;
    int64_t crossings_ = 0;
    int64_t violations_ = 0;

    // Lazy max-heap bookkeeping for the above-band counter: entries are
    // (exit time X_i - ell, i); stale entries are re-pushed on pop.
    std::vector<uint8_t> above_;
    int64_t above_count_ = 0;
    using HeapEntry = std::pair<double, int32_t>;
    std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>> exit_heap_;
};

// Latched Lemma-2.2 feasibility check, evaluated at superposition points:
// trips when |{i : X_i(T_{k-1}) > T_{k-1} + ell}| exceeds n/sqrt(log n).
struct FeasibilityMonitor {
    double threshold = 0.0;
    bool tripped = false;
    int64_t trip_step = -1;

    // Returns true when the realizability condition still holds.
    bool check(const PointProcessEnsemble& ens, int64_t step) {
        if (tripped) return false;
        if (double(ens.count_above_band()) > threshold) {
            tripped = true;
            trip_step = step;
            return false;
        }
        return true;
    }
};

// theta-drift strategy: allocations are coupled directly to the ensemble
// output; the primary/secondary mechanics are bypassed and the steps are
// recorded as coupled (retry counts are undefined for them). Valid for
// theta in (0, sqrt(5)-2].
std::unique_ptr<StrategyPolicy> drift_policy(double theta);

// ell-varying drift strategy with theta1 = theta2 = 1/sqrt(log n) and
// theta3 = 12/sqrt(log n). Before every allocation the feasibility condition
// is evaluated at the previous superposition point; once it fails the policy
// permanently falls back to accepting every primary.
std::unique_ptr<StrategyPolicy> varying_drift_policy(double ell, int64_t n,
                                                     double log_base = 2.718281828459045235,
                                                     std::optional<VaryingSpec> override_spec = {});

// Construction audit of a drift ensemble: runs to the given number of points,
// re-deriving every intensity evaluation from the regime rule and counting
// exact per-process regime residency times.
struct StandardizingReport {
    int64_t points = 0;
    int64_t candidates = 0;
    int64_t crossings = 0;
    int64_t violations = 0;
    double time_below = 0.0;  // aggregated process-time in the 1+theta regime
    double time_above = 0.0;
    double horizon = 0.0;

    std::string to_json() const;
};

StandardizingReport standardizing_diagnostic(int64_t n, DriftSpec spec,
                                             std::vector<double> initial, int64_t points,
                                             RandomStream& rng);

double theta_upper_limit();  // sqrt(5) - 2

}  // namespace thinning::pp
