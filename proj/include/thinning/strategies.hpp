#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "thinning/load_state.hpp"
#include "thinning/schedule.hpp"

namespace thinning {

// One-choice / classical process (D_k = 1 for every ball).
std::unique_ptr<StrategyPolicy> accept_all_policy();
// Every primary rejected; the final allocation is the uniform secondary.
std::unique_ptr<StrategyPolicy> reject_all_policy();

// ell-threshold strategy: accept while the suggested bin has accepted fewer
// than ell primary allocations (counted from the start of this policy).
std::unique_ptr<StrategyPolicy> threshold_policy(double ell);

// ell-relative threshold strategy: accept the k-th ball if the suggested bin
// accepted fewer than ell + (k-1)/n primaries, or if its load is below
// -log n. All comparisons in scaled integers: n*accepted < n*ell + (k-1).
std::unique_ptr<StrategyPolicy> relative_threshold_policy(double ell,
                                                          double log_base = kNaturalBase);

// Multi-stage (t, L0, ell)-threshold strategy. H_0 is the set of bins with
// load above L0 at policy start; at the end of stage i the bins outside
// earlier H-sets whose load reaches L0 + 2*i*ell form H_i. A ball is retried
// when its bin has load at least -log n and either sits in the current
// H-union or has exhausted the per-stage allowance t_i - t_{i-1} + ell.
class MultiStagePolicy final : public StrategyPolicy {
public:
    MultiStagePolicy(MultiStageSchedule schedule, int64_t n, double log_base = kNaturalBase);

    std::string name() const override;
    void init(const LoadState& state) override;
    bool accept(const DecisionContext& ctx) override;
    void on_step(const LoadState& state, const StepRecord& rec) override;

    const MultiStageSchedule& schedule() const { return schedule_; }
    int64_t current_stage() const { return stage_; }
    // Bins of H_i (0-based i: H_0 at index 0). H_i appears once stage i ends.
    const std::vector<std::vector<int32_t>>& h_sets() const { return h_sets_; }

private:
    void enter_stage(int64_t stage);
    void recompute_h(const LoadState& state);

    MultiStageSchedule schedule_;
    int64_t n_;
    int64_t lowcut_;
    int64_t steps_seen_ = 0;
    int64_t stage_ = 1;
    int64_t stage_end_balls_ = 0;  // local ball index ending the current stage
    double stage_allowance_ = 0.0;  // t_i - t_{i-1} + ell
    std::vector<uint8_t> reject_mark_;     // current H-union
    std::vector<int32_t> accepted_stage_;  // per-bin accepted primaries this stage
    std::vector<std::vector<int32_t>> h_sets_;
    std::vector<uint8_t> in_any_h_;  // union of H_1.. (H_0 kept separately)
};

std::unique_ptr<StrategyPolicy> multi_stage_policy(double t, double L0,
                                                   std::optional<double> ell, double eta,
                                                   int64_t n, double log_base = kNaturalBase,
                                                   const Overrides& overrides = {});

// theta-drift for the first floor(n*t_prime) balls, then the multi-stage
// (t, L0, ell)-threshold strategy re-initialized with the hand-off loads as
// initial loads. t == 0 degenerates to pure drift.
std::unique_ptr<StrategyPolicy> drift_multi_stage_policy(
    double theta, double t_prime, double t, double L0, std::optional<double> ell,
    double eta, int64_t n, double log_base = kNaturalBase, const Overrides& overrides = {});

// Q-multi-scale strategy (recursion of Algorithm form): scale 1 is the
// (Q+L)-relative threshold run for floor((log n)^{alpha_1}) time; scale i+1
// runs N_i iterations of scale i (with Q raised by Q^{i,j}) each followed by
// the regulating multi-stage ((log n)^{alpha'_i}, Q + Q^{i,j} + ell_i, ell_i)-
// threshold segment. Runs the top scale (i_max + 1), extending with further
// top-level iterations if the run is longer than one pass.
std::unique_ptr<StrategyPolicy> q_multi_scale_policy(double Q, int64_t n,
                                                     double log_base = kNaturalBase,
                                                     const Overrides& overrides = {});

// d-multi-scale long-term combined strategy: iterations of
//   phase 1: multi-stage (m0/n, L0, L0)-threshold for m0 balls
//   phase 2: Q-multi-scale for m1 balls
//   phase 3: 1/5-drift until >= m2 balls in the phase, max|L_i| <= 100 d log n
//            and |{i : L_i > L0}| < 4000 n e^{-L0/15}
// with phase 1 skipped in the first iteration. The watchdog bounds phase 3.
std::unique_ptr<StrategyPolicy> d_multiscale_longterm_policy(
    double d, int64_t n, double log_base = kNaturalBase, const Overrides& overrides = {},
    int64_t phase3_budget = 1'000'000'000);

// One-shot decision policy realizing an explicit distribution p over bins
// (Lemma-style construction: accept primary i when u < n*p_i - c). Requires
// c/n <= p_i <= (1+c)/n for every bin.
std::unique_ptr<StrategyPolicy> realize_distribution(const std::vector<double>& p, double c);

// Introspection for tests: the acceptance probability the realized policy
// assigns to each primary.
std::vector<double> realize_accept_probabilities(const std::vector<double>& p, double c);

}  // namespace thinning
