#include "thinning/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>

#include "thinning/analysis.hpp"
#include "thinning/point_process.hpp"

namespace thinning {

namespace {

class AcceptAllPolicy final : public StrategyPolicy {
public:
    std::string name() const override { return "one_choice"; }
    bool accept(const DecisionContext&) override { return true; }
};

class RejectAllPolicy final : public StrategyPolicy {
public:
    std::string name() const override { return "reject_all"; }
    bool accept(const DecisionContext&) override { return false; }
};

class ThresholdPolicy final : public StrategyPolicy {
public:
    explicit ThresholdPolicy(double ell) : ell_(ell) {
        if (!(ell >= 0)) throw std::invalid_argument("threshold_policy: ell must be >= 0");
    }
    std::string name() const override { return "threshold(" + std::to_string(ell_) + ")"; }
    void init(const LoadState& s) override { accepted_.assign(size_t(s.n), 0); }
    bool accept(const DecisionContext& ctx) override {
        return double(accepted_[size_t(ctx.primary)]) < ell_;
    }
    void on_step(const LoadState&, const StepRecord& rec) override {
        if (rec.decision == StepKind::Accept) ++accepted_[size_t(rec.final_bin)];
    }

private:
    double ell_;
    std::vector<int32_t> accepted_;  // local to this policy's lifetime
};

class RelativeThresholdPolicy final : public StrategyPolicy {
public:
    RelativeThresholdPolicy(double ell, double log_base) : ell_(ell), log_base_(log_base) {
        if (!(ell > 0)) throw std::invalid_argument("relative_threshold_policy: ell must be > 0");
    }
    std::string name() const override {
        return "relative_threshold(" + std::to_string(ell_) + ")";
    }
    void init(const LoadState& s) override {
        accepted_.assign(size_t(s.n), 0);
        lowcut_ = analysis::low_load_cut_scaled(s.n, log_base_);
        n_ = s.n;
        steps_seen_ = 0;
    }
    bool accept(const DecisionContext& ctx) override {
        // local k: balls decided by this policy so far + 1
        const int64_t k = steps_seen_ + 1;
        const double lhs = double(n_) * double(accepted_[size_t(ctx.primary)]);
        if (lhs < double(n_) * ell_ + double(k - 1)) return true;
        return ctx.primary_scaled_load <= lowcut_;
    }
    void on_step(const LoadState&, const StepRecord& rec) override {
        ++steps_seen_;
        if (rec.decision == StepKind::Accept) ++accepted_[size_t(rec.final_bin)];
    }

private:
    double ell_;
    double log_base_;
    int64_t n_ = 0;
    int64_t lowcut_ = 0;
    int64_t steps_seen_ = 0;
    std::vector<int32_t> accepted_;
};

}  // namespace

std::unique_ptr<StrategyPolicy> accept_all_policy() { return std::make_unique<AcceptAllPolicy>(); }
std::unique_ptr<StrategyPolicy> reject_all_policy() { return std::make_unique<RejectAllPolicy>(); }
std::unique_ptr<StrategyPolicy> threshold_policy(double ell) {
    return std::make_unique<ThresholdPolicy>(ell);
}
std::unique_ptr<StrategyPolicy> relative_threshold_policy(double ell, double log_base) {
    return std::make_unique<RelativeThresholdPolicy>(ell, log_base);
}

// ---------------------------------------------------------------------------
// Multi-stage threshold
// ---------------------------------------------------------------------------

MultiStagePolicy::MultiStagePolicy(MultiStageSchedule schedule, int64_t n, double log_base)
    : schedule_(std::move(schedule)), n_(n),
      lowcut_(analysis::low_load_cut_scaled(n, log_base)) {}

std::string MultiStagePolicy::name() const {
    return "multi_stage(t=" + std::to_string(schedule_.t) +
           ",L0=" + std::to_string(schedule_.L0) + ",ell=" + std::to_string(schedule_.ell) + ")";
}

void MultiStagePolicy::init(const LoadState& state) {
    steps_seen_ = 0;
    reject_mark_.assign(size_t(n_), 0);
    in_any_h_.assign(size_t(n_), 0);
    accepted_stage_.assign(size_t(n_), 0);
    h_sets_.clear();
    for (size_t i = 1; i < schedule_.t_i.size(); ++i) {
        const int64_t lo = int64_t(std::floor(double(n_) * schedule_.t_i[i - 1]));
        const int64_t hi = int64_t(std::floor(double(n_) * schedule_.t_i[i]));
        if (hi <= lo)
            throw ScheduleInvalid("multi-stage: stage " + std::to_string(i) +
                                  " receives no balls at this n");
    }
    // H_0: bins with load strictly above L0 at policy start.
    std::vector<int32_t> h0;
    const double threshold0 = double(n_) * schedule_.L0;
    for (int64_t i = 0; i < n_; ++i) {
        if (double(state.scaled_load(i)) > threshold0) {
            h0.push_back(int32_t(i));
            reject_mark_[size_t(i)] = 1;
        }
    }
    h_sets_.push_back(std::move(h0));
    enter_stage(1);
}

void MultiStagePolicy::enter_stage(int64_t stage) {
    stage_ = stage;
    const double t_lo = schedule_.t_i[size_t(stage - 1)];
    const double t_hi = schedule_.t_i[size_t(stage)];
    stage_end_balls_ = int64_t(std::floor(double(n_) * t_hi));
    stage_allowance_ = (t_hi - t_lo) + schedule_.ell;
    std::fill(accepted_stage_.begin(), accepted_stage_.end(), 0);
}

bool MultiStagePolicy::accept(const DecisionContext& ctx) {
    // Low-load escape: a bin below -log n is always accepted.
    if (ctx.primary_scaled_load <= lowcut_) return true;
    if (reject_mark_[size_t(ctx.primary)]) return false;
    return double(accepted_stage_[size_t(ctx.primary)]) < stage_allowance_;
}

void MultiStagePolicy::recompute_h(const LoadState& state) {
    // Loads at the end of the current stage; threshold L0 + 2*stage*ell.
    // H_stage excludes members of H_1..H_{stage-1} but may re-admit H_0 bins
    // (H_0 plays the same role as any other bin from stage two on).
    const double threshold =
        double(n_) * (schedule_.L0 + 2.0 * double(stage_) * schedule_.ell);
    std::vector<int32_t> h;
    for (int64_t i = 0; i < n_; ++i) {
        if (in_any_h_[size_t(i)]) continue;
        if (double(state.scaled_load(i)) >= threshold) {
            h.push_back(int32_t(i));
            in_any_h_[size_t(i)] = 1;
        }
    }
    // From stage 2 on, the reject set is exactly H_1 u ... u H_stage.
    reject_mark_ = in_any_h_;
    h_sets_.push_back(std::move(h));
}

void MultiStagePolicy::on_step(const LoadState& state, const StepRecord& rec) {
    if (rec.decision == StepKind::Accept) ++accepted_stage_[size_t(rec.final_bin)];
    ++steps_seen_;
    if (steps_seen_ == stage_end_balls_ && stage_ < schedule_.k) {
        recompute_h(state);
        enter_stage(stage_ + 1);
    }
    // Balls beyond the nominal end of the last stage (truncation slack in
    // composite use) stay governed by the last stage's rule.
}

std::unique_ptr<StrategyPolicy> multi_stage_policy(double t, double L0,
                                                   std::optional<double> ell, double eta,
                                                   int64_t n, double log_base,
                                                   const Overrides& overrides) {
    MultiStageSchedule sched =
        MultiStageSchedule::derive(t, L0, ell, eta, n, log_base, overrides);
    return std::make_unique<MultiStagePolicy>(std::move(sched), n, log_base);
}

// ---------------------------------------------------------------------------
// Drift + multi-stage combination
// ---------------------------------------------------------------------------

namespace {

class DriftMultiStagePolicy final : public StrategyPolicy {
public:
    DriftMultiStagePolicy(double theta, double t_prime, double t, double L0,
                          std::optional<double> ell, double eta, int64_t n, double log_base,
                          Overrides overrides)
        : theta_(theta), t_(t), L0_(L0), ell_(ell), eta_(eta), n_(n), log_base_(log_base),
          overrides_(std::move(overrides)) {
        if (t_prime < 0) throw std::invalid_argument("drift_multi_stage: t' must be >= 0");
        drift_balls_ = int64_t(std::floor(double(n) * t_prime));
        if (t_ <= 0 && drift_balls_ <= 0)
            throw std::invalid_argument("drift_multi_stage: both phases empty");
        if (t_ > 0)  // validate the schedule up front
            MultiStageSchedule::derive(t_, L0_, ell_, eta_, n_, log_base_, overrides_);
    }

    std::string name() const override { return "drift_multi_stage"; }

    void init(const LoadState& state) override {
        steps_seen_ = 0;
        if (drift_balls_ > 0) {
            active_ = pp::drift_policy(theta_);
            in_drift_ = true;
        } else {
            start_multi_stage(state);
        }
        active_->init(state);
    }

    bool coupled_next() const override { return active_->coupled_next(); }
    int32_t couple(const LoadState& s, RandomStream& aux) override {
        return active_->couple(s, aux);
    }
    bool accept(const DecisionContext& ctx) override { return active_->accept(ctx); }

    void on_step(const LoadState& state, const StepRecord& rec) override {
        active_->on_step(state, rec);
        ++steps_seen_;
        if (in_drift_ && steps_seen_ == drift_balls_ && t_ > 0) {
            // Hand-off: current loads become the multi-stage initial loads.
            start_multi_stage(state);
            active_->init(state);
            in_drift_ = false;
        }
    }

private:
    void start_multi_stage(const LoadState&) {
        active_ = multi_stage_policy(t_, L0_, ell_, eta_, n_, log_base_, overrides_);
        in_drift_ = false;
    }

    double theta_;
    double t_;
    double L0_;
    std::optional<double> ell_;
    double eta_;
    int64_t n_;
    double log_base_;
    Overrides overrides_;
    int64_t drift_balls_ = 0;
    int64_t steps_seen_ = 0;
    bool in_drift_ = false;
    std::unique_ptr<StrategyPolicy> active_;
};

}  // namespace

std::unique_ptr<StrategyPolicy> drift_multi_stage_policy(double theta, double t_prime, double t,
                                                         double L0, std::optional<double> ell,
                                                         double eta, int64_t n, double log_base,
                                                         const Overrides& overrides) {
    return std::make_unique<DriftMultiStagePolicy>(theta, t_prime, t, L0, ell, eta, n, log_base,
                                                   overrides);
}

// ---------------------------------------------------------------------------
// Q-multi-scale
// ---------------------------------------------------------------------------

namespace {

struct MsSegment {
    int64_t balls = 0;
    bool regulating = false;
    double rel_ell = 0.0;  // scale-1 segments: relative threshold parameter
    double ms_t = 0.0;     // regulating segments: multi-stage parameters
    double ms_L0 = 0.0;
    double ms_ell = 0.0;
};

class QMultiScalePolicy final : public StrategyPolicy {
public:
    QMultiScalePolicy(double Q, int64_t n, double log_base, Overrides overrides)
        : Q_(Q), n_(n), log_base_(log_base), overrides_(std::move(overrides)),
          schedule_(MultiScaleSchedule::derive(n, log_base, overrides_)) {
        top_scale_ = schedule_.i_max + 1;
        logn_ = log_b(double(n), log_base_);
    }

    std::string name() const override { return "q_multi_scale(Q=" + std::to_string(Q_) + ")"; }

    void init(const LoadState& state) override {
        steps_seen_ = 0;
        segment_left_ = 0;
        top_j_ = 0;
        queue_.clear();
        advance_segment(state);
    }

    bool coupled_next() const override { return false; }

    bool accept(const DecisionContext& ctx) override { return active_->accept(ctx); }

    void on_step(const LoadState& state, const StepRecord& rec) override {
        active_->on_step(state, rec);
        ++steps_seen_;
        if (--segment_left_ == 0) advance_segment(state);
    }

    const MultiScaleSchedule& schedule() const { return schedule_; }

private:
    // Appends the leaf segments of one full pass of `scale` under accumulated
    // increment q.
    void gen_scale(int64_t scale, double q, std::deque<MsSegment>& out) const {
        if (scale == 1) {
            MsSegment seg;
            seg.balls = n_ * schedule_.dur_first_i[0];
            seg.rel_ell = q + schedule_.L;
            out.push_back(seg);
            return;
        }
        const int64_t inner = scale - 1;
        for (int64_t j = 1; j <= schedule_.N_i[size_t(inner - 1)]; ++j)
            gen_iteration(inner, q, j, out);
    }

    void gen_iteration(int64_t inner, double q, int64_t j, std::deque<MsSegment>& out) const {
        const double qj = q + schedule_.Q_increment(inner, j);
        gen_scale(inner, qj, out);
        MsSegment reg;
        reg.regulating = true;
        reg.balls = n_ * schedule_.dur_reg_i[size_t(inner - 1)];
        reg.ms_t = std::pow(logn_, schedule_.alpha_prime_i[size_t(inner - 1)]);
        reg.ms_L0 = qj + schedule_.ell_i[size_t(inner - 1)];
        reg.ms_ell = schedule_.ell_i[size_t(inner - 1)];
        out.push_back(reg);
    }

    void advance_segment(const LoadState& state) {
        while (queue_.empty()) {
            if (top_scale_ == 1) {
                // Degenerate schedule: one endless relative-threshold segment.
                MsSegment seg;
                seg.balls = std::numeric_limits<int64_t>::max();
                seg.rel_ell = Q_ + schedule_.L;
                queue_.push_back(seg);
                break;
            }
            // Next top-level iteration; j beyond N_top extends the pass.
            ++top_j_;
            gen_iteration(top_scale_ - 1, Q_, top_j_, queue_);
        }
        const MsSegment seg = queue_.front();
        queue_.pop_front();
        segment_left_ = seg.balls;
        if (seg.regulating) {
            active_ = multi_stage_policy(seg.ms_t, seg.ms_L0, seg.ms_ell, 0.0, n_, log_base_,
                                         overrides_);
        } else {
            active_ = relative_threshold_policy(seg.rel_ell, log_base_);
        }
        active_->init(state);
    }

    double Q_;
    int64_t n_;
    double log_base_;
    Overrides overrides_;
    MultiScaleSchedule schedule_;
    int64_t top_scale_ = 1;
    double logn_ = 0.0;
    int64_t steps_seen_ = 0;
    int64_t segment_left_ = 0;
    int64_t top_j_ = 0;
    std::deque<MsSegment> queue_;
    std::unique_ptr<StrategyPolicy> active_;
};

}  // namespace

std::unique_ptr<StrategyPolicy> q_multi_scale_policy(double Q, int64_t n, double log_base,
                                                     const Overrides& overrides) {
    return std::make_unique<QMultiScalePolicy>(Q, n, log_base, overrides);
}

// ---------------------------------------------------------------------------
// d-multi-scale long-term combined
// ---------------------------------------------------------------------------

namespace {

// Incremental load statistics for the phase-3 stopping conditions: a level
// histogram over v_i = counts_i + initial_i gives max/min load in O(log)
// per ball and the moving level-set count |{i : L_i > L0}| in O(1) amortized.
class LoadStatTracker {
public:
    void reset(const LoadState& s, double L0) {
        L0_ = L0;
        n_ = s.n;
        levels_.clear();
        for (int64_t i = 0; i < s.n; ++i) ++levels_[s.level(i)];
        t_cut_ = cut_for(s.k);
        count_above_ = 0;
        for (const auto& [v, c] : levels_)
            if (v >= t_cut_) count_above_ += c;
    }

    // Ball k allocated to `bin`, whose level moved v -> v+1.
    void on_ball(int64_t k, int64_t v_new) {
        auto it = levels_.find(v_new - 1);
        if (--(it->second) == 0) levels_.erase(it);
        ++levels_[v_new];
        if (v_new >= t_cut_ && v_new - 1 < t_cut_) ++count_above_;
        const int64_t cut = cut_for(k);
        for (; t_cut_ < cut; ++t_cut_) {
            auto lv = levels_.find(t_cut_);
            if (lv != levels_.end()) count_above_ -= lv->second;
        }
    }

    int64_t max_scaled(int64_t k) const { return n_ * levels_.rbegin()->first - k; }
    int64_t min_scaled(int64_t k) const { return n_ * levels_.begin()->first - k; }
    int64_t count_above() const { return count_above_; }

private:
    // Smallest integer level v with L = v - k/n > L0, i.e. v > L0 + k/n.
    int64_t cut_for(int64_t k) const {
        return int64_t(std::floor(L0_ + double(k) / double(n_))) + 1;
    }

    double L0_ = 0.0;
    int64_t n_ = 1;
    int64_t t_cut_ = 0;
    int64_t count_above_ = 0;
    std::map<int64_t, int64_t> levels_;
};

class LongTermPolicy final : public StrategyPolicy {
public:
    LongTermPolicy(double d, int64_t n, double log_base, Overrides overrides,
                   int64_t phase3_budget)
        : n_(n), log_base_(log_base), overrides_(std::move(overrides)),
          budget_(phase3_budget),
          schedule_(LongTermSchedule::derive(d, n, log_base, overrides_)) {
        const double logn = log_b(double(n), log_base);
        max_abs_bound_ = 100.0 * d * logn;
        level_count_bound_ = 4000.0 * double(n) * std::exp(-schedule_.L0 / 15.0);
    }

    std::string name() const override { return "d_multiscale_longterm"; }

    void init(const LoadState& state) override {
        iteration_ = 1;
        enter_phase(2, state);  // the first iteration skips phase 1
    }

    bool coupled_next() const override { return phase_ == 3 && active_->coupled_next(); }
    int32_t couple(const LoadState& s, RandomStream& aux) override {
        return active_->couple(s, aux);
    }
    bool accept(const DecisionContext& ctx) override { return active_->accept(ctx); }

    void on_step(const LoadState& state, const StepRecord& rec) override {
        active_->on_step(state, rec);
        ++phase_balls_;
        if (phase_ == 3) {
            tracker_.on_ball(state.k, state.level(rec.final_bin));
            if (phase3_done(state)) {
                ++iteration_;
                enter_phase(1, state);
            } else if (phase_balls_ > budget_) {
                throw WatchdogExceeded(
                    "d_multiscale_longterm: phase 3 stopping conditions unmet within budget");
            }
        } else if ((phase_ == 1 && phase_balls_ == schedule_.m0) ||
                   (phase_ == 2 && phase_balls_ == schedule_.m1)) {
            enter_phase(phase_ + 1, state);
        }
    }

    int64_t phase() const { return phase_; }
    int64_t iteration() const { return iteration_; }
    const LongTermSchedule& schedule() const { return schedule_; }

private:
    bool phase3_done(const LoadState& state) const {
        if (phase_balls_ < schedule_.m2) return false;
        const double bound = double(n_) * max_abs_bound_;
        if (double(tracker_.max_scaled(state.k)) > bound) return false;
        if (double(-tracker_.min_scaled(state.k)) > bound) return false;
        return double(tracker_.count_above()) < level_count_bound_;
    }

    void enter_phase(int64_t phase, const LoadState& state) {
        phase_ = phase;
        phase_balls_ = 0;
        switch (phase) {
            case 1:
                active_ = multi_stage_policy(double(schedule_.m0) / double(n_), schedule_.L0,
                                             schedule_.L0, 0.0, n_, log_base_, overrides_);
                break;
            case 2:
                active_ = q_multi_scale_policy(schedule_.Q, n_, log_base_, overrides_);
                break;
            case 3:
                active_ = pp::drift_policy(0.2);
                tracker_.reset(state, schedule_.L0);
                break;
            default: throw std::logic_error("long-term: bad phase");
        }
        active_->init(state);
    }

    int64_t n_;
    double log_base_;
    Overrides overrides_;
    int64_t budget_;
    LongTermSchedule schedule_;
    double max_abs_bound_ = 0.0;
    double level_count_bound_ = 0.0;
    int64_t phase_ = 2;
    int64_t phase_balls_ = 0;
    int64_t iteration_ = 1;
    LoadStatTracker tracker_;
    std::unique_ptr<StrategyPolicy> active_;
};

}  // namespace

std::unique_ptr<StrategyPolicy> d_multiscale_longterm_policy(double d, int64_t n,
                                                             double log_base,
                                                             const Overrides& overrides,
                                                             int64_t phase3_budget) {
    return std::make_unique<LongTermPolicy>(d, n, log_base, overrides, phase3_budget);
}

// ---------------------------------------------------------------------------
// Realizing an explicit distribution
// ---------------------------------------------------------------------------

std::vector<double> realize_accept_probabilities(const std::vector<double>& p, double c) {
    const int64_t n = int64_t(p.size());
    if (n == 0) throw std::invalid_argument("realize_distribution: empty distribution");
    if (!(c > 0)) throw BandViolation("realize_distribution: c must be positive");
    std::vector<double> acc(p.size());
    for (size_t i = 0; i < p.size(); ++i) {
        const double lo = c / double(n);
        const double hi = (1.0 + c) / double(n);
        if (p[i] < lo - 1e-15 || p[i] > hi + 1e-15)
            throw BandViolation("realize_distribution: p[" + std::to_string(i) +
                                "] outside [c/n, (1+c)/n]");
        acc[i] = std::clamp(double(n) * p[i] - c, 0.0, 1.0);
    }
    return acc;
}

namespace {

class RealizePolicy final : public StrategyPolicy {
public:
    RealizePolicy(std::vector<double> p, double c)
        : accept_(realize_accept_probabilities(p, c)) {}
    std::string name() const override { return "realize_distribution"; }
    bool accept(const DecisionContext& ctx) override {
        return ctx.u < accept_[size_t(ctx.primary)];
    }

private:
    std::vector<double> accept_;
};

}  // namespace

std::unique_ptr<StrategyPolicy> realize_distribution(const std::vector<double>& p, double c) {
    return std::make_unique<RealizePolicy>(p, c);
}

}  // namespace thinning
