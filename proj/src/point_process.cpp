#include "thinning/point_process.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "thinning/errors.hpp"

namespace thinning::pp {

double theta_upper_limit() { return std::sqrt(5.0) - 2.0; }

PointProcessEnsemble::PointProcessEnsemble(int64_t n, DriftSpec spec,
                                           std::vector<double> initial)
    : n_(n), drift_(spec) {
    if (n <= 0) throw std::invalid_argument("PointProcessEnsemble: n must be positive");
    if (!(spec.theta > 0.0) || spec.theta >= 1.0)
        throw IntensityInvalid("drift spec: theta must be in (0,1)");
    lambda_max_ = 1.0 + spec.theta;
    init_common(std::move(initial));
}

PointProcessEnsemble::PointProcessEnsemble(int64_t n, VaryingSpec spec,
                                           std::vector<double> initial)
    : n_(n), varying_(spec) {
    if (n <= 0) throw std::invalid_argument("PointProcessEnsemble: n must be positive");
    if (!(1.0 - spec.theta2 > 0.0))
        throw IntensityInvalid("varying spec: 1-theta2 must be positive");
    if (!(spec.theta3 > 0.0) || !(spec.theta1 >= 0.0))
        throw IntensityInvalid("varying spec: invalid intensities");
    lambda_max_ = std::max(1.0 + spec.theta1, spec.theta3);
    init_common(std::move(initial));
    refresh_band_counter();
}

void PointProcessEnsemble::init_common(std::vector<double> initial) {
    if (initial.empty()) initial.assign(size_t(n_), 0.0);
    if (int64_t(initial.size()) != n_)
        throw std::invalid_argument("PointProcessEnsemble: initial values size mismatch");
    x0_ = std::move(initial);
    jumps_.assign(size_t(n_), 0);
}

void PointProcessEnsemble::refresh_band_counter() {
    above_.assign(size_t(n_), 0);
    above_count_ = 0;
    const double ell = varying_->ell;
    const double now = time_.value();
    for (int64_t i = 0; i < n_; ++i) {
        if (value(i) > now + ell) {
            above_[size_t(i)] = 1;
            ++above_count_;
            exit_heap_.emplace(value(i) - ell, int32_t(i));
        }
    }
}

Regime PointProcessEnsemble::regime(int64_t i, double t) const {
    const double x = value(i);
    if (x < t) return Regime::Below;
    if (varying_ && x > t + varying_->ell) return Regime::Above;
    return Regime::Band;
}

double PointProcessEnsemble::intensity(int64_t i, double t) const {
    switch (regime(i, t)) {
        case Regime::Below: return drift_ ? 1.0 + drift_->theta : 1.0 + varying_->theta1;
        case Regime::Band: return drift_ ? 1.0 - drift_->theta : 1.0 - varying_->theta2;
        case Regime::Above: return varying_->theta3;
    }
    return 0.0;
}

int32_t PointProcessEnsemble::next_allocation(RandomStream& rng) {
    const double total_rate = double(n_) * lambda_max_;
    for (;;) {
        time_.add(rng.exponential(total_rate));
        ++candidates_;
        const double now = time_.value();
        const int32_t j = int32_t(rng.index(n_));
        const Regime before = regime(j, now);
        const double lam = intensity(j, now);
        // Construction audit: the rate handed to the sampler must match the
        // regime re-derived from the raw trajectory.
        {
            const double x = value(j);
            double expect;
            if (drift_)
                expect = x < now ? 1.0 + drift_->theta : 1.0 - drift_->theta;
            else if (x < now)
                expect = 1.0 + varying_->theta1;
            else if (x > now + varying_->ell)
                expect = varying_->theta3;
            else
                expect = 1.0 - varying_->theta2;
            if (lam != expect) ++violations_;
        }
        if (rng.uniform01() * lambda_max_ < lam) {
            if (varying_) {
                // Retire processes whose band-exit time has passed. Stale keys
                // (the process jumped while above) are re-pushed.
                const double ell = varying_->ell;
                while (!exit_heap_.empty() && exit_heap_.top().first <= now) {
                    const auto [exit_t, i] = exit_heap_.top();
                    exit_heap_.pop();
                    if (!above_[size_t(i)]) continue;
                    const double cur_exit = value(i) - ell;
                    if (cur_exit <= now) {
                        above_[size_t(i)] = 0;
                        --above_count_;
                    } else {
                        exit_heap_.emplace(cur_exit, i);
                    }
                }
            }
            ++jumps_[size_t(j)];
            ++total_points_;
            if (regime(j, now) != before) ++crossings_;
            if (varying_ && !above_[size_t(j)] && value(j) > now + varying_->ell) {
                above_[size_t(j)] = 1;
                ++above_count_;
                exit_heap_.emplace(value(j) - varying_->ell, j);
            }
            return j;
        }
    }
}

int64_t PointProcessEnsemble::count_above_band() const {
    if (!varying_) throw UnsupportedPolicy("count_above_band: drift spec has no band");
    // Exact as of the last superposition point (retirement runs there), which
    // is precisely where the Lemma 2.2 condition is evaluated.
    return above_count_;
}

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

namespace {

std::vector<double> loads_as_real(const LoadState& s) {
    std::vector<double> v(size_t(s.n));
    for (int64_t i = 0; i < s.n; ++i) v[size_t(i)] = double(s.scaled_load(i)) / double(s.n);
    return v;
}

class DriftPolicy final : public StrategyPolicy {
public:
    explicit DriftPolicy(double theta) : theta_(theta) {
        if (!(theta > 0.0) || theta > theta_upper_limit())
            throw ThetaOutOfRange("drift_policy: theta must be in (0, sqrt(5)-2]");
    }

    std::string name() const override { return "drift(" + std::to_string(theta_) + ")"; }

    void init(const LoadState& s) override {
        ensemble_ =
            std::make_unique<PointProcessEnsemble>(s.n, DriftSpec{theta_}, loads_as_real(s));
    }

    bool coupled_next() const override { return true; }

    int32_t couple(const LoadState&, RandomStream& aux) override {
        return ensemble_->next_allocation(aux);
    }

    bool accept(const DecisionContext&) override {
        throw UnsupportedPolicy("drift_policy: coupled strategy has no thinning decision");
    }

private:
    double theta_;
    std::unique_ptr<PointProcessEnsemble> ensemble_;
};

class VaryingDriftPolicy final : public StrategyPolicy {
public:
    VaryingDriftPolicy(double ell, int64_t n, double log_base,
                       std::optional<VaryingSpec> override_spec)
        : ell_(ell) {
        if (!(ell > 0)) throw std::invalid_argument("varying_drift_policy: ell must be positive");
        const double logn = std::log(double(n)) / std::log(log_base);
        if (!(logn > 0)) throw IntensityInvalid("varying_drift_policy: log n must be positive");
        if (override_spec) {
            spec_ = *override_spec;
            spec_.ell = ell;
            if (!(1.0 - spec_.theta2 > 0.0))
                throw IntensityInvalid("varying_drift_policy: 1 - theta2 <= 0 in override");
        } else {
            const double inv = 1.0 / std::sqrt(logn);
            spec_ = VaryingSpec{inv, inv, 12.0 * inv, ell};
            if (!(1.0 - spec_.theta2 > 0.0))
                throw IntensityInvalid(
                    "varying_drift_policy: 1 - theta2 <= 0 at this n; supply an override spec");
        }
        monitor_.threshold = double(n) / std::sqrt(logn);
    }

    std::string name() const override { return "varying_drift(" + std::to_string(ell_) + ")"; }

    void init(const LoadState& s) override {
        ensemble_ = std::make_unique<PointProcessEnsemble>(s.n, spec_, loads_as_real(s));
        // Condition for the first ball is evaluated at T_0 = 0.
        monitor_.check(*ensemble_, 0);
    }

    bool coupled_next() const override { return !monitor_.tripped; }

    int32_t couple(const LoadState&, RandomStream& aux) override {
        return ensemble_->next_allocation(aux);
    }

    // Fallback after the trip: accept every primary, for the sake of completion.
    bool accept(const DecisionContext&) override { return true; }

    void on_step(const LoadState&, const StepRecord& rec) override {
        // The condition for ball k+1 is evaluated at the superposition point T_k.
        if (!monitor_.tripped && rec.decision == StepKind::Coupled)
            monitor_.check(*ensemble_, rec.k);
    }

    const FeasibilityMonitor& monitor() const { return monitor_; }

private:
    double ell_;
    VaryingSpec spec_;
    FeasibilityMonitor monitor_;
    std::unique_ptr<PointProcessEnsemble> ensemble_;
};

}  // namespace

std::unique_ptr<StrategyPolicy> drift_policy(double theta) {
    return std::make_unique<DriftPolicy>(theta);
}

std::unique_ptr<StrategyPolicy> varying_drift_policy(double ell, int64_t n, double log_base,
                                                     std::optional<VaryingSpec> override_spec) {
    return std::make_unique<VaryingDriftPolicy>(ell, n, log_base, override_spec);
}

// ---------------------------------------------------------------------------
// Standardizing diagnostic
// ---------------------------------------------------------------------------

std::string StandardizingReport::to_json() const {
    std::ostringstream os;
    os << "{\"points\":" << points << ",\"candidates\":" << candidates
       << ",\"crossings\":" << crossings << ",\"violations\":" << violations
       << ",\"time_below\":" << time_below << ",\"time_above\":" << time_above
       << ",\"horizon\":" << horizon << "}";
    return os.str();
}

StandardizingReport standardizing_diagnostic(int64_t n, DriftSpec spec,
                                             std::vector<double> initial, int64_t points,
                                             RandomStream& rng) {
    if (initial.empty()) initial.assign(size_t(n), 0.0);
    PointProcessEnsemble ens(n, spec, initial);
    StandardizingReport rep;

    // Exact residency integration with a shadow copy of the trajectory:
    // between points of process i its value x is constant, so on [from, upto]
    // it is in the 1-theta regime while t <= x and in the 1+theta regime after.
    std::vector<double> shadow = initial;
    std::vector<double> last_update(size_t(n), 0.0);
    auto settle = [&](int64_t i, double upto) {
        const double from = last_update[size_t(i)];
        if (upto <= from) return;
        const double x = shadow[size_t(i)];
        const double above_until = std::clamp(x, from, upto);
        rep.time_above += above_until - from;
        rep.time_below += upto - above_until;
        last_update[size_t(i)] = upto;
    };

    for (int64_t p = 0; p < points; ++p) {
        const int32_t j = ens.next_allocation(rng);
        const double now = ens.time();
        settle(j, now);
        shadow[size_t(j)] += 1.0;
    }
    const double horizon = ens.time();
    for (int64_t i = 0; i < n; ++i) settle(i, horizon);

    rep.points = ens.total_points();
    rep.candidates = ens.candidates();
    rep.crossings = ens.crossings();
    rep.violations = ens.violations();
    rep.horizon = horizon;
    return rep;
}

}  // namespace thinning::pp
