#include <cmath>

#include "doctest.h"
#include "thinning/analysis.hpp"
#include "thinning/engine.hpp"
#include "thinning/strategies.hpp"

using namespace thinning;

namespace {

DecisionContext make_ctx(int64_t k, int64_t n, int32_t primary, int64_t scaled_load,
                         int64_t accepted, double u = 0.5) {
    DecisionContext ctx;
    ctx.k = k;
    ctx.n = n;
    ctx.primary = primary;
    ctx.primary_scaled_load = scaled_load;
    ctx.primary_accepted = accepted;
    ctx.u = u;
    return ctx;
}

// Feeds an accept of `bin` to the policy so its internal counters advance.
void feed_accept(StrategyPolicy& p, LoadState& s, int32_t bin) {
    StepRecord rec;
    rec.k = s.k + 1;
    rec.primary = bin;
    rec.decision = StepKind::Accept;
    rec.final_bin = bin;
    ++s.accepted_primaries[size_t(bin)];
    ++s.counts[size_t(bin)];
    s.k = rec.k;
    rec.max_scaled = s.max_scaled_load();
    p.on_step(s, rec);
}

}  // namespace

TEST_CASE("threshold policy boundary behavior") {
    auto p = threshold_policy(3.0);
    LoadState s = LoadState::make(2);
    p->init(s);
    // accepted = ell - 1 -> accept; accepted = ell -> reject
    feed_accept(*p, s, 0);
    feed_accept(*p, s, 0);
    CHECK(p->accept(make_ctx(3, 2, 0, s.scaled_load(0), 2)));
    feed_accept(*p, s, 0);
    CHECK_FALSE(p->accept(make_ctx(4, 2, 0, s.scaled_load(0), 3)));
    // the other bin is untouched
    CHECK(p->accept(make_ctx(4, 2, 1, s.scaled_load(1), 0)));
    CHECK_THROWS(threshold_policy(-1.0));
}

TEST_CASE("threshold policy caps accepted primaries at t+ell") {
    const int64_t n = 512, m = 4 * n;
    const double cap = 4 + 2.0;  // t + ell with t = 4, ell = 2
    auto p = threshold_policy(cap);
    const RunTrace tr = run_seeded(n, m, *p, 31);
    for (int64_t i = 0; i < n; ++i)
        CHECK(double(tr.final_state.accepted_primaries[size_t(i)]) <= cap);
}

TEST_CASE("relative threshold reduces to plain threshold at k=1 and escapes on low load") {
    auto p = relative_threshold_policy(1.0);
    LoadState s = LoadState::make(2);
    p->init(s);
    // k=1: (k-1)/n = 0, accepted 0 < 1 -> accept
    CHECK(p->accept(make_ctx(1, 2, 0, 0, 0)));
    feed_accept(*p, s, 0);
    // k=2: threshold is 1 + 1/2; accepted 1 -> 2*1 < 2*1+1 -> accept
    CHECK(p->accept(make_ctx(2, 2, 0, s.scaled_load(0), 1)));
    feed_accept(*p, s, 0);
    // k=3: threshold 1 + 2/2 = 2; accepted 2 -> 2*2 < 2+2 false; load is
    // positive, so reject
    CHECK_FALSE(p->accept(make_ctx(3, 2, 0, s.scaled_load(0), 2)));
    // deeply underloaded bin is always accepted: scaled load <= -ceil(n ln n)
    CHECK(p->accept(make_ctx(3, 2, 0, -2, 2)));
}

TEST_CASE("multi-stage schedule arithmetic from the worked example") {
    // k = 2, beta = 0.8, eta = 0: eps = 0.1, beta_i = 0.8 - 0.1 i
    Overrides ov;
    ov.scalars["k"] = 2;
    ov.scalars["alpha"] = 0.8;
    const auto sched = MultiStageSchedule::derive(40.0, 0.0, std::nullopt, 0.0, 1 << 16,
                                                  kNaturalBase, ov);
    CHECK(sched.k == 2);
    CHECK(sched.beta == doctest::Approx(0.8));
    CHECK(sched.eps == doctest::Approx(0.1));
    REQUIRE(sched.beta_i.size() == 2);
    CHECK(sched.beta_i[0] == doctest::Approx(0.7));
    CHECK(sched.beta_i[1] == doctest::Approx(0.6));
    // t_i = floor(t - (log n)^{beta_i}), t_k = t
    const double logn = std::log(double(1 << 16));
    CHECK(sched.t_i[1] == doctest::Approx(std::floor(40.0 - std::pow(logn, 0.7))));
    CHECK(sched.t_i[2] == doctest::Approx(40.0));
    // ell defaults to floor((log n)^{beta_k})
    CHECK(sched.ell == doctest::Approx(std::floor(std::pow(logn, 0.6))));
    CHECK(sched.provenance.at("k") == Provenance::Override);
    CHECK(sched.provenance.at("beta_i") == Provenance::Formula);
}

TEST_CASE("stage count formula at log log n = 30") {
    // k = floor(30 / (3 ln 30)) = 2 with everything else overridden; feed the
    // formula the nested logs via a synthetic n is impossible at desk scale,
    // so check the arithmetic directly.
    const double loglogn = 30.0;
    const double k = std::floor(loglogn / (3.0 * std::log(loglogn)));
    CHECK(k == 2.0);
}

TEST_CASE("multi-stage requires overrides at desk scale") {
    CHECK_THROWS_AS(
        MultiStageSchedule::derive(10.0, 0.0, std::nullopt, 0.0, 1 << 16, kNaturalBase, {}),
        ParamOutOfAsymptoticRange);
}

TEST_CASE("multi-stage rejects non-increasing stage boundaries") {
    Overrides ov;
    ov.scalars["k"] = 2;
    ov.scalars["alpha"] = 0.8;
    // t too small: t_1 = floor(t - logn^0.7) <= 0 = t_0
    CHECK_THROWS_AS(
        MultiStageSchedule::derive(2.0, 0.0, std::nullopt, 0.0, 1 << 16, kNaturalBase, ov),
        ScheduleInvalid);
}

TEST_CASE("multi-stage H0 is empty when no bin exceeds L0") {
    Overrides ov;
    ov.scalars["k"] = 2;
    ov.scalars["alpha"] = 0.8;
    auto sched = MultiStageSchedule::derive(40.0, 0.0, 3.0, 0.0, 256, kNaturalBase, ov);
    MultiStagePolicy policy(sched, 256);
    LoadState s = LoadState::make(256);
    policy.init(s);
    CHECK(policy.h_sets().size() == 1);
    CHECK(policy.h_sets()[0].empty());
}

TEST_CASE("multi-stage H0 members are rejected in stage one unless underloaded") {
    Overrides ov;
    ov.scalars["k"] = 2;
    ov.scalars["alpha"] = 0.8;
    const int64_t n = 256;
    auto sched = MultiStageSchedule::derive(40.0, 1.0, 3.0, 0.0, n, kNaturalBase, ov);
    MultiStagePolicy policy(sched, n);
    std::vector<int64_t> init(size_t(n), 0);
    init[0] = 4;  // H0 = {0}
    init[1] = -4;
    LoadState s = LoadState::make(n, init);
    policy.init(s);
    REQUIRE(policy.h_sets().size() == 1);
    REQUIRE(policy.h_sets()[0] == std::vector<int32_t>{0});
    // bin 0 rejected while its load is above the low-load cutoff
    CHECK_FALSE(policy.accept(make_ctx(1, n, 0, s.scaled_load(0), 0)));
    // a fresh bin is accepted
    CHECK(policy.accept(make_ctx(1, n, 2, s.scaled_load(2), 0)));
    // the low-load escape wins over H0 membership
    CHECK(policy.accept(make_ctx(1, n, 0, analysis::low_load_cut_scaled(n, kNaturalBase), 0)));
}

TEST_CASE("multi-stage H sets are disjoint and fixed at boundaries") {
    Overrides ov;
    ov.scalars["k"] = 2;
    ov.scalars["alpha"] = 0.78;
    const int64_t n = 512;
    const double t = 8.0;
    auto policy = multi_stage_policy(t, 0.0, 1.0, 0.0, n, kNaturalBase, ov);
    const RunTrace tr = run_seeded(n, int64_t(t) * n, *policy, 5150);
    (void)tr;
    auto* ms = dynamic_cast<MultiStagePolicy*>(policy.get());
    REQUIRE(ms != nullptr);
    // stage boundaries passed: H_0, H_1 recorded (k = 2 stages)
    CHECK(ms->h_sets().size() == 2);
    std::vector<int32_t> seen;
    for (const auto& h : ms->h_sets())
        for (int32_t b : h) seen.push_back(b);
    std::sort(seen.begin(), seen.end());
    CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());  // disjoint
}

TEST_CASE("drift multi-stage with t_prime = 0 is bit-identical to pure multi-stage") {
    Overrides ov;
    ov.scalars["k"] = 2;
    ov.scalars["alpha"] = 0.8;
    const int64_t n = 128;
    const double t = 40.0;
    RunConfig cfg;
    cfg.keep_step_records = true;
    auto composite = drift_multi_stage_policy(0.2, 0.0, t, 0.0, 3.0, 0.0, n, kNaturalBase, ov);
    auto pure = multi_stage_policy(t, 0.0, 3.0, 0.0, n, kNaturalBase, ov);
    const RunTrace a = run_seeded(n, int64_t(t) * n, *composite, 999, {}, cfg);
    const RunTrace b = run_seeded(n, int64_t(t) * n, *pure, 999, {}, cfg);
    REQUIRE(a.steps.size() == b.steps.size());
    for (size_t i = 0; i < a.steps.size(); ++i) {
        CHECK(a.steps[i].final_bin == b.steps[i].final_bin);
        CHECK(a.steps[i].decision == b.steps[i].decision);
    }
}

TEST_CASE("drift multi-stage hands off at floor(n t')") {
    Overrides ov;
    ov.scalars["k"] = 2;
    ov.scalars["alpha"] = 0.8;
    const int64_t n = 64;
    auto policy = drift_multi_stage_policy(0.2, 2.0, 40.0, 0.0, 3.0, 0.0, n, kNaturalBase, ov);
    RunConfig cfg;
    cfg.keep_step_records = true;
    const RunTrace tr = run_seeded(n, 5 * n, *policy, 4242, {}, cfg);
    CHECK(tr.coupled_steps == 2 * n);  // drift phase exactly
    for (size_t i = 0; i < tr.steps.size(); ++i) {
        if (int64_t(i) < 2 * n)
            CHECK(tr.steps[i].decision == StepKind::Coupled);
        else
            CHECK(tr.steps[i].decision != StepKind::Coupled);
    }
}

TEST_CASE("pure drift composite when t = 0") {
    const int64_t n = 32;
    auto policy = drift_multi_stage_policy(0.2, 3.0, 0.0, 0.0, std::nullopt, 0.0, n);
    const RunTrace tr = run_seeded(n, 5 * n, *policy, 7);
    CHECK(tr.coupled_steps == 5 * n);
    CHECK_FALSE(tr.retries.has_value());
}

TEST_CASE("q-multi-scale worked parameter example") {
    Overrides ov;
    ov.scalars["k"] = 2;
    ov.scalars["alpha1"] = 0.8;
    const auto sched = MultiScaleSchedule::derive(1 << 16, kNaturalBase, ov);
    CHECK(sched.k == 2);
    REQUIRE(sched.eps_i.size() >= 1);
    CHECK(sched.eps_i[0] == doctest::Approx(0.1));
    // ell_1 = (log n)^{0.6}, alpha'_1 = 0.78
    const double logn = std::log(double(1 << 16));
    CHECK(sched.ell_i[0] == doctest::Approx(std::pow(logn, 0.6)));
    CHECK(sched.alpha_prime_i[0] == doctest::Approx(0.78));
    // N_i >= 1 always
    for (int64_t N : sched.N_i) CHECK(N >= 1);
    CHECK(sched.i_max == 1);
    // scale 2 length: N_1 (floor(logn^0.8) + floor(logn^0.78)) = 12
    CHECK(sched.scale_duration(2) == 12);
}

TEST_CASE("q-multi-scale with i_max forced to 0 matches the relative threshold bit-for-bit") {
    Overrides ov;
    ov.scalars["k"] = 2;
    ov.scalars["alpha1"] = 0.8;
    ov.scalars["i_max"] = 0;
    const int64_t n = 512;
    const auto sched = MultiScaleSchedule::derive(n, kNaturalBase, ov);
    RunConfig cfg;
    cfg.keep_step_records = true;
    auto qms = q_multi_scale_policy(0.0, n, kNaturalBase, ov);
    auto rel = relative_threshold_policy(sched.L);
    const RunTrace a = run_seeded(n, 6 * n, *qms, 2024, {}, cfg);
    const RunTrace b = run_seeded(n, 6 * n, *rel, 2024, {}, cfg);
    REQUIRE(a.steps.size() == b.steps.size());
    for (size_t i = 0; i < a.steps.size(); ++i) {
        CHECK(a.steps[i].final_bin == b.steps[i].final_bin);
        CHECK(a.steps[i].decision == b.steps[i].decision);
    }
}

TEST_CASE("long-term policy runs its phase sequence at a desk-scale override") {
    // n must be large enough that the regulating multi-stage schedule inside
    // the multi-scale phase stays valid (t_1 >= 1); 2^14 is the smallest
    // power of two where the k=2, alpha1=0.8 override works end to end.
    Overrides ov;
    ov.scalars["k"] = 2;
    ov.scalars["alpha1"] = 0.8;
    const int64_t n = 1 << 14;
    const auto sched = LongTermSchedule::derive(1.0, n, kNaturalBase, ov);
    auto policy = d_multiscale_longterm_policy(1.0, n, kNaturalBase, ov);
    // run one full first iteration (phase 2 + phase 3) plus the start of the
    // next iteration's phase 1
    const int64_t m = sched.m1 + sched.m2 + 1000;
    RunConfig cfg;
    cfg.series_stride = 0;
    const RunTrace tr = run_seeded(n, m, *policy, 11, {}, cfg);
    CHECK(tr.coupled_steps >= sched.m2);  // phase 3 is coupled
    CHECK(tr.coupled_steps < m);          // phases 1-2 are not
    CHECK(tr.retries.has_value());
}

TEST_CASE("long-term watchdog fires when phase 3 cannot stop") {
    Overrides ov;
    ov.scalars["k"] = 2;
    ov.scalars["alpha1"] = 0.8;
    ov.scalars["m2"] = 1e15;  // unreachable stopping ball count
    const int64_t n = 1 << 14;
    auto policy = d_multiscale_longterm_policy(1.0, n, kNaturalBase, ov, /*budget=*/20000);
    const auto sched = LongTermSchedule::derive(1.0, n, kNaturalBase, ov);
    RunConfig cfg;
    cfg.series_stride = 0;
    CHECK_THROWS_AS(run_seeded(n, sched.m1 + 50000, *policy, 3, {}, cfg), WatchdogExceeded);
}

TEST_CASE("q-multi-scale reports ScheduleInvalid when n is too small for the override") {
    Overrides ov;
    ov.scalars["k"] = 2;
    ov.scalars["alpha1"] = 0.8;
    // at n = 256 the regulating multi-stage degenerates (t_1 = 0)
    auto policy = q_multi_scale_policy(0.0, 256, kNaturalBase, ov);
    RunConfig cfg;
    cfg.series_stride = 0;
    CHECK_THROWS_AS(run_seeded(256, 10 * 256, *policy, 3, {}, cfg), ScheduleInvalid);
}

TEST_CASE("long-term m0 formula substitution") {
    // m0 = floor(200 d n log n) at d = 1, n = 10^4
    Overrides ov;
    ov.scalars["k"] = 2;
    ov.scalars["alpha1"] = 0.8;
    const auto sched = LongTermSchedule::derive(1.0, 10000, kNaturalBase, ov);
    CHECK(sched.m0 == 18420680);
}

TEST_CASE("realize_distribution: acceptance probabilities and output law") {
    // n=2, p=(0.6,0.4), c=0.8: accept probs (0.4, 0.0), P(Z=0) = 0.6
    const auto acc = realize_accept_probabilities({0.6, 0.4}, 0.8);
    CHECK(acc[0] == doctest::Approx(0.4));
    CHECK(acc[1] == doctest::Approx(0.0));

    auto policy = realize_distribution({0.6, 0.4}, 0.8);
    RunConfig cfg;
    cfg.series_stride = 0;
    const RunTrace tr = run_seeded(2, 1000000, *policy, 314, {}, cfg);
    const double f0 = double(tr.final_state.counts[0]) / 1e6;
    CHECK(std::fabs(f0 - 0.6) < 0.002);

    // uniform target: output uniform, accept probability 1-c everywhere
    const auto acc_u = realize_accept_probabilities({0.25, 0.25, 0.25, 0.25}, 0.5);
    for (double a : acc_u) CHECK(a == doctest::Approx(0.5));

    // band violation
    CHECK_THROWS_AS(realize_distribution({0.9, 0.1}, 0.5), BandViolation);
}

TEST_CASE("threshold guarantees the primary-load cap from the analysis") {
    // with ell = t + l, no bin accepts more than t + l primaries
    const int64_t n = 1000, t = 3;
    const double l = 2.0;
    auto policy = threshold_policy(double(t) + l);
    const RunTrace tr = run_seeded(n, t * n, *policy, 88);
    int64_t max_acc = 0;
    for (int64_t i = 0; i < n; ++i)
        max_acc = std::max(max_acc, tr.final_state.accepted_primaries[size_t(i)]);
    CHECK(double(max_acc) <= double(t) + l);
}
