#include "doctest.h"
#include "thinning/metrics.hpp"
#include "thinning/strategies.hpp"

using namespace thinning;
using namespace thinning::metrics;

namespace {

// Builds a RunTrace with a given per-step max series (stride 1, load units
// times n for clarity at n = 1).
RunTrace synthetic_trace(std::vector<int64_t> series, int64_t n = 1) {
    RunTrace tr;
    tr.n = n;
    tr.m = int64_t(series.size());
    tr.series_stride = 1;
    tr.maxload_final_scaled = series.empty() ? 0 : series.back();
    tr.maxload_alltime_scaled = series.empty() ? 0 : *std::max_element(series.begin(), series.end());
    tr.max_series = std::move(series);
    return tr;
}

}  // namespace

TEST_CASE("maxload_at reads the recorded step") {
    const RunTrace tr = synthetic_trace({1, 3, 2});
    CHECK(maxload_at(tr, 1) == 1);
    CHECK(maxload_at(tr, 2) == 3);
    CHECK(maxload_at(tr, 3) == 2);
    CHECK_THROWS_AS(maxload_at(tr, 4), std::out_of_range);
}

TEST_CASE("maxload_interval takes the max over recorded steps") {
    const RunTrace tr = synthetic_trace({1, 3, 2});
    CHECK(maxload_interval(tr).value == 3);
    CHECK(maxload_interval(tr).exact);
    CHECK(maxload_interval(tr, 1, 1).value == 1);
    CHECK(maxload_interval(tr, 3, 3).value == 2);  // singleton M = {m}
    // monotone in the right endpoint
    int64_t prev = INT64_MIN;
    for (int64_t hi = 1; hi <= 3; ++hi) {
        const int64_t v = maxload_interval(tr, 1, hi).value;
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("subsampled series flags interval inexactness") {
    RunTrace tr = synthetic_trace({3, 2});
    tr.series_stride = 2;
    tr.m = 4;
    CHECK_FALSE(maxload_interval(tr).exact);
}

TEST_CASE("typical load on the worked example") {
    const RunTrace tr = synthetic_trace({1, 2, 2, 3, 1});
    // eps = 0.4 -> need 2 steps; values >= 2 at 3 steps, >= 3 at 1 step
    const auto t = maxload_typical(tr, 0.4);
    REQUIRE(t.value.has_value());
    CHECK(*t.value == 2);
    // eps small enough that one exceedance suffices: equals the interval max
    const auto t0 = maxload_typical(tr, 0.1);
    REQUIRE(t0.value.has_value());
    CHECK(*t0.value == maxload_interval(tr).value);
    // eps = 1: every step must clear the level -> min of per-step maxima
    const auto t1 = maxload_typical(tr, 1.0);
    REQUIRE(t1.value.has_value());
    CHECK(*t1.value == 1);
}

TEST_CASE("typical load is 'none' when no positive level qualifies") {
    const RunTrace tr = synthetic_trace({0, 0, -1});
    CHECK_FALSE(maxload_typical(tr, 0.5).value.has_value());
}

TEST_CASE("typical load sandwich: provable links hold on real traces") {
    auto policy = relative_threshold_policy(2.0);
    RunConfig cfg;
    cfg.series_stride = 1;
    const RunTrace tr = run_seeded(256, 2048, *policy, 77, {}, cfg);
    const auto all = maxload_interval(tr);
    CHECK(all.value == tr.maxload_alltime_scaled);
    CHECK(tr.maxload_final_scaled <= all.value);
    const auto typ = maxload_typical(tr, 0.1);
    if (typ.value) CHECK(*typ.value <= all.value);
    // a single exceedance suffices at eps <= 1/m: typical equals the
    // all-time maximum and the full chain is exact
    const auto typ1 = maxload_typical(tr, 0.5 / double(tr.m));
    REQUIRE(typ1.value.has_value());
    CHECK(*typ1.value == all.value);
    CHECK(tr.maxload_final_scaled <= *typ1.value);
}

TEST_CASE("the lower sandwich link is not pointwise: end-spike counterexample") {
    // per-step maxima 1 then 2 (two balls into one bin at n=2); at eps = 1
    // the typical load is 1 while the final max load is 2
    const RunTrace tr = synthetic_trace({1, 2}, 2);
    const auto typ = maxload_typical(tr, 1.0);
    REQUIRE(typ.value.has_value());
    CHECK(*typ.value == 1);
    CHECK(tr.maxload_final_scaled == 2);  // exceeds the typical level
}

TEST_CASE("level set counts with scaled comparisons") {
    LoadState s = LoadState::make(4);
    s.counts = {3, 1, 0, 2};  // scaled loads 12-6=6, -2, -6, 2
    s.k = 6;
    CHECK(level_set_count(s, {}, 0.0) == 2);   // loads >= 0: bins 0 and 3
    CHECK(level_set_count(s, {}, 10.0) == 0);  // above max
    CHECK(level_set_count(s, {}, -10.0) == 4); // below min
    CHECK(level_set_count(s, {1, 2}, -0.5) == 1);  // load -0.5 >= -0.5 counts
    CHECK(level_set_count(s, {1, 2}, -0.4) == 0);
    CHECK(level_set_count(s, {0, 3}, 0.5) == 2);
}

TEST_CASE("primary suggestion counts need full records") {
    auto policy = accept_all_policy();
    RunConfig cfg;
    cfg.keep_step_records = true;
    const RunTrace tr = run_seeded(2, 100, *policy, 5, {}, cfg);
    CHECK(primary_suggestion_count(tr, {}, 0) == 2);  // ell = 0: every bin
    CHECK(primary_suggestion_count(tr, {}, 1000) == 0);
    // empty step set convention
    CHECK(primary_suggestion_count(tr, {}, 1, 5, 4) == 0);
    CHECK(primary_suggestion_count(tr, {}, 0, 5, 4) == 2);
    // tallies agree with the recorded primaries
    int64_t ones = 0;
    for (const auto& st : tr.steps) ones += st.primary == 1;
    CHECK(primary_suggestion_count(tr, {1}, ones) == 1);
    CHECK(primary_suggestion_count(tr, {1}, ones + 1) == 0);

    RunTrace no_steps = tr;
    no_steps.steps.clear();
    CHECK_THROWS_AS(primary_suggestion_count(no_steps, {}, 1), PreconditionUnmet);
}

TEST_CASE("decomposition identity holds in scaled integers") {
    auto policy = threshold_policy(2);
    const RunTrace tr = run_seeded(16, 5000, *policy, 21);
    const auto d = decompose(tr.final_state);
    const LoadState& s = tr.final_state;
    for (int64_t i = 0; i < s.n; ++i) {
        // n*L_i = n*(L_i(0) + L1 + L2) - k exactly
        const int64_t lhs = s.scaled_load(i);
        const int64_t rhs =
            s.n * (s.initial_loads[size_t(i)] + d.primary[size_t(i)] + d.secondary[size_t(i)]) -
            s.k;
        CHECK(lhs == rhs);
        CHECK(d.secondary[size_t(i)] >= 0);
    }
}

TEST_CASE("csv rows round-trip losslessly") {
    ResultRow r;
    r.trial = 3;
    r.n = 1024;
    r.m = 4096;
    r.strategy = "relative_threshold(ell=2.5)";
    r.seed = 0xdeadbeef;
    r.maxload_final_scaled = 512;
    r.maxload_alltime_scaled = 1024;
    r.maxload_typical_scaled = 768;
    r.eps = 0.1;
    r.retries = 77;
    r.coupled_steps = 0;
    r.wallclock_ms = 12.5;
    const ResultRow back = from_csv(to_csv(r));
    CHECK(back.trial == r.trial);
    CHECK(back.n == r.n);
    CHECK(back.m == r.m);
    CHECK(back.strategy == r.strategy);
    CHECK(back.seed == r.seed);
    CHECK(back.maxload_final_scaled == r.maxload_final_scaled);
    CHECK(back.maxload_alltime_scaled == r.maxload_alltime_scaled);
    CHECK(back.maxload_typical_scaled == r.maxload_typical_scaled);
    CHECK(back.eps == doctest::Approx(r.eps));
    CHECK(back.retries == r.retries);
    CHECK(back.coupled_steps == r.coupled_steps);

    // absent typical/retries stay absent
    ResultRow sparse;
    sparse.strategy = "drift";
    const ResultRow back2 = from_csv(to_csv(sparse));
    CHECK_FALSE(back2.maxload_typical_scaled.has_value());
    CHECK_FALSE(back2.retries.has_value());
}
