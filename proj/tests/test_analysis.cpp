#include <cmath>
#include <map>

#include "doctest.h"
#include "thinning/analysis.hpp"
#include "thinning/engine.hpp"
#include "thinning/strategies.hpp"

using namespace thinning;
using namespace thinning::analysis;

TEST_CASE("rate function values") {
    CHECK(rate_I(0.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(rate_I(1.0) == doctest::Approx(2.0 * std::log(2.0) - 1.0).epsilon(1e-14));
    CHECK(rate_I(4.0) == doctest::Approx(4.047189562170502).epsilon(1e-13));
    CHECK_THROWS_AS(rate_I(-1.0), PreconditionUnmet);
    // positivity away from zero
    for (double x : {-0.9, -0.5, 0.3, 2.0, 7.5}) CHECK(rate_I(x) > 0.0);
}

TEST_CASE("rate function bound grids") {
    // x in [0,4]: x^2/4 <= I <= x^2/2
    for (int i = 0; i <= 400; ++i) {
        const double x = 4.0 * i / 400.0;
        const double I = rate_I(x);
        CHECK(I >= x * x / 4.0 - 1e-12);
        CHECK(I <= x * x / 2.0 + 1e-12);
    }
    // x >= 4: x log(x/e) <= I <= 3x log(x/e)
    for (double x : {4.0, 5.5, 10.0, 40.0}) {
        const double I = rate_I(x);
        const double base = x * std::log(x / std::exp(1.0));
        CHECK(I >= base - 1e-9);
        CHECK(I <= 3.0 * base + 1e-9);
    }
    CHECK(4.0 * std::log(4.0 / std::exp(1.0)) == doctest::Approx(1.5451774444795625));
}

TEST_CASE("poisson tail exact values") {
    // frozen reference: P(Poisson(100) >= 120) computed independently
    const auto t = poisson_tail_exact(100, 20, TailSide::Upper);
    CHECK(t.value == doctest::Approx(0.02823039396486565).epsilon(1e-9));
    // inside the sandwich
    const auto sw = poisson_tail_sandwich(100, 20);
    CHECK(sw.lower == doctest::Approx(0.023349641914574).epsilon(1e-9));
    CHECK(sw.upper == doctest::Approx(0.15280589620356277).epsilon(1e-9));
    CHECK(t.value >= sw.lower);
    CHECK(t.value <= sw.upper);

    // median near mean: P(X >= lambda) >= 1/2 - o(1)
    CHECK(poisson_tail_exact(50, 0, TailSide::Upper).value ==
          doctest::Approx(0.5188083154720433).epsilon(1e-9));
    CHECK(poisson_tail_exact(100, 0, TailSide::Upper).value ==
          doctest::Approx(0.5132987982791487).epsilon(1e-9));
    CHECK(poisson_tail_exact(200, 0, TailSide::Upper).value ==
          doctest::Approx(0.5094034180072367).epsilon(1e-9));

    // monotone decreasing in kappa
    double prev = 1.0;
    for (double kappa : {1.0, 5.0, 20.0, 50.0, 120.0}) {
        const double v = poisson_tail_exact(100, kappa, TailSide::Upper).value;
        CHECK(v <= prev);
        prev = v;
    }
    // lower side: complement identity P(X <= l-k) + P(X >= l-k+1) = 1
    const double lo = poisson_tail_exact(100, 10, TailSide::Lower).value;
    const double hi = poisson_tail_exact(100, -9, TailSide::Upper).value;
    CHECK(lo + hi == doctest::Approx(1.0).epsilon(1e-10));
    CHECK_THROWS_AS(poisson_tail_exact(2e6, 1, TailSide::Upper), PreconditionUnmet);
}

TEST_CASE("sandwich lower bound is asymptotic: holds at kappa=0.2*lambda, fails at sqrt") {
    // the flag matters: at kappa ~ sqrt(lambda) the exact tail sits below
    // e^{-2 lambda I} for every lambda, so the lower bound can only be used
    // in the large-deviation regime
    const auto ok = poisson_tail_exact(100, 20, TailSide::Upper);
    CHECK(ok.value >= poisson_tail_sandwich(100, 20).lower);
    const auto fail = poisson_tail_exact(100, 10, TailSide::Upper);
    CHECK(fail.value < poisson_tail_sandwich(100, 10).lower);
    CHECK(poisson_tail_sandwich(100, 10).lower_is_asymptotic);
}

TEST_CASE("sandwich bounds square when lambda doubles at fixed kappa/lambda") {
    const auto a = poisson_tail_sandwich(50, 10);
    const auto b = poisson_tail_sandwich(100, 20);
    CHECK(b.upper == doctest::Approx(a.upper * a.upper).epsilon(1e-10));
    CHECK(b.lower == doctest::Approx(a.lower * a.lower).epsilon(1e-10));
    const auto z = poisson_tail_sandwich(10, 0);
    CHECK(z.lower == doctest::Approx(1.0));
    CHECK(z.upper == doctest::Approx(1.0));
}

TEST_CASE("retry threshold values and scaling") {
    const auto rt = retry_threshold(1000, 1.0, 4.0);
    CHECK(rt.r_star == doctest::Approx(65.13357691760554).epsilon(1e-10));
    const auto rt10 = retry_threshold(10000, 1.0, 4.0);
    CHECK(rt10.r_star == doctest::Approx(10.0 * rt.r_star).epsilon(1e-12));
    CHECK(rt10.log_failure_bound == doctest::Approx(-10000.0 * std::exp(-rate_I(4.0))));
    CHECK_THROWS_AS(retry_threshold(10, 1.0, 0.0), PreconditionUnmet);
}

TEST_CASE("drift bounds: values, vacuous flag, k0") {
    const auto b300 = drift_tail_bound(0.2, 300);
    CHECK(b300.value == doctest::Approx(0.049153698826625666).epsilon(1e-10));
    CHECK_FALSE(b300.vacuous);
    const auto b200 = drift_tail_bound(0.2, 200);
    CHECK(b200.value == doctest::Approx(2.6837010232200944).epsilon(1e-10));
    CHECK(b200.vacuous);
    // bound is monotone decreasing in k and vacuous exactly above 1
    double prev = 1e9;
    for (int k = 50; k <= 500; k += 50) {
        const auto b = drift_tail_bound(0.2, k);
        CHECK(b.value < prev);
        CHECK(b.vacuous == (b.value > 1.0));
        prev = b.value;
    }
    CHECK(drift_levelset_k0(0.2) == doctest::Approx(77.00902459542083).epsilon(1e-12));
    CHECK_THROWS_AS(drift_levelset_bound(0.2, 200, 1000), PreconditionUnmet);
    const auto ls = drift_levelset_bound(0.2, 240, 1000);
    CHECK(ls.count_threshold ==
          doctest::Approx(4000.0 * 1000.0 * std::exp(-0.2 * 240.0 / 3.0)));
    CHECK(ls.prob_bound > 0.0);
}

TEST_CASE("subset max-load bound") {
    const auto empty = subset_maxload_bound(1.0, 1, 0);
    CHECK(empty.value == doctest::Approx(2.0));
    CHECK(empty.vacuous);
    const auto b = subset_maxload_bound(1.0, 1, 100);
    CHECK(b.value == doctest::Approx(2.0 * std::exp(-100.0 / std::exp(1.0))).epsilon(1e-12));
    // monotone decreasing in |S|
    CHECK(subset_maxload_bound(0.5, 3, 1000).value <
          subset_maxload_bound(0.5, 3, 100).value);
}

TEST_CASE("chi-square survival function against frozen references") {
    CHECK(chi_square_sf(10.0, 9) == doctest::Approx(0.3504852123233613).epsilon(1e-10));
    CHECK(chi_square_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-10));
    CHECK(chi_square_sf(1.0, 4) == doctest::Approx(0.9097959895689501).epsilon(1e-10));
    CHECK(chi_square_sf(120.0, 99) == doctest::Approx(0.07424385580596692).epsilon(1e-9));
}

TEST_CASE("rational arithmetic stays exact") {
    Rational a(1, 3), b(1, 6);
    CHECK((a + b) == Rational(1, 2));
    CHECK((a * b) == Rational(1, 18));
    Rational total;
    for (int i = 0; i < 81; ++i) total = total + Rational(1, 81);
    CHECK(total == Rational(1, 1));
}

TEST_CASE("exact dp: single bin is deterministic") {
    const auto dist = exact_small_dp(1, 5, DpPolicyKind::Threshold, {.ell = 1.0});
    CHECK(dist.states.size() == 1);
    CHECK(dist.total() == Rational(1, 1));
}

TEST_CASE("exact dp: threshold(1), n=2, m=2 gives P(max=2) = 1/4") {
    const auto dist = exact_small_dp(2, 2, DpPolicyKind::Threshold, {.ell = 1.0});
    CHECK(dist.total() == Rational(1, 1));
    CHECK(dist.prob_max_count_at_least(2) == Rational(1, 4));
}

TEST_CASE("exact dp: threshold(1), n=3, m=2 gives P(max=2) = 1/9") {
    const auto dist = exact_small_dp(3, 2, DpPolicyKind::Threshold, {.ell = 1.0});
    CHECK(dist.prob_max_count_at_least(2) == Rational(1, 9));
}

TEST_CASE("exact dp: relative threshold(1), n=2, m=2 accepts everything") {
    // threshold for ball 2 is 1 + 1/2, so one prior accept does not reject
    const auto dist = exact_small_dp(2, 2, DpPolicyKind::RelativeThreshold, {.ell = 1.0});
    CHECK(dist.prob_max_count_at_least(2) == Rational(1, 2));
}

TEST_CASE("exact dp: accept-all occupancy is binomial") {
    const auto dist = exact_small_dp(2, 3, DpPolicyKind::AcceptAll, {});
    // max count >= 2 always (3 balls, 2 bins); max count = 3 w.p. 2*(1/8)
    CHECK(dist.prob_max_count_at_least(2) == Rational(1, 1));
    CHECK(dist.prob_max_count_at_least(3) == Rational(1, 4));
    CHECK(dist.total() == Rational(1, 1));
}

TEST_CASE("exact dp enforces its state budget and policy support") {
    CHECK_THROWS_AS(exact_small_dp(4, 2, DpPolicyKind::AcceptAll, {}), StateBudgetExceeded);
    CHECK_THROWS_AS(exact_small_dp(2, 9, DpPolicyKind::AcceptAll, {}), StateBudgetExceeded);
}

TEST_CASE("exact dp matches Monte Carlo (TV property)") {
    const int64_t samples = 200000;
    struct Case {
        int64_t n, m;
        DpPolicyKind kind;
        double ell;
    };
    for (const Case& c : {Case{2, 3, DpPolicyKind::Threshold, 1.0},
                          Case{3, 4, DpPolicyKind::RelativeThreshold, 1.0},
                          Case{2, 4, DpPolicyKind::RejectAll, 0.0}}) {
        const auto dp = exact_small_dp(c.n, c.m, c.kind, {.ell = c.ell});
        std::map<CanonState, int64_t> mc;
        for (int64_t s = 0; s < samples; ++s) {
            std::unique_ptr<StrategyPolicy> policy;
            switch (c.kind) {
                case DpPolicyKind::AcceptAll: policy = accept_all_policy(); break;
                case DpPolicyKind::RejectAll: policy = reject_all_policy(); break;
                case DpPolicyKind::Threshold: policy = threshold_policy(c.ell); break;
                case DpPolicyKind::RelativeThreshold:
                    policy = relative_threshold_policy(c.ell);
                    break;
            }
            RunConfig cfg;
            cfg.series_stride = 0;
            const RunTrace tr = run_seeded(c.n, c.m, *policy, 1000 + uint64_t(s), {}, cfg);
            ++mc[canonicalize(tr.final_state.counts, tr.final_state.accepted_primaries,
                              true)];
        }
        const double tol = 3.0 * std::sqrt(double(dp.states.size()) / double(samples));
        CHECK(tv_distance(dp, mc, samples) < tol);
    }
}

TEST_CASE("low-load cutoff is the largest integer below -n log n") {
    // n = 4, natural log: -4 ln 4 = -5.545; largest integer below is -6.
    CHECK(low_load_cut_scaled(4, kNaturalBase) == -6);
    // base 2, n = 4: threshold -n log2 n = -8 exactly; strict cut is -9.
    CHECK(low_load_cut_scaled(4, 2.0) == -9);
    // n = 2: -2 ln 2 = -1.386; cut -2.
    CHECK(low_load_cut_scaled(2, kNaturalBase) == -2);
}

TEST_CASE("linear fit recovers an exact line") {
    std::vector<double> x = {0, 1, 2, 3, 4};
    std::vector<double> y = {1, 3, 5, 7, 9};
    const auto f = linear_fit(x, y);
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.r2 == doctest::Approx(1.0));
}
