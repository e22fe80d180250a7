#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "thinning/harness.hpp"

using namespace thinning;
using namespace thinning::harness;

TEST_CASE("auto selection spot checks against hand substitution") {
    // 1) single_time, n = 10^5, m = n (t = 1 << sqrt(log n)):
    //    threshold with ell = sqrt(3 log n / loglog n) ~ 3.7597
    {
        const auto sel = auto_select(Metric::SingleTime, 100000, 100000);
        CHECK(sel.spec.kind == StrategyKind::Threshold);
        CHECK(sel.derived.at("ell") == doctest::Approx(3.7596718132894367).epsilon(1e-12));
        CHECK(*sel.spec.ell == doctest::Approx(1.0 + 3.7596718132894367).epsilon(1e-12));
    }
    // 2) all_time, n = 2^16, t = 8 (sqrt(log n) < t << log^2 n):
    //    relative threshold with ell = (t log n)^{1/3}
    {
        const int64_t n = 1 << 16;
        const auto sel = auto_select(Metric::AllTime, n, 8 * n);
        CHECK(sel.spec.kind == StrategyKind::RelativeThreshold);
        const double logn = std::log(double(n));
        CHECK(*sel.spec.ell == doctest::Approx(std::cbrt(8.0 * logn)).epsilon(1e-12));
    }
    // 3) all_time, huge t: varying drift with ell = 2 log n / loglog n
    {
        const int64_t n = 1 << 16;
        const double logn = std::log(double(n));
        const int64_t m = n * int64_t(logn * logn * 4);
        const auto sel = auto_select(Metric::AllTime, n, m);
        CHECK(sel.spec.kind == StrategyKind::VaryingDrift);
        CHECK(*sel.spec.ell == doctest::Approx(2.0 * logn / std::log(logn)).epsilon(1e-12));
    }
    // typical metric: small t -> relative threshold; mid t -> q_multi_scale
    {
        const int64_t n = 1 << 16;
        CHECK(auto_select(Metric::Typical, n, n).spec.kind ==
              StrategyKind::RelativeThreshold);
        CHECK(auto_select(Metric::Typical, n, 8 * n).spec.kind ==
              StrategyKind::QMultiScale);
    }
}

TEST_CASE("auto selection flags ambiguous regimes near crossovers") {
    const int64_t n = 1 << 16;
    const double logn = std::log(double(n));  // sqrt = 3.33
    const int64_t m = int64_t(std::sqrt(logn) * double(n));
    CHECK_THROWS_AS(auto_select(Metric::SingleTime, n, m), RegimeAmbiguous);
}

TEST_CASE("run_experiment is deterministic and rows are ordered") {
    ExperimentSpec spec;
    spec.strategy = StrategySpec{};
    spec.strategy->kind = StrategyKind::Threshold;
    spec.strategy->ell = 3.0;
    spec.ns = {128, 256};
    spec.m_rule.kind = MRule::Kind::TimesT;
    spec.m_rule.t = 2.0;
    spec.trials = 4;
    spec.master_seed = 77;
    spec.threads = 1;
    const auto a = run_experiment(spec);
    spec.threads = 4;  // parallel execution must not change anything
    const auto b = run_experiment(spec);
    REQUIRE(a.rows.size() == b.rows.size());
    // identical modulo the wallclock diagnostic, which is the one
    // intentionally non-deterministic column
    auto stripped = [](metrics::ResultRow r) {
        r.wallclock_ms = 0.0;
        return metrics::to_csv(r);
    };
    for (size_t i = 0; i < a.rows.size(); ++i)
        CHECK(stripped(a.rows[i]) == stripped(b.rows[i]));
    CHECK(a.summary_json == b.summary_json);
    CHECK(a.provenance == b.provenance);
}

TEST_CASE("run_experiment writes parseable csv") {
    const std::string path = "test_rows.csv";
    ExperimentSpec spec;
    spec.strategy = StrategySpec{};
    spec.strategy->kind = StrategyKind::RelativeThreshold;
    spec.strategy->ell = 2.0;
    spec.ns = {64};
    spec.m_rule.t = 4.0;
    spec.trials = 3;
    spec.out_csv = path;
    const auto res = run_experiment(spec);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("trial,n,m,strategy", 0) == 0);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        // strip the provenance column before round-tripping
        const auto cut = line.rfind(',');
        const auto row = metrics::from_csv(line.substr(0, cut));
        CHECK(row.n == 64);
        CHECK(row.m == 256);
        ++rows;
    }
    CHECK(rows == 3);
    CHECK(res.rows.size() == 3);
    std::remove(path.c_str());
}

TEST_CASE("paired strategies see the same primary stream") {
    // one_choice with role-0 primaries: the primary sequence is a pure
    // function of (master, trial), independent of the aux role.
    RandomStream p1 = derive_stream(42, 3, 0);
    RandomStream p2 = derive_stream(42, 3, 0);
    for (int i = 0; i < 100; ++i) CHECK(p1.next_u64() == p2.next_u64());
}

TEST_CASE("strategy kinds round-trip through names") {
    for (const char* name :
         {"one_choice", "reject_all", "threshold", "relative_threshold", "multi_stage",
          "drift_multi_stage", "drift", "varying_drift", "q_multi_scale",
          "d_multiscale_longterm", "two_choice", "one_plus_beta"}) {
        CHECK(to_string(strategy_kind_from_string(name)) == name);
    }
    CHECK_THROWS(strategy_kind_from_string("nope"));
}

TEST_CASE("m rules resolve") {
    MRule abs;
    abs.kind = MRule::Kind::Absolute;
    abs.absolute = 777;
    CHECK(abs.resolve(10, kNaturalBase) == 777);
    MRule times;
    times.kind = MRule::Kind::TimesT;
    times.t = 2.5;
    CHECK(times.resolve(100, kNaturalBase) == 250);
    MRule la;
    la.kind = MRule::Kind::LogAlpha;
    la.alpha = 1.0;
    CHECK(la.resolve(1 << 16, kNaturalBase) == (1 << 16) * 12);  // ceil(ln 2^16) = 12
}

TEST_CASE("acceptance suite registry") {
    const auto suites = acceptance_suites();
    CHECK(suites.size() == 11);  // "all" + 10 criteria
    CHECK_THROWS(run_acceptance("definitely_not_a_suite", {}));
}

TEST_CASE("quick acceptance micro-suites pass") {
    AcceptanceOptions opts;
    opts.quick = true;
    // the cheap numeric suites run in milliseconds and must be green
    for (const char* suite : {"poisson_sandwich"}) {
        const auto res = run_acceptance(suite, opts);
        REQUIRE(res.size() == 1);
        CHECK(res[0].pass);
    }
}
