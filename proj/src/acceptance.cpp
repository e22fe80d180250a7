#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>
#include <vector>

#include "thinning/analysis.hpp"
#include "thinning/harness.hpp"
#include "thinning/metrics.hpp"
#include "thinning/point_process.hpp"

namespace thinning::harness {

namespace {

using analysis::ExactDistribution;

int hw_threads(const AcceptanceOptions& o) {
    if (o.threads > 0) return o.threads;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : int(hc);
}

void parallel_for(int64_t count, int threads, const std::function<void(int64_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int64_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(threads));
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (;;) {
                    const int64_t i = next.fetch_add(1);
                    if (i >= count) return;
                    fn(i);
                }
            } catch (...) {
                errors[size_t(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

std::string fmt(double x, int prec = 4) {
    std::ostringstream os;
    os << std::setprecision(prec) << x;
    return os.str();
}

// --------------------------------------------------------------------------
// 1. Finite-n tail bound of the (t+ell)-threshold strategy at t = 1.
// --------------------------------------------------------------------------
CriterionResult c1_threshold_bound(const AcceptanceOptions& o) {
    CriterionResult r{1, "threshold finite-n tail bound", false, false, ""};
    const int64_t n = 100000;
    const int64_t m = n;
    const int64_t trials = o.quick ? 50 : 200;
    const double logn = std::log(double(n));
    const double ell = std::sqrt(3.0 * logn / std::log(logn));
    const double cutoff = 2.5 * ell;  // (2+eps)ell with eps = 0.5

    std::atomic<int64_t> exceed{0};
    parallel_for(trials, hw_threads(o), [&](int64_t trial) {
        auto policy = threshold_policy(1.0 + ell);  // (t+ell)-threshold, t = 1
        RandomStream primary = derive_stream(o.master_seed, uint64_t(trial), 0);
        RandomStream aux = derive_stream(o.master_seed, uint64_t(trial), 11);
        RunConfig cfg;
        cfg.series_stride = 0;
        const RunTrace tr = run(n, m, *policy, {}, primary, aux, cfg);
        if (double(tr.maxload_final_scaled) > double(n) * cutoff) ++exceed;
    });
    const double frac = double(exceed.load()) / double(trials);
    r.pass = frac <= 0.05;
    r.details = "ell=" + fmt(ell) + ", P(MaxLoad > 2.5*ell) = " + fmt(frac) +
                " over " + std::to_string(trials) +
                " trials (required <= 0.05; asymptotic reference 3n^-0.5 = " +
                fmt(3.0 / std::sqrt(double(n))) + ")";
    return r;
}

// --------------------------------------------------------------------------
// 2. Single-time scaling flatness across five values of n.
// --------------------------------------------------------------------------
CriterionResult c2_single_time_scaling(const AcceptanceOptions& o) {
    CriterionResult r{2, "single-time scaling law", false, false, ""};
    const std::vector<int64_t> ns = {1 << 12, 1 << 14, 1 << 16, 1 << 18, 1 << 20};
    const int64_t trials = o.quick ? 12 : 50;
    std::vector<double> normalized;
    std::ostringstream detail;
    for (int64_t n : ns) {
        const double logn = std::log(double(n));
        const double norm = std::sqrt(logn / std::log(logn));
        const AutoSelection sel = auto_select(Metric::SingleTime, n, n);
        std::vector<double> maxloads(static_cast<size_t>(trials));
        parallel_for(trials, hw_threads(o), [&](int64_t trial) {
            auto policy = make_policy(sel.spec, n, n);
            RandomStream primary = derive_stream(o.master_seed, uint64_t(trial), 0);
            RandomStream aux =
                derive_stream(o.master_seed, uint64_t(trial), 20 + uint64_t(n % 97));
            RunConfig cfg;
            cfg.series_stride = 0;
            const RunTrace tr = run(n, n, *policy, {}, primary, aux, cfg);
            maxloads[size_t(trial)] = double(tr.maxload_final_scaled) / double(n);
        });
        const double med = median(maxloads);
        normalized.push_back(med / norm);
        detail << "n=" << n << ": norm=" << fmt(med / norm) << "; ";
    }
    const auto [mn, mx] = std::minmax_element(normalized.begin(), normalized.end());
    const bool in_band = std::all_of(normalized.begin(), normalized.end(),
                                     [](double v) { return v >= 0.8 && v <= 4.0; });
    const double ratio = *mx / *mn;
    r.pass = in_band && ratio <= 1.6;
    r.details = detail.str() + "flatness ratio = " + fmt(ratio) +
                " (required: each in [0.8,4.0], ratio <= 1.6)";
    return r;
}

// --------------------------------------------------------------------------
// 3. Comparative ordering with paired primary draws.
// --------------------------------------------------------------------------
CriterionResult c3_table_ordering(const AcceptanceOptions& o) {
    CriterionResult r{3, "one-choice > thinning > two-choice ordering", false, false, ""};
    const int64_t n = 100000;
    const int64_t m = n;
    const int64_t trials = o.quick ? 30 : 100;
    const AutoSelection sel = auto_select(Metric::SingleTime, n, m);

    std::vector<double> one(static_cast<size_t>(trials)), thin(static_cast<size_t>(trials)), two(static_cast<size_t>(trials));
    parallel_for(trials, hw_threads(o), [&](int64_t trial) {
        RunConfig cfg;
        cfg.series_stride = 0;
        {
            auto policy = accept_all_policy();
            RandomStream primary = derive_stream(o.master_seed, uint64_t(trial), 0);
            RandomStream aux = derive_stream(o.master_seed, uint64_t(trial), 31);
            one[size_t(trial)] =
                double(run(n, m, *policy, {}, primary, aux, cfg).maxload_final_scaled) /
                double(n);
        }
        {
            auto policy = make_policy(sel.spec, n, m);
            RandomStream primary = derive_stream(o.master_seed, uint64_t(trial), 0);
            RandomStream aux = derive_stream(o.master_seed, uint64_t(trial), 32);
            thin[size_t(trial)] =
                double(run(n, m, *policy, {}, primary, aux, cfg).maxload_final_scaled) /
                double(n);
        }
        {
            RandomStream first = derive_stream(o.master_seed, uint64_t(trial), 0);
            RandomStream aux = derive_stream(o.master_seed, uint64_t(trial), 33);
            two[size_t(trial)] =
                double(run_two_choice(n, m, first, aux, {}, cfg).maxload_final_scaled) /
                double(n);
        }
    });

    auto paired_gap = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double mean = 0, m2 = 0;
        for (size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
        mean /= double(a.size());
        for (size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i] - mean;
            m2 += d * d;
        }
        const double se = std::sqrt(m2 / double(a.size() - 1) / double(a.size()));
        return std::pair<double, double>(mean, se);
    };
    auto mean_of = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / double(v.size());
    };
    const auto [g1, se1] = paired_gap(one, thin);
    const auto [g2, se2] = paired_gap(thin, two);
    r.pass = g1 > 3.0 * se1 && g2 > 3.0 * se2 && g1 > 0 && g2 > 0;
    r.details = "mean maxload: one_choice=" + fmt(mean_of(one)) +
                " thinning=" + fmt(mean_of(thin)) + " two_choice=" + fmt(mean_of(two)) +
                "; paired gaps " + fmt(g1) + " vs 3SE=" + fmt(3 * se1) + " and " + fmt(g2) +
                " vs 3SE=" + fmt(3 * se2);
    return r;
}

// --------------------------------------------------------------------------
// 4. Exact small-instance oracle vs Monte Carlo.
// --------------------------------------------------------------------------
CriterionResult c4_oracle_equivalence(const AcceptanceOptions& o) {
    CriterionResult r{4, "exact-oracle equivalence", false, false, ""};
    const int64_t samples = o.quick ? 200000 : 1000000;
    const double tv_tol = o.quick ? 0.02 : 0.01;

    struct OracleCase {
        int64_t n;
        int64_t m;
        analysis::DpPolicyKind kind;
        double ell;
        const char* label;
    };
    const std::vector<OracleCase> cases = {
        {2, 2, analysis::DpPolicyKind::Threshold, 1.0, "thr1[2,2]"},
        {3, 4, analysis::DpPolicyKind::Threshold, 1.0, "thr1[3,4]"},
        {2, 4, analysis::DpPolicyKind::RelativeThreshold, 1.0, "rel1[2,4]"},
        {3, 3, analysis::DpPolicyKind::AcceptAll, 0.0, "acc[3,3]"},
    };

    std::ostringstream detail;
    bool ok = true;
    for (size_t ci = 0; ci < cases.size(); ++ci) {
        const auto& c = cases[ci];
        analysis::DpPolicyParams params;
        params.ell = c.ell;
        const ExactDistribution dp = analysis::exact_small_dp(c.n, c.m, c.kind, params);

        const int threads = hw_threads(o);
        std::vector<std::map<analysis::CanonState, int64_t>> partials(static_cast<size_t>(threads));
        std::atomic<int64_t> done{0};
        parallel_for(threads, threads, [&](int64_t w) {
            auto& local = partials[size_t(w)];
            for (;;) {
                const int64_t s = done.fetch_add(1);
                if (s >= samples) return;
                auto policy = [&]() -> std::unique_ptr<StrategyPolicy> {
                    switch (c.kind) {
                        case analysis::DpPolicyKind::AcceptAll: return accept_all_policy();
                        case analysis::DpPolicyKind::RejectAll: return reject_all_policy();
                        case analysis::DpPolicyKind::Threshold: return threshold_policy(c.ell);
                        case analysis::DpPolicyKind::RelativeThreshold:
                            return relative_threshold_policy(c.ell);
                    }
                    return accept_all_policy();
                }();
                RandomStream primary =
                    derive_stream(o.master_seed, uint64_t(s), 40 + uint64_t(ci));
                RandomStream aux =
                    derive_stream(o.master_seed, uint64_t(s), 50 + uint64_t(ci));
                RunConfig cfg;
                cfg.series_stride = 0;
                const RunTrace tr = run(c.n, c.m, *policy, {}, primary, aux, cfg);
                ++local[analysis::canonicalize(tr.final_state.counts,
                                               tr.final_state.accepted_primaries, true)];
            }
        });
        std::map<analysis::CanonState, int64_t> empirical;
        for (const auto& p : partials)
            for (const auto& [st, cnt] : p) empirical[st] += cnt;

        const double tv = analysis::tv_distance(dp, empirical, samples);
        ok = ok && tv < tv_tol;
        detail << c.label << ": TV=" << fmt(tv) << "; ";

        if (ci == 0) {
            // Spot value: P(max count = 2) for n=2, m=2, threshold ell=1.
            const double exact = dp.prob_max_count_at_least(2).to_double();
            int64_t hits = 0;
            for (const auto& [st, cnt] : empirical) {
                int32_t mx = 0;
                for (const auto& [cc, aa] : st) mx = std::max(mx, cc);
                if (mx >= 2) hits += cnt;
            }
            const double mc = double(hits) / double(samples);
            const bool spot_ok = std::fabs(exact - 0.25) < 1e-12 && std::fabs(mc - 0.25) <= 0.005;
            ok = ok && spot_ok;
            detail << "spot P(max=2): dp=" << fmt(exact, 6) << " mc=" << fmt(mc, 4)
                   << " (0.25 +/- 0.005); ";
        }
    }
    r.pass = ok;
    r.details = detail.str() + "TV tolerance " + fmt(tv_tol);
    return r;
}

// --------------------------------------------------------------------------
// 5. Poisson tail sandwich and rate-function bound grid.
// --------------------------------------------------------------------------
CriterionResult c5_poisson_sandwich(const AcceptanceOptions& o) {
    (void)o;
    CriterionResult r{5, "Poisson tail sandwich + rate bounds", false, false, ""};
    // The upper bound holds for every lambda > 0 and is asserted on the whole
    // grid. The lower bound is an asymptotic statement (it provably fails for
    // kappa near sqrt(lambda) at any lambda), so it is evaluated and reported
    // with its validity flag rather than asserted there: we require it to
    // hold on the large-deviation part of the grid (kappa >= lambda/2) and
    // report the violation count on the moderate-deviation part.
    int upper_violations = 0;
    int lower_violations_ld = 0;
    int lower_violations_moderate = 0;
    for (double lambda : {50.0, 100.0, 200.0}) {
        const double k_lo = std::sqrt(lambda);
        const double k_hi = 4.0 * lambda;
        for (int i = 0; i < 20; ++i) {
            const double kappa = k_lo * std::pow(k_hi / k_lo, double(i) / 19.0);
            const auto exact =
                analysis::poisson_tail_exact(lambda, kappa, analysis::TailSide::Upper);
            const auto sw = analysis::poisson_tail_sandwich(lambda, kappa);
            if (!(exact.log_value <= sw.log_upper + 1e-9)) ++upper_violations;
            if (!(exact.log_value >= sw.log_lower - 1e-9)) {
                if (kappa >= lambda / 2.0)
                    ++lower_violations_ld;
                else
                    ++lower_violations_moderate;
            }
        }
    }
    int grid_violations = 0;
    for (int i = 0; i < 400; ++i) {
        const double x = 4.0 * double(i) / 399.0;
        const double I = analysis::rate_I(x);
        if (!(I >= x * x / 4.0 - 1e-12) || !(I <= x * x / 2.0 + 1e-12)) ++grid_violations;
    }
    r.pass = upper_violations == 0 && lower_violations_ld == 0 && grid_violations == 0;
    std::ostringstream detail;
    detail << "upper bound violations=" << upper_violations
           << "/120; lower bound violations: large-deviation=" << lower_violations_ld
           << ", moderate-deviation (asymptotic-flagged)=" << lower_violations_moderate
           << "; rate grid violations=" << grid_violations << "/400";
    r.details = detail.str();
    return r;
}

// --------------------------------------------------------------------------
// 6. Retry bound (Poissonized excess sum).
// --------------------------------------------------------------------------
CriterionResult c6_retry_bound(const AcceptanceOptions& o) {
    CriterionResult r{6, "retry threshold bound", false, false, ""};
    const int64_t n = 10000;
    const double lambda = 1.0;
    const double ell = 4.0;
    const int64_t reps = o.quick ? 2000 : 10000;
    const auto rt = analysis::retry_threshold(double(n), lambda, ell);

    std::atomic<int64_t> exceed{0};
    parallel_for(reps, hw_threads(o), [&](int64_t rep) {
        RandomStream rng = derive_stream(o.master_seed, uint64_t(rep), 60);
        double y = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            const int64_t x = rng.poisson(lambda);
            const double excess = double(x) - lambda - ell;
            if (excess > 0) y += excess;
        }
        if (y > rt.r_star) ++exceed;
    });
    const double frac = double(exceed.load()) / double(reps);
    const double slack =
        3.0 * std::sqrt(std::max(rt.failure_bound * (1 - rt.failure_bound), 1e-300) /
                        double(reps));
    r.pass = frac <= rt.failure_bound + slack + 1e-12;
    r.details = "r*=" + fmt(rt.r_star) + ", empirical P(Y>r*)=" + fmt(frac) +
                ", bound=" + fmt(rt.failure_bound, 3) + " (+3 sigma slack " + fmt(slack, 3) +
                ")";
    return r;
}

// --------------------------------------------------------------------------
// 7. Drift concentration: exceedance under the Lemma-scale bound and an
//    exponential tail shape.
// --------------------------------------------------------------------------
CriterionResult c7_drift_concentration(const AcceptanceOptions& o) {
    CriterionResult r{7, "drift load concentration", false, false, ""};
    const int64_t n = o.quick ? 2000 : 10000;
    const double theta = 0.2;
    const int64_t m = int64_t(std::ceil(5.0 * double(n) * std::log(double(n))));
    const int64_t trials = 20;

    std::vector<std::vector<int64_t>> all_scaled(static_cast<size_t>(trials));
    parallel_for(trials, hw_threads(o), [&](int64_t trial) {
        auto policy = pp::drift_policy(theta);
        RandomStream primary = derive_stream(o.master_seed, uint64_t(trial), 0);
        RandomStream aux = derive_stream(o.master_seed, uint64_t(trial), 71);
        RunConfig cfg;
        cfg.series_stride = 0;
        const RunTrace tr = run(n, m, *policy, {}, primary, aux, cfg);
        auto& out = all_scaled[size_t(trial)];
        out.reserve(size_t(n));
        for (int64_t i = 0; i < n; ++i) out.push_back(tr.final_state.scaled_load(i));
    });

    // Pooled |L| samples in load units (denominator n).
    std::vector<double> abs_loads;
    abs_loads.reserve(size_t(trials * n));
    for (const auto& v : all_scaled)
        for (int64_t s : v) abs_loads.push_back(std::fabs(double(s)) / double(n));
    const double total = double(abs_loads.size());

    bool bound_ok = true;
    double first_bounded_k = 0;
    for (int64_t k = 1; k <= 2000; ++k) {
        const auto b = analysis::drift_tail_bound(theta, double(k));
        if (b.vacuous) continue;
        if (first_bounded_k == 0) first_bounded_k = double(k);
        int64_t cnt = 0;
        for (double v : abs_loads) cnt += v > double(k);
        if (double(cnt) / total > b.value) {
            bound_ok = false;
            break;
        }
        if (cnt == 0 && k > int64_t(first_bounded_k) + 25) break;
    }

    // ln P(|L| > k) versus k on the observed support.
    std::vector<double> xs, ys;
    for (int64_t k = 0;; ++k) {
        int64_t cnt = 0;
        for (double v : abs_loads) cnt += v > double(k);
        if (cnt == 0) break;
        xs.push_back(double(k));
        ys.push_back(std::log(double(cnt) / total));
    }
    const auto fit = analysis::linear_fit(xs, ys);
    const bool shape_ok = fit.slope < 0 && fit.r2 > 0.9;
    r.pass = bound_ok && shape_ok;
    r.details = "bound check from k=" + fmt(first_bounded_k, 4) +
                (bound_ok ? " ok" : " VIOLATED") + "; tail fit slope=" + fmt(fit.slope) +
                " R2=" + fmt(fit.r2) + " over " + std::to_string(xs.size()) + " levels";
    return r;
}

// --------------------------------------------------------------------------
// 8. Relative-threshold all-time growth across t.
// --------------------------------------------------------------------------
CriterionResult c8_relative_alltime(const AcceptanceOptions& o) {
    CriterionResult r{8, "relative-threshold all-time growth", false, false, ""};
    const int64_t n = 1 << 16;
    const std::vector<int64_t> ts = {4, 8, 16, 32};
    const int64_t trials = o.quick ? 10 : 30;
    const double logn = std::log(double(n));

    std::vector<double> norms;
    std::ostringstream detail;
    for (int64_t t : ts) {
        const double ell = std::cbrt(double(t) * logn);
        std::vector<double> alltime(static_cast<size_t>(trials));
        parallel_for(trials, hw_threads(o), [&](int64_t trial) {
            auto policy = relative_threshold_policy(ell);
            RandomStream primary = derive_stream(o.master_seed, uint64_t(trial), 0);
            RandomStream aux =
                derive_stream(o.master_seed, uint64_t(trial), 80 + uint64_t(t));
            RunConfig cfg;
            cfg.series_stride = 0;
            const RunTrace tr = run(n, t * n, *policy, {}, primary, aux, cfg);
            alltime[size_t(trial)] = double(tr.maxload_alltime_scaled) / double(n);
        });
        const double med = median(alltime) / ell;
        norms.push_back(med);
        detail << "t=" << t << ": norm=" << fmt(med) << "; ";
    }
    const auto [mn, mx] = std::minmax_element(norms.begin(), norms.end());
    const bool in_band = std::all_of(norms.begin(), norms.end(),
                                     [](double v) { return v >= 0.5 && v <= 13.5; });
    const double ratio = *mx / *mn;
    r.pass = in_band && ratio <= 2.0;
    r.details = detail.str() + "ratio=" + fmt(ratio) +
                " (required: each in [0.5,13.5], ratio <= 2.0)";
    return r;
}

// --------------------------------------------------------------------------
// 9. Typical-vs-all-time gap under the Q-multi-scale strategy (report only).
// --------------------------------------------------------------------------
CriterionResult c9_typical_vs_alltime(const AcceptanceOptions& o) {
    CriterionResult r{9, "typical vs all-time gap (report only)", true, true, ""};
    const int64_t n = 1 << 16;
    const double logn = std::log(double(n));
    const int64_t m = n * int64_t(std::ceil(logn));
    const int64_t trials = o.quick ? 6 : 20;
    const double eps = 0.1;

    Overrides ov;
    ov.scalars["k"] = 2;
    ov.scalars["alpha1"] = 0.8;

    std::vector<double> ratios(size_t(trials), std::nan(""));
    parallel_for(trials, hw_threads(o), [&](int64_t trial) {
        auto policy = q_multi_scale_policy(0.0, n, kNaturalBase, ov);
        RandomStream primary = derive_stream(o.master_seed, uint64_t(trial), 0);
        RandomStream aux = derive_stream(o.master_seed, uint64_t(trial), 91);
        RunConfig cfg;
        cfg.series_stride = 1;
        const RunTrace tr = run(n, m, *policy, {}, primary, aux, cfg);
        const auto typ = metrics::maxload_typical(tr, eps);
        if (typ.value && tr.maxload_alltime_scaled > 0)
            ratios[size_t(trial)] =
                double(*typ.value) / double(tr.maxload_alltime_scaled);
    });
    std::vector<double> defined;
    for (double x : ratios)
        if (!std::isnan(x)) defined.push_back(x);
    if (defined.empty()) {
        r.details = "no trial produced a defined typical load";
        return r;
    }
    const auto [mn, mx] = std::minmax_element(defined.begin(), defined.end());
    r.details = "MaxLoad_eps/MaxLoad([m]) over " + std::to_string(defined.size()) +
                " trials: median=" + fmt(median(defined)) + " min=" + fmt(*mn) +
                " max=" + fmt(*mx) + " (expected bounded away from 1)";
    return r;
}

// --------------------------------------------------------------------------
// 10. Determinism and invariant bundle.
// --------------------------------------------------------------------------
CriterionResult c10_invariants(const AcceptanceOptions& o) {
    CriterionResult r{10, "determinism and invariants", false, false, ""};
    std::ostringstream detail;
    bool ok = true;

    // (a) identical seeds reproduce identical step sequences (thinning + drift).
    {
        auto run_once = [&](bool drift) {
            const int64_t n = 64, m = 4000;
            auto policy = drift ? pp::drift_policy(0.2)
                                : std::unique_ptr<StrategyPolicy>(relative_threshold_policy(2.0));
            RandomStream primary = derive_stream(o.master_seed, 7, 0);
            RandomStream aux = derive_stream(o.master_seed, 7, 101);
            RunConfig cfg;
            cfg.keep_step_records = true;
            return run(n, m, *policy, {}, primary, aux, cfg);
        };
        for (bool drift : {false, true}) {
            const RunTrace a = run_once(drift);
            const RunTrace b = run_once(drift);
            bool same = a.steps.size() == b.steps.size();
            for (size_t i = 0; same && i < a.steps.size(); ++i)
                same = a.steps[i].primary == b.steps[i].primary &&
                       a.steps[i].decision == b.steps[i].decision &&
                       a.steps[i].final_bin == b.steps[i].final_bin &&
                       a.steps[i].max_scaled == b.steps[i].max_scaled;
            ok = ok && same;
            detail << (drift ? "drift" : "thinning") << " replay "
                   << (same ? "identical" : "DIVERGED") << "; ";
        }
    }

    // (b) exact accounting at every step: scaled loads sum to zero, retries
    // and accepted-primaries stay consistent.
    {
        const int64_t n = 50, m = 2000;
        auto policy = threshold_policy(3);
        LoadState s = LoadState::make(n, {});
        policy->init(s);
        RandomStream primary = derive_stream(o.master_seed, 8, 0);
        RandomStream aux = derive_stream(o.master_seed, 8, 102);
        bool sums_ok = true, acc_ok = true;
        for (int64_t k = 1; k <= m; ++k) {
            step(s, *policy, primary, aux);
            int64_t sum = 0;
            for (int64_t i = 0; i < n; ++i) {
                sum += s.scaled_load(i);
                if (s.accepted_primaries[size_t(i)] > s.counts[size_t(i)]) acc_ok = false;
            }
            if (sum != 0) sums_ok = false;
        }
        const bool retries_ok = s.retries <= s.k;
        ok = ok && sums_ok && acc_ok && retries_ok;
        detail << "per-step sum-zero " << (sums_ok ? "ok" : "FAILED") << ", bounds "
               << ((acc_ok && retries_ok) ? "ok" : "FAILED") << "; ";
    }

    // (c) metric sandwich MaxLoad(m) <= MaxLoad_eps <= MaxLoad([m]). The
    // upper link and the chain at eps <= 1/m are trace theorems and are
    // asserted; the lower link at eps = 0.1 is not pointwise (a final-step
    // spike can sit in the top eps*m quantile), so it is evaluated and
    // reported.
    {
        bool chain_ok = true;
        int lower_link_holds = 0;
        const int variants = 3;
        for (int variant = 0; variant < variants; ++variant) {
            const int64_t n = 4096, m = 4 * n;
            std::unique_ptr<StrategyPolicy> policy;
            if (variant == 0) policy = threshold_policy(6.0);
            if (variant == 1) policy = relative_threshold_policy(3.0);
            if (variant == 2) policy = relative_threshold_policy(8.0);
            RandomStream primary = derive_stream(o.master_seed, uint64_t(variant), 0);
            RandomStream aux = derive_stream(o.master_seed, uint64_t(variant), 103);
            RunConfig cfg;
            cfg.series_stride = 1;
            const RunTrace tr = run(n, m, *policy, {}, primary, aux, cfg);
            const auto interval = metrics::maxload_interval(tr);
            chain_ok = chain_ok && tr.maxload_final_scaled <= interval.value &&
                       interval.value == tr.maxload_alltime_scaled;
            const auto typ = metrics::maxload_typical(tr, 0.1);
            if (typ.value) {
                chain_ok = chain_ok && *typ.value <= interval.value;
                lower_link_holds += tr.maxload_final_scaled <= *typ.value;
            }
            // eps <= 1/m: a single exceedance suffices, the chain is exact
            const auto typ1 = metrics::maxload_typical(tr, 0.5 / double(m));
            if (typ1.value) {
                chain_ok = chain_ok && *typ1.value == interval.value &&
                           tr.maxload_final_scaled <= *typ1.value;
            }
        }
        ok = ok && chain_ok;
        detail << "metric sandwich theorems " << (chain_ok ? "ok" : "FAILED")
               << " (lower link at eps=0.1 held on " << lower_link_holds << "/" << variants
               << " traces, not a pointwise theorem); ";
    }

    // (d) realize_distribution goodness of fit for 10 random in-band targets.
    {
        const int64_t n = 50;
        const double c = 0.9;
        const int64_t samples = o.quick ? 200000 : 1000000;
        RandomStream gen(derive_stream_seed(o.master_seed, 99, 104));
        bool chi_ok = true;
        double min_p = 1.0;
        for (int target = 0; target < 10; ++target) {
            std::vector<double> w(static_cast<size_t>(n));
            double mean = 0;
            for (auto& x : w) {
                x = gen.uniform01();
                mean += x;
            }
            mean /= double(n);
            double wmax = 0;
            for (auto& x : w) {
                x -= mean;
                wmax = std::max(wmax, std::fabs(x));
            }
            const double delta = 0.9 * (1.0 - c) / double(n) / wmax;
            std::vector<double> p(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i)
                p[size_t(i)] = 1.0 / double(n) + delta * w[size_t(i)];
            auto policy = realize_distribution(p, c);
            RandomStream primary = derive_stream(o.master_seed, uint64_t(target), 0);
            RandomStream aux = derive_stream(o.master_seed, uint64_t(target), 105);
            RunConfig cfg;
            cfg.series_stride = 0;
            const RunTrace tr = run(n, samples, *policy, {}, primary, aux, cfg);
            const auto gof = analysis::chi_square_gof(tr.final_state.counts, p);
            min_p = std::min(min_p, gof.p_value);
            chi_ok = chi_ok && gof.p_value > 1e-3;
        }
        ok = ok && chi_ok;
        detail << "chi-square min p=" << fmt(min_p) << (chi_ok ? " ok" : " FAILED") << "; ";
    }

    // (e) varying-drift feasibility: boundary holds, forced overload trips to
    // accept-all permanently.
    {
        const int64_t n = 9;
        // threshold n/sqrt(ln 9) = 6.07; seven bins above ell=1 trips it.
        std::vector<int64_t> tripping = {2, 2, 2, 2, 2, 2, 2, -7, -7};
        std::vector<int64_t> boundary = {2, 2, 2, 2, 2, 2, -4, -4, -4};
        auto run_fixture = [&](const std::vector<int64_t>& init) {
            auto policy = pp::varying_drift_policy(1.0, n);
            RandomStream primary = derive_stream(o.master_seed, 3, 0);
            RandomStream aux = derive_stream(o.master_seed, 3, 106);
            RunConfig cfg;
            cfg.keep_step_records = true;
            return run(n, 40, *policy, init, primary, aux, cfg);
        };
        const RunTrace tripped = run_fixture(tripping);
        const RunTrace held = run_fixture(boundary);
        const bool trip_ok =
            tripped.coupled_steps == 0 &&
            std::all_of(tripped.steps.begin(), tripped.steps.end(),
                        [](const StepRecord& s) { return s.decision == StepKind::Accept; });
        const bool hold_ok = held.coupled_steps == held.m;
        ok = ok && trip_ok && hold_ok;
        detail << "varying-drift trip " << (trip_ok ? "ok" : "FAILED") << ", boundary "
               << (hold_ok ? "ok" : "FAILED");
    }

    r.pass = ok;
    r.details = detail.str();
    return r;
}

using CriterionFn = CriterionResult (*)(const AcceptanceOptions&);

const std::vector<std::pair<std::string, CriterionFn>>& registry() {
    static const std::vector<std::pair<std::string, CriterionFn>> reg = {
        {"prop41_bound", c1_threshold_bound},
        {"single_time_scaling", c2_single_time_scaling},
        {"table1_ordering", c3_table_ordering},
        {"oracle_equivalence", c4_oracle_equivalence},
        {"poisson_sandwich", c5_poisson_sandwich},
        {"retry_bound", c6_retry_bound},
        {"drift_concentration", c7_drift_concentration},
        {"relative_alltime", c8_relative_alltime},
        {"typical_vs_alltime", c9_typical_vs_alltime},
        {"invariants", c10_invariants},
    };
    return reg;
}

}  // namespace

std::vector<std::string> acceptance_suites() {
    std::vector<std::string> names = {"all"};
    for (const auto& [name, fn] : registry()) names.push_back(name);
    return names;
}

std::vector<CriterionResult> run_acceptance(const std::string& suite,
                                            const AcceptanceOptions& opts) {
    std::vector<CriterionResult> results;
    bool found = false;
    for (const auto& [name, fn] : registry()) {
        if (suite == "all" || suite == name) {
            found = true;
            results.push_back(fn(opts));
        }
    }
    if (!found) throw std::invalid_argument("unknown acceptance suite: " + suite);
    return results;
}

}  // namespace thinning::harness
