#include "thinning/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "thinning/analysis.hpp"
#include "thinning/point_process.hpp"

namespace thinning::harness {

using nlohmann::json;

std::string to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::OneChoice: return "one_choice";
        case StrategyKind::RejectAll: return "reject_all";
        case StrategyKind::Threshold: return "threshold";
        case StrategyKind::RelativeThreshold: return "relative_threshold";
        case StrategyKind::MultiStage: return "multi_stage";
        case StrategyKind::DriftMultiStage: return "drift_multi_stage";
        case StrategyKind::Drift: return "drift";
        case StrategyKind::VaryingDrift: return "varying_drift";
        case StrategyKind::QMultiScale: return "q_multi_scale";
        case StrategyKind::LongTerm: return "d_multiscale_longterm";
        case StrategyKind::TwoChoice: return "two_choice";
        case StrategyKind::OnePlusBeta: return "one_plus_beta";
    }
    return "?";
}

StrategyKind strategy_kind_from_string(const std::string& s) {
    static const std::map<std::string, StrategyKind> lut = {
        {"one_choice", StrategyKind::OneChoice},
        {"accept_all", StrategyKind::OneChoice},
        {"reject_all", StrategyKind::RejectAll},
        {"threshold", StrategyKind::Threshold},
        {"relative_threshold", StrategyKind::RelativeThreshold},
        {"multi_stage", StrategyKind::MultiStage},
        {"drift_multi_stage", StrategyKind::DriftMultiStage},
        {"drift", StrategyKind::Drift},
        {"varying_drift", StrategyKind::VaryingDrift},
        {"q_multi_scale", StrategyKind::QMultiScale},
        {"d_multiscale_longterm", StrategyKind::LongTerm},
        {"long_term", StrategyKind::LongTerm},
        {"two_choice", StrategyKind::TwoChoice},
        {"one_plus_beta", StrategyKind::OnePlusBeta},
    };
    auto it = lut.find(s);
    if (it == lut.end()) throw std::invalid_argument("unknown strategy: " + s);
    return it->second;
}

std::string StrategySpec::label() const {
    std::ostringstream os;
    os << to_string(kind);
    if (ell) os << "(ell=" << *ell << ")";
    if (kind == StrategyKind::OnePlusBeta) os << "(beta=" << beta << ")";
    if (kind == StrategyKind::Drift || kind == StrategyKind::DriftMultiStage)
        os << "(theta=" << theta << ")";
    return os.str();
}

std::unique_ptr<StrategyPolicy> make_policy(const StrategySpec& spec, int64_t n, int64_t m,
                                            double log_base) {
    const double t = double(m) / double(n);
    switch (spec.kind) {
        case StrategyKind::OneChoice: return accept_all_policy();
        case StrategyKind::RejectAll: return reject_all_policy();
        case StrategyKind::Threshold:
            if (!spec.ell) throw std::invalid_argument("threshold: ell required");
            return threshold_policy(*spec.ell);
        case StrategyKind::RelativeThreshold:
            if (!spec.ell) throw std::invalid_argument("relative_threshold: ell required");
            return relative_threshold_policy(*spec.ell, log_base);
        case StrategyKind::MultiStage: {
            // Non-integer t = m/n enters the schedule as ceil(m/n).
            const double ts = std::ceil(t);
            return multi_stage_policy(ts, spec.L0.value_or(0.0), spec.ell, spec.eta, n,
                                      log_base, spec.overrides);
        }
        case StrategyKind::DriftMultiStage: {
            const double ts = std::ceil(t) - spec.t_prime;
            return drift_multi_stage_policy(spec.theta, spec.t_prime, ts,
                                            spec.L0.value_or(0.0), spec.ell, spec.eta, n,
                                            log_base, spec.overrides);
        }
        case StrategyKind::Drift: return pp::drift_policy(spec.theta);
        case StrategyKind::VaryingDrift: {
            const double logn = log_b(double(n), log_base);
            const double ell =
                spec.ell.value_or(2.0 * logn / log_b(logn, log_base));
            return pp::varying_drift_policy(ell, n, log_base);
        }
        case StrategyKind::QMultiScale:
            return q_multi_scale_policy(spec.Q, n, log_base, spec.overrides);
        case StrategyKind::LongTerm:
            return d_multiscale_longterm_policy(spec.d, n, log_base, spec.overrides);
        case StrategyKind::TwoChoice:
        case StrategyKind::OnePlusBeta: return nullptr;
    }
    return nullptr;
}

Metric metric_from_string(const std::string& s) {
    if (s == "single_time") return Metric::SingleTime;
    if (s == "all_time") return Metric::AllTime;
    if (s == "typical") return Metric::Typical;
    throw std::invalid_argument("unknown metric: " + s);
}

namespace {

void check_crossover(double t, double boundary, const std::string& which) {
    if (boundary <= 0) return;
    if (std::fabs(t - boundary) <= 0.2 * boundary)
        throw RegimeAmbiguous("auto_select: t = " + std::to_string(t) + " is within 20% of the " +
                              which + " crossover (" + std::to_string(boundary) +
                              "); pick a strategy explicitly");
}

}  // namespace

AutoSelection auto_select(Metric metric, int64_t n, int64_t m, double log_base,
                          const Overrides& overrides) {
    const double logn = log_b(double(n), log_base);
    const double loglogn = log_b(logn, log_base);
    const double t = double(m) / double(n);
    AutoSelection sel;
    sel.t = t;
    sel.spec.overrides = overrides;

    const double c_sqrt = std::sqrt(logn);
    const double c_log = logn;
    const double c_log2 = logn * logn;

    switch (metric) {
        case Metric::SingleTime: {
            check_crossover(t, c_sqrt, "sqrt(log n)");
            if (t <= c_sqrt) {
                // (t+ell)-threshold with ell = sqrt(3 log n / (loglog n - 2 log t)).
                const double denom = loglogn - 2.0 * log_b(std::max(t, 1e-300), log_base);
                if (!(denom > 0))
                    throw ParamOutOfAsymptoticRange(
                        "auto_select: loglog n - 2 log t must be positive in this regime");
                const double ell = std::sqrt(3.0 * logn / denom);
                sel.spec.kind = StrategyKind::Threshold;
                sel.spec.ell = t + ell;
                sel.regime = "t <= sqrt(log n): threshold";
                sel.derived["ell"] = ell;
                sel.derived["threshold"] = t + ell;
                return sel;
            }
            check_crossover(t, c_log, "log n");
            if (t <= c_log) {
                sel.spec.kind = StrategyKind::MultiStage;
                sel.regime = "sqrt(log n) < t <= log n: multi_stage";
                return sel;
            }
            sel.spec.kind = StrategyKind::DriftMultiStage;
            sel.spec.theta = 0.2;
            // Drift up to 35 log n before the end (the 7/theta log n tail is
            // handled by the multi-stage phase).
            sel.spec.t_prime = std::max(0.0, t - 35.0 * logn);
            sel.regime = "t > log n: drift_multi_stage";
            return sel;
        }
        case Metric::AllTime: {
            check_crossover(t, c_log2, "log^2 n");
            if (t <= c_log2) {
                const double ell = std::cbrt(t * logn);
                sel.spec.kind = StrategyKind::RelativeThreshold;
                sel.spec.ell = ell;
                sel.regime = "t <= log^2 n: relative_threshold";
                sel.derived["ell"] = ell;
                return sel;
            }
            const double ell = 2.0 * logn / loglogn;
            sel.spec.kind = StrategyKind::VaryingDrift;
            sel.spec.ell = ell;
            sel.regime = "t > log^2 n: varying_drift";
            sel.derived["ell"] = ell;
            return sel;
        }
        case Metric::Typical: {
            check_crossover(t, c_sqrt, "sqrt(log n)");
            if (t <= c_sqrt) {
                const double ell = std::cbrt(t * logn);
                sel.spec.kind = StrategyKind::RelativeThreshold;
                sel.spec.ell = ell;
                sel.regime = "t <= sqrt(log n): relative_threshold";
                sel.derived["ell"] = ell;
                return sel;
            }
            check_crossover(t, c_log2, "log^2 n");
            if (t <= c_log2) {
                sel.spec.kind = StrategyKind::QMultiScale;
                sel.spec.Q = 0.0;
                sel.regime = "sqrt(log n) < t <= log^2 n: q_multi_scale";
                return sel;
            }
            sel.spec.kind = StrategyKind::LongTerm;
            sel.spec.d = std::max(1.0, log_b(double(m), log_base) / logn);
            sel.regime = "t > log^2 n: d_multiscale_longterm";
            sel.derived["d"] = sel.spec.d;
            return sel;
        }
    }
    throw std::logic_error("auto_select: unreachable");
}

int64_t MRule::resolve(int64_t n, double log_base) const {
    switch (kind) {
        case Kind::Absolute: return absolute;
        case Kind::TimesT: return int64_t(std::llround(t * double(n)));
        case Kind::LogAlpha: {
            const double logn = log_b(double(n), log_base);
            return n * int64_t(std::ceil(std::pow(logn, alpha)));
        }
    }
    return 0;
}

namespace {

constexpr uint64_t kPrimaryRole = 0;

uint64_t aux_role_for(const std::string& label) {
    // Strategy-tagged aux stream; role 0 stays reserved for shared primaries.
    return 1 + (provenance_hash(label) % 1000003);
}

metrics::ResultRow row_from_trace(const RunTrace& tr, int64_t trial, uint64_t seed,
                                  const std::string& label, double eps) {
    metrics::ResultRow row;
    row.trial = trial;
    row.n = tr.n;
    row.m = tr.m;
    row.strategy = label;
    row.seed = seed;
    row.maxload_final_scaled = tr.maxload_final_scaled;
    row.maxload_alltime_scaled = tr.maxload_alltime_scaled;
    row.eps = eps;
    if (!tr.max_series.empty() && tr.m > 0) {
        const auto typ = metrics::maxload_typical(tr, eps);
        row.maxload_typical_scaled = typ.value;
    }
    row.retries = tr.retries;
    row.coupled_steps = tr.coupled_steps;
    row.wallclock_ms = tr.wallclock_ms;
    return row;
}

json summarize(const std::vector<metrics::ResultRow>& rows) {
    // Group rows by (n, strategy); report median/mean/max of each metric in
    // load units (scaled / n).
    std::map<std::pair<int64_t, std::string>, std::vector<const metrics::ResultRow*>> groups;
    for (const auto& r : rows) groups[{r.n, r.strategy}].push_back(&r);
    json out = json::array();
    for (const auto& [key, group] : groups) {
        auto stats = [&](auto getter) {
            std::vector<double> v;
            for (const auto* r : group) {
                const auto val = getter(*r);
                if (val) v.push_back(*val / double(key.first));
            }
            json j;
            if (v.empty()) return j;
            std::sort(v.begin(), v.end());
            j["median"] = v[v.size() / 2];
            j["mean"] = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
            j["max"] = v.back();
            j["count"] = v.size();
            return j;
        };
        json g;
        g["n"] = key.first;
        g["m"] = group.front()->m;
        g["strategy"] = key.second;
        g["maxload_final"] = stats([](const metrics::ResultRow& r) {
            return std::optional<double>(double(r.maxload_final_scaled));
        });
        g["maxload_alltime"] = stats([](const metrics::ResultRow& r) {
            return std::optional<double>(double(r.maxload_alltime_scaled));
        });
        g["maxload_typical"] = stats([](const metrics::ResultRow& r) {
            return r.maxload_typical_scaled
                       ? std::optional<double>(double(*r.maxload_typical_scaled))
                       : std::optional<double>();
        });
        out.push_back(g);
    }
    return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    ExperimentResult result;
    std::string prov_src;

    struct Job {
        int64_t n;
        int64_t m;
        int64_t trial;
    };
    std::vector<Job> jobs;
    for (int64_t n : spec.ns) {
        const int64_t m = spec.m_rule.resolve(n, spec.log_base);
        for (int64_t trial = 0; trial < spec.trials; ++trial) jobs.push_back({n, m, trial});
    }
    result.rows.resize(jobs.size());

    std::optional<std::ofstream> trace_file;
    if (!spec.trace_path.empty()) trace_file.emplace(spec.trace_path);

    auto run_job = [&](size_t idx) {
        const Job& job = jobs[idx];
        StrategySpec strat = spec.strategy
                                 ? *spec.strategy
                                 : auto_select(spec.metric, job.n, job.m, spec.log_base).spec;
        const std::string label = strat.label();
        const uint64_t seed = derive_stream_seed(spec.master_seed, uint64_t(job.trial), 999);
        RandomStream primary = derive_stream(spec.master_seed, uint64_t(job.trial), kPrimaryRole);
        RandomStream aux = derive_stream(spec.master_seed, uint64_t(job.trial),
                                         aux_role_for(label));
        RunConfig cfg;
        cfg.series_stride = spec.series_stride;
        if (idx == 0 && trace_file) {
            cfg.trace_out = &*trace_file;
            cfg.trace_stride = spec.trace_stride;
        }
        RunTrace tr;
        if (strat.kind == StrategyKind::TwoChoice) {
            tr = run_two_choice(job.n, job.m, primary, aux, {}, cfg);
        } else if (strat.kind == StrategyKind::OnePlusBeta) {
            tr = run_one_plus_beta(job.n, job.m, strat.beta, primary, aux, {}, cfg);
        } else {
            auto policy = make_policy(strat, job.n, job.m, spec.log_base);
            tr = run(job.n, job.m, *policy, {}, primary, aux, cfg);
        }
        result.rows[idx] = row_from_trace(tr, job.trial, seed, label, spec.eps);
    };

    const int threads = std::max(1, spec.threads);
    if (threads == 1 || jobs.size() <= 1) {
        for (size_t i = 0; i < jobs.size(); ++i) run_job(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(static_cast<size_t>(threads));
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (;;) {
                        const size_t i = next.fetch_add(1);
                        if (i >= jobs.size()) return;
                        run_job(i);
                    }
                } catch (...) {
                    errors[size_t(w)] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    // Provenance covers the spec itself plus any strategy schedule override.
    {
        json p;
        p["master_seed"] = spec.master_seed;
        p["metric"] = int(spec.metric);
        p["log_base"] = spec.log_base;
        if (spec.strategy) p["strategy"] = spec.strategy->label();
        prov_src = p.dump();
    }
    result.provenance = provenance_hash(prov_src);

    json summary;
    summary["groups"] = summarize(result.rows);
    summary["provenance_hash"] = result.provenance;
    summary["trials"] = spec.trials;
    result.summary_json = summary.dump(2);

    if (!spec.out_csv.empty()) {
        std::ofstream csv(spec.out_csv);
        csv << metrics::csv_header() << ",provenance_hash\n";
        for (const auto& r : result.rows)
            csv << metrics::to_csv(r) << ',' << result.provenance << '\n';
    }
    if (!spec.out_json.empty()) {
        std::ofstream js(spec.out_json);
        js << result.summary_json << '\n';
    }
    return result;
}

int report_acceptance(const std::vector<CriterionResult>& results, std::ostream& os) {
    bool all_pass = true;
    for (const auto& r : results) {
        const char* tag = r.pass ? "PASS" : (r.report_only ? "INFO" : "FAIL");
        os << '[' << tag << "] criterion " << r.id << " (" << r.name << "): " << r.details
           << '\n';
        if (!r.pass && !r.report_only) all_pass = false;
    }
    os << (all_pass ? "ACCEPTANCE: all executed criteria passed\n"
                    : "ACCEPTANCE: failures present\n");
    return all_pass ? 0 : 1;
}

}  // namespace thinning::harness
