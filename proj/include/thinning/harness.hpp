#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "thinning/engine.hpp"
#include "thinning/metrics.hpp"
#include "thinning/schedule.hpp"
#include "thinning/strategies.hpp"

namespace thinning::harness {

enum class StrategyKind {
    OneChoice,       // accept-all through the thinning engine
    RejectAll,
    Threshold,
    RelativeThreshold,
    MultiStage,
    DriftMultiStage,
    Drift,
    VaryingDrift,
    QMultiScale,
    LongTerm,
    TwoChoice,     // comparator path
    OnePlusBeta,   // comparator path
};

std::string to_string(StrategyKind k);
StrategyKind strategy_kind_from_string(const std::string& s);

struct StrategySpec {
    StrategyKind kind = StrategyKind::OneChoice;
    std::optional<double> ell;
    std::optional<double> L0;
    double eta = 0.0;
    double theta = 0.2;
    double t_prime = 0.0;
    double beta = 0.5;   // one_plus_beta mixing
    double Q = 0.0;      // q_multi_scale
    double d = 1.0;      // long-term horizon exponent
    Overrides overrides;

    // Human-readable label recorded in the CSV strategy column.
    std::string label() const;
};

// Builds a fresh policy bound to (n, m). Returns nullptr for comparator
// strategies (TwoChoice / OnePlusBeta), which run on their own engine path.
std::unique_ptr<StrategyPolicy> make_policy(const StrategySpec& spec, int64_t n, int64_t m,
                                            double log_base = kNaturalBase);

enum class Metric { SingleTime, AllTime, Typical };
Metric metric_from_string(const std::string& s);

// Auto-selected strategy + parameters for a (metric, n, m) pair, following
// the strategy table with explicit numeric regime crossovers
// t* in {sqrt(log n), log n, log^2 n}. Throws RegimeAmbiguous within +-20% of
// a crossover.
struct AutoSelection {
    StrategySpec spec;
    std::string regime;
    double t = 0.0;
    std::map<std::string, double> derived;  // named derived parameters
};
AutoSelection auto_select(Metric metric, int64_t n, int64_t m,
                          double log_base = kNaturalBase, const Overrides& overrides = {});

struct MRule {
    enum class Kind { Absolute, TimesT, LogAlpha } kind = Kind::TimesT;
    int64_t absolute = 0;
    double t = 1.0;
    double alpha = 1.0;  // m = n * ceil((log n)^alpha)

    int64_t resolve(int64_t n, double log_base) const;
};

struct ExperimentSpec {
    std::optional<StrategySpec> strategy;  // nullopt = auto per metric
    Metric metric = Metric::SingleTime;
    std::vector<int64_t> ns;
    MRule m_rule;
    int64_t trials = 1;
    uint64_t master_seed = 1;
    double eps = 0.1;
    double log_base = kNaturalBase;
    int threads = 1;
    int64_t series_stride = 1;   // 0 disables typical-load recording
    std::string out_csv;         // empty = no file
    std::string out_json;
    std::string trace_path;      // NDJSON trace of trial 0 (optional)
    int64_t trace_stride = 1;
};

struct ExperimentResult {
    std::vector<metrics::ResultRow> rows;  // ordered by (n, trial)
    std::string summary_json;
    uint64_t provenance = 0;
};

// Fan-out over ns x trials. Trials are embarrassingly parallel; aggregation
// is order-independent and rows come back sorted, so the full result is a
// pure function of (spec, code version).
ExperimentResult run_experiment(const ExperimentSpec& spec);

// ---------------------------------------------------------------------------
// Acceptance suite
// ---------------------------------------------------------------------------

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    bool report_only = false;
    std::string details;
};

struct AcceptanceOptions {
    bool quick = false;          // scaled-down CI variant
    uint64_t master_seed = 2026;
    int threads = 0;             // 0 = hardware concurrency
};

// Registered suites: "all", "invariants", "oracle_equivalence",
// "prop41_bound", "single_time_scaling", "table1_ordering",
// "poisson_sandwich", "retry_bound", "drift_concentration",
// "relative_alltime", "typical_vs_alltime".
std::vector<std::string> acceptance_suites();
std::vector<CriterionResult> run_acceptance(const std::string& suite,
                                            const AcceptanceOptions& opts = {});

// Prints one line per criterion; returns the process exit code (0 iff every
// executed non-report-only criterion passed).
int report_acceptance(const std::vector<CriterionResult>& results, std::ostream& os);

}  // namespace thinning::harness
