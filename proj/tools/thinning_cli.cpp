// Command-line front end: reproducible experiment runs, parameter schedule
// inspection, numeric bound tables and the acceptance suite.

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "thinning/analysis.hpp"
#include "thinning/harness.hpp"
#include "thinning/point_process.hpp"

namespace th = thinning;
namespace hn = thinning::harness;

namespace {

struct CommonArgs {
    std::string strategy = "auto";
    std::string metric = "single_time";
    std::vector<int64_t> ns = {1 << 16};
    std::optional<int64_t> m;
    std::optional<double> t;
    std::optional<double> m_alpha;
    std::optional<double> ell;
    std::optional<double> L0;
    double eta = 0.0;
    double theta = 0.2;
    double t_prime = 0.0;
    double beta = 0.5;
    double Q = 0.0;
    double d = 1.0;
    double eps = 0.1;
    int64_t trials = 1;
    uint64_t seed = 1;
    double log_base = th::kNaturalBase;
    std::string overrides_path;
    std::string out;
    std::string out_json;
    std::string trace;
    int64_t trace_stride = 1;
    int threads = 1;
    int64_t series_stride = 1;
};

void add_common_flags(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--strategy", a.strategy,
                    "auto | one_choice | reject_all | threshold | relative_threshold | "
                    "multi_stage | drift_multi_stage | drift | varying_drift | q_multi_scale | "
                    "d_multiscale_longterm | two_choice | one_plus_beta");
    cmd->add_option("--metric", a.metric, "single_time | all_time | typical (drives auto)");
    cmd->add_option("--n", a.ns, "bin counts (one run per value)")->delimiter(',');
    cmd->add_option("--m", a.m, "absolute number of balls");
    cmd->add_option("--t", a.t, "balls = n*t");
    cmd->add_option("--m-log-alpha", a.m_alpha, "balls = n*ceil((log n)^alpha)");
    cmd->add_option("--ell", a.ell, "strategy threshold parameter");
    cmd->add_option("--L0", a.L0, "multi-stage L0");
    cmd->add_option("--eta", a.eta, "multi-stage eta (default 0)");
    cmd->add_option("--theta", a.theta, "drift intensity parameter");
    cmd->add_option("--t-prime", a.t_prime, "drift_multi_stage hand-off time");
    cmd->add_option("--beta", a.beta, "one_plus_beta mixing parameter");
    cmd->add_option("--Q", a.Q, "q_multi_scale base increment");
    cmd->add_option("--d", a.d, "long-term horizon exponent");
    cmd->add_option("--eps", a.eps, "typical-load epsilon");
    cmd->add_option("--trials", a.trials, "independent trials per n");
    cmd->add_option("--seed", a.seed, "master seed");
    cmd->add_option("--log-base", a.log_base, "logarithm base for -log n cutoffs (default e)");
    cmd->add_option("--overrides", a.overrides_path, "JSON schedule override file");
    cmd->add_option("--out", a.out, "CSV output path");
    cmd->add_option("--out-json", a.out_json, "JSON summary path");
    cmd->add_option("--trace", a.trace, "NDJSON trace path (trial 0)");
    cmd->add_option("--trace-stride", a.trace_stride, "trace subsampling stride");
    cmd->add_option("--series-stride", a.series_stride,
                    "max-load series stride (0 disables, disables typical load)");
    cmd->add_option("--threads", a.threads, "worker threads");
}

hn::ExperimentSpec build_spec(const CommonArgs& a) {
    hn::ExperimentSpec spec;
    spec.metric = hn::metric_from_string(a.metric);
    spec.ns = a.ns;
    if (a.m) {
        spec.m_rule.kind = hn::MRule::Kind::Absolute;
        spec.m_rule.absolute = *a.m;
    } else if (a.m_alpha) {
        spec.m_rule.kind = hn::MRule::Kind::LogAlpha;
        spec.m_rule.alpha = *a.m_alpha;
    } else {
        spec.m_rule.kind = hn::MRule::Kind::TimesT;
        spec.m_rule.t = a.t.value_or(1.0);
    }
    spec.trials = a.trials;
    spec.master_seed = a.seed;
    spec.eps = a.eps;
    spec.log_base = a.log_base;
    spec.threads = a.threads;
    spec.series_stride = a.series_stride;
    spec.out_csv = a.out;
    spec.out_json = a.out_json;
    spec.trace_path = a.trace;
    spec.trace_stride = a.trace_stride;

    if (a.strategy != "auto") {
        hn::StrategySpec s;
        s.kind = hn::strategy_kind_from_string(a.strategy);
        s.ell = a.ell;
        s.L0 = a.L0;
        s.eta = a.eta;
        s.theta = a.theta;
        s.t_prime = a.t_prime;
        s.beta = a.beta;
        s.Q = a.Q;
        s.d = a.d;
        if (!a.overrides_path.empty()) s.overrides = th::Overrides::from_file(a.overrides_path);
        spec.strategy = s;
    }
    return spec;
}

int cmd_run(const CommonArgs& a) {
    const hn::ExperimentSpec spec = build_spec(a);
    const hn::ExperimentResult res = hn::run_experiment(spec);
    std::cout << th::metrics::csv_header() << ",provenance_hash\n";
    for (const auto& row : res.rows)
        std::cout << th::metrics::to_csv(row) << ',' << res.provenance << '\n';
    if (!spec.out_json.empty() || a.out.empty()) std::cerr << res.summary_json << '\n';
    return 0;
}

int cmd_params(const CommonArgs& a) {
    th::Overrides ov;
    if (!a.overrides_path.empty()) ov = th::Overrides::from_file(a.overrides_path);
    const int64_t n = a.ns.front();
    const int64_t m = build_spec(a).m_rule.resolve(n, a.log_base);
    nlohmann::json out;
    out["n"] = n;
    out["m"] = m;
    if (a.strategy == "auto") {
        const auto sel = hn::auto_select(hn::metric_from_string(a.metric), n, m, a.log_base, ov);
        out["regime"] = sel.regime;
        out["strategy"] = sel.spec.label();
        for (const auto& [k, v] : sel.derived) out["derived"][k] = v;
        if (sel.spec.kind == hn::StrategyKind::MultiStage) {
            const auto sched = th::MultiStageSchedule::derive(
                std::ceil(double(m) / double(n)), sel.spec.L0.value_or(0.0), sel.spec.ell,
                sel.spec.eta, n, a.log_base, ov);
            out["schedule"] = nlohmann::json::parse(sched.to_json());
        }
    } else {
        const auto kind = hn::strategy_kind_from_string(a.strategy);
        out["strategy"] = a.strategy;
        const double t = double(m) / double(n);
        if (kind == hn::StrategyKind::MultiStage || kind == hn::StrategyKind::DriftMultiStage) {
            const double ts = std::ceil(t) - (kind == hn::StrategyKind::DriftMultiStage
                                                  ? a.t_prime
                                                  : 0.0);
            const auto sched = th::MultiStageSchedule::derive(ts, a.L0.value_or(0.0), a.ell,
                                                              a.eta, n, a.log_base, ov);
            out["schedule"] = nlohmann::json::parse(sched.to_json());
        } else if (kind == hn::StrategyKind::QMultiScale) {
            const auto sched = th::MultiScaleSchedule::derive(n, a.log_base, ov);
            out["schedule"] = nlohmann::json::parse(sched.to_json());
        } else if (kind == hn::StrategyKind::LongTerm) {
            const auto sched = th::LongTermSchedule::derive(a.d, n, a.log_base, ov);
            out["schedule"] = nlohmann::json::parse(sched.to_json());
        }
    }
    out["provenance_hash"] = th::provenance_hash(out.dump());
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_oracle(const CommonArgs& a, bool run_equivalence) {
    namespace an = th::analysis;
    // Rate-function table.
    std::cout << "table,x,I,lower_x2_4,upper_x2_2\n";
    for (int i = 0; i <= 40; ++i) {
        const double x = 4.0 * i / 40.0;
        std::cout << "rate_I," << x << ',' << an::rate_I(x) << ',' << x * x / 4.0 << ','
                  << x * x / 2.0 << '\n';
    }
    std::cout << "table,lambda,kappa,exact,lower,upper\n";
    for (double lambda : {50.0, 100.0, 200.0}) {
        for (int i = 0; i < 8; ++i) {
            const double kappa = std::sqrt(lambda) *
                                 std::pow(4.0 * lambda / std::sqrt(lambda), i / 7.0);
            const auto exact = an::poisson_tail_exact(lambda, kappa, an::TailSide::Upper);
            const auto sw = an::poisson_tail_sandwich(lambda, kappa);
            std::cout << "poisson_tail," << lambda << ',' << kappa << ',' << exact.value << ','
                      << sw.lower << ',' << sw.upper << '\n';
        }
    }
    const auto rt = an::retry_threshold(1000, 1.0, 4.0);
    std::cout << "table,n,lambda,ell,r_star,failure_bound\n";
    std::cout << "retry_threshold,1000,1,4," << rt.r_star << ',' << rt.failure_bound << '\n';
    std::cout << "table,theta,k,drift_tail,vacuous\n";
    for (int k = 100; k <= 400; k += 100) {
        const auto b = an::drift_tail_bound(0.2, k);
        std::cout << "drift_tail,0.2," << k << ',' << b.value << ',' << (b.vacuous ? 1 : 0)
                  << '\n';
    }
    if (run_equivalence) {
        hn::AcceptanceOptions opts;
        opts.quick = true;
        opts.master_seed = a.seed;
        const auto res = hn::run_acceptance("oracle_equivalence", opts);
        return hn::report_acceptance(res, std::cout);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-thinning balls-into-bins simulator and bound checker"};
    app.require_subcommand(1);

    CommonArgs run_args, sweep_args, params_args, oracle_args;
    auto* run_cmd = app.add_subcommand("run", "run one experiment configuration");
    add_common_flags(run_cmd, run_args);
    auto* sweep_cmd = app.add_subcommand("sweep", "fan out over a list of n values");
    add_common_flags(sweep_cmd, sweep_args);
    auto* params_cmd = app.add_subcommand("params", "print the derived parameter schedule");
    add_common_flags(params_cmd, params_args);
    auto* oracle_cmd =
        app.add_subcommand("oracle", "print bound tables; optionally run the DP/MC check");
    add_common_flags(oracle_cmd, oracle_args);
    bool oracle_check = false;
    oracle_cmd->add_flag("--check", oracle_check, "run the DP vs Monte Carlo equivalence check");

    std::string suite = "all";
    bool quick = false;
    uint64_t verify_seed = 2026;
    int verify_threads = 0;
    auto* verify_cmd = app.add_subcommand("verify", "run an acceptance suite");
    verify_cmd->add_option("suite", suite, "suite name (default: all)");
    verify_cmd->add_flag("--quick", quick, "scaled-down CI variant");
    verify_cmd->add_option("--seed", verify_seed, "master seed");
    verify_cmd->add_option("--threads", verify_threads, "worker threads (0 = auto)");
    bool list_suites = false;
    verify_cmd->add_flag("--list", list_suites, "list available suites");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return cmd_run(run_args);
        if (sweep_cmd->parsed()) return cmd_run(sweep_args);
        if (params_cmd->parsed()) return cmd_params(params_args);
        if (oracle_cmd->parsed()) return cmd_oracle(oracle_args, oracle_check);
        if (verify_cmd->parsed()) {
            if (list_suites) {
                for (const auto& s : hn::acceptance_suites()) std::cout << s << '\n';
                return 0;
            }
            hn::AcceptanceOptions opts;
            opts.quick = quick;
            opts.master_seed = verify_seed;
            opts.threads = verify_threads;
            const auto results = hn::run_acceptance(suite, opts);
            return hn::report_acceptance(results, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
