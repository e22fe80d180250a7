#include "thinning/engine.hpp"

#include <chrono>
#include <ostream>

#include "thinning/errors.hpp"

namespace thinning {

namespace {

void emit_trace_line(std::ostream& os, const StepRecord& rec, bool full) {
    os << "{\"k\":" << rec.k;
    if (full) {
        if (rec.primary >= 0)
            os << ",\"primary\":" << rec.primary;
        else
            os << ",\"primary\":null";
        os << ",\"decision\":\"" << to_string(rec.decision) << "\"";
        os << ",\"final\":" << rec.final_bin;
    }
    os << ",\"max_scaled\":" << rec.max_scaled << "}\n";
}

inline void apply_allocation(LoadState& s, int32_t bin) {
    ++s.counts[size_t(bin)];
    const int64_t lvl = s.counts[size_t(bin)] + s.initial_loads[size_t(bin)];
    if (lvl > s.max_level) s.max_level = lvl;
}

}  // namespace

StepRecord step(LoadState& s, StrategyPolicy& policy, RandomStream& primary,
                RandomStream& aux) {
    StepRecord rec;
    rec.k = s.k + 1;
    if (policy.coupled_next()) {
        rec.decision = StepKind::Coupled;
        rec.primary = -1;
        rec.final_bin = policy.couple(s, aux);
        ++s.coupled_steps;
    } else {
        const int32_t p = int32_t(primary.index(s.n));
        DecisionContext ctx;
        ctx.k = rec.k;
        ctx.n = s.n;
        ctx.primary = p;
        ctx.primary_scaled_load = s.scaled_load(p);
        ctx.primary_accepted = s.accepted_primaries[size_t(p)];
        ctx.u = aux.uniform01();
        ctx.aux = &aux;
        rec.primary = p;
        if (policy.accept(ctx)) {
            rec.decision = StepKind::Accept;
            rec.final_bin = p;
            ++s.accepted_primaries[size_t(p)];
        } else {
            rec.decision = StepKind::Reject;
            rec.final_bin = int32_t(aux.index(s.n));
            ++s.retries;
        }
    }
    apply_allocation(s, rec.final_bin);
    s.k = rec.k;
    rec.max_scaled = s.max_scaled_load();
    policy.on_step(s, rec);
    return rec;
}

RunTrace run(int64_t n, int64_t m, StrategyPolicy& policy,
             const std::vector<int64_t>& initial_loads, RandomStream& primary,
             RandomStream& aux, const RunConfig& cfg) {
    if (m < 0) throw std::invalid_argument("run: m must be non-negative");
    if (cfg.series_stride > 0 && m / cfg.series_stride > cfg.series_budget)
        throw BudgetExceeded("run: max-load series of " + std::to_string(m / cfg.series_stride) +
                             " entries exceeds budget; raise series_budget or stride");
    if (cfg.keep_step_records && m > cfg.step_record_budget)
        throw BudgetExceeded("run: step record retention exceeds budget");

    const auto t0 = std::chrono::steady_clock::now();
    RunTrace out;
    out.n = n;
    out.m = m;
    out.series_stride = cfg.series_stride > 0 ? cfg.series_stride : 1;

    LoadState s = LoadState::make(n, initial_loads);
    policy.init(s);
    out.maxload_alltime_scaled = s.max_scaled_load();  // MaxLoad(0)

    if (cfg.series_stride > 0) out.max_series.reserve(size_t(m / cfg.series_stride));
    if (cfg.keep_step_records) out.steps.reserve(size_t(m));
    const int64_t full_stride = cfg.trace_full_stride > 0 ? cfg.trace_full_stride
                                                          : std::max<int64_t>(n, 1);

    for (int64_t k = 1; k <= m; ++k) {
        const StepRecord rec = step(s, policy, primary, aux);
        if (rec.max_scaled > out.maxload_alltime_scaled)
            out.maxload_alltime_scaled = rec.max_scaled;
        if (cfg.series_stride > 0 && k % cfg.series_stride == 0)
            out.max_series.push_back(rec.max_scaled);
        if (cfg.keep_step_records) out.steps.push_back(rec);
        if (cfg.trace_out && k % cfg.trace_stride == 0)
            emit_trace_line(*cfg.trace_out, rec, k % full_stride == 0);
    }

    out.maxload_final_scaled = s.max_scaled_load();
    out.coupled_steps = s.coupled_steps;
    if (s.coupled_steps < m || m == 0) out.retries = s.retries;
    out.final_state = std::move(s);
    out.wallclock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

RunTrace run_seeded(int64_t n, int64_t m, StrategyPolicy& policy, uint64_t seed,
                    const std::vector<int64_t>& initial_loads, const RunConfig& cfg) {
    RandomStream primary = derive_stream(seed, 0, 0);
    RandomStream aux = derive_stream(seed, 0, 1);
    return run(n, m, policy, initial_loads, primary, aux, cfg);
}

namespace {

// Common loop for the two comparator allocators. pick(first_bin) returns the
// final bin for the current ball.
template <typename Pick>
RunTrace run_comparator(int64_t n, int64_t m, const std::vector<int64_t>& initial_loads,
                        const RunConfig& cfg, Pick&& pick) {
    if (cfg.series_stride > 0 && m / cfg.series_stride > cfg.series_budget)
        throw BudgetExceeded("comparator run: series exceeds budget");
    const auto t0 = std::chrono::steady_clock::now();
    RunTrace out;
    out.n = n;
    out.m = m;
    out.series_stride = cfg.series_stride > 0 ? cfg.series_stride : 1;
    LoadState s = LoadState::make(n, initial_loads);
    out.maxload_alltime_scaled = s.max_scaled_load();
    if (cfg.series_stride > 0) out.max_series.reserve(size_t(m / cfg.series_stride));
    for (int64_t k = 1; k <= m; ++k) {
        const int32_t bin = pick(s);
        apply_allocation(s, bin);
        s.k = k;
        const int64_t ms = s.max_scaled_load();
        if (ms > out.maxload_alltime_scaled) out.maxload_alltime_scaled = ms;
        if (cfg.series_stride > 0 && k % cfg.series_stride == 0) out.max_series.push_back(ms);
        if (cfg.keep_step_records)
            out.steps.push_back(StepRecord{k, -1, StepKind::Coupled, bin, ms});
    }
    out.maxload_final_scaled = s.max_scaled_load();
    out.coupled_steps = m;  // not a thinning process: no retry semantics
    out.final_state = std::move(s);
    out.wallclock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace

RunTrace run_two_choice(int64_t n, int64_t m, RandomStream& first, RandomStream& aux,
                        const std::vector<int64_t>& initial_loads, const RunConfig& cfg) {
    return run_comparator(n, m, initial_loads, cfg, [&](const LoadState& s) -> int32_t {
        const int32_t a = int32_t(first.index(n));
        const int32_t b = int32_t(aux.index(n));
        const int64_t la = s.level(a);
        const int64_t lb = s.level(b);
        if (la != lb) return la < lb ? a : b;
        return std::min(a, b);
    });
}

RunTrace run_one_plus_beta(int64_t n, int64_t m, double beta, RandomStream& first,
                           RandomStream& aux, const std::vector<int64_t>& initial_loads,
                           const RunConfig& cfg) {
    if (beta < 0.0 || beta > 1.0)
        throw std::invalid_argument("one_plus_beta: beta must be in [0,1]");
    // Degenerate mixtures shortcut to the pure allocator so that beta = 1
    // reproduces two-choice and beta = 0 reproduces one-choice exactly.
    if (beta == 1.0) return run_two_choice(n, m, first, aux, initial_loads, cfg);
    if (beta == 0.0)
        return run_comparator(n, m, initial_loads, cfg, [&](const LoadState&) -> int32_t {
            return int32_t(first.index(n));
        });
    return run_comparator(n, m, initial_loads, cfg, [&](const LoadState& s) -> int32_t {
        const int32_t a = int32_t(first.index(n));
        if (aux.uniform01() >= beta) return a;
        const int32_t b = int32_t(aux.index(n));
        const int64_t la = s.level(a);
        const int64_t lb = s.level(b);
        if (la != lb) return la < lb ? a : b;
        return std::min(a, b);
    });
}

}  // namespace thinning
