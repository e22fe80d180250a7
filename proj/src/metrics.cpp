#include "thinning/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "thinning/errors.hpp"

namespace thinning::metrics {

namespace {

// Indices into max_series covering recorded steps in [k_lo, k_hi].
struct SeriesRange {
    size_t begin = 0;
    size_t end = 0;  // exclusive
};

SeriesRange series_range(const RunTrace& t, int64_t k_lo, int64_t k_hi) {
    if (t.max_series.empty()) throw PreconditionUnmet("metrics: run has no max-load series");
    if (k_hi < 0) k_hi = t.m;
    if (k_lo < 1 || k_hi > t.m || k_lo > k_hi)
        throw std::out_of_range("metrics: step interval out of range");
    const int64_t s = t.series_stride;
    // Recorded steps are s, 2s, ..., entry j covers step (j+1)*s.
    const int64_t first = (k_lo + s - 1) / s;  // smallest multiple index >= k_lo/s
    const int64_t last = k_hi / s;             // largest multiple index <= k_hi/s
    if (first > last) throw PreconditionUnmet("metrics: no recorded step in interval");
    return SeriesRange{size_t(first - 1), size_t(last)};
}

}  // namespace

int64_t maxload_at(const RunTrace& trace, int64_t k) {
    if (k < 1 || k > trace.m) throw std::out_of_range("maxload_at: step out of range");
    if (trace.max_series.empty() || k % trace.series_stride != 0)
        throw PreconditionUnmet("maxload_at: step not recorded at this stride");
    return trace.max_series[size_t(k / trace.series_stride - 1)];
}

IntervalResult maxload_interval(const RunTrace& trace, int64_t k_lo, int64_t k_hi) {
    const SeriesRange r = series_range(trace, k_lo, k_hi);
    int64_t best = trace.max_series[r.begin];
    for (size_t i = r.begin + 1; i < r.end; ++i) best = std::max(best, trace.max_series[i]);
    return IntervalResult{best, trace.series_stride == 1};
}

TypicalResult maxload_typical(const RunTrace& trace, double eps, int64_t k_lo, int64_t k_hi) {
    if (!(eps > 0.0) || eps > 1.0)
        throw PreconditionUnmet("maxload_typical: eps must be in (0,1]");
    const SeriesRange r = series_range(trace, k_lo, k_hi);
    std::vector<int64_t> vals(trace.max_series.begin() + long(r.begin),
                              trace.max_series.begin() + long(r.end));
    std::sort(vals.begin(), vals.end(), std::greater<>());
    const size_t count = vals.size();
    // Need |{k : value_k >= v}| >= eps*|M|; small slack keeps exact integer
    // products of eps*|M| from rounding up spuriously.
    size_t need = size_t(std::ceil(eps * double(count) - 1e-9));
    if (need == 0) need = 1;
    TypicalResult res;
    res.exact = trace.series_stride == 1;
    if (need > count) return res;
    const int64_t v = vals[need - 1];
    if (v > 0) res.value = v;
    return res;
}

int64_t level_set_count(const LoadState& state, const std::vector<int32_t>& S, double ell) {
    const double threshold = double(state.n) * ell;  // compare n*L_i >= n*ell
    auto counted = [&](int64_t i) { return double(state.scaled_load(i)) >= threshold; };
    int64_t count = 0;
    if (S.empty()) {
        for (int64_t i = 0; i < state.n; ++i) count += counted(i);
    } else {
        for (int32_t i : S) count += counted(i);
    }
    return count;
}

int64_t primary_suggestion_count(const RunTrace& trace, const std::vector<int32_t>& S,
                                 int64_t ell, int64_t k_lo, int64_t k_hi) {
    if (k_hi < 0) k_hi = trace.m;
    if (k_lo > k_hi) {
        // Empty step set: no bin is suggested at all.
        return ell <= 0 ? (S.empty() ? trace.n : int64_t(S.size())) : 0;
    }
    if (int64_t(trace.steps.size()) != trace.m)
        throw PreconditionUnmet("primary_suggestion_count: needs full step records");
    std::vector<int64_t> tally(size_t(trace.n), 0);
    for (int64_t k = k_lo; k <= k_hi; ++k) {
        const StepRecord& rec = trace.steps[size_t(k - 1)];
        if (rec.primary >= 0) ++tally[size_t(rec.primary)];
    }
    auto qualifies = [&](int64_t i) { return tally[size_t(i)] >= ell; };
    int64_t count = 0;
    if (S.empty()) {
        for (int64_t i = 0; i < trace.n; ++i) count += qualifies(i);
    } else {
        for (int32_t i : S) count += qualifies(i);
    }
    return count;
}

Decomposition decompose(const LoadState& state) {
    Decomposition d;
    d.primary = state.accepted_primaries;
    d.secondary.resize(size_t(state.n));
    for (int64_t i = 0; i < state.n; ++i)
        d.secondary[size_t(i)] = state.counts[size_t(i)] - state.accepted_primaries[size_t(i)];
    return d;
}

std::string csv_header() {
    return "trial,n,m,strategy,seed,maxload_final_scaled,maxload_alltime_scaled,"
           "maxload_typical_scaled,eps,retries,coupled_steps,wallclock_ms";
}

std::string to_csv(const ResultRow& r) {
    std::ostringstream os;
    os << r.trial << ',' << r.n << ',' << r.m << ',' << r.strategy << ',' << r.seed << ','
       << r.maxload_final_scaled << ',' << r.maxload_alltime_scaled << ',';
    if (r.maxload_typical_scaled) os << *r.maxload_typical_scaled;
    os << ',' << r.eps << ',';
    if (r.retries) os << *r.retries;
    os << ',' << r.coupled_steps << ',' << r.wallclock_ms;
    return os.str();
}

ResultRow from_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    if (fields.size() != 12) throw std::invalid_argument("ResultRow: malformed CSV line");
    ResultRow r;
    r.trial = std::stoll(fields[0]);
    r.n = std::stoll(fields[1]);
    r.m = std::stoll(fields[2]);
    r.strategy = fields[3];
    r.seed = std::stoull(fields[4]);
    r.maxload_final_scaled = std::stoll(fields[5]);
    r.maxload_alltime_scaled = std::stoll(fields[6]);
    if (!fields[7].empty()) r.maxload_typical_scaled = std::stoll(fields[7]);
    r.eps = std::stod(fields[8]);
    if (!fields[9].empty()) r.retries = std::stoll(fields[9]);
    r.coupled_steps = std::stoll(fields[10]);
    r.wallclock_ms = std::stod(fields[11]);
    return r;
}

}  // namespace thinning::metrics
