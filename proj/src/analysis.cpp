#include "thinning/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace thinning::analysis {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

double log_poisson_pmf(double lambda, int64_t k) {
    return -lambda + double(k) * std::log(lambda) - std::lgamma(double(k) + 1.0);
}
}  // namespace

double rate_I(double x) {
    if (!(x > -1.0)) throw PreconditionUnmet("rate_I: x must be > -1");
    return (1.0 + x) * std::log1p(x) - x;
}

TailValue poisson_tail_exact(double lambda, double kappa, TailSide side, double lambda_cap) {
    if (!(lambda > 0)) throw PreconditionUnmet("poisson_tail_exact: lambda must be positive");
    if (lambda > lambda_cap)
        throw PreconditionUnmet("poisson_tail_exact: lambda above configured cap");

    double log_sum = kNegInf;
    if (side == TailSide::Upper) {
        // P(X >= lambda+kappa) = sum_{k >= ceil(lambda+kappa)} pmf(k)
        int64_t k0 = int64_t(std::ceil(lambda + kappa));
        if (k0 < 0) k0 = 0;
        double log_term = log_poisson_pmf(lambda, k0);
        const double log_lambda = std::log(lambda);
        for (int64_t k = k0;; ++k) {
            log_sum = log_add(log_sum, log_term);
            // Terms are eventually dominated by the geometric ratio lambda/k.
            if (double(k) > lambda && log_term < log_sum - 45.0) break;
            log_term += log_lambda - std::log(double(k) + 1.0);
        }
    } else {
        const int64_t k1 = int64_t(std::floor(lambda - kappa));
        if (k1 < 0) return TailValue{0.0, kNegInf};
        double log_term = log_poisson_pmf(lambda, k1);
        const double log_lambda = std::log(lambda);
        for (int64_t k = k1;; --k) {
            log_sum = log_add(log_sum, log_term);
            if (k == 0) break;
            if (double(k) < lambda && log_term < log_sum - 45.0) break;
            log_term += std::log(double(k)) - log_lambda;
        }
    }
    return TailValue{std::exp(log_sum), log_sum};
}

TailSandwich poisson_tail_sandwich(double lambda, double kappa) {
    if (!(lambda > 0)) throw PreconditionUnmet("poisson_tail_sandwich: lambda must be positive");
    if (kappa < 0) throw PreconditionUnmet("poisson_tail_sandwich: kappa must be non-negative");
    const double li = lambda * rate_I(kappa / lambda);
    TailSandwich s;
    s.log_upper = -li;
    s.log_lower = -2.0 * li;
    s.upper = std::exp(s.log_upper);
    s.lower = std::exp(s.log_lower);
    s.lower_is_asymptotic = true;
    return s;
}

RetryThreshold retry_threshold(double n, double lambda, double ell) {
    if (!(ell > 0) || !(lambda > 0))
        throw PreconditionUnmet("retry_threshold: lambda and ell must be positive");
    RetryThreshold r;
    const double e_li = std::exp(-lambda * rate_I(ell / lambda));
    r.r_star = 6.0 * n * e_li / std::log1p(ell / lambda);
    r.log_failure_bound = -n * e_li;
    r.failure_bound = std::exp(r.log_failure_bound);
    return r;
}

BoundValue drift_tail_bound(double theta, double k) {
    if (!(theta > 0) || !(k > 0))
        throw PreconditionUnmet("drift_tail_bound: theta and k must be positive");
    BoundValue b;
    b.log_value = std::log(320.0 / (theta * theta)) - theta * k / 5.0;
    b.value = std::exp(b.log_value);
    b.vacuous = b.value > 1.0;
    return b;
}

double drift_levelset_k0(double theta) {
    return 1.0 + (2.0 / theta) * std::log(80.0 / (theta * theta));
}

LevelSetBound drift_levelset_bound(double theta, double k, double n) {
    if (!(theta > 0)) throw PreconditionUnmet("drift_levelset_bound: theta must be positive");
    LevelSetBound b;
    b.k0 = drift_levelset_k0(theta);
    if (k < 3.0 * b.k0)
        throw PreconditionUnmet("drift_levelset_bound: requires k >= 3*k0 = " +
                                std::to_string(3.0 * b.k0));
    const double c = 80.0 / (theta * theta);
    b.count_threshold = 2.0 * c * n * std::exp(-theta * k / 3.0);
    b.log_prob_bound = std::log(2.0) - 2.0 * n * c * c * std::exp(-2.0 * theta * k / 3.0);
    b.prob_bound = std::exp(b.log_prob_bound);
    return b;
}

BoundValue subset_maxload_bound(double theta_frac, int64_t k, double set_size) {
    if (theta_frac < 0 || theta_frac > 1)
        throw PreconditionUnmet("subset_maxload_bound: theta must be in [0,1]");
    if (k < 0) throw PreconditionUnmet("subset_maxload_bound: k must be non-negative");
    BoundValue b;
    if (set_size <= 0 || theta_frac == 0.0) {
        b.value = 2.0;
        b.log_value = std::log(2.0);
        b.vacuous = true;
        return b;
    }
    // theta^k |S| / (e k!) computed in log space.
    const double log_mass = double(k) * std::log(theta_frac) + std::log(set_size) - 1.0 -
                            std::lgamma(double(k) + 1.0);
    b.log_value = std::log(2.0) - std::exp(log_mass);
    b.value = std::exp(b.log_value);
    b.vacuous = b.value > 1.0;
    return b;
}

// ---------------------------------------------------------------------------
// Incomplete gamma (series + continued fraction)
// ---------------------------------------------------------------------------

namespace {

double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 100000; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 100000; ++i) {
        const double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double regularized_gamma_p(double a, double x) {
    if (!(a > 0) || x < 0) throw PreconditionUnmet("regularized_gamma_p: bad arguments");
    if (x == 0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_contfrac(a, x);
}

double regularized_gamma_q(double a, double x) {
    if (!(a > 0) || x < 0) throw PreconditionUnmet("regularized_gamma_q: bad arguments");
    if (x == 0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_contfrac(a, x);
}

double chi_square_sf(double x, double df) { return regularized_gamma_q(df / 2.0, x / 2.0); }

ChiSquareGof chi_square_gof(const std::vector<int64_t>& counts,
                            const std::vector<double>& probs) {
    if (counts.size() != probs.size() || counts.empty())
        throw PreconditionUnmet("chi_square_gof: size mismatch");
    const double total = double(std::accumulate(counts.begin(), counts.end(), int64_t{0}));
    ChiSquareGof g;
    for (size_t i = 0; i < counts.size(); ++i) {
        const double expect = total * probs[i];
        if (expect <= 0) throw PreconditionUnmet("chi_square_gof: zero expected cell");
        const double diff = double(counts[i]) - expect;
        g.statistic += diff * diff / expect;
    }
    g.df = double(counts.size() - 1);
    g.p_value = chi_square_sf(g.statistic, g.df);
    return g;
}

// ---------------------------------------------------------------------------
// Rational arithmetic
// ---------------------------------------------------------------------------

namespace {
int64_t gcd64(int64_t a, int64_t b) {
    while (b) {
        const int64_t t = a % b;
        a = b;
        b = t;
    }
    return a < 0 ? -a : a;
}
}  // namespace

Rational::Rational(int64_t n, int64_t d) : num(n), den(d) {
    if (den == 0) throw std::invalid_argument("Rational: zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const int64_t g = gcd64(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
}

Rational Rational::operator+(const Rational& o) const {
    __int128 nn = __int128(num) * o.den + __int128(o.num) * den;
    __int128 dd = __int128(den) * o.den;
    __int128 a = nn < 0 ? -nn : nn, b = dd;
    while (b) {
        const __int128 t = a % b;
        a = b;
        b = t;
    }
    if (a > 1) {
        nn /= a;
        dd /= a;
    }
    if (nn > std::numeric_limits<int64_t>::max() || dd > std::numeric_limits<int64_t>::max())
        throw std::overflow_error("Rational: overflow in addition");
    Rational r;
    r.num = int64_t(nn);
    r.den = int64_t(dd);
    return r;
}

Rational Rational::operator*(const Rational& o) const {
    const int64_t g1 = gcd64(num, o.den);
    const int64_t g2 = gcd64(o.num, den);
    const __int128 nn = __int128(num / (g1 ? g1 : 1)) * (o.num / (g2 ? g2 : 1));
    const __int128 dd = __int128(den / (g2 ? g2 : 1)) * (o.den / (g1 ? g1 : 1));
    if (nn > std::numeric_limits<int64_t>::max() || dd > std::numeric_limits<int64_t>::max())
        throw std::overflow_error("Rational: overflow in multiplication");
    Rational r;
    r.num = int64_t(nn);
    r.den = int64_t(dd);
    return r;
}

// ---------------------------------------------------------------------------
// Exact small-instance DP
// ---------------------------------------------------------------------------

CanonState canonicalize(const std::vector<int64_t>& counts,
                        const std::vector<int64_t>& accepted, bool symmetric) {
    CanonState st;
    st.reserve(counts.size());
    for (size_t i = 0; i < counts.size(); ++i)
        st.emplace_back(int32_t(counts[i]), int32_t(accepted[i]));
    if (symmetric) std::sort(st.begin(), st.end(), std::greater<>());
    return st;
}

namespace {

struct DpState {
    // Per-bin counts and accepted primaries, bin order (no quotient during
    // propagation; canonicalization happens at readout).
    std::vector<int32_t> counts;
    std::vector<int32_t> accepted;
    bool operator<(const DpState& o) const {
        if (counts != o.counts) return counts < o.counts;
        return accepted < o.accepted;
    }
};

bool dp_accepts(DpPolicyKind kind, const DpPolicyParams& p, int64_t n, int64_t k,
                const std::vector<int64_t>& initial, const DpState& s, int32_t primary,
                int64_t lowcut) {
    switch (kind) {
        case DpPolicyKind::AcceptAll: return true;
        case DpPolicyKind::RejectAll: return false;
        case DpPolicyKind::Threshold: return double(s.accepted[size_t(primary)]) < p.ell;
        case DpPolicyKind::RelativeThreshold: {
            const double lhs = double(n) * double(s.accepted[size_t(primary)]);
            const double rhs = double(n) * p.ell + double(k - 1);
            if (lhs < rhs) return true;
            const int64_t scaled =
                n * (initial[size_t(primary)] + s.counts[size_t(primary)]) - (k - 1);
            return scaled <= lowcut;
        }
    }
    return false;
}

}  // namespace

Rational ExactDistribution::total() const {
    Rational t = Rational::zero();
    for (const auto& [st, pr] : states) t = t + pr;
    return t;
}

Rational ExactDistribution::prob_max_count_at_least(int64_t c) const {
    Rational t = Rational::zero();
    for (const auto& [st, pr] : states) {
        int32_t mx = 0;
        for (const auto& [cnt, acc] : st) mx = std::max(mx, cnt);
        if (mx >= c) t = t + pr;
    }
    return t;
}

ExactDistribution exact_small_dp(int64_t n, int64_t m, DpPolicyKind kind,
                                 const DpPolicyParams& params,
                                 const std::vector<int64_t>& initial_loads) {
    if (n < 1 || n > 3 || m < 0 || m > 8)
        throw StateBudgetExceeded("exact_small_dp: supported range is n <= 3, m <= 8");
    std::vector<int64_t> initial = initial_loads;
    if (initial.empty()) initial.assign(size_t(n), 0);
    if (int64_t(initial.size()) != n)
        throw std::invalid_argument("exact_small_dp: initial loads size mismatch");
    if (std::accumulate(initial.begin(), initial.end(), int64_t{0}) != 0)
        throw std::invalid_argument("exact_small_dp: initial loads must sum to zero");
    const bool symmetric =
        std::all_of(initial.begin(), initial.end(), [&](int64_t v) { return v == initial[0]; });

    const int64_t lowcut = low_load_cut_scaled(n, params.log_base);
    const Rational inv_n(1, n);

    std::map<DpState, Rational> cur;
    DpState start;
    start.counts.assign(size_t(n), 0);
    start.accepted.assign(size_t(n), 0);
    cur.emplace(start, Rational::one());

    for (int64_t k = 1; k <= m; ++k) {
        std::map<DpState, Rational> next;
        auto add = [&next](const DpState& st, const Rational& pr) {
            auto [it, fresh] = next.emplace(st, pr);
            if (!fresh) it->second = it->second + pr;
        };
        for (const auto& [st, pr] : cur) {
            for (int32_t primary = 0; primary < n; ++primary) {
                const Rational branch = pr * inv_n;  // P(primary = this bin)
                if (dp_accepts(kind, params, n, k, initial, st, primary, lowcut)) {
                    DpState nx = st;
                    ++nx.counts[size_t(primary)];
                    ++nx.accepted[size_t(primary)];
                    add(nx, branch);
                } else {
                    const Rational sub = branch * inv_n;  // uniform secondary
                    for (int32_t sec = 0; sec < n; ++sec) {
                        DpState nx = st;
                        ++nx.counts[size_t(sec)];
                        add(nx, sub);
                    }
                }
            }
        }
        cur = std::move(next);
    }

    ExactDistribution out;
    out.n = n;
    out.m = m;
    for (const auto& [st, pr] : cur) {
        std::vector<int64_t> c(st.counts.begin(), st.counts.end());
        std::vector<int64_t> a(st.accepted.begin(), st.accepted.end());
        const CanonState key = canonicalize(c, a, symmetric);
        auto [it, fresh] = out.states.emplace(key, pr);
        if (!fresh) it->second = it->second + pr;
    }
    return out;
}

double tv_distance(const ExactDistribution& exact,
                   const std::map<CanonState, int64_t>& empirical, int64_t samples) {
    double tv = 0.0;
    for (const auto& [st, pr] : exact.states) {
        const auto it = empirical.find(st);
        const double emp = it == empirical.end() ? 0.0 : double(it->second) / double(samples);
        tv += std::fabs(pr.to_double() - emp);
    }
    for (const auto& [st, cnt] : empirical) {
        if (!exact.states.count(st)) tv += double(cnt) / double(samples);
    }
    return tv / 2.0;
}

MaxPoissonMoments max_iid_poisson_moments(int64_t r, double lambda) {
    // Window of +- 12 standard deviations carries all relevant mass; the CDF
    // is accumulated with an incremental pmf pass.
    const int64_t lo = std::max<int64_t>(0, int64_t(lambda - 12.0 * std::sqrt(lambda) - 8.0));
    const int64_t hi = int64_t(lambda + 12.0 * std::sqrt(lambda) + 8.0);
    double pmf = std::exp(log_poisson_pmf(lambda, lo));
    double cdf = lo == 0 ? pmf
                         : poisson_tail_exact(lambda, lambda - double(lo), TailSide::Lower).value;
    double prev_cdf_pow = std::pow(std::max(cdf - pmf, 0.0), double(r));
    double mean = 0.0, second = 0.0;
    for (int64_t k = lo; k <= hi; ++k) {
        const double cdf_pow = std::pow(std::min(cdf, 1.0), double(r));
        const double pmass = cdf_pow - prev_cdf_pow;
        mean += double(k) * pmass;
        second += double(k) * double(k) * pmass;
        prev_cdf_pow = cdf_pow;
        pmf *= lambda / double(k + 1);
        cdf += pmf;
    }
    MaxPoissonMoments mm;
    mm.mean = mean;
    mm.sd = std::sqrt(std::max(0.0, second - mean * mean));
    return mm;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw PreconditionUnmet("linear_fit: need at least two points");
    const double nn = double(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    LinearFit f;
    const double vx = sxx - sx * sx / nn;
    const double vy = syy - sy * sy / nn;
    const double cxy = sxy - sx * sy / nn;
    f.slope = cxy / vx;
    f.intercept = (sy - f.slope * sx) / nn;
    f.r2 = vy > 0 ? cxy * cxy / (vx * vy) : 1.0;
    return f;
}

int64_t low_load_cut_scaled(int64_t n, double log_base) {
    // Largest integer v with v < -n*log_base(n). Exact when n*log(n) is
    // irrational (always, for the natural log and integer n > 1); for bases
    // where the threshold is an exact integer the strict inequality is kept.
    const double t = double(n) * std::log(double(n)) / std::log(log_base);
    const double f = std::floor(t);
    if (f == t) return -int64_t(t) - 1;
    return -int64_t(std::ceil(t));
}

}  // namespace thinning::analysis
