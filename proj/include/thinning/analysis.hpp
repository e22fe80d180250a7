#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "thinning/errors.hpp"
#include "thinning/load_state.hpp"

namespace thinning::analysis {

// ---------------------------------------------------------------------------
// Rate function and Poisson tail oracles
// ---------------------------------------------------------------------------

// I(x) = (1+x)ln(1+x) - x for x > -1. Non-negative, zero only at x = 0.
double rate_I(double x);

enum class TailSide { Upper, Lower };

// Exact P(X >= lambda+kappa) (Upper) or P(X <= lambda-kappa) (Lower) for
// X ~ Poisson(lambda), by log-space summation. lambda_cap guards runtime.
struct TailValue {
    double value = 0.0;
    double log_value = 0.0;  // natural log, -inf when value == 0
};
TailValue poisson_tail_exact(double lambda, double kappa, TailSide side,
                             double lambda_cap = 1e6);

// e^{-2 lambda I(kappa/lambda)} <= P(X >= lambda+kappa) <= e^{-lambda I(kappa/lambda)}.
// The upper bound holds for every lambda > 0; the lower bound only
// asymptotically, which the flag records.
struct TailSandwich {
    double lower = 0.0;
    double upper = 0.0;
    double log_lower = 0.0;
    double log_upper = 0.0;
    bool lower_is_asymptotic = true;
};
TailSandwich poisson_tail_sandwich(double lambda, double kappa);

// Retry threshold r* = 6 n e^{-lambda I(ell/lambda)} / log(1+ell/lambda) and
// the companion failure bound exp(-n e^{-lambda I(ell/lambda)}).
struct RetryThreshold {
    double r_star = 0.0;
    double failure_bound = 0.0;
    double log_failure_bound = 0.0;
};
RetryThreshold retry_threshold(double n, double lambda, double ell);

// (320/theta^2) exp(-theta k / 5); vacuous when the value exceeds 1.
struct BoundValue {
    double value = 0.0;
    double log_value = 0.0;
    bool vacuous = false;
};
BoundValue drift_tail_bound(double theta, double k);

// Level-set size threshold (160/theta^2) n e^{-theta k/3} and its failure
// probability 2 exp(-2n (80/theta^2)^2 e^{-2 theta k/3}). Requires k >= 3*k0
// with k0 = 1 + (2/theta) log(80/theta^2).
struct LevelSetBound {
    double count_threshold = 0.0;
    double prob_bound = 0.0;
    double log_prob_bound = 0.0;
    double k0 = 0.0;
};
LevelSetBound drift_levelset_bound(double theta, double k, double n);
double drift_levelset_k0(double theta);

// 2 exp(-theta^k |S| / (e k!)), the one-choice subset max-load bound.
BoundValue subset_maxload_bound(double theta_frac, int64_t k, double set_size);

// ---------------------------------------------------------------------------
// Chi-square helpers (library-grade incomplete gamma, used by the
// realize_distribution goodness-of-fit checks)
// ---------------------------------------------------------------------------

double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);
double chi_square_sf(double x, double df);

struct ChiSquareGof {
    double statistic = 0.0;
    double df = 0.0;
    double p_value = 1.0;
};
ChiSquareGof chi_square_gof(const std::vector<int64_t>& counts,
                            const std::vector<double>& probs);

// ---------------------------------------------------------------------------
// Exact small-instance distribution oracle
// ---------------------------------------------------------------------------

// Exact rational with int64 numerator/denominator. Denominators stay within
// n^(2m) <= 3^16 under the DP budget, far from overflow.
struct Rational {
    int64_t num = 0;
    int64_t den = 1;

    Rational() = default;
    Rational(int64_t n, int64_t d);
    static Rational zero() { return Rational(); }
    static Rational one() { return Rational(1, 1); }

    Rational operator+(const Rational& o) const;
    Rational operator*(const Rational& o) const;
    bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
    double to_double() const { return double(num) / double(den); }
};

// Canonical final configuration: per-bin (count, accepted_primaries) pairs,
// sorted when the initial loads are symmetric, in bin order otherwise.
using CanonState = std::vector<std::pair<int32_t, int32_t>>;

enum class DpPolicyKind { AcceptAll, RejectAll, Threshold, RelativeThreshold };

struct DpPolicyParams {
    double ell = 0.0;
    double log_base = 2.718281828459045235;  // natural log by default
};

struct ExactDistribution {
    int64_t n = 0;
    int64_t m = 0;
    std::map<CanonState, Rational> states;

    Rational total() const;
    // P(max count >= c) over final configurations.
    Rational prob_max_count_at_least(int64_t c) const;
};

// Forward rational-probability propagation over all reachable configurations.
// The decision logic is written out here, deliberately independent of the
// strategies module, so it can serve as an oracle for the engine.
ExactDistribution exact_small_dp(int64_t n, int64_t m, DpPolicyKind kind,
                                 const DpPolicyParams& params = {},
                                 const std::vector<int64_t>& initial_loads = {});

CanonState canonicalize(const std::vector<int64_t>& counts,
                        const std::vector<int64_t>& accepted, bool symmetric);

// Total-variation distance between the exact distribution and an empirical
// map of canonical states (counts out of `samples`).
double tv_distance(const ExactDistribution& exact,
                   const std::map<CanonState, int64_t>& empirical, int64_t samples);

// Numeric mean/sd of max of r iid Poisson(lambda) variables (one-choice
// Poissonized prediction for the max count).
struct MaxPoissonMoments {
    double mean = 0.0;
    double sd = 0.0;
};
MaxPoissonMoments max_iid_poisson_moments(int64_t r, double lambda);

// Simple least-squares fit of y = a + b x with R^2, for tail-shape checks.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

// Largest integer strictly below -n*log_base(n): the scaled-integer cutoff
// implementing "load < -log n" exactly.
int64_t low_load_cut_scaled(int64_t n, double log_base);

}  // namespace thinning::analysis
