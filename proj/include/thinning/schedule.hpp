#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "thinning/errors.hpp"

namespace thinning {

inline constexpr double kNaturalBase = 2.718281828459045235;

// Flat key -> value override document (JSON file of scalars and number
// arrays). Keys mirror the ParameterSchedule field names.
struct Overrides {
    std::map<std::string, double> scalars;
    std::map<std::string, std::vector<double>> arrays;

    bool empty() const { return scalars.empty() && arrays.empty(); }
    std::optional<double> get(const std::string& key) const {
        auto it = scalars.find(key);
        if (it == scalars.end()) return std::nullopt;
        return it->second;
    }
    std::optional<std::vector<double>> get_array(const std::string& key) const {
        auto it = arrays.find(key);
        if (it == arrays.end()) return std::nullopt;
        return it->second;
    }

    static Overrides from_json(const std::string& text);
    static Overrides from_file(const std::string& path);
};

enum class Provenance : uint8_t { Formula, Override };

inline const char* to_string(Provenance p) {
    return p == Provenance::Formula ? "formula" : "override";
}

// Stage schedule of the multi-stage (t, L0, ell)-threshold strategy:
//   k      = floor(loglog n / (3 logloglog n))    stages
//   alpha  = log t / loglog n,  beta = alpha + eta
//   eps    = (2 beta - 1) / (2(k+1))
//   beta_i = beta - (2 beta - 1 - eps) i / (2k+1)
//   t_i    = floor(t - (log n)^{beta_i}) for i < k, t_k = t
//   ell    = floor((log n)^{beta_k}) unless supplied
struct MultiStageSchedule {
    int64_t k = 0;
    double t = 0.0;
    double alpha = 0.0;
    double eta = 0.0;
    double beta = 0.0;
    double eps = 0.0;
    std::vector<double> beta_i;  // i = 1..k
    std::vector<double> t_i;     // i = 0..k with t_0 = 0
    double ell = 0.0;
    double L0 = 0.0;
    std::map<std::string, Provenance> provenance;

    static MultiStageSchedule derive(double t, double L0, std::optional<double> ell, double eta,
                                     int64_t n, double log_base = kNaturalBase,
                                     const Overrides& o = {});
    std::string to_json() const;
};

// Scale parameters of the Q-multi-scale strategy:
//   alpha_1 = 1/2 + 2/(floor(sqrt(logloglog n)) + 1/4)
//   L       = (log n)^{(1+alpha_1)/3}
//   eps_i   = (2 alpha_i - 1)/(2(k+1))
//   ell_i   = (log n)^{1/2 + (alpha_i - 1/2 + k eps_i)/(2k+1)}
//   alpha'_i = alpha_i - (1/5)(2 alpha_i - 1 - eps_i)/(2k+1)
//   (log n)^{alpha_{i+1}} = N_i (floor((log n)^{alpha_i}) + floor((log n)^{alpha'_i}))
//   N_i     = ceil(L / (3 k ell_i)),  Q^{i,j} = (2k+1)(j-1) ell_i
struct MultiScaleSchedule {
    int64_t k = 0;
    double alpha1 = 0.0;
    double L = 0.0;
    int64_t i_max = 0;  // largest i with alpha_i <= 1
    std::vector<double> alpha_i;        // 1-indexed via alpha_i[i-1]
    std::vector<double> eps_i;
    std::vector<double> ell_i;
    std::vector<double> alpha_prime_i;
    std::vector<int64_t> N_i;
    std::vector<int64_t> dur_first_i;  // floor((log n)^{alpha_i}), time units
    std::vector<int64_t> dur_reg_i;    // floor((log n)^{alpha'_i})
    std::map<std::string, Provenance> provenance;

    double Q_increment(int64_t scale_i, int64_t j) const {
        return double(2 * k + 1) * double(j - 1) * ell_i[size_t(scale_i - 1)];
    }
    // Total duration (time units) of one full pass of the given scale.
    int64_t scale_duration(int64_t scale) const;

    static MultiScaleSchedule derive(int64_t n, double log_base = kNaturalBase,
                                     const Overrides& o = {});
    std::string to_json() const;
};

// Derived constants of the d-multi-scale long-term combined strategy:
//   Q = L, A = sqrt(6 d (log n)^{1 + alpha_{i_max+1}}),
//   m0 = floor(200 d n log n), m1 = n (log n)^{alpha_{i_max+1}}, m2 = ceil(16 n A),
//   L0 = floor((log n)^{1/2 + (2 - 1/(2k+1)) (alpha - 1/2)/(2k+1)}),
//   alpha = log(m0/n) / loglog n.
struct LongTermSchedule {
    MultiScaleSchedule scales;
    double d = 1.0;
    double Q = 0.0;
    double A = 0.0;
    int64_t m0 = 0;
    int64_t m1 = 0;
    int64_t m2 = 0;
    double L0 = 0.0;
    std::map<std::string, Provenance> provenance;

    static LongTermSchedule derive(double d, int64_t n, double log_base = kNaturalBase,
                                   const Overrides& o = {});
    std::string to_json() const;
};

// log_base(x) helper used across the schedules.
double log_b(double x, double base);

// FNV-1a hash of a schedule's JSON form, recorded with every result row so
// outputs are traceable to the exact parameterization.
uint64_t provenance_hash(const std::string& json);

}  // namespace thinning
