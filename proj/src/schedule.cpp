#include "thinning/schedule.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace thinning {

using nlohmann::json;

double log_b(double x, double base) { return std::log(x) / std::log(base); }

Overrides Overrides::from_json(const std::string& text) {
    Overrides o;
    const json doc = json::parse(text);
    if (!doc.is_object()) throw ScheduleInvalid("overrides: expected a flat JSON object");
    for (const auto& [key, val] : doc.items()) {
        if (val.is_number()) {
            o.scalars[key] = val.get<double>();
        } else if (val.is_array()) {
            std::vector<double> v;
            for (const auto& e : val) v.push_back(e.get<double>());
            o.arrays[key] = std::move(v);
        } else {
            throw ScheduleInvalid("overrides: key '" + key + "' must be a number or array");
        }
    }
    return o;
}

Overrides Overrides::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScheduleInvalid("overrides: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

namespace {

// Nested logs in the configured base. Values are invalid (NaN) when the inner
// value is non-positive.
struct NestedLogs {
    double logn = 0.0;
    double loglogn = 0.0;
    double logloglogn = 0.0;
};

NestedLogs nested_logs(int64_t n, double base) {
    NestedLogs l;
    l.logn = log_b(double(n), base);
    l.loglogn = l.logn > 0 ? log_b(l.logn, base) : std::nan("");
    l.logloglogn = l.loglogn > 0 ? log_b(l.loglogn, base) : std::nan("");
    return l;
}

int64_t formula_k(const NestedLogs& l) {
    if (!(l.logloglogn > 1.0)) return -1;  // out of asymptotic range
    return int64_t(std::floor(l.loglogn / (3.0 * l.logloglogn)));
}

json provenance_json(const std::map<std::string, Provenance>& prov) {
    json j = json::object();
    for (const auto& [k, v] : prov) j[k] = to_string(v);
    return j;
}

}  // namespace

MultiStageSchedule MultiStageSchedule::derive(double t, double L0, std::optional<double> ell,
                                              double eta, int64_t n, double log_base,
                                              const Overrides& o) {
    if (!(t > 0)) throw ScheduleInvalid("multi-stage: t must be positive");
    const NestedLogs l = nested_logs(n, log_base);

    MultiStageSchedule s;
    s.t = t;
    s.L0 = L0;
    s.eta = eta;
    s.provenance["t"] = Provenance::Formula;
    s.provenance["L0"] = Provenance::Formula;

    if (auto k = o.get("k")) {
        s.k = int64_t(*k);
        s.provenance["k"] = Provenance::Override;
    } else {
        s.k = formula_k(l);
        if (s.k < 1)
            throw ParamOutOfAsymptoticRange(
                "multi-stage: stage count formula needs log log log n > 1 and yields k >= 1 "
                "(n <= exp(exp(e)) is out of range); supply an override for k");
        s.provenance["k"] = Provenance::Formula;
    }
    if (s.k < 1) throw ScheduleInvalid("multi-stage: k must be >= 1");

    if (auto a = o.get("alpha")) {
        s.alpha = *a;
        s.provenance["alpha"] = Provenance::Override;
    } else {
        if (!(l.loglogn > 0))
            throw ParamOutOfAsymptoticRange(
                "multi-stage: alpha formula needs log log n > 0; override alpha or beta");
        s.alpha = log_b(t, log_base) / l.loglogn;
        s.provenance["alpha"] = Provenance::Formula;
    }
    if (eta < 0) throw ScheduleInvalid("multi-stage: eta must be non-negative");
    if (eta > 0) {
        const double window = (s.alpha - 0.5) / double(4 * s.k - 2);
        if (!(s.alpha > 0.5) || eta > window + 1e-12)
            throw ScheduleInvalid("multi-stage: eta outside [0, (alpha-1/2)/(4k-2)]");
    }
    s.beta = s.alpha + s.eta;
    if (auto b = o.get("beta")) {
        s.beta = *b;
        s.provenance["beta"] = Provenance::Override;
    } else {
        s.provenance["beta"] = Provenance::Formula;
    }
    if (auto e = o.get("eps")) {
        s.eps = *e;
        s.provenance["eps"] = Provenance::Override;
    } else {
        s.eps = (2.0 * s.beta - 1.0) / (2.0 * double(s.k + 1));
        s.provenance["eps"] = Provenance::Formula;
    }

    if (auto bi = o.get_array("beta_i")) {
        s.beta_i = *bi;
        s.provenance["beta_i"] = Provenance::Override;
    } else {
        for (int64_t i = 1; i <= s.k; ++i)
            s.beta_i.push_back(s.beta -
                               (2.0 * s.beta - 1.0 - s.eps) * double(i) / double(2 * s.k + 1));
        s.provenance["beta_i"] = Provenance::Formula;
    }
    if (int64_t(s.beta_i.size()) != s.k)
        throw ScheduleInvalid("multi-stage: beta_i must have k entries");

    if (auto ti = o.get_array("t_i")) {
        s.t_i = *ti;
        s.provenance["t_i"] = Provenance::Override;
        if (int64_t(s.t_i.size()) == s.k) s.t_i.insert(s.t_i.begin(), 0.0);
    } else {
        s.t_i.push_back(0.0);
        for (int64_t i = 1; i < s.k; ++i)
            s.t_i.push_back(std::floor(t - std::pow(l.logn, s.beta_i[size_t(i - 1)])));
        s.t_i.push_back(t);
        s.provenance["t_i"] = Provenance::Formula;
    }
    if (int64_t(s.t_i.size()) != s.k + 1)
        throw ScheduleInvalid("multi-stage: t_i must have k+1 entries (with t_0 = 0)");
    for (int64_t i = 1; i <= s.k; ++i)
        if (!(s.t_i[size_t(i)] > s.t_i[size_t(i - 1)]))
            throw ScheduleInvalid("multi-stage: stage boundaries t_i must be strictly "
                                  "increasing; t_" + std::to_string(i) + " is not");

    if (ell) {
        s.ell = *ell;
        s.provenance["ell"] = Provenance::Override;
    } else if (auto e2 = o.get("ell")) {
        s.ell = *e2;
        s.provenance["ell"] = Provenance::Override;
    } else {
        s.ell = std::floor(std::pow(l.logn, s.beta_i[size_t(s.k - 1)]));
        s.provenance["ell"] = Provenance::Formula;
    }
    if (!(s.ell >= 0)) throw ScheduleInvalid("multi-stage: ell must be non-negative");
    return s;
}

std::string MultiStageSchedule::to_json() const {
    json j;
    j["kind"] = "multi_stage";
    j["k"] = k;
    j["t"] = t;
    j["alpha"] = alpha;
    j["eta"] = eta;
    j["beta"] = beta;
    j["eps"] = eps;
    j["beta_i"] = beta_i;
    j["t_i"] = t_i;
    j["ell"] = ell;
    j["L0"] = L0;
    j["provenance"] = provenance_json(provenance);
    return j.dump(2);
}

int64_t MultiScaleSchedule::scale_duration(int64_t scale) const {
    if (scale < 1 || scale > int64_t(dur_first_i.size()) + 1)
        throw std::out_of_range("scale_duration: no such scale");
    if (scale == 1) return dur_first_i[0];
    const size_t i = size_t(scale - 2);  // iterates scale-1 content, index i = scale-1
    return N_i[i + 0] * (dur_first_i[i] + dur_reg_i[i]);
}

MultiScaleSchedule MultiScaleSchedule::derive(int64_t n, double log_base, const Overrides& o) {
    const NestedLogs l = nested_logs(n, log_base);
    if (!(l.loglogn > 0))
        throw ParamOutOfAsymptoticRange("multi-scale: needs log log n > 0 at this n/base");
    MultiScaleSchedule s;

    if (auto k = o.get("k")) {
        s.k = int64_t(*k);
        s.provenance["k"] = Provenance::Override;
    } else {
        s.k = formula_k(l);
        if (s.k < 1)
            throw ParamOutOfAsymptoticRange(
                "multi-scale: k formula out of range at this n; supply an override for k");
        s.provenance["k"] = Provenance::Formula;
    }
    if (s.k < 1) throw ScheduleInvalid("multi-scale: k must be >= 1");

    if (auto a1 = o.get("alpha1")) {
        s.alpha1 = *a1;
        s.provenance["alpha1"] = Provenance::Override;
    } else {
        if (!(l.logloglogn >= 1.0))
            throw ParamOutOfAsymptoticRange(
                "multi-scale: alpha_1 formula needs floor(sqrt(log log log n)) >= 1; supply an "
                "override for alpha1");
        s.alpha1 = 0.5 + 2.0 / (std::floor(std::sqrt(l.logloglogn)) + 0.25);
        s.provenance["alpha1"] = Provenance::Formula;
    }

    if (auto L = o.get("L")) {
        s.L = *L;
        s.provenance["L"] = Provenance::Override;
    } else {
        s.L = std::pow(l.logn, (1.0 + s.alpha1) / 3.0);
        s.provenance["L"] = Provenance::Formula;
    }

    // Iterate scales until alpha_i exceeds 1. Durations are carried as exact
    // integers: (log n)^{alpha_{i+1}} is *defined* as N_i(d_first_i +
    // d_reg_i), so reconstructing it through pow() would lose exactness.
    double alpha = s.alpha1;
    int64_t duration = int64_t(std::floor(std::pow(l.logn, s.alpha1)));
    const int64_t hard_cap = 64;
    for (int64_t i = 1; i <= hard_cap; ++i) {
        s.alpha_i.push_back(alpha);
        const double eps = (2.0 * alpha - 1.0) / (2.0 * double(s.k + 1));
        const double ell =
            std::pow(l.logn, 0.5 + (alpha - 0.5 + double(s.k) * eps) / double(2 * s.k + 1));
        const double alpha_prime =
            alpha - 0.2 * (2.0 * alpha - 1.0 - eps) / double(2 * s.k + 1);
        s.eps_i.push_back(eps);
        s.ell_i.push_back(ell);
        s.alpha_prime_i.push_back(alpha_prime);
        const int64_t d_first = duration;
        const int64_t d_reg = int64_t(std::floor(std::pow(l.logn, alpha_prime)));
        if (d_first < 1 || d_reg < 1)
            throw ScheduleInvalid("multi-scale: zero-length segment at scale " +
                                  std::to_string(i) + "; the schedule cannot advance");
        if (!(ell > 0)) throw ScheduleInvalid("multi-scale: ell_i must be positive");
        const int64_t N = std::max<int64_t>(int64_t(std::ceil(s.L / (3.0 * double(s.k) * ell))), 1);
        s.dur_first_i.push_back(d_first);
        s.dur_reg_i.push_back(d_reg);
        s.N_i.push_back(N);
        if (alpha > 1.0) break;
        duration = N * (d_first + d_reg);
        alpha = log_b(double(duration), log_base) / l.loglogn;
        if (i == hard_cap)
            throw ScheduleInvalid("multi-scale: scale recursion did not reach alpha > 1");
    }
    // i_max = largest i with alpha_i <= 1 (0 when even alpha_1 > 1).
    s.i_max = 0;
    for (size_t i = 0; i < s.alpha_i.size(); ++i)
        if (s.alpha_i[i] <= 1.0) s.i_max = int64_t(i + 1);
    if (auto im = o.get("i_max")) {
        s.i_max = int64_t(*im);
        s.provenance["i_max"] = Provenance::Override;
        if (s.i_max + 1 > int64_t(s.dur_first_i.size()))
            throw ScheduleInvalid("multi-scale: i_max override beyond derived scales");
    } else {
        s.provenance["i_max"] = Provenance::Formula;
    }
    s.provenance["eps_i"] = s.provenance["ell_i"] = s.provenance["alpha_prime_i"] =
        s.provenance["N_i"] = Provenance::Formula;
    return s;
}

std::string MultiScaleSchedule::to_json() const {
    json j;
    j["kind"] = "q_multi_scale";
    j["k"] = k;
    j["alpha1"] = alpha1;
    j["L"] = L;
    j["i_max"] = i_max;
    j["alpha_i"] = alpha_i;
    j["eps_i"] = eps_i;
    j["ell_i"] = ell_i;
    j["alpha_prime_i"] = alpha_prime_i;
    j["N_i"] = N_i;
    j["dur_first_i"] = dur_first_i;
    j["dur_reg_i"] = dur_reg_i;
    j["provenance"] = provenance_json(provenance);
    return j.dump(2);
}

LongTermSchedule LongTermSchedule::derive(double d, int64_t n, double log_base,
                                          const Overrides& o) {
    if (!(d >= 1.0)) throw ScheduleInvalid("long-term: d must be >= 1");
    const NestedLogs l = nested_logs(n, log_base);
    LongTermSchedule s;
    s.d = d;
    s.scales = MultiScaleSchedule::derive(n, log_base, o);

    const int64_t i_top = s.scales.i_max;
    const double alpha_next = i_top < int64_t(s.scales.alpha_i.size())
                                  ? s.scales.alpha_i[size_t(i_top)]
                                  : s.scales.alpha_i.back();

    auto set = [&](const char* key, double formula_value) {
        if (auto v = o.get(key)) {
            s.provenance[key] = Provenance::Override;
            return *v;
        }
        s.provenance[key] = Provenance::Formula;
        return formula_value;
    };

    s.Q = set("Q", s.scales.L);
    s.A = set("A", std::sqrt(6.0 * d * std::pow(l.logn, 1.0 + alpha_next)));
    s.m0 = int64_t(set("m0", std::floor(200.0 * d * double(n) * l.logn)));
    s.m1 = int64_t(set("m1", double(n) * double(s.scales.scale_duration(i_top + 1))));
    s.m2 = int64_t(set("m2", std::ceil(16.0 * double(n) * s.A)));
    const double alpha0 = log_b(double(s.m0) / double(n), log_base) / l.loglogn;
    const double kk = double(2 * s.scales.k + 1);
    s.L0 = set("L0",
               std::floor(std::pow(l.logn, 0.5 + (2.0 - 1.0 / kk) * (alpha0 - 0.5) / kk)));
    if (s.m0 < 0 || s.m1 <= 0 || s.m2 <= 0)
        throw ScheduleInvalid("long-term: phase lengths must be positive");
    return s;
}

std::string LongTermSchedule::to_json() const {
    json j = json::parse(scales.to_json());
    j["kind"] = "d_multiscale_longterm";
    j["d"] = d;
    j["Q"] = Q;
    j["A"] = A;
    j["m0"] = m0;
    j["m1"] = m1;
    j["m2"] = m2;
    j["L0"] = L0;
    json prov = j["provenance"];
    for (const auto& [k, v] : provenance) prov[k] = to_string(v);
    j["provenance"] = prov;
    return j.dump(2);
}

uint64_t provenance_hash(const std::string& json_text) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : json_text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace thinning
