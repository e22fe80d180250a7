#pragma once

#include <stdexcept>
#include <string>

namespace thinning {

// Base class for all library errors so callers can catch the whole family.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A schedule formula was evaluated outside the regime where it is meaningful
// (nested logs too small, negative denominators, ...) and no override was given.
struct ParamOutOfAsymptoticRange : Error {
    using Error::Error;
};

// A derived schedule is structurally broken (stage boundaries not increasing,
// zero-length segments, ...).
struct ScheduleInvalid : Error {
    using Error::Error;
};

struct ThetaOutOfRange : Error {
    using Error::Error;
};

struct IntensityInvalid : Error {
    using Error::Error;
};

// realize_distribution target outside the [c/n, (1+c)/n] band.
struct BandViolation : Error {
    using Error::Error;
};

struct StateBudgetExceeded : Error {
    using Error::Error;
};

struct UnsupportedPolicy : Error {
    using Error::Error;
};

struct PreconditionUnmet : Error {
    using Error::Error;
};

// Requested trace/series storage exceeds the configured memory budget.
struct BudgetExceeded : Error {
    using Error::Error;
};

// Auto strategy selection landed within the ambiguity window of a regime
// crossover; the caller has to pick a strategy explicitly.
struct RegimeAmbiguous : Error {
    using Error::Error;
};

// Long-term strategy phase 3 did not reach its stopping conditions within the
// configured ball budget.
struct WatchdogExceeded : Error {
    using Error::Error;
};

}  // namespace thinning
