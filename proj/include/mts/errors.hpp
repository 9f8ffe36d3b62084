#pragma once

#include <stdexcept>
#include <string>

namespace mts {

// Base for all library errors so callers can catch one type at the boundary.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mismatched dimensions / lengths between inputs that must conform.
struct ShapeError : Error {
    using Error::Error;
};

// Input outside the mathematical domain of the operation
// (off-manifold point, sample outside the oracle interval, invalid weight, ...).
struct DomainError : Error {
    using Error::Error;
};

// Significance level outside the supported open interval.
struct LevelError : Error {
    using Error::Error;
};

// A requested computation exceeds the configured search/size budget.
struct BudgetError : Error {
    using Error::Error;
};

// Malformed scenario/config input (maps to CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

} // namespace mts
