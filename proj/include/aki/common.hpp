#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace aki {

// Missing values are NaN throughout; counts are never missing.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

inline double sigmoid(double z) {
    if (z >= 0.0) {
        const double e = std::exp(-z);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Thrown for malformed inputs (bad rows, non-monotone series, ...).
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown for unusable configuration (missing columns, bad system names, ...).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace aki
