#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace nearcrit {

using SiteId = std::uint32_t;
using EdgeId = std::uint32_t;

inline constexpr SiteId kNullSite = static_cast<SiteId>(-1);
inline constexpr std::uint32_t kNullCluster = static_cast<std::uint32_t>(-1);

// Error taxonomy. Configuration errors come from bad experiment setups,
// usage errors from violated call contracts, integrity/format errors from
// inconsistent or corrupt data.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};
struct UsageError : std::invalid_argument {
    explicit UsageError(const std::string& what) : std::invalid_argument(what) {}
};
struct IntegrityError : std::runtime_error {
    explicit IntegrityError(const std::string& what) : std::runtime_error(what) {}
};
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};
struct CalibrationError : std::runtime_error {
    explicit CalibrationError(const std::string& what) : std::runtime_error(what) {}
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline bool is_dyadic(double v) {
    // v = 2^-k for integer k >= 0, or an exact positive power of two.
    if (v <= 0.0) return false;
    int exp = 0;
    double m = std::frexp(v, &exp);
    return m == 0.5;  // mantissa exactly one bit
}

}  // namespace nearcrit
