#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hsd {

using Complex = std::complex<double>;

/// Raised when a kernel is evaluated at (or numerically at) its singularity.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised when a caller breaks an operation's precondition.
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for structurally invalid problem setups (empty pair lists, caps exceeded, ...).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Point3 {
    double x1{0.0};
    double x2{0.0};
    double x3{0.0};

    constexpr double operator[](std::size_t axis) const { return axis == 0 ? x1 : (axis == 1 ? x2 : x3); }
    constexpr double& operator[](std::size_t axis) { return axis == 0 ? x1 : (axis == 1 ? x2 : x3); }

    friend constexpr bool operator==(const Point3&, const Point3&) = default;
};

inline double distance(const Point3& x, const Point3& y) {
    const double d1 = x.x1 - y.x1;
    const double d2 = x.x2 - y.x2;
    const double d3 = x.x3 - y.x3;
    return std::sqrt(d1 * d1 + d2 * d2 + d3 * d3);
}

inline bool is_finite(const Point3& p) {
    return std::isfinite(p.x1) && std::isfinite(p.x2) && std::isfinite(p.x3);
}

/// A source/detector couple on the measurement plane x3 = 0.
struct SourceDetectorPair {
    Point3 source;
    Point3 detector;

    friend bool operator==(const SourceDetectorPair&, const SourceDetectorPair&) = default;
};

inline void validate(const SourceDetectorPair& pair) {
    if (pair.source.x3 != 0.0 || pair.detector.x3 != 0.0) {
        throw ContractViolation("source/detector pair must lie on the plane x3 = 0");
    }
    if (pair.source == pair.detector) {
        throw ContractViolation("source and detector of a pair coincide");
    }
}

/// Separations below this are treated as the kernel singularity.
inline constexpr double kMinSeparation = 1e-12;

/// Free-space outgoing Green's function exp(ik|x-y|) / (4 pi |x-y|).
inline Complex green(const Point3& x, const Point3& y, double k) {
    const double r = distance(x, y);
    if (!(r >= kMinSeparation)) {
        throw DomainError("green: points coincide (|x-y| = " + std::to_string(r) + ")");
    }
    const double modulus = 1.0 / (4.0 * std::numbers::pi * r);
    const double phase = k * r;
    return {modulus * std::cos(phase), modulus * std::sin(phase)};
}

/// G_j(z) = g(detector, z) g(source, z).
inline Complex pair_kernel(const SourceDetectorPair& pair, const Point3& z, double k) {
    return green(pair.detector, z, k) * green(pair.source, z, k);
}

} // namespace hsd
