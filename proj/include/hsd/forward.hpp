#pragma once

#include "hsd/kernel.hpp"
#include "hsd/random.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace hsd {

/// Admissible region -a<x1<a, -b<x2<b, 0<x3<c.
struct Box {
    double a{2.0};
    double b{1.0};
    double c{1.0};

    double diameter() const { return std::sqrt((2 * a) * (2 * a) + (2 * b) * (2 * b) + c * c); }

    bool contains(const Point3& p) const {
        return -a < p.x1 && p.x1 < a && -b < p.x2 && p.x2 < b && 0.0 < p.x3 && p.x3 < c;
    }

    double lower(std::size_t axis) const { return axis == 0 ? -a : (axis == 1 ? -b : 0.0); }
    double upper(std::size_t axis) const { return axis == 0 ? a : (axis == 1 ? b : c); }

    friend bool operator==(const Box&, const Box&) = default;
};

inline void validate(const Box& box) {
    if (!(box.a > 0.0) || !(box.b > 0.0) || !(box.c > 0.0)) {
        throw ConfigError("box: a, b and c must be positive");
    }
}

struct Scatterer {
    Point3 position;
    double intensity{0.0};

    friend bool operator==(const Scatterer&, const Scatterer&) = default;
};

inline void validate(const Scatterer& s, const Box& box, double v_max) {
    if (!box.contains(s.position)) {
        throw ContractViolation("scatterer position outside the box");
    }
    if (!(s.intensity >= 0.0 && s.intensity <= v_max)) {
        throw ContractViolation("scatterer intensity outside [0, v_max]");
    }
}

struct MeasurementSet {
    double k{0.0};
    std::vector<SourceDetectorPair> pairs;
    std::vector<Complex> data;

    std::size_t size() const { return pairs.size(); }

    friend bool operator==(const MeasurementSet&, const MeasurementSet&) = default;
};

inline void validate(const MeasurementSet& set) {
    if (!(set.k > 0.0) || !std::isfinite(set.k)) {
        throw ConfigError("measurement: wavenumber k must be positive");
    }
    if (set.pairs.empty()) {
        throw ConfigError("measurement: no source/detector pairs");
    }
    if (set.pairs.size() != set.data.size()) {
        throw ConfigError("measurement: " + std::to_string(set.pairs.size()) + " pairs but " +
                          std::to_string(set.data.size()) + " data values");
    }
    for (const auto& pair : set.pairs) {
        validate(pair);
    }
    for (const auto& f : set.data) {
        if (!std::isfinite(f.real()) || !std::isfinite(f.imag())) {
            throw ConfigError("measurement: non-finite data value");
        }
    }
}

/// Full source x detector product, source-major.
inline std::vector<SourceDetectorPair> pair_product(const std::vector<Point3>& sources,
                                                    const std::vector<Point3>& detectors) {
    std::vector<SourceDetectorPair> pairs;
    pairs.reserve(sources.size() * detectors.size());
    for (const auto& s : sources) {
        for (const auto& d : detectors) {
            pairs.push_back({s, d});
        }
    }
    return pairs;
}

/// Point-scatterer data f_j = sum_m G_j(z_m) v_m, summed in truth order.
inline MeasurementSet synthesize(const std::vector<Scatterer>& truth, const std::vector<SourceDetectorPair>& pairs,
                                 double k) {
    if (pairs.empty()) {
        throw ConfigError("synthesize: empty pair list");
    }
    if (!(k > 0.0)) {
        throw ContractViolation("synthesize: k must be positive");
    }
    MeasurementSet set{k, pairs, std::vector<Complex>(pairs.size())};
    for (std::size_t j = 0; j < pairs.size(); ++j) {
        Complex f{0.0, 0.0};
        for (const auto& s : truth) {
            f += pair_kernel(pairs[j], s.position, k) * s.intensity;
        }
        set.data[j] = f;
    }
    return set;
}

/// Converts a measured total field u(x_j, y_j) into the scattered datum f_j.
inline Complex field_to_data(Complex u, const SourceDetectorPair& pair, double k) {
    if (!(k > 0.0)) {
        throw ContractViolation("field_to_data: k must be positive");
    }
    return (u - green(pair.source, pair.detector, k)) / (k * k);
}

/// Multiplicative complex noise: f_j (1 + delta zeta_j), with Re and Im of
/// zeta_j independent and uniform on [-1, 1]. Draws two reals per datum in
/// index order.
inline MeasurementSet add_noise(const MeasurementSet& set, double delta, RandomStream& rng) {
    if (!(delta >= 0.0)) {
        throw ContractViolation("add_noise: delta must be nonnegative");
    }
    MeasurementSet out = set;
    if (delta == 0.0) {
        return out;
    }
    for (auto& f : out.data) {
        const double re = rng.uniform(-1.0, 1.0);
        const double im = rng.uniform(-1.0, 1.0);
        f *= Complex{1.0 + delta * re, delta * im};
    }
    return out;
}

} // namespace hsd
