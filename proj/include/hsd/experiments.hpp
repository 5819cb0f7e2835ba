#pragma once

#include "hsd/forward.hpp"
#include "hsd/kernel.hpp"

#include <cstdint>
#include <vector>

namespace hsd {

/// Everything needed to simulate one dataset.
struct ExperimentSpec {
    Box box{};
    double k{5.0};
    double v_max{2.0};
    std::vector<Point3> sources;
    std::vector<Point3> detectors;
    std::vector<Scatterer> truth;
    double noise_delta{0.0};
    std::uint64_t seed{0};

    friend bool operator==(const ExperimentSpec&, const ExperimentSpec&) = default;
};

inline void validate(const ExperimentSpec& spec) {
    validate(spec.box);
    if (!(spec.k > 0.0)) {
        throw ConfigError("spec.k: wavenumber must be positive");
    }
    if (!(spec.v_max > 0.0)) {
        throw ConfigError("spec.v_max: must be positive");
    }
    if (spec.sources.empty()) {
        throw ConfigError("spec.sources: empty");
    }
    if (spec.detectors.empty()) {
        throw ConfigError("spec.detectors: empty");
    }
    for (const auto& p : spec.sources) {
        if (p.x3 != 0.0 || !is_finite(p)) {
            throw ConfigError("spec.sources: every source must be finite with x3 = 0");
        }
    }
    for (const auto& p : spec.detectors) {
        if (p.x3 != 0.0 || !is_finite(p)) {
            throw ConfigError("spec.detectors: every detector must be finite with x3 = 0");
        }
    }
    for (const auto& s : spec.sources) {
        for (const auto& d : spec.detectors) {
            if (s == d) {
                throw ConfigError("spec.detectors: a detector coincides with a source");
            }
        }
    }
    for (const auto& s : spec.truth) {
        if (!spec.box.contains(s.position)) {
            throw ConfigError("spec.truth: position outside the box");
        }
        if (!(s.intensity >= 0.0 && s.intensity <= spec.v_max)) {
            throw ConfigError("spec.truth: intensity outside [0, v_max]");
        }
    }
    if (!(spec.noise_delta >= 0.0)) {
        throw ConfigError("spec.noise_delta: must be nonnegative");
    }
}

/// The six reference inclusions shared by both experiments.
inline std::vector<Scatterer> reference_inclusions() {
    return {
        {{1.640, -0.510, 0.520}, 1.200},
        {{-1.430, -0.500, 0.580}, 0.500},
        {{1.220, 0.570, 0.370}, 0.700},
        {{1.410, 0.230, 0.740}, 0.610},
        {{-0.220, 0.470, 0.270}, 0.700},
        {{-1.410, 0.230, 0.174}, 0.600},
    };
}

/// Sources and detectors directly above the search area (mammography-like layout):
/// 12 sources on x2 = -0.5, 0.5 and 21 detectors on x2 = -1, 0, 1.
inline ExperimentSpec experiment1() {
    ExperimentSpec spec;
    for (int i = 0; i <= 5; ++i) {
        for (int j = 0; j <= 1; ++j) {
            spec.sources.push_back({-2.0 + 0.333 + 0.667 * i, -0.5 + 1.0 * j, 0.0});
        }
    }
    for (int i = 0; i <= 6; ++i) {
        for (int j = 0; j <= 2; ++j) {
            spec.detectors.push_back({-2.0 + 0.667 * i, -1.0 + 1.0 * j, 0.0});
        }
    }
    spec.truth = reference_inclusions();
    return spec;
}

/// Sources and detectors off to one side of the search area (mine-search layout):
/// 8 sources on x2 = 1.5 and 22 detectors on x2 = 1, 2.
inline ExperimentSpec experiment2() {
    ExperimentSpec spec;
    for (int i = 0; i <= 7; ++i) {
        spec.sources.push_back({-1.75 + 0.5 * i, 1.5, 0.0});
    }
    for (int i = 0; i <= 10; ++i) {
        for (int j = 0; j <= 1; ++j) {
            spec.detectors.push_back({-2.0 + 0.4 * i, 1.0 + 1.0 * j, 0.0});
        }
    }
    spec.truth = reference_inclusions();
    return spec;
}

inline ExperimentSpec builtin_experiment(int number) {
    if (number == 1) {
        return experiment1();
    }
    if (number == 2) {
        return experiment2();
    }
    throw ConfigError("experiment must be 1 or 2");
}

/// Noiseless data from the experiment's truth, then noise at spec.noise_delta drawn
/// from the stream seeded by spec.seed.
inline MeasurementSet simulate(const ExperimentSpec& spec) {
    validate(spec);
    MeasurementSet clean = synthesize(spec.truth, pair_product(spec.sources, spec.detectors), spec.k);
    RandomStream rng(derive_seed(spec.seed, StreamTag::noise, 0));
    return add_noise(clean, spec.noise_delta, rng);
}

} // namespace hsd
