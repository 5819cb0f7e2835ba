#pragma once

#include "hsd/forward.hpp"
#include "hsd/objective.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <tuple>
#include <vector>

namespace hsd {

/// Resolution of a cell-centred grid over the box: node i on an axis of
/// extent L sits at lower + (i + 1/2) L / n, so every node is strictly
/// inside the open box.
struct GridSpec {
    std::size_t n1{41};
    std::size_t n2{21};
    std::size_t n3{21};
    std::size_t cap{1'000'000}; ///< maximum number of objective evaluations

    std::size_t nodes() const { return n1 * n2 * n3; }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline double grid_step(const GridSpec& grid, const Box& box, std::size_t axis) {
    const std::size_t n = axis == 0 ? grid.n1 : (axis == 1 ? grid.n2 : grid.n3);
    return (box.upper(axis) - box.lower(axis)) / static_cast<double>(n);
}

inline Point3 grid_node(const GridSpec& grid, const Box& box, std::size_t index) {
    const std::size_t i3 = index % grid.n3;
    const std::size_t i2 = (index / grid.n3) % grid.n2;
    const std::size_t i1 = index / (grid.n3 * grid.n2);
    auto coord = [&](std::size_t axis, std::size_t i) {
        return box.lower(axis) + (static_cast<double>(i) + 0.5) * grid_step(grid, box, axis);
    };
    return {coord(0, i1), coord(1, i2), coord(2, i3)};
}

/// Number of reduced-objective evaluations grid_oracle would perform.
inline std::size_t oracle_evaluations(const GridSpec& grid, int count) {
    const std::size_t n = grid.nodes();
    return count == 1 ? n : n * (n - 1) / 2;
}

/// Exhaustive minimization of the reduced objective over single grid nodes
/// (count = 1) or unordered pairs of distinct nodes (count = 2). Intensities
/// use the same solve-then-project rule as the search.
inline Configuration grid_oracle(const ObjectiveContext& ctx, const GridSpec& grid, int count) {
    if (count != 1 && count != 2) {
        throw ConfigError("grid_oracle: count must be 1 or 2");
    }
    if (grid.n1 == 0 || grid.n2 == 0 || grid.n3 == 0) {
        throw ConfigError("grid_oracle: grid resolution must be positive");
    }
    if (count == 2 && grid.nodes() < 2) {
        throw ConfigError("grid_oracle: pair search needs at least two nodes");
    }
    if (oracle_evaluations(grid, count) > grid.cap) {
        throw ConfigError("grid_oracle: " + std::to_string(oracle_evaluations(grid, count)) +
                          " evaluations exceed the cap of " + std::to_string(grid.cap));
    }

    const auto rows = static_cast<Eigen::Index>(ctx.pair_count());
    const std::size_t nodes = grid.nodes();
    double best_value = std::numeric_limits<double>::infinity();
    std::vector<Point3> best_positions;

    if (count == 1) {
        Eigen::MatrixXcd a(rows, 1);
        for (std::size_t i = 0; i < nodes; ++i) {
            const Point3 z = grid_node(grid, ctx.box(), i);
            ctx.kernel_column(z, a.col(0));
            const double value = solve_from_design(ctx, a).value;
            if (value < best_value) {
                best_value = value;
                best_positions = {z};
            }
        }
    } else {
        Eigen::MatrixXcd columns(rows, static_cast<Eigen::Index>(nodes));
        for (std::size_t i = 0; i < nodes; ++i) {
            ctx.kernel_column(grid_node(grid, ctx.box(), i), columns.col(static_cast<Eigen::Index>(i)));
        }
        Eigen::MatrixXcd a(rows, 2);
        for (std::size_t i = 0; i < nodes; ++i) {
            a.col(0) = columns.col(static_cast<Eigen::Index>(i));
            for (std::size_t j = i + 1; j < nodes; ++j) {
                a.col(1) = columns.col(static_cast<Eigen::Index>(j));
                const double value = solve_from_design(ctx, a).value;
                if (value < best_value) {
                    best_value = value;
                    best_positions = {grid_node(grid, ctx.box(), i), grid_node(grid, ctx.box(), j)};
                }
            }
        }
    }
    return fit_configuration(ctx, best_positions);
}

struct SlicePoint {
    double r{0.0};
    double value{0.0};
};

/// Reduced objective along one coordinate of one point, the others fixed:
/// `samples` equally spaced values of base[varied_index][axis] in [lo, hi]
/// (a single sample sits at lo).
inline std::vector<SlicePoint> landscape_slice(const ObjectiveContext& ctx, std::span<const Point3> base,
                                               std::size_t varied_index, std::size_t axis, double lo, double hi,
                                               std::size_t samples) {
    if (varied_index >= base.size()) {
        throw ContractViolation("landscape_slice: varied index out of range");
    }
    if (axis > 2) {
        throw ContractViolation("landscape_slice: axis must be 0, 1 or 2");
    }
    if (samples == 0 || !(lo <= hi)) {
        throw ContractViolation("landscape_slice: need samples >= 1 and lo <= hi");
    }
    std::vector<Point3> positions(base.begin(), base.end());
    std::vector<SlicePoint> out;
    out.reserve(samples);
    for (std::size_t s = 0; s < samples; ++s) {
        const double r = samples == 1 ? lo : lo + (hi - lo) * static_cast<double>(s) / static_cast<double>(samples - 1);
        positions[varied_index][axis] = r;
        out.push_back({r, phi_tilde(ctx, positions)});
    }
    return out;
}

/// Interior samples strictly below both neighbours.
inline std::vector<SlicePoint> discrete_local_minima(std::span<const SlicePoint> slice) {
    std::vector<SlicePoint> minima;
    for (std::size_t i = 1; i + 1 < slice.size(); ++i) {
        if (slice[i].value < slice[i - 1].value && slice[i].value < slice[i + 1].value) {
            minima.push_back(slice[i]);
        }
    }
    return minima;
}

inline SlicePoint discrete_global_minimum(std::span<const SlicePoint> slice) {
    return *std::min_element(slice.begin(), slice.end(),
                             [](const SlicePoint& l, const SlicePoint& r) { return l.value < r.value; });
}

/// Positions of the reference landscape slice: point 0 at (r, 0, 0.520) varied
/// along x1, point 1 displaced to (-1, 0.3, 0.580), points 2-5 at the
/// reference inclusions.
inline std::vector<Point3> reference_slice_base(std::span<const Scatterer> truth) {
    std::vector<Point3> base{{0.0, 0.0, 0.520}, {-1.0, 0.3, 0.580}};
    for (std::size_t m = 2; m < truth.size(); ++m) {
        base.push_back(truth[m].position);
    }
    return base;
}

struct MatchedPair {
    std::size_t truth_index{0};
    std::size_t found_index{0};
    double distance{0.0};
    double intensity_error{0.0}; ///< found minus truth

    friend bool operator==(const MatchedPair&, const MatchedPair&) = default;
};

struct MatchReport {
    std::vector<MatchedPair> matched_pairs;
    std::vector<std::size_t> missed_truth;
    std::vector<std::size_t> spurious_found;

    std::size_t matched() const { return matched_pairs.size(); }

    bool truth_matched(std::size_t truth_index) const {
        return std::any_of(matched_pairs.begin(), matched_pairs.end(),
                           [&](const MatchedPair& p) { return p.truth_index == truth_index; });
    }

    friend bool operator==(const MatchReport&, const MatchReport&) = default;
};

/// Default matching radius.
inline constexpr double kMatchRadius = 0.15;

/// Greedy matching: repeatedly pairs the globally closest unmatched
/// (truth, found) couple closer than r_match; ties go to the lowest
/// (truth, found) index pair.
inline MatchReport match_inclusions(const Configuration& found, std::span<const Scatterer> truth,
                                    double r_match = kMatchRadius) {
    if (!(r_match > 0.0)) {
        throw ContractViolation("match_inclusions: r_match must be positive");
    }
    std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
    for (std::size_t t = 0; t < truth.size(); ++t) {
        for (std::size_t f = 0; f < found.size(); ++f) {
            const double d = distance(truth[t].position, found.scatterers[f].position);
            if (d < r_match) {
                candidates.emplace_back(d, t, f);
            }
        }
    }
    std::sort(candidates.begin(), candidates.end());

    MatchReport report;
    std::vector<bool> truth_used(truth.size(), false);
    std::vector<bool> found_used(found.size(), false);
    for (const auto& [d, t, f] : candidates) {
        if (truth_used[t] || found_used[f]) {
            continue;
        }
        truth_used[t] = true;
        found_used[f] = true;
        report.matched_pairs.push_back({t, f, d, found.scatterers[f].intensity - truth[t].intensity});
    }
    for (std::size_t t = 0; t < truth.size(); ++t) {
        if (!truth_used[t]) {
            report.missed_truth.push_back(t);
        }
    }
    for (std::size_t f = 0; f < found.size(); ++f) {
        if (!found_used[f]) {
            report.spurious_found.push_back(f);
        }
    }
    return report;
}

} // namespace hsd
