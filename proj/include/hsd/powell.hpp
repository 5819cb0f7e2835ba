#pragma once

#include "hsd/forward.hpp"
#include "hsd/kernel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace hsd {

/// A line search met a non-finite objective value.
class SearchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PowellOptions {
    double value_tol{1e-9};       ///< stop when the relative decrease of a sweep falls below this
    std::size_t max_sweeps{100};
    double line_tol{1e-8};        ///< Brent abscissa tolerance
    std::size_t eval_budget{20000};

    friend bool operator==(const PowellOptions&, const PowellOptions&) = default;
};

inline void validate(const PowellOptions& opts) {
    if (!(opts.value_tol > 0.0) || !(opts.line_tol > 0.0) || opts.max_sweeps == 0 || opts.eval_budget == 0) {
        throw ConfigError("powell options must all be strictly positive");
    }
}

/// Per-coordinate closed bounds.
struct BoxBounds {
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t size() const { return lower.size(); }

    bool contains(std::span<const double> x) const {
        if (x.size() != lower.size()) {
            return false;
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!(x[i] >= lower[i] && x[i] <= upper[i])) {
                return false;
            }
        }
        return true;
    }
};

inline void validate(const BoxBounds& bounds) {
    if (bounds.lower.size() != bounds.upper.size()) {
        throw ContractViolation("bounds: lower and upper differ in length");
    }
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        if (!(bounds.lower[i] < bounds.upper[i])) {
            throw ContractViolation("bounds: lower must be below upper in every coordinate");
        }
    }
}

/// [-a,a] x [-b,b] x [0,c] repeated for each of `points` points, shrunk by
/// `inset` times the extent of each axis so that every feasible point lies
/// strictly inside the open box.
inline BoxBounds tile_box(const Box& box, std::size_t points, double inset = 0.0) {
    BoxBounds bounds;
    bounds.lower.reserve(3 * points);
    bounds.upper.reserve(3 * points);
    for (std::size_t p = 0; p < points; ++p) {
        for (std::size_t axis = 0; axis < 3; ++axis) {
            const double lo = box.lower(axis);
            const double hi = box.upper(axis);
            const double margin = inset * (hi - lo);
            bounds.lower.push_back(lo + margin);
            bounds.upper.push_back(hi - margin);
        }
    }
    return bounds;
}

struct LineInterval {
    double t_min{0.0};
    double t_max{0.0};
};

/// Largest interval [t_min, t_max] containing 0 such that x + t d stays in bounds.
inline LineInterval line_bounds(std::span<const double> x, std::span<const double> direction, const BoxBounds& bounds) {
    if (x.size() != direction.size() || x.size() != bounds.size()) {
        throw ContractViolation("line_bounds: dimension mismatch");
    }
    const bool nonzero = std::any_of(direction.begin(), direction.end(), [](double d) { return d != 0.0; });
    if (!nonzero) {
        throw ContractViolation("line_bounds: zero direction");
    }
    LineInterval interval{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = direction[i];
        if (d == 0.0) {
            continue;
        }
        const double to_lower = (bounds.lower[i] - x[i]) / d;
        const double to_upper = (bounds.upper[i] - x[i]) / d;
        interval.t_min = std::max(interval.t_min, std::min(to_lower, to_upper));
        interval.t_max = std::min(interval.t_max, std::max(to_lower, to_upper));
    }
    interval.t_min = std::min(interval.t_min, 0.0);
    interval.t_max = std::max(interval.t_max, 0.0);
    return interval;
}

struct LineMinimum {
    double t{0.0};
    double value{0.0};
};

/// Brent's derivative-free minimization on [t_min, t_max]: golden-section
/// steps safeguarded with successive parabolic interpolation. When 0 lies
/// strictly inside the interval the search starts there (value_at_zero saves
/// the evaluation), so the result never exceeds f(0). Endpoints are tried
/// explicitly when the search ends next to one.
template <class F>
LineMinimum brent_min(F&& f, double t_min, double t_max, double tol, std::optional<double> value_at_zero = {}) {
    if (!(t_min < t_max)) {
        throw ContractViolation("brent_min: empty interval");
    }
    if (!(tol > 0.0)) {
        throw ContractViolation("brent_min: tolerance must be positive");
    }
    auto eval = [&](double t) {
        const double y = f(t);
        if (!std::isfinite(y)) {
            throw SearchError("brent_min: non-finite objective value");
        }
        return y;
    };

    constexpr double golden = 0.3819660112501051; // (3 - sqrt 5) / 2
    constexpr double rel_eps = 1e-10;
    constexpr std::size_t max_iter = 200;

    double a = t_min;
    double b = t_max;
    double x = 0.0;
    double fx = 0.0;
    if (a < 0.0 && 0.0 < b) {
        x = 0.0;
        fx = value_at_zero ? *value_at_zero : eval(0.0);
    } else {
        x = a + golden * (b - a);
        fx = eval(x);
    }
    double w = x;
    double v = x;
    double fw = fx;
    double fv = fx;
    double d = 0.0;
    double e = 0.0;

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        const double mid = 0.5 * (a + b);
        const double tol1 = rel_eps * std::abs(x) + tol / 3.0;
        const double tol2 = 2.0 * tol1;
        if (std::abs(x - mid) <= tol2 - 0.5 * (b - a)) {
            break;
        }
        bool golden_step = true;
        if (std::abs(e) > tol1) {
            // Parabola through (x, fx), (w, fw), (v, fv).
            const double r = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0) {
                p = -p;
            }
            q = std::abs(q);
            const double e_prev = e;
            e = d;
            if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
                d = p / q;
                const double u = x + d;
                if (u - a < tol2 || b - u < tol2) {
                    d = mid >= x ? tol1 : -tol1;
                }
                golden_step = false;
            }
        }
        if (golden_step) {
            e = (x >= mid ? a : b) - x;
            d = golden * e;
        }
        const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0.0 ? tol1 : -tol1);
        const double fu = eval(u);
        if (fu <= fx) {
            (u >= x ? a : b) = x;
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            (u < x ? a : b) = u;
            if (fu <= fw || w == x) {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if (fu <= fv || v == x || v == w) {
                v = u;
                fv = fu;
            }
        }
    }

    LineMinimum best{x, fx};
    for (const double end : {t_min, t_max}) {
        if (std::abs(best.t - end) <= 3.0 * tol && best.t != end) {
            const double fe = eval(end);
            if (fe < best.value) {
                best = {end, fe};
            }
        }
    }
    return best;
}

enum class PowellStop {
    converged,
    max_sweeps,
    budget_exhausted,
};

struct PowellResult {
    std::vector<double> x;
    double value{0.0};
    std::size_t evals{0};
    std::size_t sweeps{0};
    PowellStop stop{PowellStop::converged};
    std::vector<double> sweep_values; ///< value at start, then after each sweep
};

namespace detail {

struct BudgetExhausted {};

inline bool nearly_dependent(const std::vector<std::vector<double>>& dirs) {
    const auto n = static_cast<Eigen::Index>(dirs.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            m(j, i) = dirs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    return std::abs(m.partialPivLu().determinant()) < 1e-8;
}

inline std::vector<std::vector<double>> coordinate_directions(std::size_t n) {
    std::vector<std::vector<double>> dirs(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        dirs[i][i] = 1.0;
    }
    return dirs;
}

} // namespace detail

/// Powell's direction-set method restricted to a box. Every line search runs
/// over the feasible segment (line_bounds) so iterates never leave the box.
/// After each sweep the normalized sweep displacement joins the set and is
/// followed by one more line search along it. The direction it displaces is
/// chosen among those not built by earlier sweeps, taking the one with the
/// largest step so the set stays as independent as possible; this keeps the
/// built directions mutually conjugate on a quadratic, so n sweeps plus one
/// locate its minimizer. A set that still becomes nearly linearly dependent
/// is reset to the coordinate axes.
template <class F>
PowellResult powell_minimize(F&& f, std::vector<double> x0, const BoxBounds& bounds, const PowellOptions& opts) {
    validate(opts);
    validate(bounds);
    if (!bounds.contains(x0)) {
        throw ContractViolation("powell_minimize: initial point is infeasible");
    }
    const std::size_t n = x0.size();

    PowellResult result;
    std::vector<double> best_x = x0;
    double best_value = std::numeric_limits<double>::infinity();

    auto eval = [&](std::span<const double> x) {
        if (result.evals >= opts.eval_budget) {
            throw detail::BudgetExhausted{};
        }
        ++result.evals;
        const double y = f(x);
        if (!std::isfinite(y)) {
            throw SearchError("powell_minimize: non-finite objective value");
        }
        if (y < best_value) {
            best_value = y;
            best_x.assign(x.begin(), x.end());
        }
        return y;
    };

    std::vector<double> x = std::move(x0);
    std::vector<double> trial(n);
    auto point_on_line = [&](std::span<const double> dir, double t) {
        for (std::size_t i = 0; i < n; ++i) {
            trial[i] = std::clamp(x[i] + t * dir[i], bounds.lower[i], bounds.upper[i]);
        }
    };
    // Minimizes along dir from x; moves x and fx on improvement and returns the step taken.
    auto line_search = [&](std::span<const double> dir, double& fx) {
        const LineInterval span_t = line_bounds(x, dir, bounds);
        if (!(span_t.t_max - span_t.t_min > 1e-14)) {
            return 0.0;
        }
        const LineMinimum found = brent_min(
            [&](double t) {
                point_on_line(dir, t);
                return eval(trial);
            },
            span_t.t_min, span_t.t_max, opts.line_tol, fx);
        if (!(found.value < fx)) {
            return 0.0;
        }
        point_on_line(dir, found.t);
        x = trial;
        fx = found.value;
        return found.t;
    };

    try {
        auto dirs = detail::coordinate_directions(n);
        // The last `conjugate` entries of dirs are sweep displacements built
        // since the last reset; they are searched last and never discarded.
        std::size_t conjugate = 0;
        double fx = eval(x);
        result.sweep_values.push_back(fx);
        result.stop = PowellStop::max_sweeps;
        std::vector<double> x_start(n);
        std::vector<double> steps(n);
        std::vector<double> displacement(n);

        while (result.sweeps < opts.max_sweeps) {
            const double f_start = fx;
            x_start = x;
            for (std::size_t i = 0; i < n; ++i) {
                steps[i] = line_search(dirs[i], fx);
            }
            ++result.sweeps;
            result.sweep_values.push_back(fx);

            if (2.0 * (f_start - fx) <= opts.value_tol * (std::abs(f_start) + std::abs(fx)) + 1e-300) {
                result.stop = PowellStop::converged;
                break;
            }

            double norm2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                displacement[i] = x[i] - x_start[i];
                norm2 += displacement[i] * displacement[i];
            }
            if (norm2 == 0.0) {
                continue;
            }
            const double norm = std::sqrt(norm2);
            for (auto& component : displacement) {
                component /= norm;
            }
            if (conjugate == n) {
                conjugate = 0;
            }
            // Replacing unit direction r scales |det| by |steps[r]| / norm.
            std::size_t drop = 0;
            for (std::size_t i = 1; i < n - conjugate; ++i) {
                if (std::abs(steps[i]) > std::abs(steps[drop])) {
                    drop = i;
                }
            }
            dirs.erase(dirs.begin() + static_cast<std::ptrdiff_t>(drop));
            dirs.push_back(displacement);
            ++conjugate;
            if (detail::nearly_dependent(dirs)) {
                dirs = detail::coordinate_directions(n);
                conjugate = 0;
                continue;
            }
            line_search(displacement, fx);
        }
    } catch (const detail::BudgetExhausted&) {
        result.stop = PowellStop::budget_exhausted;
    }

    result.x = std::move(best_x);
    result.value = best_value;
    return result;
}

} // namespace hsd
