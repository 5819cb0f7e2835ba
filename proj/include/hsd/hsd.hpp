#pragma once

#include "hsd/forward.hpp"
#include "hsd/objective.hpp"
#include "hsd/powell.hpp"
#include "hsd/random.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <future>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace hsd {

/// Controls of the hybrid stochastic-deterministic search.
struct HsdParams {
    std::size_t m_cap{16};      ///< upper bound M on the number of scatterers
    double v_max{2.0};
    double p0{1.0};             ///< initial acceptance scale
    std::size_t t_max{1000};    ///< random tries per restart
    double eps_s{0.5};          ///< acceptance factor: accept when value < p0 * eps_s
    double eps_i{0.25};         ///< discharge below v_max * eps_i
    double eps_d{0.1};          ///< merge closer than eps_d * diam(B)
    double eps{1e-5};           ///< success tolerance on the polished value
    std::size_t n_max{6};       ///< restarts
    PowellOptions powell{};     ///< eval_budget is per point; scaled by N at each polish
    std::uint64_t master_seed{0};
    std::size_t threads{1};     ///< restarts run concurrently when > 1; results do not depend on it

    friend bool operator==(const HsdParams&, const HsdParams&) = default;
};

inline void validate(const HsdParams& p) {
    auto unit = [](double v) { return v > 0.0 && v < 1.0; };
    if (p.m_cap < 1) {
        throw ConfigError("params: M_cap must be at least 1");
    }
    if (!(p.v_max > 0.0)) {
        throw ConfigError("params: v_max must be positive");
    }
    if (!(p.p0 > 0.0)) {
        throw ConfigError("params: P0 must be positive");
    }
    if (p.t_max < 1) {
        throw ConfigError("params: T_max must be positive");
    }
    if (!unit(p.eps_s)) {
        throw ConfigError("params: eps_s must lie in (0, 1)");
    }
    if (!unit(p.eps_i)) {
        throw ConfigError("params: eps_i must lie in (0, 1)");
    }
    if (!unit(p.eps_d)) {
        throw ConfigError("params: eps_d must lie in (0, 1)");
    }
    if (!(p.eps > 0.0) || !(p.eps < p.p0)) {
        throw ConfigError("params: eps must be positive and below P0");
    }
    if (p.n_max < 1) {
        throw ConfigError("params: n_max must be positive");
    }
    validate(p.powell);
}

enum class StopReason {
    tolerance_met,
    tries_exhausted,
};

inline const char* to_string(StopReason r) {
    return r == StopReason::tolerance_met ? "tolerance_met" : "tries_exhausted";
}

struct RestartReport {
    Configuration best;
    std::size_t random_tries_used{0};
    std::size_t powell_invocations{0};
    std::size_t powell_evaluations{0};
    double powell_time_fraction{0.0};
    StopReason stop_reason{StopReason::tries_exhausted};
    std::vector<double> thresholds; ///< acceptance threshold p0 * eps_s after each polish that missed eps
};

struct HsdResult {
    Configuration best;          ///< winner after the final discharge + merge pass
    std::size_t winner{0};       ///< restart whose best value was smallest
    std::vector<RestartReport> reports;
};

/// Relative inset of the Powell bounds, so polished points stay strictly
/// inside the open box (in particular off the measurement plane).
inline constexpr double kBoundsInset = 1e-9;

inline Point3 random_point(const Box& box, RandomStream& rng) {
    const double x1 = rng.uniform(-box.a, box.a);
    const double x2 = rng.uniform(-box.b, box.b);
    const double x3 = rng.uniform(0.0, box.c);
    return {x1, x2, x3};
}

/// Keeps the given scatterers' positions, appends M - N uniform random
/// positions in the box and fits intensities on all M.
inline Configuration random_fill(std::span<const Scatterer> kept, const ObjectiveContext& ctx, RandomStream& rng) {
    if (kept.size() > ctx.m_cap()) {
        throw ContractViolation("random_fill: more kept points than M_cap");
    }
    std::vector<Point3> positions;
    positions.reserve(ctx.m_cap());
    for (const auto& s : kept) {
        positions.push_back(s.position);
    }
    while (positions.size() < ctx.m_cap()) {
        positions.push_back(random_point(ctx.box(), rng));
    }
    return fit_configuration(ctx, positions);
}

/// Drops every scatterer with intensity below v_max * eps_i; survivors keep their order.
/// The value field is carried over unchanged.
inline Configuration discharge(const Configuration& cfg, const HsdParams& params) {
    const double threshold = params.v_max * params.eps_i;
    Configuration out;
    out.value = cfg.value;
    for (const auto& s : cfg.scatterers) {
        if (!(s.intensity < threshold)) {
            out.scatterers.push_back(s);
        }
    }
    return out;
}

/// Reduction procedure: while some pair is closer than eps_d * diam(box),
/// fold the later point of the closest such pair into the earlier one
/// (position of the earlier kept, intensities summed, no clipping).
inline Configuration merge_close(const Configuration& cfg, const HsdParams& params, const Box& box) {
    const double threshold = params.eps_d * box.diameter();
    Configuration out = cfg;
    auto& s = out.scatterers;
    for (;;) {
        double closest = threshold;
        std::size_t keep = 0;
        std::size_t drop = 0;
        bool found = false;
        for (std::size_t m = 0; m < s.size(); ++m) {
            for (std::size_t n = m + 1; n < s.size(); ++n) {
                const double d = distance(s[m].position, s[n].position);
                if (d < closest) {
                    closest = d;
                    keep = m;
                    drop = n;
                    found = true;
                }
            }
        }
        if (!found) {
            return out;
        }
        s[keep].intensity += s[drop].intensity;
        s.erase(s.begin() + static_cast<std::ptrdiff_t>(drop));
    }
}

inline std::vector<double> flatten(std::span<const Point3> positions) {
    std::vector<double> x;
    x.reserve(3 * positions.size());
    for (const auto& p : positions) {
        x.push_back(p.x1);
        x.push_back(p.x2);
        x.push_back(p.x3);
    }
    return x;
}

inline std::vector<Point3> unflatten(std::span<const double> x) {
    std::vector<Point3> positions(x.size() / 3);
    for (std::size_t m = 0; m < positions.size(); ++m) {
        positions[m] = {x[3 * m], x[3 * m + 1], x[3 * m + 2]};
    }
    return positions;
}

struct PolishResult {
    Configuration cfg;
    PowellResult powell;
};

/// Box-restrained Powell minimization of the reduced objective over the 3N
/// coordinates of cfg; intensities are re-solved inside every evaluation.
inline PolishResult polish(const ObjectiveContext& ctx, const Configuration& cfg, const HsdParams& params) {
    const std::size_t n = cfg.size();
    const BoxBounds bounds = tile_box(ctx.box(), n, kBoundsInset);
    std::vector<double> x0 = flatten(cfg.positions());
    for (std::size_t i = 0; i < x0.size(); ++i) {
        x0[i] = std::clamp(x0[i], bounds.lower[i], bounds.upper[i]);
    }
    PowellOptions opts = params.powell;
    opts.eval_budget = params.powell.eval_budget * n;
    PowellResult pr = powell_minimize(
        [&ctx](std::span<const double> x) { return phi_tilde(ctx, unflatten(x)); }, std::move(x0), bounds, opts);
    Configuration polished = fit_configuration(ctx, unflatten(pr.x));
    return {std::move(polished), std::move(pr)};
}

/// One restart of the search (steps 1-5), seeded from (master_seed, index).
inline RestartReport run_restart(const ObjectiveContext& ctx, const HsdParams& params, std::size_t index) {
    using clock = std::chrono::steady_clock;
    const auto started = clock::now();
    clock::duration powell_time{};

    RandomStream rng(derive_seed(params.master_seed, StreamTag::restart, index));
    RestartReport report;
    std::optional<Configuration> best_polished;
    std::optional<Configuration> best_random;
    std::vector<Scatterer> kept;
    double p0 = params.p0;

    for (;;) {
        // Step 1: random tries until one beats the acceptance threshold.
        Configuration cfg;
        bool accepted = false;
        while (report.random_tries_used < params.t_max) {
            cfg = random_fill(kept, ctx, rng);
            ++report.random_tries_used;
            if (!best_random || cfg.value < best_random->value) {
                best_random = cfg;
            }
            if (cfg.value < p0 * params.eps_s) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            report.stop_reason = StopReason::tries_exhausted;
            break;
        }

        // Step 2.
        cfg = discharge(cfg, params);
        if (cfg.empty()) {
            kept.clear();
            continue;
        }
        // Step 3.
        cfg = merge_close(cfg, params, ctx.box());

        // Step 4.
        const auto t0 = clock::now();
        PolishResult polished = polish(ctx, cfg, params);
        powell_time += clock::now() - t0;
        ++report.powell_invocations;
        report.powell_evaluations += polished.powell.evals;
        if (!best_polished || polished.cfg.value < best_polished->value) {
            best_polished = polished.cfg;
        }
        if (polished.cfg.value < params.eps) {
            report.stop_reason = StopReason::tolerance_met;
            break;
        }
        p0 = polished.cfg.value;
        report.thresholds.push_back(p0 * params.eps_s);

        // Step 5.
        kept = polished.cfg.scatterers;
        if (report.random_tries_used >= params.t_max) {
            report.stop_reason = StopReason::tries_exhausted;
            break;
        }
    }

    report.best = best_polished ? *best_polished : *best_random;
    const auto total = clock::now() - started;
    report.powell_time_fraction =
        total.count() > 0 ? std::chrono::duration<double>(powell_time) / std::chrono::duration<double>(total) : 0.0;
    return report;
}

/// Final tidy-up of the winning configuration: discharge, merge, re-solve intensities.
inline Configuration finalize(const ObjectiveContext& ctx, const Configuration& cfg, const HsdParams& params) {
    const Configuration reduced = merge_close(discharge(cfg, params), params, ctx.box());
    return fit_configuration(ctx, reduced.positions());
}

/// Runs n_max independent restarts and returns the one with the smallest
/// reduced objective (after the final tidy-up pass).
inline HsdResult hsd_run(const ObjectiveContext& ctx, const HsdParams& params) {
    validate(params);
    if (params.m_cap != ctx.m_cap() || params.v_max != ctx.v_max()) {
        throw ConfigError("hsd_run: params and objective context disagree on M_cap or v_max");
    }

    HsdResult result;
    result.reports.resize(params.n_max);
    const std::size_t workers = std::max<std::size_t>(1, std::min(params.threads, params.n_max));
    if (workers == 1) {
        for (std::size_t i = 0; i < params.n_max; ++i) {
            result.reports[i] = run_restart(ctx, params, i);
        }
    } else {
        std::vector<std::future<void>> jobs;
        for (std::size_t w = 0; w < workers; ++w) {
            jobs.push_back(std::async(std::launch::async, [&, w] {
                for (std::size_t i = w; i < params.n_max; i += workers) {
                    result.reports[i] = run_restart(ctx, params, i);
                }
            }));
        }
        for (auto& job : jobs) {
            job.get();
        }
    }

    for (std::size_t i = 1; i < result.reports.size(); ++i) {
        if (result.reports[i].best.value < result.reports[result.winner].best.value) {
            result.winner = i;
        }
    }
    result.best = finalize(ctx, result.reports[result.winner].best, params);
    return result;
}

} // namespace hsd
