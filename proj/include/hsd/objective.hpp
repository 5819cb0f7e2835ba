#pragma once

#include "hsd/forward.hpp"
#include "hsd/kernel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace hsd {

/// Singular values below this fraction of the largest are treated as zero.
inline constexpr double kRankCutoff = 1e-10;

/// Scatterers plus the reduced objective value at their positions.
struct Configuration {
    std::vector<Scatterer> scatterers;
    double value{0.0};

    std::size_t size() const { return scatterers.size(); }
    bool empty() const { return scatterers.empty(); }

    std::vector<Point3> positions() const {
        std::vector<Point3> out;
        out.reserve(scatterers.size());
        for (const auto& s : scatterers) {
            out.push_back(s.position);
        }
        return out;
    }

    friend bool operator==(const Configuration&, const Configuration&) = default;
};

/// Fixed inverse-problem data: measurements, search box, intensity bound and
/// the cap M on the number of scatterers. Immutable after construction and
/// safe to share between threads.
///
/// The pair set is fixed, so the context indexes the distinct source and
/// detector points once; each scatterer then costs one Green's function per
/// distinct endpoint instead of two per pair. The products are formed in the
/// same order as pair_kernel, so results are bitwise identical to it.
class ObjectiveContext {
public:
    ObjectiveContext(MeasurementSet measurement, Box box, double v_max, std::size_t m_cap)
        : measurement_(std::move(measurement)), box_(box), v_max_(v_max), m_cap_(m_cap) {
        validate(measurement_);
        validate(box_);
        if (!(v_max_ > 0.0)) {
            throw ConfigError("objective: v_max must be positive");
        }
        if (m_cap_ < 1) {
            throw ConfigError("objective: M must be at least 1");
        }
        index_endpoints();
        for (const auto& f : measurement_.data) {
            data_norm2_ += std::norm(f);
        }
    }

    const MeasurementSet& measurement() const { return measurement_; }
    const Box& box() const { return box_; }
    double v_max() const { return v_max_; }
    std::size_t m_cap() const { return m_cap_; }
    double k() const { return measurement_.k; }
    std::size_t pair_count() const { return measurement_.pairs.size(); }

    /// sum_j |f_j|^2, the residual of the empty model.
    double data_norm2() const { return data_norm2_; }

    /// Column of G_j(z) over all pairs j.
    void kernel_column(const Point3& z, Eigen::Ref<Eigen::VectorXcd> column) const {
        thread_local std::vector<Complex> g;
        g.resize(endpoints_.size());
        for (std::size_t e = 0; e < endpoints_.size(); ++e) {
            g[e] = green(endpoints_[e], z, measurement_.k);
        }
        for (std::size_t j = 0; j < source_index_.size(); ++j) {
            column[static_cast<Eigen::Index>(j)] = g[detector_index_[j]] * g[source_index_[j]];
        }
    }

    /// J x N matrix A_jm = G_j(z_m).
    Eigen::MatrixXcd design_matrix(std::span<const Point3> positions) const {
        Eigen::MatrixXcd a(static_cast<Eigen::Index>(pair_count()), static_cast<Eigen::Index>(positions.size()));
        for (std::size_t m = 0; m < positions.size(); ++m) {
            kernel_column(positions[m], a.col(static_cast<Eigen::Index>(m)));
        }
        return a;
    }

private:
    std::size_t endpoint_id(const Point3& p) {
        for (std::size_t e = 0; e < endpoints_.size(); ++e) {
            if (endpoints_[e] == p) {
                return e;
            }
        }
        endpoints_.push_back(p);
        return endpoints_.size() - 1;
    }

    void index_endpoints() {
        for (const auto& pair : measurement_.pairs) {
            source_index_.push_back(endpoint_id(pair.source));
            detector_index_.push_back(endpoint_id(pair.detector));
        }
    }

    MeasurementSet measurement_;
    Box box_;
    double v_max_;
    std::size_t m_cap_;
    double data_norm2_{0.0};
    std::vector<Point3> endpoints_;
    std::vector<std::size_t> source_index_;
    std::vector<std::size_t> detector_index_;
};

/// sum_j |f_j - sum_m A_jm v_m|^2 for a precomputed design matrix.
inline double residual_norm2(const ObjectiveContext& ctx, const Eigen::MatrixXcd& a, std::span<const double> v) {
    const auto& f = ctx.measurement().data;
    double total = 0.0;
    for (Eigen::Index j = 0; j < a.rows(); ++j) {
        Complex r = f[static_cast<std::size_t>(j)];
        for (Eigen::Index m = 0; m < a.cols(); ++m) {
            r -= a(j, m) * v[static_cast<std::size_t>(m)];
        }
        total += std::norm(r);
    }
    return total;
}

/// Full objective: sum_j |f_j - sum_m G_j(z_m) v_m|^2.
inline double phi(const ObjectiveContext& ctx, std::span<const Point3> positions, std::span<const double> intensities) {
    if (positions.size() != intensities.size()) {
        throw ContractViolation("phi: positions and intensities differ in length");
    }
    return residual_norm2(ctx, ctx.design_matrix(positions), intensities);
}

struct IntensityFit {
    std::vector<double> intensities;
    double value{0.0};
};

/// Least squares for real intensities against complex data (Re/Im rows
/// stacked), solved by SVD with a relative singular-value cutoff, then each
/// intensity clamped into [0, v_max]. This is solve-then-project; it is not an
/// exact box-constrained quadratic program.
inline IntensityFit solve_from_design(const ObjectiveContext& ctx, const Eigen::MatrixXcd& a) {
    const Eigen::Index n = a.cols();
    if (n == 0) {
        return {{}, ctx.data_norm2()};
    }
    const Eigen::Index rows = a.rows();
    const auto& f = ctx.measurement().data;

    Eigen::MatrixXd stacked(2 * rows, n);
    stacked.topRows(rows) = a.real();
    stacked.bottomRows(rows) = a.imag();
    Eigen::VectorXd rhs(2 * rows);
    for (Eigen::Index j = 0; j < rows; ++j) {
        rhs[j] = f[static_cast<std::size_t>(j)].real();
        rhs[rows + j] = f[static_cast<std::size_t>(j)].imag();
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(kRankCutoff);
    const Eigen::VectorXd solution = svd.solve(rhs);

    IntensityFit fit;
    fit.intensities.resize(static_cast<std::size_t>(n));
    for (Eigen::Index m = 0; m < n; ++m) {
        const double v = solution[m];
        fit.intensities[static_cast<std::size_t>(m)] = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, ctx.v_max());
    }
    fit.value = residual_norm2(ctx, a, fit.intensities);
    return fit;
}

inline IntensityFit solve_intensities(const ObjectiveContext& ctx, std::span<const Point3> positions) {
    return solve_from_design(ctx, ctx.design_matrix(positions));
}

/// Reduced objective: phi with intensities eliminated by solve_intensities.
inline double phi_tilde(const ObjectiveContext& ctx, std::span<const Point3> positions) {
    return solve_intensities(ctx, positions).value;
}

/// Configuration at the given positions with solved intensities.
inline Configuration fit_configuration(const ObjectiveContext& ctx, std::span<const Point3> positions) {
    const IntensityFit fit = solve_intensities(ctx, positions);
    Configuration cfg;
    cfg.value = fit.value;
    cfg.scatterers.reserve(positions.size());
    for (std::size_t m = 0; m < positions.size(); ++m) {
        cfg.scatterers.push_back({positions[m], fit.intensities[m]});
    }
    return cfg;
}

} // namespace hsd
