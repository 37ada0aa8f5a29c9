#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "lasersim/models.hpp"

namespace lasersim {

using SidebandVector = std::vector<complexd>;

// ============================================================================
// Stationary photon statistics
// ============================================================================

/// Stationary distribution of the k = 0 block, solved by the detailed-balance
/// recursion sub_n P_{n-1} = super_{n-1} P_n in log space, then verified as a
/// null vector of the generator.
inline PhotonDistribution stationary_distribution(const LaserModel& model) {
    const SidebandBlock block = sideband_block(model, 0);
    const int dim = block.dim();

    std::vector<double> logp(dim);
    logp[0] = 0.0;
    for (int i = 1; i < dim; ++i) {
        if (block.sub[i - 1] <= 0.0 || block.super[i - 1] <= 0.0)
            throw DomainError("stationary_distribution: non-positive birth/death rate");
        logp[i] = logp[i - 1] + std::log(block.sub[i - 1]) - std::log(block.super[i - 1]);
    }
    const double lmax = *std::max_element(logp.begin(), logp.end());
    std::vector<double> p(dim);
    double sum = 0.0;
    for (int i = 0; i < dim; ++i) {
        p[i] = std::exp(logp[i] - lmax);
        sum += p[i];
    }
    for (double& x : p) x /= sum;

    double residual = 0.0;
    const auto gp = block.apply(p);
    for (double r : gp) residual = std::max(residual, std::abs(r));
    if (residual > 1e-10)
        throw ConvergenceError("stationary_distribution: residual ||G0 P||_inf > 1e-10");

    return PhotonDistribution{std::move(p)};
}

// ============================================================================
// Stiff evolution of sideband vectors (TR-BDF2)
// ============================================================================

struct EvolveOptions {
    double rtol = 1e-9;
    double atol = 1e-12;
    double min_step = 1e-12;
    double initial_step = 0.0;  ///< 0 = choose automatically
    std::size_t max_steps = 50'000'000;
};

struct Evolution {
    std::vector<double> t;
    std::vector<SidebandVector> states;
    double tail_peak = 0.0;  ///< max over steps of sum |v| on the top 5 levels
    std::size_t steps_taken = 0;
};

namespace detail {

/// LU factorization of the tridiagonal matrix I - gamma*G without pivoting.
/// The raw sideband blocks are column diagonally dominant, which keeps this
/// factorization stable.
struct TridiagFactor {
    std::vector<double> low;    // multipliers
    std::vector<double> piv;    // pivots
    std::vector<double> upper;  // superdiagonal of I - gamma*G

    void factor(const SidebandBlock& g, double gamma) {
        const int n = g.dim();
        low.assign(std::max(0, n - 1), 0.0);
        piv.assign(n, 0.0);
        upper.assign(std::max(0, n - 1), 0.0);
        piv[0] = 1.0 - gamma * g.diag[0];
        for (int i = 0; i + 1 < n; ++i) {
            upper[i] = -gamma * g.super[i];
            if (piv[i] == 0.0)
                throw ConvergenceError("evolve_sideband: zero pivot in tridiagonal solve");
            low[i] = (-gamma * g.sub[i]) / piv[i];
            piv[i + 1] = 1.0 - gamma * g.diag[i + 1] - low[i] * upper[i];
        }
        if (piv[n - 1] == 0.0)
            throw ConvergenceError("evolve_sideband: zero pivot in tridiagonal solve");
    }

    void solve(std::vector<complexd>& x) const {
        const int n = static_cast<int>(piv.size());
        for (int i = 1; i < n; ++i) x[i] -= low[i - 1] * x[i - 1];
        x[n - 1] /= piv[n - 1];
        for (int i = n - 2; i >= 0; --i) x[i] = (x[i] - upper[i] * x[i + 1]) / piv[i];
    }
};

inline double top_levels_mass(const SidebandVector& v, int levels = 5) {
    const int n = static_cast<int>(v.size());
    double s = 0.0;
    for (int i = std::max(0, n - levels); i < n; ++i) s += std::abs(v[i]);
    return s;
}

}  // namespace detail

/// Integrate v' = G v with the L-stable one-step TR-BDF2 scheme (trapezoidal
/// stage to t + 2dh, BDF2 completion), embedded third-order error estimate
/// filtered through (I - dh G)^{-1}, and proportional step-size control.
/// Output states land exactly on the grid points.
inline Evolution evolve_sideband(const SidebandBlock& block, const SidebandVector& v0,
                                 const std::vector<double>& t_grid,
                                 const EvolveOptions& opts = {}) {
    const int n = block.dim();
    if (static_cast<int>(v0.size()) != n)
        throw DomainError("evolve_sideband: v0 dimension mismatch");
    if (t_grid.empty()) throw DomainError("evolve_sideband: empty time grid");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1]))
            throw DomainError("evolve_sideband: time grid must be strictly ascending");

    // TR-BDF2 as an ESDIRK scheme; d is the diagonal coefficient.
    const double d = 1.0 - std::sqrt(2.0) / 2.0;
    const double w = std::sqrt(2.0) / 4.0;
    const double e1 = (1.0 - std::sqrt(2.0)) / 3.0;
    const double e2 = 1.0 / 3.0;
    const double e3 = -2.0 * d / 3.0;

    Evolution result;
    result.t = t_grid;
    result.states.reserve(t_grid.size());
    result.states.push_back(v0);

    SidebandVector v = v0;
    result.tail_peak = detail::top_levels_mass(v);

    double rate_scale = 1.0;
    for (double x : block.diag) rate_scale = std::max(rate_scale, std::abs(x));
    double h = opts.initial_step > 0.0 ? opts.initial_step : 0.01 / rate_scale;

    detail::TridiagFactor lu;
    double factored_h = -1.0;

    std::vector<complexd> k1(n), k2(n), k3(n), z(n), est(n), vnew(n);

    double t = t_grid.front();
    for (std::size_t pt = 1; pt < t_grid.size(); ++pt) {
        const double t_out = t_grid[pt];
        while (t < t_out) {
            h = std::min(h, t_out - t);
            if (h < opts.min_step)
                throw StiffnessError("evolve_sideband: step size below minimum");
            if (++result.steps_taken > opts.max_steps)
                throw ConvergenceError("evolve_sideband: step budget exhausted");

            if (h * d != factored_h) {
                lu.factor(block, h * d);
                factored_h = h * d;
            }

            k1 = block.apply(v);
            // Trapezoidal stage to t + 2dh.
            for (int i = 0; i < n; ++i) z[i] = v[i] + h * d * k1[i];
            lu.solve(z);
            k2 = block.apply(z);
            // BDF2 completion stage to t + h.
            for (int i = 0; i < n; ++i) z[i] = v[i] + h * w * (k1[i] + k2[i]);
            lu.solve(z);
            vnew = z;
            k3 = block.apply(vnew);

            for (int i = 0; i < n; ++i)
                est[i] = h * (e1 * k1[i] + e2 * k2[i] + e3 * k3[i]);
            lu.solve(est);

            double err = 0.0;
            for (int i = 0; i < n; ++i) {
                const double scale =
                    opts.atol + opts.rtol * std::max(std::abs(v[i]), std::abs(vnew[i]));
                err = std::max(err, std::abs(est[i]) / scale);
            }

            if (err <= 1.0) {
                t += h;
                v.swap(vnew);
                result.tail_peak = std::max(result.tail_peak, detail::top_levels_mass(v));
            }
            const double grow = (err == 0.0) ? 5.0
                                             : std::clamp(0.9 * std::pow(err, -1.0 / 3.0),
                                                          0.2, 5.0);
            h *= grow;
        }
        result.states.push_back(v);
        t = t_out;
    }
    return result;
}

// ============================================================================
// First-order coherence and power spectrum
// ============================================================================

struct CorrelationSeries {
    std::vector<double> tau;   ///< units 1/kappa, ascending from 0
    std::vector<complexd> g1;  ///< normalized first-order coherence
    double tail_peak = 0.0;
};

/// Uniform grid covering `horizon` coherence times at `points_per_coherence`
/// samples each, where the coherence time is 2/fwhm.
inline std::vector<double> default_time_grid(double expected_fwhm, double horizon = 8.0,
                                             int points_per_coherence = 64) {
    if (expected_fwhm <= 0.0) throw DomainError("default_time_grid: fwhm must be > 0");
    const double t_coh = 2.0 / expected_fwhm;
    const int n_pts = static_cast<int>(std::lround(horizon * points_per_coherence));
    std::vector<double> grid(n_pts + 1);
    for (int i = 0; i <= n_pts; ++i) grid[i] = t_coh * i / points_per_coherence;
    return grid;
}

/// g1(tau) from the k = 1 sideband initialized at rho(0) = |alpha><alpha|
/// with alpha = sqrt(mu); g1(t) = sum_n f_n(t).
inline CorrelationSeries g1_series(const LaserModel& model, const std::vector<double>& t_grid,
                                   const EvolveOptions& opts = {}) {
    if (t_grid.empty() || t_grid.front() != 0.0)
        throw DomainError("g1_series: time grid must start at 0");

    const double alpha = std::sqrt(model.mu);
    const PureState psi = coherent_state(alpha, model.space, model.tail_tol);
    const SidebandBlock block = sideband_block(model, 1);

    const int dim = block.dim();
    SidebandVector v0(dim);
    for (int i = 0; i < dim; ++i) {
        const int nn = i + 1;  // level index n of v_n = rho_{n-1,n}
        v0[i] = psi.amp[nn - 1] * std::conj(psi.amp[nn]);
    }

    Evolution evo = evolve_sideband(block, v0, t_grid, opts);

    CorrelationSeries series;
    series.tau = t_grid;
    series.tail_peak = evo.tail_peak;
    series.g1.reserve(t_grid.size());
    for (const auto& v : evo.states) {
        complexd sum{};
        for (int i = 0; i < dim; ++i) sum += std::sqrt(double(i + 1)) * v[i];
        series.g1.push_back(sum / alpha);
    }
    if (std::abs(series.g1.front() - 1.0) > 1e-8)
        throw TruncationError("g1_series: g1(0) deviates from 1 beyond 1e-8");
    return series;
}

/// Exponential decay rate of |g1| from a least-squares fit of log|g1| on the
/// window [0.5, 4] coherence times (coherence time taken from the 1/e
/// crossing). Skips the short-time transient and the noisy tail.
inline double fitted_decay_rate(const CorrelationSeries& series) {
    const std::size_t n = series.tau.size();
    if (n < 4) throw GridError("fitted_decay_rate: series too short");
    const double a0 = std::abs(series.g1.front());
    if (a0 <= 0.0) throw DomainError("fitted_decay_rate: zero initial value");

    const double target = a0 * std::exp(-1.0);
    double t_coh = -1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double lo = std::abs(series.g1[i]);
        if (lo <= target) {
            const double hi = std::abs(series.g1[i - 1]);
            const double frac = (hi - target) / std::max(hi - lo, 1e-300);
            t_coh = series.tau[i - 1] + frac * (series.tau[i] - series.tau[i - 1]);
            break;
        }
    }
    if (t_coh <= 0.0) throw GridError("fitted_decay_rate: series never reaches 1/e");

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double tau = series.tau[i];
        if (tau < 0.5 * t_coh || tau > 4.0 * t_coh) continue;
        const double mag = std::abs(series.g1[i]);
        if (mag <= 0.0) continue;
        const double y = std::log(mag);
        sx += tau;
        sy += y;
        sxx += tau * tau;
        sxy += tau * y;
        ++count;
    }
    if (count < 3) throw GridError("fitted_decay_rate: fit window contains < 3 points");
    const double denom = count * sxx - sx * sx;
    const double slope = (count * sxy - sx * sy) / denom;
    return -slope;
}

struct Spectrum {
    std::vector<double> omega;  ///< units kappa
    std::vector<double> power;  ///< peak-normalized
    double fwhm = 0.0;
    double fit_decay = 0.0;  ///< exponential decay rate fitted to g1
};

/// Symmetric frequency grid spanning `half_width_in_fwhm` expected linewidths
/// either side of zero.
inline std::vector<double> default_omega_grid(double expected_fwhm,
                                              double half_width_in_fwhm = 10.0,
                                              int points = 2001) {
    if (expected_fwhm <= 0.0) throw DomainError("default_omega_grid: fwhm must be > 0");
    if (points < 3) throw DomainError("default_omega_grid: need >= 3 points");
    std::vector<double> grid(points);
    const double w = half_width_in_fwhm * expected_fwhm;
    for (int i = 0; i < points; ++i) grid[i] = -w + 2.0 * w * i / (points - 1);
    return grid;
}

namespace detail {

inline double half_max_crossing(const std::vector<double>& omega,
                                const std::vector<double>& power, int inside, int outside) {
    // Bisection on the linear interpolant between the bracketing grid points.
    double a = omega[inside], b = omega[outside];
    double fa = power[inside] - 0.5, fb = power[outside] - 0.5;
    const double slope = (power[outside] - power[inside]) / (omega[outside] - omega[inside]);
    (void)fb;
    for (int it = 0; it < 64; ++it) {
        const double mid = 0.5 * (a + b);
        const double fmid = power[inside] + slope * (mid - omega[inside]) - 0.5;
        if ((fa > 0.0) == (fmid > 0.0)) {
            a = mid;
            fa = fmid;
        } else {
            b = mid;
        }
    }
    return 0.5 * (a + b);
}

}  // namespace detail

/// Cosine transform P(omega) = int Re g1(tau) cos(omega tau) dtau by composite
/// trapezoid on the sampled grid, peak-normalized, with the FWHM located by
/// bisection on the linear interpolant.
inline Spectrum power_spectrum(const CorrelationSeries& series,
                               const std::vector<double>& omega_grid) {
    const std::size_t n = series.tau.size();
    if (n < 8) throw GridError("power_spectrum: series too short");
    if (omega_grid.size() < 3) throw GridError("power_spectrum: omega grid too short");
    for (std::size_t i = 1; i < omega_grid.size(); ++i)
        if (!(omega_grid[i] > omega_grid[i - 1]))
            throw GridError("power_spectrum: omega grid must be ascending");

    double peak_mag = 0.0;
    for (const auto& z : series.g1) peak_mag = std::max(peak_mag, std::abs(z));
    if (std::abs(series.g1.back()) > 1e-3 * peak_mag)
        throw GridError("power_spectrum: series must cover >= 8 coherence times "
                        "(tail of g1 too large)");

    Spectrum spec;
    spec.omega = omega_grid;
    spec.power.resize(omega_grid.size());
    spec.fit_decay = fitted_decay_rate(series);

    for (std::size_t k = 0; k < omega_grid.size(); ++k) {
        const double om = omega_grid[k];
        double acc = 0.0;
        for (std::size_t i = 1; i < n; ++i) {
            const double dt = series.tau[i] - series.tau[i - 1];
            const double f0 = series.g1[i - 1].real() * std::cos(om * series.tau[i - 1]);
            const double f1 = series.g1[i].real() * std::cos(om * series.tau[i]);
            acc += 0.5 * dt * (f0 + f1);
        }
        spec.power[k] = acc;
    }

    const auto peak_it = std::max_element(spec.power.begin(), spec.power.end());
    const double peak = *peak_it;
    if (peak <= 0.0) throw GridError("power_spectrum: non-positive peak");
    for (double& x : spec.power) x /= peak;
    const int ip = static_cast<int>(peak_it - spec.power.begin());

    int right = -1, left = -1;
    for (int i = ip + 1; i < static_cast<int>(spec.power.size()); ++i)
        if (spec.power[i] < 0.5) {
            right = i;
            break;
        }
    for (int i = ip - 1; i >= 0; --i)
        if (spec.power[i] < 0.5) {
            left = i;
            break;
        }
    if (right < 0 || left < 0)
        throw GridError("power_spectrum: omega grid does not bracket the half maximum");

    const double w_right =
        detail::half_max_crossing(spec.omega, spec.power, right - 1, right);
    const double w_left = detail::half_max_crossing(spec.omega, spec.power, left + 1, left);
    spec.fwhm = w_right - w_left;
    return spec;
}

// ============================================================================
// Eigenvalue route
// ============================================================================

/// Decay rate of the slowest mode: -max Re(eigenvalue) of the block. The
/// FWHM prediction for the k = 1 block is twice this value. Blocks whose
/// sub/super products are non-negative are diagonally similar to a symmetric
/// tridiagonal matrix and solved in that form; anything else falls back to a
/// dense general eigensolve.
inline double slowest_decay_rate(const SidebandBlock& block) {
    const int n = block.dim();
    if (n < 1) throw DomainError("slowest_decay_rate: empty block");
    if (n == 1) return -block.diag[0];

    bool symmetrizable = true;
    for (int i = 0; i + 1 < n; ++i)
        if (block.sub[i] * block.super[i] < 0.0) {
            symmetrizable = false;
            break;
        }

    if (symmetrizable) {
        Eigen::VectorXd diag(n), off(n - 1);
        for (int i = 0; i < n; ++i) diag[i] = block.diag[i];
        for (int i = 0; i + 1 < n; ++i)
            off[i] = std::sqrt(std::max(0.0, block.sub[i] * block.super[i]));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
        solver.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
        if (solver.info() != Eigen::Success)
            throw ConvergenceError("slowest_decay_rate: tridiagonal eigensolver failed");
        return -solver.eigenvalues().maxCoeff();
    }

    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        dense(i, i) = block.diag[i];
        if (i > 0) dense(i, i - 1) = block.sub[i - 1];
        if (i + 1 < n) dense(i, i + 1) = block.super[i];
    }
    Eigen::EigenSolver<Eigen::MatrixXd> solver(dense, false);
    if (solver.info() != Eigen::Success)
        throw ConvergenceError("slowest_decay_rate: dense eigensolver failed");
    return -solver.eigenvalues().real().maxCoeff();
}

}  // namespace lasersim
