#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "lasersim/fock.hpp"

namespace lasersim {

// ============================================================================
// Model descriptor
// ============================================================================

enum class ModelKind { Standard, Unstimulated, Micromaser, Nonlinear };

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Standard: return "standard";
        case ModelKind::Unstimulated: return "unstimulated";
        case ModelKind::Micromaser: return "micromaser";
        case ModelKind::Nonlinear: return "nonlinear";
    }
    return "?";
}

inline std::optional<ModelKind> model_kind_from_string(std::string_view s) {
    if (s == "standard") return ModelKind::Standard;
    if (s == "unstimulated") return ModelKind::Unstimulated;
    if (s == "micromaser") return ModelKind::Micromaser;
    if (s == "nonlinear") return ModelKind::Nonlinear;
    return std::nullopt;
}

/// Gain model descriptor. All rates are in units of the cavity loss rate,
/// which is fixed to kappa = 1 internally and recorded only for unit
/// conversion on output.
class LaserModel {
  public:
    ModelKind kind;
    double mu;          ///< gain rate in units of kappa
    double epsilon;     ///< scaled interaction time (micromaser only, else 0)
    double kappa;       ///< loss rate, fixed to 1
    FockSpace space;
    double tail_tol;

    /// Truncation rule: keeps the Poisson(mu) tail below ~1e-12 for mu >= 1.
    static int default_n_max(double mu) {
        return static_cast<int>(std::ceil(mu + 10.0 * std::sqrt(mu) + 10.0));
    }

    /// Largest n_max with the nonlinear gain amplitude still positive
    /// (c_n = sqrt(n)(3 - n/mu) vanishes at n = 3 mu).
    static int nonlinear_n_max_cap(double mu) {
        int cap = static_cast<int>(std::floor(3.0 * mu));
        if (cap >= 3.0 * mu) --cap;
        return cap;
    }

    static LaserModel standard(double mu, std::optional<int> n_max = std::nullopt,
                               double tail_tol = kDefaultTailTol) {
        return LaserModel(ModelKind::Standard, mu, 0.0, n_max, tail_tol);
    }

    static LaserModel unstimulated(double mu, std::optional<int> n_max = std::nullopt,
                                   double tail_tol = kDefaultTailTol) {
        return LaserModel(ModelKind::Unstimulated, mu, 0.0, n_max, tail_tol);
    }

    static LaserModel micromaser(double mu, double epsilon,
                                 std::optional<int> n_max = std::nullopt,
                                 double tail_tol = kDefaultTailTol) {
        return LaserModel(ModelKind::Micromaser, mu, epsilon, n_max, tail_tol);
    }

    /// Micromaser parameterized by phi = epsilon * sqrt(mu).
    static LaserModel micromaser_phi(double mu, double phi,
                                     std::optional<int> n_max = std::nullopt,
                                     double tail_tol = kDefaultTailTol) {
        if (mu <= 0.0) throw DomainError("LaserModel: mu must be > 0");
        return micromaser(mu, phi / std::sqrt(mu), n_max, tail_tol);
    }

    static LaserModel nonlinear(double mu, std::optional<int> n_max = std::nullopt,
                                double tail_tol = kDefaultTailTol) {
        return LaserModel(ModelKind::Nonlinear, mu, 0.0, n_max, tail_tol);
    }

    /// phi = epsilon sqrt(mu) (micromaser).
    double phi() const { return epsilon * std::sqrt(mu); }

  private:
    LaserModel(ModelKind k, double mu_, double eps, std::optional<int> n_max_opt,
               double tail_tol_)
        : kind(k),
          mu(mu_),
          epsilon(eps),
          kappa(1.0),
          space(resolve_space(k, mu_, n_max_opt)),
          tail_tol(tail_tol_) {
        if (mu <= 0.0) throw DomainError("LaserModel: mu must be > 0");
        if (kind == ModelKind::Nonlinear && space.n_max >= 3.0 * mu)
            throw SizeGuard("LaserModel: nonlinear gain requires n_max < 3*mu");
        if (kind == ModelKind::Micromaser) {
            if (epsilon <= 0.0)
                throw DomainError("LaserModel: micromaser epsilon must be > 0");
            if (epsilon * std::sqrt(double(space.n_max)) >= M_PI)
                throw DomainError(
                    "LaserModel: first Rabi zero inside truncation "
                    "(epsilon*sqrt(n_max) must be < pi)");
        }
        // The stationary state is Poisson(mu) for every model in scope; its
        // truncation tail must stay below the tail tolerance.
        if (poisson_tail_above(space.n_max, mu) > tail_tol)
            throw TruncationError("LaserModel: Poisson(mu) tail beyond n_max exceeds tolerance");
    }

    static FockSpace resolve_space(ModelKind k, double mu, std::optional<int> n_max_opt) {
        if (mu <= 0.0) throw DomainError("LaserModel: mu must be > 0");
        int n_max = n_max_opt.value_or(default_n_max(mu));
        if (!n_max_opt && k == ModelKind::Nonlinear)
            n_max = std::min(n_max, nonlinear_n_max_cap(mu));
        return FockSpace(n_max);
    }
};

// ============================================================================
// Gain coefficients
// ============================================================================

/// Matrix element c_n = <n| gain operator |n-1> for the three photon-by-photon
/// models. The micromaser gain is not a single operator amplitude; use
/// gain_coefficient for it.
inline double gain_amplitude(const LaserModel& model, int n) {
    if (model.kind == ModelKind::Micromaser)
        throw ModelMismatch("gain_amplitude: micromaser gain has no single amplitude");
    if (n < 1 || n > model.space.n_max)
        throw DomainError("gain_amplitude: n outside [1, n_max]");
    switch (model.kind) {
        case ModelKind::Standard: return std::sqrt(double(n));
        case ModelKind::Unstimulated: return 1.0;
        case ModelKind::Nonlinear: {
            const double c = std::sqrt(double(n)) * (3.0 - n / model.mu);
            if (c <= 0.0) throw DomainError("gain_amplitude: nonlinear amplitude <= 0");
            return c;
        }
        default: break;
    }
    throw ModelMismatch("gain_amplitude: unknown model kind");
}

/// Multiplier g(n,m) of rho_{n-1,m-1} in the gain term
/// mu [ g(n,m) rho_{n-1,m-1} - rho_{n,m} ]. Satisfies g(n,n) = 1 for every
/// model, g symmetric, g in (0,1].
inline double gain_coefficient(const LaserModel& model, int n, int m) {
    if (n < 1 || n > model.space.n_max || m < 1 || m > model.space.n_max)
        throw DomainError("gain_coefficient: indices outside [1, n_max]");
    if (model.kind == ModelKind::Micromaser) {
        const double x = model.epsilon * std::sqrt(double(n));
        const double y = model.epsilon * std::sqrt(double(m));
        // 1 - cos(x)cos(y) written as sin^2((x-y)/2) + sin^2((x+y)/2); exact
        // and free of cancellation for small arguments.
        const double sd = std::sin(0.5 * (x - y));
        const double ss = std::sin(0.5 * (x + y));
        const double denom = sd * sd + ss * ss;
        if (denom < 1e-14)
            throw DomainError("gain_coefficient: micromaser resonant degeneracy "
                              "(1 - cos cos vanishes)");
        return std::sin(x) * std::sin(y) / denom;
    }
    const double cn = gain_amplitude(model, n);
    const double cm = gain_amplitude(model, m);
    return 2.0 * cn * cm / (cn * cn + cm * cm);
}

// ============================================================================
// Sideband blocks
// ============================================================================

/// Normalization of a k = 1 sideband vector.
enum class SidebandNorm {
    Raw,      ///< v_n = rho_{n-k,n}
    FSeries,  ///< v_n = sqrt(n) rho_{n-1,n} / alpha*  (k = 1 only)
};

/// Tridiagonal generator of one k-diagonal of the density matrix:
/// (G v)_n = sub_n v_{n-1} + diag_n v_n + super_n v_{n+1}, with v indexed by
/// n = k..n_max.
struct SidebandBlock {
    int k = 0;
    SidebandNorm norm = SidebandNorm::Raw;
    std::vector<double> sub;    ///< inflow from v_{n-1}, length dim-1
    std::vector<double> diag;   ///< length dim
    std::vector<double> super;  ///< inflow from v_{n+1}, length dim-1

    int dim() const { return static_cast<int>(diag.size()); }
    int level_of(int i) const { return k + i; }

    template <typename Scalar>
    std::vector<Scalar> apply(const std::vector<Scalar>& v) const {
        if (static_cast<int>(v.size()) != dim())
            throw DomainError("SidebandBlock: vector dimension mismatch");
        std::vector<Scalar> out(v.size());
        const int n = dim();
        for (int i = 0; i < n; ++i) {
            Scalar acc = diag[i] * v[i];
            if (i > 0) acc += sub[i - 1] * v[i - 1];
            if (i + 1 < n) acc += super[i] * v[i + 1];
            out[i] = acc;
        }
        return out;
    }
};

/// Build the generator of the k-diagonal. For k = 0 this is the photon-number
/// birth-death generator P_n' = mu (P_{n-1} - P_n) + (n+1) P_{n+1} - n P_n.
/// Gain out of the top level is dropped (no reflecting boundary); the tail
/// monitor in the dynamics layer asserts the boundary is never reached.
inline SidebandBlock sideband_block(const LaserModel& model, int k,
                                    SidebandNorm norm = SidebandNorm::Raw) {
    if (k < 0 || k > model.space.n_max)
        throw DomainError("sideband_block: k outside [0, n_max]");
    if (norm == SidebandNorm::FSeries && k != 1)
        throw DomainError("sideband_block: f-series normalization requires k = 1");

    const int n_max = model.space.n_max;
    const int dim = n_max - k + 1;
    SidebandBlock block;
    block.k = k;
    block.norm = norm;
    block.sub.resize(dim - 1);
    block.diag.resize(dim);
    block.super.resize(dim - 1);

    for (int i = 0; i < dim; ++i) {
        const int n = k + i;
        block.diag[i] = -model.mu - 0.5 * (2.0 * n - k);
        if (n >= k + 1) {
            double g = gain_coefficient(model, n - k, n);
            if (norm == SidebandNorm::FSeries) g *= std::sqrt(double(n) / (n - 1));
            block.sub[i - 1] = model.mu * g;
        }
        if (n <= n_max - 1) {
            block.super[i] = (norm == SidebandNorm::FSeries)
                                 ? double(n)
                                 : std::sqrt(double(n + 1) * (n + 1 - k));
        }
    }
    return block;
}

// ============================================================================
// Full generator
// ============================================================================

/// Action of the full master equation rho -> rho_dot on dense density
/// matrices. Intended as a cross-check oracle for the sideband blocks; guarded
/// to modest dimensions.
class FullGenerator {
  public:
    explicit FullGenerator(const LaserModel& model) : model_(model) {
        if (model.space.n_max > 400)
            throw SizeGuard("FullGenerator: n_max > 400");
        const int n_max = model.space.n_max;
        gain_.resize(n_max, n_max);
        for (int n = 1; n <= n_max; ++n)
            for (int m = 1; m <= n_max; ++m)
                gain_(n - 1, m - 1) = gain_coefficient(model, n, m);
    }

    int dim() const { return model_.space.dim(); }

    Eigen::MatrixXcd apply(const Eigen::MatrixXcd& rho) const {
        const int d = dim();
        if (rho.rows() != d || rho.cols() != d)
            throw DomainError("FullGenerator: density matrix dimension mismatch");
        const double mu = model_.mu;
        Eigen::MatrixXcd out(d, d);
        for (int n = 0; n < d; ++n) {
            for (int m = 0; m < d; ++m) {
                complexd acc = -(mu + 0.5 * (n + m)) * rho(n, m);
                if (n >= 1 && m >= 1)
                    acc += mu * gain_(n - 1, m - 1) * rho(n - 1, m - 1);
                if (n + 1 < d && m + 1 < d)
                    acc += std::sqrt(double(n + 1) * (m + 1)) * rho(n + 1, m + 1);
                out(n, m) = acc;
            }
        }
        return out;
    }

    const LaserModel& model() const { return model_; }

  private:
    LaserModel model_;
    Eigen::MatrixXd gain_;
};

inline FullGenerator full_generator(const LaserModel& model) {
    return FullGenerator(model);
}

}  // namespace lasersim
