#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include "lasersim/errors.hpp"

namespace lasersim {

using complexd = std::complex<double>;

// Default tolerances. The truncation tail tolerance bounds the probability
// mass a represented state may have beyond n_max; the normalization tolerance
// bounds acceptable drift of norms and probability sums.
inline constexpr double kDefaultTailTol = 1e-12;
inline constexpr double kDefaultNormTol = 1e-10;

// ============================================================================
// Fock space
// ============================================================================

/// Truncated Fock space |0>, ..., |n_max>.
struct FockSpace {
    int n_max;

    explicit FockSpace(int n_max_) : n_max(n_max_) {
        if (n_max < 1) throw DomainError("FockSpace: n_max must be >= 1");
    }

    int dim() const { return n_max + 1; }

    friend bool operator==(const FockSpace& a, const FockSpace& b) {
        return a.n_max == b.n_max;
    }
};

// ============================================================================
// Poisson helpers (log space; safe for large means)
// ============================================================================

inline double poisson_log_pmf(int n, double mean) {
    if (n < 0) return -std::numeric_limits<double>::infinity();
    if (mean == 0.0) return n == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return -mean + n * std::log(mean) - std::lgamma(n + 1.0);
}

inline double poisson_pmf(int n, double mean) {
    return std::exp(poisson_log_pmf(n, mean));
}

/// Probability mass of Poisson(mean) strictly above n.
inline double poisson_tail_above(int n, double mean) {
    if (mean == 0.0) return 0.0;
    // Sum the tail upward until terms are negligible.
    double tail = 0.0;
    double term = poisson_pmf(n + 1, mean);
    for (int k = n + 1; k < n + 1 + 100000; ++k) {
        tail += term;
        term *= mean / (k + 1);
        if (term < 1e-300 || term < 1e-18 * tail) break;
    }
    return tail;
}

// ============================================================================
// Banded operators
// ============================================================================

/// Real linear operator on the truncated Fock space stored by bands.
/// Band `d` holds the entries at (row n, column n+d); every operator used by
/// the gain and loss models has offsets in {0, +-1} but arbitrary offsets are
/// supported for compositions.
class BandedOperator {
  public:
    explicit BandedOperator(FockSpace space) : space_(space) {}

    const FockSpace& space() const { return space_; }
    int dim() const { return space_.dim(); }

    /// First row carrying an entry of band `d`.
    static int band_row_begin(int d) { return std::max(0, -d); }
    /// Number of entries of band `d` in a space of dimension `dim`.
    static int band_length(int d, int dim) { return dim - std::abs(d); }

    /// Install a band. `coeffs[j]` is the entry at row band_row_begin(d) + j.
    void set_band(int d, std::vector<double> coeffs) {
        if (std::abs(d) > space_.n_max)
            throw DomainError("BandedOperator: band offset outside [-n_max, n_max]");
        if (static_cast<int>(coeffs.size()) != band_length(d, dim()))
            throw DomainError("BandedOperator: band coefficient array has wrong length");
        bands_[d] = std::move(coeffs);
    }

    const std::map<int, std::vector<double>>& bands() const { return bands_; }

    /// Matrix element <row|O|col>; zero when no band covers it.
    double entry(int row, int col) const {
        const int d = col - row;
        auto it = bands_.find(d);
        if (it == bands_.end()) return 0.0;
        const int j = row - band_row_begin(d);
        if (j < 0 || j >= static_cast<int>(it->second.size())) return 0.0;
        return it->second[j];
    }

    /// Transpose (= adjoint for real entries). Band arrays carry over exactly.
    BandedOperator adjoint() const {
        BandedOperator out(space_);
        for (const auto& [d, c] : bands_) out.bands_[-d] = c;
        return out;
    }

    template <typename Scalar>
    std::vector<Scalar> apply(const std::vector<Scalar>& v) const {
        if (static_cast<int>(v.size()) != dim())
            throw DomainError("BandedOperator: vector dimension mismatch");
        std::vector<Scalar> out(v.size(), Scalar{});
        for (const auto& [d, c] : bands_) {
            const int rb = band_row_begin(d);
            for (int j = 0; j < static_cast<int>(c.size()); ++j)
                out[rb + j] += c[j] * v[rb + j + d];
        }
        return out;
    }

    friend BandedOperator multiply(const BandedOperator& a, const BandedOperator& b) {
        if (!(a.space_ == b.space_))
            throw DomainError("BandedOperator: space mismatch in product");
        const int n_max = a.space_.n_max;
        BandedOperator out(a.space_);
        for (const auto& [da, ca] : a.bands_) {
            for (const auto& [db, cb] : b.bands_) {
                const int d = da + db;
                if (std::abs(d) > n_max) continue;
                auto& acc = out.bands_[d];
                if (acc.empty()) acc.assign(band_length(d, a.dim()), 0.0);
                const int rb = band_row_begin(d);
                const int lo = std::max(band_row_begin(da), band_row_begin(db) - da);
                const int hi = std::min(band_row_begin(da) + band_length(da, a.dim()),
                                        band_row_begin(db) + band_length(db, a.dim()) - da);
                for (int n = lo; n < hi; ++n) {
                    const double va = ca[n - band_row_begin(da)];
                    const double vb = cb[n + da - band_row_begin(db)];
                    acc[n - rb] += va * vb;
                }
            }
        }
        return out;
    }

  private:
    FockSpace space_;
    std::map<int, std::vector<double>> bands_;
};

/// Annihilation operator a: single band d=+1 with entries sqrt(n+1).
inline BandedOperator annihilation_op(FockSpace space) {
    std::vector<double> c(space.n_max);
    for (int n = 0; n < space.n_max; ++n) c[n] = std::sqrt(n + 1.0);
    BandedOperator op(space);
    op.set_band(+1, std::move(c));
    return op;
}

/// Creation operator a^dag.
inline BandedOperator creation_op(FockSpace space) {
    return annihilation_op(space).adjoint();
}

/// Bare lowering operator e = sum |n-1><n| (all unit amplitudes).
inline BandedOperator sg_lowering_op(FockSpace space) {
    BandedOperator op(space);
    op.set_band(+1, std::vector<double>(space.n_max, 1.0));
    return op;
}

/// Shift-up operator S = e^dag = sum |n+1><n|.
inline BandedOperator shift_up_op(FockSpace space) {
    return sg_lowering_op(space).adjoint();
}

/// Diagonal operator with entries f(n).
inline BandedOperator diagonal_op(FockSpace space, const std::function<double(int)>& f) {
    std::vector<double> c(space.dim());
    for (int n = 0; n < space.dim(); ++n) c[n] = f(n);
    BandedOperator op(space);
    op.set_band(0, std::move(c));
    return op;
}

// ============================================================================
// States and distributions
// ============================================================================

/// Photon-number probability distribution P_0..P_{n_max}.
struct PhotonDistribution {
    std::vector<double> p;

    /// Build from non-negative weights, normalizing the total to one.
    static PhotonDistribution from_weights(std::vector<double> w) {
        double sum = 0.0;
        for (double x : w) {
            if (x < 0.0 || !std::isfinite(x))
                throw DomainError("PhotonDistribution: weights must be finite and >= 0");
            sum += x;
        }
        if (sum <= 0.0) throw DomainError("PhotonDistribution: zero total weight");
        for (double& x : w) x /= sum;
        return PhotonDistribution{std::move(w)};
    }

    int n_max() const { return static_cast<int>(p.size()) - 1; }

    /// Check the normalization invariant.
    bool is_normalized(double tol = kDefaultNormTol) const {
        double sum = std::accumulate(p.begin(), p.end(), 0.0);
        return std::abs(sum - 1.0) <= tol &&
               std::all_of(p.begin(), p.end(), [](double x) { return x >= 0.0; });
    }
};

/// First and second moments of a photon-number distribution.
struct Moments {
    double mean = 0.0;
    double variance = 0.0;

    /// Fano factor variance/mean; undefined at zero mean.
    double fano() const {
        if (mean == 0.0) throw DegenerateInput("Fano factor undefined for zero mean");
        return variance / mean;
    }
};

inline Moments moments(const PhotonDistribution& dist) {
    if (dist.p.empty()) throw DomainError("moments: empty distribution");
    double m1 = 0.0, m2 = 0.0;
    for (int n = 0; n < static_cast<int>(dist.p.size()); ++n) {
        m1 += n * dist.p[n];
        m2 += double(n) * n * dist.p[n];
    }
    return Moments{m1, std::max(0.0, m2 - m1 * m1)};
}

/// Pure state of the cavity mode over the truncated Fock basis.
struct PureState {
    FockSpace space;
    std::vector<complexd> amp;

    explicit PureState(FockSpace s) : space(s), amp(s.dim(), complexd{}) {}
    PureState(FockSpace s, std::vector<complexd> a) : space(s), amp(std::move(a)) {
        if (static_cast<int>(amp.size()) != space.dim())
            throw DomainError("PureState: amplitude length != dimension");
    }

    double norm_squared() const {
        double s = 0.0;
        for (const auto& a : amp) s += std::norm(a);
        return s;
    }
    double norm() const { return std::sqrt(norm_squared()); }

    void normalize() {
        const double n = norm();
        if (n <= 0.0) throw DomainError("PureState: cannot normalize zero state");
        for (auto& a : amp) a /= n;
    }

    PhotonDistribution photon_distribution() const {
        std::vector<double> w(amp.size());
        for (std::size_t n = 0; n < amp.size(); ++n) w[n] = std::norm(amp[n]);
        return PhotonDistribution::from_weights(std::move(w));
    }

    double mean_photon_number() const {
        double s = 0.0, m = 0.0;
        for (std::size_t n = 0; n < amp.size(); ++n) {
            const double w = std::norm(amp[n]);
            s += w;
            m += double(n) * w;
        }
        return m / s;
    }
};

/// <psi|O|psi>.
inline complexd expectation(const BandedOperator& op, const PureState& psi) {
    const auto v = op.apply(psi.amp);
    complexd acc{};
    for (std::size_t i = 0; i < v.size(); ++i) acc += std::conj(psi.amp[i]) * v[i];
    return acc;
}

/// Coherent state |alpha> truncated to the space and renormalized.
/// Amplitudes are evaluated in log space so large |alpha|^2 cannot overflow.
inline PureState coherent_state(complexd alpha, FockSpace space,
                                double tail_tol = kDefaultTailTol) {
    const double nbar = std::norm(alpha);
    if (nbar + 10.0 * std::sqrt(nbar) > space.n_max)
        throw TruncationError("coherent_state: |alpha|^2 + 10|alpha| exceeds n_max");
    const double tail = poisson_tail_above(space.n_max, nbar);
    if (tail > tail_tol)
        throw TruncationError("coherent_state: truncation tail mass exceeds tolerance");

    PureState psi(space);
    if (nbar == 0.0) {
        psi.amp[0] = 1.0;
        return psi;
    }
    const double log_mag_alpha = 0.5 * std::log(nbar);
    const double phase = std::arg(alpha);
    for (int n = 0; n <= space.n_max; ++n) {
        const double log_mag = -0.5 * nbar + n * log_mag_alpha - 0.5 * std::lgamma(n + 1.0);
        psi.amp[n] = std::polar(std::exp(log_mag), phase * n);
    }
    psi.normalize();
    return psi;
}

}  // namespace lasersim
