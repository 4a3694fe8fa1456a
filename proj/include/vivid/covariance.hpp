#pragma once

#include <Eigen/Dense>
#include <vector>

#include "vivid/field.hpp"
#include "vivid/rng.hpp"

namespace vivid {

/// Maps flattened-state indices back to 2-D grid positions; distances are
/// Euclidean on integer grid indices.
struct GridGeometry {
    int rows = 0;
    int cols = 0;

    int dim() const { return rows * cols; }

    double distance(int a, int b) const {
        const int ia = a / cols, ja = a % cols;
        const int ib = b / cols, jb = b % cols;
        const double di = ia - ib, dj = ja - jb;
        return std::sqrt(di * di + dj * dj);
    }
};

/// Dense symmetric covariance matrix (B, R, P and their reduced forms).
class CovarianceMatrix {
public:
    explicit CovarianceMatrix(Eigen::MatrixXd values);

    static CovarianceMatrix identity(int n, double scale = 1.0) {
        return CovarianceMatrix(scale * Eigen::MatrixXd::Identity(n, n));
    }

    int dim() const { return static_cast<int>(values_.rows()); }
    const Eigen::MatrixXd& values() const { return values_; }

    /// Smallest eigenvalue (dense symmetric solver); intended for tests and
    /// validation, not hot paths.
    double min_eigenvalue() const;

    /// PSD check against the tolerance lambda_min >= -tol_scale*trace/dim.
    bool is_psd(double tol_scale = 1e-8) const;

private:
    Eigen::MatrixXd values_;
};

/// Matern 3/2 correlation: (1 + r/L) * exp(-r/L).
double matern32(double r, double L);

/// Covariance over a flattened grid, entry (a,b) = sigma^2 * matern32(d(a,b), L).
CovarianceMatrix build_matern_cov(const GridGeometry& geom, double L, double sigma);

/// Gaspari-Cohn localization function (compactly supported on [0, 2)).
double gaspari_cohn(double rho);

/// Entrywise taper: out[a,b] = P[a,b] * gaspari_cohn(d(a,b)/L).
CovarianceMatrix localize(const CovarianceMatrix& P, const GridGeometry& geom, double L);

/// Uncentered empirical covariance (1/(n-1)) * sum r r^T over the residuals.
/// Residuals are used as given; no mean subtraction.
CovarianceMatrix empirical_cov(const std::vector<FlatVector>& residuals);

/// Symmetric factorization of an SPD/PSD covariance with reusable solves.
///
/// Factoring goes LLT first; on failure the diagonal gets one jitter of
/// 1e-10*trace/dim and LLT is retried; a PSD (possibly singular) matrix then
/// falls back to pivoted LDLT. Anything indefinite beyond tolerance throws.
class SpdFactor {
public:
    explicit SpdFactor(const CovarianceMatrix& C);

    int dim() const { return dim_; }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
    Eigen::MatrixXd solve_matrix(const Eigen::MatrixXd& rhs) const;

    /// r^T C^{-1} r.
    double quad(const Eigen::VectorXd& r) const;

    /// A matrix F with F F^T = C (up to the jitter); used for sampling.
    const Eigen::MatrixXd& sqrt_factor() const;

private:
    int dim_;
    bool use_llt_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
    mutable Eigen::MatrixXd sqrt_;  // built lazily
    mutable bool sqrt_ready_ = false;
};

/// Draw one sample from N(0, B) via a square-root factor of B.
FlatVector sample_correlated_noise(const CovarianceMatrix& B, Rng& rng);

/// Factor-once sampler for repeated draws from N(0, B).
class CorrelatedSampler {
public:
    explicit CorrelatedSampler(const CovarianceMatrix& B) : factor_(B) {}
    FlatVector sample(Rng& rng) const;

private:
    SpdFactor factor_;
};

}  // namespace vivid
